#pragma once

#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "fallacy/model.hpp"
#include "fallacy/retrieval.hpp"

namespace fallacy {

struct IbrConfig {
    EncoderConfig encoder = [] {
        EncoderConfig e;
        e.max_len = 128;
        return e;
    }();
    int k_cases = 5;
    int num_attention_heads = 8;
    bool attention_enabled = true;
    int classifier_hidden = 32;
    double dropout = 0.1;
    std::string retriever = "hash-word:256";
    std::string separator = "<SEP>";
    double similarity_threshold = 0.5;
    FilterOrder filter_order = FilterOrder::filter_then_truncate;

    void validate() const;
    nlohmann::json to_json() const;
    static IbrConfig from_json(const nlohmann::json& j);
};

// S = C, separator, neighbour texts in rank order, joined by single spaces.
// With no neighbours S is C verbatim.
std::string compose_input(const std::string& case_text, const std::vector<std::string>& neighbor_texts,
                          const std::string& separator = "<SEP>");

// Token ids for S: <CLS>, C, then <SEP> and neighbours while room is left.
// C is cut only when it alone exceeds max_len - 1.
EncoderInput compose_tokens(const HashingVocab& vocab, const std::string& case_text,
                            const std::vector<std::string>& neighbor_texts, int max_len);

// Multi-head attention with E_C as queries and E_S as keys/values; output
// has E_C's shape. Disabled -> E_C itself.
nn::Var adapt(const nn::ParamSet& params, int heads, const nn::Var& e_c, const nn::Var& e_s,
              bool attention_enabled, const std::string& prefix = "adapter.");

class IbrClassifier : public Classifier {
public:
    IbrClassifier(IbrConfig cfg, LabelSpace labels, std::uint64_t seed,
                  std::shared_ptr<const SentenceEncoder> retriever = nullptr);

    std::string method() const override { return "ibr"; }
    const LabelSpace& labels() const override { return labels_; }
    const EncoderConfig& encoder_config() const override { return cfg_.encoder; }
    nn::ParamSet& params() override { return params_; }
    void prepare(const DatasetSplit& train, std::uint64_t seed) override;
    nn::Var logits(const Argument& a, ForwardContext& ctx) override;
    nlohmann::json explain(const Argument& a) override;
    bool supports_explanations() const override { return true; }
    nlohmann::json config_json() const override { return cfg_.to_json(); }

    const IbrConfig& config() const { return cfg_; }
    void set_case_base(CaseBase base) { case_base_ = std::move(base); }
    // When set, prepare() reuses case bases stored there (keyed by encoder
    // fingerprint and training texts).
    void set_cache_dir(std::filesystem::path dir) { cache_dir_ = std::move(dir); }
    const CaseBase& case_base() const { return case_base_; }
    const SentenceEncoder& retriever() const { return *retriever_; }
    // How many training retrievals dropped the query's own id.
    std::size_t self_exclusions() const { return self_exclusions_; }

    RetrievalResult neighbors(const Argument& a, const std::string* exclude_id) const;

private:
    IbrConfig cfg_;
    LabelSpace labels_;
    HashingVocab vocab_;
    nn::ParamSet params_;
    std::shared_ptr<const SentenceEncoder> retriever_;
    CaseBase case_base_;
    std::filesystem::path cache_dir_;
    std::size_t self_exclusions_ = 0;
};

}  // namespace fallacy

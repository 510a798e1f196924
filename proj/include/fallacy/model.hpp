#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "fallacy/corpus.hpp"
#include "fallacy/nn.hpp"
#include "fallacy/taxonomy.hpp"
#include "fallacy/text.hpp"

namespace fallacy {

enum class Pooling { mean, first_token };
std::string_view to_string(Pooling p);
Pooling parse_pooling(std::string_view s);

// Small post-LN transformer encoder. Stands in for the pretrained encoders;
// the same code path accepts soft positions and a visibility mask.
struct EncoderConfig {
    int vocab_size = 4096;
    int hidden = 32;
    int heads = 4;
    int layers = 1;
    int ffn = 64;
    int max_len = 64;
    double dropout = 0.1;
    double init_scale = 0.5;

    void validate() const;
    nlohmann::json to_json() const;
    static EncoderConfig from_json(const nlohmann::json& j);
    bool operator==(const EncoderConfig&) const = default;
};

struct EncoderInput {
    std::vector<int> ids;
    std::vector<int> positions;  // empty -> 0..n-1
    std::optional<nn::Matrix> visible;  // n x n, 1 = may attend
};

namespace encoder {

void init(nn::ParamSet& params, const EncoderConfig& cfg, std::mt19937_64& rng,
          const std::string& prefix = "encoder.");

// Token states, one row per input token.
nn::Var forward(const nn::ParamSet& params, const EncoderConfig& cfg, const EncoderInput& in,
                bool train, std::mt19937_64* rng, const std::string& prefix = "encoder.");

nn::Var pool(const nn::Var& states, Pooling pooling);

// <CLS> + tokens, truncated to max_len.
EncoderInput encode_text(const HashingVocab& vocab, std::string_view text, int max_len);

}  // namespace encoder

namespace attention {

void init(nn::ParamSet& params, const std::string& prefix, int width, std::mt19937_64& rng);

// Standard multi-head attention: query rows attend over key/value rows.
// `visible` (query_len x kv_len, 1 = visible) is optional.
nn::Var forward(const nn::ParamSet& params, const std::string& prefix, int heads,
                const nn::Var& query, const nn::Var& key_value,
                const nn::Matrix* visible = nullptr);

}  // namespace attention

namespace head {

// Two-layer perceptron with GELU.
void init(nn::ParamSet& params, int in, int hidden, int classes, std::mt19937_64& rng,
          const std::string& prefix = "head.");
nn::Var forward(const nn::ParamSet& params, const nn::Var& pooled, double dropout, bool train,
                std::mt19937_64* rng, const std::string& prefix = "head.");

}  // namespace head

nlohmann::json params_to_json(const nn::ParamSet& params);
// Loads values into an already-shaped ParamSet. Every expected tensor must be
// present with the same shape; otherwise ArchitectureMismatch names it.
void params_from_json(nn::ParamSet& params, const nlohmann::json& j);
nn::ParamSet params_snapshot(const nn::ParamSet& params);
void params_assign(nn::ParamSet& dst, const nn::ParamSet& src, const std::string& prefix = "");

struct Prediction {
    std::size_t label = 0;
    std::vector<double> probabilities;
    nlohmann::json explanation;  // method-native; null for the plain baseline
};

struct ForwardContext {
    bool train = false;
    std::mt19937_64* rng = nullptr;
    // Leakage guard for methods that look up training cases.
    const std::string* exclude_id = nullptr;
};

// Common surface for every trainable classifier (baseline, IBR, PBR, KI).
class Classifier {
public:
    virtual ~Classifier() = default;

    virtual std::string method() const = 0;
    virtual const LabelSpace& labels() const = 0;
    virtual const EncoderConfig& encoder_config() const = 0;
    virtual nn::ParamSet& params() = 0;
    const nn::ParamSet& params() const { return const_cast<Classifier*>(this)->params(); }

    // Called once before training with the train split (case bases,
    // prototype initialization, class weights).
    virtual void prepare(const DatasetSplit& train, std::uint64_t seed) { (void)train; (void)seed; }

    // Called after a full set of trained weights was loaded into params().
    virtual void weights_loaded() {}

    // Logits (1 x C) for one argument.
    virtual nn::Var logits(const Argument& a, ForwardContext& ctx) = 0;

    // Mean loss over a batch; the default is (optionally class-weighted) CE.
    virtual nn::Var batch_loss(const std::vector<const Argument*>& batch, Granularity task,
                               ForwardContext& ctx);

    virtual Prediction predict(const Argument& a);
    // Scores used for ranking predictions over the task label space.
    virtual std::vector<double> probabilities(const nn::Var& logits) const;

    virtual nlohmann::json explain(const Argument& a) {
        (void)a;
        return nullptr;
    }
    virtual bool supports_explanations() const { return false; }

    // Method-specific config (architecture + knobs), written into checkpoints.
    virtual nlohmann::json config_json() const = 0;

    // Label index used as the training target for a task label.
    virtual std::size_t target_index(const std::string& label) const { return labels().index(label); }

    std::uint64_t encoder_hash() const { return params().hash("encoder."); }
    std::uint64_t weight_hash() const { return params().hash(); }

    void set_class_weights(std::vector<double> w) { class_weights_ = std::move(w); }
    const std::vector<double>& class_weights() const { return class_weights_; }

protected:
    std::vector<double> class_weights_;
};

// Inverse class frequency normalized to mean 1 over classes present in the split.
std::vector<double> inverse_frequency_weights(const DatasetSplit& split, const LabelSpace& labels);

// Plain encoder + first-token pooling + two-layer head.
struct BaselineConfig {
    EncoderConfig encoder;
    int classifier_hidden = 32;
    double dropout = 0.1;
    Pooling pooling = Pooling::first_token;

    nlohmann::json to_json() const;
    static BaselineConfig from_json(const nlohmann::json& j);
};

class BaselineClassifier : public Classifier {
public:
    BaselineClassifier(BaselineConfig cfg, LabelSpace labels, std::uint64_t seed);

    std::string method() const override { return "baseline"; }
    const LabelSpace& labels() const override { return labels_; }
    const EncoderConfig& encoder_config() const override { return cfg_.encoder; }
    nn::ParamSet& params() override { return params_; }
    nn::Var logits(const Argument& a, ForwardContext& ctx) override;
    nlohmann::json config_json() const override { return cfg_.to_json(); }

    const BaselineConfig& config() const { return cfg_; }
    // Replaces the head with a freshly initialized one for `labels`.
    void reset_head(LabelSpace labels, std::uint64_t seed);

private:
    BaselineConfig cfg_;
    LabelSpace labels_;
    HashingVocab vocab_;
    nn::ParamSet params_;
};

// --- checkpoints ---

struct Checkpoint {
    std::string method;
    Granularity task = Granularity::binary;
    LabelSpace labels;
    nlohmann::json config;
    nlohmann::json params;
    nlohmann::json extra;  // method side data (case base path, kg path, ...)

    std::string fingerprint() const;  // hash of method + config + labels
    nlohmann::json to_json() const;
    static Checkpoint from_json(const nlohmann::json& j);
    void save(const std::filesystem::path& path) const;
    static Checkpoint load(const std::filesystem::path& path);
};

}  // namespace fallacy

#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "fallacy/model.hpp"

namespace fallacy {

inline constexpr std::string_view kNoneClass = "None";

struct PbrConfig {
    EncoderConfig encoder;
    int num_positive_prototypes = 49;
    int num_negative_prototypes = 1;
    bool use_none_class = true;
    double lambda_examples = 1.0;    // examples -> nearest own-class prototype
    double lambda_prototypes = 1.0;  // prototypes -> nearest same-class batch example
    bool class_weighting = true;
    int early_stopping_patience = 10;

    void validate() const;
    nlohmann::json to_json() const;
    static PbrConfig from_json(const nlohmann::json& j);
};

// Fixed prototype-to-class assignment. Columns are the positive classes in
// label order, then "None" when negatives > 0.
struct ClassMask {
    Eigen::MatrixXd m;                          // P x C'
    std::vector<int> class_of;                  // prototype -> column
    std::vector<std::vector<Eigen::Index>> prototypes_of;  // column -> prototypes

    int prototypes() const { return static_cast<int>(m.rows()); }
    int columns() const { return static_cast<int>(m.cols()); }
};

// Positives split as evenly as possible over `classes`, remainder to the
// earliest classes; negatives all go to the trailing None column.
ClassMask assign_mask(int positives, int classes, int negatives);

struct PbrForwardTrace {
    Eigen::RowVectorXd encoded;
    Eigen::RowVectorXd distances;        // P
    Eigen::MatrixXd masked_distances;    // C' x P, +inf where masked out
    Eigen::RowVectorXd logits;           // C'
    std::vector<double> probabilities;   // task labels
};

struct PbrLossTerms {
    nn::Var cross_entropy;
    nn::Var examples_to_prototypes;
    nn::Var prototypes_to_examples;
    nn::Var total;
};

struct Exemplar {
    std::string id;
    std::string text;
    double distance = 0.0;
};

struct PrototypeMatch {
    int prototype = 0;
    double distance = 0.0;
    std::string assigned_class;
    std::vector<Exemplar> exemplars;
};

class PbrClassifier : public Classifier {
public:
    PbrClassifier(PbrConfig cfg, LabelSpace labels, std::uint64_t seed);

    std::string method() const override { return "pbr"; }
    const LabelSpace& labels() const override { return labels_; }
    const EncoderConfig& encoder_config() const override { return cfg_.encoder; }
    nn::ParamSet& params() override { return params_; }

    // Class weights, prototype initialization (unless already trained) and
    // the exemplar cache.
    void prepare(const DatasetSplit& train, std::uint64_t seed) override;
    nn::Var logits(const Argument& a, ForwardContext& ctx) override;
    nn::Var batch_loss(const std::vector<const Argument*>& batch, Granularity task,
                       ForwardContext& ctx) override;
    std::vector<double> probabilities(const nn::Var& logits) const override;
    std::size_t target_index(const std::string& label) const override;
    nlohmann::json explain(const Argument& a) override;
    bool supports_explanations() const override { return true; }
    nlohmann::json config_json() const override { return cfg_.to_json(); }

    const PbrConfig& config() const { return cfg_; }
    const ClassMask& mask() const { return mask_; }
    // Output column names (positive classes, then None when present).
    const std::vector<std::string>& columns() const { return columns_; }

    nn::Var encode(const Argument& a, ForwardContext& ctx);
    // Logits from an already encoded 1 x D row.
    nn::Var logits_from_encoding(const nn::Var& encoded);
    PbrForwardTrace trace(const Argument& a);
    PbrLossTerms loss_terms(const std::vector<const Argument*>& batch, Granularity task,
                            ForwardContext& ctx);
    PbrLossTerms loss_terms_from_encodings(const nn::Var& encodings, const std::vector<std::size_t>& columns,
                                           const std::vector<double>& weights);

    void cache_exemplars(const DatasetSplit& train);
    std::vector<PrototypeMatch> nearest_prototypes(const Argument& a, int top_n, int exemplars = 2);

    // Rows = prototypes, tab-separated values.
    void export_matrix(const std::filesystem::path& path) const;
    // class -> [{prototype, count}] sorted by count, from the nearest
    // prototype of every cached training example.
    nlohmann::json responsibility_table() const;

    void weights_loaded() override { prototypes_initialized_ = true; }
    bool prototypes_initialized() const { return prototypes_initialized_; }

    nlohmann::json exemplars_json() const;
    void load_exemplars(const nlohmann::json& j);

private:
    PbrConfig cfg_;
    LabelSpace labels_;
    std::vector<std::string> columns_;
    std::vector<std::size_t> label_to_column_;
    bool none_is_label_ = false;
    ClassMask mask_;
    HashingVocab vocab_;
    nn::ParamSet params_;
    bool prototypes_initialized_ = false;

    std::vector<std::string> cache_ids_, cache_texts_, cache_labels_;
    mutable Eigen::MatrixXd cache_embeddings_;
    mutable std::uint64_t cache_hash_ = 0;
    const Eigen::MatrixXd& cached_embeddings() const;
};

}  // namespace fallacy

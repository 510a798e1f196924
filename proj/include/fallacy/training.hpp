#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "fallacy/corpus.hpp"
#include "fallacy/evalreport.hpp"
#include "fallacy/model.hpp"

namespace fallacy {

struct TrainOptions {
    int epochs = 10;
    int batch_size = 32;
    double learning_rate = 5e-5;
    double weight_decay = 0.0;
    bool cosine_schedule = true;
    int patience = 0;  // 0 = run every epoch
    std::uint64_t seed = 13;
    bool verbose = false;

    void validate() const;
    nlohmann::json to_json() const;
    static TrainOptions from_json(const nlohmann::json& j, TrainOptions defaults);
    static TrainOptions from_json(const nlohmann::json& j);
};

struct EpochStats {
    int epoch = 0;
    double train_loss = 0.0;
    Metrics dev;
    double seconds = 0.0;  // optimizer time only
};

struct TrainResult {
    std::vector<EpochStats> history;
    int best_epoch = 0;
    Metrics best_dev;
    double prepare_seconds = 0.0;  // case base / prototype setup, not in epoch times
    std::uint64_t start_encoder_hash = 0;
    std::uint64_t best_encoder_hash = 0;

    std::vector<double> epoch_seconds() const;
    nlohmann::json to_json() const;
};

// Fits `model` on splits.train, selects the epoch with the best dev
// weighted F1 (accuracy breaks ties) and leaves those weights in the model.
// `prepare` is not called here; callers decide when to (re)prepare.
TrainResult train_classifier(Classifier& model, const SplitSet& splits, Granularity task,
                             const TrainOptions& opts);

struct Evaluation {
    std::vector<std::string> ids;
    std::vector<std::string> gold;
    std::vector<std::string> predicted;
    std::vector<nlohmann::json> explanations;
    Metrics metrics;
};

// Predicts every argument in `split` that carries a label for `task`.
Evaluation evaluate_split(Classifier& model, const DatasetSplit& split, Granularity task,
                          bool with_explanations = false);

// Report for one run (metrics, per-class table, epoch times, explanations).
EvalReport evaluation_report(const Evaluation& eval, const Classifier& model, Granularity task,
                             const std::string& dataset, const DatasetSplit& train,
                             std::uint64_t seed, const TrainResult* training = nullptr);

// Evaluates without any weight update and tags the report out-of-domain.
// Throws LabelSpaceMismatch when the target holds labels the model lacks.
EvalReport zero_shot_eval(Classifier& model, const DatasetSplit& target, Granularity task,
                          const std::string& dataset, std::uint64_t seed = 0);

}  // namespace fallacy

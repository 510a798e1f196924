#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "fallacy/evalreport.hpp"
#include "fallacy/model.hpp"
#include "fallacy/training.hpp"

namespace fallacy {

enum class CurriculumVariant { none, fcl, rcl };
std::string_view to_string(CurriculumVariant v);
CurriculumVariant parse_curriculum_variant(std::string_view s);

struct CurriculumPlan {
    CurriculumVariant variant = CurriculumVariant::fcl;
    std::vector<Granularity> stage_order{Granularity::binary, Granularity::coarse, Granularity::fine};
    std::vector<int> epochs_per_stage{5, 8, 10};
    int batch_size = 32;
    double learning_rate = 5e-5;
    std::string scheduler = "cosine";

    // Default plan for a variant; `target` is the single stage of `none`.
    static CurriculumPlan make(CurriculumVariant variant, Granularity target = Granularity::fine);
    // fcl stages must go binary -> coarse -> fine (a subsequence is fine),
    // rcl the reverse, none exactly one stage.
    void validate() const;
    TrainOptions stage_options(std::size_t stage, std::uint64_t seed) const;
    nlohmann::json to_json() const;
    static CurriculumPlan from_json(const nlohmann::json& j);
};

// Builds a fresh model for a label space; `seed` seeds every initializer.
using ModelFactory = std::function<std::unique_ptr<Classifier>(const LabelSpace& labels, std::uint64_t seed)>;

Checkpoint make_checkpoint(const Classifier& model, Granularity task, nlohmann::json extra = nlohmann::json::object());

// Fresh model for `labels` (head seeded with `head_seed`) carrying the
// previous encoder. Identical label spaces copy every tensor. Throws
// ArchitectureMismatch naming the offending tensor.
std::unique_ptr<Classifier> transfer_weights(const Checkpoint& prev, const LabelSpace& labels,
                                             const ModelFactory& factory, std::uint64_t head_seed);

struct StageResult {
    std::size_t index = 0;
    Granularity task = Granularity::binary;
    std::filesystem::path checkpoint;
    std::uint64_t start_encoder_hash = 0;
    std::uint64_t best_encoder_hash = 0;
    std::uint64_t inherited_encoder_hash = 0;  // previous stage's best; 0 for the first stage
    TrainResult training;
    EvalReport report;
};

struct CurriculumResult {
    std::vector<StageResult> stages;
    nlohmann::json lineage() const;
    bool lineage_intact() const;
};

// Trains one stage: fresh (or transferred) model -> prepare -> train -> test report.
StageResult train_stage(Classifier& model, const SplitSet& splits, Granularity task,
                        const TrainOptions& opts, const std::string& dataset, std::uint64_t seed);

// Seed used for stage `index` model construction / head reinitialization.
std::uint64_t stage_seed(std::uint64_t seed, std::size_t index);

// Runs every stage in order; checkpoints land in `output_dir`. Throws
// MissingStageData when a stage has no dataset. Stages without an entry in
// `label_spaces` use the sorted labels found in their data.
CurriculumResult run_plan(const CurriculumPlan& plan, const std::map<Granularity, SplitSet>& datasets,
                          const ModelFactory& factory, std::uint64_t seed,
                          const std::filesystem::path& output_dir, const std::string& dataset = "data",
                          const std::map<Granularity, LabelSpace>& label_spaces = {});

}  // namespace fallacy

#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "fallacy/corpus.hpp"
#include "fallacy/curriculum.hpp"
#include "fallacy/model.hpp"

namespace fallacy::cli {

enum ExitCode { kOk = 0, kRuntimeFailure = 1, kConfigError = 2 };

// Entry point for the `fallacy` tool.
int run(int argc, char** argv);

// Exit code for an exception escaping a command.
int exit_code_for(const std::exception& e);

// Reads a JSON config; relative paths inside it resolve against its folder.
nlohmann::json load_config(const std::filesystem::path& path);
// "a.b.c=value"; value is parsed as JSON when possible, else kept as a string.
void apply_override(nlohmann::json& config, const std::string& assignment);
// Fills defaults and checks method/task/paths. Throws ConfigError.
void validate_config(const nlohmann::json& config);

// Sweep knobs -> config paths. Throws UnknownKnob listing the valid ones.
const std::map<std::string, std::string>& knobs();
std::string knob_path(const std::string& knob);
// "k_cases=1,3,5" or a JSON object {"k_cases": [1,3,5]} -> cartesian grid.
std::vector<nlohmann::json> expand_grid(const nlohmann::json& grid);
nlohmann::json parse_grid_arg(const std::string& arg);

// Cache folder from FALLACY_CACHE_DIR (empty when unset).
std::filesystem::path cache_dir();

struct Resources {
    std::filesystem::path kg_path;
};

// Builds an untrained model of `method` over `labels`.
std::unique_ptr<Classifier> build_model(const std::string& method, const nlohmann::json& model_config,
                                        const LabelSpace& labels, std::uint64_t seed,
                                        const Resources& resources);

// Writes a checkpoint plus method side files (case base, exemplars).
void save_model(const Classifier& model, Granularity task, const std::filesystem::path& path,
                const Resources& resources);
std::unique_ptr<Classifier> load_model(const std::filesystem::path& path, Checkpoint* checkpoint = nullptr);

// Materialized splits for the configured task (prepare step).
SplitSet prepare_splits(const nlohmann::json& config, ProvenanceLog& log);

}  // namespace fallacy::cli

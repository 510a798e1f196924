#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "fallacy/corpus.hpp"
#include "fallacy/text.hpp"

namespace fallacy {

enum class AugmentStrategy { ress, backtranslation, lexical_synonym, static_embedding };
std::string_view to_string(AugmentStrategy s);
AugmentStrategy parse_augment_strategy(std::string_view s);

struct AugmentationConfig {
    AugmentStrategy strategy = AugmentStrategy::ress;
    int substitution_candidates = 5;
    double similarity_threshold = 0.85;
    int max_replacements_per_argument = 3;
    // class -> minimum count after augmentation; key "*" applies to every class.
    std::map<std::string, std::size_t> class_quota;
    int context_window = 2;  // tokens on each side used by the RESS scorer

    void validate() const;  // ConfigError
    nlohmann::json to_json() const;
    static AugmentationConfig from_json(const nlohmann::json& j);
};

// Word vectors in the common text format ("word v1 v2 ..."; an optional
// "count dim" first line is skipped). Lookup is lowercase.
class WordVectors {
public:
    static WordVectors load(const std::filesystem::path& path);
    void add(const std::string& word, Eigen::VectorXd v);
    const Eigen::VectorXd* find(std::string_view word) const;
    // Most cosine-similar words, excluding the word itself; ties by word.
    std::vector<std::string> neighbors(std::string_view word, int n) const;
    std::size_t size() const { return words_.size(); }
    int dim() const { return dim_; }

private:
    int dim_ = 0;
    std::vector<std::string> words_;
    std::vector<Eigen::VectorXd> unit_;  // normalized rows
    std::map<std::string, std::size_t, std::less<>> index_;
};

// word<TAB>syn1,syn2,... (lowercase keys).
class SynonymTable {
public:
    static SynonymTable load(const std::filesystem::path& path);
    void add(const std::string& word, std::vector<std::string> synonyms);
    const std::vector<std::string>* find(std::string_view word) const;

private:
    std::map<std::string, std::vector<std::string>, std::less<>> table_;
};

// External machine-translation plug-in for the back-translation strategy.
class Translator {
public:
    virtual ~Translator() = default;
    virtual std::string translate(const std::string& text, const std::string& from,
                                  const std::string& to) const = 0;
};

struct AugmentResources {
    std::shared_ptr<const WordVectors> vectors;
    std::shared_ptr<const SynonymTable> synonyms;
    std::shared_ptr<const Translator> translator;
    std::string pivot_language = "de";
};

struct Replacement {
    std::size_t token_index = 0;
    std::string from;
    std::string to;
    double score = 0.0;
};

struct Variant {
    std::string text;
    std::vector<Replacement> replacements;
};

class AugmentationStrategy {
public:
    virtual ~AugmentationStrategy() = default;
    virtual AugmentStrategy kind() const = 0;
    // One variant or nothing when no edit clears the threshold.
    virtual std::optional<Variant> propose(const std::string& text, const AugmentationConfig& cfg,
                                           std::mt19937_64& rng) const = 0;
};

// Throws StrategyUnavailable when the strategy's resources are missing.
std::unique_ptr<AugmentationStrategy> make_strategy(const AugmentationConfig& cfg,
                                                    const AugmentResources& resources);

// Positions of tokens that may be replaced (words, not stopwords).
std::vector<std::size_t> candidate_positions(const std::vector<Token>& tokens);

// At most one synthetic variant (empty when nothing clears the threshold).
// The output keeps every label, gets source=synthetic and parent_id=a.id.
std::vector<Argument> augment_argument(const Argument& a, const AugmentationConfig& cfg,
                                       const AugmentationStrategy& strategy, std::uint64_t seed);

// Tops every quota class up to its quota with round-robin over originals.
DatasetSplit augment_to_quota(const DatasetSplit& split, const AugmentationConfig& cfg,
                              const AugmentationStrategy& strategy, std::uint64_t seed,
                              ProvenanceLog* log = nullptr);

}  // namespace fallacy

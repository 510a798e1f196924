#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "fallacy/taxonomy.hpp"

namespace fallacy {

enum class Source { binary_bench, logic, logic_climate, ptc, synthetic };
enum class Split { train, dev, test };

std::string_view to_string(Source s);
Source parse_source(std::string_view s);
std::string_view to_string(Split s);
Split parse_split(std::string_view s);

struct Argument {
    std::string id;
    std::string text;  // verbatim; never normalized in place
    std::optional<std::string> binary_label;
    std::optional<std::string> fine_label;
    std::optional<std::string> coarse_label;
    Source source = Source::synthetic;
    Split split = Split::train;
    std::optional<std::string> parent_id;     // set on augmented items
    std::optional<std::string> source_label;  // original label before mapping (PTC)

    const std::optional<std::string>& label(Granularity g) const;
    std::optional<std::string>& label(Granularity g);
};

struct DatasetSplit {
    std::string name;
    std::vector<Argument> arguments;
    Granularity label_space = Granularity::fine;

    std::size_t size() const { return arguments.size(); }
    std::map<std::string, std::size_t> class_counts() const;
    std::vector<std::string> labels() const;  // label of each argument in order
};

struct SplitSet {
    DatasetSplit train, dev, test;

    DatasetSplit& operator[](Split s);
    const DatasetSplit& operator[](Split s) const;
    std::size_t total() const { return train.size() + dev.size() + test.size(); }
    std::vector<Argument> all() const;
};

// Append-only record of every drop / duplication / context decision.
class ProvenanceLog {
public:
    void record(std::string event, std::string id, nlohmann::json detail = {});
    const std::vector<nlohmann::json>& entries() const { return entries_; }
    std::size_t count(std::string_view event) const;
    void write_jsonl(const std::filesystem::path& path) const;
    void append(const ProvenanceLog& other);

private:
    std::vector<nlohmann::json> entries_;
};

struct SplitRatios {
    double train = 0.8;
    double dev = 0.1;
    double test = 0.1;
};

struct LoadOptions {
    SplitRatios ratios;
    std::uint64_t seed = 13;
};

// Reads a dataset file (.jsonl, .tsv or .csv; see README "Dataset schema").
// Rows carrying a `split` column keep it; otherwise the rows are split with
// stratified_split(). logic_climate rows always land in `test`.
SplitSet load_dataset(const std::filesystem::path& path, Source source, Granularity granularity,
                      const FallacyTaxonomy& taxonomy, const LoadOptions& options = {},
                      ProvenanceLog* log = nullptr);

struct DeriveCoarseOptions {
    std::size_t small_class_max = 20;          // fine classes with <= this many samples
    double under_represented_share = 0.125;    // coarse share below which a parent is protected
};

// Maps fine labels to coarse ones. Class sizes are pooled over all splits so
// every split drops the same classes.
SplitSet derive_coarse(const SplitSet& fine, const FallacyTaxonomy& taxonomy,
                       const DeriveCoarseOptions& options = {}, ProvenanceLog* log = nullptr);
DatasetSplit derive_coarse(const DatasetSplit& fine, const FallacyTaxonomy& taxonomy,
                           const DeriveCoarseOptions& options = {},
                           ProvenanceLog* log = nullptr);

SplitSet stratified_split(const std::vector<Argument>& arguments, Granularity granularity,
                          const SplitRatios& ratios, std::uint64_t seed);

// --- propaganda corpus adaptation ---

struct PtcSentence {
    std::string text;
    std::vector<std::string> labels;  // techniques, with multiplicity
};

struct PtcArticle {
    std::string id;
    std::vector<PtcSentence> sentences;
    Split split = Split::train;
};

// technique name -> logical-fallacy fine class.
class TechniqueMapping {
public:
    static TechniqueMapping builtin(const FallacyTaxonomy& taxonomy);
    static TechniqueMapping load(const std::filesystem::path& path,
                                 const FallacyTaxonomy& taxonomy);
    static TechniqueMapping parse(std::istream& in, const FallacyTaxonomy& taxonomy,
                                  const std::string& source);

    const std::string& fine_for(std::string_view technique) const;  // UnmappedTechnique
    const std::map<std::string, std::string>& table() const { return table_; }

private:
    std::map<std::string, std::string> table_;
};

enum class ContextRule {
    unless_other_class,  // prepend unless the previous sentence carries a different class
    only_if_unlabeled,   // prepend only when the previous sentence has no label at all
};

struct PtcOptions {
    ContextRule context_rule = ContextRule::unless_other_class;
};

std::vector<Argument> adapt_ptc(const std::vector<PtcArticle>& articles,
                                const TechniqueMapping& mapping, const FallacyTaxonomy& taxonomy,
                                const PtcOptions& options = {}, ProvenanceLog* log = nullptr);

std::vector<PtcArticle> load_ptc_jsonl(const std::filesystem::path& path);

// --- serialization ---

nlohmann::json to_json(const Argument& a, Granularity g);
Argument argument_from_json(const nlohmann::json& j);
void write_split_jsonl(const std::filesystem::path& path, const DatasetSplit& split);
DatasetSplit read_split_jsonl(const std::filesystem::path& path, Granularity g,
                              const std::string& name = "");

}  // namespace fallacy

#include "fallacy/taxonomy.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>
#include <sstream>

#include "fallacy/errors.hpp"

namespace fallacy {

namespace {

// Mirrors data/taxonomy.tsv; a unit test keeps the two in sync.
constexpr const char* kBuiltinTaxonomy =
    "# fallacy-taxonomy\tv1\n"
    "fine_name\tcoarse_name\tincluded\tcoarse_experiment\n"
    "Ad Hominem\tFallacy of Relevance\t1\t1\n"
    "Ad Populum\tFallacy of Relevance\t1\t1\n"
    "Appeal to Emotion\tFallacy of Relevance\t1\t1\n"
    "Fallacy of Extension\tFallacy of Relevance\t1\t1\n"
    "Fallacy of Relevance\tFallacy of Relevance\t1\t0\n"
    "Intentional\tFallacy of Relevance\t1\t0\n"
    "False Causality\tFallacy of Defective Induction\t1\t1\n"
    "False Dilemma\tFallacy of Defective Induction\t1\t1\n"
    "Faulty Generalization\tFallacy of Defective Induction\t1\t1\n"
    "Fallacy of Credibility\tFallacy of Defective Induction\t1\t1\n"
    "Fallacy of Logic\tFallacy of Defective Induction\t1\t0\n"
    "Circular Reasoning\tFallacy of Presumption\t1\t1\n"
    "Begging the Question\tFallacy of Presumption\t0\t1\n"
    "Complex Question\tFallacy of Presumption\t0\t1\n"
    "Accident\tFallacy of Presumption\t0\t1\n"
    "Equivocation\tFallacy of Ambiguity\t1\t1\n"
    "Amphiboly\tFallacy of Ambiguity\t0\t1\n"
    "Accent\tFallacy of Ambiguity\t0\t1\n"
    "Composition\tFallacy of Ambiguity\t0\t1\n"
    "Division\tFallacy of Ambiguity\t0\t1\n";

const std::set<std::string> kCoarseNames = {
    "Fallacy of Ambiguity", "Fallacy of Defective Induction", "Fallacy of Presumption",
    "Fallacy of Relevance"};

std::vector<std::string> split_tabs(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream ss(line);
    while (std::getline(ss, cell, '\t')) out.push_back(cell);
    if (!line.empty() && line.back() == '\t') out.emplace_back();
    return out;
}

bool parse_flag(const std::string& s, const std::string& where) {
    if (s == "1" || s == "true") return true;
    if (s == "0" || s == "false") return false;
    throw SchemaError(where + ": flag must be 0 or 1, got '" + s + "'");
}

}  // namespace

std::string to_lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

std::string_view to_string(Granularity g) {
    switch (g) {
        case Granularity::binary: return "binary";
        case Granularity::coarse: return "coarse";
        case Granularity::fine: return "fine";
    }
    return "?";
}

Granularity parse_granularity(std::string_view s) {
    if (s == "binary") return Granularity::binary;
    if (s == "coarse") return Granularity::coarse;
    if (s == "fine") return Granularity::fine;
    throw ConfigError("unknown task granularity '" + std::string(s) + "'");
}

// ---------------------------------------------------------------- LabelSpace

LabelSpace::LabelSpace(std::vector<std::string> names) : names_(std::move(names)) {
    std::set<std::string> seen;
    for (const auto& n : names_)
        if (!seen.insert(n).second) throw ConfigError("duplicate label '" + n + "'");
}

const std::string& LabelSpace::name(std::size_t index) const {
    if (index >= names_.size())
        throw UnknownLabel("label index " + std::to_string(index) + " out of range");
    return names_[index];
}

std::optional<std::size_t> LabelSpace::find(std::string_view name) const {
    auto it = std::find(names_.begin(), names_.end(), name);
    if (it == names_.end()) return std::nullopt;
    return static_cast<std::size_t>(it - names_.begin());
}

std::size_t LabelSpace::index(std::string_view name) const {
    if (auto i = find(name)) return *i;
    throw UnknownLabel("label '" + std::string(name) + "' not in label space");
}

bool LabelSpace::is_subset_of(const LabelSpace& other) const {
    return std::all_of(names_.begin(), names_.end(),
                       [&](const std::string& n) { return other.contains(n); });
}

// ----------------------------------------------------------- FallacyTaxonomy

FallacyTaxonomy FallacyTaxonomy::builtin() {
    std::istringstream in(kBuiltinTaxonomy);
    return parse(in, "<builtin>");
}

FallacyTaxonomy FallacyTaxonomy::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw SchemaError("cannot open taxonomy file " + path.string());
    return parse(in, path.string());
}

FallacyTaxonomy FallacyTaxonomy::parse(std::istream& in, const std::string& source) {
    FallacyTaxonomy t;
    std::string line;
    bool header_seen = false;
    std::size_t lineno = 0;
    std::set<std::string> coarse_seen;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const std::string where = source + ":" + std::to_string(lineno);
        if (line.rfind("# fallacy-taxonomy", 0) == 0) {
            auto cells = split_tabs(line);
            if (cells.size() >= 2) t.version_ = cells[1];
            continue;
        }
        if (line[0] == '#') continue;
        auto cells = split_tabs(line);
        if (!header_seen) {
            if (cells.size() < 3 || cells[0] != "fine_name" || cells[1] != "coarse_name" ||
                cells[2] != "included")
                throw SchemaError(where + ": expected header 'fine_name coarse_name included'");
            header_seen = true;
            continue;
        }
        if (cells.size() < 3) throw SchemaError(where + ": expected at least 3 columns");
        const std::string& fine = cells[0];
        const std::string& coarse = cells[1];
        if (!kCoarseNames.count(coarse))
            throw SchemaError(where + ": '" + coarse + "' is not one of the four coarse classes");
        const bool included = parse_flag(cells[2], where);
        const bool coarse_exp = cells.size() >= 4 ? parse_flag(cells[3], where) : true;
        if (t.fine_to_coarse_.count(fine))
            throw SchemaError(where + ": duplicate fine class '" + fine + "'");
        t.fine_to_coarse_[fine] = FineEntry{coarse, coarse_exp};
        t.fine_.push_back(FallacyClass{fine, Granularity::fine, included});
        t.fine_lower_[to_lower(fine)] = fine;
        coarse_seen.insert(coarse);
    }
    if (!header_seen) throw SchemaError(source + ": empty taxonomy file");
    if (coarse_seen != kCoarseNames)
        throw SchemaError(source + ": every coarse class needs at least one fine class");
    for (const auto& c : kCoarseNames) {
        t.coarse_.push_back(FallacyClass{c, Granularity::coarse, true});
        t.coarse_lower_[to_lower(c)] = c;
    }
    if (t.version_.empty()) t.version_ = "unversioned";
    return t;
}

const FallacyClass& FallacyTaxonomy::fine_class(std::string_view name) const {
    for (const auto& f : fine_)
        if (f.name == name) return f;
    throw UnknownClass("'" + std::string(name) + "' is not a fine-grained class");
}

std::string FallacyTaxonomy::parent_of(std::string_view fine) const {
    auto it = fine_to_coarse_.find(std::string(fine));
    if (it == fine_to_coarse_.end())
        throw UnknownClass("'" + std::string(fine) + "' is not a fine-grained class");
    return it->second.coarse;
}

std::string FallacyTaxonomy::map_fine_to_coarse(std::string_view fine) const {
    auto it = fine_to_coarse_.find(std::string(fine));
    if (it == fine_to_coarse_.end())
        throw UnknownClass("'" + std::string(fine) + "' is not a fine-grained class");
    if (!it->second.coarse_experiment)
        throw ExcludedClass("fine class '" + std::string(fine) +
                            "' is excluded from the coarse-grained task");
    return it->second.coarse;
}

bool FallacyTaxonomy::excluded_from_coarse(std::string_view fine) const {
    auto it = fine_to_coarse_.find(std::string(fine));
    if (it == fine_to_coarse_.end())
        throw UnknownClass("'" + std::string(fine) + "' is not a fine-grained class");
    return !it->second.coarse_experiment;
}

std::vector<std::string> FallacyTaxonomy::coarse_excluded_fine_classes() const {
    std::vector<std::string> out;
    for (const auto& [name, entry] : fine_to_coarse_)
        if (!entry.coarse_experiment) out.push_back(name);
    return out;
}

std::vector<std::string> FallacyTaxonomy::coarse_experiment_classes() const {
    std::vector<std::string> out;
    for (const auto& c : coarse_) out.push_back(c.name);
    std::sort(out.begin(), out.end());
    return out;
}

std::vector<std::string> FallacyTaxonomy::fine_experiment_classes() const {
    std::vector<std::string> out;
    for (const auto& f : fine_)
        if (f.included_in_experiments) out.push_back(f.name);
    std::sort(out.begin(), out.end());
    return out;
}

LabelSpace FallacyTaxonomy::label_space(Granularity g) const {
    switch (g) {
        case Granularity::binary:
            return LabelSpace({std::string(kFallacious), std::string(kNotFallacious)});
        case Granularity::coarse: return LabelSpace(coarse_experiment_classes());
        case Granularity::fine: return LabelSpace(fine_experiment_classes());
    }
    return {};
}

std::optional<std::string> FallacyTaxonomy::canonical_fine(std::string_view name) const {
    auto it = fine_lower_.find(to_lower(name));
    if (it == fine_lower_.end()) return std::nullopt;
    return it->second;
}

std::optional<std::string> FallacyTaxonomy::canonical_coarse(std::string_view name) const {
    auto key = to_lower(name);
    auto it = coarse_lower_.find(key);
    if (it != coarse_lower_.end()) return it->second;
    // Short forms ("relevance", "defective induction") as used in some corpora.
    for (const auto& [lower, canonical] : coarse_lower_)
        if (lower == "fallacy of " + key) return canonical;
    return std::nullopt;
}

}  // namespace fallacy

#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace fallacy {

enum class Granularity { binary, coarse, fine };

std::string_view to_string(Granularity g);
Granularity parse_granularity(std::string_view s);

inline constexpr std::string_view kFallacious = "fallacious";
inline constexpr std::string_view kNotFallacious = "not_fallacious";

struct FallacyClass {
    std::string name;
    Granularity granularity = Granularity::fine;
    bool included_in_experiments = true;
};

// Ordered set of class names with index lookup. Order is the label-index
// encoding used by every model and report.
class LabelSpace {
public:
    LabelSpace() = default;
    explicit LabelSpace(std::vector<std::string> names);

    std::size_t size() const { return names_.size(); }
    bool empty() const { return names_.empty(); }
    const std::vector<std::string>& names() const { return names_; }
    const std::string& name(std::size_t index) const;
    std::size_t index(std::string_view name) const;  // throws UnknownLabel
    std::optional<std::size_t> find(std::string_view name) const;
    bool contains(std::string_view name) const { return find(name).has_value(); }
    bool is_subset_of(const LabelSpace& other) const;

    bool operator==(const LabelSpace& other) const { return names_ == other.names_; }

private:
    std::vector<std::string> names_;
};

// Three-stage fallacy taxonomy: binary -> 4 coarse classes -> fine classes.
// Immutable after construction.
class FallacyTaxonomy {
public:
    static FallacyTaxonomy builtin();
    static FallacyTaxonomy load(const std::filesystem::path& path);
    static FallacyTaxonomy parse(std::istream& in, const std::string& source = "<stream>");

    const std::string& version() const { return version_; }

    // Unique coarse parent of a fine class. Throws UnknownClass for names not
    // in the taxonomy and ExcludedClass for fine classes left out of the
    // coarse task.
    std::string map_fine_to_coarse(std::string_view fine) const;

    // Structural parent; never throws ExcludedClass.
    std::string parent_of(std::string_view fine) const;

    // Alphabetical; defines coarse label indices.
    std::vector<std::string> coarse_experiment_classes() const;
    // Alphabetical list of fine classes with experiment data.
    std::vector<std::string> fine_experiment_classes() const;
    LabelSpace label_space(Granularity g) const;

    // Case-insensitive lookup returning the canonical spelling.
    std::optional<std::string> canonical_fine(std::string_view name) const;
    std::optional<std::string> canonical_coarse(std::string_view name) const;

    const FallacyClass& fine_class(std::string_view name) const;
    const std::vector<FallacyClass>& fine_classes() const { return fine_; }
    const std::vector<FallacyClass>& coarse_classes() const { return coarse_; }
    bool excluded_from_coarse(std::string_view fine) const;
    std::vector<std::string> coarse_excluded_fine_classes() const;

private:
    struct FineEntry {
        std::string coarse;
        bool coarse_experiment = true;
    };

    std::string version_;
    std::vector<FallacyClass> coarse_;
    std::vector<FallacyClass> fine_;
    std::map<std::string, FineEntry> fine_to_coarse_;
    std::map<std::string, std::string> fine_lower_;
    std::map<std::string, std::string> coarse_lower_;
};

std::string to_lower(std::string_view s);

}  // namespace fallacy

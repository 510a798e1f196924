#include "fallacy/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "fallacy/errors.hpp"
#include "fallacy/text.hpp"

namespace fallacy {

using nlohmann::json;

std::string_view to_string(Source s) {
    switch (s) {
        case Source::binary_bench: return "binary_bench";
        case Source::logic: return "logic";
        case Source::logic_climate: return "logic_climate";
        case Source::ptc: return "ptc";
        case Source::synthetic: return "synthetic";
    }
    return "?";
}

Source parse_source(std::string_view s) {
    if (s == "binary_bench") return Source::binary_bench;
    if (s == "logic") return Source::logic;
    if (s == "logic_climate") return Source::logic_climate;
    if (s == "ptc") return Source::ptc;
    if (s == "synthetic") return Source::synthetic;
    throw ConfigError("unknown dataset source '" + std::string(s) + "'");
}

std::string_view to_string(Split s) {
    switch (s) {
        case Split::train: return "train";
        case Split::dev: return "dev";
        case Split::test: return "test";
    }
    return "?";
}

Split parse_split(std::string_view s) {
    const auto l = to_lower(s);
    if (l == "train") return Split::train;
    if (l == "dev" || l == "valid" || l == "validation" || l == "val") return Split::dev;
    if (l == "test") return Split::test;
    throw SchemaError("unknown split '" + std::string(s) + "'");
}

const std::optional<std::string>& Argument::label(Granularity g) const {
    switch (g) {
        case Granularity::binary: return binary_label;
        case Granularity::coarse: return coarse_label;
        case Granularity::fine: break;
    }
    return fine_label;
}

std::optional<std::string>& Argument::label(Granularity g) {
    return const_cast<std::optional<std::string>&>(std::as_const(*this).label(g));
}

std::map<std::string, std::size_t> DatasetSplit::class_counts() const {
    std::map<std::string, std::size_t> counts;
    for (const auto& a : arguments)
        if (const auto& l = a.label(label_space)) ++counts[*l];
    return counts;
}

std::vector<std::string> DatasetSplit::labels() const {
    std::vector<std::string> out;
    out.reserve(arguments.size());
    for (const auto& a : arguments) {
        const auto& l = a.label(label_space);
        if (!l) throw LabelError("argument '" + a.id + "' has no " +
                                 std::string(to_string(label_space)) + " label");
        out.push_back(*l);
    }
    return out;
}

DatasetSplit& SplitSet::operator[](Split s) {
    switch (s) {
        case Split::train: return train;
        case Split::dev: return dev;
        case Split::test: break;
    }
    return test;
}

const DatasetSplit& SplitSet::operator[](Split s) const {
    return const_cast<SplitSet&>(*this)[s];
}

std::vector<Argument> SplitSet::all() const {
    std::vector<Argument> out;
    for (const auto* s : {&train, &dev, &test})
        out.insert(out.end(), s->arguments.begin(), s->arguments.end());
    return out;
}

void ProvenanceLog::record(std::string event, std::string id, json detail) {
    json e = {{"event", std::move(event)}, {"id", std::move(id)}};
    if (!detail.is_null()) e["detail"] = std::move(detail);
    entries_.push_back(std::move(e));
}

std::size_t ProvenanceLog::count(std::string_view event) const {
    return static_cast<std::size_t>(std::count_if(
        entries_.begin(), entries_.end(),
        [&](const json& e) { return e.at("event").get<std::string>() == event; }));
}

void ProvenanceLog::write_jsonl(const std::filesystem::path& path) const {
    std::ofstream out(path);
    if (!out) throw SchemaError("cannot write provenance log " + path.string());
    for (const auto& e : entries_) out << e.dump() << '\n';
}

void ProvenanceLog::append(const ProvenanceLog& other) {
    entries_.insert(entries_.end(), other.entries_.begin(), other.entries_.end());
}

// ------------------------------------------------------------ file parsing

namespace {

struct Row {
    std::size_t line = 0;
    std::map<std::string, std::string> cells;
};

// RFC 4180: quoted fields may contain the delimiter, doubled quotes and newlines.
std::vector<std::vector<std::string>> parse_delimited(std::istream& in, char delim,
                                                      std::vector<std::size_t>& line_of) {
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> row;
    std::string field;
    bool in_quotes = false, field_started = false;
    std::size_t line = 1, row_line = 1;
    auto end_field = [&] {
        row.push_back(std::move(field));
        field.clear();
        field_started = false;
    };
    auto end_row = [&] {
        end_field();
        if (!(row.size() == 1 && row[0].empty())) {
            rows.push_back(std::move(row));
            line_of.push_back(row_line);
        }
        row.clear();
    };
    char c;
    while (in.get(c)) {
        if (in_quotes) {
            if (c == '"') {
                if (in.peek() == '"') {
                    field.push_back('"');
                    in.get();
                } else {
                    in_quotes = false;
                }
            } else {
                if (c == '\n') ++line;
                field.push_back(c);
            }
            continue;
        }
        if (c == '"' && !field_started && delim == ',') {
            in_quotes = true;
            field_started = true;
        } else if (c == delim) {
            end_field();
        } else if (c == '\r') {
            continue;
        } else if (c == '\n') {
            end_row();
            row_line = ++line;
        } else {
            field.push_back(c);
            field_started = true;
        }
    }
    if (in_quotes) throw SchemaError("unterminated quoted field starting on line " +
                                     std::to_string(row_line));
    if (!field.empty() || !row.empty()) end_row();
    return rows;
}

std::vector<Row> read_rows(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw SchemaError("cannot open dataset " + path.string());
    const auto ext = to_lower(path.extension().string());
    std::vector<Row> rows;
    if (ext == ".jsonl" || ext == ".json") {
        std::string line;
        std::size_t lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
            json j;
            try {
                j = json::parse(line);
            } catch (const json::exception& e) {
                throw SchemaError(path.string() + ":" + std::to_string(lineno) +
                                  ": invalid JSON: " + e.what());
            }
            if (!j.is_object())
                throw SchemaError(path.string() + ":" + std::to_string(lineno) +
                                  ": expected a JSON object");
            Row r{lineno, {}};
            for (auto& [k, v] : j.items()) {
                if (v.is_string()) r.cells[k] = v.get<std::string>();
                else if (v.is_null()) continue;
                else r.cells[k] = v.dump();
            }
            rows.push_back(std::move(r));
        }
        return rows;
    }
    const char delim = ext == ".csv" ? ',' : '\t';
    std::vector<std::size_t> line_of;
    auto table = parse_delimited(in, delim, line_of);
    if (table.empty()) return rows;
    const auto& header = table.front();
    for (std::size_t i = 1; i < table.size(); ++i) {
        if (table[i].size() != header.size())
            throw SchemaError(path.string() + ":" + std::to_string(line_of[i]) + ": expected " +
                              std::to_string(header.size()) + " columns, got " +
                              std::to_string(table[i].size()));
        Row r{line_of[i], {}};
        for (std::size_t c = 0; c < header.size(); ++c) r.cells[header[c]] = table[i][c];
        rows.push_back(std::move(r));
    }
    if (rows.empty()) {
        // header only: still validate columns so the error names what is missing
        Row r{0, {}};
        for (const auto& h : header) r.cells[h] = "";
        if (!r.cells.count("id") || !r.cells.count("text") || !r.cells.count("label"))
            throw SchemaError(path.string() + ": header must contain id, text, label");
    }
    return rows;
}

std::string canonical_binary(const std::string& raw) {
    const auto l = to_lower(raw);
    if (l == "fallacious" || l == "1" || l == "true" || l == "fallacy") return std::string(kFallacious);
    if (l == "not_fallacious" || l == "0" || l == "false" || l == "not fallacious" ||
        l == "valid")
        return std::string(kNotFallacious);
    return {};
}

void shuffle_portable(std::vector<std::size_t>& v, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    for (std::size_t i = v.size(); i > 1; --i) {
        const std::size_t j = static_cast<std::size_t>(rng() % i);
        std::swap(v[i - 1], v[j]);
    }
}

}  // namespace

SplitSet load_dataset(const std::filesystem::path& path, Source source, Granularity granularity,
                      const FallacyTaxonomy& taxonomy, const LoadOptions& options,
                      ProvenanceLog* log) {
    const auto rows = read_rows(path);
    if (rows.empty()) throw SchemaError(path.string() + ": dataset is empty");

    std::vector<Argument> args;
    std::set<std::string> ids;
    bool all_have_split = true;
    for (const auto& row : rows) {
        const std::string where = path.string() + ":" + std::to_string(row.line);
        for (const char* col : {"id", "text", "label"})
            if (!row.cells.count(col))
                throw SchemaError(where + ": missing column '" + std::string(col) + "'");
        Argument a;
        a.id = row.cells.at("id");
        a.text = row.cells.at("text");
        a.source = source;
        if (a.id.empty()) throw SchemaError(where + ": empty id");
        if (a.text.find_first_not_of(" \t\r\n") == std::string::npos)
            throw SchemaError(where + ": empty text for id '" + a.id + "'");
        if (!ids.insert(a.id).second) throw SchemaError(where + ": duplicate id '" + a.id + "'");

        const auto& raw = row.cells.at("label");
        switch (granularity) {
            case Granularity::binary: {
                auto b = canonical_binary(raw);
                if (b.empty())
                    throw LabelError(where + ": row '" + a.id + "' has unknown binary label '" +
                                     raw + "'");
                a.binary_label = b;
                break;
            }
            case Granularity::fine: {
                auto f = taxonomy.canonical_fine(raw);
                if (!f)
                    throw LabelError(where + ": row '" + a.id + "' has unknown fine label '" +
                                     raw + "'");
                a.fine_label = *f;
                a.binary_label = std::string(kFallacious);
                if (!taxonomy.excluded_from_coarse(*f))
                    a.coarse_label = taxonomy.map_fine_to_coarse(*f);
                break;
            }
            case Granularity::coarse: {
                auto c = taxonomy.canonical_coarse(raw);
                if (!c)
                    throw LabelError(where + ": row '" + a.id + "' has unknown coarse label '" +
                                     raw + "'");
                a.coarse_label = *c;
                a.binary_label = std::string(kFallacious);
                break;
            }
        }
        if (auto it = row.cells.find("parent_id"); it != row.cells.end() && !it->second.empty())
            a.parent_id = it->second;
        if (auto it = row.cells.find("split"); it != row.cells.end() && !it->second.empty())
            a.split = parse_split(it->second);
        else
            all_have_split = false;
        args.push_back(std::move(a));
    }

    SplitSet out;
    if (source == Source::logic_climate) {
        // Evaluation-only corpus.
        for (auto& a : args) {
            if (a.split != Split::test && log)
                log->record("climate_to_test", a.id, {{"declared_split", to_string(a.split)}});
            a.split = Split::test;
            out.test.arguments.push_back(std::move(a));
        }
    } else if (all_have_split) {
        for (auto& a : args) out[a.split].arguments.push_back(std::move(a));
    } else {
        out = stratified_split(args, granularity, options.ratios, options.seed);
    }
    out.train.name = "train";
    out.dev.name = "dev";
    out.test.name = "test";
    for (auto* s : {&out.train, &out.dev, &out.test}) s->label_space = granularity;
    return out;
}

// ------------------------------------------------------------ stratification

SplitSet stratified_split(const std::vector<Argument>& arguments, Granularity granularity,
                          const SplitRatios& ratios, std::uint64_t seed) {
    const std::array<double, 3> r = {ratios.train, ratios.dev, ratios.test};
    for (double x : r)
        if (x < 0) throw ConfigError("split ratios must be non-negative");
    if (std::abs(r[0] + r[1] + r[2] - 1.0) > 1e-9) throw ConfigError("split ratios must sum to 1");
    const std::size_t active = static_cast<std::size_t>(std::count_if(r.begin(), r.end(),
                                                                      [](double x) { return x > 0; }));

    std::map<std::string, std::vector<std::size_t>> by_class;
    for (std::size_t i = 0; i < arguments.size(); ++i) {
        const auto& l = arguments[i].label(granularity);
        if (!l) throw LabelError("argument '" + arguments[i].id + "' is unlabeled");
        by_class[*l].push_back(i);
    }

    std::vector<int> assignment(arguments.size(), 0);
    for (auto& [label, members] : by_class) {
        const std::size_t n = members.size();
        if (n < active)
            throw TooFewSamples("class '" + label + "' has " + std::to_string(n) +
                                " item(s) for " + std::to_string(active) + " splits");
        // Largest remainder: every split gets floor(n*r), leftovers go to the
        // largest fractional parts (earlier split wins ties).
        std::array<std::size_t, 3> count{};
        std::array<double, 3> frac{};
        std::size_t assigned = 0;
        for (int s = 0; s < 3; ++s) {
            const double exact = static_cast<double>(n) * r[s];
            count[s] = static_cast<std::size_t>(std::floor(exact + 1e-9));
            frac[s] = exact - static_cast<double>(count[s]);
            assigned += count[s];
        }
        std::array<int, 3> order = {0, 1, 2};
        std::stable_sort(order.begin(), order.end(),
                         [&](int a, int b) { return frac[a] > frac[b]; });
        for (std::size_t k = 0; assigned < n; ++k, ++assigned) ++count[order[k % 3]];

        auto shuffled = members;
        shuffle_portable(shuffled, derive_seed(seed, label));
        std::size_t pos = 0;
        for (int s = 0; s < 3; ++s)
            for (std::size_t c = 0; c < count[s]; ++c) assignment[shuffled[pos++]] = s;
    }

    SplitSet out;
    for (std::size_t i = 0; i < arguments.size(); ++i) {
        Argument a = arguments[i];
        a.split = static_cast<Split>(assignment[i]);
        out[a.split].arguments.push_back(std::move(a));
    }
    out.train.name = "train";
    out.dev.name = "dev";
    out.test.name = "test";
    for (auto* s : {&out.train, &out.dev, &out.test}) s->label_space = granularity;
    return out;
}

// ---------------------------------------------------------- coarse derivation

namespace {

struct CoarseDecision {
    std::set<std::string> dropped_small;
};

CoarseDecision decide_coarse_drops(const std::vector<const Argument*>& pooled,
                                   const FallacyTaxonomy& taxonomy,
                                   const DeriveCoarseOptions& options) {
    std::map<std::string, std::size_t> fine_counts;
    for (const auto* a : pooled)
        if (a->fine_label && !taxonomy.excluded_from_coarse(*a->fine_label))
            ++fine_counts[*a->fine_label];
    std::map<std::string, std::size_t> coarse_counts;
    std::size_t total = 0;
    for (const auto& [fine, n] : fine_counts) {
        coarse_counts[taxonomy.map_fine_to_coarse(fine)] += n;
        total += n;
    }
    CoarseDecision d;
    for (const auto& [fine, n] : fine_counts) {
        if (n > options.small_class_max) continue;
        const auto parent = taxonomy.map_fine_to_coarse(fine);
        const double share =
            total == 0 ? 0.0 : static_cast<double>(coarse_counts[parent]) / static_cast<double>(total);
        const bool parent_under_represented = share < options.under_represented_share;
        if (!parent_under_represented) d.dropped_small.insert(fine);
    }
    return d;
}

DatasetSplit apply_coarse(const DatasetSplit& in, const FallacyTaxonomy& taxonomy,
                          const CoarseDecision& d, ProvenanceLog* log) {
    DatasetSplit out;
    out.name = in.name;
    out.label_space = Granularity::coarse;
    for (const auto& a : in.arguments) {
        if (!a.fine_label) {
            if (log) log->record("drop_unlabeled", a.id);
            continue;
        }
        const auto fine = taxonomy.canonical_fine(*a.fine_label);
        if (!fine) throw LabelError("argument '" + a.id + "' has unknown fine label '" +
                                    *a.fine_label + "'");
        if (taxonomy.excluded_from_coarse(*fine)) {
            if (log) log->record("drop_excluded_class", a.id, {{"fine", *fine}});
            continue;
        }
        if (d.dropped_small.count(*fine)) {
            if (log) log->record("drop_small_class", a.id, {{"fine", *fine}});
            continue;
        }
        Argument b = a;
        b.fine_label = *fine;
        b.coarse_label = taxonomy.map_fine_to_coarse(*fine);
        out.arguments.push_back(std::move(b));
    }
    return out;
}

}  // namespace

SplitSet derive_coarse(const SplitSet& fine, const FallacyTaxonomy& taxonomy,
                       const DeriveCoarseOptions& options, ProvenanceLog* log) {
    std::vector<const Argument*> pooled;
    std::vector<Argument> canon;  // canonicalize before counting
    for (const auto* s : {&fine.train, &fine.dev, &fine.test})
        for (const auto& a : s->arguments) {
            Argument c = a;
            if (c.fine_label)
                if (auto f = taxonomy.canonical_fine(*c.fine_label)) c.fine_label = *f;
            canon.push_back(std::move(c));
        }
    for (const auto& a : canon)
        if (a.fine_label && taxonomy.canonical_fine(*a.fine_label)) pooled.push_back(&a);
    const auto decision = decide_coarse_drops(pooled, taxonomy, options);
    SplitSet out;
    out.train = apply_coarse(fine.train, taxonomy, decision, log);
    out.dev = apply_coarse(fine.dev, taxonomy, decision, log);
    out.test = apply_coarse(fine.test, taxonomy, decision, log);
    return out;
}

DatasetSplit derive_coarse(const DatasetSplit& fine, const FallacyTaxonomy& taxonomy,
                           const DeriveCoarseOptions& options, ProvenanceLog* log) {
    SplitSet s;
    s.train = fine;
    return derive_coarse(s, taxonomy, options, log).train;
}

// ------------------------------------------------------------------- PTC

TechniqueMapping TechniqueMapping::parse(std::istream& in, const FallacyTaxonomy& taxonomy,
                                         const std::string& source) {
    TechniqueMapping m;
    std::string line;
    std::size_t lineno = 0;
    bool header = false;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        const auto tab = line.find('\t');
        if (tab == std::string::npos)
            throw SchemaError(source + ":" + std::to_string(lineno) + ": expected two columns");
        std::string technique = line.substr(0, tab), fine = line.substr(tab + 1);
        if (!header) {
            header = true;
            if (technique == "technique") continue;
        }
        auto canonical = taxonomy.canonical_fine(fine);
        if (!canonical)
            throw LabelError(source + ":" + std::to_string(lineno) + ": unknown fine class '" +
                             fine + "'");
        // Mapping targets must reach a coarse class.
        taxonomy.map_fine_to_coarse(*canonical);
        m.table_[technique] = *canonical;
    }
    return m;
}

TechniqueMapping TechniqueMapping::load(const std::filesystem::path& path,
                                        const FallacyTaxonomy& taxonomy) {
    std::ifstream in(path);
    if (!in) throw SchemaError("cannot open technique mapping " + path.string());
    return parse(in, taxonomy, path.string());
}

TechniqueMapping TechniqueMapping::builtin(const FallacyTaxonomy& taxonomy) {
    // Same table as data/ptc_mapping.tsv.
    static constexpr const char* kTable =
        "technique\tfine_class\n"
        "Appeal_to_Authority\tFallacy of Credibility\n"
        "Appeal_to_fear-prejudice\tAppeal to Emotion\n"
        "Bandwagon\tAd Populum\n"
        "Black-and-White_Fallacy\tFalse Dilemma\n"
        "Causal_Oversimplification\tFalse Causality\n"
        "Doubt\tFallacy of Credibility\n"
        "Exaggeration,Minimisation\tFallacy of Extension\n"
        "Flag-Waving\tAppeal to Emotion\n"
        "Loaded_Language\tAppeal to Emotion\n"
        "Name_Calling,Labeling\tAd Hominem\n"
        "Obfuscation,Intentional_Vagueness,Confusion\tEquivocation\n"
        "Red_Herring\tFallacy of Extension\n"
        "Reductio_ad_hitlerum\tAd Hominem\n"
        "Repetition\tCircular Reasoning\n"
        "Slogans\tCircular Reasoning\n"
        "Straw_Men\tFallacy of Extension\n"
        "Thought-terminating_Cliches\tCircular Reasoning\n"
        "Whataboutism\tAd Hominem\n";
    std::istringstream in(kTable);
    return parse(in, taxonomy, "<builtin>");
}

const std::string& TechniqueMapping::fine_for(std::string_view technique) const {
    auto it = table_.find(std::string(technique));
    if (it == table_.end())
        throw UnmappedTechnique("no fine-class mapping for technique '" + std::string(technique) + "'");
    return it->second;
}

std::vector<Argument> adapt_ptc(const std::vector<PtcArticle>& articles,
                                const TechniqueMapping& mapping, const FallacyTaxonomy& taxonomy,
                                const PtcOptions& options, ProvenanceLog* log) {
    std::vector<Argument> out;
    std::size_t prepended_unless_other = 0, prepended_only_unlabeled = 0;
    for (const auto& article : articles) {
        if (article.split != Split::train) {
            if (log) log->record("ptc_skip_non_train", article.id,
                                 {{"split", to_string(article.split)}});
            continue;
        }
        for (std::size_t s = 0; s < article.sentences.size(); ++s) {
            const auto& sentence = article.sentences[s];
            if (sentence.labels.empty()) continue;
            const PtcSentence* prev = s > 0 ? &article.sentences[s - 1] : nullptr;
            std::set<std::string> prev_coarse;
            if (prev)
                for (const auto& t : prev->labels)
                    prev_coarse.insert(taxonomy.map_fine_to_coarse(mapping.fine_for(t)));

            for (std::size_t k = 0; k < sentence.labels.size(); ++k) {
                const auto& technique = sentence.labels[k];
                const auto& fine = mapping.fine_for(technique);
                const auto coarse = taxonomy.map_fine_to_coarse(fine);

                const bool other_class =
                    std::any_of(prev_coarse.begin(), prev_coarse.end(),
                                [&](const std::string& c) { return c != coarse; });
                const bool variant_a = prev && !other_class;
                const bool variant_b = prev && prev->labels.empty();
                prepended_unless_other += variant_a;
                prepended_only_unlabeled += variant_b;
                const bool prepend =
                    options.context_rule == ContextRule::unless_other_class ? variant_a : variant_b;

                Argument a;
                a.id = article.id + ":" + std::to_string(s) + ":" + std::to_string(k);
                a.text = prepend ? prev->text + " " + sentence.text : sentence.text;
                a.binary_label = std::string(kFallacious);
                a.fine_label = fine;
                a.coarse_label = coarse;
                a.source = Source::ptc;
                a.split = Split::train;
                a.source_label = technique;
                if (log) {
                    if (sentence.labels.size() > 1)
                        log->record("ptc_duplicate", a.id,
                                    {{"technique", technique}, {"copies", sentence.labels.size()}});
                    if (prepend) log->record("ptc_context_prepended", a.id);
                }
                out.push_back(std::move(a));
            }
        }
    }
    if (log)
        log->record("ptc_context_variants", "*",
                    {{"unless_other_class", prepended_unless_other},
                     {"only_if_unlabeled", prepended_only_unlabeled}});
    return out;
}

std::vector<PtcArticle> load_ptc_jsonl(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw SchemaError("cannot open PTC file " + path.string());
    std::vector<PtcArticle> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const std::string where = path.string() + ":" + std::to_string(lineno);
        try {
            auto j = json::parse(line);
            PtcArticle a;
            a.id = j.at("id").get<std::string>();
            a.split = parse_split(j.value("split", std::string("train")));
            for (const auto& s : j.at("sentences")) {
                PtcSentence ps;
                ps.text = s.at("text").get<std::string>();
                if (s.contains("labels")) ps.labels = s.at("labels").get<std::vector<std::string>>();
                a.sentences.push_back(std::move(ps));
            }
            out.push_back(std::move(a));
        } catch (const json::exception& e) {
            throw SchemaError(where + ": " + e.what());
        }
    }
    return out;
}

// ------------------------------------------------------------ serialization

json to_json(const Argument& a, Granularity g) {
    json j = {{"id", a.id}, {"text", a.text}, {"split", to_string(a.split)},
              {"source", to_string(a.source)}};
    j["label"] = a.label(g) ? json(*a.label(g)) : json(nullptr);
    if (a.binary_label) j["binary_label"] = *a.binary_label;
    if (a.fine_label) j["fine_label"] = *a.fine_label;
    if (a.coarse_label) j["coarse_label"] = *a.coarse_label;
    if (a.parent_id) j["parent_id"] = *a.parent_id;
    if (a.source_label) j["source_label"] = *a.source_label;
    return j;
}

Argument argument_from_json(const json& j) {
    Argument a;
    a.id = j.at("id").get<std::string>();
    a.text = j.at("text").get<std::string>();
    a.split = parse_split(j.value("split", std::string("train")));
    a.source = parse_source(j.value("source", std::string("synthetic")));
    auto opt = [&](const char* key) -> std::optional<std::string> {
        if (j.contains(key) && j.at(key).is_string()) return j.at(key).get<std::string>();
        return std::nullopt;
    };
    a.binary_label = opt("binary_label");
    a.fine_label = opt("fine_label");
    a.coarse_label = opt("coarse_label");
    a.parent_id = opt("parent_id");
    a.source_label = opt("source_label");
    return a;
}

void write_split_jsonl(const std::filesystem::path& path, const DatasetSplit& split) {
    std::ofstream out(path);
    if (!out) throw SchemaError("cannot write " + path.string());
    for (const auto& a : split.arguments) out << to_json(a, split.label_space).dump() << '\n';
}

DatasetSplit read_split_jsonl(const std::filesystem::path& path, Granularity g,
                              const std::string& name) {
    std::ifstream in(path);
    if (!in) throw SchemaError("cannot open " + path.string());
    DatasetSplit s;
    s.name = name.empty() ? path.stem().string() : name;
    s.label_space = g;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            auto j = json::parse(line);
            Argument a = argument_from_json(j);
            if (j.contains("label") && j.at("label").is_string() && !a.label(g))
                a.label(g) = j.at("label").get<std::string>();
            s.arguments.push_back(std::move(a));
        } catch (const json::exception& e) {
            throw SchemaError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    return s;
}

}  // namespace fallacy

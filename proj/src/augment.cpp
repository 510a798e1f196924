#include "fallacy/augment.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>

#include "fallacy/errors.hpp"
#include "fallacy/text.hpp"

namespace fallacy {

using nlohmann::json;

std::string_view to_string(AugmentStrategy s) {
    switch (s) {
        case AugmentStrategy::ress: return "ress";
        case AugmentStrategy::backtranslation: return "backtranslation";
        case AugmentStrategy::lexical_synonym: return "lexical_synonym";
        case AugmentStrategy::static_embedding: return "static_embedding";
    }
    return "?";
}

AugmentStrategy parse_augment_strategy(std::string_view s) {
    for (auto k : {AugmentStrategy::ress, AugmentStrategy::backtranslation,
                   AugmentStrategy::lexical_synonym, AugmentStrategy::static_embedding})
        if (to_string(k) == s) return k;
    throw ConfigError("unknown augmentation strategy '" + std::string(s) +
                      "' (ress, backtranslation, lexical_synonym, static_embedding)");
}

void AugmentationConfig::validate() const {
    if (max_replacements_per_argument < 1)
        throw ConfigError("max_replacements_per_argument must be >= 1");
    if (substitution_candidates < 1) throw ConfigError("substitution_candidates must be >= 1");
    if (!(similarity_threshold >= 0.80 && similarity_threshold <= 0.90))
        throw ConfigError("similarity_threshold must lie in [0.80, 0.90]");
    if (context_window < 0) throw ConfigError("context_window must be >= 0");
}

json AugmentationConfig::to_json() const {
    return {{"strategy", to_string(strategy)},
            {"substitution_candidates", substitution_candidates},
            {"similarity_threshold", similarity_threshold},
            {"max_replacements_per_argument", max_replacements_per_argument},
            {"class_quota", class_quota},
            {"context_window", context_window}};
}

AugmentationConfig AugmentationConfig::from_json(const json& j) {
    AugmentationConfig c;
    if (j.contains("strategy")) c.strategy = parse_augment_strategy(j.at("strategy").get<std::string>());
    c.substitution_candidates = j.value("substitution_candidates", c.substitution_candidates);
    c.similarity_threshold = j.value("similarity_threshold", c.similarity_threshold);
    c.max_replacements_per_argument =
        j.value("max_replacements_per_argument", c.max_replacements_per_argument);
    if (j.contains("class_quota")) {
        const auto& q = j.at("class_quota");
        if (q.is_number_unsigned() || q.is_number_integer())
            c.class_quota["*"] = q.get<std::size_t>();
        else
            c.class_quota = q.get<std::map<std::string, std::size_t>>();
    }
    c.context_window = j.value("context_window", c.context_window);
    c.validate();
    return c;
}

// ---------------------------------------------------------------- resources

void WordVectors::add(const std::string& word, Eigen::VectorXd v) {
    if (dim_ == 0) dim_ = static_cast<int>(v.size());
    if (v.size() != dim_)
        throw FormatError("word vector for '" + word + "' has dim " + std::to_string(v.size()) +
                          ", expected " + std::to_string(dim_));
    const double n = v.norm();
    if (n > 0) v /= n;
    const auto key = to_lower(word);
    if (auto it = index_.find(key); it != index_.end()) {
        unit_[it->second] = std::move(v);
        return;
    }
    index_.emplace(key, words_.size());
    words_.push_back(key);
    unit_.push_back(std::move(v));
}

WordVectors WordVectors::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open word vectors " + path.string());
    WordVectors wv;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::istringstream ls(line);
        std::string word;
        if (!(ls >> word)) continue;
        std::vector<double> xs;
        double x;
        while (ls >> x) xs.push_back(x);
        if (lineno == 1 && xs.size() == 1) continue;  // "count dim" header
        if (xs.empty()) throw FormatError(path.string() + ":" + std::to_string(lineno) + ": no values");
        wv.add(word, Eigen::Map<Eigen::VectorXd>(xs.data(), static_cast<Eigen::Index>(xs.size())));
    }
    return wv;
}

const Eigen::VectorXd* WordVectors::find(std::string_view word) const {
    auto it = index_.find(to_lower(word));
    return it == index_.end() ? nullptr : &unit_[it->second];
}

std::vector<std::string> WordVectors::neighbors(std::string_view word, int n) const {
    const auto key = to_lower(word);
    auto it = index_.find(key);
    if (it == index_.end() || n <= 0) return {};
    const auto& q = unit_[it->second];
    std::vector<std::pair<double, std::size_t>> scored;
    for (std::size_t i = 0; i < words_.size(); ++i)
        if (i != it->second) scored.emplace_back(q.dot(unit_[i]), i);
    const auto take = std::min<std::size_t>(static_cast<std::size_t>(n), scored.size());
    std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(take), scored.end(),
                      [&](const auto& a, const auto& b) {
                          if (a.first != b.first) return a.first > b.first;
                          return words_[a.second] < words_[b.second];
                      });
    std::vector<std::string> out;
    for (std::size_t i = 0; i < take; ++i) out.push_back(words_[scored[i].second]);
    return out;
}

void SynonymTable::add(const std::string& word, std::vector<std::string> synonyms) {
    auto& slot = table_[to_lower(word)];
    slot.insert(slot.end(), synonyms.begin(), synonyms.end());
}

SynonymTable SynonymTable::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open synonym table " + path.string());
    SynonymTable t;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        const auto tab = line.find('\t');
        if (tab == std::string::npos) continue;
        std::vector<std::string> syns;
        std::istringstream rest(line.substr(tab + 1));
        std::string s;
        while (std::getline(rest, s, ','))
            if (!s.empty()) syns.push_back(s);
        t.add(line.substr(0, tab), std::move(syns));
    }
    return t;
}

const std::vector<std::string>* SynonymTable::find(std::string_view word) const {
    auto it = table_.find(to_lower(word));
    return it == table_.end() ? nullptr : &it->second;
}

// ---------------------------------------------------------------- strategies

std::vector<std::size_t> candidate_positions(const std::vector<Token>& tokens) {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < tokens.size(); ++i)
        if (tokens[i].is_word && !tokens[i].is_special && !is_stopword(tokens[i].text))
            out.push_back(i);
    return out;
}

namespace {

bool single_word(const std::string& s) {
    auto t = tokenize(s);
    return t.size() == 1 && t[0].is_word && !t[0].is_special && t[0].text == s;
}

std::string match_case(const std::string& original, std::string replacement) {
    if (!original.empty() && std::isupper(static_cast<unsigned char>(original[0])) &&
        !replacement.empty())
        replacement[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(replacement[0])));
    return replacement;
}

void shuffle(std::vector<std::size_t>& v, std::mt19937_64& rng) {
    for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[rng() % i]);
}

// Substitution driver shared by the word-level strategies: visit candidate
// positions in a seeded order, keep at most max_replacements edits whose
// score clears the threshold.
class SubstitutionStrategy : public AugmentationStrategy {
public:
    std::optional<Variant> propose(const std::string& text, const AugmentationConfig& cfg,
                                   std::mt19937_64& rng) const override {
        const auto tokens = tokenize(text);
        auto positions = candidate_positions(tokens);
        shuffle(positions, rng);
        std::vector<std::string> current;
        for (const auto& t : tokens) current.push_back(t.text);
        std::vector<std::string> repl(tokens.size());
        Variant v;
        for (auto pos : positions) {
            if (static_cast<int>(v.replacements.size()) >= cfg.max_replacements_per_argument) break;
            std::vector<std::pair<std::string, double>> passing;
            for (const auto& cand : candidates(tokens[pos].text, cfg.substitution_candidates)) {
                if (!single_word(cand) || to_lower(cand) == to_lower(tokens[pos].text)) continue;
                const double s = score(current, pos, cand, cfg);
                if (s >= cfg.similarity_threshold) passing.emplace_back(cand, s);
            }
            if (passing.empty()) continue;
            const auto& [word, s] = passing[rng() % passing.size()];
            const auto out = match_case(tokens[pos].text, word);
            v.replacements.push_back({pos, tokens[pos].text, out, s});
            repl[pos] = out;
            current[pos] = out;
        }
        if (v.replacements.empty()) return std::nullopt;
        std::sort(v.replacements.begin(), v.replacements.end(),
                  [](const Replacement& a, const Replacement& b) { return a.token_index < b.token_index; });
        v.text = replace_tokens(text, tokens, repl);
        return v;
    }

protected:
    virtual std::vector<std::string> candidates(const std::string& word, int n) const = 0;
    virtual double score(const std::vector<std::string>& tokens, std::size_t pos,
                         const std::string& candidate, const AugmentationConfig& cfg) const = 0;
};

// Candidates are nearest neighbours in the vector space; each is scored by
// the cosine between the windowed context vector before and after the swap.
class RessStrategy : public SubstitutionStrategy {
public:
    explicit RessStrategy(std::shared_ptr<const WordVectors> v) : vectors_(std::move(v)) {}
    AugmentStrategy kind() const override { return AugmentStrategy::ress; }

protected:
    std::vector<std::string> candidates(const std::string& word, int n) const override {
        return vectors_->neighbors(word, n);
    }
    double score(const std::vector<std::string>& tokens, std::size_t pos, const std::string& cand,
                 const AugmentationConfig& cfg) const override {
        const auto* replacement = vectors_->find(cand);
        if (!replacement) return -1.0;
        Eigen::VectorXd before = Eigen::VectorXd::Zero(vectors_->dim());
        Eigen::VectorXd after = before;
        const auto w = static_cast<std::size_t>(cfg.context_window);
        const std::size_t lo = pos >= w ? pos - w : 0;
        const std::size_t hi = std::min(tokens.size(), pos + w + 1);
        for (std::size_t i = lo; i < hi; ++i) {
            const auto* v = vectors_->find(tokens[i]);
            if (i == pos) {
                if (v) before += *v;
                after += *replacement;
            } else if (v) {
                before += *v;
                after += *v;
            }
        }
        const double d = before.norm() * after.norm();
        return d > 0 ? before.dot(after) / d : -1.0;
    }

private:
    std::shared_ptr<const WordVectors> vectors_;
};

class StaticEmbeddingStrategy : public SubstitutionStrategy {
public:
    explicit StaticEmbeddingStrategy(std::shared_ptr<const WordVectors> v) : vectors_(std::move(v)) {}
    AugmentStrategy kind() const override { return AugmentStrategy::static_embedding; }

protected:
    std::vector<std::string> candidates(const std::string& word, int n) const override {
        return vectors_->neighbors(word, n);
    }
    double score(const std::vector<std::string>& tokens, std::size_t pos, const std::string& cand,
                 const AugmentationConfig&) const override {
        const auto* a = vectors_->find(tokens[pos]);
        const auto* b = vectors_->find(cand);
        return a && b ? a->dot(*b) : -1.0;
    }

private:
    std::shared_ptr<const WordVectors> vectors_;
};

// Dictionary synonyms count as a perfect match unless vectors are available
// to score them.
class LexicalSynonymStrategy : public SubstitutionStrategy {
public:
    LexicalSynonymStrategy(std::shared_ptr<const SynonymTable> t, std::shared_ptr<const WordVectors> v)
        : table_(std::move(t)), vectors_(std::move(v)) {}
    AugmentStrategy kind() const override { return AugmentStrategy::lexical_synonym; }

protected:
    std::vector<std::string> candidates(const std::string& word, int n) const override {
        const auto* syns = table_->find(word);
        if (!syns) return {};
        return {syns->begin(), syns->begin() + std::min<std::ptrdiff_t>(n, static_cast<std::ptrdiff_t>(syns->size()))};
    }
    double score(const std::vector<std::string>& tokens, std::size_t pos, const std::string& cand,
                 const AugmentationConfig&) const override {
        if (!vectors_) return 1.0;
        const auto* a = vectors_->find(tokens[pos]);
        const auto* b = vectors_->find(cand);
        return a && b ? a->dot(*b) : 1.0;
    }

private:
    std::shared_ptr<const SynonymTable> table_;
    std::shared_ptr<const WordVectors> vectors_;
};

// Round trip through a pivot language. Accepted only when the result aligns
// token-for-token with the input and differs in an allowed number of words.
class BacktranslationStrategy : public AugmentationStrategy {
public:
    BacktranslationStrategy(std::shared_ptr<const Translator> t, std::string pivot)
        : translator_(std::move(t)), pivot_(std::move(pivot)) {}
    AugmentStrategy kind() const override { return AugmentStrategy::backtranslation; }

    std::optional<Variant> propose(const std::string& text, const AugmentationConfig& cfg,
                                   std::mt19937_64&) const override {
        const auto back = translator_->translate(translator_->translate(text, "en", pivot_), pivot_, "en");
        const auto a = tokenize(text);
        const auto b = tokenize(back);
        if (a.size() != b.size()) return std::nullopt;
        Variant v;
        v.text = back;
        for (std::size_t i = 0; i < a.size(); ++i)
            if (a[i].text != b[i].text) {
                if (!a[i].is_word || is_stopword(a[i].text) || !b[i].is_word) return std::nullopt;
                v.replacements.push_back({i, a[i].text, b[i].text, 1.0});
            }
        if (v.replacements.empty() ||
            static_cast<int>(v.replacements.size()) > cfg.max_replacements_per_argument)
            return std::nullopt;
        return v;
    }

private:
    std::shared_ptr<const Translator> translator_;
    std::string pivot_;
};

}  // namespace

std::unique_ptr<AugmentationStrategy> make_strategy(const AugmentationConfig& cfg,
                                                    const AugmentResources& r) {
    cfg.validate();
    switch (cfg.strategy) {
        case AugmentStrategy::ress:
            if (!r.vectors) throw StrategyUnavailable("ress needs word vectors (augment.vectors)");
            return std::make_unique<RessStrategy>(r.vectors);
        case AugmentStrategy::static_embedding:
            if (!r.vectors)
                throw StrategyUnavailable("static_embedding needs word vectors (augment.vectors)");
            return std::make_unique<StaticEmbeddingStrategy>(r.vectors);
        case AugmentStrategy::lexical_synonym:
            if (!r.synonyms)
                throw StrategyUnavailable("lexical_synonym needs a synonym table (augment.synonyms)");
            return std::make_unique<LexicalSynonymStrategy>(r.synonyms, r.vectors);
        case AugmentStrategy::backtranslation:
            if (!r.translator)
                throw StrategyUnavailable("backtranslation needs an external translator plug-in");
            return std::make_unique<BacktranslationStrategy>(r.translator, r.pivot_language);
    }
    throw StrategyUnavailable("unknown strategy");
}

std::vector<Argument> augment_argument(const Argument& a, const AugmentationConfig& cfg,
                                       const AugmentationStrategy& strategy, std::uint64_t seed) {
    cfg.validate();
    std::mt19937_64 rng(derive_seed(seed, a.id));
    auto v = strategy.propose(a.text, cfg, rng);
    if (!v) return {};
    Argument out = a;
    out.id = a.id + "~aug" + hex64(seed).substr(0, 8);
    out.text = std::move(v->text);
    out.source = Source::synthetic;
    out.parent_id = a.id;
    return {std::move(out)};
}

DatasetSplit augment_to_quota(const DatasetSplit& split, const AugmentationConfig& cfg,
                              const AugmentationStrategy& strategy, std::uint64_t seed,
                              ProvenanceLog* log) {
    cfg.validate();
    if (split.name != "train")
        throw ConfigError("augmentation applies to train splits only (got '" + split.name + "')");
    std::map<std::string, std::vector<std::size_t>> members;
    for (std::size_t i = 0; i < split.arguments.size(); ++i)
        if (const auto& l = split.arguments[i].label(split.label_space)) members[*l].push_back(i);

    for (const auto& [cls, q] : cfg.class_quota)
        if (cls != "*" && members.find(cls) == members.end() && q > 0)
            throw EmptyClass("quota class '" + cls + "' has no originals to augment");

    auto quota_for = [&](const std::string& cls) -> std::size_t {
        if (auto it = cfg.class_quota.find(cls); it != cfg.class_quota.end()) return it->second;
        if (auto it = cfg.class_quota.find("*"); it != cfg.class_quota.end()) return it->second;
        return 0;
    };

    DatasetSplit out = split;
    for (const auto& [cls, idx] : members) {
        const auto quota = quota_for(cls);
        std::size_t count = idx.size();
        for (std::size_t round = 0; count < quota; ++round) {
            std::size_t added = 0;
            for (std::size_t k = 0; k < idx.size() && count < quota; ++k) {
                const auto& parent = split.arguments[idx[k]];
                const auto item_seed = derive_seed(derive_seed(seed, parent.id), round);
                auto vs = augment_argument(parent, cfg, strategy, item_seed);
                if (vs.empty()) continue;
                auto& v = vs.front();
                v.id = parent.id + "~aug" + std::to_string(round);
                if (log) log->record("augment", v.id, {{"parent", parent.id}, {"class", cls}});
                out.arguments.push_back(std::move(v));
                ++count;
                ++added;
            }
            if (added == 0)
                throw QuotaUnreachable("class '" + cls + "' stalled at " + std::to_string(count) +
                                       " of " + std::to_string(quota) +
                                       ": no original yields a variant");
        }
    }
    return out;
}

}  // namespace fallacy

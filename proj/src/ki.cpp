#include "fallacy/ki.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>

#include "fallacy/errors.hpp"
#include "fallacy/text.hpp"

namespace fallacy {

using nlohmann::json;
using nn::Matrix;
using nn::Var;

bool is_whitelisted_relation(std::string_view relation) {
    return std::find(kRelationWhitelist.begin(), kRelationWhitelist.end(), relation) !=
           kRelationWhitelist.end();
}

std::string relation_words(std::string_view relation) {
    std::string out;
    for (std::size_t i = 0; i < relation.size(); ++i) {
        const auto c = static_cast<unsigned char>(relation[i]);
        if (std::isupper(c) && i > 0) out += ' ';
        out += static_cast<char>(std::tolower(c));
    }
    return out;
}

std::string KnowledgeTriple::lexicalize() const {
    return subject + " " + relation_words(relation) + " " + object;
}

json KnowledgeTriple::to_json() const {
    return {{"subject", subject}, {"relation", relation}, {"object", object}};
}

bool KnowledgeTriple::operator<(const KnowledgeTriple& o) const {
    return std::tie(subject, relation, object) < std::tie(o.subject, o.relation, o.object);
}

// ------------------------------------------------------------------- store

void KnowledgeStore::add(KnowledgeTriple t) {
    hash_ = fnv1a(t.subject + '\t' + t.relation + '\t' + t.object + '\n', hash_ ? hash_ : 14695981039346656037ull);
    index_[to_lower(t.subject)].push_back(std::move(t));
    ++size_;
}

KnowledgeStore KnowledgeStore::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open knowledge store " + path.string());
    KnowledgeStore s;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        const auto a = line.find('\t');
        const auto b = a == std::string::npos ? a : line.find('\t', a + 1);
        if (b == std::string::npos)
            throw FormatError(path.string() + ":" + std::to_string(lineno) +
                              ": expected subject<TAB>relation<TAB>object");
        s.add({line.substr(0, a), line.substr(a + 1, b - a - 1), line.substr(b + 1)});
    }
    return s;
}

std::vector<KnowledgeTriple> KnowledgeStore::by_subject(std::string_view subject) const {
    std::vector<KnowledgeTriple> out;
    auto it = index_.find(to_lower(subject));
    if (it == index_.end()) return out;
    for (const auto& t : it->second)
        if (is_whitelisted_relation(t.relation)) out.push_back(t);
    return out;
}

std::string KnowledgeStore::fingerprint() const { return hex64(hash_) + ":" + std::to_string(size_); }

// ----------------------------------------------------------------- linking

namespace {
bool linkable(const std::string& token) {
    if (token == kClsToken || token == kSepToken) return false;
    const auto toks = tokenize(token);
    return toks.size() == 1 && toks[0].is_word && !is_stopword(token);
}
}  // namespace

std::map<std::size_t, std::vector<KnowledgeTriple>> link_triples(const std::vector<std::string>& tokens,
                                                                 const KnowledgeStore& store) {
    std::map<std::size_t, std::vector<KnowledgeTriple>> out;
    for (std::size_t i = 0; i < tokens.size(); ++i)
        if (linkable(tokens[i])) out[i] = store.by_subject(tokens[i]);
    return out;
}

std::vector<RankedTriple> rank_triples(const std::string& sentence,
                                       const std::vector<KnowledgeTriple>& candidates,
                                       const SentenceEncoder& encoder, int b) {
    std::vector<RankedTriple> out;
    if (candidates.empty() || b <= 0) return out;
    const Eigen::VectorXd s = encoder.encode(sentence);
    const double sn = s.norm();
    for (const auto& t : candidates) {
        const Eigen::VectorXd v = encoder.encode(t.lexicalize());
        const double d = sn * v.norm();
        out.push_back({t, d > 0 ? s.dot(v) / d : 0.0});
    }
    std::stable_sort(out.begin(), out.end(),
                     [](const RankedTriple& x, const RankedTriple& y) { return x.score > y.score; });
    if (out.size() > static_cast<std::size_t>(b)) out.resize(static_cast<std::size_t>(b));
    return out;
}

std::vector<KnowledgeTriple> expand_hops(const std::vector<KnowledgeTriple>& seeds,
                                         const KnowledgeStore& store, int hops, int b) {
    if (hops < 1) throw ConfigError("hops must be >= 1");
    std::vector<KnowledgeTriple> out;
    std::set<KnowledgeTriple> seen;
    for (const auto& t : seeds)
        if (seen.insert(t).second) out.push_back(t);
    std::vector<KnowledgeTriple> frontier = out;
    for (int h = 2; h <= hops && !frontier.empty(); ++h) {
        std::vector<KnowledgeTriple> next;
        for (const auto& t : frontier) {
            int taken = 0;
            for (const auto& n : store.by_subject(t.object)) {
                if (taken >= b) break;
                if (!seen.insert(n).second) continue;
                out.push_back(n);
                next.push_back(n);
                ++taken;
            }
        }
        frontier = std::move(next);
    }
    return out;
}

// -------------------------------------------------------------------- tree

std::vector<std::string> SentenceTree::trunk() const {
    std::vector<std::string> out;
    for (const auto& t : tokens)
        if (t.branch == 0) out.push_back(t.text);
    return out;
}

std::vector<int> SentenceTree::soft_positions() const {
    std::vector<int> out;
    for (const auto& t : tokens) out.push_back(t.soft);
    return out;
}

json SentenceTree::to_json() const {
    json toks = json::array();
    for (const auto& t : tokens)
        toks.push_back({{"text", t.text}, {"hard", t.hard}, {"soft", t.soft}, {"branch", t.branch}, {"anchor", t.anchor}});
    json pairs = json::array();
    for (Eigen::Index i = 0; i < visible.rows(); ++i)
        for (Eigen::Index j = 0; j < visible.cols(); ++j)
            if (visible(i, j) != 0) pairs.push_back({i, j});
    json br = json::array();
    for (const auto& b : branches) {
        json ts = json::array();
        for (const auto& t : b.triples) ts.push_back(t.to_json());
        br.push_back({{"anchor", b.anchor}, {"score", b.score}, {"triples", ts}});
    }
    return {{"tokens", toks}, {"visible", pairs}, {"branches", br}};
}

SentenceTree build_sentence_tree(const std::vector<std::string>& trunk_in, std::vector<Branch> branches,
                                 std::size_t max_len) {
    std::vector<std::string> trunk = trunk_in;
    if (max_len > 0 && trunk.size() > max_len) trunk.resize(max_len);
    std::erase_if(branches, [&](const Branch& b) { return b.anchor >= trunk.size() || b.tokens.empty(); });

    auto total = [&] {
        std::size_t n = trunk.size();
        for (const auto& b : branches) n += b.tokens.size();
        return n;
    };
    while (max_len > 0 && total() > max_len && !branches.empty()) {
        std::size_t worst = 0;
        for (std::size_t i = 1; i < branches.size(); ++i)
            if (branches[i].score <= branches[worst].score) worst = i;
        branches.erase(branches.begin() + static_cast<std::ptrdiff_t>(worst));
    }

    SentenceTree tree;
    std::vector<std::pair<std::size_t, std::size_t>> spans;  // per branch: first hard index, length
    std::vector<int> anchor_hard;
    std::vector<std::size_t> order(branches.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return branches[a].anchor < branches[b].anchor; });
    std::size_t next = 0;
    for (std::size_t i = 0; i < trunk.size(); ++i) {
        const int hard = static_cast<int>(tree.tokens.size());
        tree.tokens.push_back({trunk[i], hard, static_cast<int>(i), 0, -1});
        while (next < order.size() && branches[order[next]].anchor == i) {
            const auto& b = branches[order[next]];
            tree.branches.push_back(b);
            const int id = static_cast<int>(tree.branches.size());
            spans.emplace_back(tree.tokens.size(), b.tokens.size());
            anchor_hard.push_back(hard);
            for (std::size_t k = 0; k < b.tokens.size(); ++k)
                tree.tokens.push_back({b.tokens[k], static_cast<int>(tree.tokens.size()),
                                       static_cast<int>(i + 1 + k), id, hard});
            ++next;
        }
    }

    const auto n = static_cast<Eigen::Index>(tree.tokens.size());
    tree.visible = Matrix::Zero(n, n);
    std::vector<Eigen::Index> trunk_idx;
    for (const auto& t : tree.tokens)
        if (t.branch == 0) trunk_idx.push_back(t.hard);
    for (auto a : trunk_idx)
        for (auto b : trunk_idx) tree.visible(a, b) = 1;
    for (std::size_t s = 0; s < spans.size(); ++s) {
        const auto start = static_cast<Eigen::Index>(spans[s].first);
        const auto len = static_cast<Eigen::Index>(spans[s].second);
        tree.visible.block(start, start, len, len).setOnes();
        tree.visible.block(start, anchor_hard[s], len, 1).setOnes();
        tree.visible.block(anchor_hard[s], start, 1, len).setOnes();
    }
    return tree;
}

// ------------------------------------------------------------------ config

void KiConfig::validate() const {
    encoder.validate();
    if (branching_factor < 1) throw ConfigError("branching_factor must be >= 1");
    if (hops < 1) throw ConfigError("hops must be >= 1");
    if (classifier_hidden < 1) throw ConfigError("classifier_hidden must be >= 1");
    if (dropout < 0 || dropout >= 1) throw ConfigError("dropout must lie in [0, 1)");
    if (!(learning_rate > 0)) throw ConfigError("learning_rate must be > 0");
    if (epochs < 1) throw ConfigError("epochs must be >= 1");
}

json KiConfig::to_json() const {
    return {{"encoder", encoder.to_json()},     {"branching_factor", branching_factor},
            {"hops", hops},                     {"similarity_ranking", similarity_ranking},
            {"classifier_hidden", classifier_hidden}, {"dropout", dropout},
            {"learning_rate", learning_rate},   {"epochs", epochs},
            {"ranking_encoder", ranking_encoder}};
}

KiConfig KiConfig::from_json(const json& j) {
    KiConfig c;
    if (j.contains("encoder")) c.encoder = EncoderConfig::from_json(j.at("encoder"));
    c.branching_factor = j.value("branching_factor", c.branching_factor);
    c.hops = j.value("hops", c.hops);
    c.similarity_ranking = j.value("similarity_ranking", c.similarity_ranking);
    c.classifier_hidden = j.value("classifier_hidden", c.classifier_hidden);
    c.dropout = j.value("dropout", c.dropout);
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.epochs = j.value("epochs", c.epochs);
    c.ranking_encoder = j.value("ranking_encoder", c.ranking_encoder);
    c.validate();
    return c;
}

// -------------------------------------------------------------- classifier

KiClassifier::KiClassifier(KiConfig cfg, LabelSpace labels, std::uint64_t seed,
                           std::shared_ptr<const KnowledgeStore> store,
                           std::shared_ptr<const SentenceEncoder> ranker)
    : cfg_(std::move(cfg)), labels_(std::move(labels)), vocab_(cfg_.encoder.vocab_size),
      store_(std::move(store)), ranker_(std::move(ranker)) {
    cfg_.validate();
    if (labels_.empty()) throw ConfigError("label space is empty");
    if (!store_) throw ConfigError("KI needs a knowledge store");
    if (!ranker_ && cfg_.similarity_ranking) ranker_ = make_sentence_encoder(cfg_.ranking_encoder);
    std::mt19937_64 erng(derive_seed(seed, "ki.encoder"));
    encoder::init(params_, cfg_.encoder, erng);
    std::mt19937_64 hrng(derive_seed(seed, "ki.head"));
    head::init(params_, cfg_.encoder.hidden, cfg_.classifier_hidden, static_cast<int>(labels_.size()), hrng);
}

const SentenceTree& KiClassifier::tree(const std::string& text) {
    if (auto it = trees_.find(text); it != trees_.end()) return it->second;
    std::vector<std::string> trunk{std::string(kClsToken)};
    for (auto& t : token_strings(text)) trunk.push_back(std::move(t));

    std::vector<Branch> branches;
    for (const auto& [pos, found] : link_triples(trunk, *store_)) {
        if (found.empty()) continue;
        std::vector<RankedTriple> seeds;
        if (cfg_.similarity_ranking) {
            seeds = rank_triples(text, found, *ranker_, cfg_.branching_factor);
        } else {
            for (std::size_t i = 0; i < found.size() && i < static_cast<std::size_t>(cfg_.branching_factor); ++i)
                seeds.push_back({found[i], -static_cast<double>(i)});
        }
        std::set<KnowledgeTriple> seen;
        for (const auto& s : seeds) seen.insert(s.triple);
        for (const auto& s : seeds) {
            Branch b;
            b.anchor = pos;
            b.score = s.score;
            // Later hops extend this seed's chain.
            for (const auto& t : expand_hops({s.triple}, *store_, cfg_.hops, cfg_.branching_factor)) {
                if (!(t == s.triple) && !seen.insert(t).second) continue;
                b.triples.push_back(t);
                for (auto& w : token_strings(relation_words(t.relation))) b.tokens.push_back(std::move(w));
                for (auto& w : token_strings(t.object)) b.tokens.push_back(std::move(w));
            }
            branches.push_back(std::move(b));
        }
    }
    auto [it, _] = trees_.emplace(text, build_sentence_tree(trunk, std::move(branches),
                                                            static_cast<std::size_t>(cfg_.encoder.max_len)));
    return it->second;
}

Var KiClassifier::logits(const Argument& a, ForwardContext& ctx) {
    const auto& t = tree(a.text);
    EncoderInput in;
    for (const auto& tok : t.tokens) in.ids.push_back(vocab_.id(tok.text));
    in.positions = t.soft_positions();
    in.visible = t.visible;
    auto states = encoder::forward(params_, cfg_.encoder, in, ctx.train, ctx.rng);
    return head::forward(params_, encoder::pool(states, Pooling::first_token), cfg_.dropout, ctx.train,
                         ctx.rng);
}

json KiClassifier::explain(const Argument& a) {
    const auto& t = tree(a.text);
    json injected = json::array();
    for (const auto& b : t.branches)
        for (const auto& tr : b.triples)
            injected.push_back({{"anchor", t.tokens[0].text == kClsToken ? b.anchor - 1 : b.anchor},
                                {"token", t.trunk().at(b.anchor)},
                                {"triple", tr.to_json()},
                                {"score", b.score}});
    return {{"triples", injected}};
}

}  // namespace fallacy

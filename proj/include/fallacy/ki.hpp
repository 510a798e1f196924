#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "fallacy/model.hpp"
#include "fallacy/retrieval.hpp"

namespace fallacy {

inline constexpr std::array<std::string_view, 14> kRelationWhitelist = {
    "Causes",    "UsedFor",  "CapableOf",   "CausesDesire", "IsA",
    "SymbolOf",  "MadeOf",   "LocatedNear", "Desires",      "AtLocation",
    "HasProperty", "PartOf", "HasFirstSubevent", "HasLastSubevent"};

bool is_whitelisted_relation(std::string_view relation);
// "UsedFor" -> "used for".
std::string relation_words(std::string_view relation);

struct KnowledgeTriple {
    std::string subject;
    std::string relation;
    std::string object;

    std::string lexicalize() const;  // "subject relation-words object"
    nlohmann::json to_json() const;
    bool operator==(const KnowledgeTriple&) const = default;
    bool operator<(const KnowledgeTriple& o) const;
};

// subject<TAB>relation<TAB>object, indexed by lowercase subject. Lookups
// only return whitelisted relations; insertion order is preserved.
class KnowledgeStore {
public:
    static KnowledgeStore load(const std::filesystem::path& path);
    void add(KnowledgeTriple t);
    std::vector<KnowledgeTriple> by_subject(std::string_view subject) const;
    std::size_t size() const { return size_; }
    std::string fingerprint() const;

private:
    std::map<std::string, std::vector<KnowledgeTriple>, std::less<>> index_;
    std::size_t size_ = 0;
    std::uint64_t hash_ = 0;
};

// Trunk position -> triples whose subject equals that (non-stopword) token.
std::map<std::size_t, std::vector<KnowledgeTriple>> link_triples(const std::vector<std::string>& tokens,
                                                                 const KnowledgeStore& store);

struct RankedTriple {
    KnowledgeTriple triple;
    double score = 0.0;
};

// Cosine between each lexicalized triple and the sentence; top-b kept,
// descending, ties in input order.
std::vector<RankedTriple> rank_triples(const std::string& sentence,
                                       const std::vector<KnowledgeTriple>& candidates,
                                       const SentenceEncoder& encoder, int b);

// Hop h > 1 looks up the objects of hop h-1 as subjects (b per subject).
// Deduplicated; hops = 1 returns the seeds unchanged.
std::vector<KnowledgeTriple> expand_hops(const std::vector<KnowledgeTriple>& seeds,
                                         const KnowledgeStore& store, int hops, int b);

// One injected branch: the tokens hanging off trunk position `anchor`.
struct Branch {
    std::size_t anchor = 0;
    std::vector<std::string> tokens;
    std::vector<KnowledgeTriple> triples;  // seed first, then chained hops
    double score = 0.0;                    // rank used when trimming
};

struct TreeToken {
    std::string text;
    int hard = 0;
    int soft = 0;
    int branch = 0;   // 0 = trunk
    int anchor = -1;  // hard position of the anchor for branch tokens
};

struct SentenceTree {
    std::vector<TreeToken> tokens;
    nn::Matrix visible;  // 1 = may attend
    std::vector<Branch> branches;  // kept branches, branch id = index + 1

    std::vector<std::string> trunk() const;
    std::vector<int> soft_positions() const;
    // Debug dump: tokens, soft positions and visible pairs.
    nlohmann::json to_json() const;
};

// Branch tokens follow their anchor in hard order. When the tree is longer
// than max_len the lowest-scored branches go first (later ones on ties);
// trunk tokens are only cut when the trunk alone is too long.
SentenceTree build_sentence_tree(const std::vector<std::string>& trunk, std::vector<Branch> branches,
                                 std::size_t max_len = 0);

struct KiConfig {
    EncoderConfig encoder;
    int branching_factor = 5;
    int hops = 1;
    bool similarity_ranking = true;
    int classifier_hidden = 32;
    double dropout = 0.5;
    double learning_rate = 2e-5;
    int epochs = 5;
    std::string ranking_encoder = "hash-word:256";

    void validate() const;
    nlohmann::json to_json() const;
    static KiConfig from_json(const nlohmann::json& j);
};

class KiClassifier : public Classifier {
public:
    KiClassifier(KiConfig cfg, LabelSpace labels, std::uint64_t seed,
                 std::shared_ptr<const KnowledgeStore> store,
                 std::shared_ptr<const SentenceEncoder> ranker = nullptr);

    std::string method() const override { return "ki"; }
    const LabelSpace& labels() const override { return labels_; }
    const EncoderConfig& encoder_config() const override { return cfg_.encoder; }
    nn::ParamSet& params() override { return params_; }
    nn::Var logits(const Argument& a, ForwardContext& ctx) override;
    nlohmann::json explain(const Argument& a) override;
    bool supports_explanations() const override { return true; }
    nlohmann::json config_json() const override { return cfg_.to_json(); }

    const KiConfig& config() const { return cfg_; }
    // Tree for a sentence; "<CLS>" heads the trunk. Cached per text.
    const SentenceTree& tree(const std::string& text);

private:
    KiConfig cfg_;
    LabelSpace labels_;
    HashingVocab vocab_;
    nn::ParamSet params_;
    std::shared_ptr<const KnowledgeStore> store_;
    std::shared_ptr<const SentenceEncoder> ranker_;
    std::map<std::string, SentenceTree> trees_;
};

}  // namespace fallacy

#include "fallacy/ibr.hpp"

#include "fallacy/errors.hpp"

namespace fallacy {

using nlohmann::json;
using nn::Var;

void IbrConfig::validate() const {
    encoder.validate();
    if (k_cases < 0 || k_cases > 10) throw ConfigError("k_cases must lie in [0, 10]");
    if (num_attention_heads < 1 || encoder.hidden % num_attention_heads != 0)
        throw ConfigError("num_attention_heads (" + std::to_string(num_attention_heads) +
                          ") must divide the encoder hidden size (" + std::to_string(encoder.hidden) + ")");
    if (classifier_hidden < 1) throw ConfigError("classifier_hidden must be >= 1");
    if (dropout < 0 || dropout >= 1) throw ConfigError("dropout must lie in [0, 1)");
    if (similarity_threshold < -1 || similarity_threshold > 1)
        throw ConfigError("similarity_threshold must lie in [-1, 1]");
}

json IbrConfig::to_json() const {
    return {{"encoder", encoder.to_json()},
            {"k_cases", k_cases},
            {"num_attention_heads", num_attention_heads},
            {"attention_enabled", attention_enabled},
            {"classifier_hidden", classifier_hidden},
            {"dropout", dropout},
            {"retriever", retriever},
            {"separator", separator},
            {"similarity_threshold", similarity_threshold},
            {"filter_order", filter_order == FilterOrder::filter_then_truncate ? "filter_then_truncate"
                                                                               : "truncate_then_filter"}};
}

IbrConfig IbrConfig::from_json(const json& j) {
    IbrConfig c;
    if (j.contains("encoder")) c.encoder = EncoderConfig::from_json(j.at("encoder"));
    c.k_cases = j.value("k_cases", c.k_cases);
    c.num_attention_heads = j.value("num_attention_heads", c.num_attention_heads);
    c.attention_enabled = j.value("attention_enabled", c.attention_enabled);
    c.classifier_hidden = j.value("classifier_hidden", c.classifier_hidden);
    c.dropout = j.value("dropout", c.dropout);
    c.retriever = j.value("retriever", c.retriever);
    c.separator = j.value("separator", c.separator);
    c.similarity_threshold = j.value("similarity_threshold", c.similarity_threshold);
    if (j.contains("filter_order")) {
        const auto s = j.at("filter_order").get<std::string>();
        if (s == "filter_then_truncate") c.filter_order = FilterOrder::filter_then_truncate;
        else if (s == "truncate_then_filter") c.filter_order = FilterOrder::truncate_then_filter;
        else throw ConfigError("filter_order must be filter_then_truncate or truncate_then_filter");
    }
    c.validate();
    return c;
}

std::string compose_input(const std::string& case_text, const std::vector<std::string>& neighbor_texts,
                          const std::string& separator) {
    if (neighbor_texts.empty()) return case_text;
    std::string s = case_text + " " + separator;
    for (const auto& t : neighbor_texts) s += " " + t;
    return s;
}

EncoderInput compose_tokens(const HashingVocab& vocab, const std::string& case_text,
                            const std::vector<std::string>& neighbor_texts, int max_len) {
    EncoderInput in;
    const auto cap = static_cast<std::size_t>(max_len);
    in.ids.push_back(HashingVocab::kCls);
    for (int id : vocab.encode(case_text)) {
        if (in.ids.size() >= cap) break;
        in.ids.push_back(id);
    }
    if (!neighbor_texts.empty() && in.ids.size() < cap) {
        in.ids.push_back(HashingVocab::kSep);
        for (const auto& t : neighbor_texts)
            for (int id : vocab.encode(t)) {
                if (in.ids.size() >= cap) break;
                in.ids.push_back(id);
            }
    }
    return in;
}

Var adapt(const nn::ParamSet& params, int heads, const Var& e_c, const Var& e_s,
          bool attention_enabled, const std::string& prefix) {
    if (!attention_enabled) return e_c;
    if (e_c.cols() != e_s.cols())
        throw ShapeMismatch("E_C width " + std::to_string(e_c.cols()) + " != E_S width " +
                            std::to_string(e_s.cols()));
    return attention::forward(params, prefix, heads, e_c, e_s);
}

IbrClassifier::IbrClassifier(IbrConfig cfg, LabelSpace labels, std::uint64_t seed,
                             std::shared_ptr<const SentenceEncoder> retriever)
    : cfg_(std::move(cfg)), labels_(std::move(labels)), vocab_(cfg_.encoder.vocab_size),
      retriever_(std::move(retriever)) {
    cfg_.validate();
    if (labels_.empty()) throw ConfigError("label space is empty");
    if (!retriever_) retriever_ = make_sentence_encoder(cfg_.retriever);
    std::mt19937_64 erng(derive_seed(seed, "ibr.encoder"));
    encoder::init(params_, cfg_.encoder, erng);
    std::mt19937_64 arng(derive_seed(seed, "ibr.adapter"));
    attention::init(params_, "adapter.", cfg_.encoder.hidden, arng);
    std::mt19937_64 hrng(derive_seed(seed, "ibr.head"));
    head::init(params_, cfg_.encoder.hidden, cfg_.classifier_hidden, static_cast<int>(labels_.size()),
               hrng);
}

void IbrClassifier::prepare(const DatasetSplit& train, std::uint64_t) {
    self_exclusions_ = 0;
    if (cache_dir_.empty()) {
        case_base_ = CaseBase::build(train, *retriever_);
        return;
    }
    std::uint64_t key = fnv1a(retriever_->fingerprint());
    for (const auto& a : train.arguments) {
        key = fnv1a(a.id, key);
        key = fnv1a(a.text, key);
        const auto& l = a.label(train.label_space);
        key = fnv1a(l ? *l : "", key);
    }
    const auto blob = cache_dir_ / ("casebase-" + hex64(key) + ".bin");
    const auto sidecar = cache_dir_ / ("casebase-" + hex64(key) + ".json");
    if (std::filesystem::exists(blob) && std::filesystem::exists(sidecar)) {
        case_base_ = CaseBase::load(blob, sidecar);
        return;
    }
    case_base_ = CaseBase::build(train, *retriever_);
    std::filesystem::create_directories(cache_dir_);
    case_base_.save(blob, sidecar);
}

RetrievalResult IbrClassifier::neighbors(const Argument& a, const std::string* exclude_id) const {
    if (cfg_.k_cases == 0) return {{}, 0, cfg_.similarity_threshold};
    if (case_base_.size() == 0) throw ConfigError("IBR case base is empty; call prepare() first");
    std::set<std::string> exclude;
    if (exclude_id && case_base_.find(*exclude_id)) exclude.insert(*exclude_id);
    return case_base_.retrieve(a, *retriever_, static_cast<std::size_t>(cfg_.k_cases),
                               cfg_.similarity_threshold, exclude, cfg_.filter_order);
}

Var IbrClassifier::logits(const Argument& a, ForwardContext& ctx) {
    const auto e_c = encoder::forward(params_, cfg_.encoder,
                                      encoder::encode_text(vocab_, a.text, cfg_.encoder.max_len),
                                      ctx.train, ctx.rng);
    Var attended = e_c;
    if (cfg_.attention_enabled) {
        const auto found = neighbors(a, ctx.exclude_id);
        if (ctx.exclude_id && case_base_.find(*ctx.exclude_id)) ++self_exclusions_;
        std::vector<std::string> texts;
        for (const auto& n : found.neighbors) texts.push_back(case_base_.entry(n.index).text);
        const auto e_s = encoder::forward(
            params_, cfg_.encoder, compose_tokens(vocab_, a.text, texts, cfg_.encoder.max_len),
            ctx.train, ctx.rng);
        attended = adapt(params_, cfg_.num_attention_heads, e_c, e_s, true);
    }
    return head::forward(params_, encoder::pool(attended, Pooling::first_token), cfg_.dropout,
                         ctx.train, ctx.rng);
}

json IbrClassifier::explain(const Argument& a) {
    const auto found = neighbors(a, nullptr);
    json n = json::array();
    for (const auto& nb : found.neighbors) {
        const auto& e = case_base_.entry(nb.index);
        n.push_back({{"id", e.id}, {"label", e.label}, {"text", e.text}, {"similarity", nb.similarity}});
    }
    return {{"k", cfg_.k_cases}, {"threshold", found.threshold}, {"neighbors", n}};
}

}  // namespace fallacy

#include "fallacy/model.hpp"

#include <cmath>
#include <fstream>

#include "fallacy/errors.hpp"

namespace fallacy {

using nlohmann::json;
using nn::Matrix;
using nn::Var;

std::string_view to_string(Pooling p) { return p == Pooling::mean ? "mean" : "first_token"; }

Pooling parse_pooling(std::string_view s) {
    if (s == "mean") return Pooling::mean;
    if (s == "first_token" || s == "cls") return Pooling::first_token;
    throw ConfigError("unknown pooling '" + std::string(s) + "'");
}

// ------------------------------------------------------------ EncoderConfig

void EncoderConfig::validate() const {
    if (vocab_size <= HashingVocab::kReserved) throw ConfigError("encoder.vocab_size too small");
    if (hidden <= 0 || heads <= 0 || layers < 0 || ffn <= 0 || max_len < 2)
        throw ConfigError("encoder dimensions must be positive");
    if (hidden % heads != 0)
        throw ConfigError("encoder.heads (" + std::to_string(heads) +
                          ") must divide encoder.hidden (" + std::to_string(hidden) + ")");
    if (dropout < 0 || dropout >= 1) throw ConfigError("encoder.dropout must be in [0,1)");
}

json EncoderConfig::to_json() const {
    return {{"vocab_size", vocab_size}, {"hidden", hidden},   {"heads", heads},
            {"layers", layers},         {"ffn", ffn},         {"max_len", max_len},
            {"dropout", dropout},       {"init_scale", init_scale}};
}

EncoderConfig EncoderConfig::from_json(const json& j) {
    EncoderConfig c;
    c.vocab_size = j.value("vocab_size", c.vocab_size);
    c.hidden = j.value("hidden", c.hidden);
    c.heads = j.value("heads", c.heads);
    c.layers = j.value("layers", c.layers);
    c.ffn = j.value("ffn", c.ffn);
    c.max_len = j.value("max_len", c.max_len);
    c.dropout = j.value("dropout", c.dropout);
    c.init_scale = j.value("init_scale", c.init_scale);
    c.validate();
    return c;
}

// ------------------------------------------------------------------ encoder

namespace encoder {

void init(nn::ParamSet& p, const EncoderConfig& cfg, std::mt19937_64& rng,
          const std::string& prefix) {
    cfg.validate();
    const int h = cfg.hidden;
    p.add(prefix + "tok_emb", nn::normal(cfg.vocab_size, h, cfg.init_scale, rng));
    p.add(prefix + "pos_emb", nn::normal(cfg.max_len, h, 0.1 * cfg.init_scale, rng));
    p.add(prefix + "ln0.g", Matrix::Ones(1, h));
    p.add(prefix + "ln0.b", Matrix::Zero(1, h));
    for (int l = 0; l < cfg.layers; ++l) {
        const std::string lp = prefix + "layer" + std::to_string(l) + ".";
        attention::init(p, lp + "attn.", h, rng);
        p.add(lp + "ln1.g", Matrix::Ones(1, h));
        p.add(lp + "ln1.b", Matrix::Zero(1, h));
        p.add(lp + "ffn.w1", nn::xavier(h, cfg.ffn, rng));
        p.add(lp + "ffn.b1", Matrix::Zero(1, cfg.ffn));
        p.add(lp + "ffn.w2", nn::xavier(cfg.ffn, h, rng));
        p.add(lp + "ffn.b2", Matrix::Zero(1, h));
        p.add(lp + "ln2.g", Matrix::Ones(1, h));
        p.add(lp + "ln2.b", Matrix::Zero(1, h));
    }
}

Var forward(const nn::ParamSet& p, const EncoderConfig& cfg, const EncoderInput& in, bool train,
            std::mt19937_64* rng, const std::string& prefix) {
    if (in.ids.empty()) throw ShapeMismatch("encoder input is empty");
    const auto n = in.ids.size();
    std::vector<int> pos = in.positions;
    if (pos.empty()) {
        pos.resize(n);
        for (std::size_t i = 0; i < n; ++i) pos[i] = static_cast<int>(i);
    }
    if (pos.size() != n) throw ShapeMismatch("positions length differs from token count");
    for (auto& q : pos) q = std::clamp(q, 0, cfg.max_len - 1);
    if (in.visible && (in.visible->rows() != static_cast<Eigen::Index>(n) ||
                       in.visible->cols() != static_cast<Eigen::Index>(n)))
        throw ShapeMismatch("visible matrix must be n x n");

    Var x = nn::add(nn::gather_rows(p.at(prefix + "tok_emb"), in.ids),
                    nn::gather_rows(p.at(prefix + "pos_emb"), pos));
    x = nn::layer_norm_rows(x, p.at(prefix + "ln0.g"), p.at(prefix + "ln0.b"));
    const bool drop = train && rng && cfg.dropout > 0;
    for (int l = 0; l < cfg.layers; ++l) {
        const std::string lp = prefix + "layer" + std::to_string(l) + ".";
        const Matrix* vis = in.visible ? &*in.visible : nullptr;
        Var a = attention::forward(p, lp + "attn.", cfg.heads, x, x, vis);
        if (drop) a = nn::dropout(a, cfg.dropout, *rng);
        x = nn::layer_norm_rows(nn::add(x, a), p.at(lp + "ln1.g"), p.at(lp + "ln1.b"));
        Var f = nn::add_row(nn::matmul(x, p.at(lp + "ffn.w1")), p.at(lp + "ffn.b1"));
        f = nn::add_row(nn::matmul(nn::gelu(f), p.at(lp + "ffn.w2")), p.at(lp + "ffn.b2"));
        if (drop) f = nn::dropout(f, cfg.dropout, *rng);
        x = nn::layer_norm_rows(nn::add(x, f), p.at(lp + "ln2.g"), p.at(lp + "ln2.b"));
    }
    return x;
}

Var pool(const Var& states, Pooling pooling) {
    return pooling == Pooling::mean ? nn::mean_rows(states) : nn::slice_rows(states, 0, 1);
}

EncoderInput encode_text(const HashingVocab& vocab, std::string_view text, int max_len) {
    EncoderInput in;
    in.ids.push_back(HashingVocab::kCls);
    for (const auto& t : tokenize(text)) {
        if (static_cast<int>(in.ids.size()) >= max_len) break;
        in.ids.push_back(vocab.id(t.text));
    }
    return in;
}

}  // namespace encoder

// ---------------------------------------------------------------- attention

namespace attention {

void init(nn::ParamSet& p, const std::string& prefix, int width, std::mt19937_64& rng) {
    for (const char* w : {"wq", "wk", "wv", "wo"}) {
        p.add(prefix + w, nn::xavier(width, width, rng));
        p.add(prefix + "b" + std::string(w + 1), Matrix::Zero(1, width));
    }
}

Var forward(const nn::ParamSet& p, const std::string& prefix, int heads, const Var& query,
            const Var& key_value, const Matrix* visible) {
    const auto width = query.cols();
    if (key_value.cols() != width)
        throw ShapeMismatch("attention: query width " + std::to_string(width) +
                            " != key/value width " + std::to_string(key_value.cols()));
    if (heads <= 0 || width % heads != 0)
        throw ShapeMismatch("attention: heads must divide the hidden width");
    if (visible && (visible->rows() != query.rows() || visible->cols() != key_value.rows()))
        throw ShapeMismatch("attention: visibility mask shape");

    Var q = nn::add_row(nn::matmul(query, p.at(prefix + "wq")), p.at(prefix + "bq"));
    Var k = nn::add_row(nn::matmul(key_value, p.at(prefix + "wk")), p.at(prefix + "bk"));
    Var v = nn::add_row(nn::matmul(key_value, p.at(prefix + "wv")), p.at(prefix + "bv"));

    Matrix mask;
    if (visible) mask = (1.0 - visible->array()).matrix() * -1e9;

    const auto dh = width / heads;
    const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));
    std::vector<Var> outs;
    outs.reserve(static_cast<std::size_t>(heads));
    for (int h = 0; h < heads; ++h) {
        Var qh = nn::slice_cols(q, h * dh, dh);
        Var kh = nn::slice_cols(k, h * dh, dh);
        Var vh = nn::slice_cols(v, h * dh, dh);
        Var scores = nn::scale(nn::matmul(qh, nn::transpose(kh)), inv_sqrt);
        if (visible) scores = nn::add_const(scores, mask);
        outs.push_back(nn::matmul(nn::softmax_rows(scores), vh));
    }
    Var cat = heads == 1 ? outs.front() : nn::concat_cols(outs);
    return nn::add_row(nn::matmul(cat, p.at(prefix + "wo")), p.at(prefix + "bo"));
}

}  // namespace attention

// --------------------------------------------------------------------- head

namespace head {

void init(nn::ParamSet& p, int in, int hidden, int classes, std::mt19937_64& rng,
          const std::string& prefix) {
    p.add(prefix + "w1", nn::xavier(in, hidden, rng));
    p.add(prefix + "b1", Matrix::Zero(1, hidden));
    p.add(prefix + "w2", nn::xavier(hidden, classes, rng));
    p.add(prefix + "b2", Matrix::Zero(1, classes));
}

Var forward(const nn::ParamSet& p, const Var& pooled, double dropout, bool train,
            std::mt19937_64* rng, const std::string& prefix) {
    Var x = pooled;
    if (train && rng && dropout > 0) x = nn::dropout(x, dropout, *rng);
    Var h = nn::gelu(nn::add_row(nn::matmul(x, p.at(prefix + "w1")), p.at(prefix + "b1")));
    if (train && rng && dropout > 0) h = nn::dropout(h, dropout, *rng);
    return nn::add_row(nn::matmul(h, p.at(prefix + "w2")), p.at(prefix + "b2"));
}

}  // namespace head

// ------------------------------------------------------------ param (de)ser

json params_to_json(const nn::ParamSet& params) {
    json j = json::object();
    for (const auto& [name, v] : params.items()) {
        const Matrix& m = v.value();
        std::vector<double> data(static_cast<std::size_t>(m.size()));
        for (Eigen::Index r = 0, k = 0; r < m.rows(); ++r)
            for (Eigen::Index c = 0; c < m.cols(); ++c) data[static_cast<std::size_t>(k++)] = m(r, c);
        j[name] = {{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::move(data)}};
    }
    return j;
}

void params_from_json(nn::ParamSet& params, const json& j) {
    if (!j.is_object()) throw ArchitectureMismatch("checkpoint params must be an object");
    for (auto& [name, v] : params.items()) {
        if (!j.contains(name)) throw ArchitectureMismatch("checkpoint lacks layer '" + name + "'");
        const auto& e = j.at(name);
        try {
            const auto rows = e.at("rows").get<Eigen::Index>();
            const auto cols = e.at("cols").get<Eigen::Index>();
            const auto data = e.at("data").get<std::vector<double>>();
            if (rows != v.rows() || cols != v.cols() ||
                data.size() != static_cast<std::size_t>(rows * cols))
                throw ArchitectureMismatch("layer '" + name + "' has shape " + std::to_string(rows) +
                                           "x" + std::to_string(cols) + ", expected " +
                                           std::to_string(v.rows()) + "x" + std::to_string(v.cols()));
            Matrix& m = v.mutable_value();
            for (Eigen::Index r = 0, k = 0; r < rows; ++r)
                for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = data[static_cast<std::size_t>(k++)];
        } catch (const json::exception& ex) {
            throw ArchitectureMismatch("layer '" + name + "' is malformed: " + ex.what());
        }
    }
}

nn::ParamSet params_snapshot(const nn::ParamSet& params) {
    nn::ParamSet out;
    for (const auto& [name, v] : params.items()) out.add(name, v.value());
    return out;
}

void params_assign(nn::ParamSet& dst, const nn::ParamSet& src, const std::string& prefix) {
    for (auto& [name, v] : dst.items()) {
        if (name.rfind(prefix, 0) != 0) continue;
        if (!src.contains(name)) throw ArchitectureMismatch("source lacks layer '" + name + "'");
        const auto& s = src.at(name);
        if (s.rows() != v.rows() || s.cols() != v.cols())
            throw ArchitectureMismatch("layer '" + name + "' shape differs");
        v.mutable_value() = s.value();
    }
}

// --------------------------------------------------------------- Classifier

Var Classifier::batch_loss(const std::vector<const Argument*>& batch, Granularity task,
                           ForwardContext& ctx) {
    std::vector<Var> losses;
    losses.reserve(batch.size());
    for (const auto* a : batch) {
        const auto& label = a->label(task);
        if (!label) throw LabelError("training argument '" + a->id + "' has no label");
        const auto target = target_index(*label);
        const double w = class_weights_.empty() ? 1.0 : class_weights_.at(target);
        ForwardContext local = ctx;
        local.exclude_id = &a->id;
        losses.push_back(nn::cross_entropy(logits(*a, local), target, w));
    }
    Var total = losses.size() == 1 ? losses.front() : nn::sum_all(nn::concat_rows(losses));
    return nn::scale(total, 1.0 / static_cast<double>(batch.size()));
}

std::vector<double> Classifier::probabilities(const Var& logits) const {
    Matrix p = nn::softmax(logits.value());
    return std::vector<double>(p.data(), p.data() + p.size());
}

Prediction Classifier::predict(const Argument& a) {
    ForwardContext ctx;
    Var l = logits(a, ctx);
    Prediction out;
    out.probabilities = probabilities(l);
    out.label = static_cast<std::size_t>(
        std::max_element(out.probabilities.begin(), out.probabilities.end()) -
        out.probabilities.begin());
    if (supports_explanations()) out.explanation = explain(a);
    return out;
}

std::vector<double> inverse_frequency_weights(const DatasetSplit& split, const LabelSpace& labels) {
    std::vector<double> counts(labels.size(), 0.0);
    for (const auto& a : split.arguments)
        if (const auto& l = a.label(split.label_space))
            if (auto i = labels.find(*l)) counts[*i] += 1.0;
    std::vector<double> w(labels.size(), 0.0);
    double sum = 0;
    std::size_t present = 0;
    for (std::size_t i = 0; i < counts.size(); ++i)
        if (counts[i] > 0) {
            w[i] = 1.0 / counts[i];
            sum += w[i];
            ++present;
        }
    if (present == 0) return std::vector<double>(labels.size(), 1.0);
    const double mean = sum / static_cast<double>(present);
    for (auto& x : w) x = x > 0 ? x / mean : 1.0;
    return w;
}

// ----------------------------------------------------------------- baseline

json BaselineConfig::to_json() const {
    return {{"encoder", encoder.to_json()},
            {"classifier_hidden", classifier_hidden},
            {"dropout", dropout},
            {"pooling", to_string(pooling)}};
}

BaselineConfig BaselineConfig::from_json(const json& j) {
    BaselineConfig c;
    if (j.contains("encoder")) c.encoder = EncoderConfig::from_json(j.at("encoder"));
    c.classifier_hidden = j.value("classifier_hidden", c.classifier_hidden);
    c.dropout = j.value("dropout", c.dropout);
    c.pooling = parse_pooling(j.value("pooling", std::string("first_token")));
    return c;
}

BaselineClassifier::BaselineClassifier(BaselineConfig cfg, LabelSpace labels, std::uint64_t seed)
    : cfg_(std::move(cfg)), labels_(std::move(labels)), vocab_(cfg_.encoder.vocab_size) {
    cfg_.encoder.validate();
    if (labels_.empty()) throw ConfigError("label space is empty");
    std::mt19937_64 rng(derive_seed(seed, "baseline.encoder"));
    encoder::init(params_, cfg_.encoder, rng);
    std::mt19937_64 hrng(derive_seed(seed, "baseline.head"));
    head::init(params_, cfg_.encoder.hidden, cfg_.classifier_hidden,
               static_cast<int>(labels_.size()), hrng);
}

void BaselineClassifier::reset_head(LabelSpace labels, std::uint64_t seed) {
    labels_ = std::move(labels);
    for (auto it = params_.items().begin(); it != params_.items().end();)
        it = it->first.rfind("head.", 0) == 0 ? params_.items().erase(it) : std::next(it);
    std::mt19937_64 rng(seed);
    head::init(params_, cfg_.encoder.hidden, cfg_.classifier_hidden,
               static_cast<int>(labels_.size()), rng);
}

Var BaselineClassifier::logits(const Argument& a, ForwardContext& ctx) {
    auto in = encoder::encode_text(vocab_, a.text, cfg_.encoder.max_len);
    Var states = encoder::forward(params_, cfg_.encoder, in, ctx.train, ctx.rng);
    return head::forward(params_, encoder::pool(states, cfg_.pooling), cfg_.dropout, ctx.train,
                         ctx.rng);
}

// --------------------------------------------------------------- checkpoint

std::string Checkpoint::fingerprint() const {
    json j = {{"method", method}, {"config", config}, {"labels", labels.names()}};
    return hex64(fnv1a(j.dump()));
}

json Checkpoint::to_json() const {
    return {{"format", "fallacy-checkpoint"},
            {"version", 1},
            {"method", method},
            {"task", to_string(task)},
            {"labels", labels.names()},
            {"fingerprint", fingerprint()},
            {"config", config},
            {"extra", extra},
            {"params", params}};
}

Checkpoint Checkpoint::from_json(const json& j) {
    try {
        if (j.value("format", std::string()) != "fallacy-checkpoint")
            throw ArchitectureMismatch("not a checkpoint file");
        Checkpoint c;
        c.method = j.at("method").get<std::string>();
        c.task = parse_granularity(j.at("task").get<std::string>());
        c.labels = LabelSpace(j.at("labels").get<std::vector<std::string>>());
        c.config = j.at("config");
        c.extra = j.value("extra", json::object());
        c.params = j.at("params");
        return c;
    } catch (const json::exception& e) {
        throw ArchitectureMismatch(std::string("malformed checkpoint: ") + e.what());
    }
}

void Checkpoint::save(const std::filesystem::path& path) const {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw FormatError("cannot write checkpoint " + path.string());
    out << to_json().dump();
}

Checkpoint Checkpoint::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open checkpoint " + path.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        throw ArchitectureMismatch("corrupted checkpoint " + path.string() + ": " + e.what());
    }
    return from_json(j);
}

}  // namespace fallacy

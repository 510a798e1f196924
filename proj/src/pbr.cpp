#include "fallacy/pbr.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>

#include "fallacy/errors.hpp"

namespace fallacy {

using nlohmann::json;
using nn::Matrix;
using nn::Var;

void PbrConfig::validate() const {
    encoder.validate();
    if (num_positive_prototypes < 1) throw ConfigError("num_positive_prototypes must be >= 1");
    if (num_negative_prototypes < 0) throw ConfigError("num_negative_prototypes must be >= 0");
    if (lambda_examples < 0 || lambda_prototypes < 0) throw ConfigError("auxiliary weights must be >= 0");
    if (early_stopping_patience < 0) throw ConfigError("early_stopping_patience must be >= 0");
}

json PbrConfig::to_json() const {
    return {{"encoder", encoder.to_json()},
            {"num_positive_prototypes", num_positive_prototypes},
            {"num_negative_prototypes", num_negative_prototypes},
            {"use_none_class", use_none_class},
            {"lambda_examples", lambda_examples},
            {"lambda_prototypes", lambda_prototypes},
            {"class_weighting", class_weighting},
            {"early_stopping_patience", early_stopping_patience}};
}

PbrConfig PbrConfig::from_json(const json& j) {
    PbrConfig c;
    if (j.contains("encoder")) c.encoder = EncoderConfig::from_json(j.at("encoder"));
    c.num_positive_prototypes = j.value("num_positive_prototypes", c.num_positive_prototypes);
    c.num_negative_prototypes = j.value("num_negative_prototypes", c.num_negative_prototypes);
    c.use_none_class = j.value("use_none_class", c.use_none_class);
    c.lambda_examples = j.value("lambda_examples", c.lambda_examples);
    c.lambda_prototypes = j.value("lambda_prototypes", c.lambda_prototypes);
    c.class_weighting = j.value("class_weighting", c.class_weighting);
    c.early_stopping_patience = j.value("early_stopping_patience", c.early_stopping_patience);
    c.validate();
    return c;
}

ClassMask assign_mask(int positives, int classes, int negatives) {
    if (classes < 1) throw TooFewPrototypes("need at least one positive class");
    if (positives < classes)
        throw TooFewPrototypes(std::to_string(positives) + " positive prototypes cannot cover " +
                               std::to_string(classes) + " classes");
    if (negatives < 0) throw TooFewPrototypes("negative prototype count is negative");
    const int cols = classes + (negatives > 0 ? 1 : 0);
    const int total = positives + negatives;
    ClassMask mask;
    mask.m = Matrix::Zero(total, cols);
    mask.prototypes_of.resize(static_cast<std::size_t>(cols));
    const int base = positives / classes;
    const int extra = positives % classes;
    int p = 0;
    for (int c = 0; c < classes; ++c)
        for (int k = 0; k < base + (c < extra ? 1 : 0); ++k, ++p) {
            mask.m(p, c) = 1.0;
            mask.class_of.push_back(c);
            mask.prototypes_of[static_cast<std::size_t>(c)].push_back(p);
        }
    for (int k = 0; k < negatives; ++k, ++p) {
        mask.m(p, classes) = 1.0;
        mask.class_of.push_back(classes);
        mask.prototypes_of[static_cast<std::size_t>(classes)].push_back(p);
    }
    return mask;
}

PbrClassifier::PbrClassifier(PbrConfig cfg, LabelSpace labels, std::uint64_t seed)
    : cfg_(std::move(cfg)), labels_(std::move(labels)), vocab_(cfg_.encoder.vocab_size) {
    cfg_.validate();
    if (labels_.empty()) throw ConfigError("label space is empty");

    const int negatives = cfg_.use_none_class ? cfg_.num_negative_prototypes : 0;
    std::vector<std::string> positives;
    // On binary data the negative label itself is the None class.
    none_is_label_ = negatives > 0 && labels_.contains(std::string(kNotFallacious)) &&
                     labels_.contains(std::string(kFallacious)) && labels_.size() == 2;
    for (const auto& l : labels_.names())
        if (!(none_is_label_ && l == kNotFallacious)) positives.push_back(l);
    mask_ = assign_mask(cfg_.num_positive_prototypes, static_cast<int>(positives.size()), negatives);
    columns_ = positives;
    if (negatives > 0) columns_.push_back(std::string(kNoneClass));
    for (const auto& l : labels_.names()) {
        if (none_is_label_ && l == kNotFallacious) {
            label_to_column_.push_back(positives.size());
            continue;
        }
        label_to_column_.push_back(static_cast<std::size_t>(
            std::find(positives.begin(), positives.end(), l) - positives.begin()));
    }

    std::mt19937_64 erng(derive_seed(seed, "pbr.encoder"));
    encoder::init(params_, cfg_.encoder, erng);
    std::mt19937_64 prng(derive_seed(seed, "pbr.prototypes"));
    params_.add("pbr.prototypes", nn::normal(mask_.prototypes(), cfg_.encoder.hidden, 1.0, prng));
    Matrix w = mask_.m.transpose();  // C' x P
    for (Eigen::Index c = 0; c < w.rows(); ++c) {
        const double n = w.row(c).sum();
        if (n > 0) w.row(c) /= n;
    }
    params_.add("pbr.w", w);
    params_.add("pbr.b", Matrix::Zero(1, mask_.columns()));
}

Var PbrClassifier::encode(const Argument& a, ForwardContext& ctx) {
    auto states = encoder::forward(params_, cfg_.encoder,
                                   encoder::encode_text(vocab_, a.text, cfg_.encoder.max_len),
                                   ctx.train, ctx.rng);
    return encoder::pool(states, Pooling::first_token);
}

Var PbrClassifier::logits_from_encoding(const Var& encoded) {
    const Var d = nn::euclidean_distances(encoded, params_.at("pbr.prototypes"));
    const Var wm = nn::mul(params_.at("pbr.w"), nn::constant(mask_.m.transpose()));
    return nn::add_row(nn::matmul(nn::scale(d, -1.0), nn::transpose(wm)), params_.at("pbr.b"));
}

Var PbrClassifier::logits(const Argument& a, ForwardContext& ctx) {
    return logits_from_encoding(encode(a, ctx));
}

std::vector<double> PbrClassifier::probabilities(const Var& logits) const {
    // Restrict to the task labels; an extra None column never competes.
    Matrix row(1, static_cast<Eigen::Index>(labels_.size()));
    for (std::size_t i = 0; i < labels_.size(); ++i)
        row(0, static_cast<Eigen::Index>(i)) = logits.value()(0, static_cast<Eigen::Index>(label_to_column_[i]));
    Matrix p = nn::softmax(row);
    return std::vector<double>(p.data(), p.data() + p.size());
}

std::size_t PbrClassifier::target_index(const std::string& label) const {
    return label_to_column_.at(labels_.index(label));
}

PbrLossTerms PbrClassifier::loss_terms_from_encodings(const Var& x, const std::vector<std::size_t>& cols,
                                                      const std::vector<double>& weights) {
    const auto B = static_cast<Eigen::Index>(cols.size());
    const Var d = nn::euclidean_distances(x, params_.at("pbr.prototypes"));  // B x P
    const Var wm = nn::mul(params_.at("pbr.w"), nn::constant(mask_.m.transpose()));
    const Var all_logits = nn::add_row(nn::matmul(nn::scale(d, -1.0), nn::transpose(wm)), params_.at("pbr.b"));

    std::vector<Var> ce, near;
    for (Eigen::Index i = 0; i < B; ++i) {
        const auto c = cols[static_cast<std::size_t>(i)];
        ce.push_back(nn::cross_entropy(nn::slice_rows(all_logits, i, 1), c, weights[static_cast<std::size_t>(i)]));
        near.push_back(nn::min_over(d, i, mask_.prototypes_of[c]));
    }
    auto mean_of = [](const std::vector<Var>& v, double denom) {
        Var s = v.size() == 1 ? v.front() : nn::sum_all(nn::concat_rows(v));
        return nn::scale(s, 1.0 / denom);
    };
    PbrLossTerms t;
    t.cross_entropy = mean_of(ce, static_cast<double>(B));
    t.examples_to_prototypes = mean_of(near, static_cast<double>(B));

    const Var dt = nn::transpose(d);  // P x B
    std::vector<Var> proto_terms;
    for (Eigen::Index j = 0; j < mask_.prototypes(); ++j) {
        std::vector<Eigen::Index> members;
        for (Eigen::Index i = 0; i < B; ++i)
            if (static_cast<int>(cols[static_cast<std::size_t>(i)]) == mask_.class_of[static_cast<std::size_t>(j)])
                members.push_back(i);
        if (!members.empty()) proto_terms.push_back(nn::min_over(dt, j, members));
    }
    t.prototypes_to_examples = proto_terms.empty()
                                   ? nn::constant(Matrix::Zero(1, 1))
                                   : mean_of(proto_terms, static_cast<double>(mask_.prototypes()));

    t.total = t.cross_entropy;
    if (cfg_.lambda_examples != 0)
        t.total = nn::add(t.total, nn::scale(t.examples_to_prototypes, cfg_.lambda_examples));
    if (cfg_.lambda_prototypes != 0)
        t.total = nn::add(t.total, nn::scale(t.prototypes_to_examples, cfg_.lambda_prototypes));
    return t;
}

PbrLossTerms PbrClassifier::loss_terms(const std::vector<const Argument*>& batch, Granularity task,
                                       ForwardContext& ctx) {
    std::vector<Var> rows;
    std::vector<std::size_t> cols;
    std::vector<double> weights;
    for (const auto* a : batch) {
        const auto& label = a->label(task);
        if (!label) throw LabelError("training argument '" + a->id + "' has no label");
        rows.push_back(encode(*a, ctx));
        cols.push_back(target_index(*label));
        weights.push_back(class_weights_.empty() ? 1.0 : class_weights_.at(cols.back()));
    }
    const Var x = rows.size() == 1 ? rows.front() : nn::concat_rows(rows);
    return loss_terms_from_encodings(x, cols, weights);
}

Var PbrClassifier::batch_loss(const std::vector<const Argument*>& batch, Granularity task,
                              ForwardContext& ctx) {
    return loss_terms(batch, task, ctx).total;
}

PbrForwardTrace PbrClassifier::trace(const Argument& a) {
    ForwardContext ctx;
    const Var e = encode(a, ctx);
    const Var d = nn::euclidean_distances(e, params_.at("pbr.prototypes"));
    const Var l = logits_from_encoding(e);
    PbrForwardTrace t;
    t.encoded = e.value().row(0);
    t.distances = d.value().row(0);
    t.masked_distances = Matrix::Constant(mask_.columns(), mask_.prototypes(),
                                          std::numeric_limits<double>::infinity());
    for (Eigen::Index j = 0; j < mask_.prototypes(); ++j)
        for (Eigen::Index c = 0; c < mask_.columns(); ++c)
            if (mask_.m(j, c) != 0) t.masked_distances(c, j) = t.distances(j);
    t.logits = l.value().row(0);
    t.probabilities = probabilities(l);
    return t;
}

void PbrClassifier::prepare(const DatasetSplit& train, std::uint64_t seed) {
    cache_exemplars(train);
    if (cfg_.class_weighting) {
        const auto per_label = inverse_frequency_weights(train, labels_);
        std::vector<double> w(static_cast<std::size_t>(mask_.columns()), 1.0);
        for (std::size_t i = 0; i < labels_.size(); ++i) w[label_to_column_[i]] = per_label[i];
        class_weights_ = std::move(w);
    } else {
        class_weights_.clear();
    }
    if (prototypes_initialized_ || train.arguments.empty()) return;

    // Gaussian matched to the mean and covariance of the initial embeddings.
    const auto& emb = cached_embeddings();
    const auto n = emb.rows();
    const auto D = emb.cols();
    const Eigen::RowVectorXd mu = emb.colwise().mean();
    Matrix cov = Matrix::Zero(D, D);
    if (n > 1) {
        const Matrix centered = emb.rowwise() - mu;
        cov = centered.transpose() * centered / static_cast<double>(n - 1);
    }
    cov += 1e-6 * Matrix::Identity(D, D);
    Eigen::LLT<Matrix> llt(cov);
    Matrix L = llt.info() == Eigen::Success ? Matrix(llt.matrixL())
                                            : Matrix(cov.diagonal().cwiseSqrt().asDiagonal());
    std::mt19937_64 rng(derive_seed(seed, "pbr.prototype_init"));
    const Matrix z = nn::normal(mask_.prototypes(), D, 1.0, rng);
    Matrix protos = (z * L.transpose()).rowwise() + mu;
    params_.at("pbr.prototypes").mutable_value() = protos;
    prototypes_initialized_ = true;
}

void PbrClassifier::cache_exemplars(const DatasetSplit& train) {
    cache_ids_.clear();
    cache_texts_.clear();
    cache_labels_.clear();
    for (const auto& a : train.arguments) {
        cache_ids_.push_back(a.id);
        cache_texts_.push_back(a.text);
        const auto& l = a.label(train.label_space);
        cache_labels_.push_back(l ? *l : "");
    }
    cache_hash_ = 0;
    cache_embeddings_.resize(0, 0);
}

json PbrClassifier::exemplars_json() const {
    json j = json::array();
    for (std::size_t i = 0; i < cache_ids_.size(); ++i)
        j.push_back({{"id", cache_ids_[i]}, {"text", cache_texts_[i]}, {"label", cache_labels_[i]}});
    return j;
}

void PbrClassifier::load_exemplars(const json& j) {
    cache_ids_.clear();
    cache_texts_.clear();
    cache_labels_.clear();
    for (const auto& e : j) {
        cache_ids_.push_back(e.at("id").get<std::string>());
        cache_texts_.push_back(e.at("text").get<std::string>());
        cache_labels_.push_back(e.value("label", std::string()));
    }
    cache_hash_ = 0;
    cache_embeddings_.resize(0, 0);
}

const Matrix& PbrClassifier::cached_embeddings() const {
    const auto h = params_.hash("encoder.");
    if (cache_embeddings_.rows() == static_cast<Eigen::Index>(cache_texts_.size()) && cache_hash_ == h &&
        cache_embeddings_.size() > 0)
        return cache_embeddings_;
    cache_embeddings_.resize(static_cast<Eigen::Index>(cache_texts_.size()), cfg_.encoder.hidden);
    for (std::size_t i = 0; i < cache_texts_.size(); ++i) {
        auto states = encoder::forward(params_, cfg_.encoder,
                                       encoder::encode_text(vocab_, cache_texts_[i], cfg_.encoder.max_len),
                                       false, nullptr);
        cache_embeddings_.row(static_cast<Eigen::Index>(i)) = states.value().row(0);
    }
    cache_hash_ = h;
    return cache_embeddings_;
}

std::vector<PrototypeMatch> PbrClassifier::nearest_prototypes(const Argument& a, int top_n, int exemplars) {
    ForwardContext ctx;
    const Eigen::RowVectorXd e = encode(a, ctx).value().row(0);
    const Matrix& protos = params_.at("pbr.prototypes").value();
    std::vector<std::pair<double, int>> d;
    for (Eigen::Index j = 0; j < protos.rows(); ++j)
        d.emplace_back((protos.row(j) - e).norm(), static_cast<int>(j));
    std::stable_sort(d.begin(), d.end(), [](const auto& x, const auto& y) { return x.first < y.first; });
    const auto& emb = cached_embeddings();
    std::vector<PrototypeMatch> out;
    for (int r = 0; r < top_n && r < static_cast<int>(d.size()); ++r) {
        PrototypeMatch m;
        m.prototype = d[static_cast<std::size_t>(r)].second;
        m.distance = d[static_cast<std::size_t>(r)].first;
        m.assigned_class = columns_[static_cast<std::size_t>(mask_.class_of[static_cast<std::size_t>(m.prototype)])];
        std::vector<std::pair<double, std::size_t>> ex;
        for (Eigen::Index i = 0; i < emb.rows(); ++i)
            ex.emplace_back((emb.row(i) - protos.row(m.prototype)).norm(), static_cast<std::size_t>(i));
        std::stable_sort(ex.begin(), ex.end(), [](const auto& x, const auto& y) { return x.first < y.first; });
        for (int k = 0; k < exemplars && k < static_cast<int>(ex.size()); ++k) {
            const auto i = ex[static_cast<std::size_t>(k)].second;
            m.exemplars.push_back({cache_ids_[i], cache_texts_[i], ex[static_cast<std::size_t>(k)].first});
        }
        out.push_back(std::move(m));
    }
    return out;
}

json PbrClassifier::explain(const Argument& a) {
    json list = json::array();
    for (const auto& m : nearest_prototypes(a, 3, 2)) {
        json ex = json::array();
        for (const auto& e : m.exemplars) ex.push_back({{"id", e.id}, {"text", e.text}, {"distance", e.distance}});
        list.push_back({{"prototype", m.prototype}, {"class", m.assigned_class}, {"distance", m.distance},
                        {"exemplars", ex}});
    }
    return {{"prototypes", list}};
}

void PbrClassifier::export_matrix(const std::filesystem::path& path) const {
    std::ofstream out(path);
    if (!out) throw FormatError("cannot write " + path.string());
    const Matrix& p = params_.at("pbr.prototypes").value();
    out << std::setprecision(17);
    for (Eigen::Index r = 0; r < p.rows(); ++r) {
        for (Eigen::Index c = 0; c < p.cols(); ++c) out << (c ? "\t" : "") << p(r, c);
        out << '\n';
    }
}

json PbrClassifier::responsibility_table() const {
    const auto& emb = cached_embeddings();
    const Matrix& protos = params_.at("pbr.prototypes").value();
    std::map<std::string, std::map<int, std::size_t>> counts;
    for (Eigen::Index i = 0; i < emb.rows(); ++i) {
        const auto& label = cache_labels_[static_cast<std::size_t>(i)];
        if (label.empty()) continue;
        Eigen::Index best = 0;
        (protos.rowwise() - emb.row(i)).rowwise().squaredNorm().minCoeff(&best);
        ++counts[label][static_cast<int>(best)];
    }
    json table = json::object();
    for (const auto& [label, per] : counts) {
        std::vector<std::pair<int, std::size_t>> rows(per.begin(), per.end());
        std::stable_sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
        json arr = json::array();
        for (const auto& [p, c] : rows)
            arr.push_back({{"prototype", p},
                           {"count", c},
                           {"assigned_class", columns_[static_cast<std::size_t>(mask_.class_of[static_cast<std::size_t>(p)])]}});
        table[label] = arr;
    }
    return table;
}

}  // namespace fallacy

#include "fallacy/retrieval.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>

#include "fallacy/errors.hpp"

namespace fallacy {

using nlohmann::json;

std::string SentenceEncoder::fingerprint() const {
    const auto h = handle();
    return h.checkpoint_id + "|" + std::to_string(h.embedding_dim) + "|" +
           std::string(to_string(h.pooling));
}

Eigen::VectorXd l2_normalize(const Eigen::VectorXd& v) {
    const double n = v.norm();
    if (!(n > 0.0) || !std::isfinite(n)) throw EncoderFailure("cannot normalize a zero or non-finite vector");
    return v / n;
}

// ------------------------------------------------------------------ hashing

HashingSentenceEncoder::HashingSentenceEncoder(int dim, Features features)
    : dim_(dim), features_(features) {
    if (dim <= 0) throw ConfigError("hashing encoder dimension must be positive");
}

EncoderHandle HashingSentenceEncoder::handle() const {
    return {features_ == Features::words ? "hash-word" : "hash-char3", dim_, Pooling::mean};
}

Eigen::VectorXd HashingSentenceEncoder::encode(std::string_view text) const {
    Eigen::VectorXd v = Eigen::VectorXd::Zero(dim_);
    auto bump = [&](std::string_view feature, double weight) {
        const auto h = fnv1a(feature);
        const double sign = (h >> 63) ? -1.0 : 1.0;
        v(static_cast<Eigen::Index>(h % static_cast<std::uint64_t>(dim_))) += sign * weight;
    };
    std::vector<std::string> words;
    for (const auto& t : tokenize(text))
        if (t.is_word) words.push_back(to_lower(t.text));
    if (features_ == Features::words) {
        for (std::size_t i = 0; i < words.size(); ++i) {
            bump(words[i], 1.0);
            if (i + 1 < words.size()) bump(words[i] + " " + words[i + 1], 0.5);
        }
    } else {
        for (const auto& w : words) {
            const std::string padded = "^" + w + "$";
            for (std::size_t i = 0; i + 3 <= padded.size(); ++i) bump(padded.substr(i, 3), 1.0);
        }
    }
    if (v.norm() == 0.0) throw EncoderFailure("text has no encodable tokens: '" + std::string(text) + "'");
    return v;
}

// -------------------------------------------------------------- precomputed

PrecomputedSentenceEncoder::PrecomputedSentenceEncoder(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw EncoderFailure("cannot open precomputed embeddings " + path.string());
    handle_.checkpoint_id = "precomputed:" + path.filename().string();
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            auto j = json::parse(line);
            if (j.contains("checkpoint_id")) {
                handle_.checkpoint_id = j.at("checkpoint_id").get<std::string>();
                handle_.pooling = parse_pooling(j.value("pooling", std::string("mean")));
                continue;
            }
            auto vec = j.at("vector").get<std::vector<double>>();
            if (handle_.embedding_dim == 0) handle_.embedding_dim = static_cast<int>(vec.size());
            if (static_cast<int>(vec.size()) != handle_.embedding_dim || vec.empty())
                throw EncoderFailure(path.string() + ":" + std::to_string(lineno) +
                                     ": inconsistent vector width");
            table_[j.at("text").get<std::string>()] =
                Eigen::Map<Eigen::VectorXd>(vec.data(), static_cast<Eigen::Index>(vec.size()));
        } catch (const json::exception& e) {
            throw EncoderFailure(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    if (table_.empty()) throw EncoderFailure("no vectors in " + path.string());
}

Eigen::VectorXd PrecomputedSentenceEncoder::encode(std::string_view text) const {
    auto it = table_.find(text);
    if (it == table_.end())
        throw EncoderFailure("no precomputed vector for text '" + std::string(text.substr(0, 60)) + "'");
    return it->second;
}

// -------------------------------------------------------------------- model

ModelSentenceEncoder::ModelSentenceEncoder(EncoderConfig cfg, nn::ParamSet params, Pooling pooling,
                                           std::string id)
    : cfg_(cfg), params_(std::move(params)), pooling_(pooling), id_(std::move(id)),
      vocab_(cfg.vocab_size) {}

EncoderHandle ModelSentenceEncoder::handle() const {
    return {id_ + ":" + hex64(params_.hash("encoder.")), cfg_.hidden, pooling_};
}

Eigen::VectorXd ModelSentenceEncoder::encode(std::string_view text) const {
    auto in = encoder::encode_text(vocab_, text, cfg_.max_len);
    auto states = encoder::forward(params_, cfg_, in, false, nullptr);
    auto pooled = encoder::pool(states, pooling_).value();
    return pooled.row(0).transpose();
}

std::shared_ptr<SentenceEncoder> make_sentence_encoder(const std::string& spec) {
    const auto colon = spec.find(':');
    const std::string kind = spec.substr(0, colon);
    const std::string arg = colon == std::string::npos ? "" : spec.substr(colon + 1);
    auto dim = [&](int fallback) {
        if (arg.empty()) return fallback;
        try {
            return std::stoi(arg);
        } catch (const std::exception&) {
            throw ConfigError("bad encoder dimension in '" + spec + "'");
        }
    };
    if (kind == "hash-word")
        return std::make_shared<HashingSentenceEncoder>(dim(256), HashingSentenceEncoder::Features::words);
    if (kind == "hash-char3")
        return std::make_shared<HashingSentenceEncoder>(dim(256),
                                                        HashingSentenceEncoder::Features::char_trigrams);
    if (kind == "precomputed") return std::make_shared<PrecomputedSentenceEncoder>(arg);
    throw ConfigError("unknown sentence encoder '" + spec +
                      "' (expected hash-word:<dim>, hash-char3:<dim> or precomputed:<path>)");
}

// ----------------------------------------------------------------- CaseBase

CaseBase CaseBase::from_vectors(std::vector<CaseEntry> entries, Eigen::MatrixXd vectors,
                                std::string fingerprint) {
    return assemble(std::move(entries), std::move(vectors), std::move(fingerprint), true);
}

CaseBase CaseBase::assemble(std::vector<CaseEntry> entries, Eigen::MatrixXd vectors, std::string fingerprint,
                            bool normalize) {
    if (static_cast<Eigen::Index>(entries.size()) != vectors.rows())
        throw ShapeMismatch("case base: entry count differs from vector rows");
    CaseBase cb;
    for (std::size_t i = 0; i < entries.size(); ++i)
        if (!cb.index_.emplace(entries[i].id, i).second)
            throw DuplicateId("case base id '" + entries[i].id + "' appears twice");
    if (normalize)
        for (Eigen::Index r = 0; r < vectors.rows(); ++r)
            vectors.row(r) = l2_normalize(vectors.row(r).transpose()).transpose();
    cb.entries_ = std::move(entries);
    cb.vectors_ = std::move(vectors);
    cb.fingerprint_ = std::move(fingerprint);
    return cb;
}

CaseBase CaseBase::build(const DatasetSplit& train, const SentenceEncoder& encoder) {
    if (train.arguments.empty()) throw ConfigError("cannot build a case base from an empty split");
    std::vector<CaseEntry> entries;
    const auto dim = encoder.handle().embedding_dim;
    Eigen::MatrixXd vectors(static_cast<Eigen::Index>(train.size()), dim);
    std::set<std::string> seen;
    for (std::size_t i = 0; i < train.size(); ++i) {
        const auto& a = train.arguments[i];
        if (!seen.insert(a.id).second) throw DuplicateId("training id '" + a.id + "' appears twice");
        const auto& l = a.label(train.label_space);
        entries.push_back({a.id, l ? *l : std::string(), a.text});
        Eigen::VectorXd v;
        try {
            v = encoder.encode(a.text);
        } catch (const EncoderFailure&) {
            throw;
        } catch (const std::exception& e) {
            throw EncoderFailure("encoding '" + a.id + "' failed: " + e.what());
        }
        if (v.size() != dim) throw EncoderFailure("encoder returned wrong width for '" + a.id + "'");
        vectors.row(static_cast<Eigen::Index>(i)) = v.transpose();
    }
    return from_vectors(std::move(entries), std::move(vectors), encoder.fingerprint());
}

std::optional<std::size_t> CaseBase::find(std::string_view id) const {
    auto it = index_.find(id);
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

RetrievalResult CaseBase::retrieve(const Eigen::VectorXd& query, std::size_t k, double threshold,
                                   const std::set<std::string>& exclude_ids,
                                   FilterOrder order) const {
    RetrievalResult out;
    out.k_requested = k;
    out.threshold = threshold;
    if (k == 0 || entries_.empty()) return out;
    if (query.size() != vectors_.cols())
        throw ShapeMismatch("query width " + std::to_string(query.size()) + " != case base width " +
                            std::to_string(vectors_.cols()));
    const Eigen::VectorXd q = l2_normalize(query);
    const Eigen::VectorXd sims = vectors_ * q;

    std::vector<Neighbor> cand;
    cand.reserve(entries_.size());
    for (std::size_t i = 0; i < entries_.size(); ++i) {
        if (exclude_ids.count(entries_[i].id)) continue;
        const double s = std::clamp(sims(static_cast<Eigen::Index>(i)), -1.0, 1.0);
        if (order == FilterOrder::filter_then_truncate && s < threshold) continue;
        cand.push_back({entries_[i].id, s, i});
    }
    auto better = [](const Neighbor& a, const Neighbor& b) {
        if (a.similarity != b.similarity) return a.similarity > b.similarity;
        return a.id < b.id;
    };
    const std::size_t keep = std::min(k, cand.size());
    std::partial_sort(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(keep), cand.end(), better);
    cand.resize(keep);
    if (order == FilterOrder::truncate_then_filter)
        std::erase_if(cand, [&](const Neighbor& n) { return n.similarity < threshold; });
    out.neighbors = std::move(cand);
    return out;
}

RetrievalResult CaseBase::retrieve(const Argument& query, const SentenceEncoder& encoder,
                                   std::size_t k, double threshold,
                                   const std::set<std::string>& exclude_ids,
                                   FilterOrder order) const {
    if (k == 0) {
        RetrievalResult out;
        out.threshold = threshold;
        return out;
    }
    return retrieve(encoder.encode(query.text), k, threshold, exclude_ids, order);
}

namespace {
constexpr char kMagic[4] = {'F', 'C', 'B', '1'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void put(std::ostream& out, T v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}
template <typename T>
T get(std::istream& in, const std::string& what) {
    T v{};
    if (!in.read(reinterpret_cast<char*>(&v), sizeof(T))) throw FormatError("truncated case base (" + what + ")");
    return v;
}
}  // namespace

void CaseBase::save(const std::filesystem::path& blob, const std::filesystem::path& sidecar) const {
    std::ofstream out(blob, std::ios::binary);
    if (!out) throw FormatError("cannot write " + blob.string());
    out.write(kMagic, 4);
    put<std::uint32_t>(out, kVersion);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(fingerprint_.size()));
    out.write(fingerprint_.data(), static_cast<std::streamsize>(fingerprint_.size()));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(vectors_.cols()));
    put<std::uint64_t>(out, static_cast<std::uint64_t>(vectors_.rows()));
    for (Eigen::Index r = 0; r < vectors_.rows(); ++r)
        for (Eigen::Index c = 0; c < vectors_.cols(); ++c) put<double>(out, vectors_(r, c));

    json j = {{"fingerprint", fingerprint_}, {"dim", vectors_.cols()}, {"count", vectors_.rows()}};
    json arr = json::array();
    for (const auto& e : entries_) arr.push_back({{"id", e.id}, {"label", e.label}, {"text", e.text}});
    j["entries"] = std::move(arr);
    std::ofstream side(sidecar);
    if (!side) throw FormatError("cannot write " + sidecar.string());
    side << j.dump(1) << '\n';
}

CaseBase CaseBase::load(const std::filesystem::path& blob, const std::filesystem::path& sidecar) {
    std::ifstream in(blob, std::ios::binary);
    if (!in) throw FormatError("cannot open " + blob.string());
    char magic[4];
    if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0)
        throw FormatError(blob.string() + " is not a case base blob");
    if (get<std::uint32_t>(in, "version") != kVersion) throw FormatError("unsupported case base version");
    const auto flen = get<std::uint32_t>(in, "fingerprint length");
    std::string fp(flen, '\0');
    if (!in.read(fp.data(), flen)) throw FormatError("truncated case base (fingerprint)");
    const auto dim = get<std::uint32_t>(in, "dim");
    const auto count = get<std::uint64_t>(in, "count");
    Eigen::MatrixXd vectors(static_cast<Eigen::Index>(count), static_cast<Eigen::Index>(dim));
    for (Eigen::Index r = 0; r < vectors.rows(); ++r)
        for (Eigen::Index c = 0; c < vectors.cols(); ++c) vectors(r, c) = get<double>(in, "vectors");

    std::ifstream side(sidecar);
    if (!side) throw FormatError("cannot open " + sidecar.string());
    json j;
    try {
        j = json::parse(side);
    } catch (const json::exception& e) {
        throw FormatError(sidecar.string() + ": " + e.what());
    }
    if (j.at("fingerprint").get<std::string>() != fp || j.at("count").get<std::uint64_t>() != count)
        throw FormatError("case base sidecar does not match blob");
    std::vector<CaseEntry> entries;
    for (const auto& e : j.at("entries"))
        entries.push_back({e.at("id").get<std::string>(), e.value("label", std::string()),
                           e.value("text", std::string())});
    return assemble(std::move(entries), std::move(vectors), fp, false);
}

}  // namespace fallacy

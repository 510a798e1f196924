#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fallacy/corpus.hpp"
#include "fallacy/model.hpp"

namespace fallacy {

struct EncoderHandle {
    std::string checkpoint_id;
    int embedding_dim = 0;
    Pooling pooling = Pooling::mean;
};

// Sentence -> dense vector. Implementations are deterministic.
class SentenceEncoder {
public:
    virtual ~SentenceEncoder() = default;
    virtual EncoderHandle handle() const = 0;
    virtual Eigen::VectorXd encode(std::string_view text) const = 0;
    std::string fingerprint() const;
};

// Signed feature hashing of lowercased word unigrams + bigrams
// ("hash-word:<dim>") or character trigrams ("hash-char3:<dim>").
class HashingSentenceEncoder : public SentenceEncoder {
public:
    enum class Features { words, char_trigrams };
    HashingSentenceEncoder(int dim, Features features);
    EncoderHandle handle() const override;
    Eigen::VectorXd encode(std::string_view text) const override;

private:
    int dim_;
    Features features_;
};

// Vectors produced offline by an external sentence encoder, keyed by text.
// File: JSON lines {"text": ..., "vector": [...]}; optional first line
// {"checkpoint_id": ..., "pooling": ...}.
class PrecomputedSentenceEncoder : public SentenceEncoder {
public:
    explicit PrecomputedSentenceEncoder(const std::filesystem::path& path);
    EncoderHandle handle() const override { return handle_; }
    Eigen::VectorXd encode(std::string_view text) const override;

private:
    EncoderHandle handle_;
    std::map<std::string, Eigen::VectorXd, std::less<>> table_;
};

// Uses a (trained or random) transformer encoder from this library.
class ModelSentenceEncoder : public SentenceEncoder {
public:
    ModelSentenceEncoder(EncoderConfig cfg, nn::ParamSet params, Pooling pooling,
                         std::string id = "model");
    EncoderHandle handle() const override;
    Eigen::VectorXd encode(std::string_view text) const override;

private:
    EncoderConfig cfg_;
    nn::ParamSet params_;
    Pooling pooling_;
    std::string id_;
    HashingVocab vocab_;
};

// "hash-word:256", "hash-char3:128", "precomputed:<path>".
std::shared_ptr<SentenceEncoder> make_sentence_encoder(const std::string& spec);

struct CaseEntry {
    std::string id;
    std::string label;
    std::string text;
};

struct Neighbor {
    std::string id;
    double similarity = 0.0;
    std::size_t index = 0;  // row in the case base
};

struct RetrievalResult {
    std::vector<Neighbor> neighbors;  // similarity non-increasing, ties by ascending id
    std::size_t k_requested = 0;
    double threshold = 0.0;
};

enum class FilterOrder {
    filter_then_truncate,  // drop < threshold, then keep top k
    truncate_then_filter,  // keep top k, then drop < threshold
};

class CaseBase {
public:
    CaseBase() = default;
    static CaseBase build(const DatasetSplit& train, const SentenceEncoder& encoder);
    // Rows of `vectors` are L2-normalized on the way in.
    static CaseBase from_vectors(std::vector<CaseEntry> entries, Eigen::MatrixXd vectors,
                                 std::string fingerprint);

    std::size_t size() const { return entries_.size(); }
    int dim() const { return static_cast<int>(vectors_.cols()); }
    const std::string& fingerprint() const { return fingerprint_; }
    const std::vector<CaseEntry>& entries() const { return entries_; }
    const CaseEntry& entry(std::size_t i) const { return entries_.at(i); }
    const Eigen::MatrixXd& vectors() const { return vectors_; }
    std::optional<std::size_t> find(std::string_view id) const;

    RetrievalResult retrieve(const Eigen::VectorXd& query, std::size_t k, double threshold = 0.5,
                             const std::set<std::string>& exclude_ids = {},
                             FilterOrder order = FilterOrder::filter_then_truncate) const;
    RetrievalResult retrieve(const Argument& query, const SentenceEncoder& encoder, std::size_t k,
                             double threshold = 0.5, const std::set<std::string>& exclude_ids = {},
                             FilterOrder order = FilterOrder::filter_then_truncate) const;

    // Binary blob (header: magic, version, fingerprint, dim, count; then
    // row-major float64 vectors) + JSON sidecar with ids/labels/texts.
    void save(const std::filesystem::path& blob, const std::filesystem::path& sidecar) const;
    static CaseBase load(const std::filesystem::path& blob, const std::filesystem::path& sidecar);

private:
    static CaseBase assemble(std::vector<CaseEntry> entries, Eigen::MatrixXd vectors, std::string fingerprint,
                             bool normalize);

    std::vector<CaseEntry> entries_;
    Eigen::MatrixXd vectors_;  // count x dim, unit rows
    std::string fingerprint_;
    std::map<std::string, std::size_t, std::less<>> index_;
};

Eigen::VectorXd l2_normalize(const Eigen::VectorXd& v);  // throws EncoderFailure on zero vectors

}  // namespace fallacy

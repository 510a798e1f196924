#pragma once
// Independent reference implementations used as oracles, plus synthetic
// fixtures. Nothing here calls into the code under test except for plain
// data types.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "fallacy/corpus.hpp"
#include "fallacy/ki.hpp"
#include "fallacy/nn.hpp"

namespace oracle {

struct Scores {
    double accuracy = 0, precision = 0, recall = 0, f1 = 0;
};

// Confusion matrix over the union of observed labels, support-weighted.
inline Scores weighted(const std::vector<std::string>& gold, const std::vector<std::string>& pred) {
    std::set<std::string> labels(gold.begin(), gold.end());
    labels.insert(pred.begin(), pred.end());
    std::vector<std::string> names(labels.begin(), labels.end());
    const std::size_t n = names.size();
    auto idx = [&](const std::string& s) {
        return static_cast<std::size_t>(std::find(names.begin(), names.end(), s) - names.begin());
    };
    std::vector<std::vector<double>> cm(n, std::vector<double>(n, 0.0));
    for (std::size_t i = 0; i < gold.size(); ++i) cm[idx(gold[i])][idx(pred[i])] += 1;
    Scores s;
    double diag = 0;
    for (std::size_t c = 0; c < n; ++c) {
        double row = 0, col = 0;
        for (std::size_t k = 0; k < n; ++k) {
            row += cm[c][k];
            col += cm[k][c];
        }
        diag += cm[c][c];
        const double p = col > 0 ? cm[c][c] / col : 0.0;
        const double r = row > 0 ? cm[c][c] / row : 0.0;
        const double f = p + r > 0 ? 2 * p * r / (p + r) : 0.0;
        const double w = row / static_cast<double>(gold.size());
        s.precision += w * p;
        s.recall += w * r;
        s.f1 += w * f;
    }
    s.accuracy = diag / static_cast<double>(gold.size());
    return s;
}

struct Hit {
    std::string id;
    double sim;
};

// Full scan: cosine of normalized vectors, threshold, then top-k by
// (similarity desc, id asc).
inline std::vector<Hit> top_k(const std::vector<std::string>& ids, const std::vector<std::vector<double>>& rows,
                              const std::vector<double>& query, std::size_t k, double threshold) {
    auto norm = [](const std::vector<double>& v) {
        double s = 0;
        for (double x : v) s += x * x;
        return std::sqrt(s);
    };
    const double qn = norm(query);
    std::vector<Hit> all;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        double dot = 0;
        for (std::size_t d = 0; d < query.size(); ++d) dot += rows[i][d] * query[d];
        const double sim = dot / (norm(rows[i]) * qn);
        if (sim >= threshold) all.push_back({ids[i], sim});
    }
    std::sort(all.begin(), all.end(), [](const Hit& a, const Hit& b) {
        if (a.sim != b.sim) return a.sim > b.sim;
        return a.id < b.id;
    });
    if (all.size() > k) all.resize(k);
    return all;
}

using Mat = std::vector<std::vector<double>>;

inline Mat to_mat(const Eigen::MatrixXd& m) {
    Mat out(static_cast<std::size_t>(m.rows()), std::vector<double>(static_cast<std::size_t>(m.cols())));
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c) out[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)] = m(r, c);
    return out;
}

inline Mat affine(const Mat& x, const Mat& w, const Mat& b) {
    Mat y(x.size(), std::vector<double>(w[0].size(), 0.0));
    for (std::size_t i = 0; i < x.size(); ++i)
        for (std::size_t j = 0; j < w[0].size(); ++j) {
            double s = b[0][j];
            for (std::size_t k = 0; k < w.size(); ++k) s += x[i][k] * w[k][j];
            y[i][j] = s;
        }
    return y;
}

// softmax(Q_h K_h^T / sqrt(d_h)) V_h per head, concatenated, then W_o.
inline Mat attention(const Mat& q_in, const Mat& kv_in, const std::map<std::string, Mat>& p, int heads) {
    const Mat q = affine(q_in, p.at("wq"), p.at("bq"));
    const Mat k = affine(kv_in, p.at("wk"), p.at("bk"));
    const Mat v = affine(kv_in, p.at("wv"), p.at("bv"));
    const std::size_t width = q[0].size(), dh = width / static_cast<std::size_t>(heads);
    Mat cat(q.size(), std::vector<double>(width, 0.0));
    for (int h = 0; h < heads; ++h) {
        const std::size_t off = static_cast<std::size_t>(h) * dh;
        for (std::size_t i = 0; i < q.size(); ++i) {
            std::vector<double> s(k.size());
            double mx = -1e300;
            for (std::size_t j = 0; j < k.size(); ++j) {
                double dot = 0;
                for (std::size_t d = 0; d < dh; ++d) dot += q[i][off + d] * k[j][off + d];
                s[j] = dot / std::sqrt(static_cast<double>(dh));
                mx = std::max(mx, s[j]);
            }
            double z = 0;
            for (auto& x : s) z += (x = std::exp(x - mx));
            for (std::size_t j = 0; j < k.size(); ++j)
                for (std::size_t d = 0; d < dh; ++d) cat[i][off + d] += s[j] / z * v[j][off + d];
        }
    }
    return affine(cat, p.at("wo"), p.at("bo"));
}

inline std::vector<double> distances(const std::vector<double>& x, const Mat& protos) {
    std::vector<double> d;
    for (const auto& p : protos) {
        double s = 0;
        for (std::size_t i = 0; i < x.size(); ++i) s += (x[i] - p[i]) * (x[i] - p[i]);
        d.push_back(std::sqrt(s));
    }
    return d;
}

// Expected layout of a sentence tree: trunk token, then the branches
// anchored on it (input order), soft = anchor soft + 1 + k.
struct TreeCell {
    std::string text;
    int soft;
    int branch;  // 0 = trunk, otherwise 1 + input branch index
    int anchor_hard;
};

inline std::vector<TreeCell> tree_layout(const std::vector<std::string>& trunk,
                                         const std::vector<fallacy::Branch>& branches) {
    std::vector<TreeCell> out;
    for (std::size_t i = 0; i < trunk.size(); ++i) {
        const int hard = static_cast<int>(out.size());
        out.push_back({trunk[i], static_cast<int>(i), 0, -1});
        for (std::size_t b = 0; b < branches.size(); ++b) {
            if (branches[b].anchor != i) continue;
            for (std::size_t k = 0; k < branches[b].tokens.size(); ++k)
                out.push_back({branches[b].tokens[k], static_cast<int>(i + 1 + k), static_cast<int>(b + 1), hard});
        }
    }
    return out;
}

// Pairwise rules: trunk-trunk visible; same branch visible; branch token
// and its own anchor visible; everything else invisible.
inline bool visible(const std::vector<TreeCell>& cells, std::size_t a, std::size_t b) {
    const auto& x = cells[a];
    const auto& y = cells[b];
    if (x.branch == 0 && y.branch == 0) return true;
    if (x.branch != 0 && x.branch == y.branch) return true;
    if (x.branch != 0 && y.branch == 0 && x.anchor_hard == static_cast<int>(b)) return true;
    if (y.branch != 0 && x.branch == 0 && y.anchor_hard == static_cast<int>(a)) return true;
    return false;
}

}  // namespace oracle

namespace fixture {

// Keyword-separable labelled arguments: every item of class c carries the
// keyword(s) of c plus random filler drawn from a shared pool.
inline fallacy::SplitSet keyword_dataset(fallacy::Granularity g, const std::vector<std::string>& classes,
                                         const std::vector<std::string>& keywords, std::size_t per_class,
                                         std::uint64_t seed) {
    static const std::vector<std::string> filler{
        "people", "say", "city", "policy", "river", "school", "market", "garden", "council", "weather",
        "friend", "doctor", "report", "budget", "vote", "car", "music", "book", "team", "plan"};
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> pick(0, filler.size() - 1), len(4, 8);
    fallacy::SplitSet s;
    s.train.name = "train";
    s.dev.name = "dev";
    s.test.name = "test";
    s.train.label_space = s.dev.label_space = s.test.label_space = g;
    for (std::size_t c = 0; c < classes.size(); ++c)
        for (std::size_t i = 0; i < per_class; ++i) {
            std::vector<std::string> words;
            const auto n = len(rng);
            for (std::size_t w = 0; w < n; ++w) words.push_back(filler[pick(rng)]);
            words.insert(words.begin() + static_cast<std::ptrdiff_t>(rng() % (words.size() + 1)), keywords[c]);
            std::string text;
            for (const auto& w : words) text += (text.empty() ? "" : " ") + w;
            fallacy::Argument a;
            a.id = classes[c].substr(0, 3) + std::to_string(c) + "-" + std::to_string(i);
            a.text = text;
            a.label(g) = classes[c];
            a.source = fallacy::Source::synthetic;
            const auto slot = i % 10;
            auto& dst = slot < 8 ? s.train : slot == 8 ? s.dev : s.test;
            a.split = slot < 8 ? fallacy::Split::train : slot == 8 ? fallacy::Split::dev : fallacy::Split::test;
            dst.arguments.push_back(std::move(a));
        }
    return s;
}

inline fallacy::SplitSet binary_keyword_dataset(std::size_t n = 200, std::uint64_t seed = 5) {
    return keyword_dataset(fallacy::Granularity::binary, {"fallacious", "not_fallacious"},
                           {"obviously", "measured"}, n / 2, seed);
}

inline std::filesystem::path temp_dir(const std::string& name) {
    auto p = std::filesystem::temp_directory_path() / ("fallacy-test-" + name);
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p;
}

}  // namespace fixture

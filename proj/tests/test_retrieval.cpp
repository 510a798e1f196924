#include <doctest.h>

#include "fallacy/errors.hpp"
#include "fallacy/retrieval.hpp"
#include "support.hpp"

using namespace fallacy;

TEST_SUITE("retrieval") {

TEST_CASE("case base stores unit vectors for every train item") {
    auto data = fixture::binary_keyword_dataset(125, 2);
    const auto enc = make_sentence_encoder("hash-word:128");
    const auto base = CaseBase::build(data.train, *enc);
    CHECK(base.size() == data.train.size());
    for (Eigen::Index i = 0; i < base.vectors().rows(); ++i)
        CHECK(std::abs(base.vectors().row(i).norm() - 1.0) <= 1e-6);
    data.train.arguments.push_back(data.train.arguments.front());
    CHECK_THROWS_AS(CaseBase::build(data.train, *enc), DuplicateId);
}

TEST_CASE("a stored text retrieves itself first") {
    const auto data = fixture::binary_keyword_dataset(60, 3);
    const auto enc = make_sentence_encoder("hash-char3:256");
    const auto base = CaseBase::build(data.train, *enc);
    const auto& q = data.train.arguments[5];
    const auto r = base.retrieve(q, *enc, 3);
    REQUIRE_FALSE(r.neighbors.empty());
    CHECK(r.neighbors[0].id == q.id);
    CHECK(std::abs(r.neighbors[0].similarity - 1.0) <= 1e-6);
    CHECK(base.retrieve(q, *enc, 0).neighbors.empty());
    const auto excl = base.retrieve(q, *enc, 3, 0.5, {q.id});
    for (const auto& n : excl.neighbors) CHECK(n.id != q.id);
}

TEST_CASE("top-10 over 1000 random vectors equals a full scan") {
    std::mt19937_64 rng(1);
    std::normal_distribution<double> n(0, 1);
    std::vector<CaseEntry> entries;
    std::vector<std::string> ids;
    std::vector<std::vector<double>> rows;
    Eigen::MatrixXd m(1000, 16);
    for (int i = 0; i < 1000; ++i) {
        std::vector<double> r(16);
        for (int d = 0; d < 16; ++d) m(i, d) = r[static_cast<std::size_t>(d)] = n(rng);
        entries.push_back({"e" + std::to_string(i), "l", "t"});
        ids.push_back(entries.back().id);
        rows.push_back(r);
    }
    const auto base = CaseBase::from_vectors(entries, m, "rand");
    std::vector<double> q(16);
    Eigen::VectorXd qe(16);
    for (int d = 0; d < 16; ++d) qe(d) = q[static_cast<std::size_t>(d)] = n(rng);
    const auto got = base.retrieve(qe, 10, -1.0);
    const auto want = oracle::top_k(ids, rows, q, 10, -1.0);
    REQUIRE(got.neighbors.size() == 10);
    for (std::size_t i = 0; i < 10; ++i) {
        CHECK(got.neighbors[i].id == want[i].id);
        CHECK(got.neighbors[i].similarity == doctest::Approx(want[i].sim).epsilon(1e-9));
    }
}

TEST_CASE("threshold order changes what survives") {
    std::vector<CaseEntry> e{{"a", "x", ""}, {"b", "x", ""}, {"c", "x", ""}};
    Eigen::MatrixXd m(3, 2);
    m << 1, 0, 0.8, 0.6, 0, 1;
    const auto base = CaseBase::from_vectors(e, m, "fp");
    Eigen::VectorXd q(2);
    q << 0.6, 0.8;
    // sims: a 0.6, b 0.96, c 0.8
    const auto ft = base.retrieve(q, 2, 0.7, {}, FilterOrder::filter_then_truncate);
    REQUIRE(ft.neighbors.size() == 2);
    CHECK(ft.neighbors[0].id == "b");
    CHECK(ft.neighbors[1].id == "c");
    const auto tf = base.retrieve(q, 2, 0.9, {}, FilterOrder::truncate_then_filter);
    CHECK(tf.neighbors.size() == 1);
}

TEST_CASE("binary blob round-trips") {
    const auto data = fixture::binary_keyword_dataset(40, 4);
    const auto enc = make_sentence_encoder("hash-word:64");
    const auto base = CaseBase::build(data.train, *enc);
    const auto dir = fixture::temp_dir("retrieval-blob");
    base.save(dir / "cb.bin", dir / "cb.json");
    const auto back = CaseBase::load(dir / "cb.bin", dir / "cb.json");
    CHECK(back.size() == base.size());
    CHECK(back.fingerprint() == base.fingerprint());
    CHECK((back.vectors() - base.vectors()).cwiseAbs().maxCoeff() == 0.0);
    CHECK(back.entry(3).text == base.entry(3).text);
}

TEST_CASE("unknown encoder spec and zero vectors") {
    CHECK_THROWS_AS(make_sentence_encoder("word2vec"), ConfigError);
    CHECK_THROWS_AS(l2_normalize(Eigen::VectorXd::Zero(3)), EncoderFailure);
}

}

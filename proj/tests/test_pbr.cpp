#include <doctest.h>

#include <fstream>

#include "fallacy/errors.hpp"
#include "fallacy/pbr.hpp"
#include "support.hpp"

using namespace fallacy;

namespace {

PbrConfig small(int positives = 4, int negatives = 1) {
    PbrConfig c;
    c.encoder.vocab_size = 256;
    c.encoder.hidden = 8;
    c.encoder.heads = 2;
    c.encoder.ffn = 16;
    c.encoder.max_len = 16;
    c.num_positive_prototypes = positives;
    c.num_negative_prototypes = negatives;
    return c;
}

std::vector<int> sizes(const ClassMask& m) {
    std::vector<int> out;
    for (const auto& p : m.prototypes_of) out.push_back(static_cast<int>(p.size()));
    return out;
}

}  // namespace

TEST_SUITE("pbr") {

TEST_CASE("mask assignment") {
    CHECK(sizes(assign_mask(4, 2, 0)) == std::vector<int>{2, 2});
    CHECK(sizes(assign_mask(49, 13, 0)) == std::vector<int>{4, 4, 4, 4, 4, 4, 4, 4, 4, 4, 3, 3, 3});
    const auto m = assign_mask(49, 13, 1);
    CHECK(m.columns() == 14);
    CHECK(m.prototypes_of.back().size() == 1);
    for (Eigen::Index j = 0; j < m.m.rows(); ++j) CHECK(m.m.row(j).sum() == 1.0);
    CHECK_THROWS_AS(assign_mask(3, 4, 0), TooFewPrototypes);
}

TEST_CASE("distance to a prototype equal to the input is zero") {
    PbrClassifier m(small(), LabelSpace({"a", "b"}), 1);
    Argument x;
    x.text = "some words here";
    const auto t0 = m.trace(x);
    m.params().at("pbr.prototypes").mutable_value().row(3) = t0.encoded;
    const auto t = m.trace(x);
    CHECK(t.distances(3) == doctest::Approx(0.0));
    const auto top = m.nearest_prototypes(x, 1, 0);
    REQUIRE(top.size() == 1);
    CHECK(top[0].prototype == 3);
    CHECK(top[0].distance == doctest::Approx(0.0));
    for (Eigen::Index j = 0; j < m.mask().prototypes(); ++j)
        for (Eigen::Index c = 0; c < m.mask().columns(); ++c)
            CHECK(std::isinf(t.masked_distances(c, j)) == (m.mask().m(j, c) == 0));
}

TEST_CASE("random small instance distances and ordering") {
    PbrClassifier m(small(4, 0), LabelSpace({"a", "b"}), 2);
    const auto data = fixture::keyword_dataset(Granularity::coarse, {"a", "b"}, {"alpha", "beta"}, 6, 1);
    m.prepare(data.train, 2);
    for (const auto& a : data.train.arguments) {
        const auto t = m.trace(a);
        const std::vector<double> x(t.encoded.data(), t.encoded.data() + t.encoded.size());
        const auto want = oracle::distances(x, oracle::to_mat(m.params().at("pbr.prototypes").value()));
        for (std::size_t j = 0; j < want.size(); ++j)
            CHECK(std::abs(t.distances(static_cast<Eigen::Index>(j)) - want[j]) <= 1e-6);
        auto order = std::vector<std::size_t>{0, 1, 2, 3};
        std::sort(order.begin(), order.end(), [&](auto p, auto q) { return want[p] < want[q]; });
        const auto near = m.nearest_prototypes(a, 4, 2);
        for (std::size_t i = 0; i < 4; ++i) {
            CHECK(near[i].prototype == static_cast<int>(order[i]));
            CHECK(near[i].exemplars.size() == 2);
        }
    }
}

TEST_CASE("auxiliary terms vanish when examples sit on prototypes") {
    PbrClassifier m(small(2, 0), LabelSpace({"a", "b"}), 3);
    auto& p = m.params().at("pbr.prototypes").mutable_value();
    Eigen::MatrixXd x(2, 8);
    x.row(0) = p.row(m.mask().prototypes_of[0][0]);
    x.row(1) = p.row(m.mask().prototypes_of[1][0]);
    const auto t = m.loss_terms_from_encodings(nn::constant(x), {0, 1}, {1.0, 1.0});
    CHECK(t.examples_to_prototypes.scalar() == doctest::Approx(0.0));
    CHECK(t.prototypes_to_examples.scalar() == doctest::Approx(0.0));
}

TEST_CASE("binary task uses the None column for not_fallacious") {
    PbrClassifier m(small(4, 1), LabelSpace({"fallacious", "not_fallacious"}), 1);
    CHECK(m.columns().size() == 2);
    CHECK(m.target_index("not_fallacious") == static_cast<std::size_t>(m.mask().columns() - 1));
    Argument a;
    a.text = "x y";
    CHECK(m.predict(a).probabilities.size() == 2);
}

TEST_CASE("prototype export and responsibility table") {
    PbrClassifier m(small(49, 1), LabelSpace({"a", "b", "c"}), 1);
    const auto dir = fixture::temp_dir("pbr-export");
    m.export_matrix(dir / "p.tsv");
    std::ifstream in(dir / "p.tsv");
    std::size_t rows = 0;
    for (std::string line; std::getline(in, line);) rows += !line.empty();
    CHECK(rows == 50);

    const auto data = fixture::keyword_dataset(Granularity::coarse, {"a", "b", "c"}, {"x1", "x2", "x3"}, 7, 2);
    m.prepare(data.train, 1);
    const auto table = m.responsibility_table();
    const auto counts = data.train.class_counts();
    for (const auto& [label, n] : counts) {
        std::size_t total = 0;
        for (const auto& row : table.at(label)) total += row.at("count").get<std::size_t>();
        CHECK(total == n);
    }
}

TEST_CASE("prototype initialization is skipped after loading weights") {
    PbrClassifier m(small(), LabelSpace({"a", "b"}), 1);
    const auto data = fixture::keyword_dataset(Granularity::coarse, {"a", "b"}, {"x1", "x2"}, 10, 2);
    m.prepare(data.train, 1);
    CHECK(m.prototypes_initialized());
    const auto h = m.params().hash("pbr.");
    m.prepare(data.train, 99);
    CHECK(m.params().hash("pbr.") == h);
}

}

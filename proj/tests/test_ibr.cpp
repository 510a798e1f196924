#include <doctest.h>

#include "fallacy/errors.hpp"
#include "fallacy/ibr.hpp"
#include "fallacy/training.hpp"
#include "support.hpp"

using namespace fallacy;

namespace {

IbrConfig small() {
    IbrConfig c;
    c.encoder.vocab_size = 256;
    c.encoder.hidden = 8;
    c.encoder.heads = 2;
    c.encoder.ffn = 16;
    c.encoder.max_len = 16;
    c.num_attention_heads = 2;
    return c;
}

}  // namespace

TEST_SUITE("ibr") {

TEST_CASE("input composition") {
    CHECK(compose_input("a", {}) == "a");
    CHECK(compose_input("a", {"b", "c"}) == "a <SEP> b c");
    HashingVocab v(256);
    const auto t = compose_tokens(v, "one two three", {"four five six seven eight nine ten"}, 8);
    CHECK(t.ids.size() == 8);
    CHECK(t.ids[0] == HashingVocab::kCls);
    CHECK(t.ids[4] == HashingVocab::kSep);
    const auto bare = compose_tokens(v, "one two three", {}, 8);
    CHECK(bare.ids == encoder::encode_text(v, "one two three", 8).ids);
}

TEST_CASE("config validation") {
    auto c = small();
    c.k_cases = 11;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = small();
    c.num_attention_heads = 3;
    CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("single-token key/value returns its value row") {
    nn::ParamSet p;
    std::mt19937_64 rng(1);
    attention::init(p, "adapter.", 8, rng);
    Eigen::MatrixXd q = Eigen::MatrixXd::Random(3, 8), kv = Eigen::MatrixXd::Random(1, 8);
    const auto a = adapt(p, 2, nn::constant(q), nn::constant(kv), true).value();
    const Eigen::MatrixXd v = kv * p.at("adapter.wv").value() + p.at("adapter.bv").value();
    const Eigen::MatrixXd want = v * p.at("adapter.wo").value() + p.at("adapter.bo").value();
    for (Eigen::Index r = 0; r < 3; ++r) CHECK((a.row(r) - want.row(0)).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK_THROWS_AS(adapt(p, 2, nn::constant(q), nn::constant(Eigen::MatrixXd::Random(2, 4)), true), ShapeMismatch);
}

TEST_CASE("len 4, width 8, 2 heads matches the hand-rolled oracle") {
    nn::ParamSet p;
    std::mt19937_64 rng(2);
    attention::init(p, "adapter.", 8, rng);
    Eigen::MatrixXd q = Eigen::MatrixXd::Random(4, 8), kv = Eigen::MatrixXd::Random(4, 8);
    const auto got = adapt(p, 2, nn::constant(q), nn::constant(kv), true).value();
    std::map<std::string, oracle::Mat> w;
    for (const char* k : {"wq", "wk", "wv", "wo", "bq", "bk", "bv", "bo"})
        w[k] = oracle::to_mat(p.at(std::string("adapter.") + k).value());
    const auto want = oracle::attention(oracle::to_mat(q), oracle::to_mat(kv), w, 2);
    for (Eigen::Index r = 0; r < 4; ++r)
        for (Eigen::Index c = 0; c < 8; ++c)
            CHECK(std::abs(got(r, c) - want[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)]) <= 1e-5);
}

TEST_CASE("training retrieval never returns the query itself") {
    const auto data = fixture::binary_keyword_dataset(40, 2);
    IbrClassifier m(small(), LabelSpace({"fallacious", "not_fallacious"}), 3);
    m.prepare(data.train, 3);
    const auto& a = data.train.arguments[0];
    const auto with = m.neighbors(a, nullptr);
    const auto without = m.neighbors(a, &a.id);
    REQUIRE_FALSE(with.neighbors.empty());
    CHECK(with.neighbors[0].id == a.id);
    for (const auto& n : without.neighbors) CHECK(n.id != a.id);
    ForwardContext ctx;
    ctx.exclude_id = &a.id;
    m.logits(a, ctx);
    CHECK(m.self_exclusions() == 1);
}

TEST_CASE("explanations list the retrieved neighbours") {
    const auto data = fixture::binary_keyword_dataset(40, 2);
    auto c = small();
    c.k_cases = 3;
    IbrClassifier m(c, LabelSpace({"fallacious", "not_fallacious"}), 3);
    m.prepare(data.train, 3);
    const auto e = m.explain(data.test.arguments[0]);
    CHECK(e.at("k") == 3);
    CHECK(e.at("neighbors").size() <= 3);
    for (const auto& n : e.at("neighbors")) {
        CHECK(n.contains("text"));
        CHECK(n.at("similarity").get<double>() >= 0.5);
    }
}

TEST_CASE("case base cache is reused") {
    const auto data = fixture::binary_keyword_dataset(40, 2);
    const auto dir = fixture::temp_dir("ibr-cache");
    IbrClassifier a(small(), LabelSpace({"fallacious", "not_fallacious"}), 3);
    a.set_cache_dir(dir);
    a.prepare(data.train, 3);
    std::size_t files = 0;
    for ([[maybe_unused]] const auto& f : std::filesystem::directory_iterator(dir)) ++files;
    CHECK(files == 2);
    IbrClassifier b(small(), LabelSpace({"fallacious", "not_fallacious"}), 4);
    b.set_cache_dir(dir);
    b.prepare(data.train, 4);
    CHECK(b.case_base().fingerprint() == a.case_base().fingerprint());
    CHECK(b.case_base().size() == a.case_base().size());
}

}

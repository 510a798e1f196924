#include <doctest.h>

#include "fallacy/errors.hpp"
#include "fallacy/model.hpp"
#include "support.hpp"

using namespace fallacy;

namespace {

BaselineConfig small() {
    BaselineConfig c;
    c.encoder.vocab_size = 128;
    c.encoder.hidden = 8;
    c.encoder.heads = 2;
    c.encoder.ffn = 16;
    c.encoder.max_len = 12;
    return c;
}

}  // namespace

TEST_SUITE("model") {

TEST_CASE("head gradient matches finite differences") {
    BaselineClassifier m(small(), LabelSpace({"a", "b", "c"}), 3);
    Argument x;
    x.id = "x";
    x.text = "a short sentence for the check";
    x.coarse_label = "b";
    std::vector<const Argument*> batch{&x};
    auto loss = [&] {
        ForwardContext ctx;
        return m.batch_loss(batch, Granularity::coarse, ctx);
    };
    m.params().zero_grad();
    nn::backward(loss());
    for (const char* name : {"head.w1", "head.w2", "encoder.ln0.g"}) {
        auto& p = m.params().at(name);
        const Eigen::MatrixXd g = p.grad();
        for (Eigen::Index k = 0; k < std::min<Eigen::Index>(p.value().size(), 40); ++k) {
            auto& v = p.mutable_value().reshaped()(k);
            const double keep = v, h = 1e-6;
            v = keep + h;
            const double up = loss().scalar();
            v = keep - h;
            const double down = loss().scalar();
            v = keep;
            const double fd = (up - down) / (2 * h);
            const double an = g.reshaped()(k);
            CHECK(std::abs(fd - an) <= 1e-4 * std::max({std::abs(fd), std::abs(an), 1e-2}));
        }
    }
}

TEST_CASE("equal logits give uniform probabilities; binary gives two") {
    BaselineClassifier m(small(), LabelSpace({"fallacious", "not_fallacious"}), 1);
    const auto p = m.probabilities(nn::constant(Eigen::MatrixXd::Constant(1, 2, 0.3)));
    REQUIRE(p.size() == 2);
    CHECK(p[0] == doctest::Approx(0.5));
    Argument a;
    a.text = "anything";
    CHECK(m.predict(a).probabilities.size() == 2);
}

TEST_CASE("encode_text prepends CLS and truncates") {
    HashingVocab v(64);
    const auto in = encoder::encode_text(v, "one two three four five six seven eight nine ten eleven twelve", 6);
    CHECK(in.ids.size() == 6);
    CHECK(in.ids[0] == HashingVocab::kCls);
    CHECK(v.id("<SEP>") == HashingVocab::kSep);
}

TEST_CASE("parameter json round trip and architecture mismatch") {
    BaselineClassifier a(small(), LabelSpace({"x", "y"}), 1), b(small(), LabelSpace({"x", "y"}), 2);
    CHECK(a.weight_hash() != b.weight_hash());
    params_from_json(b.params(), params_to_json(a.params()));
    CHECK(a.weight_hash() == b.weight_hash());
    auto j = params_to_json(a.params());
    j.erase("head.w2");
    try {
        params_from_json(b.params(), j);
        FAIL("expected ArchitectureMismatch");
    } catch (const ArchitectureMismatch& e) {
        CHECK(std::string(e.what()).find("head.w2") != std::string::npos);
    }
}

TEST_CASE("checkpoint save and load") {
    BaselineClassifier a(small(), LabelSpace({"x", "y"}), 1);
    Checkpoint ck;
    ck.method = a.method();
    ck.labels = a.labels();
    ck.config = a.config_json();
    ck.params = params_to_json(a.params());
    const auto p = fixture::temp_dir("model-ck") / "m.json";
    ck.save(p);
    const auto back = Checkpoint::load(p);
    CHECK(back.labels == ck.labels);
    CHECK(back.fingerprint() == ck.fingerprint());
}

TEST_CASE("inverse frequency weights have mean one") {
    DatasetSplit s;
    s.label_space = Granularity::binary;
    for (int i = 0; i < 30; ++i) {
        Argument a;
        a.binary_label = std::string(i < 10 ? kFallacious : kNotFallacious);
        s.arguments.push_back(a);
    }
    const auto w = inverse_frequency_weights(s, LabelSpace({"fallacious", "not_fallacious"}));
    CHECK(w[0] == doctest::Approx(4.0 / 3.0));
    CHECK(w[1] == doctest::Approx(2.0 / 3.0));
}

TEST_CASE("adam lowers the loss on a separable toy set") {
    BaselineConfig c = small();
    c.encoder.dropout = 0;
    BaselineClassifier m(c, LabelSpace({"fallacious", "not_fallacious"}), 4);
    const auto data = fixture::binary_keyword_dataset(40, 1);
    std::vector<const Argument*> batch;
    for (const auto& a : data.train.arguments) batch.push_back(&a);
    nn::Adam opt({1e-2});
    ForwardContext ctx;
    const double first = m.batch_loss(batch, Granularity::binary, ctx).scalar();
    for (int s = 0; s < 30; ++s) {
        nn::backward(m.batch_loss(batch, Granularity::binary, ctx));
        opt.step(m.params());
    }
    CHECK(m.batch_loss(batch, Granularity::binary, ctx).scalar() < first * 0.5);
}

}

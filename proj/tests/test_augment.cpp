#include <doctest.h>

#include "fallacy/augment.hpp"
#include "fallacy/errors.hpp"
#include "support.hpp"

using namespace fallacy;

namespace {

std::shared_ptr<WordVectors> news_vectors() {
    auto v = std::make_shared<WordVectors>();
    auto vec = [](std::initializer_list<double> xs) {
        Eigen::VectorXd out(static_cast<Eigen::Index>(xs.size()));
        Eigen::Index i = 0;
        for (double x : xs) out(i++) = x;
        return out;
    };
    v->add("news", vec({1.0, 0.0, 0.05, 0.0}));
    v->add("data", vec({0.97, 0.05, 0.0, 0.05}));
    v->add("information", vec({0.95, 0.0, 0.1, 0.0}));
    v->add("fake", vec({0.0, 1.0, 0.0, 0.1}));
    v->add("false", vec({0.05, 0.97, 0.0, 0.1}));
    v->add("much", vec({0.0, 0.0, 1.0, 0.0}));
    v->add("banana", vec({0.0, 0.0, 0.0, 1.0}));
    return v;
}

class Echo : public Translator {
public:
    std::string translate(const std::string& text, const std::string&, const std::string& to) const override {
        if (to != "en") return text;
        std::string out = text;
        if (auto p = out.find("news"); p != std::string::npos) out.replace(p, 4, "reports");
        return out;
    }
};

}  // namespace

TEST_SUITE("augment") {

TEST_CASE("config validation") {
    AugmentationConfig c;
    CHECK_NOTHROW(c.validate());
    c.max_replacements_per_argument = 0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = {};
    c.similarity_threshold = 0.95;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    const auto j = nlohmann::json{{"strategy", "lexical_synonym"}, {"class_quota", 2000}};
    const auto parsed = AugmentationConfig::from_json(j);
    CHECK(parsed.strategy == AugmentStrategy::lexical_synonym);
    CHECK(parsed.class_quota.at("*") == 2000);
}

TEST_CASE("missing resources raise StrategyUnavailable") {
    AugmentationConfig c;
    CHECK_THROWS_AS(make_strategy(c, {}), StrategyUnavailable);
    c.strategy = AugmentStrategy::backtranslation;
    CHECK_THROWS_AS(make_strategy(c, {}), StrategyUnavailable);
}

TEST_CASE("ress rewrites at most three content tokens") {
    AugmentResources r;
    r.vectors = news_vectors();
    AugmentationConfig c;
    const auto s = make_strategy(c, r);
    Argument a;
    a.id = "n1";
    a.text = "The news is fake because so much of the news is fake.";
    a.coarse_label = "Fallacy of Presumption";
    bool changed = false;
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
        const auto out = augment_argument(a, c, *s, seed);
        if (out.empty()) continue;
        changed = true;
        const auto x = token_strings(a.text), y = token_strings(out[0].text);
        REQUIRE(x.size() == y.size());
        int diff = 0;
        for (std::size_t i = 0; i < x.size(); ++i) {
            if (x[i] == y[i]) continue;
            ++diff;
            CHECK_FALSE(is_stopword(x[i]));
        }
        CHECK(diff <= 3);
        CHECK(out[0].source == Source::synthetic);
        CHECK(out[0].coarse_label == a.coarse_label);
    }
    CHECK(changed);
}

TEST_CASE("nothing above the threshold gives no variant") {
    AugmentResources r;
    r.vectors = news_vectors();
    AugmentationConfig c;
    Argument a;
    a.id = "b";
    a.text = "banana much";
    CHECK(augment_argument(a, c, *make_strategy(c, r), 1).empty());
}

TEST_CASE("lexical synonyms and back-translation") {
    auto syn = std::make_shared<SynonymTable>();
    syn->add("fake", {"false", "two words"});
    AugmentResources r;
    r.synonyms = syn;
    AugmentationConfig c;
    c.strategy = AugmentStrategy::lexical_synonym;
    Argument a;
    a.id = "x";
    a.text = "Fake news";
    const auto out = augment_argument(a, c, *make_strategy(c, r), 4);
    REQUIRE(out.size() == 1);
    CHECK(out[0].text == "False news");

    r.translator = std::make_shared<Echo>();
    c.strategy = AugmentStrategy::backtranslation;
    const auto bt = augment_argument(a, c, *make_strategy(c, r), 4);
    REQUIRE(bt.size() == 1);
    CHECK(bt[0].text == "Fake reports");
}

TEST_CASE("quota fill tops classes up and leaves large ones") {
    AugmentResources r;
    r.vectors = news_vectors();
    AugmentationConfig c;
    c.class_quota["*"] = 60;
    DatasetSplit train;
    train.name = "train";
    train.label_space = Granularity::coarse;
    for (int i = 0; i < 80; ++i) {
        Argument a;
        a.id = "big" + std::to_string(i);
        a.text = "news is fake";
        a.coarse_label = "Fallacy of Relevance";
        train.arguments.push_back(a);
    }
    for (int i = 0; i < 7; ++i) {
        Argument a;
        a.id = "small" + std::to_string(i);
        a.text = "so much fake news";
        a.coarse_label = "Fallacy of Ambiguity";
        train.arguments.push_back(a);
    }
    ProvenanceLog log;
    const auto out = augment_to_quota(train, c, *make_strategy(c, r), 3, &log);
    const auto counts = out.class_counts();
    CHECK(counts.at("Fallacy of Relevance") == 80);
    CHECK(counts.at("Fallacy of Ambiguity") == 60);
    std::size_t synthetic = 0;
    for (const auto& a : out.arguments)
        if (a.parent_id) {
            ++synthetic;
            CHECK(a.parent_id->rfind("small", 0) == 0);
        }
    CHECK(synthetic == 53);
    CHECK(log.count("augment") == 53);

    DatasetSplit dev = train;
    dev.name = "dev";
    CHECK_THROWS(augment_to_quota(dev, c, *make_strategy(c, r), 3));

    c.class_quota = {{"Fallacy of Presumption", 10}};
    CHECK_THROWS_AS(augment_to_quota(train, c, *make_strategy(c, r), 3), EmptyClass);

    DatasetSplit stuck = train;
    for (auto& a : stuck.arguments) a.text = "banana";
    c.class_quota = {{"*", 100}};
    CHECK_THROWS_AS(augment_to_quota(stuck, c, *make_strategy(c, r), 3), QuotaUnreachable);
}

}

#include <doctest.h>

#include "fallacy/curriculum.hpp"
#include "fallacy/errors.hpp"
#include "fallacy/training.hpp"
#include "support.hpp"

using namespace fallacy;

namespace {

BaselineConfig small() {
    BaselineConfig c;
    c.encoder.vocab_size = 256;
    c.encoder.hidden = 8;
    c.encoder.heads = 2;
    c.encoder.ffn = 16;
    c.encoder.max_len = 16;
    c.encoder.dropout = 0;
    return c;
}

ModelFactory factory() {
    return [](const LabelSpace& l, std::uint64_t s) {
        return std::unique_ptr<Classifier>(std::make_unique<BaselineClassifier>(small(), l, s));
    };
}

const FallacyTaxonomy& tax() {
    static const auto t = FallacyTaxonomy::builtin();
    return t;
}

std::map<Granularity, SplitSet> three_tasks() {
    const auto coarse = tax().coarse_experiment_classes();
    std::vector<std::string> fine, fine_kw;
    for (const auto& f : tax().fine_experiment_classes()) {
        fine.push_back(f);
        fine_kw.push_back("kw" + std::to_string(fine_kw.size()));
    }
    return {{Granularity::binary, fixture::binary_keyword_dataset(40, 1)},
            {Granularity::coarse,
             fixture::keyword_dataset(Granularity::coarse, coarse, {"k1", "k2", "k3", "k4"}, 10, 2)},
            {Granularity::fine, fixture::keyword_dataset(Granularity::fine, fine, fine_kw, 10, 3)}};
}

}  // namespace

TEST_SUITE("curriculum") {

TEST_CASE("plan construction and validation") {
    const auto f = CurriculumPlan::make(CurriculumVariant::fcl);
    CHECK(f.stage_order == std::vector<Granularity>{Granularity::binary, Granularity::coarse, Granularity::fine});
    CHECK(f.epochs_per_stage == std::vector<int>{5, 8, 10});
    const auto r = CurriculumPlan::make(CurriculumVariant::rcl);
    CHECK(r.stage_order.front() == Granularity::fine);
    const auto n = CurriculumPlan::make(CurriculumVariant::none, Granularity::coarse);
    CHECK(n.stage_order == std::vector<Granularity>{Granularity::coarse});
    auto bad = f;
    bad.stage_order = {Granularity::coarse, Granularity::binary};
    bad.epochs_per_stage = {1, 1};
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    CHECK(CurriculumPlan::from_json(f.to_json()).stage_order == f.stage_order);
    CHECK(stage_seed(1, 0) != stage_seed(1, 1));
}

TEST_CASE("weight transfer") {
    BaselineClassifier fine(small(), tax().label_space(Granularity::fine), 1);
    const auto ck = make_checkpoint(fine, Granularity::fine);
    const auto same = transfer_weights(ck, fine.labels(), factory(), 9);
    CHECK(same->weight_hash() == fine.weight_hash());
    const auto coarse = transfer_weights(ck, tax().label_space(Granularity::coarse), factory(), 9);
    CHECK(coarse->encoder_hash() == fine.encoder_hash());
    CHECK(coarse->params().at("head.w2").cols() == 4);
    auto broken = ck;
    broken.params.erase("encoder.tok_emb");
    try {
        transfer_weights(broken, tax().label_space(Granularity::coarse), factory(), 9);
        FAIL("expected ArchitectureMismatch");
    } catch (const ArchitectureMismatch& e) {
        CHECK(std::string(e.what()).find("encoder.tok_emb") != std::string::npos);
    }
}

TEST_CASE("forward plan records lineage binary -> coarse -> fine") {
    auto plan = CurriculumPlan::make(CurriculumVariant::fcl);
    plan.epochs_per_stage = {1, 1, 1};
    plan.learning_rate = 1e-2;
    plan.batch_size = 8;
    const auto dir = fixture::temp_dir("curriculum-fcl");
    const auto res = run_plan(plan, three_tasks(), factory(), 4, dir);
    REQUIRE(res.stages.size() == 3);
    CHECK(res.lineage_intact());
    CHECK(res.stages[1].inherited_encoder_hash == res.stages[0].best_encoder_hash);
    CHECK(res.stages[2].start_encoder_hash == res.stages[1].best_encoder_hash);
    const auto lin = res.lineage();
    CHECK(lin.dump().find("coarse") != std::string::npos);
    CHECK(std::filesystem::exists(dir / "lineage.json"));
}

TEST_CASE("missing stage data") {
    auto data = three_tasks();
    data.erase(Granularity::coarse);
    auto plan = CurriculumPlan::make(CurriculumVariant::fcl);
    CHECK_THROWS_AS(run_plan(plan, data, factory(), 1, fixture::temp_dir("curriculum-missing")), MissingStageData);
}

TEST_CASE("single-stage plan equals a plain training run") {
    auto plan = CurriculumPlan::make(CurriculumVariant::none, Granularity::binary);
    plan.epochs_per_stage = {2};
    plan.learning_rate = 1e-2;
    plan.batch_size = 8;
    const auto data = three_tasks();
    const auto res = run_plan(plan, data, factory(), 6, fixture::temp_dir("curriculum-none"));
    auto model = factory()(tax().label_space(Granularity::binary), stage_seed(6, 0));
    const auto st = train_stage(*model, data.at(Granularity::binary), Granularity::binary, plan.stage_options(0, 6),
                                "data", 6);
    CHECK(st.best_encoder_hash == res.stages[0].best_encoder_hash);
}

TEST_CASE("zero-shot evaluation leaves weights untouched") {
    BaselineClassifier m(small(), tax().label_space(Granularity::binary), 2);
    const auto target = fixture::binary_keyword_dataset(30, 8).train;
    const auto before = m.weight_hash();
    const auto r = zero_shot_eval(m, target, Granularity::binary, "climate");
    CHECK(m.weight_hash() == before);
    CHECK(r.out_of_domain);
    DatasetSplit other = target;
    other.label_space = Granularity::coarse;
    for (auto& a : other.arguments) a.coarse_label = "Fallacy of Relevance";
    CHECK_THROWS_AS(zero_shot_eval(m, other, Granularity::coarse, "climate"), LabelSpaceMismatch);
}

TEST_CASE("training restores the best dev checkpoint") {
    BaselineClassifier m(small(), tax().label_space(Granularity::binary), 3);
    TrainOptions o;
    o.epochs = 4;
    o.learning_rate = 1e-2;
    o.batch_size = 8;
    const auto data = fixture::binary_keyword_dataset(60, 3);
    const auto r = train_classifier(m, data, Granularity::binary, o);
    CHECK(r.history.size() == 4);
    CHECK(m.encoder_hash() == r.best_encoder_hash);
    CHECK(evaluate_split(m, data.dev, Granularity::binary).metrics.f1 == doctest::Approx(r.best_dev.f1));
    o.epochs = 0;
    CHECK_THROWS_AS(o.validate(), ConfigError);
}

}

#include <doctest.h>

#include "fallacy/errors.hpp"
#include "fallacy/evalreport.hpp"
#include "support.hpp"

using namespace fallacy;

TEST_SUITE("evalreport") {

TEST_CASE("worked example and perfect predictions") {
    const auto m = weighted_metrics({"A", "A", "B", "B"}, {"A", "B", "B", "B"});
    CHECK(m.accuracy == doctest::Approx(0.75));
    CHECK(m.f1 == doctest::Approx(0.5 * 2.0 / 3.0 + 0.5 * 0.8));
    const auto p = weighted_metrics({"A", "B", "C"}, {"A", "B", "C"});
    CHECK(p.f1 == 1.0);
    CHECK(p.precision == 1.0);
    CHECK(weighted_metrics({"A", "A"}, {"A", "A"}).f1 == 1.0);
}

TEST_CASE("matches the confusion-matrix oracle") {
    std::mt19937_64 rng(4);
    for (int t = 0; t < 200; ++t) {
        std::vector<std::string> g, p;
        for (int i = 0; i < 25; ++i) {
            g.push_back(std::string(1, static_cast<char>('A' + rng() % 4)));
            p.push_back(std::string(1, static_cast<char>('A' + rng() % 4)));
        }
        const auto got = weighted_metrics(g, p);
        const auto want = oracle::weighted(g, p);
        CHECK(std::abs(got.f1 - want.f1) <= 1e-12);
        CHECK(std::abs(got.precision - want.precision) <= 1e-12);
        CHECK(std::abs(got.recall - want.recall) <= 1e-12);
    }
}

TEST_CASE("input errors") {
    CHECK_THROWS_AS(weighted_metrics({"A"}, {"A", "B"}), LengthMismatch);
    CHECK_THROWS_AS(weighted_metrics({}, {}), LengthMismatch);
    CHECK_THROWS_AS(weighted_metrics({"A"}, {"Z"}, LabelSpace({"A", "B"})), UnknownLabel);
}

TEST_CASE("aggregation over seeds") {
    std::vector<EvalReport> runs;
    for (double f : {0.60, 0.62, 0.61}) {
        auto r = make_report(Granularity::coarse, "d", "ibr", LabelSpace({"A", "B"}), {"A"}, {"A"}, 1);
        r.runs[0].metrics.f1 = f;
        runs.push_back(r);
    }
    const auto agg = aggregate_runs(runs);
    CHECK(agg.mean.f1 == doctest::Approx(0.61));
    CHECK(agg.stddev.f1 == doctest::Approx(0.01));
    CHECK(aggregate_runs({runs[0]}).stddev.f1 == 0.0);
    runs[1].dataset = "other";
    CHECK_THROWS_AS(aggregate_runs(runs), HeterogeneousReports);
}

TEST_CASE("report json round trip and renderers") {
    auto r = make_report(Granularity::binary, "bench", "pbr", LabelSpace({"fallacious", "not_fallacious"}),
                         {"fallacious", "not_fallacious"}, {"fallacious", "fallacious"}, 7,
                         {{"fallacious", 10}, {"not_fallacious", 12}});
    const auto back = EvalReport::from_json(r.to_json());
    CHECK(back.mean.f1 == doctest::Approx(r.mean.f1));
    CHECK(back.per_class.size() == 2);
    CHECK(back.per_class[0].train_count == 10);
    CHECK(render_main_table({r}).find("pbr") != std::string::npos);
    CHECK(render_csv({r}).find("bench") != std::string::npos);
    CHECK(render_per_class_table(r).find("not_fallacious") != std::string::npos);
}

TEST_CASE("baselines") {
    std::vector<std::string> train(90, "A");
    train.resize(100, "B");
    const auto arg = frequency_baseline(train, 50, 1, FrequencyMode::argmax);
    CHECK(std::count(arg.begin(), arg.end(), "A") == 50);
    const auto smp = frequency_baseline(train, 2000, 1);
    const auto a = std::count(smp.begin(), smp.end(), "A");
    CHECK(a > 1700);
    CHECK(a < 1900);
    CHECK(frequency_baseline(train, 20, 3) == frequency_baseline(train, 20, 3));
    const auto rnd = random_baseline(LabelSpace({"x", "y", "z"}), 30, 2);
    CHECK(rnd.size() == 30);
}

}

#include <doctest.h>

#include <fstream>
#include <sstream>

#include "fallacy/errors.hpp"
#include "fallacy/taxonomy.hpp"
#include "fallacy/text.hpp"

using namespace fallacy;

TEST_SUITE("taxonomy") {

TEST_CASE("fine classes map to their coarse parent") {
    const auto t = FallacyTaxonomy::builtin();
    CHECK(t.map_fine_to_coarse("Ad Hominem") == "Fallacy of Relevance");
    CHECK(t.map_fine_to_coarse("Equivocation") == "Fallacy of Ambiguity");
    CHECK(t.canonical_fine("circular reasoning") == "Circular Reasoning");
    CHECK_THROWS_AS(t.map_fine_to_coarse("Slippery Slope"), UnknownClass);
    CHECK_THROWS_AS(t.map_fine_to_coarse("Intentional"), ExcludedClass);
    CHECK(t.parent_of("Intentional") == "Fallacy of Relevance");
}

TEST_CASE("coarse classes are alphabetical and index round-trips") {
    const auto t = FallacyTaxonomy::builtin();
    const std::vector<std::string> want{"Fallacy of Ambiguity", "Fallacy of Defective Induction",
                                        "Fallacy of Presumption", "Fallacy of Relevance"};
    CHECK(t.coarse_experiment_classes() == want);
    const auto space = t.label_space(Granularity::coarse);
    CHECK(space.index("Fallacy of Ambiguity") == 0);
    for (std::size_t i = 0; i < space.size(); ++i) CHECK(space.index(space.name(i)) == i);
    CHECK_THROWS_AS(space.index("nope"), UnknownLabel);
}

TEST_CASE("binary and fine label spaces") {
    const auto t = FallacyTaxonomy::builtin();
    CHECK(t.label_space(Granularity::binary).size() == 2);
    CHECK(t.label_space(Granularity::fine).size() == 13);
    CHECK(t.coarse_excluded_fine_classes().size() == 3);
}

TEST_CASE("shipped data files agree with the built-in tables") {
    const auto file = FallacyTaxonomy::load(FALLACY_DATA_DIR "/taxonomy.tsv");
    const auto builtin = FallacyTaxonomy::builtin();
    CHECK(file.coarse_experiment_classes() == builtin.coarse_experiment_classes());
    CHECK(file.fine_experiment_classes() == builtin.fine_experiment_classes());
    for (const auto& f : builtin.fine_classes()) {
        CHECK(file.parent_of(f.name) == builtin.parent_of(f.name));
        CHECK(file.excluded_from_coarse(f.name) == builtin.excluded_from_coarse(f.name));
    }
    const auto words = load_stopwords(FALLACY_DATA_DIR "/stopwords.txt");
    CHECK(words == stopwords());
}

TEST_CASE("malformed taxonomy is rejected") {
    std::istringstream in("fine_name\tcoarse_name\tincluded\tcoarse_experiment\nAd Hominem\n");
    CHECK_THROWS(FallacyTaxonomy::parse(in));
}

}

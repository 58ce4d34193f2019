#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "oracles.hpp"
#include "spanfact/corpus.hpp"
#include "spanfact/metrics.hpp"
#include "spanfact/synth.hpp"

using namespace spanfact;

namespace {

std::vector<std::string> random_tokens(std::mt19937_64& rng, std::size_t max_len) {
    static const std::vector<std::string> pool = {"a", "b", "c", "d", "e"};
    std::uniform_int_distribution<std::size_t> len(0, max_len);
    std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
    std::vector<std::string> out(len(rng));
    for (auto& t : out) t = pool[pick(rng)];
    return out;
}

}  // namespace

TEST_CASE("unigram rouge with clipping") {
    RougeScore s = rouge_n({"a", "b", "a"}, {"a", "a", "c"}, 1);
    CHECK(s.precision == doctest::Approx(2.0 / 3).epsilon(1e-12));
    CHECK(s.recall == doctest::Approx(2.0 / 3).epsilon(1e-12));
    CHECK(s.f1 == doctest::Approx(2.0 / 3).epsilon(1e-12));
}

TEST_CASE("bigram rouge") {
    RougeScore s = rouge_n({"a", "b", "c"}, {"a", "b", "d"}, 2);
    CHECK(s.precision == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(s.recall == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(s.f1 == doctest::Approx(0.5).epsilon(1e-12));
    CHECK_THROWS_AS(rouge_n({"a"}, {"a"}, 3), std::invalid_argument);
}

TEST_CASE("rouge edge cases") {
    const std::vector<std::string> x = {"a", "b", "c"};
    for (int n : {1, 2}) {
        RougeScore same = rouge_n(x, x, n);
        CHECK(same.f1 == doctest::Approx(1.0));
        RougeScore none = rouge_n(x, {"q", "r", "s"}, n);
        CHECK(none.f1 == 0.0);
        RougeScore empty = rouge_n({}, x, n);
        CHECK(empty.precision == 0.0);
        CHECK(empty.recall == 0.0);
        CHECK(empty.f1 == 0.0);
    }
    CHECK(rouge_l(x, x).f1 == doctest::Approx(1.0));
    CHECK(rouge_l({}, x).f1 == 0.0);
}

TEST_CASE("rouge-l uses the longest common subsequence") {
    RougeScore s = rouge_l({"a", "b", "c", "d"}, {"a", "c", "b", "d"});
    CHECK(s.precision == doctest::Approx(0.75).epsilon(1e-12));
    CHECK(s.recall == doctest::Approx(0.75).epsilon(1e-12));
    CHECK(s.f1 == doctest::Approx(0.75).epsilon(1e-12));
}

TEST_CASE("rouge agrees with the quadratic oracles on random inputs") {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 100; ++trial) {
        auto cand = random_tokens(rng, 8);
        auto ref = random_tokens(rng, 8);
        for (int n : {1, 2}) {
            RougeScore got = rouge_n(cand, ref, n);
            oracles::Prf expect = oracles::rouge_n(cand, ref, n);
            CHECK(std::fabs(got.precision - expect.p) <= 1e-12);
            CHECK(std::fabs(got.recall - expect.r) <= 1e-12);
            CHECK(std::fabs(got.f1 - expect.f1) <= 1e-12);
        }
        RougeScore got_l = rouge_l(cand, ref);
        oracles::Prf expect_l = oracles::rouge_l(cand, ref);
        CHECK(std::fabs(got_l.f1 - expect_l.f1) <= 1e-12);
        // f1 is the harmonic mean whenever p + r > 0
        if (got_l.precision + got_l.recall > 0.0) {
            const double hm = 2.0 * got_l.precision * got_l.recall /
                              (got_l.precision + got_l.recall);
            CHECK(got_l.f1 == doctest::Approx(hm).epsilon(1e-12));
        }
    }
}

TEST_CASE("token f1") {
    CHECK(token_f1("8 killed", "8 injured") == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(token_f1("", "") == 1.0);
    CHECK(token_f1("words here", "") == 0.0);
    CHECK(token_f1("", "words here") == 0.0);
    CHECK(token_f1("The storm.", "the storm") == doctest::Approx(1.0));  // case + punct
    CHECK(token_f1("a b", "c d") == 0.0);
    // symmetric
    CHECK(token_f1("8 killed in boston", "boston 8") ==
          doctest::Approx(token_f1("boston 8", "8 killed in boston")).epsilon(1e-12));
}

TEST_CASE("entity precision counts verbatim source support") {
    std::vector<std::string> texts = {"the storm killed 8 people in boston .",
                                      "9 died in boston .", "nothing to see ."};
    Vocabulary vocab = build_vocab(texts, 1);
    RuleTagger tagger{std::unordered_set<std::string>{"boston"}};
    TokenizedText source = tokenize(texts[0], vocab);
    CHECK(entity_precision(tokenize(texts[1], vocab), source, tagger) ==
          doctest::Approx(0.5).epsilon(1e-12));  // "9" unsupported, "boston" supported
    CHECK(entity_precision(tokenize(texts[0], vocab), source, tagger) == doctest::Approx(1.0));
    CHECK(entity_precision(tokenize(texts[2], vocab), source, tagger) == 1.0);  // no entities
}

TEST_CASE("out-of-source corruption lowers entity precision") {
    std::vector<std::string> texts = {"the storm killed 8 people in boston .",
                                      "a quake hurt 30 people in denver ."};
    Vocabulary vocab = build_vocab(texts, 1);
    RuleTagger tagger{std::unordered_set<std::string>{"boston", "denver"}};
    TokenizedText source = tokenize(texts[0], vocab);
    TokenizedText summary = tokenize(texts[0], vocab);
    // the source offers no same-kind alternatives, so the global pool is used
    EntityPool pool;
    for (const auto& e : tagger.tag(tokenize(texts[1], vocab))) pool.add(e);
    CHECK(entity_precision(summary, source, tagger) == doctest::Approx(1.0));
    CorruptionResult cr = corrupt_summary(source, summary, 1.0, 7, tagger, &pool);
    REQUIRE(cr.records.size() == 2);
    for (const auto& r : cr.records) CHECK(!r.skipped);
    CHECK(cr.corrupted_raw == "the storm killed 30 people in denver .");
    CHECK(entity_precision(tokenize(cr.corrupted_raw, vocab), source, tagger) == 0.0);
}

TEST_CASE("restoration accounting") {
    auto make_log = [](std::string doc, std::vector<CorruptionRecord> recs) {
        DocCorruptionLog log;
        log.doc_id = std::move(doc);
        log.records = std::move(recs);
        return log;
    };

    SUBCASE("perfect restoration") {
        DocEntityOutcomes outcomes;
        outcomes["d1"] = {{"30", "8"}, {"boston", "boston"}};
        std::vector<DocCorruptionLog> logs = {make_log("d1", {{0, "8", "30", false}})};
        RestorationResult r = restoration_rate(outcomes, logs);
        CHECK(r.corrupted == 1);
        CHECK(r.restored == 1);
        CHECK(r.uncorrupted == 1);
        CHECK(r.false_changes == 0);
        CHECK(r.restoration_rate == doctest::Approx(1.0));
        CHECK(r.false_change_rate == 0.0);
    }
    SUBCASE("identity output restores nothing but never falsely changes") {
        DocEntityOutcomes outcomes;
        outcomes["d1"] = {{"30", "30"}, {"boston", "boston"}};
        std::vector<DocCorruptionLog> logs = {make_log("d1", {{0, "8", "30", false}})};
        RestorationResult r = restoration_rate(outcomes, logs);
        CHECK(r.restored == 0);
        CHECK(r.restoration_rate == 0.0);
        CHECK(r.false_changes == 0);
    }
    SUBCASE("editing an uncorrupted entity is a false change") {
        DocEntityOutcomes outcomes;
        outcomes["d1"] = {{"8", "12"}};
        RestorationResult r = restoration_rate(outcomes, {make_log("d1", {})});
        CHECK(r.corrupted == 0);
        CHECK(r.uncorrupted == 1);
        CHECK(r.false_changes == 1);
        CHECK(r.false_change_rate == doctest::Approx(1.0));
    }
    SUBCASE("skipped corruption records count as uncorrupted") {
        DocEntityOutcomes outcomes;
        outcomes["d1"] = {{"8", "8"}};
        std::vector<DocCorruptionLog> logs = {make_log("d1", {{0, "8", "8", true}})};
        RestorationResult r = restoration_rate(outcomes, logs);
        CHECK(r.corrupted == 0);
        CHECK(r.uncorrupted == 1);
    }
    SUBCASE("surface comparison is normalized") {
        DocEntityOutcomes outcomes;
        outcomes["d1"] = {{"30", "New  York"}};
        std::vector<DocCorruptionLog> logs = {make_log("d1", {{0, "new york", "30", false}})};
        RestorationResult r = restoration_rate(outcomes, logs);
        CHECK(r.restored == 1);
    }
    SUBCASE("unknown doc ids are rejected") {
        DocEntityOutcomes outcomes;
        outcomes["d1"] = {{"8", "8"}};
        std::vector<DocCorruptionLog> logs = {make_log("d2", {{0, "8", "30", false}})};
        CHECK_THROWS_AS(restoration_rate(outcomes, logs), std::runtime_error);
    }
    SUBCASE("out-of-range positions are rejected") {
        DocEntityOutcomes outcomes;
        outcomes["d1"] = {{"8", "8"}};
        std::vector<DocCorruptionLog> logs = {make_log("d1", {{4, "8", "30", false}})};
        CHECK_THROWS_AS(restoration_rate(outcomes, logs), std::runtime_error);
    }
}

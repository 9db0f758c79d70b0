#include <gtest/gtest.h>

#include <algorithm>
#include <fstream>
#include <sstream>

#include <verifai/scifact.hpp>

#include "test_support.hpp"

using namespace verifai;
using namespace verifai::scifact;
using verifai::testing::ScriptedNli;

namespace {

std::vector<RawClaimEntry> fixture() {
    std::ifstream in(verifai::testing::fixtures_dir() / "scifact_raw.jsonl");
    return read_raw_entries(in);
}

std::vector<RawClaimEntry> as_raw(const std::vector<NliExample>& xs) {
    std::vector<RawClaimEntry> out;
    for (const auto& x : xs) out.push_back({x.claim, x.label, {x.doc}});
    return out;
}

// Example whose title tells the scripted classifier what to predict.
NliExample scripted(NliValue gold, NliValue predicted, int n) {
    return {"claim " + std::to_string(n), {"d" + std::to_string(n), std::string(to_string(predicted)), "x"}, gold};
}

}  // namespace

TEST(SciFact, MultiCitationSplitsIntoOnePerReference) {
    RawClaimEntry e{"No evidence claim.", NliValue::NoEvidence, {{"a", "t", "x"}, {"b", "t", "x"}, {"c", "t", "x"}}};
    auto r = clean(std::vector<RawClaimEntry>{e});
    ASSERT_EQ(r.examples.size(), 3u);
    EXPECT_EQ(r.examples[2].doc.doc_id, "c");
}

TEST(SciFact, IdenticalEntriesDeduplicate) {
    RawClaimEntry e{"C.", NliValue::Support, {{"a", "t", "x"}}};
    auto r = clean(std::vector<RawClaimEntry>{e, e});
    EXPECT_EQ(r.examples.size(), 1u);
    EXPECT_EQ(r.duplicates_removed, 1u);
}

TEST(SciFact, CleanFixtureMatchesHandCount) {
    auto raw = fixture();
    ASSERT_EQ(raw.size(), 10u);
    auto r = clean(raw);
    // Hand count: A/d1 S, B/d2..d4 N, C/d5 C, E/d6,d7 S, A/d1 C, F/d8 N.
    EXPECT_EQ(r.examples.size(), 9u);
    EXPECT_EQ(r.dropped_no_citation, 1u);
    EXPECT_EQ(r.duplicates_removed, 4u);
    auto counts = count_labels(r.examples);
    EXPECT_EQ(counts[label_index(NliValue::NoEvidence)], 4u);
    EXPECT_EQ(counts[label_index(NliValue::Support)], 3u);
    EXPECT_EQ(counts[label_index(NliValue::Contradict)], 2u);
    std::vector<std::string> ids;
    for (const auto& x : r.examples) ids.push_back(x.doc.doc_id);
    EXPECT_EQ(ids, (std::vector<std::string>{"d1", "d2", "d3", "d4", "d5", "d6", "d7", "d1", "d8"}));
}

TEST(SciFact, CleanIsIdempotent) {
    auto once = clean(fixture()).examples;
    auto twice = clean(as_raw(once));
    EXPECT_EQ(twice.examples, once);
    EXPECT_EQ(twice.duplicates_removed, 0u);
}

TEST(SciFact, ExampleJsonRoundTrip) {
    auto xs = clean(fixture()).examples;
    std::stringstream ss;
    write_examples(ss, xs);
    EXPECT_EQ(read_examples(ss), xs);
}

TEST(SciFact, SplitPartitionsWithStratifiedRatios) {
    std::vector<NliExample> xs;
    const std::size_t per_label[3] = {36, 42, 22};
    int n = 0;
    for (std::size_t l = 0; l < 3; ++l)
        for (std::size_t i = 0; i < per_label[l]; ++i) xs.push_back({"c" + std::to_string(n++), {"d", "t", "a"}, kLabels[l]});
    std::mt19937_64 rng(5);
    std::shuffle(xs.begin(), xs.end(), rng);

    auto s = split_examples(xs, 77);
    EXPECT_EQ(s.train.size(), 80u);
    EXPECT_EQ(s.validation.size(), 10u);
    EXPECT_EQ(s.test.size(), 10u);

    std::vector<std::string> all;
    for (const auto* part : {&s.train, &s.validation, &s.test})
        for (const auto& x : *part) all.push_back(x.claim);
    std::sort(all.begin(), all.end());
    EXPECT_EQ(std::adjacent_find(all.begin(), all.end()), all.end());
    EXPECT_EQ(all.size(), xs.size());

    for (const auto* part : {&s.train, &s.validation, &s.test}) {
        auto c = count_labels(*part);
        for (std::size_t l = 0; l < 3; ++l) {
            double expect = static_cast<double>(per_label[l]) * part->size() / xs.size();
            EXPECT_LE(std::abs(static_cast<double>(c[l]) - expect), 1.0) << "label " << l;
        }
    }
    auto again = split_examples(xs, 77);
    EXPECT_EQ(again.test, s.test);
}

TEST(SciFact, HandComputedConfusionMatrix) {
    using V = NliValue;
    // gold NE: 2 NE, 1 S; gold S: 3 S, 1 C; gold C: 1 S, 1 C.
    std::vector<NliExample> xs = {scripted(V::NoEvidence, V::NoEvidence, 1), scripted(V::NoEvidence, V::NoEvidence, 2),
                                  scripted(V::NoEvidence, V::Support, 3),    scripted(V::Support, V::Support, 4),
                                  scripted(V::Support, V::Support, 5),       scripted(V::Support, V::Support, 6),
                                  scripted(V::Support, V::Contradict, 7),    scripted(V::Contradict, V::Support, 8),
                                  scripted(V::Contradict, V::Contradict, 9)};
    ScriptedNli nli;
    auto m = evaluate_nli(nli, xs);
    EXPECT_EQ(nli.calls.load(), 9u);
    EXPECT_EQ(m.total, 9u);
    Confusion want = {{{2, 1, 0}, {0, 3, 1}, {0, 1, 1}}};
    EXPECT_EQ(m.confusion, want);

    const double eps = 1e-12;
    EXPECT_NEAR(m.accuracy, 6.0 / 9, eps);
    EXPECT_NEAR(m.per_label[0].precision, 1.0, eps);
    EXPECT_NEAR(m.per_label[0].recall, 2.0 / 3, eps);
    EXPECT_NEAR(m.per_label[0].f1, 0.8, eps);
    EXPECT_NEAR(m.per_label[1].precision, 0.6, eps);
    EXPECT_NEAR(m.per_label[1].recall, 0.75, eps);
    EXPECT_NEAR(m.per_label[1].f1, 2.0 / 3, eps);
    EXPECT_NEAR(m.per_label[2].precision, 0.5, eps);
    EXPECT_NEAR(m.per_label[2].recall, 0.5, eps);
    EXPECT_NEAR(m.per_label[2].f1, 0.5, eps);
    EXPECT_NEAR(m.weighted.precision, 32.0 / 45, eps);
    EXPECT_NEAR(m.weighted.recall, 6.0 / 9, eps);
    EXPECT_NEAR(m.weighted.f1, 91.0 / 135, eps);
    EXPECT_EQ(m.per_label[1].support, 4u);
    EXPECT_GE(m.weighted.f1, 0.5);
    EXPECT_LE(m.weighted.f1, 0.8);
}

TEST(SciFact, MajorityBackend) {
    using V = NliValue;
    std::vector<NliExample> xs = {scripted(V::Support, V::Support, 1), scripted(V::Support, V::Support, 2),
                                  scripted(V::NoEvidence, V::Support, 3), scripted(V::Contradict, V::Support, 4)};
    ScriptedNli nli;
    auto m = evaluate_nli(nli, xs);
    EXPECT_DOUBLE_EQ(m.per_label[1].recall, 1.0);
    EXPECT_DOUBLE_EQ(m.per_label[0].recall, 0.0);
    EXPECT_DOUBLE_EQ(m.per_label[2].recall, 0.0);
    EXPECT_DOUBLE_EQ(m.per_label[0].precision, 0.0);
    EXPECT_DOUBLE_EQ(m.per_label[0].f1, 0.0);
}

TEST(SciFact, PerfectBackend) {
    std::vector<NliExample> xs;
    int n = 0;
    for (auto v : kLabels)
        for (int i = 0; i < 3; ++i) xs.push_back(scripted(v, v, n++));
    ScriptedNli nli;
    auto m = evaluate_nli(nli, xs);
    EXPECT_DOUBLE_EQ(m.accuracy, 1.0);
    for (const auto& l : m.per_label) {
        EXPECT_DOUBLE_EQ(l.precision, 1.0);
        EXPECT_DOUBLE_EQ(l.recall, 1.0);
        EXPECT_DOUBLE_EQ(l.f1, 1.0);
    }
    EXPECT_DOUBLE_EQ(m.weighted.f1, 1.0);
}

TEST(SciFact, RejectsUnknownLabel) {
    std::istringstream in(R"({"claim": "x", "label": "MAYBE", "docs": [{"doc_id": "a", "title": "t", "abstract": "b"}]})");
    EXPECT_THROW(read_raw_entries(in), ValidationError);
}

#include <gtest/gtest.h>

#include <algorithm>

#include <verifai/text.hpp>
#include <verifai/verifier.hpp>

#include "test_support.hpp"

using namespace verifai;
using verifai::testing::ScriptedNli;

namespace {

Aggregate oracle(const std::vector<NliValue>& labels) {
    if (labels.empty()) return Aggregate::Unreferenced;
    if (std::count(labels.begin(), labels.end(), NliValue::Contradict)) return Aggregate::Contradicted;
    if (std::count(labels.begin(), labels.end(), NliValue::Support)) return Aggregate::Supported;
    return Aggregate::Unsupported;
}

// A corpus where each doc's title scripts the stub's answer.
Corpus scripted_corpus() {
    return Corpus({DocumentRecord::make("S", "SUPPORT", "Abstract one."),
                   DocumentRecord::make("C", "CONTRADICT", "Abstract two."),
                   DocumentRecord::make("N", "NO_EVIDENCE", "Abstract three."),
                   DocumentRecord::make("X", "FAIL", "Abstract four.")});
}

Claim claim_with(std::vector<std::string> refs) {
    Claim c;
    c.claim_id = 1;
    c.text = "Some claim.";
    c.refs = std::move(refs);
    return c;
}

std::string id_of(NliValue v) {
    switch (v) {
        case NliValue::Support: return "S";
        case NliValue::Contradict: return "C";
        default: return "N";
    }
}

}  // namespace

TEST(Verifier, AggregationTruthTable) {
    const NliValue all[] = {NliValue::Support, NliValue::Contradict, NliValue::NoEvidence};
    std::vector<std::vector<NliValue>> sets = {{}};
    for (std::size_t size = 1; size <= 3; ++size) {
        std::vector<std::vector<NliValue>> next;
        for (const auto& s : sets)
            if (s.size() == size - 1)
                for (auto v : all)
                    if (s.empty() || static_cast<int>(v) >= static_cast<int>(s.back())) {
                        auto t = s;
                        t.push_back(v);
                        next.push_back(t);
                    }
        sets.insert(sets.end(), next.begin(), next.end());
    }
    ASSERT_EQ(sets.size(), 1u + 3u + 6u + 10u);
    for (const auto& s : sets) EXPECT_EQ(aggregate_labels(s), oracle(s));
}

TEST(Verifier, OneCallPerReference) {
    auto corpus = scripted_corpus();
    CorpusSource src(corpus);
    ScriptedNli nli;
    HashingEmbedder emb(32);
    Verifier v(nli, emb);

    std::vector<Claim> claims = {claim_with({"S", "C"}), claim_with({}), claim_with({"N"}),
                                 claim_with({"S", "N", "C"})};
    auto out = v.verify_claims(claims, src);
    EXPECT_EQ(nli.calls.load(), 6u);
    ASSERT_EQ(out.size(), 4u);
    EXPECT_EQ(out[0].aggregate, Aggregate::Contradicted);
    EXPECT_EQ(out[1].aggregate, Aggregate::Unreferenced);
    EXPECT_EQ(out[2].aggregate, Aggregate::Unsupported);
    EXPECT_EQ(out[3].aggregate, Aggregate::Contradicted);
    ASSERT_EQ(out[3].per_ref.size(), 3u);
    EXPECT_EQ(out[3].per_ref[0].doc_id, "S");
    EXPECT_EQ(out[3].per_ref[0].label.value, NliValue::Support);
}

TEST(Verifier, TableThroughVerifier) {
    auto corpus = scripted_corpus();
    CorpusSource src(corpus);
    HashingEmbedder emb(16);
    const NliValue all[] = {NliValue::Support, NliValue::Contradict, NliValue::NoEvidence};
    // Distinct doc ids only, so each subset of {S,C,N} in every order.
    std::vector<std::vector<NliValue>> cases = {{}};
    for (auto a : all) {
        cases.push_back({a});
        for (auto b : all)
            if (b != a) {
                cases.push_back({a, b});
                for (auto c : all)
                    if (c != a && c != b) cases.push_back({a, b, c});
            }
    }
    for (const auto& labels : cases) {
        ScriptedNli nli;
        Verifier v(nli, emb);
        std::vector<std::string> refs;
        for (auto l : labels) refs.push_back(id_of(l));
        auto verdict = v.verify_claim(claim_with(refs), src);
        EXPECT_EQ(verdict.aggregate, oracle(labels));
        EXPECT_EQ(nli.calls.load(), labels.size());
    }
}

TEST(Verifier, MissingDocumentIsRecorded) {
    auto corpus = scripted_corpus();
    CorpusSource src(corpus);
    ScriptedNli nli;
    HashingEmbedder emb(16);
    Verifier v(nli, emb);
    auto out = v.verify_claim(claim_with({"S", "GONE"}), src);
    ASSERT_EQ(out.per_ref.size(), 2u);
    EXPECT_TRUE(out.per_ref[1].error.has_value());
    EXPECT_EQ(out.per_ref[1].label.value, NliValue::NoEvidence);
    EXPECT_EQ(out.aggregate, Aggregate::Supported);
}

TEST(Verifier, BackendFailureRecordedOrRaised) {
    auto corpus = scripted_corpus();
    CorpusSource src(corpus);
    ScriptedNli nli;
    HashingEmbedder emb(16);
    Verifier v(nli, emb);
    auto out = v.verify_claim(claim_with({"X", "N"}), src);
    ASSERT_EQ(out.per_ref.size(), 2u);
    EXPECT_TRUE(out.per_ref[0].error.has_value());
    EXPECT_EQ(out.aggregate, Aggregate::Unsupported);

    v.set_fail_on_backend_error(true);
    try {
        v.verify_claim(claim_with({"X"}), src);
        FAIL() << "expected StageError";
    } catch (const StageError& e) {
        EXPECT_EQ(e.stage(), "verification");
    }
}

TEST(Verifier, EvidenceSentencesMatchOracle) {
    HashingEmbedder emb(64);
    auto doc = DocumentRecord::make("D", "T",
                                    "Aspirin lowers fever in children. Weather was mild. "
                                    "Children given aspirin had lower fever. Unrelated sentence here.");
    const std::string claim = "Aspirin lowers fever in children.";
    auto got = most_similar_sentences(claim, doc, emb, 3);

    auto spans = text::split_sentences(doc.abstract);
    ASSERT_EQ(spans.size(), 4u);
    auto q = emb.embed(claim);
    std::vector<ScoredSentence> want;
    for (std::size_t i = 0; i < spans.size(); ++i) {
        auto s = doc.abstract.substr(spans[i].begin, spans[i].end - spans[i].begin);
        want.push_back({i, s, verifai::testing::dot(q, emb.embed(s))});
    }
    std::stable_sort(want.begin(), want.end(), [](const auto& a, const auto& b) { return a.score > b.score; });
    ASSERT_EQ(got.size(), 3u);
    for (std::size_t i = 0; i < 3; ++i) {
        EXPECT_EQ(got[i].sentence_index, want[i].sentence_index);
        EXPECT_EQ(got[i].text, want[i].text);
        EXPECT_NEAR(got[i].score, want[i].score, 1e-6);
    }
    EXPECT_EQ(got[0].sentence_index, 0u);
    EXPECT_EQ(most_similar_sentences(claim, doc, emb, 10).size(), 4u);
}

TEST(Verifier, VerifyAnswerUsesBundle) {
    ScriptedNli nli;
    HashingEmbedder emb(16);
    Verifier v(nli, emb);
    GeneratedAnswer a;
    a.text = "It helps [1]. It hurts [2]. Plain.";
    a.bundle.docs = {{1, "P1", "SUPPORT", "Yes it helps."}, {2, "P2", "CONTRADICT", "No."}};
    auto out = v.verify_answer(a);
    ASSERT_EQ(out.size(), 3u);
    EXPECT_EQ(out[0].aggregate, Aggregate::Supported);
    EXPECT_EQ(out[1].aggregate, Aggregate::Contradicted);
    EXPECT_EQ(out[2].aggregate, Aggregate::Unreferenced);
    EXPECT_EQ(nli.calls.load(), 2u);
}

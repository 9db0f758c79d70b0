#include <gtest/gtest.h>

#include <sstream>

#include <verifai/corpus.hpp>
#include <verifai/error.hpp>

#include "test_support.hpp"

using namespace verifai;
using verifai::testing::TempDir;

TEST(Ingest, DerivesTextFromTitleAndAbstract) {
    std::istringstream in(R"({"doc_id":"D1","title":"A","abstract":"B"})" "\n");
    auto r = ingest_corpus(in);
    ASSERT_EQ(r.documents.size(), 1u);
    EXPECT_EQ(r.documents[0].text, "A B");
}

TEST(Ingest, ExcludesMissingAbstracts) {
    std::istringstream in(
        R"({"doc_id":"1","title":"t","abstract":"a"})" "\n"
        R"({"doc_id":"2","title":"t","abstract":""})" "\n"
        R"({"doc_id":"3","title":"t","abstract":"c"})" "\n");
    auto r = ingest_corpus(in);
    EXPECT_EQ(r.documents.size(), 2u);
    EXPECT_EQ(r.stats.kept, 2u);
    EXPECT_EQ(r.stats.excluded_no_abstract, 1u);
    EXPECT_NEAR(r.stats.kept_fraction(), 2.0 / 3.0, 1e-12);
}

TEST(Ingest, WhitespaceAbstractCountsAsMissingAndTitleIsOptional) {
    std::istringstream in(
        R"({"doc_id":"1","abstract":"kept without title"})" "\n"
        R"({"doc_id":"2","title":"t","abstract":"  \t "})" "\n"
        R"({"doc_id":"3","title":"t","abstract":null})" "\n");
    auto r = ingest_corpus(in);
    ASSERT_EQ(r.documents.size(), 1u);
    EXPECT_EQ(r.documents[0].title, "");
    EXPECT_EQ(r.documents[0].text, " kept without title");
    EXPECT_EQ(r.stats.total_seen, 3u);
}

TEST(Ingest, DuplicateIdNamesTheId) {
    std::istringstream in(
        R"({"doc_id":"X7","title":"t","abstract":"a"})" "\n"
        R"({"doc_id":"X7","title":"t","abstract":"b"})" "\n");
    try {
        ingest_corpus(in);
        FAIL() << "expected IngestError";
    } catch (const IngestError& e) {
        EXPECT_NE(std::string(e.what()).find("X7"), std::string::npos);
    }
}

TEST(Ingest, MalformedLineReportsLocation) {
    std::istringstream in(R"({"doc_id":"1","title":"t","abstract":"a"})" "\n{not json\n");
    try {
        ingest_corpus(in, "input.jsonl");
        FAIL() << "expected IngestError";
    } catch (const IngestError& e) {
        EXPECT_NE(std::string(e.what()).find("input.jsonl:2"), std::string::npos) << e.what();
    }
}

TEST(Ingest, EmptyInputHasZeroFraction) {
    std::istringstream in("");
    auto r = ingest_corpus(in);
    EXPECT_EQ(r.stats.total_seen, 0u);
    EXPECT_EQ(r.stats.kept_fraction(), 0.0);
}

TEST(Ingest, HundredRecordFixtureKeepsSixtyNine) {
    auto r = ingest_files({verifai::testing::fixtures_dir() / "ingest_100.jsonl"});
    EXPECT_EQ(r.stats.total_seen, 100u);
    EXPECT_EQ(r.stats.kept, 69u);
    EXPECT_EQ(r.stats.excluded_no_abstract, 31u);
    EXPECT_DOUBLE_EQ(r.stats.kept_fraction(), 0.69);
}

TEST(Ingest, ReingestingOutputIsIdentity) {
    auto first = ingest_files({verifai::testing::fixtures_dir() / "ingest_100.jsonl"});
    TempDir dir;
    Corpus::write(dir.path(), first);
    auto second = Corpus::load(dir.path());
    EXPECT_EQ(second.documents(), first.documents);
}

TEST(Ingest, DuplicateAcrossFilesIsRejected) {
    TempDir dir;
    verifai::testing::write_file(dir / "a.jsonl", R"({"doc_id":"1","title":"t","abstract":"a"})" "\n");
    verifai::testing::write_file(dir / "b.jsonl", R"({"doc_id":"1","title":"t","abstract":"b"})" "\n");
    EXPECT_THROW(ingest_files({dir / "a.jsonl", dir / "b.jsonl"}), IngestError);
}

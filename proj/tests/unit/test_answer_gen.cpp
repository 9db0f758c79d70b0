#include <gtest/gtest.h>

#include <verifai/answer_gen.hpp>
#include <verifai/error.hpp>

#include "test_support.hpp"

using namespace verifai;

namespace {

Corpus small_corpus() {
    return Corpus({DocumentRecord::make("D9", "Aspirin.", "Aspirin reduces fever."),
                   DocumentRecord::make("D4", "Fever.", "Fever is common in children."),
                   DocumentRecord::make("D7", "Dosage.", "Dosage varies by weight.")});
}

std::vector<FusedResult> results(std::initializer_list<const char*> ids) {
    std::vector<FusedResult> out;
    for (auto id : ids) out.push_back({id, 0, 0, 0, std::nullopt, std::nullopt, std::nullopt});
    return out;
}

std::size_t count(const std::string& hay, const std::string& needle) {
    std::size_t n = 0;
    for (auto p = hay.find(needle); p != std::string::npos; p = hay.find(needle, p + 1)) ++n;
    return n;
}

}  // namespace

TEST(Prompt, GoldenServingPrompt) {
    auto corpus = small_corpus();
    auto b = build_prompt("Does aspirin reduce fever?", results({"D9", "D4", "D7"}), corpus);
    const std::string expected =
        "Respond to the Instruction using only the information provided in the relevant abstracts in ```Papers``` "
        "below.\n"
        "\n"
        "Instruction: Does aspirin reduce fever?\n"
        "\n"
        "```Papers\n"
        "[1] Aspirin. Aspirin reduces fever.\n"
        "\n"
        "[2] Fever. Fever is common in children.\n"
        "\n"
        "[3] Dosage. Dosage varies by weight.\n"
        "```\n"
        "\n"
        "Answer:";
    EXPECT_EQ(b.rendered, expected);
    EXPECT_EQ(b.rendered, verifai::testing::read_file(verifai::testing::fixtures_dir() / "prompt_golden.txt"));
}

TEST(Prompt, DatasetTemplateUsesQuestionLabel) {
    auto corpus = small_corpus();
    auto b = build_prompt("Q?", results({"D9"}), corpus, PromptTemplate::DatasetBuilding);
    EXPECT_EQ(b.rendered.rfind(std::string(kDatasetInstruction), 0), 0u);
    EXPECT_NE(b.rendered.find("\n\nQuestion: Q?\n\n"), std::string::npos);
}

TEST(Prompt, HeadersAppearOnceEach) {
    auto corpus = small_corpus();
    auto b = build_prompt("q", results({"D9", "D4"}), corpus);
    EXPECT_EQ(count(b.rendered, "[1] "), 1u);
    EXPECT_EQ(count(b.rendered, "[2] "), 1u);
    EXPECT_EQ(count(b.rendered, "[3] "), 0u);
}

TEST(Prompt, NumberingFollowsRank) {
    auto corpus = small_corpus();
    auto a = build_prompt("q", results({"D9", "D4"}), corpus);
    auto b = build_prompt("q", results({"D4", "D9"}), corpus);
    EXPECT_EQ(a.doc_id_for(1), "D9");
    EXPECT_EQ(b.doc_id_for(1), "D4");
    EXPECT_EQ(b.doc_id_for(2), "D9");
    EXPECT_FALSE(b.doc_id_for(3).has_value());
    EXPECT_FALSE(b.doc_id_for(0).has_value());
}

TEST(Prompt, Errors) {
    auto corpus = small_corpus();
    try {
        build_prompt("q", {}, corpus);
        FAIL();
    } catch (const NoResultsError& e) {
        EXPECT_STREQ(e.what(), "no retrieval results");
    }
    EXPECT_THROW(build_prompt(" ", results({"D9"}), corpus), ValidationError);
    EXPECT_THROW(build_prompt("q", results({"missing"}), corpus), ValidationError);
    EXPECT_THROW(build_prompt("q", results({"D9", "D4", "D7", "D9", "D4", "D7", "D9", "D4", "D7", "D9", "D4"}), corpus),
                 ValidationError);
}

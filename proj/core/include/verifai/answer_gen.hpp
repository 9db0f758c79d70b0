#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "verifai/backends.hpp"
#include "verifai/corpus.hpp"
#include "verifai/hybrid_search.hpp"

namespace verifai {

inline constexpr std::size_t kMaxPromptDocuments = 10;

/// Instruction used when serving answers.
inline constexpr std::string_view kServingInstruction =
    "Respond to the Instruction using only the information provided in the relevant abstracts in "
    "```Papers``` below.";

/// Instruction used when building a question-answering dataset from a
/// stronger model's answers.
inline constexpr std::string_view kDatasetInstruction =
    "Please carefully read the question and use the provided research papers to support your answers. "
    "When making a statement, indicate the corresponding abstract number in square brackets (e.g., "
    "[1][2]). Note that some abstracts may appear to be strictly related to the instructions, while "
    "others may not be relevant at all.";

enum class PromptTemplate { Serving, DatasetBuilding };

struct BundleDoc {
    std::size_t local_index = 0;  // 1-based, as cited in the prompt
    std::string doc_id;
    std::string title;
    std::string abstract;

    bool operator==(const BundleDoc&) const = default;
};

/// The prompt plus the local-number <-> doc_id table needed to resolve the
/// generator's citations.
struct PromptBundle {
    std::string question;
    std::vector<BundleDoc> docs;
    std::string rendered;

    std::optional<std::string> doc_id_for(std::size_t local_index) const;

    bool operator==(const PromptBundle&) const = default;
};

/// Renders the prompt:
///
///   <instruction>
///
///   Instruction: <question>          ("Question: " for the dataset template)
///
///   ```Papers
///   [1] <title> <abstract>
///
///   [2] <title> <abstract>
///   ```
///
///   Answer:
std::string render_prompt(std::string_view question, std::span<const BundleDoc> docs,
                          PromptTemplate tmpl = PromptTemplate::Serving);

/// Numbers the fused results 1..n in rank order and renders the prompt.
/// Throws NoResultsError for empty results, ValidationError for a blank
/// question, more than kMaxPromptDocuments results, or a doc_id missing
/// from the corpus.
PromptBundle build_prompt(std::string_view question, std::span<const FusedResult> results, const Corpus& corpus,
                          PromptTemplate tmpl = PromptTemplate::Serving);

struct GeneratedAnswer {
    std::string text;
    PromptBundle bundle;
    bool truncated = false;
};

/// retrieval -> prompt -> generation. Failures are rethrown as StageError
/// naming the stage, except NoResultsError and ValidationError which pass
/// through unchanged.
class AnswerEngine {
public:
    AnswerEngine(const HybridSearcher& searcher, const Corpus& corpus, const Generator& generator,
                 GenerationParams generation, FusionConfig fusion)
        : searcher_(searcher), corpus_(corpus), generator_(generator), generation_(generation), fusion_(fusion) {}

    std::vector<FusedResult> retrieve(std::string_view question, std::size_t k) const;
    GeneratedAnswer answer(std::string_view question, std::size_t k = kMaxPromptDocuments) const;
    GeneratedAnswer generate(PromptBundle bundle) const;

private:
    const HybridSearcher& searcher_;
    const Corpus& corpus_;
    const Generator& generator_;
    GenerationParams generation_;
    FusionConfig fusion_;
};

}  // namespace verifai

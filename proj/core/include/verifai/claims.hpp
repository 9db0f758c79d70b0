#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "verifai/answer_gen.hpp"
#include "verifai/text.hpp"

namespace verifai {

/// One "[n]" in the raw answer.
struct Citation {
    std::size_t local_index = 0;
    text::Span span;
};

struct Claim {
    std::size_t claim_id = 0;  // 1-based, in answer order
    std::string text;          // citations removed, whitespace normalized
    std::vector<std::string> refs;  // resolved doc_ids, first-citation order, no duplicates
    text::Span char_span;           // sentence span in the raw answer, citations included
    std::vector<Citation> citations;

    bool unreferenced() const { return refs.empty(); }
};

/// A citation whose local number has no entry in the bundle.
struct DanglingRef {
    std::size_t claim_id = 0;
    std::size_t local_index = 0;
    text::Span span;
};

struct ParsedAnswer {
    std::vector<Claim> claims;
    std::vector<DanglingRef> dangling;
};

/// Every "[digits]" token in `s`. Anything else in brackets is prose.
std::vector<Citation> find_citations(std::string_view s);

/// Sentence text with the given citations cut out, whitespace normalized and
/// no space left before closing punctuation. `offset` is the position of
/// `sentence` inside the string the citation spans refer to.
std::string strip_citations(std::string_view sentence, std::size_t offset, const std::vector<Citation>& citations);

/// Splits the answer into sentence-level claims. A run of citations that
/// directly follows a sentence terminator belongs to that sentence; citations
/// elsewhere belong to the sentence containing them. Never throws.
ParsedAnswer parse_claims(std::string_view answer, const PromptBundle& bundle);
ParsedAnswer parse_claims(const GeneratedAnswer& answer);

}  // namespace verifai

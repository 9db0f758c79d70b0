#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace verifai::text {

/// Lexical analysis chain shared by the BM25 index and the reference
/// backends: ASCII lowercase, split on ASCII whitespace and punctuation,
/// no stemming. Bytes >= 0x80 are kept inside tokens so UTF-8 words survive.
std::vector<std::string> analyze(std::string_view input);

std::string_view trim(std::string_view s);

/// Collapse runs of ASCII whitespace to one space and trim both ends.
std::string normalize_whitespace(std::string_view s);

inline bool is_blank(std::string_view s) { return trim(s).empty(); }

/// analyze() joined with single spaces: lowercase, punctuation stripped.
std::string normalize_for_match(std::string_view s);

struct Span {
    std::size_t begin = 0;
    std::size_t end = 0;

    std::size_t size() const { return end - begin; }
    bool operator==(const Span&) const = default;
};

/// Sentence boundaries: '.', '!' or '?' (plus any closing quotes or
/// parentheses) followed by whitespace or end of input. A period that ends a
/// guarded abbreviation ("e.g.", "i.e.", "et al.", "vs.", "Fig.", ...) does
/// not end a sentence. Spans are trimmed and never empty.
std::vector<Span> split_sentences(std::string_view s);

}  // namespace verifai::text

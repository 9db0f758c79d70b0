#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "verifai/corpus.hpp"

namespace verifai {

/// Splits text into the units the segmenter counts. Implementations must be
/// deterministic; `detokenize` must rebuild the text of a token range.
class Tokenizer {
public:
    virtual ~Tokenizer() = default;
    virtual std::vector<std::string> tokenize(std::string_view text) const = 0;
    virtual std::string detokenize(std::span<const std::string> tokens) const = 0;
};

/// Splits on Unicode whitespace (ASCII plus the UTF-8 encoded Zs/line
/// separators); rejoins with single spaces.
class WhitespaceTokenizer final : public Tokenizer {
public:
    std::vector<std::string> tokenize(std::string_view text) const override;
    std::string detokenize(std::span<const std::string> tokens) const override;
};

struct SegmenterConfig {
    std::size_t max_tokens = 512;
    std::size_t overlap = 100;

    /// Throws ValidationError unless max_tokens > 0 and overlap < max_tokens.
    void validate() const;
    std::size_t stride() const { return max_tokens - overlap; }
};

struct TokenWindow {
    std::size_t start = 0;  // inclusive
    std::size_t end = 0;    // exclusive

    bool operator==(const TokenWindow&) const = default;
};

/// Windows over a text of `token_count` tokens. Starts advance by
/// max_tokens - overlap; the last window ends at token_count and may be
/// shorter than max_tokens.
std::vector<TokenWindow> segment_windows(std::size_t token_count, const SegmenterConfig& cfg);

/// 1 when token_count <= max_tokens, else 1 + ceil((T - max) / stride).
std::size_t segment_count(std::size_t token_count, const SegmenterConfig& cfg);

struct Segment {
    std::string doc_id;
    std::uint32_t seg_index = 0;
    std::size_t token_start = 0;
    std::size_t token_end = 0;
    std::string text;
};

std::vector<Segment> segment(const DocumentRecord& doc, const SegmenterConfig& cfg, const Tokenizer& tok);

}  // namespace verifai

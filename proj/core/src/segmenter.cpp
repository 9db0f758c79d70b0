#include "verifai/segmenter.hpp"

#include "verifai/error.hpp"

namespace verifai {

namespace {

// Byte length of the whitespace code point starting at s[i], 0 if none.
std::size_t whitespace_len(std::string_view s, std::size_t i) {
    auto at = [&](std::size_t k) { return static_cast<unsigned char>(s[k]); };
    unsigned char c = at(i);
    if (c == ' ' || (c >= 0x09 && c <= 0x0d)) return 1;
    if (c == 0xc2 && i + 1 < s.size() && (at(i + 1) == 0x85 || at(i + 1) == 0xa0)) return 2;
    if (i + 2 >= s.size()) return 0;
    unsigned char c1 = at(i + 1);
    unsigned char c2 = at(i + 2);
    if (c == 0xe1 && c1 == 0x9a && c2 == 0x80) return 3;  // U+1680
    if (c == 0xe2 && c1 == 0x80 && (c2 <= 0x8a || c2 == 0xa8 || c2 == 0xa9 || c2 == 0xaf)) return 3;
    if (c == 0xe2 && c1 == 0x81 && c2 == 0x9f) return 3;  // U+205F
    if (c == 0xe3 && c1 == 0x80 && c2 == 0x80) return 3;  // U+3000
    return 0;
}

}  // namespace

std::vector<std::string> WhitespaceTokenizer::tokenize(std::string_view text) const {
    std::vector<std::string> tokens;
    std::size_t i = 0;
    std::size_t start = 0;
    bool in_token = false;
    while (i < text.size()) {
        std::size_t ws = whitespace_len(text, i);
        if (ws > 0) {
            if (in_token) tokens.emplace_back(text.substr(start, i - start));
            in_token = false;
            i += ws;
        } else {
            if (!in_token) start = i;
            in_token = true;
            ++i;
        }
    }
    if (in_token) tokens.emplace_back(text.substr(start));
    return tokens;
}

std::string WhitespaceTokenizer::detokenize(std::span<const std::string> tokens) const {
    std::string out;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        if (i) out.push_back(' ');
        out += tokens[i];
    }
    return out;
}

void SegmenterConfig::validate() const {
    if (max_tokens == 0) throw ValidationError("segment.max_tokens must be positive");
    if (overlap >= max_tokens) throw ValidationError("segment.overlap must be smaller than segment.max_tokens");
}

std::size_t segment_count(std::size_t token_count, const SegmenterConfig& cfg) {
    cfg.validate();
    if (token_count == 0) return 0;
    if (token_count <= cfg.max_tokens) return 1;
    std::size_t stride = cfg.stride();
    return 1 + (token_count - cfg.max_tokens + stride - 1) / stride;
}

std::vector<TokenWindow> segment_windows(std::size_t token_count, const SegmenterConfig& cfg) {
    cfg.validate();
    if (token_count == 0) throw ValidationError("empty document text");
    std::vector<TokenWindow> windows;
    windows.reserve(segment_count(token_count, cfg));
    const std::size_t stride = cfg.stride();
    for (std::size_t start = 0;; start += stride) {
        std::size_t end = std::min(start + cfg.max_tokens, token_count);
        windows.push_back({start, end});
        if (end == token_count) break;
    }
    return windows;
}

std::vector<Segment> segment(const DocumentRecord& doc, const SegmenterConfig& cfg, const Tokenizer& tok) {
    auto tokens = tok.tokenize(doc.text);
    if (tokens.empty()) throw ValidationError("empty document text: " + doc.doc_id);
    auto windows = segment_windows(tokens.size(), cfg);

    std::vector<Segment> out;
    out.reserve(windows.size());
    std::span<const std::string> all(tokens);
    for (std::size_t i = 0; i < windows.size(); ++i) {
        const auto& w = windows[i];
        out.push_back(Segment{doc.doc_id, static_cast<std::uint32_t>(i), w.start, w.end,
                              tok.detokenize(all.subspan(w.start, w.end - w.start))});
    }
    return out;
}

}  // namespace verifai

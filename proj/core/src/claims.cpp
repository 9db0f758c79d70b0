#include "verifai/claims.hpp"

#include <algorithm>
#include <cctype>

namespace verifai {

namespace {

constexpr std::size_t kMaxCitationDigits = 9;

bool is_blank_char(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r'; }

// End of the citation run starting at citations[first]: consecutive
// citations separated by nothing or by spaces/tabs only.
std::size_t run_end(std::string_view s, const std::vector<Citation>& cites, std::size_t first) {
    std::size_t end = cites[first].span.end;
    for (std::size_t i = first + 1; i < cites.size(); ++i) {
        auto gap = s.substr(end, cites[i].span.begin - end);
        if (!std::all_of(gap.begin(), gap.end(), [](char c) { return c == ' ' || c == '\t'; })) break;
        end = cites[i].span.end;
    }
    return end;
}

}  // namespace

std::vector<Citation> find_citations(std::string_view s) {
    std::vector<Citation> out;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i] != '[') continue;
        std::size_t j = i + 1;
        std::size_t value = 0;
        while (j < s.size() && std::isdigit(static_cast<unsigned char>(s[j])) && j - i <= kMaxCitationDigits)
            value = value * 10 + static_cast<std::size_t>(s[j++] - '0');
        if (j == i + 1 || j >= s.size() || s[j] != ']') continue;
        out.push_back({value, {i, j + 1}});
        i = j;
    }
    return out;
}

std::string strip_citations(std::string_view sentence, std::size_t offset, const std::vector<Citation>& citations) {
    std::string cut;
    std::size_t pos = offset;
    const std::size_t end = offset + sentence.size();
    for (const auto& c : citations) {
        if (c.span.begin < pos || c.span.end > end) continue;
        cut.append(sentence.substr(pos - offset, c.span.begin - pos));
        cut.push_back(' ');
        pos = c.span.end;
    }
    cut.append(sentence.substr(pos - offset));

    auto norm = text::normalize_whitespace(cut);
    std::string out;
    out.reserve(norm.size());
    for (std::size_t i = 0; i < norm.size(); ++i) {
        if (norm[i] == ' ' && i + 1 < norm.size() && std::string_view(".,;:!?)").find(norm[i + 1]) != std::string_view::npos)
            continue;
        out.push_back(norm[i]);
    }
    return out;
}

ParsedAnswer parse_claims(std::string_view answer, const PromptBundle& bundle) {
    const auto cites = find_citations(answer);
    auto spans = text::split_sentences(answer);

    // Pull a citation run that opens sentence k back onto sentence k-1.
    std::vector<text::Span> sentences;
    for (auto span : spans) {
        if (!sentences.empty()) {
            auto first = std::find_if(cites.begin(), cites.end(),
                                      [&](const Citation& c) { return c.span.begin == span.begin; });
            if (first != cites.end()) {
                std::size_t end = run_end(answer, cites, static_cast<std::size_t>(first - cites.begin()));
                sentences.back().end = end;
                span.begin = end;
                while (span.begin < span.end && is_blank_char(answer[span.begin])) ++span.begin;
                if (span.begin >= span.end) continue;
            }
        }
        sentences.push_back(span);
    }

    ParsedAnswer parsed;
    std::size_t next_cite = 0;
    for (const auto& span : sentences) {
        Claim claim;
        claim.claim_id = parsed.claims.size() + 1;
        claim.char_span = span;
        while (next_cite < cites.size() && cites[next_cite].span.begin < span.end) {
            if (cites[next_cite].span.begin >= span.begin) claim.citations.push_back(cites[next_cite]);
            ++next_cite;
        }
        claim.text = strip_citations(answer.substr(span.begin, span.size()), span.begin, claim.citations);
        for (const auto& c : claim.citations) {
            auto doc = bundle.doc_id_for(c.local_index);
            if (!doc) {
                parsed.dangling.push_back({claim.claim_id, c.local_index, c.span});
                continue;
            }
            if (std::find(claim.refs.begin(), claim.refs.end(), *doc) == claim.refs.end())
                claim.refs.push_back(std::move(*doc));
        }
        parsed.claims.push_back(std::move(claim));
    }
    return parsed;
}

ParsedAnswer parse_claims(const GeneratedAnswer& answer) { return parse_claims(answer.text, answer.bundle); }

}  // namespace verifai

#include "verifai/text.hpp"

namespace verifai::text {

namespace {

bool is_space(unsigned char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

bool is_token_byte(unsigned char c) {
    return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c >= 0x80;
}

}  // namespace

std::vector<std::string> analyze(std::string_view input) {
    std::vector<std::string> tokens;
    std::string current;
    for (unsigned char c : input) {
        if (is_token_byte(c)) {
            current.push_back(c >= 'A' && c <= 'Z' ? static_cast<char>(c - 'A' + 'a') : static_cast<char>(c));
        } else if (!current.empty()) {
            tokens.push_back(std::move(current));
            current.clear();
        }
    }
    if (!current.empty()) tokens.push_back(std::move(current));
    return tokens;
}

std::string_view trim(std::string_view s) {
    std::size_t b = 0;
    std::size_t e = s.size();
    while (b < e && is_space(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && is_space(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

std::string normalize_whitespace(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    bool pending_space = false;
    for (unsigned char c : trim(s)) {
        if (is_space(c)) {
            pending_space = true;
            continue;
        }
        if (pending_space) out.push_back(' ');
        pending_space = false;
        out.push_back(static_cast<char>(c));
    }
    return out;
}

std::string normalize_for_match(std::string_view s) {
    std::string out;
    for (const auto& t : analyze(s)) {
        if (!out.empty()) out.push_back(' ');
        out += t;
    }
    return out;
}

namespace {

constexpr std::string_view kAbbreviations[] = {
    "e.g", "i.e", "et al", "al", "vs", "fig", "figs", "eq", "dr", "mr", "mrs", "ms", "prof",
    "approx", "cf", "vol", "resp", "ca",
};

bool ends_with_ci(std::string_view s, std::string_view suffix) {
    if (suffix.size() > s.size()) return false;
    auto tail = s.substr(s.size() - suffix.size());
    for (std::size_t i = 0; i < suffix.size(); ++i) {
        char a = tail[i];
        if (a >= 'A' && a <= 'Z') a = static_cast<char>(a - 'A' + 'a');
        if (a != suffix[i]) return false;
    }
    return true;
}

// True when the period at s[dot] closes one of the guarded abbreviations.
bool is_abbreviation(std::string_view s, std::size_t dot) {
    auto before = s.substr(0, dot);
    for (auto abbr : kAbbreviations) {
        if (!ends_with_ci(before, abbr)) continue;
        std::size_t start = before.size() - abbr.size();
        if (start == 0) return true;
        unsigned char prev = static_cast<unsigned char>(before[start - 1]);
        if (is_space(prev) || prev == '(' || prev == '"') return true;
    }
    return false;
}

}  // namespace

std::vector<Span> split_sentences(std::string_view s) {
    std::vector<Span> out;
    auto push = [&](std::size_t b, std::size_t e) {
        while (b < e && is_space(static_cast<unsigned char>(s[b]))) ++b;
        while (e > b && is_space(static_cast<unsigned char>(s[e - 1]))) --e;
        if (b < e) out.push_back({b, e});
    };

    std::size_t start = 0;
    std::size_t i = 0;
    while (i < s.size()) {
        char c = s[i];
        if (c != '.' && c != '!' && c != '?') {
            ++i;
            continue;
        }
        std::size_t j = i + 1;
        while (j < s.size() && (s[j] == '.' || s[j] == '!' || s[j] == '?')) ++j;
        while (j < s.size() && (s[j] == ')' || s[j] == '"' || s[j] == '\'')) ++j;
        bool boundary = j == s.size() || is_space(static_cast<unsigned char>(s[j]));
        if (boundary && c == '.' && j == i + 1 && is_abbreviation(s, i)) boundary = false;
        if (boundary) {
            push(start, j);
            start = j;
        }
        i = j;
    }
    push(start, s.size());
    return out;
}

}  // namespace verifai::text

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <set>
#include <unordered_set>

#include "verifai/backends.hpp"
#include "verifai/error.hpp"
#include "verifai/text.hpp"

namespace verifai {

std::string_view to_string(NliValue v) {
    switch (v) {
        case NliValue::Support: return "SUPPORT";
        case NliValue::Contradict: return "CONTRADICT";
        case NliValue::NoEvidence: return "NO_EVIDENCE";
    }
    return "NO_EVIDENCE";
}

std::optional<NliValue> parse_nli_value(std::string_view s) {
    std::string key;
    for (char c : s) {
        if (c == ' ' || c == '-') c = '_';
        key.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
    }
    if (key == "SUPPORT" || key == "SUPPORTS") return NliValue::Support;
    if (key == "CONTRADICT" || key == "CONTRADICTS") return NliValue::Contradict;
    if (key == "NO_EVIDENCE" || key == "NOT_ENOUGH_INFO" || key == "NEI") return NliValue::NoEvidence;
    return std::nullopt;
}

// --- embedder --------------------------------------------------------------

HashingEmbedder::HashingEmbedder(std::size_t dim) : dim_(dim) {
    if (dim == 0) throw ValidationError("embedding dimension must be positive");
}

std::size_t HashingEmbedder::bucket(std::string_view token, std::size_t dim) {
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c : token) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return static_cast<std::size_t>(h % dim);
}

Embedding HashingEmbedder::embed(std::string_view input) const {
    if (input.empty()) throw ValidationError("cannot embed empty text");
    std::vector<double> counts(dim_, 0.0);
    for (const auto& t : text::analyze(input)) counts[bucket(t, dim_)] += 1.0;
    double norm = 0.0;
    for (double c : counts) norm += c * c;
    norm = std::sqrt(norm);

    Embedding out(dim_, 0.0f);
    if (norm == 0.0) return out;
    for (std::size_t i = 0; i < dim_; ++i) out[i] = static_cast<float>(counts[i] / norm);
    return out;
}

// --- generator -------------------------------------------------------------

namespace {

const std::unordered_set<std::string>& stopwords() {
    static const std::unordered_set<std::string> words = {
        "a",    "an",   "and",  "are",  "as",   "at",    "be",    "by",   "can",  "do",    "does", "for",
        "from", "has",  "have", "how",  "in",   "is",    "it",    "its",  "of",   "on",    "or",   "that",
        "the",  "this", "to",   "was",  "were", "what",  "when",  "which", "who", "why",   "with", "there",
        "any",  "all",  "into", "their", "these", "those", "than", "been", "being", "did", "not",  "no",
    };
    return words;
}

std::set<std::string> content_words(std::string_view s) {
    std::set<std::string> out;
    for (auto& t : text::analyze(s))
        if (!stopwords().contains(t)) out.insert(std::move(t));
    return out;
}

struct PromptPaper {
    int number = 0;
    std::string_view body;
};

// Recovers the question and the "[n] title abstract" blocks from a rendered
// serving prompt. Lenient: anything it cannot find is left empty.
std::pair<std::string_view, std::vector<PromptPaper>> read_prompt(std::string_view prompt) {
    std::string_view question;
    constexpr std::string_view kInstr = "Instruction: ";
    if (auto at = prompt.find(kInstr); at != std::string_view::npos) {
        auto rest = prompt.substr(at + kInstr.size());
        question = rest.substr(0, rest.find("\n\n"));
    }

    std::string_view papers_area = prompt;
    if (auto at = prompt.find("```Papers"); at != std::string_view::npos) papers_area = prompt.substr(at);
    if (auto end = papers_area.find("\nAnswer:"); end != std::string_view::npos)
        papers_area = papers_area.substr(0, end);

    struct Marker {
        std::size_t at;
        std::size_t body;
        int number;
    };
    std::vector<Marker> markers;
    for (std::size_t i = 0; i < papers_area.size(); ++i) {
        if (papers_area[i] != '[' || (i > 0 && papers_area[i - 1] != '\n')) continue;
        std::size_t j = i + 1;
        int n = 0;
        while (j < papers_area.size() && std::isdigit(static_cast<unsigned char>(papers_area[j])) && j - i < 6)
            n = n * 10 + (papers_area[j++] - '0');
        if (j == i + 1 || j + 1 >= papers_area.size() || papers_area[j] != ']' || papers_area[j + 1] != ' ') continue;
        markers.push_back({i, j + 2, n});
    }

    std::vector<PromptPaper> papers;
    for (std::size_t m = 0; m < markers.size(); ++m) {
        std::size_t end = m + 1 < markers.size() ? markers[m + 1].at : papers_area.size();
        auto body = papers_area.substr(markers[m].body, end - markers[m].body);
        if (auto fence = body.rfind("\n```"); fence != std::string_view::npos) body = body.substr(0, fence);
        papers.push_back({markers[m].number, text::trim(body)});
    }
    return {text::trim(question), papers};
}

// Keeps the first `max_tokens` whitespace-separated tokens of `s`.
Generation truncate_tokens(std::string s, std::size_t max_tokens) {
    std::size_t count = 0;
    bool in_token = false;
    for (std::size_t i = 0; i < s.size(); ++i) {
        bool space = std::isspace(static_cast<unsigned char>(s[i])) != 0;
        if (!space && !in_token) {
            if (count == max_tokens) {
                std::string_view kept = text::trim(std::string_view(s).substr(0, i));
                return {std::string(kept), true};
            }
            ++count;
        }
        in_token = !space;
    }
    return {std::move(s), false};
}

}  // namespace

ReferenceGenerator::ReferenceGenerator(double relevance_threshold) : threshold_(relevance_threshold) {}

Generation ReferenceGenerator::generate(std::string_view prompt, const GenerationParams& params) const {
    auto [question, papers] = read_prompt(prompt);
    auto q_words = content_words(question);

    std::string answer;
    for (const auto& paper : papers) {
        if (q_words.empty()) break;
        auto p_words = content_words(paper.body);
        std::size_t shared = 0;
        for (const auto& w : q_words) shared += p_words.contains(w);
        if (static_cast<double>(shared) / static_cast<double>(q_words.size()) < threshold_) continue;

        // Best sentence: most shared content words, earliest on ties.
        std::string_view best;
        std::size_t best_shared = 0;
        for (auto span : text::split_sentences(paper.body)) {
            auto sentence = paper.body.substr(span.begin, span.size());
            auto words = content_words(sentence);
            std::size_t n = 0;
            for (const auto& w : q_words) n += words.contains(w);
            if (best.empty() || n > best_shared) {
                best = sentence;
                best_shared = n;
            }
        }
        while (!best.empty() && (best.back() == '.' || best.back() == '!' || best.back() == '?')) best.remove_suffix(1);
        if (best.empty()) continue;

        if (!answer.empty()) answer.push_back(' ');
        answer.append(best).append(" [").append(std::to_string(paper.number)).append("].");
    }
    if (answer.empty()) answer = kNoAnswer;
    return truncate_tokens(std::move(answer), params.max_new_tokens);
}

// --- NLI -------------------------------------------------------------------

namespace {

bool inflection_eq(std::string_view a, std::string_view b) {
    if (a == b) return true;
    if (a.size() > b.size()) std::swap(a, b);
    if (!b.starts_with(a)) return false;
    auto suffix = b.substr(a.size());
    return suffix == "s" || suffix == "es" || suffix == "d" || suffix == "ed";
}

bool tokens_eq(const std::vector<std::string>& a, const std::vector<std::string>& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i)
        if (!inflection_eq(a[i], b[i])) return false;
    return true;
}

bool exact_tokens_eq(const std::vector<std::string>& a, std::size_t skip_at, std::size_t skip_n,
                     const std::vector<std::string>& b) {
    if (a.size() != b.size() + skip_n) return false;
    for (std::size_t i = 0, j = 0; i < a.size(); ++i) {
        if (i >= skip_at && i < skip_at + skip_n) continue;
        if (a[i] != b[j++]) return false;
    }
    return true;
}

// claim == sentence with one negation inserted.
bool negates(const std::vector<std::string>& claim, const std::vector<std::string>& sentence) {
    for (std::size_t i = 0; i < claim.size(); ++i) {
        if (claim[i] != "not" && claim[i] != "no") continue;
        if (exact_tokens_eq(claim, i, 1, sentence)) return true;
        if (claim[i] == "not" && i > 0 &&
            (claim[i - 1] == "do" || claim[i - 1] == "does" || claim[i - 1] == "did")) {
            std::vector<std::string> reduced;
            for (std::size_t k = 0; k < claim.size(); ++k)
                if (k != i && k != i - 1) reduced.push_back(claim[k]);
            if (tokens_eq(reduced, sentence)) return true;
        }
    }
    return false;
}

}  // namespace

void ReferenceNliClassifier::add_override(std::string_view claim, NliValue value) {
    overrides_[text::normalize_for_match(claim)] = value;
}

NliLabel ReferenceNliClassifier::classify(std::string_view claim, std::string_view evidence_title,
                                          std::string_view evidence_abstract) const {
    if (text::is_blank(claim)) throw ValidationError("claim must be non-empty");
    auto norm_claim = text::normalize_for_match(claim);
    if (auto it = overrides_.find(norm_claim); it != overrides_.end()) return {it->second, 1.0};
    if (norm_claim.empty()) return {NliValue::NoEvidence, 1.0};

    std::string evidence;
    evidence.append(evidence_title).append(" ").append(evidence_abstract);
    auto norm_evidence = " " + text::normalize_for_match(evidence) + " ";
    if (norm_evidence.find(" " + norm_claim + " ") != std::string::npos) return {NliValue::Support, 1.0};

    auto claim_tokens = text::analyze(claim);
    for (std::string_view part : {evidence_title, evidence_abstract}) {
        for (auto span : text::split_sentences(part)) {
            if (negates(claim_tokens, text::analyze(part.substr(span.begin, span.size()))))
                return {NliValue::Contradict, 1.0};
        }
    }
    return {NliValue::NoEvidence, 1.0};
}

}  // namespace verifai

#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "verifai/backends.hpp"
#include "verifai/claims.hpp"
#include "verifai/corpus.hpp"

namespace verifai {

enum class Aggregate { Supported, Contradicted, Unsupported, Unreferenced };

std::string_view to_string(Aggregate a);

/// CONTRADICT anywhere wins, then SUPPORT anywhere, else UNSUPPORTED;
/// no labels at all means UNREFERENCED.
Aggregate aggregate_labels(std::span<const NliValue> labels);

struct RefVerdict {
    std::string doc_id;
    NliLabel label;
    std::optional<std::string> error;  // set when the call failed; label is then NO_EVIDENCE
};

struct ScoredSentence {
    std::size_t sentence_index = 0;  // position in the abstract
    std::string text;
    double score = 0.0;
};

struct EvidenceSentences {
    std::string doc_id;
    std::vector<ScoredSentence> sentences;
};

struct Verdict {
    std::size_t claim_id = 0;
    std::vector<RefVerdict> per_ref;
    Aggregate aggregate = Aggregate::Unreferenced;
    std::vector<EvidenceSentences> evidence;
};

/// Looks documents up by doc_id for verification. Implemented by Corpus
/// and by a prompt bundle's document table.
class DocumentSource {
public:
    virtual ~DocumentSource() = default;
    virtual const DocumentRecord* find(std::string_view doc_id) const = 0;
};

class CorpusSource final : public DocumentSource {
public:
    explicit CorpusSource(const Corpus& corpus) : corpus_(corpus) {}
    const DocumentRecord* find(std::string_view doc_id) const override { return corpus_.find(doc_id); }

private:
    const Corpus& corpus_;
};

class BundleSource final : public DocumentSource {
public:
    explicit BundleSource(const PromptBundle& bundle);
    const DocumentRecord* find(std::string_view doc_id) const override;

private:
    std::vector<DocumentRecord> docs_;
};

/// Abstract sentences ranked by embedding dot product with the claim, best
/// first; equal scores keep abstract order. Returns min(n, #sentences).
std::vector<ScoredSentence> most_similar_sentences(std::string_view claim, const DocumentRecord& doc,
                                                   const Embedder& embedder, std::size_t n = 1);

class Verifier {
public:
    Verifier(const NliClassifier& nli, const Embedder& embedder, std::size_t evidence_sentences = 1)
        : nli_(nli), embedder_(embedder), evidence_n_(evidence_sentences) {}

    /// When set, a BackendError from the NLI or embedding backend aborts
    /// verification with StageError("verification") instead of being
    /// recorded on the reference.
    void set_fail_on_backend_error(bool on) { fail_on_backend_error_ = on; }

    /// One NLI call per resolved reference; none for unreferenced claims.
    /// A missing document or a failed call is recorded on that reference
    /// and counts as NO_EVIDENCE.
    Verdict verify_claim(const Claim& claim, const DocumentSource& docs) const;

    std::vector<Verdict> verify_claims(std::span<const Claim> claims, const DocumentSource& docs) const;

    /// parse_claims, then verify_claim per claim in claim order. Documents
    /// come from the answer's bundle.
    std::vector<Verdict> verify_answer(const GeneratedAnswer& answer) const;

private:
    const NliClassifier& nli_;
    const Embedder& embedder_;
    std::size_t evidence_n_;
    bool fail_on_backend_error_ = false;
};

}  // namespace verifai

#include "verifai/verifier.hpp"

#include <algorithm>

#include "verifai/error.hpp"
#include "verifai/text.hpp"

namespace verifai {

std::string_view to_string(Aggregate a) {
    switch (a) {
        case Aggregate::Supported: return "SUPPORTED";
        case Aggregate::Contradicted: return "CONTRADICTED";
        case Aggregate::Unsupported: return "UNSUPPORTED";
        case Aggregate::Unreferenced: return "UNREFERENCED";
    }
    return "UNREFERENCED";
}

Aggregate aggregate_labels(std::span<const NliValue> labels) {
    if (labels.empty()) return Aggregate::Unreferenced;
    bool support = false;
    for (auto v : labels) {
        if (v == NliValue::Contradict) return Aggregate::Contradicted;
        support = support || v == NliValue::Support;
    }
    return support ? Aggregate::Supported : Aggregate::Unsupported;
}

BundleSource::BundleSource(const PromptBundle& bundle) {
    docs_.reserve(bundle.docs.size());
    for (const auto& d : bundle.docs) docs_.push_back(DocumentRecord::make(d.doc_id, d.title, d.abstract));
}

const DocumentRecord* BundleSource::find(std::string_view doc_id) const {
    auto it = std::find_if(docs_.begin(), docs_.end(), [&](const DocumentRecord& d) { return d.doc_id == doc_id; });
    return it == docs_.end() ? nullptr : &*it;
}

namespace {

double dot(const Embedding& a, const Embedding& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < std::min(a.size(), b.size()); ++i) s += static_cast<double>(a[i]) * b[i];
    return s;
}

}  // namespace

std::vector<ScoredSentence> most_similar_sentences(std::string_view claim, const DocumentRecord& doc,
                                                   const Embedder& embedder, std::size_t n) {
    std::vector<ScoredSentence> ranked;
    if (n == 0 || text::is_blank(claim)) return ranked;
    auto q = embedder.embed(claim);
    const std::string_view abstract = doc.abstract;
    auto spans = text::split_sentences(abstract);
    for (std::size_t i = 0; i < spans.size(); ++i) {
        auto sentence = abstract.substr(spans[i].begin, spans[i].size());
        ranked.push_back({i, std::string(sentence), dot(q, embedder.embed(sentence))});
    }
    std::stable_sort(ranked.begin(), ranked.end(),
                     [](const ScoredSentence& a, const ScoredSentence& b) { return a.score > b.score; });
    if (ranked.size() > n) ranked.resize(n);
    return ranked;
}

Verdict Verifier::verify_claim(const Claim& claim, const DocumentSource& docs) const {
    Verdict v;
    v.claim_id = claim.claim_id;
    std::vector<NliValue> labels;
    for (const auto& doc_id : claim.refs) {
        RefVerdict rv;
        rv.doc_id = doc_id;
        rv.label = {NliValue::NoEvidence, 0.0};
        const auto* doc = docs.find(doc_id);
        if (!doc) {
            rv.error = "document '" + doc_id + "' not found";
        } else {
            try {
                rv.label = nli_.classify(claim.text, doc->title, doc->abstract);
            } catch (const BackendError& e) {
                if (fail_on_backend_error_) throw StageError("verification", e.what());
                rv.error = e.what();
                rv.label = {NliValue::NoEvidence, 0.0};
            } catch (const std::exception& e) {
                rv.error = e.what();
                rv.label = {NliValue::NoEvidence, 0.0};
            }
            EvidenceSentences ev{doc_id, {}};
            try {
                ev.sentences = most_similar_sentences(claim.text, *doc, embedder_, evidence_n_);
            } catch (const BackendError& e) {
                if (fail_on_backend_error_) throw StageError("verification", e.what());
                if (!rv.error) rv.error = std::string("evidence: ") + e.what();
            } catch (const std::exception& e) {
                if (!rv.error) rv.error = std::string("evidence: ") + e.what();
            }
            v.evidence.push_back(std::move(ev));
        }
        labels.push_back(rv.label.value);
        v.per_ref.push_back(std::move(rv));
    }
    v.aggregate = aggregate_labels(labels);
    return v;
}

std::vector<Verdict> Verifier::verify_claims(std::span<const Claim> claims, const DocumentSource& docs) const {
    std::vector<Verdict> out;
    out.reserve(claims.size());
    for (const auto& c : claims) out.push_back(verify_claim(c, docs));
    return out;
}

std::vector<Verdict> Verifier::verify_answer(const GeneratedAnswer& answer) const {
    auto parsed = parse_claims(answer);
    BundleSource docs(answer.bundle);
    return verify_claims(parsed.claims, docs);
}

}  // namespace verifai

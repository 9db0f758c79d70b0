#include "verifai/answer_gen.hpp"

#include "verifai/error.hpp"
#include "verifai/text.hpp"

namespace verifai {

std::optional<std::string> PromptBundle::doc_id_for(std::size_t local_index) const {
    if (local_index == 0 || local_index > docs.size()) return std::nullopt;
    return docs[local_index - 1].doc_id;
}

std::string render_prompt(std::string_view question, std::span<const BundleDoc> docs, PromptTemplate tmpl) {
    std::string out;
    if (tmpl == PromptTemplate::Serving) {
        out.append(kServingInstruction).append("\n\nInstruction: ");
    } else {
        out.append(kDatasetInstruction).append("\n\nQuestion: ");
    }
    out.append(question).append("\n\n```Papers\n");
    for (std::size_t i = 0; i < docs.size(); ++i) {
        if (i) out.append("\n");
        out.append("[").append(std::to_string(docs[i].local_index)).append("] ");
        out.append(docs[i].title).append(" ").append(docs[i].abstract).append("\n");
    }
    out.append("```\n\nAnswer:");
    return out;
}

PromptBundle build_prompt(std::string_view question, std::span<const FusedResult> results, const Corpus& corpus,
                          PromptTemplate tmpl) {
    if (text::is_blank(question)) throw ValidationError("question must be non-empty");
    if (results.empty()) throw NoResultsError("no retrieval results");
    if (results.size() > kMaxPromptDocuments)
        throw ValidationError("at most " + std::to_string(kMaxPromptDocuments) + " documents fit in a prompt");

    PromptBundle bundle;
    bundle.question = std::string(text::trim(question));
    for (std::size_t i = 0; i < results.size(); ++i) {
        const auto* doc = corpus.find(results[i].doc_id);
        if (!doc) throw ValidationError("retrieved doc_id '" + results[i].doc_id + "' is not in the corpus");
        bundle.docs.push_back({i + 1, doc->doc_id, doc->title, doc->abstract});
    }
    bundle.rendered = render_prompt(bundle.question, bundle.docs, tmpl);
    return bundle;
}

std::vector<FusedResult> AnswerEngine::retrieve(std::string_view question, std::size_t k) const {
    if (k == 0 || k > kMaxPromptDocuments)
        throw ValidationError("k must be between 1 and " + std::to_string(kMaxPromptDocuments));
    if (text::is_blank(question)) throw ValidationError("question must be non-empty");
    FusionConfig cfg = fusion_;
    cfg.final_k = k;
    try {
        return searcher_.search(question, cfg);
    } catch (const ValidationError&) {
        throw;
    } catch (const std::exception& e) {
        throw StageError("retrieval", e.what());
    }
}

GeneratedAnswer AnswerEngine::generate(PromptBundle bundle) const {
    Generation g;
    try {
        g = generator_.generate(bundle.rendered, generation_);
    } catch (const std::exception& e) {
        throw StageError("generation", e.what());
    }
    return {std::move(g.text), std::move(bundle), g.truncated};
}

GeneratedAnswer AnswerEngine::answer(std::string_view question, std::size_t k) const {
    auto results = retrieve(question, k);
    return generate(build_prompt(question, results, corpus_));
}

}  // namespace verifai

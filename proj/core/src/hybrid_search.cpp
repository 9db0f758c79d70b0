#include "verifai/hybrid_search.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "verifai/error.hpp"
#include "verifai/text.hpp"

namespace verifai {

void FusionConfig::validate() const {
    auto in_unit = [](double w) { return w >= 0.0 && w <= 1.0; };
    if (!in_unit(w_lex) || !in_unit(w_sem)) throw ValidationError("fusion weights must lie in [0,1]");
    if (std::abs(w_lex + w_sem - 1.0) > 1e-9) throw ValidationError("fusion.w_lex + fusion.w_sem must equal 1");
    if (arm_k == 0) throw ValidationError("fusion.arm_k must be at least 1");
    if (final_k == 0) throw ValidationError("fusion.final_k must be at least 1");
}

std::vector<double> normalize_scores(std::span<const double> scores) {
    if (scores.empty()) return {};
    for (double s : scores)
        if (!std::isfinite(s)) throw ValidationError("normalize_scores: non-finite score");
    auto [lo_it, hi_it] = std::minmax_element(scores.begin(), scores.end());
    const double lo = *lo_it;
    const double hi = *hi_it;
    std::vector<double> out(scores.size(), 1.0);
    if (hi == lo) return out;
    for (std::size_t i = 0; i < scores.size(); ++i) out[i] = (scores[i] - lo) / (hi - lo);
    return out;
}

std::vector<FusedResult> fuse(std::span<const LexicalHit> lex, std::span<const SemanticHit> sem,
                              const FusionConfig& cfg) {
    cfg.validate();
    std::map<std::string, FusedResult> by_doc;

    std::vector<double> raw;
    raw.reserve(lex.size());
    for (const auto& h : lex) raw.push_back(h.raw_score);
    auto lex_norm = normalize_scores(raw);
    for (std::size_t i = 0; i < lex.size(); ++i) {
        auto& r = by_doc[lex[i].doc_id];
        r.doc_id = lex[i].doc_id;
        r.lex_raw = lex[i].raw_score;
        r.lex_norm = lex_norm[i];
    }

    // Best segment per document; equal scores keep the lower seg_index.
    struct Best {
        double score;
        std::uint32_t seg;
    };
    std::map<std::string, Best> best;
    for (const auto& h : sem) {
        auto [it, inserted] = best.try_emplace(h.doc_id, Best{h.raw_score, h.seg_index});
        if (!inserted && (h.raw_score > it->second.score ||
                          (h.raw_score == it->second.score && h.seg_index < it->second.seg)))
            it->second = {h.raw_score, h.seg_index};
    }
    raw.clear();
    for (const auto& [_, b] : best) raw.push_back(b.score);
    auto sem_norm = normalize_scores(raw);
    std::size_t i = 0;
    for (const auto& [doc, b] : best) {
        auto& r = by_doc[doc];
        r.doc_id = doc;
        r.sem_raw = b.score;
        r.sem_norm = sem_norm[i++];
        r.best_segment = b.seg;
    }

    std::vector<FusedResult> out;
    out.reserve(by_doc.size());
    for (auto& [_, r] : by_doc) {
        r.fused = std::min(1.0, cfg.w_lex * r.lex_norm + cfg.w_sem * r.sem_norm);
        out.push_back(std::move(r));
    }
    std::stable_sort(out.begin(), out.end(),
                     [](const FusedResult& a, const FusedResult& b) { return a.fused > b.fused; });
    if (out.size() > cfg.final_k) out.resize(cfg.final_k);
    return out;
}

ArmResults HybridSearcher::retrieve(std::string_view query, const FusionConfig& cfg) const {
    cfg.validate();
    ArmResults arms;
    if (text::is_blank(query)) return arms;
    arms.lexical = lexical_.search(query, cfg.arm_k);
    auto q = embedder_.embed(query);
    arms.semantic = vectors_.search(q, cfg.arm_k);
    std::erase_if(arms.semantic, [&](const SemanticHit& h) { return !(h.raw_score > cfg.sem_min_score); });
    return arms;
}

std::vector<FusedResult> HybridSearcher::search(std::string_view query, const FusionConfig& cfg) const {
    auto arms = retrieve(query, cfg);
    return fuse(arms.lexical, arms.semantic, cfg);
}

}  // namespace verifai

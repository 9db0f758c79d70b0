#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "verifai/backends.hpp"
#include "verifai/lexical_index.hpp"
#include "verifai/vector_index.hpp"

namespace verifai {

struct FusionConfig {
    double w_lex = 0.5;
    double w_sem = 0.5;
    std::size_t arm_k = 100;    // candidates fetched per arm (segments for the semantic arm)
    std::size_t final_k = 10;
    /// Semantic hits must score strictly above this to count as retrieved.
    double sem_min_score = 0.0;

    /// Weights in [0,1] summing to 1 (within 1e-9); arm_k and final_k >= 1.
    void validate() const;
};

/// One fused document. lex_raw / sem_raw are empty when the document was
/// not among that arm's candidates (its normalized score is then 0).
struct FusedResult {
    std::string doc_id;
    double lex_norm = 0.0;
    double sem_norm = 0.0;
    double fused = 0.0;
    std::optional<std::uint32_t> best_segment;
    std::optional<double> lex_raw;
    std::optional<double> sem_raw;
};

/// Min-max over the given candidate scores: (s - min) / (max - min).
/// All-equal input (including a single score) maps to 1.0. Empty in, empty out.
std::vector<double> normalize_scores(std::span<const double> scores);

/// Reduces semantic segment hits to per-document maxima, min-max normalizes
/// each arm independently over its candidates, scores absent arms as 0 and
/// combines with the configured weights. Sorted by fused score descending,
/// doc_id ascending; truncated to final_k.
std::vector<FusedResult> fuse(std::span<const LexicalHit> lex, std::span<const SemanticHit> sem,
                              const FusionConfig& cfg);

struct ArmResults {
    std::vector<LexicalHit> lexical;
    std::vector<SemanticHit> semantic;
};

/// Queries both arms for a text query and fuses them. Holds references;
/// the indexes and embedder must outlive it. Safe for concurrent use.
class HybridSearcher {
public:
    HybridSearcher(const LexicalIndex& lexical, const VectorIndex& vectors, const Embedder& embedder)
        : lexical_(lexical), vectors_(vectors), embedder_(embedder) {}

    ArmResults retrieve(std::string_view query, const FusionConfig& cfg) const;
    std::vector<FusedResult> search(std::string_view query, const FusionConfig& cfg) const;

private:
    const LexicalIndex& lexical_;
    const VectorIndex& vectors_;
    const Embedder& embedder_;
};

}  // namespace verifai

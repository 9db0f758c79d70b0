#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "verifai/answer_gen.hpp"
#include "verifai/backends.hpp"
#include "verifai/claims.hpp"
#include "verifai/corpus.hpp"
#include "verifai/feedback.hpp"
#include "verifai/hybrid_search.hpp"
#include "verifai/lexical_index.hpp"
#include "verifai/segmenter.hpp"
#include "verifai/vector_index.hpp"
#include "verifai/verifier.hpp"

namespace verifai {

struct IndexConfig {
    SegmenterConfig segmenter;
    Bm25Params bm25;
    bool quantize = true;
    std::size_t threads = 1;
};

/// Contents of `manifest.json` in an index directory. The directory also
/// holds `lex/` and `vec/`.
struct IndexManifest {
    std::size_t documents = 0;
    std::size_t segments = 0;
    std::size_t dim = 0;
    bool quantized = true;
    std::string embedder;
    SegmenterConfig segmenter;
    Bm25Params bm25;
};

inline constexpr const char* kManifestFile = "manifest.json";

/// Builds both arms for `corpus` into `dir`. Output is byte-identical for
/// identical inputs regardless of thread count.
IndexManifest build_index(const Corpus& corpus, const std::filesystem::path& dir, const Embedder& embedder,
                          const IndexConfig& cfg);

IndexManifest read_manifest(const std::filesystem::path& dir);

/// Rounds to 9 significant digits so serialized scores are stable.
double round9(double v);

struct StageTimings {
    double retrieval_ms = 0.0;
    double generation_ms = 0.0;
    double parsing_ms = 0.0;
    double verification_ms = 0.0;
};

struct AskResult {
    std::vector<FusedResult> retrieval;
    GeneratedAnswer answer;
    ParsedAnswer parsed;
    std::vector<Verdict> verdicts;
    StageTimings timings;
};

struct EngineConfig {
    FusionConfig fusion;
    BackendSettings backends;
    std::size_t evidence_sentences = 1;
};

/// An opened index, its corpus and a set of backends. Immutable after
/// open, so one Engine serves concurrent requests.
class Engine {
public:
    /// Throws IndexError when the index is missing or its dimension does not
    /// match the embedder. The reference embedder takes the index dimension.
    static std::unique_ptr<Engine> open(const std::filesystem::path& index_dir,
                                        const std::filesystem::path& corpus_dir, EngineConfig cfg);

    Engine(Corpus corpus, LexicalIndex lexical, VectorIndex vectors, Backends backends, EngineConfig cfg,
           IndexManifest manifest);
    Engine(const Engine&) = delete;
    Engine& operator=(const Engine&) = delete;

    std::vector<FusedResult> search(std::string_view query, std::size_t k) const;

    /// retrieval -> generation -> parsing -> verification. Throws
    /// ValidationError, NoResultsError (before any generation call) or
    /// StageError naming the failed stage.
    AskResult ask(std::string_view question, std::size_t k = kMaxPromptDocuments) const;

    const Corpus& corpus() const { return corpus_; }
    const LexicalIndex& lexical() const { return lexical_; }
    const VectorIndex& vectors() const { return vectors_; }
    const Backends& backends() const { return backends_; }
    const IndexManifest& manifest() const { return manifest_; }
    const EngineConfig& config() const { return cfg_; }
    const Verifier& verifier() const { return verifier_; }

private:
    Corpus corpus_;
    LexicalIndex lexical_;
    VectorIndex vectors_;
    Backends backends_;
    EngineConfig cfg_;
    IndexManifest manifest_;
    HybridSearcher searcher_;
    AnswerEngine answers_;
    Verifier verifier_;
};

// JSON views. Scores pass through round9; nothing time-dependent is
// included unless asked for.

nlohmann::json fused_to_json(std::span<const FusedResult> results, const Corpus* corpus = nullptr);
nlohmann::json claims_to_json(const ParsedAnswer& parsed);
nlohmann::json verdict_to_json(const Verdict& v);

/// Bundle file: {"question", "docs": [{"index", "doc_id", "title", "abstract"}]}.
/// bundle_from_json also accepts an AskResponse, whose table is under
/// "bundle". Documents without title/abstract are filled from `corpus` when
/// given. Throws ValidationError.
nlohmann::json bundle_to_json(const PromptBundle& bundle);
PromptBundle bundle_from_json(const nlohmann::json& j, const Corpus* corpus = nullptr);

/// Label overrides from the feedback log, layered onto per-reference labels
/// without changing the engine's verdict.
struct OverrideView {
    std::vector<FeedbackEvent> events;
};

nlohmann::json ask_to_json(const AskResult& r, const OverrideView* overrides = nullptr,
                           bool include_timings = false);

}  // namespace verifai

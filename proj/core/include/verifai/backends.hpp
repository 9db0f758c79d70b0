#pragma once

#include <chrono>
#include <cstddef>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace verifai {

using Embedding = std::vector<float>;

// ---------------------------------------------------------------------------
// Model roles
// ---------------------------------------------------------------------------

class Embedder {
public:
    virtual ~Embedder() = default;
    virtual Embedding embed(std::string_view text) const = 0;
    virtual std::size_t dim() const = 0;
    /// "reference" or the endpoint URL; shown by /health and the CLI.
    virtual std::string describe() const = 0;
    virtual bool ready() const { return true; }
};

struct GenerationParams {
    std::size_t max_new_tokens = 1000;
    double repetition_penalty = 1.1;
};

struct Generation {
    std::string text;
    bool truncated = false;
};

class Generator {
public:
    virtual ~Generator() = default;
    virtual Generation generate(std::string_view prompt, const GenerationParams& params) const = 0;
    virtual std::string describe() const = 0;
    virtual bool ready() const { return true; }
};

enum class NliValue { Support, Contradict, NoEvidence };

struct NliLabel {
    NliValue value = NliValue::NoEvidence;
    double confidence = 1.0;
};

/// Canonical wire names: SUPPORT, CONTRADICT, NO_EVIDENCE.
std::string_view to_string(NliValue v);
/// Accepts the canonical names and the long forms "Supports",
/// "Contradicts", "No Evidence" (case-insensitive).
std::optional<NliValue> parse_nli_value(std::string_view s);

class NliClassifier {
public:
    virtual ~NliClassifier() = default;
    virtual NliLabel classify(std::string_view claim, std::string_view evidence_title,
                              std::string_view evidence_abstract) const = 0;
    virtual std::string describe() const = 0;
    virtual bool ready() const { return true; }
};

// ---------------------------------------------------------------------------
// Reference implementations: pure functions of input and configuration.
// ---------------------------------------------------------------------------

/// Hashed bag of words: every analyzed token adds 1 to bucket
/// fnv1a64(token) % dim, then the vector is L2-normalized. Text with no
/// analyzable token embeds to the zero vector.
class HashingEmbedder final : public Embedder {
public:
    explicit HashingEmbedder(std::size_t dim = 64);

    Embedding embed(std::string_view text) const override;
    std::size_t dim() const override { return dim_; }
    std::string describe() const override { return "reference"; }

    static std::size_t bucket(std::string_view token, std::size_t dim);

private:
    std::size_t dim_;
};

/// Template answerer. Reads the question and numbered abstracts back out of
/// the serving prompt and, for each abstract whose content words cover at
/// least `relevance_threshold` of the question's content words, emits that
/// abstract's best-overlapping sentence cited as "[n]".
class ReferenceGenerator final : public Generator {
public:
    static constexpr const char* kNoAnswer =
        "The provided abstracts do not contain enough information to answer the question.";

    explicit ReferenceGenerator(double relevance_threshold = 0.5);

    Generation generate(std::string_view prompt, const GenerationParams& params) const override;
    std::string describe() const override { return "reference"; }

private:
    double threshold_;
};

/// Rule-based NLI, in priority order:
///   1. override table keyed by normalized claim
///   2. normalized claim is a token-aligned substring of title+abstract -> SUPPORT
///   3. claim is an evidence sentence plus one negation ("not"/"no", or
///      "do/does/did not" with the verb's inflection relaxed) -> CONTRADICT
///   4. NO_EVIDENCE
/// Normalization is lowercase with punctuation stripped.
class ReferenceNliClassifier final : public NliClassifier {
public:
    NliLabel classify(std::string_view claim, std::string_view evidence_title,
                      std::string_view evidence_abstract) const override;
    std::string describe() const override { return "reference"; }

    void add_override(std::string_view claim, NliValue value);

private:
    std::map<std::string, NliValue> overrides_;
};

// ---------------------------------------------------------------------------
// HTTP clients. JSON over POST:
//   /embed     {text}                                      -> {values: [..]}
//   /generate  {prompt, max_new_tokens, repetition_penalty} -> {text, truncated?}
//   /nli       {claim, evidence}                            -> {label, confidence}
// The endpoint is a base URL (http://host:port[/prefix]). No retries.
// ---------------------------------------------------------------------------

class HttpEmbedder final : public Embedder {
public:
    HttpEmbedder(std::string endpoint, std::chrono::milliseconds timeout, std::size_t dim);

    Embedding embed(std::string_view text) const override;
    std::size_t dim() const override { return dim_; }
    std::string describe() const override { return endpoint_; }
    bool ready() const override;

private:
    std::string endpoint_;
    std::chrono::milliseconds timeout_;
    std::size_t dim_;
};

class HttpGenerator final : public Generator {
public:
    HttpGenerator(std::string endpoint, std::chrono::milliseconds timeout);

    Generation generate(std::string_view prompt, const GenerationParams& params) const override;
    std::string describe() const override { return endpoint_; }
    bool ready() const override;

private:
    std::string endpoint_;
    std::chrono::milliseconds timeout_;
};

class HttpNliClassifier final : public NliClassifier {
public:
    HttpNliClassifier(std::string endpoint, std::chrono::milliseconds timeout);

    /// evidence is sent as title + " " + abstract.
    NliLabel classify(std::string_view claim, std::string_view evidence_title,
                      std::string_view evidence_abstract) const override;
    std::string describe() const override { return endpoint_; }
    bool ready() const override;

private:
    std::string endpoint_;
    std::chrono::milliseconds timeout_;
};

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

struct BackendConfig {
    enum class Kind { Reference, Http };

    Kind kind = Kind::Reference;
    std::optional<std::string> endpoint;
    std::chrono::milliseconds timeout{30000};
    std::size_t max_new_tokens = 1000;
    double repetition_penalty = 1.1;

    /// endpoint is required iff kind == Http.
    void validate() const;
    GenerationParams generation() const { return {max_new_tokens, repetition_penalty}; }
};

struct BackendSettings {
    BackendConfig embed;
    BackendConfig generate;
    BackendConfig nli;
    std::size_t embedding_dim = 64;

    /// Reads VERIFAI_EMBED_URL, VERIFAI_GEN_URL and VERIFAI_NLI_URL; an unset
    /// or empty variable keeps the reference backend for that role.
    static BackendSettings from_env(BackendSettings base);
    static BackendSettings from_env();
};

struct Backends {
    std::shared_ptr<const Embedder> embedder;
    std::shared_ptr<const Generator> generator;
    std::shared_ptr<const NliClassifier> nli;
    GenerationParams generation;
};

Backends make_backends(const BackendSettings& settings);

}  // namespace verifai

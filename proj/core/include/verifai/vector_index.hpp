#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "verifai/backends.hpp"
#include "verifai/segmenter.hpp"

namespace verifai {

/// Per-dimension affine range for 8-bit scalar quantization.
struct QuantizationParams {
    std::vector<float> lo;
    std::vector<float> hi;

    std::size_t dim() const { return lo.size(); }

    /// Per-dimension min/max over `rows` (all of length dim).
    static QuantizationParams fit(std::span<const Embedding> rows, std::size_t dim);

    bool operator==(const QuantizationParams&) const = default;
};

using QuantizedVector = std::vector<std::uint8_t>;

/// code_i = clamp(round((v_i - lo_i) / (hi_i - lo_i) * 255), 0, 255), with
/// rounding half away from zero and code_i = 0 when hi_i == lo_i. Computed
/// in double precision. Throws ValidationError on non-finite input or a
/// dimension mismatch.
QuantizedVector quantize_vector(std::span<const float> v, const QuantizationParams& p);

/// lo_i + code_i * (hi_i - lo_i) / 255.
std::vector<float> dequantize_vector(std::span<const std::uint8_t> codes, const QuantizationParams& p);

struct SegmentKey {
    std::string doc_id;
    std::uint32_t seg_index = 0;
};

struct SemanticHit {
    std::string doc_id;
    std::uint32_t seg_index = 0;
    double raw_score = 0.0;
};

struct VectorBuildOptions {
    bool quantize = true;
    std::size_t threads = 1;
};

/// Flat dot-product index over segment embeddings.
///
///   meta    dim, row count, metric, quantization flag, per-dim lo/hi
///   codes   row-major u8 codes (quantized) or f32 values, after an 8-byte header
///   idmap   (doc_id, seg_index) per row
///
/// Little-endian fixed-width integers throughout. The codes file is
/// memory-mapped and scanned in place; nothing copies the value region.
/// Output files are a pure function of the inputs.
class VectorIndex {
public:
    static constexpr std::uint32_t kFormatVersion = 1;

    /// Writes an index from precomputed vectors. Throws IndexError on a
    /// dimension mismatch (naming the row) or non-finite values.
    static void write(const std::filesystem::path& dir, std::span<const SegmentKey> keys,
                      std::span<const Embedding> vectors, bool quantize);

    /// Embeds every segment (fanned out over opts.threads workers) and writes
    /// the index in segment order.
    static void build(const std::filesystem::path& dir, const std::vector<Segment>& segments,
                      const Embedder& embedder, const VectorBuildOptions& opts = {});

    static VectorIndex open(const std::filesystem::path& dir);

    VectorIndex(VectorIndex&&) noexcept;
    VectorIndex& operator=(VectorIndex&&) noexcept;
    ~VectorIndex();

    /// Top-k rows by dot product of the float query with the stored
    /// (dequantized) vectors; ties by (doc_id, seg_index) ascending.
    std::vector<SemanticHit> search(std::span<const float> query, std::size_t k) const;

    std::size_t dim() const;
    std::size_t size() const;
    bool quantized() const;
    const QuantizationParams& quantization() const;
    const SegmentKey& key(std::size_t row) const;

    /// Bytes of stored vector values, excluding headers: dim * rows for
    /// quantized indexes, 4 * dim * rows otherwise.
    std::uint64_t value_region_bytes() const;

private:
    struct Impl;
    explicit VectorIndex(std::unique_ptr<Impl> impl);
    std::unique_ptr<Impl> impl_;
};

}  // namespace verifai

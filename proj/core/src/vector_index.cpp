#include "verifai/vector_index.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <queue>
#include <thread>

#include "binary_io.hpp"
#include "verifai/error.hpp"

namespace verifai {

namespace {

constexpr detail::Magic kMetaMagic = {'V', 'V', 'M', 'T'};
constexpr detail::Magic kCodesMagic = {'V', 'V', 'C', 'D'};
constexpr detail::Magic kIdsMagic = {'V', 'V', 'I', 'D'};
constexpr std::size_t kHeaderBytes = 8;
constexpr std::uint32_t kMetricDot = 0;

void check_finite(std::span<const float> v, const std::string& what) {
    for (float x : v)
        if (!std::isfinite(x)) throw ValidationError(what + ": non-finite value");
}

}  // namespace

QuantizationParams QuantizationParams::fit(std::span<const Embedding> rows, std::size_t dim) {
    QuantizationParams p;
    p.lo.assign(dim, 0.0f);
    p.hi.assign(dim, 0.0f);
    if (rows.empty()) return p;
    p.lo = rows.front();
    p.hi = rows.front();
    for (const auto& r : rows) {
        for (std::size_t i = 0; i < dim; ++i) {
            p.lo[i] = std::min(p.lo[i], r[i]);
            p.hi[i] = std::max(p.hi[i], r[i]);
        }
    }
    return p;
}

QuantizedVector quantize_vector(std::span<const float> v, const QuantizationParams& p) {
    if (v.size() != p.dim())
        throw ValidationError("quantize: vector dim " + std::to_string(v.size()) + " != params dim " +
                              std::to_string(p.dim()));
    QuantizedVector codes(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (!std::isfinite(v[i])) throw ValidationError("quantize: non-finite value at dimension " + std::to_string(i));
        const double lo = p.lo[i];
        const double hi = p.hi[i];
        if (hi == lo) {
            codes[i] = 0;
            continue;
        }
        double scaled = std::round((static_cast<double>(v[i]) - lo) / (hi - lo) * 255.0);
        codes[i] = static_cast<std::uint8_t>(std::clamp(scaled, 0.0, 255.0));
    }
    return codes;
}

std::vector<float> dequantize_vector(std::span<const std::uint8_t> codes, const QuantizationParams& p) {
    if (codes.size() != p.dim()) throw ValidationError("dequantize: dimension mismatch");
    std::vector<float> out(codes.size());
    for (std::size_t i = 0; i < codes.size(); ++i) {
        const double lo = p.lo[i];
        const double step = (static_cast<double>(p.hi[i]) - lo) / 255.0;
        out[i] = static_cast<float>(lo + codes[i] * step);
    }
    return out;
}

struct VectorIndex::Impl {
    std::size_t dim = 0;
    std::size_t rows = 0;
    bool quantized = false;
    QuantizationParams params;
    std::vector<SegmentKey> keys;
    detail::MappedFile codes;

    const std::uint8_t* region() const { return codes.bytes().data() + kHeaderBytes; }
};

VectorIndex::VectorIndex(std::unique_ptr<Impl> impl) : impl_(std::move(impl)) {}
VectorIndex::VectorIndex(VectorIndex&&) noexcept = default;
VectorIndex& VectorIndex::operator=(VectorIndex&&) noexcept = default;
VectorIndex::~VectorIndex() = default;

void VectorIndex::write(const std::filesystem::path& dir, std::span<const SegmentKey> keys,
                        std::span<const Embedding> vectors, bool quantize) {
    if (keys.size() != vectors.size()) throw IndexError("vector index: key and vector counts differ");
    const std::size_t dim = vectors.empty() ? 0 : vectors.front().size();
    for (std::size_t r = 0; r < vectors.size(); ++r) {
        std::string what = "segment " + keys[r].doc_id + "#" + std::to_string(keys[r].seg_index);
        if (vectors[r].size() != dim)
            throw IndexError(what + ": embedding dim " + std::to_string(vectors[r].size()) + " != " +
                             std::to_string(dim));
        try {
            check_finite(vectors[r], what);
        } catch (const ValidationError& e) {
            throw IndexError(e.what());
        }
    }

    std::filesystem::create_directories(dir);
    QuantizationParams params;
    if (quantize) params = QuantizationParams::fit(vectors, dim);

    detail::BinaryWriter meta(dir / "meta");
    meta.header(kMetaMagic, kFormatVersion);
    meta.u32(static_cast<std::uint32_t>(dim));
    meta.u64(vectors.size());
    meta.u32(kMetricDot);
    meta.u8(quantize ? 1 : 0);
    if (quantize) {
        for (float x : params.lo) meta.f32(x);
        for (float x : params.hi) meta.f32(x);
    }
    meta.close();

    detail::BinaryWriter codes(dir / "codes");
    codes.header(kCodesMagic, kFormatVersion);
    for (const auto& v : vectors) {
        if (quantize) {
            codes.bytes(quantize_vector(v, params));
        } else {
            for (float x : v) codes.f32(x);
        }
    }
    codes.close();

    detail::BinaryWriter ids(dir / "idmap");
    ids.header(kIdsMagic, kFormatVersion);
    ids.u64(keys.size());
    for (const auto& k : keys) {
        ids.string(k.doc_id);
        ids.u32(k.seg_index);
    }
    ids.close();
}

void VectorIndex::build(const std::filesystem::path& dir, const std::vector<Segment>& segments,
                        const Embedder& embedder, const VectorBuildOptions& opts) {
    std::vector<Embedding> vectors(segments.size());
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mu;

    auto worker = [&] {
        for (std::size_t i = next++; i < segments.size(); i = next++) {
            try {
                vectors[i] = embedder.embed(segments[i].text);
            } catch (...) {
                std::lock_guard lock(failure_mu);
                if (!failure) failure = std::current_exception();
                next = segments.size();
            }
        }
    };
    std::size_t threads = std::max<std::size_t>(1, std::min(opts.threads, segments.size()));
    if (threads == 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    }
    if (failure) std::rethrow_exception(failure);

    std::vector<SegmentKey> keys;
    keys.reserve(segments.size());
    for (const auto& s : segments) keys.push_back({s.doc_id, s.seg_index});
    write(dir, keys, vectors, opts.quantize);
}

VectorIndex VectorIndex::open(const std::filesystem::path& dir) {
    auto impl = std::make_unique<Impl>();
    {
        detail::MappedFile f(dir / "meta");
        detail::BinaryReader r(f.bytes(), (dir / "meta").string());
        r.expect_header(kMetaMagic, kFormatVersion);
        impl->dim = r.u32();
        impl->rows = r.u64();
        if (r.u32() != kMetricDot) throw IndexError((dir / "meta").string() + ": unsupported metric");
        impl->quantized = r.u8() != 0;
        if (impl->quantized) {
            impl->params.lo.resize(impl->dim);
            impl->params.hi.resize(impl->dim);
            for (auto& x : impl->params.lo) x = r.f32();
            for (auto& x : impl->params.hi) x = r.f32();
        }
    }
    {
        detail::MappedFile f(dir / "idmap");
        detail::BinaryReader r(f.bytes(), (dir / "idmap").string());
        r.expect_header(kIdsMagic, kFormatVersion);
        auto n = r.u64();
        if (n != impl->rows) throw IndexError((dir / "idmap").string() + ": row count disagrees with meta");
        impl->keys.reserve(n);
        for (std::uint64_t i = 0; i < n; ++i) {
            SegmentKey k;
            k.doc_id = r.string();
            k.seg_index = r.u32();
            impl->keys.push_back(std::move(k));
        }
    }
    impl->codes = detail::MappedFile(dir / "codes");
    detail::BinaryReader r(impl->codes.bytes(), (dir / "codes").string());
    r.expect_header(kCodesMagic, kFormatVersion);
    const std::uint64_t expected = static_cast<std::uint64_t>(impl->rows) * impl->dim * (impl->quantized ? 1 : 4);
    if (r.remaining() != expected) throw IndexError((dir / "codes").string() + ": value region size mismatch");
    return VectorIndex(std::move(impl));
}

std::vector<SemanticHit> VectorIndex::search(std::span<const float> query, std::size_t k) const {
    const auto& im = *impl_;
    if (k == 0) throw ValidationError("k must be at least 1");
    if (query.size() != im.dim)
        throw ValidationError("query dim " + std::to_string(query.size()) + " != index dim " + std::to_string(im.dim));

    auto better = [&](std::size_t a, double sa, std::size_t b, double sb) {
        if (sa != sb) return sa > sb;
        const auto& ka = im.keys[a];
        const auto& kb = im.keys[b];
        if (ka.doc_id != kb.doc_id) return ka.doc_id < kb.doc_id;
        return ka.seg_index < kb.seg_index;
    };
    using Entry = std::pair<double, std::size_t>;
    // Worst retained entry on top.
    auto cmp = [&](const Entry& x, const Entry& y) { return better(x.second, x.first, y.second, y.first); };
    std::priority_queue<Entry, std::vector<Entry>, decltype(cmp)> heap(cmp);

    auto offer = [&](std::size_t row, double score) {
        if (heap.size() < k) {
            heap.emplace(score, row);
        } else if (better(row, score, heap.top().second, heap.top().first)) {
            heap.pop();
            heap.emplace(score, row);
        }
    };

    const std::uint8_t* region = im.region();
    if (im.quantized) {
        // q . (lo + c * step) == q . lo + (q * step) . c
        std::vector<double> weight(im.dim);
        double base = 0.0;
        for (std::size_t i = 0; i < im.dim; ++i) {
            const double lo = im.params.lo[i];
            const double step = (static_cast<double>(im.params.hi[i]) - lo) / 255.0;
            base += static_cast<double>(query[i]) * lo;
            weight[i] = static_cast<double>(query[i]) * step;
        }
        for (std::size_t row = 0; row < im.rows; ++row) {
            const std::uint8_t* c = region + row * im.dim;
            double s = base;
            for (std::size_t i = 0; i < im.dim; ++i) s += weight[i] * c[i];
            offer(row, s);
        }
    } else {
        for (std::size_t row = 0; row < im.rows; ++row) {
            const std::uint8_t* v = region + row * im.dim * 4;
            double s = 0.0;
            for (std::size_t i = 0; i < im.dim; ++i)
                s += static_cast<double>(query[i]) * static_cast<double>(detail::load_f32_le(v + 4 * i));
            offer(row, s);
        }
    }

    std::vector<SemanticHit> hits(heap.size());
    for (std::size_t i = hits.size(); i-- > 0;) {
        auto [score, row] = heap.top();
        heap.pop();
        hits[i] = {im.keys[row].doc_id, im.keys[row].seg_index, score};
    }
    return hits;
}

std::size_t VectorIndex::dim() const { return impl_->dim; }
std::size_t VectorIndex::size() const { return impl_->rows; }
bool VectorIndex::quantized() const { return impl_->quantized; }
const QuantizationParams& VectorIndex::quantization() const { return impl_->params; }
const SegmentKey& VectorIndex::key(std::size_t row) const { return impl_->keys.at(row); }

std::uint64_t VectorIndex::value_region_bytes() const {
    return static_cast<std::uint64_t>(impl_->rows) * impl_->dim * (impl_->quantized ? 1 : 4);
}

}  // namespace verifai

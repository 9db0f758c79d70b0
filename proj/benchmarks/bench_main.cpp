#include <benchmark/benchmark.h>

#include <filesystem>
#include <map>
#include <optional>
#include <tuple>
#include <random>
#include <string>
#include <unistd.h>

#include <verifai/backends.hpp>
#include <verifai/lexical_index.hpp>
#include <verifai/segmenter.hpp>
#include <verifai/vector_index.hpp>

using namespace verifai;
namespace fs = std::filesystem;

namespace {

fs::path scratch_root() { return fs::temp_directory_path() / ("verifai_bench_" + std::to_string(::getpid())); }

struct ScratchCleanup {
    ~ScratchCleanup() {
        std::error_code ec;
        fs::remove_all(scratch_root(), ec);
    }
} cleanup;

fs::path scratch(const std::string& name) {
    fs::create_directories(scratch_root());
    return scratch_root() / name;
}

std::vector<Embedding> normal_rows(std::size_t n, std::size_t dim, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<float> nd;
    std::vector<Embedding> rows(n, Embedding(dim));
    for (auto& r : rows)
        for (auto& x : r) x = nd(rng);
    return rows;
}

// One index per (quantized, n, dim) for the whole run.
const VectorIndex& vector_index(bool quantized, std::size_t n, std::size_t dim) {
    static std::map<std::tuple<bool, std::size_t, std::size_t>, VectorIndex> cache;
    auto key = std::make_tuple(quantized, n, dim);
    if (auto it = cache.find(key); it != cache.end()) return it->second;
    auto dir = scratch((quantized ? "q_" : "f_") + std::to_string(n) + "_" + std::to_string(dim));
    std::vector<SegmentKey> keys;
    for (std::size_t i = 0; i < n; ++i) keys.push_back({"d" + std::to_string(i), 0});
    VectorIndex::write(dir, keys, normal_rows(n, dim, 1), quantized);
    return cache.emplace(key, VectorIndex::open(dir)).first->second;
}

void BM_VectorSearch(benchmark::State& state) {
    const bool quantized = state.range(0) != 0;
    const auto n = static_cast<std::size_t>(state.range(1));
    const std::size_t dim = 64;
    const auto& idx = vector_index(quantized, n, dim);
    auto queries = normal_rows(64, dim, 2);
    std::size_t i = 0;
    for (auto _ : state) benchmark::DoNotOptimize(idx.search(queries[i++ % queries.size()], 10));
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n));
    state.SetLabel(quantized ? "int8" : "float32");
}
BENCHMARK(BM_VectorSearch)->ArgsProduct({{0, 1}, {10000, 100000}})->Unit(benchmark::kMicrosecond);

void BM_LexicalSearch(benchmark::State& state) {
    static std::optional<LexicalIndex> idx;
    const std::size_t vocab = 5000;
    std::mt19937_64 rng(3);
    auto word = [&] {
        double u = std::uniform_real_distribution<double>(0, 1)(rng);
        return "t" + std::to_string(static_cast<std::size_t>(u * u * vocab));
    };
    if (!idx) {
        std::vector<DocumentRecord> docs;
        for (int d = 0; d < 20000; ++d) {
            std::string abstract;
            for (int i = 0; i < 150; ++i) abstract += word() + " ";
            docs.push_back(DocumentRecord::make("p" + std::to_string(d), word() + " " + word(), abstract));
        }
        auto dir = scratch("lex");
        LexicalIndex::build(docs, dir);
        idx.emplace(LexicalIndex::open(dir));
    }
    std::vector<std::string> queries;
    for (int i = 0; i < 64; ++i) queries.push_back(word() + " " + word() + " " + word());
    std::size_t i = 0;
    for (auto _ : state) benchmark::DoNotOptimize(idx->search(queries[i++ % queries.size()], 100));
}
BENCHMARK(BM_LexicalSearch)->Unit(benchmark::kMicrosecond);

void BM_Segment(benchmark::State& state) {
    const auto tokens = static_cast<std::size_t>(state.range(0));
    std::string abstract;
    for (std::size_t i = 0; i < tokens; ++i) abstract += "word" + std::to_string(i % 97) + " ";
    auto doc = DocumentRecord::make("d", "Title", abstract);
    WhitespaceTokenizer tok;
    for (auto _ : state) benchmark::DoNotOptimize(segment(doc, {512, 100}, tok));
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(tokens));
}
BENCHMARK(BM_Segment)->Arg(300)->Arg(5000);

void BM_Embed(benchmark::State& state) {
    HashingEmbedder emb(64);
    std::string text;
    for (int i = 0; i < 512; ++i) text += "token" + std::to_string(i) + " ";
    for (auto _ : state) benchmark::DoNotOptimize(emb.embed(text));
}
BENCHMARK(BM_Embed);

}  // namespace
BENCHMARK_MAIN();

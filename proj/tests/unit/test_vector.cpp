#include <gtest/gtest.h>
#include <sys/mman.h>
#include <sys/resource.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <random>

#include <verifai/error.hpp>
#include <verifai/vector_index.hpp>

#include "test_support.hpp"

using namespace verifai;
using verifai::testing::TempDir;

namespace {

QuantizationParams params(std::vector<float> lo, std::vector<float> hi) { return {std::move(lo), std::move(hi)}; }

std::vector<Embedding> normal_rows(std::size_t n, std::size_t dim, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<float> nd(0.0f, 1.0f);
    std::vector<Embedding> rows(n, Embedding(dim));
    for (auto& r : rows)
        for (auto& x : r) x = nd(rng);
    return rows;
}

std::vector<SegmentKey> keys_for(std::size_t n) {
    std::vector<SegmentKey> k;
    for (std::size_t i = 0; i < n; ++i) k.push_back({"d" + std::to_string(i / 3), static_cast<std::uint32_t>(i % 3)});
    return k;
}

std::size_t vm_data_bytes() {
    std::ifstream in("/proc/self/status");
    std::string line;
    while (std::getline(in, line))
        if (line.rfind("VmData:", 0) == 0) return std::stoull(line.substr(7)) * 1024;
    return 0;
}

}  // namespace

TEST(Quantize, Endpoints) {
    auto p = params({-2.0f, 0.0f}, {2.0f, 10.0f});
    EXPECT_EQ(quantize_vector(std::vector<float>{-2.0f, 0.0f}, p), (QuantizedVector{0, 0}));
    EXPECT_EQ(quantize_vector(std::vector<float>{2.0f, 10.0f}, p), (QuantizedVector{255, 255}));
}

TEST(Quantize, MidpointRoundsHalfAwayFromZero) {
    // (0 - -1) / 2 * 255 = 127.5 -> 128
    EXPECT_EQ(quantize_vector(std::vector<float>{0.0f}, params({-1.0f}, {1.0f})), (QuantizedVector{128}));
}

TEST(Quantize, DegenerateDimensionAndClamp) {
    auto p = params({3.0f, 0.0f}, {3.0f, 1.0f});
    EXPECT_EQ(quantize_vector(std::vector<float>{3.0f, 5.0f}, p), (QuantizedVector{0, 255}));
    EXPECT_EQ(quantize_vector(std::vector<float>{9.0f, -5.0f}, p), (QuantizedVector{0, 0}));
}

TEST(Quantize, NonFiniteAndMismatchRejected) {
    auto p = params({0.0f}, {1.0f});
    EXPECT_THROW(quantize_vector(std::vector<float>{std::numeric_limits<float>::quiet_NaN()}, p), ValidationError);
    EXPECT_THROW(quantize_vector(std::vector<float>{std::numeric_limits<float>::infinity()}, p), ValidationError);
    EXPECT_THROW(quantize_vector(std::vector<float>{0.1f, 0.2f}, p), ValidationError);
}

TEST(Quantize, RoundTripWithinHalfStep) {
    const std::vector<std::pair<float, float>> ranges = {{-1.0f, 1.0f}, {0.0f, 1e-3f}, {-50.0f, 7.5f}, {2.0f, 2.5f}};
    for (auto [lo, hi] : ranges) {
        auto p = params({lo}, {hi});
        const double half = (static_cast<double>(hi) - lo) / 255.0 / 2.0;
        for (int i = 0; i <= 2000; ++i) {
            float v = lo + (hi - lo) * static_cast<float>(i) / 2000.0f;
            v = std::min(std::max(v, lo), hi);
            auto back = dequantize_vector(quantize_vector(std::vector<float>{v}, p), p)[0];
            double ulp = std::abs(std::nextafter(back, std::numeric_limits<float>::infinity()) - back);
            EXPECT_LE(std::abs(static_cast<double>(back) - v), half + 2 * ulp) << lo << " " << hi << " " << v;
        }
    }
}

TEST(VectorIndex, OrthogonalQueryRanksItselfFirst) {
    TempDir dir;
    std::vector<Embedding> rows = {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
    std::vector<SegmentKey> keys = {{"a", 0}, {"b", 0}, {"c", 0}};
    VectorIndex::write(dir / "vec", keys, rows, true);
    auto idx = VectorIndex::open(dir / "vec");
    for (std::size_t i = 0; i < 3; ++i) {
        auto hits = idx.search(rows[i], 3);
        ASSERT_EQ(hits.size(), 3u);
        EXPECT_EQ(hits[0].doc_id, keys[i].doc_id);
    }
}

TEST(VectorIndex, FloatSearchEqualsExhaustiveRanking) {
    TempDir dir;
    auto rows = normal_rows(3000, 16, 5);
    auto keys = keys_for(rows.size());
    VectorIndex::write(dir / "vec", keys, rows, false);
    auto idx = VectorIndex::open(dir / "vec");
    auto queries = normal_rows(20, 16, 6);
    for (const auto& q : queries) {
        std::vector<std::pair<double, std::size_t>> all;
        for (std::size_t i = 0; i < rows.size(); ++i) all.push_back({verifai::testing::dot(q, rows[i]), i});
        std::sort(all.begin(), all.end(), [&](auto& a, auto& b) {
            if (a.first != b.first) return a.first > b.first;
            return std::tie(keys[a.second].doc_id, keys[a.second].seg_index) <
                   std::tie(keys[b.second].doc_id, keys[b.second].seg_index);
        });
        auto hits = idx.search(q, 25);
        ASSERT_EQ(hits.size(), 25u);
        for (std::size_t r = 0; r < 25; ++r) {
            EXPECT_EQ(hits[r].doc_id, keys[all[r].second].doc_id);
            EXPECT_EQ(hits[r].seg_index, keys[all[r].second].seg_index);
            EXPECT_EQ(hits[r].raw_score, all[r].first);
        }
    }
}

TEST(VectorIndex, QuantizedScoresMatchDequantizedDotProduct) {
    TempDir dir;
    auto rows = normal_rows(200, 8, 9);
    VectorIndex::write(dir / "vec", keys_for(rows.size()), rows, true);
    auto idx = VectorIndex::open(dir / "vec");
    auto q = normal_rows(1, 8, 10)[0];
    auto hits = idx.search(q, rows.size());
    ASSERT_EQ(hits.size(), rows.size());
    const auto& p = idx.quantization();
    for (const auto& h : hits) {
        std::size_t row = 0;
        while (idx.key(row).doc_id != h.doc_id || idx.key(row).seg_index != h.seg_index) ++row;
        auto deq = dequantize_vector(quantize_vector(rows[row], p), p);
        EXPECT_NEAR(h.raw_score, verifai::testing::dot(q, deq), 1e-4);
    }
}

TEST(VectorIndex, ValueRegionIsOneBytePerDimension) {
    TempDir dir;
    auto rows = normal_rows(100, 64, 1);
    VectorIndex::write(dir / "q", keys_for(100), rows, true);
    VectorIndex::write(dir / "f", keys_for(100), rows, false);
    auto q = VectorIndex::open(dir / "q");
    auto f = VectorIndex::open(dir / "f");
    EXPECT_EQ(q.value_region_bytes(), 64u * 100u);
    EXPECT_EQ(f.value_region_bytes(), 4u * 64u * 100u);
    EXPECT_EQ(std::filesystem::file_size(dir / "q" / "codes") - 8, q.value_region_bytes());
}

TEST(VectorIndex, DimensionMismatchNamesSegment) {
    TempDir dir;
    std::vector<Embedding> rows = {{1, 0}, {1, 0, 0}};
    std::vector<SegmentKey> keys = {{"a", 0}, {"bad", 4}};
    try {
        VectorIndex::write(dir / "vec", keys, rows, true);
        FAIL();
    } catch (const IndexError& e) {
        EXPECT_NE(std::string(e.what()).find("bad"), std::string::npos) << e.what();
    }
}

TEST(VectorIndex, QueryDimensionMismatchRejected) {
    TempDir dir;
    VectorIndex::write(dir / "vec", keys_for(3), normal_rows(3, 4, 2), true);
    auto idx = VectorIndex::open(dir / "vec");
    EXPECT_THROW(idx.search(std::vector<float>{1, 2}, 1), ValidationError);
}

TEST(VectorIndex, RebuildIsByteIdentical) {
    TempDir dir;
    auto rows = normal_rows(500, 12, 3);
    VectorIndex::write(dir / "a", keys_for(500), rows, true);
    VectorIndex::write(dir / "b", keys_for(500), rows, true);
    for (const char* f : {"meta", "codes", "idmap"})
        EXPECT_EQ(verifai::testing::read_file(dir / "a" / f), verifai::testing::read_file(dir / "b" / f)) << f;
}

TEST(VectorIndex, BuildIsThreadCountIndependent) {
    TempDir dir;
    std::vector<Segment> segs;
    for (int i = 0; i < 200; ++i)
        segs.push_back({"doc" + std::to_string(i), 0, 0, 3, "word" + std::to_string(i) + " common text"});
    HashingEmbedder emb(32);
    VectorIndex::build(dir / "one", segs, emb, {true, 1});
    VectorIndex::build(dir / "many", segs, emb, {true, 8});
    for (const char* f : {"meta", "codes", "idmap"})
        EXPECT_EQ(verifai::testing::read_file(dir / "one" / f), verifai::testing::read_file(dir / "many" / f)) << f;
}

// The codes file is larger than the data budget given to the child, yet
// queries succeed because the file is mapped rather than read into memory.
TEST(VectorIndex, SearchWorksUnderDataLimitSmallerThanCodes) {
    TempDir dir;
    const std::size_t dim = 512, n = 60000;
    {
        auto rows = normal_rows(n, dim, 4);
        VectorIndex::write(dir / "vec", keys_for(n), rows, true);
    }
    const auto codes_bytes = std::filesystem::file_size(dir / "vec" / "codes");
    ASSERT_GT(codes_bytes, 2u * 12 * 1024 * 1024);  // well beyond the child's allowance

    pid_t pid = ::fork();
    ASSERT_GE(pid, 0);
    if (pid == 0) {
        const rlim_t budget = vm_data_bytes() + 12 * 1024 * 1024;
        rlimit lim{budget, budget};
        if (::setrlimit(RLIMIT_DATA, &lim) != 0) ::_exit(10);
        // Control: private anonymous memory the size of the codes (what a
        // heap copy needs) does not fit the budget. mmap directly, since
        // malloc may reuse heap pages already counted in VmData.
        void* copy = ::mmap(nullptr, codes_bytes, PROT_READ | PROT_WRITE, MAP_PRIVATE | MAP_ANONYMOUS, -1, 0);
        if (copy != MAP_FAILED) ::_exit(11);
        try {
            auto idx = VectorIndex::open(dir / "vec");
            std::vector<float> q(dim, 0.01f);
            auto hits = idx.search(q, 10);
            ::_exit(hits.size() == 10 ? 0 : 12);
        } catch (...) {
            ::_exit(13);
        }
    }
    int status = 0;
    ::waitpid(pid, &status, 0);
    ASSERT_TRUE(WIFEXITED(status));
    EXPECT_EQ(WEXITSTATUS(status), 0);
}

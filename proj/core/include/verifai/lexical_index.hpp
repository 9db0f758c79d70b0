#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "verifai/corpus.hpp"

namespace verifai {

struct Bm25Params {
    double k1 = 1.2;
    double b = 0.75;
};

struct LexicalHit {
    std::string doc_id;
    double raw_score = 0.0;
};

/// Whole-document BM25 index stored under one directory:
///
///   terms.bin     sorted term dictionary (term, df, postings offset)
///   postings.bin  (doc ordinal, tf) pairs, u32 each, grouped by term
///   doclens.bin   BM25 parameters and per-document token counts
///   ids.bin       doc ordinal -> doc_id
///
/// Every file starts with 4 magic bytes and a u32 format version; all
/// integers are little-endian. Postings stay memory-mapped after open; the
/// rest is loaded. An opened index is immutable and safe to share between
/// threads.
class LexicalIndex {
public:
    static constexpr std::uint32_t kFormatVersion = 1;

    /// Throws IndexError on an empty corpus or duplicate doc_ids.
    static void build(const std::vector<DocumentRecord>& corpus, const std::filesystem::path& dir,
                      const Bm25Params& params = {});
    static LexicalIndex open(const std::filesystem::path& dir);

    LexicalIndex(LexicalIndex&&) noexcept;
    LexicalIndex& operator=(LexicalIndex&&) noexcept;
    ~LexicalIndex();

    /// Top-k documents containing at least one query term, by BM25 score
    /// descending and doc_id ascending. Each distinct query term counts once.
    /// Queries that analyze to nothing return an empty result.
    std::vector<LexicalHit> search(std::string_view query, std::size_t k) const;

    std::size_t size() const;
    std::size_t vocabulary_size() const;
    double average_length() const;
    const Bm25Params& params() const;
    std::uint32_t document_frequency(std::string_view term) const;
    const std::string& doc_id(std::uint32_t ordinal) const;

private:
    struct Impl;
    explicit LexicalIndex(std::unique_ptr<Impl> impl);
    std::unique_ptr<Impl> impl_;
};

}  // namespace verifai

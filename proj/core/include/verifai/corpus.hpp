#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace verifai {

/// One corpus article in canonical form. `text` is always
/// `title + " " + abstract`; it is what both indexes see.
struct DocumentRecord {
    std::string doc_id;
    std::string title;
    std::string abstract;
    std::string text;

    static DocumentRecord make(std::string doc_id, std::string title, std::string abstract);

    bool operator==(const DocumentRecord&) const = default;
};

struct CorpusStats {
    std::uint64_t total_seen = 0;
    std::uint64_t kept = 0;
    std::uint64_t excluded_no_abstract = 0;

    /// kept / total_seen, 0 for an empty input.
    double kept_fraction() const {
        return total_seen == 0 ? 0.0 : static_cast<double>(kept) / static_cast<double>(total_seen);
    }

    bool operator==(const CorpusStats&) const = default;
};

struct IngestResult {
    std::vector<DocumentRecord> documents;
    CorpusStats stats;
};

/// Streaming ingestion over one or more JSONL sources. Each line is an
/// object with `doc_id`, `title` and `abstract`; records whose abstract is
/// missing or blank are counted and dropped. doc_id uniqueness is enforced
/// across every source fed to the same ingestor.
class CorpusIngestor {
public:
    void add_stream(std::istream& in, std::string_view source_name);
    void add_file(const std::filesystem::path& path);

    const CorpusStats& stats() const { return result_.stats; }
    IngestResult finish() &&;

private:
    void add_line(std::string_view line, std::string_view source, std::uint64_t line_no);

    IngestResult result_;
    std::unordered_set<std::string> seen_ids_;
};

IngestResult ingest_corpus(std::istream& in, std::string_view source_name = "<stream>");
IngestResult ingest_files(const std::vector<std::filesystem::path>& inputs);

/// Single-line JSON rendering of the stats, as printed by `verifai ingest`.
std::string stats_to_json(const CorpusStats& stats);

/// An ingested corpus directory: `documents.jsonl` plus `stats.json`.
class Corpus {
public:
    static constexpr const char* kDocumentsFile = "documents.jsonl";
    static constexpr const char* kStatsFile = "stats.json";

    Corpus() = default;
    explicit Corpus(std::vector<DocumentRecord> documents);

    static Corpus load(const std::filesystem::path& dir);
    static void write(const std::filesystem::path& dir, const IngestResult& result);

    const std::vector<DocumentRecord>& documents() const { return documents_; }
    std::size_t size() const { return documents_.size(); }
    bool empty() const { return documents_.empty(); }

    /// nullptr when the ID is unknown.
    const DocumentRecord* find(std::string_view doc_id) const;

private:
    std::vector<DocumentRecord> documents_;
    std::unordered_map<std::string, std::size_t> by_id_;
};

}  // namespace verifai

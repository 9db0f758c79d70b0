#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "verifai/backends.hpp"

namespace verifai::scifact {

struct EvidenceDoc {
    std::string doc_id;
    std::string title;
    std::string abstract;

    bool operator==(const EvidenceDoc&) const = default;
};

/// One (claim, single evidence document, label) training/evaluation pair.
struct NliExample {
    std::string claim;
    EvidenceDoc doc;
    NliValue label = NliValue::NoEvidence;

    bool operator==(const NliExample&) const = default;
};

/// A claim as found in the source data: possibly repeated, possibly citing
/// several documents.
struct RawClaimEntry {
    std::string claim;
    NliValue label = NliValue::NoEvidence;
    std::vector<EvidenceDoc> docs;
};

// Label order used for every per-label table: NO_EVIDENCE, SUPPORT, CONTRADICT.
inline constexpr std::array<NliValue, 3> kLabels = {NliValue::NoEvidence, NliValue::Support, NliValue::Contradict};
std::size_t label_index(NliValue v);

struct CleanResult {
    std::vector<NliExample> examples;
    std::size_t dropped_no_citation = 0;
    std::size_t duplicates_removed = 0;
};

/// Splits every entry citing m documents into m single-document examples,
/// then drops exact duplicates keyed on (whitespace-normalized claim,
/// doc_id, label), keeping first occurrences in input order. Entries with
/// no citation are dropped and counted. Idempotent.
CleanResult clean(std::span<const RawClaimEntry> raw);

/// Native raw format, one JSON object per line:
///   {"claim": "...", "label": "SUPPORT", "docs": [{"doc_id", "title", "abstract"}]}
std::vector<RawClaimEntry> read_raw_entries(std::istream& in);

/// The original SciFact release: a claims JSONL (`claim`, `evidence`,
/// `cited_doc_ids`) plus the corpus JSONL (`doc_id`, `title`, `abstract` as a
/// sentence list). Evidence documents take their annotated label; cited
/// documents without evidence form one NO_EVIDENCE entry per claim.
std::vector<RawClaimEntry> read_scifact_release(const std::filesystem::path& claims,
                                                const std::filesystem::path& corpus);

/// Example JSONL: {"claim", "doc_id", "title", "abstract", "label"} per line.
std::vector<NliExample> read_examples(std::istream& in);
void write_examples(std::ostream& out, std::span<const NliExample> examples);
std::string example_to_json(const NliExample& ex);

inline constexpr std::uint64_t kDefaultSeed = 20240401;

struct Split {
    std::vector<NliExample> train;
    std::vector<NliExample> validation;
    std::vector<NliExample> test;
};

/// Seeded, label-stratified split. Split sizes are floor(n * fraction) for
/// validation and test, the remainder for train. Per-label counts in every
/// split are within one example of the global label ratio. Each split keeps
/// input order.
Split split_examples(std::span<const NliExample> examples, std::uint64_t seed = kDefaultSeed,
                     double validation_fraction = 0.1, double test_fraction = 0.1);

using LabelCounts = std::array<std::size_t, 3>;
LabelCounts count_labels(std::span<const NliExample> examples);

/// Plain-text table of per-split sizes and label percentages.
std::string split_report(std::span<const NliExample> all, const Split& split);

using Confusion = std::array<std::array<std::size_t, 3>, 3>;  // [gold][predicted]

struct LabelMetrics {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    std::size_t support = 0;
};

struct NliMetrics {
    Confusion confusion{};
    std::array<LabelMetrics, 3> per_label{};
    LabelMetrics weighted;  // support-weighted averages
    double accuracy = 0.0;
    std::size_t total = 0;
};

/// Undefined ratios (zero denominators) are reported as 0.
NliMetrics metrics_from_confusion(const Confusion& confusion);
NliMetrics evaluate_nli(const NliClassifier& classifier, std::span<const NliExample> test_set);
std::string format_metrics(const NliMetrics& m);

}  // namespace verifai::scifact

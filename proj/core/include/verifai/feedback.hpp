#pragma once

#include <condition_variable>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <functional>
#include <future>
#include <iosfwd>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "verifai/corpus.hpp"

namespace verifai {

enum class FeedbackKind { LabelOverride, AnswerEdit };

std::string_view to_string(FeedbackKind k);
std::optional<FeedbackKind> parse_feedback_kind(std::string_view s);

struct BundleEntry {
    std::size_t local_index = 0;
    std::string doc_id;

    bool operator==(const BundleEntry&) const = default;
};

/// A user correction. LABEL_OVERRIDE replaces the NLI label of one
/// (claim, reference) pair: claim_id, claim_text, doc_id and a canonical
/// label in new_value are required. ANSWER_EDIT replaces the whole answer:
/// new_value must be non-blank. event_id and timestamp_ms are assigned by
/// the store.
struct FeedbackEvent {
    std::uint64_t event_id = 0;
    std::int64_t timestamp_ms = 0;
    std::string client_id;
    FeedbackKind kind = FeedbackKind::AnswerEdit;
    std::string question;
    std::optional<std::size_t> claim_id;
    std::string claim_text;
    std::string doc_id;
    std::string old_value;
    std::string new_value;
    std::vector<BundleEntry> bundle;

    bool operator==(const FeedbackEvent&) const = default;
};

/// Throws ValidationError; label errors list the allowed labels.
void validate_event(const FeedbackEvent& ev);

std::string event_to_json(const FeedbackEvent& ev);
/// Throws ValidationError on malformed JSON or fields.
FeedbackEvent event_from_json(std::string_view json_text);

/// Append-only feedback log. Each line is `<crc32 hex>\t<event json>`.
///
/// record() hands the event to a single writer thread, which assigns the
/// next event_id, appends and fsyncs the batch, and only then completes the
/// caller's future. Event IDs are therefore strictly increasing in file
/// order. Opening an existing log replays it; a torn final line (no
/// trailing newline) is truncated away, any other corrupt line is an error.
class FeedbackStore {
public:
    using Clock = std::function<std::int64_t()>;

    explicit FeedbackStore(std::filesystem::path log_path, Clock clock = {});
    ~FeedbackStore();

    FeedbackStore(const FeedbackStore&) = delete;
    FeedbackStore& operator=(const FeedbackStore&) = delete;

    /// Blocks until the event is on disk; returns its event_id.
    std::uint64_t record(FeedbackEvent ev);

    std::vector<FeedbackEvent> events() const;
    const std::filesystem::path& path() const { return path_; }

    /// Reads every event in a log without opening it for writing.
    static std::vector<FeedbackEvent> replay(const std::filesystem::path& log_path);

private:
    struct Pending {
        FeedbackEvent event;
        std::promise<std::uint64_t> done;
    };

    void writer_loop();

    std::filesystem::path path_;
    Clock clock_;
    int fd_ = -1;

    mutable std::mutex state_mu_;
    std::vector<FeedbackEvent> events_;
    std::uint64_t last_id_ = 0;

    std::mutex queue_mu_;
    std::condition_variable queue_cv_;
    std::deque<Pending> queue_;
    bool stopping_ = false;
    std::thread writer_;
};

struct ExportStats {
    std::size_t written = 0;
    std::size_t skipped = 0;  // referenced documents missing from the corpus
};

/// Training-ready JSONL. LABEL_OVERRIDE events become NLI examples
/// {claim, doc_id, title, abstract, label}; ANSWER_EDIT events become
/// {prompt, answer} pairs with the prompt re-rendered from the bundle
/// snapshot. Documents are resolved through `corpus`.
ExportStats export_feedback(std::span<const FeedbackEvent> events, FeedbackKind kind, const Corpus& corpus,
                            std::ostream& out);

}  // namespace verifai

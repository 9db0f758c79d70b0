#include "verifai/feedback.hpp"

#include <fcntl.h>
#include <unistd.h>
#include <zlib.h>

#include <chrono>
#include <cstdio>
#include <fstream>
#include <ostream>

#include <nlohmann/json.hpp>

#include "verifai/answer_gen.hpp"
#include "verifai/backends.hpp"
#include "verifai/error.hpp"
#include "verifai/scifact.hpp"
#include "verifai/text.hpp"

namespace verifai {

using nlohmann::json;

std::string_view to_string(FeedbackKind k) {
    return k == FeedbackKind::LabelOverride ? "LABEL_OVERRIDE" : "ANSWER_EDIT";
}

std::optional<FeedbackKind> parse_feedback_kind(std::string_view s) {
    if (s == "LABEL_OVERRIDE") return FeedbackKind::LabelOverride;
    if (s == "ANSWER_EDIT") return FeedbackKind::AnswerEdit;
    return std::nullopt;
}

void validate_event(const FeedbackEvent& ev) {
    if (ev.kind == FeedbackKind::AnswerEdit) {
        if (text::is_blank(ev.new_value)) throw ValidationError("ANSWER_EDIT requires a non-empty new_value");
        return;
    }
    if (!ev.claim_id) throw ValidationError("LABEL_OVERRIDE requires claim_id");
    if (text::is_blank(ev.claim_text)) throw ValidationError("LABEL_OVERRIDE requires claim_text");
    if (ev.doc_id.empty()) throw ValidationError("LABEL_OVERRIDE requires doc_id");
    if (ev.new_value != "SUPPORT" && ev.new_value != "CONTRADICT" && ev.new_value != "NO_EVIDENCE")
        throw ValidationError("invalid label '" + ev.new_value + "'; allowed labels: SUPPORT, CONTRADICT, NO_EVIDENCE");
    if (!ev.bundle.empty()) {
        bool known = false;
        for (const auto& b : ev.bundle) known = known || b.doc_id == ev.doc_id;
        if (!known) throw ValidationError("doc_id '" + ev.doc_id + "' is not in the bundle");
    }
}

std::string event_to_json(const FeedbackEvent& ev) {
    json bundle = json::array();
    for (const auto& b : ev.bundle) bundle.push_back({{"index", b.local_index}, {"doc_id", b.doc_id}});
    json j = {
        {"event_id", ev.event_id},
        {"timestamp_ms", ev.timestamp_ms},
        {"client_id", ev.client_id},
        {"kind", to_string(ev.kind)},
        {"question", ev.question},
        {"claim_id", ev.claim_id ? json(*ev.claim_id) : json(nullptr)},
        {"claim_text", ev.claim_text},
        {"doc_id", ev.doc_id},
        {"old_value", ev.old_value},
        {"new_value", ev.new_value},
        {"bundle", std::move(bundle)},
    };
    return j.dump();
}

FeedbackEvent event_from_json(std::string_view json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ValidationError(std::string("feedback event: ") + e.what());
    }
    if (!j.is_object()) throw ValidationError("feedback event must be a JSON object");
    try {
        FeedbackEvent ev;
        ev.event_id = j.value("event_id", std::uint64_t{0});
        ev.timestamp_ms = j.value("timestamp_ms", std::int64_t{0});
        ev.client_id = j.value("client_id", std::string());
        auto kind = parse_feedback_kind(j.value("kind", std::string()));
        if (!kind) throw ValidationError("feedback event kind must be LABEL_OVERRIDE or ANSWER_EDIT");
        ev.kind = *kind;
        ev.question = j.value("question", std::string());
        if (auto c = j.find("claim_id"); c != j.end() && !c->is_null()) ev.claim_id = c->get<std::size_t>();
        ev.claim_text = j.value("claim_text", std::string());
        ev.doc_id = j.value("doc_id", std::string());
        ev.old_value = j.value("old_value", std::string());
        ev.new_value = j.value("new_value", std::string());
        if (auto b = j.find("bundle"); b != j.end() && b->is_array()) {
            for (const auto& e : *b) ev.bundle.push_back({e.at("index").get<std::size_t>(), e.at("doc_id").get<std::string>()});
        }
        return ev;
    } catch (const json::exception& e) {
        throw ValidationError(std::string("feedback event: ") + e.what());
    }
}

namespace {

std::string checksum(std::string_view payload) {
    auto crc = ::crc32(0L, reinterpret_cast<const Bytef*>(payload.data()), static_cast<uInt>(payload.size()));
    char buf[9];
    std::snprintf(buf, sizeof buf, "%08lx", static_cast<unsigned long>(crc));
    return buf;
}

struct ReplayResult {
    std::vector<FeedbackEvent> events;
    std::uint64_t good_bytes = 0;
};

ReplayResult read_log(const std::filesystem::path& path) {
    ReplayResult r;
    std::ifstream in(path, std::ios::binary);
    if (!in) return r;
    std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    std::size_t pos = 0;
    std::size_t line_no = 0;
    while (pos < content.size()) {
        auto nl = content.find('\n', pos);
        if (nl == std::string::npos) break;  // torn tail
        ++line_no;
        std::string_view line(content.data() + pos, nl - pos);
        auto where = path.string() + ":" + std::to_string(line_no);
        if (line.size() < 10 || line[8] != '\t') throw Error(where + ": malformed feedback log line");
        auto payload = line.substr(9);
        if (checksum(payload) != line.substr(0, 8)) throw Error(where + ": checksum mismatch");
        auto ev = event_from_json(payload);
        if (!r.events.empty() && ev.event_id <= r.events.back().event_id)
            throw Error(where + ": event_id not increasing");
        r.events.push_back(std::move(ev));
        pos = nl + 1;
        r.good_bytes = pos;
    }
    return r;
}

std::int64_t system_now_ms() {
    using namespace std::chrono;
    return duration_cast<milliseconds>(system_clock::now().time_since_epoch()).count();
}

}  // namespace

FeedbackStore::FeedbackStore(std::filesystem::path log_path, Clock clock)
    : path_(std::move(log_path)), clock_(clock ? std::move(clock) : Clock(system_now_ms)) {
    if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
    auto replayed = read_log(path_);
    events_ = std::move(replayed.events);
    last_id_ = events_.empty() ? 0 : events_.back().event_id;

    fd_ = ::open(path_.c_str(), O_WRONLY | O_CREAT | O_APPEND | O_CLOEXEC, 0644);
    if (fd_ < 0) throw Error("cannot open feedback log " + path_.string());
    if (std::filesystem::file_size(path_) != replayed.good_bytes) {
        if (::ftruncate(fd_, static_cast<off_t>(replayed.good_bytes)) != 0) {
            ::close(fd_);
            throw Error("cannot truncate torn tail of " + path_.string());
        }
    }
    writer_ = std::thread([this] { writer_loop(); });
}

FeedbackStore::~FeedbackStore() {
    {
        std::lock_guard lock(queue_mu_);
        stopping_ = true;
    }
    queue_cv_.notify_all();
    if (writer_.joinable()) writer_.join();
    if (fd_ >= 0) ::close(fd_);
}

std::uint64_t FeedbackStore::record(FeedbackEvent ev) {
    validate_event(ev);
    std::future<std::uint64_t> done;
    {
        std::lock_guard lock(queue_mu_);
        if (stopping_) throw Error("feedback store is closing");
        queue_.push_back({std::move(ev), {}});
        done = queue_.back().done.get_future();
    }
    queue_cv_.notify_one();
    return done.get();
}

void FeedbackStore::writer_loop() {
    for (;;) {
        std::deque<Pending> batch;
        {
            std::unique_lock lock(queue_mu_);
            queue_cv_.wait(lock, [&] { return stopping_ || !queue_.empty(); });
            if (queue_.empty()) return;
            batch.swap(queue_);
        }

        std::string buffer;
        std::uint64_t next_id = last_id_;
        for (auto& p : batch) {
            p.event.event_id = ++next_id;
            p.event.timestamp_ms = clock_();
            auto payload = event_to_json(p.event);
            buffer.append(checksum(payload)).append("\t").append(payload).append("\n");
        }

        bool ok = true;
        std::size_t off = 0;
        while (off < buffer.size()) {
            auto n = ::write(fd_, buffer.data() + off, buffer.size() - off);
            if (n < 0) {
                if (errno == EINTR) continue;
                ok = false;
                break;
            }
            off += static_cast<std::size_t>(n);
        }
        ok = ok && ::fsync(fd_) == 0;

        if (!ok) {
            auto err = std::make_exception_ptr(Error("feedback log write failed: " + path_.string()));
            for (auto& p : batch) p.done.set_exception(err);
            continue;
        }
        {
            std::lock_guard lock(state_mu_);
            last_id_ = next_id;
            for (auto& p : batch) events_.push_back(p.event);
        }
        for (auto& p : batch) p.done.set_value(p.event.event_id);
    }
}

std::vector<FeedbackEvent> FeedbackStore::events() const {
    std::lock_guard lock(state_mu_);
    return events_;
}

std::vector<FeedbackEvent> FeedbackStore::replay(const std::filesystem::path& log_path) {
    return read_log(log_path).events;
}

ExportStats export_feedback(std::span<const FeedbackEvent> events, FeedbackKind kind, const Corpus& corpus,
                            std::ostream& out) {
    ExportStats stats;
    for (const auto& ev : events) {
        if (ev.kind != kind) continue;
        if (kind == FeedbackKind::LabelOverride) {
            const auto* doc = corpus.find(ev.doc_id);
            auto label = parse_nli_value(ev.new_value);
            if (!doc || !label) {
                ++stats.skipped;
                continue;
            }
            scifact::NliExample ex{ev.claim_text, {doc->doc_id, doc->title, doc->abstract}, *label};
            out << scifact::example_to_json(ex) << '\n';
            ++stats.written;
            continue;
        }

        std::vector<BundleDoc> docs;
        bool complete = true;
        for (const auto& b : ev.bundle) {
            const auto* doc = corpus.find(b.doc_id);
            if (!doc) {
                complete = false;
                break;
            }
            docs.push_back({b.local_index, doc->doc_id, doc->title, doc->abstract});
        }
        if (!complete) {
            ++stats.skipped;
            continue;
        }
        json pair = {{"prompt", render_prompt(ev.question, docs)}, {"answer", ev.new_value}};
        out << pair.dump() << '\n';
        ++stats.written;
    }
    return stats;
}

}  // namespace verifai

#include "verifai/service.hpp"

#include <httplib.h>

#include <chrono>
#include <cstdio>
#include <mutex>

#include "verifai/error.hpp"

namespace verifai {

using nlohmann::json;

namespace {

constexpr const char* kJson = "application/json";

void send_json(httplib::Response& res, int status, const json& body) {
    res.status = status;
    res.set_content(body.dump() + "\n", kJson);
}

void send_error(httplib::Response& res, int status, std::string_view code, std::string_view message,
                const std::string* stage = nullptr) {
    json err = {{"code", code}, {"message", message}};
    if (stage) err["stage"] = *stage;
    send_json(res, status, {{"error", std::move(err)}});
}

/// Maps pipeline exceptions to HTTP statuses. Call from inside a catch.
void send_current_exception(httplib::Response& res) {
    try {
        throw;
    } catch (const ValidationError& e) {
        send_error(res, 400, "invalid_request", e.what());
    } catch (const NoResultsError& e) {
        send_error(res, 422, "no_results", e.what());
    } catch (const StageError& e) {
        send_error(res, 502, "backend_failure", e.what(), &e.stage());
    } catch (const BackendError& e) {
        static const std::string stage = "backend";
        send_error(res, 502, "backend_failure", e.what(), &stage);
    } catch (const std::exception& e) {
        send_error(res, 500, "internal", e.what());
    }
}

json parse_body(const httplib::Request& req) {
    try {
        auto j = json::parse(req.body);
        if (!j.is_object()) throw ValidationError("request body must be a JSON object");
        return j;
    } catch (const json::parse_error& e) {
        throw ValidationError(std::string("malformed JSON body: ") + e.what());
    }
}

std::size_t parse_k(const std::string& s, std::size_t max) {
    std::size_t pos = 0;
    unsigned long long v = 0;
    try {
        v = std::stoull(s, &pos);
    } catch (const std::exception&) {
        pos = 0;
    }
    if (pos != s.size() || s.empty() || s[0] == '-' || v == 0 || v > max)
        throw ValidationError("k must be an integer between 1 and " + std::to_string(max));
    return static_cast<std::size_t>(v);
}

std::string server_timing(const StageTimings& t) {
    char buf[256];
    std::snprintf(buf, sizeof buf, "retrieval;dur=%.3f, generation;dur=%.3f, parsing;dur=%.3f, verification;dur=%.3f",
                  t.retrieval_ms, t.generation_ms, t.parsing_ms, t.verification_ms);
    return buf;
}

FeedbackEvent event_from_request(const json& body) {
    const json& ev = body.contains("event") ? body.at("event") : body;
    if (!ev.is_object()) throw ValidationError("event must be a JSON object");
    json copy = ev;
    // Identity and time belong to the store.
    copy.erase("event_id");
    copy.erase("timestamp_ms");
    return event_from_json(copy.dump());
}

}  // namespace

struct Service::Impl {
    const Engine& engine;
    FeedbackStore* feedback;
    ServiceConfig cfg;
    httplib::Server server;
    std::mutex log_mu;

    Impl(const Engine& e, FeedbackStore* f, ServiceConfig c) : engine(e), feedback(f), cfg(std::move(c)) {
        auto threads = std::max<std::size_t>(1, cfg.threads);
        server.new_task_queue = [threads] { return new httplib::ThreadPool(threads); };

        if (!cfg.cors_origin.empty()) {
            server.set_default_headers({{"Access-Control-Allow-Origin", cfg.cors_origin},
                                        {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"},
                                        {"Access-Control-Allow-Headers", "Content-Type"},
                                        {"Vary", "Origin"}});
            server.Options(".*", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });
        }
        if (cfg.access_log) {
            server.set_logger([this](const httplib::Request& req, const httplib::Response& res) {
                std::lock_guard lock(log_mu);
                *cfg.access_log << req.method << ' ' << req.path << ' ' << res.status << '\n' << std::flush;
            });
        }

        server.Get("/search", [this](const httplib::Request& req, httplib::Response& res) { search(req, res); });
        server.Post("/ask", [this](const httplib::Request& req, httplib::Response& res) { ask(req, res); });
        server.Post("/feedback", [this](const httplib::Request& req, httplib::Response& res) { record(req, res); });
        server.Get("/health", [this](const httplib::Request&, httplib::Response& res) { health(res); });
    }

    void search(const httplib::Request& req, httplib::Response& res) {
        try {
            if (!req.has_param("q")) throw ValidationError("missing query parameter q");
            auto q = req.get_param_value("q");
            std::size_t k = req.has_param("k") ? parse_k(req.get_param_value("k"), cfg.max_search_k)
                                                : std::min(cfg.default_k, cfg.max_search_k);
            auto results = engine.search(q, k);
            send_json(res, 200, {{"query", q}, {"k", k}, {"results", fused_to_json(results, &engine.corpus())}});
        } catch (...) {
            send_current_exception(res);
        }
    }

    void ask(const httplib::Request& req, httplib::Response& res) {
        try {
            auto body = parse_body(req);
            auto q = body.find("question");
            if (q == body.end() || !q->is_string()) throw ValidationError("question must be a string");
            std::size_t k = cfg.default_k;
            if (auto kk = body.find("k"); kk != body.end() && !kk->is_null()) {
                if (!kk->is_number_integer() || kk->get<long long>() < 1 ||
                    kk->get<long long>() > static_cast<long long>(kMaxPromptDocuments))
                    throw ValidationError("k must be an integer between 1 and " + std::to_string(kMaxPromptDocuments));
                k = kk->get<std::size_t>();
            }
            auto result = engine.ask(q->get<std::string>(), k);
            OverrideView view;
            if (feedback) view.events = feedback->events();
            res.set_header("Server-Timing", server_timing(result.timings));
            send_json(res, 200, ask_to_json(result, feedback ? &view : nullptr));
        } catch (...) {
            send_current_exception(res);
        }
    }

    void record(const httplib::Request& req, httplib::Response& res) {
        if (!feedback) {
            send_error(res, 503, "feedback_disabled", "no feedback log configured");
            return;
        }
        try {
            auto id = feedback->record(event_from_request(parse_body(req)));
            send_json(res, 200, {{"event_id", id}});
        } catch (...) {
            send_current_exception(res);
        }
    }

    void health(httplib::Response& res) {
        const auto& b = engine.backends();
        bool embed_ok = b.embedder->ready();
        bool gen_ok = b.generator->ready();
        bool nli_ok = b.nli->ready();
        json components = {
            {"lexical_index", {{"ready", true}, {"documents", engine.lexical().size()}}},
            {"vector_index",
             {{"ready", true}, {"segments", engine.vectors().size()}, {"dim", engine.vectors().dim()},
              {"quantized", engine.vectors().quantized()}}},
            {"corpus", {{"ready", true}, {"documents", engine.corpus().size()}}},
            {"embedder", {{"ready", embed_ok}, {"backend", b.embedder->describe()}}},
            {"generator", {{"ready", gen_ok}, {"backend", b.generator->describe()}}},
            {"nli", {{"ready", nli_ok}, {"backend", b.nli->describe()}}},
            {"feedback", {{"ready", feedback != nullptr}}},
        };
        bool ok = embed_ok && gen_ok && nli_ok;
        send_json(res, ok ? 200 : 503, {{"status", ok ? "ok" : "degraded"}, {"components", std::move(components)}});
    }
};

Service::Service(const Engine& engine, FeedbackStore* feedback, ServiceConfig cfg)
    : impl_(std::make_unique<Impl>(engine, feedback, std::move(cfg))) {}

Service::~Service() { stop(); }

bool Service::listen(const std::string& host, int port) { return impl_->server.listen(host, port); }

int Service::bind_any(const std::string& host) { return impl_->server.bind_to_any_port(host); }

bool Service::listen_after_bind() { return impl_->server.listen_after_bind(); }

void Service::stop() {
    if (impl_) impl_->server.stop();
}

bool Service::running() const { return impl_->server.is_running(); }

void Service::wait_until_ready() const { impl_->server.wait_until_ready(); }

}  // namespace verifai

#pragma once

#include <atomic>
#include <memory>
#include <ostream>
#include <string>

#include "verifai/feedback.hpp"
#include "verifai/pipeline.hpp"

namespace verifai {

struct ServiceConfig {
    std::string cors_origin;          // empty disables CORS headers
    std::size_t default_k = kMaxPromptDocuments;
    std::size_t max_search_k = 100;
    std::size_t threads = 8;
    std::ostream* access_log = nullptr;
};

/// HTTP facade over an Engine.
///
///   GET  /search?q=&k=      fused results
///   POST /ask {question,k}  answer, claims, verdicts, bundle
///   POST /feedback {event}  {event_id}
///   GET  /health            component readiness
///
/// Error bodies are {"error": {"code", "message", "stage"?}} with 400 for
/// invalid requests, 422 when retrieval finds nothing, 502 when a backend
/// stage fails and 503 when feedback is not configured. Stage timings go
/// in the Server-Timing header so response bodies stay reproducible.
class Service {
public:
    Service(const Engine& engine, FeedbackStore* feedback, ServiceConfig cfg = {});
    ~Service();

    Service(const Service&) = delete;
    Service& operator=(const Service&) = delete;

    /// Binds and serves until stop(). Returns false if binding failed.
    bool listen(const std::string& host, int port);
    /// Binds to an ephemeral port; serve with listen_after_bind().
    int bind_any(const std::string& host);
    bool listen_after_bind();
    /// Stops accepting and waits for in-flight requests.
    void stop();
    bool running() const;
    void wait_until_ready() const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace verifai

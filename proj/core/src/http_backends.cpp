#include <cstdlib>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "verifai/backends.hpp"
#include "verifai/error.hpp"

namespace verifai {

using nlohmann::json;

namespace {

struct Endpoint {
    std::string origin;  // scheme://host[:port]
    std::string prefix;  // path prefix without trailing '/'
};

Endpoint split_endpoint(const std::string& url) {
    if (!url.starts_with("http://"))
        throw ValidationError("backend endpoint must be an http:// URL: " + url);
    auto path_at = url.find('/', 7);
    Endpoint ep;
    ep.origin = url.substr(0, path_at);
    if (path_at != std::string::npos) ep.prefix = url.substr(path_at);
    while (!ep.prefix.empty() && ep.prefix.back() == '/') ep.prefix.pop_back();
    if (ep.origin.size() <= 7) throw ValidationError("backend endpoint has no host: " + url);
    return ep;
}

httplib::Client make_client(const Endpoint& ep, std::chrono::milliseconds timeout) {
    httplib::Client cli(ep.origin);
    auto secs = static_cast<time_t>(timeout.count() / 1000);
    auto usecs = static_cast<time_t>((timeout.count() % 1000) * 1000);
    cli.set_connection_timeout(secs, usecs);
    cli.set_read_timeout(secs, usecs);
    cli.set_write_timeout(secs, usecs);
    return cli;
}

json post_json(const std::string& url, std::chrono::milliseconds timeout, const std::string& route,
               const json& body) {
    auto ep = split_endpoint(url);
    auto cli = make_client(ep, timeout);
    auto res = cli.Post(ep.prefix + route, body.dump(), "application/json");
    if (!res) throw BackendError(url + route + ": " + httplib::to_string(res.error()));
    if (res->status != 200)
        throw BackendError(url + route + ": HTTP " + std::to_string(res->status) + ": " + res->body);
    try {
        auto parsed = json::parse(res->body);
        if (!parsed.is_object()) throw ProtocolError(url + route + ": response is not a JSON object");
        return parsed;
    } catch (const json::parse_error& e) {
        throw ProtocolError(url + route + ": invalid JSON response: " + e.what());
    }
}

bool reachable(const std::string& url, std::chrono::milliseconds timeout) {
    try {
        auto ep = split_endpoint(url);
        auto cli = make_client(ep, timeout);
        auto res = cli.Get(ep.prefix + "/health");
        return static_cast<bool>(res);
    } catch (const Error&) {
        return false;
    }
}

}  // namespace

HttpEmbedder::HttpEmbedder(std::string endpoint, std::chrono::milliseconds timeout, std::size_t dim)
    : endpoint_(std::move(endpoint)), timeout_(timeout), dim_(dim) {
    split_endpoint(endpoint_);
}

Embedding HttpEmbedder::embed(std::string_view text) const {
    if (text.empty()) throw ValidationError("cannot embed empty text");
    auto res = post_json(endpoint_, timeout_, "/embed", {{"text", text}});
    auto it = res.find("values");
    if (it == res.end() || !it->is_array()) throw ProtocolError(endpoint_ + "/embed: missing 'values' array");
    Embedding out;
    out.reserve(it->size());
    for (const auto& v : *it) {
        if (!v.is_number()) throw ProtocolError(endpoint_ + "/embed: non-numeric embedding value");
        out.push_back(v.get<float>());
    }
    if (out.size() != dim_)
        throw ProtocolError(endpoint_ + "/embed: expected dim " + std::to_string(dim_) + ", got " +
                            std::to_string(out.size()));
    return out;
}

bool HttpEmbedder::ready() const { return reachable(endpoint_, timeout_); }

HttpGenerator::HttpGenerator(std::string endpoint, std::chrono::milliseconds timeout)
    : endpoint_(std::move(endpoint)), timeout_(timeout) {
    split_endpoint(endpoint_);
}

Generation HttpGenerator::generate(std::string_view prompt, const GenerationParams& params) const {
    json body = {
        {"prompt", prompt},
        {"max_new_tokens", params.max_new_tokens},
        {"repetition_penalty", params.repetition_penalty},
    };
    auto res = post_json(endpoint_, timeout_, "/generate", body);
    auto it = res.find("text");
    if (it == res.end() || !it->is_string()) throw ProtocolError(endpoint_ + "/generate: missing 'text' string");
    Generation g;
    g.text = it->get<std::string>();
    if (auto t = res.find("truncated"); t != res.end() && t->is_boolean()) g.truncated = t->get<bool>();
    return g;
}

bool HttpGenerator::ready() const { return reachable(endpoint_, timeout_); }

HttpNliClassifier::HttpNliClassifier(std::string endpoint, std::chrono::milliseconds timeout)
    : endpoint_(std::move(endpoint)), timeout_(timeout) {
    split_endpoint(endpoint_);
}

NliLabel HttpNliClassifier::classify(std::string_view claim, std::string_view evidence_title,
                                     std::string_view evidence_abstract) const {
    std::string evidence;
    evidence.append(evidence_title).append(" ").append(evidence_abstract);
    auto res = post_json(endpoint_, timeout_, "/nli", {{"claim", claim}, {"evidence", evidence}});
    auto label = res.find("label");
    if (label == res.end() || !label->is_string()) throw ProtocolError(endpoint_ + "/nli: missing 'label' string");
    auto value = parse_nli_value(label->get<std::string>());
    if (!value) throw ProtocolError(endpoint_ + "/nli: unknown label '" + label->get<std::string>() + "'");
    NliLabel out{*value, 1.0};
    if (auto c = res.find("confidence"); c != res.end()) {
        if (!c->is_number()) throw ProtocolError(endpoint_ + "/nli: non-numeric confidence");
        out.confidence = c->get<double>();
        if (!(out.confidence >= 0.0 && out.confidence <= 1.0))
            throw ProtocolError(endpoint_ + "/nli: confidence outside [0,1]");
    }
    return out;
}

bool HttpNliClassifier::ready() const { return reachable(endpoint_, timeout_); }

void BackendConfig::validate() const {
    if (kind == Kind::Http && (!endpoint || endpoint->empty()))
        throw ValidationError("http backend requires an endpoint");
    if (kind == Kind::Reference && endpoint) throw ValidationError("reference backend takes no endpoint");
    if (max_new_tokens == 0) throw ValidationError("max_new_tokens must be positive");
    if (timeout.count() <= 0) throw ValidationError("backend timeout must be positive");
}

BackendSettings BackendSettings::from_env() { return from_env(BackendSettings{}); }

BackendSettings BackendSettings::from_env(BackendSettings base) {
    auto apply = [](BackendConfig& cfg, const char* var) {
        const char* v = std::getenv(var);
        if (v && *v) {
            cfg.kind = BackendConfig::Kind::Http;
            cfg.endpoint = v;
        }
    };
    apply(base.embed, "VERIFAI_EMBED_URL");
    apply(base.generate, "VERIFAI_GEN_URL");
    apply(base.nli, "VERIFAI_NLI_URL");
    return base;
}

Backends make_backends(const BackendSettings& s) {
    s.embed.validate();
    s.generate.validate();
    s.nli.validate();
    Backends b;
    if (s.embed.kind == BackendConfig::Kind::Http)
        b.embedder = std::make_shared<HttpEmbedder>(*s.embed.endpoint, s.embed.timeout, s.embedding_dim);
    else
        b.embedder = std::make_shared<HashingEmbedder>(s.embedding_dim);
    if (s.generate.kind == BackendConfig::Kind::Http)
        b.generator = std::make_shared<HttpGenerator>(*s.generate.endpoint, s.generate.timeout);
    else
        b.generator = std::make_shared<ReferenceGenerator>();
    if (s.nli.kind == BackendConfig::Kind::Http)
        b.nli = std::make_shared<HttpNliClassifier>(*s.nli.endpoint, s.nli.timeout);
    else
        b.nli = std::make_shared<ReferenceNliClassifier>();
    b.generation = s.generate.generation();
    return b;
}

}  // namespace verifai

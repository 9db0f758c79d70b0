#include "config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdlib>
#include <fstream>
#include <thread>

#include <nlohmann/json.hpp>
#include <verifai/error.hpp>

namespace verifai::cli {

namespace {

struct KeyInfo {
    const char* key;
    const char* fallback;
    const char* env_alias;
};

std::string default_threads() { return std::to_string(std::max(1u, std::thread::hardware_concurrency())); }

// Defaults live here so the README table and the code agree.
const KeyInfo kKeys[] = {
    {"segment.max_tokens", "512", nullptr},
    {"segment.overlap", "100", nullptr},
    {"bm25.k1", "1.2", nullptr},
    {"bm25.b", "0.75", nullptr},
    {"index.quantize", "true", nullptr},
    {"index.threads", "", nullptr},
    {"fusion.w_lex", "0.5", nullptr},
    {"fusion.w_sem", "0.5", nullptr},
    {"fusion.arm_k", "100", nullptr},
    {"fusion.final_k", "10", nullptr},
    {"fusion.sem_min_score", "0", nullptr},
    {"backend.embed_url", "", "VERIFAI_EMBED_URL"},
    {"backend.gen_url", "", "VERIFAI_GEN_URL"},
    {"backend.nli_url", "", "VERIFAI_NLI_URL"},
    {"backend.timeout_ms", "30000", nullptr},
    {"backend.embedding_dim", "64", nullptr},
    {"generation.max_new_tokens", "1000", nullptr},
    {"generation.repetition_penalty", "1.1", nullptr},
    {"verify.evidence_sentences", "1", nullptr},
    {"service.cors_origin", "", nullptr},
    {"service.threads", "8", nullptr},
    {"feedback.log", "feedback.log", nullptr},
};

const KeyInfo* find_key(const std::string& key) {
    for (const auto& k : kKeys)
        if (key == k.key) return &k;
    return nullptr;
}

std::string env_name(const std::string& key) {
    std::string out = "VERIFAI_";
    for (char c : key) out += c == '.' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    return out;
}

void flatten(const nlohmann::json& j, const std::string& prefix, std::map<std::string, std::string>& out) {
    for (const auto& [k, v] : j.items()) {
        auto key = prefix.empty() ? k : prefix + "." + k;
        if (v.is_object()) {
            flatten(v, key, out);
        } else {
            if (!find_key(key)) throw ValidationError("unknown config key '" + key + "'");
            out[key] = v.is_string() ? v.get<std::string>() : v.dump();
        }
    }
}

}  // namespace

Config Config::load(const std::optional<std::filesystem::path>& file) {
    Config c;
    if (file) {
        std::ifstream in(*file);
        if (!in) throw ValidationError("cannot read config file " + file->string());
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(in);
        } catch (const nlohmann::json::parse_error& e) {
            throw ValidationError("config file " + file->string() + ": " + e.what());
        }
        if (!j.is_object()) throw ValidationError("config file must hold a JSON object");
        flatten(j, "", c.values_);
    }
    for (const auto& k : kKeys) {
        const char* v = std::getenv(env_name(k.key).c_str());
        if ((!v || !*v) && k.env_alias) v = std::getenv(k.env_alias);
        if (v && *v) c.values_[k.key] = v;
    }
    return c;
}

void Config::set(const std::string& key, std::string value) {
    if (!find_key(key)) throw ValidationError("unknown config key '" + key + "'");
    values_[key] = std::move(value);
}

std::optional<std::string> Config::raw(const std::string& key) const {
    if (auto it = values_.find(key); it != values_.end()) return it->second;
    return std::nullopt;
}

std::string Config::str(const std::string& key) const {
    if (auto v = raw(key)) return *v;
    const auto* k = find_key(key);
    if (!k) throw ValidationError("unknown config key '" + key + "'");
    if (key == "index.threads") return default_threads();
    return k->fallback;
}

double Config::number(const std::string& key) const {
    auto s = str(key);
    double v = 0.0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size()) throw ValidationError(key + " must be a number, got '" + s + "'");
    return v;
}

std::size_t Config::count(const std::string& key) const {
    auto s = str(key);
    std::size_t v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size())
        throw ValidationError(key + " must be a non-negative integer, got '" + s + "'");
    return v;
}

bool Config::flag(const std::string& key) const {
    auto s = str(key);
    if (s == "true" || s == "1") return true;
    if (s == "false" || s == "0") return false;
    throw ValidationError(key + " must be true or false, got '" + s + "'");
}

IndexConfig Config::index() const {
    IndexConfig c;
    c.segmenter = {count("segment.max_tokens"), count("segment.overlap")};
    c.bm25 = {number("bm25.k1"), number("bm25.b")};
    c.quantize = flag("index.quantize");
    c.threads = std::max<std::size_t>(1, count("index.threads"));
    return c;
}

BackendSettings Config::backends() const {
    BackendSettings s;
    std::chrono::milliseconds timeout(count("backend.timeout_ms"));
    auto role = [&](BackendConfig& cfg, const char* key) {
        auto url = str(key);
        cfg.timeout = timeout;
        if (!url.empty()) {
            cfg.kind = BackendConfig::Kind::Http;
            cfg.endpoint = url;
        }
    };
    role(s.embed, "backend.embed_url");
    role(s.generate, "backend.gen_url");
    role(s.nli, "backend.nli_url");
    s.generate.max_new_tokens = count("generation.max_new_tokens");
    s.generate.repetition_penalty = number("generation.repetition_penalty");
    s.embedding_dim = count("backend.embedding_dim");
    return s;
}

EngineConfig Config::engine() const {
    EngineConfig c;
    c.fusion.w_lex = number("fusion.w_lex");
    c.fusion.w_sem = number("fusion.w_sem");
    c.fusion.arm_k = count("fusion.arm_k");
    c.fusion.final_k = count("fusion.final_k");
    c.fusion.sem_min_score = number("fusion.sem_min_score");
    c.fusion.validate();
    c.backends = backends();
    c.evidence_sentences = count("verify.evidence_sentences");
    return c;
}

ServiceConfig Config::service() const {
    ServiceConfig c;
    c.cors_origin = str("service.cors_origin");
    c.threads = std::max<std::size_t>(1, count("service.threads"));
    return c;
}

}  // namespace verifai::cli

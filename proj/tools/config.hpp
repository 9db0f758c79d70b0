#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>

#include <verifai/pipeline.hpp>
#include <verifai/service.hpp>

namespace verifai::cli {

/// Layered settings: JSON config file, then environment, then flags.
///
/// Keys are dotted (`fusion.w_lex`); the file may use nested objects or
/// dotted names. Each key reads the variable VERIFAI_<KEY> with dots as
/// underscores (VERIFAI_FUSION_W_LEX). The backend URLs also answer to
/// VERIFAI_EMBED_URL, VERIFAI_GEN_URL and VERIFAI_NLI_URL.
class Config {
public:
    /// Throws ValidationError on unreadable files or unknown keys.
    static Config load(const std::optional<std::filesystem::path>& file);

    void set(const std::string& key, std::string value);

    std::optional<std::string> raw(const std::string& key) const;
    std::string str(const std::string& key) const;
    double number(const std::string& key) const;
    std::size_t count(const std::string& key) const;
    bool flag(const std::string& key) const;

    IndexConfig index() const;
    EngineConfig engine() const;
    BackendSettings backends() const;
    ServiceConfig service() const;

private:
    std::map<std::string, std::string> values_;
};

}  // namespace verifai::cli

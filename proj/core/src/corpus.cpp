#include "verifai/corpus.hpp"

#include <fstream>
#include <istream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "verifai/error.hpp"
#include "verifai/text.hpp"

namespace verifai {

using nlohmann::json;

DocumentRecord DocumentRecord::make(std::string doc_id, std::string title, std::string abstract) {
    DocumentRecord rec;
    rec.text.reserve(title.size() + 1 + abstract.size());
    rec.text.append(title).append(" ").append(abstract);
    rec.doc_id = std::move(doc_id);
    rec.title = std::move(title);
    rec.abstract = std::move(abstract);
    return rec;
}

namespace {

[[noreturn]] void malformed(std::string_view source, std::uint64_t line_no, std::string_view what) {
    std::ostringstream msg;
    msg << source << ":" << line_no << ": malformed record: " << what;
    throw IngestError(msg.str());
}

// Absent and null are both "missing"; anything else must be a string.
std::string optional_string(const json& obj, const char* key, std::string_view source, std::uint64_t line_no) {
    auto it = obj.find(key);
    if (it == obj.end() || it->is_null()) return {};
    if (!it->is_string()) malformed(source, line_no, std::string("field '") + key + "' is not a string");
    return it->get<std::string>();
}

}  // namespace

void CorpusIngestor::add_line(std::string_view line, std::string_view source, std::uint64_t line_no) {
    if (text::is_blank(line)) return;

    json obj;
    try {
        obj = json::parse(line);
    } catch (const json::parse_error& e) {
        malformed(source, line_no, e.what());
    }
    if (!obj.is_object()) malformed(source, line_no, "not a JSON object");

    auto id_it = obj.find("doc_id");
    if (id_it == obj.end() || !id_it->is_string()) malformed(source, line_no, "missing string field 'doc_id'");
    std::string doc_id = id_it->get<std::string>();
    if (doc_id.empty()) malformed(source, line_no, "empty 'doc_id'");

    std::string title = optional_string(obj, "title", source, line_no);
    std::string abstract = optional_string(obj, "abstract", source, line_no);

    if (!seen_ids_.insert(doc_id).second) {
        std::ostringstream msg;
        msg << source << ":" << line_no << ": duplicate doc_id '" << doc_id << "'";
        throw IngestError(msg.str());
    }

    auto& stats = result_.stats;
    ++stats.total_seen;
    if (text::is_blank(abstract)) {
        ++stats.excluded_no_abstract;
        return;
    }
    ++stats.kept;
    result_.documents.push_back(DocumentRecord::make(std::move(doc_id), std::move(title), std::move(abstract)));
}

void CorpusIngestor::add_stream(std::istream& in, std::string_view source_name) {
    std::string line;
    std::uint64_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        add_line(line, source_name, line_no);
    }
    if (in.bad()) throw IngestError(std::string(source_name) + ": read error");
}

void CorpusIngestor::add_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IngestError("cannot open corpus input: " + path.string());
    add_stream(in, path.string());
}

IngestResult CorpusIngestor::finish() && { return std::move(result_); }

IngestResult ingest_corpus(std::istream& in, std::string_view source_name) {
    CorpusIngestor ingestor;
    ingestor.add_stream(in, source_name);
    return std::move(ingestor).finish();
}

IngestResult ingest_files(const std::vector<std::filesystem::path>& inputs) {
    CorpusIngestor ingestor;
    for (const auto& p : inputs) ingestor.add_file(p);
    return std::move(ingestor).finish();
}

std::string stats_to_json(const CorpusStats& stats) {
    json j = {
        {"total_seen", stats.total_seen},
        {"kept", stats.kept},
        {"excluded_no_abstract", stats.excluded_no_abstract},
        {"kept_fraction", stats.kept_fraction()},
    };
    return j.dump();
}

Corpus::Corpus(std::vector<DocumentRecord> documents) : documents_(std::move(documents)) {
    by_id_.reserve(documents_.size());
    for (std::size_t i = 0; i < documents_.size(); ++i) {
        if (!by_id_.emplace(documents_[i].doc_id, i).second)
            throw IngestError("duplicate doc_id '" + documents_[i].doc_id + "'");
    }
}

Corpus Corpus::load(const std::filesystem::path& dir) {
    auto file = dir / kDocumentsFile;
    if (!std::filesystem::exists(file)) throw IngestError("corpus directory has no " + file.string());
    auto result = ingest_files({file});
    return Corpus(std::move(result.documents));
}

void Corpus::write(const std::filesystem::path& dir, const IngestResult& result) {
    std::filesystem::create_directories(dir);
    {
        std::ofstream out(dir / kDocumentsFile, std::ios::binary | std::ios::trunc);
        if (!out) throw IngestError("cannot write " + (dir / kDocumentsFile).string());
        for (const auto& d : result.documents) {
            json j = {{"doc_id", d.doc_id}, {"title", d.title}, {"abstract", d.abstract}};
            out << j.dump() << '\n';
        }
        if (!out) throw IngestError("write failed: " + (dir / kDocumentsFile).string());
    }
    std::ofstream stats(dir / kStatsFile, std::ios::binary | std::ios::trunc);
    stats << stats_to_json(result.stats) << '\n';
}

const DocumentRecord* Corpus::find(std::string_view doc_id) const {
    auto it = by_id_.find(std::string(doc_id));
    return it == by_id_.end() ? nullptr : &documents_[it->second];
}

}  // namespace verifai

#include "test_support.hpp"

#include <httplib.h>

#include <unistd.h>

#include <algorithm>
#include <array>
#include <cctype>
#include <cstdio>
#include <stdexcept>

namespace verifai::testing {

namespace fs = std::filesystem;

TempDir::TempDir() {
    auto tmpl = (fs::temp_directory_path() / "verifai-test-XXXXXX").string();
    std::vector<char> buf(tmpl.begin(), tmpl.end());
    buf.push_back('\0');
    if (!::mkdtemp(buf.data())) throw std::runtime_error("mkdtemp failed");
    path_ = buf.data();
}

TempDir::~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
}

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + p.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const fs::path& p, const std::string& content) {
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    out << content;
}

int run_command(const std::string& cmd, std::string* out) {
    FILE* pipe = ::popen(cmd.c_str(), "r");
    if (!pipe) return -1;
    std::array<char, 4096> buf{};
    std::string captured;
    std::size_t n = 0;
    while ((n = std::fread(buf.data(), 1, buf.size(), pipe)) > 0) captured.append(buf.data(), n);
    int status = ::pclose(pipe);
    if (out) *out = std::move(captured);
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::vector<std::string> oracle_tokens(const std::string& s) {
    std::vector<std::string> out;
    std::string cur;
    for (unsigned char c : s) {
        bool word = (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c >= 0x80;
        if (c >= 'A' && c <= 'Z') {
            c = static_cast<unsigned char>(c - 'A' + 'a');
            word = true;
        }
        if (word) {
            cur.push_back(static_cast<char>(c));
        } else if (!cur.empty()) {
            out.push_back(cur);
            cur.clear();
        }
    }
    if (!cur.empty()) out.push_back(cur);
    return out;
}

std::map<std::string, double> oracle_bm25(const std::vector<DocumentRecord>& docs, const std::string& query,
                                          double k1, double b) {
    const double n = static_cast<double>(docs.size());
    std::vector<std::vector<std::string>> toks;
    double total = 0;
    for (const auto& d : docs) {
        toks.push_back(oracle_tokens(d.title + " " + d.abstract));
        total += static_cast<double>(toks.back().size());
    }
    const double avgdl = total / n;
    auto q = oracle_tokens(query);
    std::set<std::string> terms(q.begin(), q.end());

    std::map<std::string, double> scores;
    for (const auto& t : terms) {
        double df = 0;
        for (const auto& dt : toks) df += std::count(dt.begin(), dt.end(), t) > 0 ? 1 : 0;
        if (df == 0) continue;
        double idf = std::log(1.0 + (n - df + 0.5) / (df + 0.5));
        for (std::size_t i = 0; i < docs.size(); ++i) {
            double tf = static_cast<double>(std::count(toks[i].begin(), toks[i].end(), t));
            if (tf == 0) continue;
            double dl = static_cast<double>(toks[i].size());
            scores[docs[i].doc_id] += idf * tf * (k1 + 1) / (tf + k1 * (1 - b + b * dl / avgdl));
        }
    }
    return scores;
}

std::map<std::string, double> oracle_minmax(const std::map<std::string, double>& scores) {
    std::map<std::string, double> out;
    if (scores.empty()) return out;
    double lo = scores.begin()->second, hi = lo;
    for (const auto& [_, s] : scores) {
        lo = std::min(lo, s);
        hi = std::max(hi, s);
    }
    for (const auto& [id, s] : scores) out[id] = hi == lo ? 1.0 : (s - lo) / (hi - lo);
    return out;
}

std::vector<OracleFused> oracle_fuse(const std::map<std::string, double>& lex_norm,
                                     const std::map<std::string, double>& sem_norm, double w_lex, double w_sem,
                                     std::size_t k) {
    std::set<std::string> ids;
    for (const auto& [id, _] : lex_norm) ids.insert(id);
    for (const auto& [id, _] : sem_norm) ids.insert(id);
    std::vector<OracleFused> out;
    for (const auto& id : ids) {
        double l = lex_norm.count(id) ? lex_norm.at(id) : 0.0;
        double s = sem_norm.count(id) ? sem_norm.at(id) : 0.0;
        out.push_back({id, w_lex * l + w_sem * s});
    }
    std::sort(out.begin(), out.end(), [](const OracleFused& a, const OracleFused& b) {
        return a.fused != b.fused ? a.fused > b.fused : a.doc_id < b.doc_id;
    });
    if (out.size() > k) out.resize(k);
    return out;
}

std::vector<DocumentRecord> bm25_fixture() {
    return {
        DocumentRecord::make("D1", "Aspirin and fever", "Aspirin lowers the fever in children."),
        DocumentRecord::make("D2", "Fever management", "The fever responds to cooling and fluids."),
        DocumentRecord::make("D3", "Aspirin bleeding", "The bleeding risk rises with dose."),
        DocumentRecord::make("D4", "Statins", "The statins lower cholesterol."),
        DocumentRecord::make("D5", "Viral fever in adults", "The fever lasted three days in most adults with the virus."),
    };
}

double dot(const std::vector<float>& a, const std::vector<float>& b) {
    double s = 0;
    for (std::size_t i = 0; i < a.size(); ++i) s += static_cast<double>(a[i]) * static_cast<double>(b[i]);
    return s;
}

SynthAnswer synth_answer(std::mt19937_64& rng) {
    static const std::vector<std::string> kWords = {"aspirin", "reduces", "fever", "in", "children", "dose",
                                                    "varies", "with", "weight", "trial", "showed", "benefit",
                                                    "risk", "was", "lower", "among", "adults", "treated"};
    auto pick = [&](std::size_t n) { return static_cast<std::size_t>(rng() % n); };

    SynthAnswer s;
    const std::size_t n_docs = 1 + pick(10);
    s.bundle.question = "q";
    for (std::size_t i = 1; i <= n_docs; ++i)
        s.bundle.docs.push_back({i, "DOC" + std::to_string(100 + i), "t", "a"});

    auto group = [&](std::vector<std::size_t>& cites) {
        std::string g;
        std::size_t run = 1 + pick(3);
        for (std::size_t r = 0; r < run; ++r) {
            std::size_t idx = 1 + pick(12);  // sometimes beyond the bundle
            cites.push_back(idx);
            g += "[" + std::to_string(idx) + "]";
        }
        return g;
    };

    const std::size_t n_sent = 1 + pick(6);
    std::vector<std::string> pieces;
    std::vector<std::size_t> carried;  // citations placed after the previous terminator
    for (std::size_t k = 0; k < n_sent; ++k) {
        std::vector<std::string> body;
        std::size_t len = 2 + pick(8);
        for (std::size_t w = 0; w < len; ++w) body.push_back(kWords[pick(kWords.size())]);
        body[0][0] = static_cast<char>(body[0][0] - 'a' + 'A');
        const char term = ".!?"[pick(3)];

        std::vector<std::size_t> cites;
        std::string raw, clean;
        const std::size_t mid_at = pick(4) == 0 ? 1 + pick(len) : len + 1;
        const bool prose = pick(5) == 0;
        for (std::size_t w = 0; w < len; ++w) {
            if (w) {
                raw += ' ';
                clean += ' ';
            }
            raw += body[w];
            clean += body[w];
            if (w + 1 == mid_at && w + 1 < len) raw += " " + group(cites);
            if (prose && w == 0) {
                raw += " [see methods]";
                clean += " [see methods]";
            }
        }
        if (pick(2) == 0) raw += " " + group(cites);
        raw += term;
        clean += term;
        std::vector<std::size_t> after;
        if (pick(3) == 0) raw += " " + group(after);
        cites.insert(cites.end(), after.begin(), after.end());
        pieces.push_back(raw);
        s.claim_texts.push_back(clean);
        s.citations.push_back(cites);
    }
    std::string sep[] = {" ", "  ", "\n", " \t"};
    for (std::size_t k = 0; k < pieces.size(); ++k) {
        if (k) s.text += sep[pick(4)];
        s.text += pieces[k];
    }
    return s;
}

namespace {

std::string squeeze(const std::string& in) {
    std::string out;
    for (char c : in) {
        if (c == ' ' || c == '\t' || c == '\n') {
            if (!out.empty() && out.back() != ' ') out += ' ';
        } else {
            if ((c == '.' || c == '!' || c == '?') && !out.empty() && out.back() == ' ') out.pop_back();
            out += c;
        }
    }
    while (!out.empty() && out.back() == ' ') out.pop_back();
    return out;
}

}  // namespace

std::string check_claims(const SynthAnswer& s, const ParsedAnswer& p) {
    std::ostringstream err;
    if (p.claims.size() != s.claim_texts.size()) {
        err << "claim count " << p.claims.size() << " != " << s.claim_texts.size();
        return err.str();
    }
    std::string joined;
    std::size_t prev_end = 0, total_cites = 0, dangling = 0;
    for (std::size_t k = 0; k < p.claims.size(); ++k) {
        const auto& c = p.claims[k];
        if (c.claim_id != k + 1) err << "claim " << k << " has id " << c.claim_id << "; ";
        if (c.text != s.claim_texts[k]) err << "claim " << k + 1 << " text '" << c.text << "'; ";
        if (c.char_span.begin < prev_end || c.char_span.end > s.text.size() || c.char_span.begin > c.char_span.end)
            err << "claim " << k + 1 << " span out of order; ";
        // Everything between spans is whitespace.
        for (std::size_t i = prev_end; i < std::min(c.char_span.begin, s.text.size()); ++i)
            if (!std::isspace(static_cast<unsigned char>(s.text[i]))) err << "text outside spans at " << i << "; ";
        prev_end = c.char_span.end;

        // Cut the recorded citations out by position and compare.
        std::string body = s.text.substr(c.char_span.begin, c.char_span.end - c.char_span.begin);
        std::string cut;
        std::size_t pos = c.char_span.begin;
        std::vector<std::size_t> idx;
        std::vector<std::string> want_refs;
        for (const auto& cit : c.citations) {
            cut += s.text.substr(pos, cit.span.begin - pos);
            auto g = s.text.substr(cit.span.begin, cit.span.end - cit.span.begin);
            if (g != "[" + std::to_string(cit.local_index) + "]") err << "citation span holds '" << g << "'; ";
            pos = cit.span.end;
            idx.push_back(cit.local_index);
            if (cit.local_index >= 1 && cit.local_index <= s.bundle.docs.size()) {
                auto id = s.bundle.docs[cit.local_index - 1].doc_id;
                if (std::find(want_refs.begin(), want_refs.end(), id) == want_refs.end()) want_refs.push_back(id);
            } else {
                ++dangling;
            }
        }
        cut += s.text.substr(pos, c.char_span.end - pos);
        if (squeeze(cut) != s.claim_texts[k]) err << "claim " << k + 1 << " does not round-trip: '" << cut << "'; ";
        if (idx != s.citations[k]) err << "claim " << k + 1 << " citation indices differ; ";
        if (c.refs != want_refs) err << "claim " << k + 1 << " refs differ; ";
        total_cites += c.citations.size();
        if (!joined.empty()) joined += ' ';
        joined += body;
    }
    for (std::size_t i = prev_end; i < s.text.size(); ++i)
        if (!std::isspace(static_cast<unsigned char>(s.text[i]))) err << "trailing text outside spans; ";
    if (squeeze(joined) != squeeze(s.text)) err << "spans do not reconstruct the answer; ";

    std::size_t groups = 0;
    for (const auto& v : s.citations) groups += v.size();
    if (total_cites != groups) err << "citations " << total_cites << " != inserted " << groups << "; ";
    if (p.dangling.size() != dangling) err << "dangling " << p.dangling.size() << " != " << dangling << "; ";
    for (const auto& d : p.dangling)
        if (d.local_index >= 1 && d.local_index <= s.bundle.docs.size()) err << "resolvable index reported dangling; ";
    return err.str();
}

namespace {

HttpReply reply_of(const httplib::Result& r) {
    HttpReply out;
    if (!r) return out;
    out.status = r->status;
    out.body = r->body;
    for (const auto& [k, v] : r->headers) out.headers.emplace(k, v);
    return out;
}

httplib::Client client_for(int port) {
    httplib::Client c("127.0.0.1", port);
    c.set_read_timeout(std::chrono::seconds(60));
    return c;
}

}  // namespace

ServiceHarness::ServiceHarness(const Engine& engine, FeedbackStore* feedback, ServiceConfig cfg)
    : service_(engine, feedback, std::move(cfg)) {
    port_ = service_.bind_any("127.0.0.1");
    if (port_ <= 0) throw std::runtime_error("cannot bind a loopback port");
    thread_ = std::thread([this] { service_.listen_after_bind(); });
    service_.wait_until_ready();
}

ServiceHarness::~ServiceHarness() {
    service_.stop();
    if (thread_.joinable()) thread_.join();
}

HttpReply ServiceHarness::get(const std::string& path_and_query) const {
    auto c = client_for(port_);
    return reply_of(c.Get(path_and_query));
}

HttpReply ServiceHarness::post(const std::string& path, const std::string& json_body) const {
    auto c = client_for(port_);
    return reply_of(c.Post(path, json_body, "application/json"));
}

HttpReply ServiceHarness::options(const std::string& path, const std::string& origin) const {
    auto c = client_for(port_);
    httplib::Headers h = {{"Origin", origin}, {"Access-Control-Request-Method", "POST"}};
    return reply_of(c.Options(path, h));
}

void build_e2e_index(const std::filesystem::path& dir) {
    auto corpus = Corpus::load(e2e_corpus_dir());
    HashingEmbedder embedder(BackendSettings{}.embedding_dim);
    build_index(corpus, dir, embedder, IndexConfig{});
}

std::unique_ptr<Engine> open_e2e_engine(const std::filesystem::path& index_dir) {
    return Engine::open(index_dir, e2e_corpus_dir(), EngineConfig{});
}

}  // namespace verifai::testing

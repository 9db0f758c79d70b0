#include "verifai/pipeline.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>

#include "verifai/error.hpp"
#include "verifai/text.hpp"

namespace verifai {

using nlohmann::json;
namespace fs = std::filesystem;

IndexManifest build_index(const Corpus& corpus, const fs::path& dir, const Embedder& embedder,
                          const IndexConfig& cfg) {
    if (corpus.empty()) throw IndexError("corpus is empty");
    cfg.segmenter.validate();

    WhitespaceTokenizer tok;
    std::vector<Segment> segments;
    for (const auto& doc : corpus.documents()) {
        auto s = segment(doc, cfg.segmenter, tok);
        segments.insert(segments.end(), std::make_move_iterator(s.begin()), std::make_move_iterator(s.end()));
    }

    fs::create_directories(dir);
    LexicalIndex::build(corpus.documents(), dir / "lex", cfg.bm25);
    VectorIndex::build(dir / "vec", segments, embedder, {cfg.quantize, std::max<std::size_t>(1, cfg.threads)});

    IndexManifest m;
    m.documents = corpus.size();
    m.segments = segments.size();
    m.dim = embedder.dim();
    m.quantized = cfg.quantize;
    m.embedder = embedder.describe();
    m.segmenter = cfg.segmenter;
    m.bm25 = cfg.bm25;

    json j = {
        {"format_version", 1},
        {"documents", m.documents},
        {"segments", m.segments},
        {"dim", m.dim},
        {"quantized", m.quantized},
        {"embedder", m.embedder},
        {"segmenter", {{"max_tokens", m.segmenter.max_tokens}, {"overlap", m.segmenter.overlap}}},
        {"bm25", {{"k1", m.bm25.k1}, {"b", m.bm25.b}}},
    };
    std::ofstream out(dir / kManifestFile, std::ios::binary | std::ios::trunc);
    out << j.dump(2) << '\n';
    if (!out) throw IndexError("cannot write " + (dir / kManifestFile).string());
    return m;
}

IndexManifest read_manifest(const fs::path& dir) {
    std::ifstream in(dir / kManifestFile, std::ios::binary);
    if (!in) throw IndexError("index manifest not found in " + dir.string());
    try {
        auto j = json::parse(in);
        IndexManifest m;
        m.documents = j.at("documents").get<std::size_t>();
        m.segments = j.at("segments").get<std::size_t>();
        m.dim = j.at("dim").get<std::size_t>();
        m.quantized = j.at("quantized").get<bool>();
        m.embedder = j.at("embedder").get<std::string>();
        m.segmenter.max_tokens = j.at("segmenter").at("max_tokens").get<std::size_t>();
        m.segmenter.overlap = j.at("segmenter").at("overlap").get<std::size_t>();
        m.bm25.k1 = j.at("bm25").at("k1").get<double>();
        m.bm25.b = j.at("bm25").at("b").get<double>();
        return m;
    } catch (const json::exception& e) {
        throw IndexError("bad index manifest in " + dir.string() + ": " + e.what());
    }
}

double round9(double v) {
    if (!std::isfinite(v)) return v;
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    double r = std::strtod(buf, nullptr);
    return r == 0.0 ? 0.0 : r;  // no negative zero
}

std::unique_ptr<Engine> Engine::open(const fs::path& index_dir, const fs::path& corpus_dir, EngineConfig cfg) {
    cfg.fusion.validate();
    auto manifest = read_manifest(index_dir);
    auto corpus = Corpus::load(corpus_dir);
    auto lexical = LexicalIndex::open(index_dir / "lex");
    auto vectors = VectorIndex::open(index_dir / "vec");
    if (cfg.backends.embed.kind == BackendConfig::Kind::Reference) cfg.backends.embedding_dim = vectors.dim();
    auto backends = make_backends(cfg.backends);
    if (backends.embedder->dim() != vectors.dim())
        throw IndexError("embedder dimension " + std::to_string(backends.embedder->dim()) +
                         " does not match index dimension " + std::to_string(vectors.dim()));
    return std::make_unique<Engine>(std::move(corpus), std::move(lexical), std::move(vectors), std::move(backends),
                                    std::move(cfg), std::move(manifest));
}

Engine::Engine(Corpus corpus, LexicalIndex lexical, VectorIndex vectors, Backends backends, EngineConfig cfg,
               IndexManifest manifest)
    : corpus_(std::move(corpus)),
      lexical_(std::move(lexical)),
      vectors_(std::move(vectors)),
      backends_(std::move(backends)),
      cfg_(std::move(cfg)),
      manifest_(std::move(manifest)),
      searcher_(lexical_, vectors_, *backends_.embedder),
      answers_(searcher_, corpus_, *backends_.generator, backends_.generation, cfg_.fusion),
      verifier_(*backends_.nli, *backends_.embedder, cfg_.evidence_sentences) {
    verifier_.set_fail_on_backend_error(true);
}

std::vector<FusedResult> Engine::search(std::string_view query, std::size_t k) const {
    if (k == 0) throw ValidationError("k must be at least 1");
    if (text::is_blank(query)) throw ValidationError("query must be non-empty");
    auto f = cfg_.fusion;
    f.final_k = k;
    f.arm_k = std::max(f.arm_k, k);
    try {
        return searcher_.search(query, f);
    } catch (const ValidationError&) {
        throw;
    } catch (const std::exception& e) {
        throw StageError("retrieval", e.what());
    }
}

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
    return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

json nullable(const std::optional<double>& v) { return v ? json(round9(*v)) : json(nullptr); }

}  // namespace

AskResult Engine::ask(std::string_view question, std::size_t k) const {
    AskResult r;
    auto t0 = Clock::now();
    r.retrieval = answers_.retrieve(question, k);
    auto bundle = build_prompt(question, r.retrieval, corpus_);
    r.timings.retrieval_ms = ms_since(t0);

    t0 = Clock::now();
    r.answer = answers_.generate(std::move(bundle));
    r.timings.generation_ms = ms_since(t0);

    t0 = Clock::now();
    r.parsed = parse_claims(r.answer);
    r.timings.parsing_ms = ms_since(t0);

    t0 = Clock::now();
    BundleSource docs(r.answer.bundle);
    r.verdicts = verifier_.verify_claims(r.parsed.claims, docs);
    r.timings.verification_ms = ms_since(t0);
    return r;
}

json fused_to_json(std::span<const FusedResult> results, const Corpus* corpus) {
    json out = json::array();
    std::size_t rank = 0;
    for (const auto& f : results) {
        json j = {
            {"rank", ++rank},
            {"doc_id", f.doc_id},
            {"fused", round9(f.fused)},
            {"lex_norm", round9(f.lex_norm)},
            {"sem_norm", round9(f.sem_norm)},
            {"lex_raw", nullable(f.lex_raw)},
            {"sem_raw", nullable(f.sem_raw)},
            {"best_segment", f.best_segment ? json(*f.best_segment) : json(nullptr)},
        };
        if (corpus) {
            if (const auto* d = corpus->find(f.doc_id)) j["title"] = d->title;
        }
        out.push_back(std::move(j));
    }
    return out;
}

json claims_to_json(const ParsedAnswer& parsed) {
    json claims = json::array();
    for (const auto& c : parsed.claims) {
        json cites = json::array();
        for (const auto& ci : c.citations) cites.push_back(ci.local_index);
        claims.push_back({
            {"claim_id", c.claim_id},
            {"text", c.text},
            {"span", {c.char_span.begin, c.char_span.end}},
            {"citations", std::move(cites)},
            {"refs", c.refs},
        });
    }
    json dangling = json::array();
    for (const auto& d : parsed.dangling)
        dangling.push_back({{"claim_id", d.claim_id}, {"index", d.local_index}, {"span", {d.span.begin, d.span.end}}});
    return {{"claims", std::move(claims)}, {"dangling", std::move(dangling)}};
}

json verdict_to_json(const Verdict& v) {
    json per_ref = json::array();
    for (const auto& r : v.per_ref) {
        json j = {{"doc_id", r.doc_id},
                  {"label", to_string(r.label.value)},
                  {"confidence", round9(r.label.confidence)}};
        if (r.error) j["error"] = *r.error;
        per_ref.push_back(std::move(j));
    }
    json evidence = json::array();
    for (const auto& e : v.evidence) {
        json sentences = json::array();
        for (const auto& s : e.sentences)
            sentences.push_back({{"index", s.sentence_index}, {"text", s.text}, {"score", round9(s.score)}});
        evidence.push_back({{"doc_id", e.doc_id}, {"sentences", std::move(sentences)}});
    }
    return {{"aggregate", to_string(v.aggregate)}, {"per_ref", std::move(per_ref)}, {"evidence", std::move(evidence)}};
}

json bundle_to_json(const PromptBundle& bundle) {
    json docs = json::array();
    for (const auto& d : bundle.docs)
        docs.push_back({{"index", d.local_index}, {"doc_id", d.doc_id}, {"title", d.title}, {"abstract", d.abstract}});
    return {{"question", bundle.question}, {"docs", std::move(docs)}};
}

PromptBundle bundle_from_json(const json& j, const Corpus* corpus) {
    if (!j.is_object()) throw ValidationError("bundle must be a JSON object");
    const json* table = nullptr;
    if (auto it = j.find("docs"); it != j.end()) table = &*it;
    else if (auto it2 = j.find("bundle"); it2 != j.end()) table = &*it2;
    if (!table || !table->is_array()) throw ValidationError("bundle needs a \"docs\" array");

    PromptBundle b;
    b.question = j.value("question", std::string());
    try {
        for (const auto& e : *table) {
            BundleDoc d;
            d.local_index = e.at("index").get<std::size_t>();
            d.doc_id = e.at("doc_id").get<std::string>();
            d.title = e.value("title", std::string());
            d.abstract = e.value("abstract", std::string());
            if (d.abstract.empty() && corpus) {
                const auto* doc = corpus->find(d.doc_id);
                if (!doc) throw ValidationError("bundle document '" + d.doc_id + "' is not in the corpus");
                d.title = doc->title;
                d.abstract = doc->abstract;
            }
            if (d.local_index != b.docs.size() + 1)
                throw ValidationError("bundle indices must run 1..n in order");
            b.docs.push_back(std::move(d));
        }
    } catch (const json::exception& e) {
        throw ValidationError(std::string("bad bundle entry: ") + e.what());
    }
    if (b.docs.size() > kMaxPromptDocuments)
        throw ValidationError("bundle holds more than " + std::to_string(kMaxPromptDocuments) + " documents");
    if (!b.question.empty() && !b.docs.empty()) b.rendered = render_prompt(b.question, b.docs);
    return b;
}

json ask_to_json(const AskResult& r, const OverrideView* overrides, bool include_timings) {
    // Latest override per (normalized claim text, doc_id).
    std::map<std::pair<std::string, std::string>, const FeedbackEvent*> latest;
    if (overrides) {
        for (const auto& ev : overrides->events) {
            if (ev.kind != FeedbackKind::LabelOverride) continue;
            auto& slot = latest[{text::normalize_for_match(ev.claim_text), ev.doc_id}];
            if (!slot || slot->event_id < ev.event_id) slot = &ev;
        }
    }

    json bundle = json::array();
    for (std::size_t i = 0; i < r.answer.bundle.docs.size(); ++i) {
        const auto& d = r.answer.bundle.docs[i];
        json j = {{"index", d.local_index}, {"doc_id", d.doc_id}, {"title", d.title}, {"abstract", d.abstract}};
        if (i < r.retrieval.size()) j["score"] = round9(r.retrieval[i].fused);
        bundle.push_back(std::move(j));
    }

    auto parsed = claims_to_json(r.parsed);
    json claims = json::array();
    for (std::size_t i = 0; i < r.parsed.claims.size(); ++i) {
        json c = parsed["claims"][i];
        json v = i < r.verdicts.size() ? verdict_to_json(r.verdicts[i]) : json(nullptr);
        if (!latest.empty() && i < r.verdicts.size()) {
            auto key_text = text::normalize_for_match(r.parsed.claims[i].text);
            std::vector<NliValue> effective;
            bool any = false;
            for (std::size_t j = 0; j < r.verdicts[i].per_ref.size(); ++j) {
                const auto& ref = r.verdicts[i].per_ref[j];
                auto it = latest.find({key_text, ref.doc_id});
                auto value = ref.label.value;
                if (it != latest.end()) {
                    any = true;
                    value = parse_nli_value(it->second->new_value).value_or(value);
                    v["per_ref"][j]["override"] = {{"label", to_string(value)}, {"event_id", it->second->event_id}};
                }
                effective.push_back(value);
            }
            if (any) v["effective_aggregate"] = to_string(aggregate_labels(effective));
        }
        c["verdict"] = std::move(v);
        claims.push_back(std::move(c));
    }

    json out = {
        {"question", r.answer.bundle.question},
        {"answer", r.answer.text},
        {"truncated", r.answer.truncated},
        {"bundle", std::move(bundle)},
        {"claims", std::move(claims)},
        {"dangling", parsed["dangling"]},
    };
    if (include_timings) {
        out["timings_ms"] = {{"retrieval", round9(r.timings.retrieval_ms)},
                             {"generation", round9(r.timings.generation_ms)},
                             {"parsing", round9(r.timings.parsing_ms)},
                             {"verification", round9(r.timings.verification_ms)}};
    }
    return out;
}

}  // namespace verifai

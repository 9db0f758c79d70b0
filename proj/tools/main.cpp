#include <pthread.h>
#include <signal.h>

#include <CLI11.hpp>
#include <atomic>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include <verifai/error.hpp>
#include <verifai/feedback.hpp>
#include <verifai/pipeline.hpp>
#include <verifai/scifact.hpp>
#include <verifai/service.hpp>

#include "config.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace verifai::cli {
namespace {

enum Exit : int { kOk = 0, kError = 1, kNotSupported = 2, kNoResults = 3, kBackend = 4 };

struct Globals {
    std::string config_file;
    bool json = false;
    std::size_t threads = 0;
};

std::string fmt9(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw ValidationError("cannot read " + p.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const fs::path& p, std::string_view content) {
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    out << content;
    if (!out) throw Error("cannot write " + p.string());
}

json read_json_file(const fs::path& p) {
    try {
        return json::parse(read_file(p));
    } catch (const json::parse_error& e) {
        throw ValidationError(p.string() + ": " + e.what());
    }
}

void require_dir(const fs::path& p, const char* what) {
    if (!fs::is_directory(p)) throw ValidationError(std::string(what) + " directory not found: " + p.string());
}

Config load_config(const Globals& g) {
    auto cfg = Config::load(g.config_file.empty() ? std::nullopt : std::optional<fs::path>(g.config_file));
    if (g.threads) cfg.set("index.threads", std::to_string(g.threads));
    return cfg;
}

// Answer text for parse/verify: a plain text file, or a JSON file holding
// an "answer" field (such as a saved AskResponse).
std::string load_answer(const fs::path& p) {
    auto content = read_file(p);
    if (p.extension() == ".json") {
        try {
            auto j = json::parse(content);
            if (j.is_object() && j.contains("answer")) return j.at("answer").get<std::string>();
        } catch (const json::exception&) {
        }
    }
    return content;
}

int run_ingest(const Globals&, const std::vector<std::string>& inputs, const std::string& out) {
    std::vector<fs::path> paths(inputs.begin(), inputs.end());
    auto result = ingest_files(paths);
    Corpus::write(out, result);
    std::cout << stats_to_json(result.stats) << '\n';
    return kOk;
}

int run_index(const Globals& g, const std::string& corpus_dir, const std::string& out, std::optional<std::size_t> max_tokens,
              std::optional<std::size_t> overlap, bool no_quantize) {
    auto cfg = load_config(g);
    require_dir(corpus_dir, "corpus");
    if (max_tokens) cfg.set("segment.max_tokens", std::to_string(*max_tokens));
    if (overlap) cfg.set("segment.overlap", std::to_string(*overlap));
    if (no_quantize) cfg.set("index.quantize", "false");
    auto corpus = Corpus::load(corpus_dir);
    auto backends = make_backends(cfg.backends());
    auto m = build_index(corpus, out, *backends.embedder, cfg.index());
    if (g.json) {
        std::cout << json{{"documents", m.documents}, {"segments", m.segments}, {"dim", m.dim}, {"quantized", m.quantized}}
                         .dump()
                  << '\n';
    } else {
        std::cout << "documents: " << m.documents << "\nsegments: " << m.segments << '\n';
    }
    return kOk;
}

std::unique_ptr<Engine> open_engine(const Config& cfg, const std::string& index, const std::string& corpus) {
    require_dir(index, "index");
    require_dir(corpus, "corpus");
    return Engine::open(index, corpus, cfg.engine());
}

int run_search(const Globals& g, const std::string& index, const std::string& corpus, const std::string& query,
               std::optional<std::size_t> k) {
    auto cfg = load_config(g);
    auto engine = open_engine(cfg, index, corpus);
    auto results = engine->search(query, k.value_or(cfg.count("fusion.final_k")));
    const int rc = results.empty() ? kNoResults : kOk;
    if (results.empty()) std::cerr << "no documents matched the query\n";
    if (g.json) {
        std::cout << json{{"query", query}, {"results", fused_to_json(results, &engine->corpus())}}.dump() << '\n';
        return rc;
    }
    for (const auto& r : results)
        std::cout << r.doc_id << '\t' << fmt9(round9(r.fused)) << '\t' << fmt9(round9(r.lex_norm)) << '\t'
                  << fmt9(round9(r.sem_norm)) << '\n';
    return rc;
}

int run_ask(const Globals& g, const std::string& index, const std::string& corpus, const std::string& question,
            std::size_t k, const std::string& answer_out, const std::string& bundle_out) {
    auto cfg = load_config(g);
    auto engine = open_engine(cfg, index, corpus);
    auto r = engine->ask(question, k);
    if (!answer_out.empty()) write_file(answer_out, r.answer.text + "\n");
    if (!bundle_out.empty()) write_file(bundle_out, bundle_to_json(r.answer.bundle).dump(2) + "\n");
    if (g.json) {
        std::cout << ask_to_json(r, nullptr, true).dump() << '\n';
        return kOk;
    }
    std::cout << r.answer.text << "\n\n";
    for (const auto& d : r.answer.bundle.docs) std::cout << '[' << d.local_index << "]\t" << d.doc_id << '\t' << d.title << '\n';
    return kOk;
}

int run_parse(const Globals&, const std::string& answer_file, const std::string& bundle_file) {
    auto bundle = bundle_from_json(read_json_file(bundle_file));
    auto parsed = parse_claims(load_answer(answer_file), bundle);
    std::cout << claims_to_json(parsed).dump(2) << '\n';
    return kOk;
}

int run_verify(const Globals& g, const std::string& answer_file, const std::string& bundle_file,
               const std::string& corpus_dir) {
    auto cfg = load_config(g);
    std::optional<Corpus> corpus;
    if (!corpus_dir.empty()) {
        require_dir(corpus_dir, "corpus");
        corpus = Corpus::load(corpus_dir);
    }
    auto bundle = bundle_from_json(read_json_file(bundle_file), corpus ? &*corpus : nullptr);
    auto backends = make_backends(cfg.backends());
    Verifier verifier(*backends.nli, *backends.embedder, cfg.count("verify.evidence_sentences"));
    auto parsed = parse_claims(load_answer(answer_file), bundle);
    BundleSource docs(bundle);
    auto verdicts = verifier.verify_claims(parsed.claims, docs);

    bool all_supported = true;
    for (const auto& v : verdicts) all_supported = all_supported && v.aggregate == Aggregate::Supported;

    if (g.json) {
        json claims = json::array();
        auto cj = claims_to_json(parsed);
        for (std::size_t i = 0; i < verdicts.size(); ++i) {
            auto c = cj["claims"][i];
            c["verdict"] = verdict_to_json(verdicts[i]);
            claims.push_back(std::move(c));
        }
        std::cout << json{{"claims", std::move(claims)}, {"dangling", cj["dangling"]}, {"all_supported", all_supported}}.dump()
                  << '\n';
    } else {
        for (std::size_t i = 0; i < verdicts.size(); ++i) {
            std::cout << parsed.claims[i].claim_id << '\t' << to_string(verdicts[i].aggregate) << '\t'
                      << parsed.claims[i].text << '\n';
            for (const auto& r : verdicts[i].per_ref) {
                std::cout << "  " << r.doc_id << '\t' << to_string(r.label.value);
                if (r.error) std::cout << "\t(" << *r.error << ')';
                std::cout << '\n';
            }
        }
    }
    return all_supported ? kOk : kNotSupported;
}

json label_counts_json(std::span<const scifact::NliExample> ex) {
    auto c = scifact::count_labels(ex);
    json j = json::object();
    for (std::size_t i = 0; i < scifact::kLabels.size(); ++i) j[std::string(to_string(scifact::kLabels[i]))] = c[i];
    return j;
}

int run_scifact_clean(const Globals&, const std::string& input, const std::string& claims, const std::string& corpus,
                      const std::string& out) {
    std::vector<scifact::RawClaimEntry> raw;
    if (!claims.empty()) {
        if (corpus.empty()) throw ValidationError("--claims needs --corpus");
        raw = scifact::read_scifact_release(claims, corpus);
    } else {
        if (input.empty()) throw ValidationError("give --input or --claims/--corpus");
        std::ifstream in(input);
        if (!in) throw ValidationError("cannot read " + input);
        raw = scifact::read_raw_entries(in);
    }
    auto result = scifact::clean(raw);
    std::ostringstream ss;
    scifact::write_examples(ss, result.examples);
    write_file(out, ss.str());
    std::cout << json{{"entries", raw.size()},
                      {"examples", result.examples.size()},
                      {"dropped_no_citation", result.dropped_no_citation},
                      {"duplicates_removed", result.duplicates_removed},
                      {"labels", label_counts_json(result.examples)}}
                     .dump()
              << '\n';
    return kOk;
}

std::vector<scifact::NliExample> read_examples_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot read " + path);
    return scifact::read_examples(in);
}

int run_scifact_split(const Globals& g, const std::string& input, const std::string& out_dir, std::uint64_t seed,
                      double validation, double test) {
    auto examples = read_examples_file(input);
    auto split = scifact::split_examples(examples, seed, validation, test);
    fs::create_directories(out_dir);
    auto dump = [&](const char* name, const std::vector<scifact::NliExample>& ex) {
        std::ostringstream ss;
        scifact::write_examples(ss, ex);
        write_file(fs::path(out_dir) / name, ss.str());
    };
    dump("train.jsonl", split.train);
    dump("validation.jsonl", split.validation);
    dump("test.jsonl", split.test);
    if (g.json) {
        std::cout << json{{"seed", seed},
                          {"all", label_counts_json(examples)},
                          {"train", label_counts_json(split.train)},
                          {"validation", label_counts_json(split.validation)},
                          {"test", label_counts_json(split.test)}}
                         .dump()
                  << '\n';
    } else {
        std::cout << scifact::split_report(examples, split);
    }
    return kOk;
}

int run_scifact_eval(const Globals& g, const std::string& input) {
    auto cfg = load_config(g);
    auto examples = read_examples_file(input);
    auto backends = make_backends(cfg.backends());
    auto m = scifact::evaluate_nli(*backends.nli, examples);
    if (g.json) {
        json per = json::object();
        for (std::size_t i = 0; i < scifact::kLabels.size(); ++i) {
            const auto& l = m.per_label[i];
            per[std::string(to_string(scifact::kLabels[i]))] = {
                {"precision", round9(l.precision)}, {"recall", round9(l.recall)}, {"f1", round9(l.f1)}, {"support", l.support}};
        }
        std::cout << json{{"accuracy", round9(m.accuracy)},
                          {"total", m.total},
                          {"per_label", std::move(per)},
                          {"weighted_f1", round9(m.weighted.f1)},
                          {"confusion", m.confusion}}
                         .dump()
                  << '\n';
    } else {
        std::cout << scifact::format_metrics(m);
    }
    return kOk;
}

int run_feedback_export(const Globals& g, const std::string& log, const std::string& kind_name, const std::string& out,
                        const std::string& corpus_dir) {
    auto cfg = load_config(g);
    auto kind = parse_feedback_kind(kind_name);
    if (!kind) throw ValidationError("--kind must be LABEL_OVERRIDE or ANSWER_EDIT");
    require_dir(corpus_dir, "corpus");
    auto corpus = Corpus::load(corpus_dir);
    fs::path log_path = log.empty() ? fs::path(cfg.str("feedback.log")) : fs::path(log);
    if (!fs::exists(log_path)) throw ValidationError("feedback log not found: " + log_path.string());
    auto events = FeedbackStore::replay(log_path);
    std::ostringstream ss;
    auto stats = export_feedback(events, *kind, corpus, ss);
    write_file(out, ss.str());
    std::cout << json{{"written", stats.written}, {"skipped", stats.skipped}}.dump() << '\n';
    return kOk;
}

std::pair<std::string, int> split_addr(const std::string& addr) {
    auto colon = addr.rfind(':');
    if (colon == std::string::npos) throw ValidationError("--addr must be host:port");
    int port = 0;
    try {
        port = std::stoi(addr.substr(colon + 1));
    } catch (const std::exception&) {
        port = -1;
    }
    if (port < 0 || port > 65535) throw ValidationError("bad port in --addr " + addr);
    return {addr.substr(0, colon), port};
}

int run_serve(const Globals& g, const std::string& addr, const std::string& index, const std::string& corpus,
              const std::string& feedback_log, const std::string& cors_origin) {
    // Block before any thread exists (the feedback writer included) so every
    // thread inherits the mask and only the waiter below sees the signal.
    sigset_t set;
    sigemptyset(&set);
    sigaddset(&set, SIGINT);
    sigaddset(&set, SIGTERM);
    pthread_sigmask(SIG_BLOCK, &set, nullptr);

    auto cfg = load_config(g);
    if (!cors_origin.empty()) cfg.set("service.cors_origin", cors_origin);
    auto [host, port] = split_addr(addr);
    auto engine = open_engine(cfg, index, corpus);
    FeedbackStore store(feedback_log.empty() ? fs::path(cfg.str("feedback.log")) : fs::path(feedback_log));
    auto scfg = cfg.service();
    scfg.access_log = &std::cerr;

    Service service(*engine, &store, scfg);
    std::atomic<bool> done{false};
    std::thread waiter([&] {
        int sig = 0;
        sigwait(&set, &sig);
        if (!done) std::cerr << "shutting down\n";
        service.stop();
    });

    std::cerr << "listening on " << host << ':' << port << '\n';
    bool ok = service.listen(host, port);
    done = true;
    kill(getpid(), SIGTERM);  // release the waiter if listen returned on its own
    waiter.join();
    if (!ok && port != 0) {
        std::cerr << "error: cannot listen on " << addr << '\n';
        return kError;
    }
    return kOk;
}

}  // namespace
}  // namespace verifai::cli

int main(int argc, char** argv) {
    using namespace verifai;
    using namespace verifai::cli;

    CLI::App app{"Verifiable question answering over scientific abstracts"};
    app.require_subcommand(1);
    app.fallthrough();
    Globals g;
    app.add_option("--config", g.config_file, "JSON config file");
    app.add_flag("--json", g.json, "Machine-readable output");
    app.add_option("--threads", g.threads, "Worker threads (default: all cores)");

    std::function<int()> action;

    auto* ingest = app.add_subcommand("ingest", "Validate and filter corpus records");
    std::vector<std::string> inputs;
    std::string ingest_out;
    ingest->add_option("--input", inputs, "JSONL files")->required()->expected(1, -1);
    ingest->add_option("--out", ingest_out, "Corpus directory")->required();
    ingest->callback([&] { action = [&] { return run_ingest(g, inputs, ingest_out); }; });

    auto* index = app.add_subcommand("index", "Build lexical and vector indexes");
    std::string index_corpus, index_out;
    std::optional<std::size_t> max_tokens, overlap;
    bool no_quantize = false;
    index->add_option("--corpus", index_corpus)->required();
    index->add_option("--out", index_out)->required();
    index->add_option("--max-tokens", max_tokens);
    index->add_option("--overlap", overlap);
    index->add_flag("--no-quantize", no_quantize, "Store float32 vectors");
    index->callback([&] { action = [&] { return run_index(g, index_corpus, index_out, max_tokens, overlap, no_quantize); }; });

    std::string idx_dir, corpus_dir;
    auto* search = app.add_subcommand("search", "Hybrid search");
    std::string query;
    std::optional<std::size_t> search_k;
    search->add_option("--index", idx_dir)->required();
    search->add_option("--corpus", corpus_dir)->required();
    search->add_option("--query", query)->required();
    search->add_option("--k", search_k);
    search->callback([&] { action = [&] { return run_search(g, idx_dir, corpus_dir, query, search_k); }; });

    auto* ask = app.add_subcommand("ask", "Answer a question with references");
    std::string question, answer_out, bundle_out;
    std::size_t ask_k = kMaxPromptDocuments;
    ask->add_option("--index", idx_dir)->required();
    ask->add_option("--corpus", corpus_dir)->required();
    ask->add_option("--question", question)->required();
    ask->add_option("--k", ask_k)->check(CLI::Range(std::size_t{1}, kMaxPromptDocuments));
    ask->add_option("--answer-out", answer_out, "Write the answer text here");
    ask->add_option("--bundle-out", bundle_out, "Write the bundle table here");
    ask->callback([&] { action = [&] { return run_ask(g, idx_dir, corpus_dir, question, ask_k, answer_out, bundle_out); }; });

    std::string answer_file, bundle_file;
    auto* parse = app.add_subcommand("parse", "Split an answer into claims");
    parse->add_option("--answer", answer_file)->required()->check(CLI::ExistingFile);
    parse->add_option("--bundle", bundle_file)->required()->check(CLI::ExistingFile);
    parse->callback([&] { action = [&] { return run_parse(g, answer_file, bundle_file); }; });

    auto* verify = app.add_subcommand("verify", "Verify every claim of an answer");
    std::string verify_corpus;
    verify->add_option("--answer", answer_file)->required()->check(CLI::ExistingFile);
    verify->add_option("--bundle", bundle_file)->required()->check(CLI::ExistingFile);
    verify->add_option("--corpus", verify_corpus, "Resolve bundle documents without text");
    verify->callback([&] { action = [&] { return run_verify(g, answer_file, bundle_file, verify_corpus); }; });

    auto* sci = app.add_subcommand("scifact", "NLI dataset preparation");
    sci->require_subcommand(1);
    std::string sci_in, sci_claims, sci_corpus, sci_out;
    auto* clean = sci->add_subcommand("clean", "Split multi-citation claims and deduplicate");
    clean->add_option("--input", sci_in, "Native raw JSONL");
    clean->add_option("--claims", sci_claims, "Release claims JSONL");
    clean->add_option("--corpus", sci_corpus, "Release corpus JSONL");
    clean->add_option("--out", sci_out)->required();
    clean->callback([&] { action = [&] { return run_scifact_clean(g, sci_in, sci_claims, sci_corpus, sci_out); }; });

    auto* split = sci->add_subcommand("split", "Stratified train/validation/test split");
    std::uint64_t seed = scifact::kDefaultSeed;
    double val_frac = 0.1, test_frac = 0.1;
    split->add_option("--input", sci_in)->required();
    split->add_option("--out-dir", sci_out)->required();
    split->add_option("--seed", seed);
    split->add_option("--validation", val_frac)->check(CLI::Range(0.0, 1.0));
    split->add_option("--test", test_frac)->check(CLI::Range(0.0, 1.0));
    split->callback([&] { action = [&] { return run_scifact_split(g, sci_in, sci_out, seed, val_frac, test_frac); }; });

    auto* eval = sci->add_subcommand("eval", "Score the NLI backend on labelled examples");
    eval->add_option("--input", sci_in)->required();
    eval->callback([&] { action = [&] { return run_scifact_eval(g, sci_in); }; });

    auto* fb = app.add_subcommand("feedback", "Feedback log tools");
    fb->require_subcommand(1);
    auto* exp = fb->add_subcommand("export", "Export training data from the feedback log");
    std::string fb_log, fb_kind, fb_out, fb_corpus;
    exp->add_option("--log", fb_log, "Feedback log (default: feedback.log key)");
    exp->add_option("--kind", fb_kind, "LABEL_OVERRIDE or ANSWER_EDIT")->required();
    exp->add_option("--out", fb_out)->required();
    exp->add_option("--corpus", fb_corpus)->required();
    exp->callback([&] { action = [&] { return run_feedback_export(g, fb_log, fb_kind, fb_out, fb_corpus); }; });

    auto* serve = app.add_subcommand("serve", "Run the REST service");
    std::string addr = "127.0.0.1:8080", serve_log, cors;
    serve->add_option("--addr", addr, "host:port");
    serve->add_option("--index", idx_dir)->required();
    serve->add_option("--corpus", corpus_dir)->required();
    serve->add_option("--feedback-log", serve_log);
    serve->add_option("--cors-origin", cors);
    serve->callback([&] { action = [&] { return run_serve(g, addr, idx_dir, corpus_dir, serve_log, cors); }; });

    CLI11_PARSE(app, argc, argv);

    try {
        return action ? action() : kError;
    } catch (const NoResultsError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kNoResults;
    } catch (const StageError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kBackend;
    } catch (const BackendError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kBackend;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kError;
    }
}

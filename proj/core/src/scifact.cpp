#include "verifai/scifact.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <random>
#include <set>
#include <sstream>
#include <tuple>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "verifai/error.hpp"
#include "verifai/text.hpp"

namespace verifai::scifact {

using nlohmann::json;

std::size_t label_index(NliValue v) {
    switch (v) {
        case NliValue::NoEvidence: return 0;
        case NliValue::Support: return 1;
        case NliValue::Contradict: return 2;
    }
    return 0;
}

CleanResult clean(std::span<const RawClaimEntry> raw) {
    CleanResult out;
    std::set<std::tuple<std::string, std::string, std::size_t>> seen;
    for (const auto& entry : raw) {
        if (entry.docs.empty()) {
            ++out.dropped_no_citation;
            continue;
        }
        auto claim = text::normalize_whitespace(entry.claim);
        for (const auto& doc : entry.docs) {
            if (!seen.emplace(claim, doc.doc_id, label_index(entry.label)).second) {
                ++out.duplicates_removed;
                continue;
            }
            out.examples.push_back({claim, doc, entry.label});
        }
    }
    return out;
}

namespace {

NliValue label_from_json(const json& j, std::size_t line_no) {
    if (!j.is_string()) throw ValidationError("line " + std::to_string(line_no) + ": label must be a string");
    auto v = parse_nli_value(j.get<std::string>());
    if (!v) throw ValidationError("line " + std::to_string(line_no) + ": unknown label '" + j.get<std::string>() + "'");
    return *v;
}

std::string string_field(const json& j, const char* key, std::size_t line_no, bool required = true) {
    auto it = j.find(key);
    if (it == j.end() || it->is_null()) {
        if (required) throw ValidationError("line " + std::to_string(line_no) + ": missing '" + key + "'");
        return {};
    }
    if (it->is_string()) return it->get<std::string>();
    if (it->is_number_integer()) return std::to_string(it->get<long long>());
    throw ValidationError("line " + std::to_string(line_no) + ": '" + key + "' must be a string");
}

template <typename Fn>
void for_each_json_line(std::istream& in, Fn&& fn) {
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (text::is_blank(line)) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::parse_error& e) {
            throw ValidationError("line " + std::to_string(line_no) + ": " + e.what());
        }
        if (!j.is_object()) throw ValidationError("line " + std::to_string(line_no) + ": not a JSON object");
        fn(j, line_no);
    }
}

std::ifstream open_input(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw ValidationError("cannot open " + p.string());
    return in;
}

}  // namespace

std::vector<RawClaimEntry> read_raw_entries(std::istream& in) {
    std::vector<RawClaimEntry> out;
    for_each_json_line(in, [&](const json& j, std::size_t line_no) {
        RawClaimEntry e;
        e.claim = string_field(j, "claim", line_no);
        e.label = label_from_json(j.value("label", json()), line_no);
        if (auto docs = j.find("docs"); docs != j.end() && docs->is_array()) {
            for (const auto& d : *docs)
                e.docs.push_back({string_field(d, "doc_id", line_no), string_field(d, "title", line_no, false),
                                  string_field(d, "abstract", line_no, false)});
        }
        out.push_back(std::move(e));
    });
    return out;
}

std::vector<RawClaimEntry> read_scifact_release(const std::filesystem::path& claims_path,
                                                const std::filesystem::path& corpus_path) {
    std::unordered_map<std::string, EvidenceDoc> corpus;
    {
        auto in = open_input(corpus_path);
        for_each_json_line(in, [&](const json& j, std::size_t line_no) {
            EvidenceDoc d;
            d.doc_id = string_field(j, "doc_id", line_no);
            d.title = string_field(j, "title", line_no, false);
            if (auto a = j.find("abstract"); a != j.end() && a->is_array()) {
                for (const auto& s : *a) {
                    if (!s.is_string()) continue;
                    if (!d.abstract.empty()) d.abstract.push_back(' ');
                    d.abstract += text::trim(s.get<std::string>());
                }
            } else {
                d.abstract = string_field(j, "abstract", line_no, false);
            }
            corpus.emplace(d.doc_id, std::move(d));
        });
    }

    auto lookup = [&](const std::string& id) -> const EvidenceDoc& {
        auto it = corpus.find(id);
        if (it == corpus.end()) throw ValidationError("claims cite unknown corpus doc_id " + id);
        return it->second;
    };

    std::vector<RawClaimEntry> out;
    auto in = open_input(claims_path);
    for_each_json_line(in, [&](const json& j, std::size_t line_no) {
        std::string claim = string_field(j, "claim", line_no);
        std::set<std::string> evidenced;
        if (auto ev = j.find("evidence"); ev != j.end() && ev->is_object()) {
            for (const auto& [doc_id, annotations] : ev->items()) {
                if (!annotations.is_array() || annotations.empty()) continue;
                auto label = label_from_json(annotations.front().value("label", json()), line_no);
                out.push_back({claim, label, {lookup(doc_id)}});
                evidenced.insert(doc_id);
            }
        }
        RawClaimEntry nei{claim, NliValue::NoEvidence, {}};
        if (auto cited = j.find("cited_doc_ids"); cited != j.end() && cited->is_array()) {
            for (const auto& c : *cited) {
                std::string id = c.is_string() ? c.get<std::string>() : std::to_string(c.get<long long>());
                if (!evidenced.contains(id)) nei.docs.push_back(lookup(id));
            }
        }
        if (!nei.docs.empty() || evidenced.empty()) out.push_back(std::move(nei));
    });
    return out;
}

std::string example_to_json(const NliExample& ex) {
    json j = {
        {"claim", ex.claim},
        {"doc_id", ex.doc.doc_id},
        {"title", ex.doc.title},
        {"abstract", ex.doc.abstract},
        {"label", to_string(ex.label)},
    };
    return j.dump();
}

std::vector<NliExample> read_examples(std::istream& in) {
    std::vector<NliExample> out;
    for_each_json_line(in, [&](const json& j, std::size_t line_no) {
        NliExample ex;
        ex.claim = string_field(j, "claim", line_no);
        ex.doc = {string_field(j, "doc_id", line_no), string_field(j, "title", line_no, false),
                  string_field(j, "abstract", line_no, false)};
        ex.label = label_from_json(j.value("label", json()), line_no);
        out.push_back(std::move(ex));
    });
    return out;
}

void write_examples(std::ostream& out, std::span<const NliExample> examples) {
    for (const auto& ex : examples) out << example_to_json(ex) << '\n';
}

LabelCounts count_labels(std::span<const NliExample> examples) {
    LabelCounts c{};
    for (const auto& ex : examples) ++c[label_index(ex.label)];
    return c;
}

namespace {

// Rounds the 3x3 matrix counts[l] * sizes[s] / n to integers that keep
// every row sum (label counts) and column sum (split sizes), moving each
// entry by less than one. Exhaustive over the 2^9 ways to round up.
std::array<std::array<std::size_t, 3>, 3> round_allocation(const LabelCounts& counts,
                                                           const std::array<std::size_t, 3>& sizes,
                                                           std::size_t n) {
    std::array<std::array<std::size_t, 3>, 3> floor_part{};
    std::array<std::array<double, 3>, 3> frac{};
    for (std::size_t l = 0; l < 3; ++l) {
        for (std::size_t s = 0; s < 3; ++s) {
            std::size_t num = counts[l] * sizes[s];
            floor_part[l][s] = num / n;
            frac[l][s] = static_cast<double>(num % n) / static_cast<double>(n);
        }
    }
    int best_mask = -1;
    double best_score = -1.0;
    for (int mask = 0; mask < 512; ++mask) {
        bool ok = true;
        double score = 0.0;
        for (std::size_t l = 0; l < 3 && ok; ++l) {
            std::size_t row = 0;
            for (std::size_t s = 0; s < 3; ++s) {
                bool up = mask >> (l * 3 + s) & 1;
                if (up && frac[l][s] == 0.0) ok = false;
                row += floor_part[l][s] + up;
                score += up ? frac[l][s] : 0.0;
            }
            ok = ok && row == counts[l];
        }
        for (std::size_t s = 0; s < 3 && ok; ++s) {
            std::size_t col = 0;
            for (std::size_t l = 0; l < 3; ++l) col += floor_part[l][s] + (mask >> (l * 3 + s) & 1);
            ok = col == sizes[s];
        }
        if (ok && score > best_score) {
            best_score = score;
            best_mask = mask;
        }
    }
    if (best_mask < 0) throw Error("stratified split: no consistent rounding");
    auto alloc = floor_part;
    for (std::size_t l = 0; l < 3; ++l)
        for (std::size_t s = 0; s < 3; ++s) alloc[l][s] += best_mask >> (l * 3 + s) & 1;
    return alloc;
}

}  // namespace

Split split_examples(std::span<const NliExample> examples, std::uint64_t seed, double validation_fraction,
                     double test_fraction) {
    if (validation_fraction < 0 || test_fraction < 0 || validation_fraction + test_fraction > 1.0)
        throw ValidationError("split fractions must be non-negative and sum to at most 1");
    const std::size_t n = examples.size();
    Split out;
    if (n == 0) return out;

    const auto n_val = static_cast<std::size_t>(std::floor(static_cast<double>(n) * validation_fraction + 1e-9));
    const auto n_test = static_cast<std::size_t>(std::floor(static_cast<double>(n) * test_fraction + 1e-9));
    const std::array<std::size_t, 3> sizes = {n - n_val - n_test, n_val, n_test};
    const auto counts = count_labels(examples);
    const auto alloc = round_allocation(counts, sizes, n);

    // Fisher-Yates on each label's indices. mt19937_64's output sequence is
    // fixed by the standard; the modulo draw keeps it platform independent.
    std::mt19937_64 rng(seed);
    std::vector<int> destination(n, 0);
    for (std::size_t l = 0; l < 3; ++l) {
        std::vector<std::size_t> idx;
        for (std::size_t i = 0; i < n; ++i)
            if (label_index(examples[i].label) == l) idx.push_back(i);
        for (std::size_t i = idx.size(); i > 1; --i) std::swap(idx[i - 1], idx[rng() % i]);
        std::size_t pos = 0;
        for (int s : {1, 2}) {
            for (std::size_t c = 0; c < alloc[l][static_cast<std::size_t>(s)]; ++c) destination[idx[pos++]] = s;
        }
    }
    for (std::size_t i = 0; i < n; ++i) {
        auto& target = destination[i] == 1 ? out.validation : destination[i] == 2 ? out.test : out.train;
        target.push_back(examples[i]);
    }
    return out;
}

std::string split_report(std::span<const NliExample> all, const Split& split) {
    std::ostringstream os;
    os << std::left << std::setw(12) << "split" << std::right << std::setw(8) << "size";
    for (auto l : kLabels) os << std::setw(14) << to_string(l);
    os << '\n';
    auto row = [&](std::string_view name, std::span<const NliExample> xs) {
        auto c = count_labels(xs);
        os << std::left << std::setw(12) << name << std::right << std::setw(8) << xs.size();
        for (std::size_t l = 0; l < 3; ++l) {
            double pct = xs.empty() ? 0.0 : 100.0 * static_cast<double>(c[l]) / static_cast<double>(xs.size());
            std::ostringstream cell;
            cell << c[l] << " (" << std::fixed << std::setprecision(1) << pct << "%)";
            os << std::setw(14) << cell.str();
        }
        os << '\n';
    };
    row("all", all);
    row("train", split.train);
    row("validation", split.validation);
    row("test", split.test);
    return os.str();
}

NliMetrics metrics_from_confusion(const Confusion& confusion) {
    NliMetrics m;
    m.confusion = confusion;
    std::size_t correct = 0;
    for (std::size_t l = 0; l < 3; ++l) {
        std::size_t tp = confusion[l][l];
        std::size_t support = 0;
        std::size_t predicted = 0;
        for (std::size_t k = 0; k < 3; ++k) {
            support += confusion[l][k];
            predicted += confusion[k][l];
        }
        auto& lm = m.per_label[l];
        lm.support = support;
        lm.precision = predicted ? static_cast<double>(tp) / static_cast<double>(predicted) : 0.0;
        lm.recall = support ? static_cast<double>(tp) / static_cast<double>(support) : 0.0;
        lm.f1 = lm.precision + lm.recall > 0 ? 2 * lm.precision * lm.recall / (lm.precision + lm.recall) : 0.0;
        m.total += support;
        correct += tp;
    }
    if (m.total > 0) {
        const double total = static_cast<double>(m.total);
        for (const auto& lm : m.per_label) {
            const double w = static_cast<double>(lm.support) / total;
            m.weighted.precision += w * lm.precision;
            m.weighted.recall += w * lm.recall;
            m.weighted.f1 += w * lm.f1;
        }
        m.weighted.support = m.total;
        m.accuracy = static_cast<double>(correct) / total;
    }
    return m;
}

NliMetrics evaluate_nli(const NliClassifier& classifier, std::span<const NliExample> test_set) {
    Confusion c{};
    for (const auto& ex : test_set) {
        auto predicted = classifier.classify(ex.claim, ex.doc.title, ex.doc.abstract).value;
        ++c[label_index(ex.label)][label_index(predicted)];
    }
    return metrics_from_confusion(c);
}

std::string format_metrics(const NliMetrics& m) {
    std::ostringstream os;
    os << std::left << std::setw(14) << "label" << std::right << std::setw(11) << "precision" << std::setw(9)
       << "recall" << std::setw(9) << "f1" << std::setw(9) << "support" << '\n';
    auto row = [&](std::string_view name, const LabelMetrics& lm) {
        os << std::left << std::setw(14) << name << std::right << std::fixed << std::setprecision(4) << std::setw(11)
           << lm.precision << std::setw(9) << lm.recall << std::setw(9) << lm.f1 << std::setw(9) << lm.support
           << '\n';
    };
    for (std::size_t l = 0; l < 3; ++l) row(to_string(kLabels[l]), m.per_label[l]);
    row("weighted avg", m.weighted);
    os << "accuracy " << std::fixed << std::setprecision(4) << m.accuracy << " over " << m.total << " examples\n";
    return os.str();
}

}  // namespace verifai::scifact

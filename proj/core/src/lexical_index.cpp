#include "verifai/lexical_index.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>
#include <unordered_set>

#include "binary_io.hpp"
#include "verifai/error.hpp"
#include "verifai/text.hpp"

namespace verifai {

namespace {

constexpr detail::Magic kTermsMagic = {'V', 'L', 'X', 'T'};
constexpr detail::Magic kPostingsMagic = {'V', 'L', 'X', 'P'};
constexpr detail::Magic kLengthsMagic = {'V', 'L', 'X', 'D'};
constexpr detail::Magic kIdsMagic = {'V', 'L', 'X', 'I'};
constexpr std::size_t kHeaderBytes = 8;
constexpr std::size_t kPostingBytes = 8;

struct TermInfo {
    std::uint32_t df = 0;
    std::uint64_t offset = 0;  // in postings, not bytes
};

struct StringHash {
    using is_transparent = void;
    std::size_t operator()(std::string_view s) const { return std::hash<std::string_view>{}(s); }
};

}  // namespace

struct LexicalIndex::Impl {
    Bm25Params params;
    std::vector<std::uint32_t> lengths;
    double avg_length = 0.0;
    std::vector<std::string> ids;
    std::unordered_map<std::string, TermInfo, StringHash, std::equal_to<>> terms;
    detail::MappedFile postings;
};

LexicalIndex::LexicalIndex(std::unique_ptr<Impl> impl) : impl_(std::move(impl)) {}
LexicalIndex::LexicalIndex(LexicalIndex&&) noexcept = default;
LexicalIndex& LexicalIndex::operator=(LexicalIndex&&) noexcept = default;
LexicalIndex::~LexicalIndex() = default;

void LexicalIndex::build(const std::vector<DocumentRecord>& corpus, const std::filesystem::path& dir,
                         const Bm25Params& params) {
    if (corpus.empty()) throw IndexError("cannot build lexical index from an empty corpus");
    if (corpus.size() > UINT32_MAX) throw IndexError("corpus too large for lexical index format");

    std::unordered_set<std::string_view> seen;
    std::unordered_map<std::string, std::vector<std::pair<std::uint32_t, std::uint32_t>>> postings;
    std::vector<std::uint32_t> lengths;
    lengths.reserve(corpus.size());

    for (std::uint32_t ord = 0; ord < corpus.size(); ++ord) {
        const auto& doc = corpus[ord];
        if (!seen.insert(doc.doc_id).second) throw IndexError("duplicate doc_id '" + doc.doc_id + "'");
        auto tokens = text::analyze(doc.text);
        lengths.push_back(static_cast<std::uint32_t>(tokens.size()));
        std::unordered_map<std::string, std::uint32_t> tf;
        for (auto& t : tokens) ++tf[std::move(t)];
        for (auto& [term, count] : tf) postings[term].emplace_back(ord, count);
    }

    std::vector<std::string> vocab;
    vocab.reserve(postings.size());
    for (const auto& [term, _] : postings) vocab.push_back(term);
    std::sort(vocab.begin(), vocab.end());

    std::filesystem::create_directories(dir);

    detail::BinaryWriter terms(dir / "terms.bin");
    detail::BinaryWriter post(dir / "postings.bin");
    terms.header(kTermsMagic, kFormatVersion);
    post.header(kPostingsMagic, kFormatVersion);
    terms.u32(static_cast<std::uint32_t>(vocab.size()));
    std::uint64_t offset = 0;
    for (const auto& term : vocab) {
        auto& list = postings[term];
        std::sort(list.begin(), list.end());
        terms.string(term);
        terms.u32(static_cast<std::uint32_t>(list.size()));
        terms.u64(offset);
        for (auto [ord, tf] : list) {
            post.u32(ord);
            post.u32(tf);
        }
        offset += list.size();
    }
    terms.close();
    post.close();

    detail::BinaryWriter lens(dir / "doclens.bin");
    lens.header(kLengthsMagic, kFormatVersion);
    lens.u32(static_cast<std::uint32_t>(lengths.size()));
    lens.u64(std::bit_cast<std::uint64_t>(params.k1));
    lens.u64(std::bit_cast<std::uint64_t>(params.b));
    for (auto l : lengths) lens.u32(l);
    lens.close();

    detail::BinaryWriter ids(dir / "ids.bin");
    ids.header(kIdsMagic, kFormatVersion);
    ids.u32(static_cast<std::uint32_t>(corpus.size()));
    for (const auto& doc : corpus) ids.string(doc.doc_id);
    ids.close();
}

LexicalIndex LexicalIndex::open(const std::filesystem::path& dir) {
    auto impl = std::make_unique<Impl>();

    {
        detail::MappedFile f(dir / "doclens.bin");
        detail::BinaryReader r(f.bytes(), (dir / "doclens.bin").string());
        r.expect_header(kLengthsMagic, kFormatVersion);
        auto n = r.u32();
        impl->params.k1 = std::bit_cast<double>(r.u64());
        impl->params.b = std::bit_cast<double>(r.u64());
        impl->lengths.resize(n);
        std::uint64_t total = 0;
        for (auto& l : impl->lengths) {
            l = r.u32();
            total += l;
        }
        impl->avg_length = n == 0 ? 0.0 : static_cast<double>(total) / static_cast<double>(n);
    }
    {
        detail::MappedFile f(dir / "ids.bin");
        detail::BinaryReader r(f.bytes(), (dir / "ids.bin").string());
        r.expect_header(kIdsMagic, kFormatVersion);
        auto n = r.u32();
        if (n != impl->lengths.size()) throw IndexError(dir.string() + ": ID table and length table disagree");
        impl->ids.reserve(n);
        for (std::uint32_t i = 0; i < n; ++i) impl->ids.push_back(r.string());
    }

    impl->postings = detail::MappedFile(dir / "postings.bin");
    detail::BinaryReader pr(impl->postings.bytes(), (dir / "postings.bin").string());
    pr.expect_header(kPostingsMagic, kFormatVersion);
    const std::uint64_t posting_count = (impl->postings.size() - kHeaderBytes) / kPostingBytes;

    {
        detail::MappedFile f(dir / "terms.bin");
        detail::BinaryReader r(f.bytes(), (dir / "terms.bin").string());
        r.expect_header(kTermsMagic, kFormatVersion);
        auto n = r.u32();
        impl->terms.reserve(n);
        for (std::uint32_t i = 0; i < n; ++i) {
            auto term = r.string();
            TermInfo info;
            info.df = r.u32();
            info.offset = r.u64();
            if (info.offset + info.df > posting_count) throw IndexError(dir.string() + ": postings out of range");
            impl->terms.emplace(std::move(term), info);
        }
    }
    return LexicalIndex(std::move(impl));
}

std::vector<LexicalHit> LexicalIndex::search(std::string_view query, std::size_t k) const {
    if (k == 0) throw ValidationError("k must be at least 1");
    auto terms = text::analyze(query);
    std::sort(terms.begin(), terms.end());
    terms.erase(std::unique(terms.begin(), terms.end()), terms.end());

    const auto& p = impl_->params;
    const double n_docs = static_cast<double>(impl_->lengths.size());
    const double avg = impl_->avg_length > 0.0 ? impl_->avg_length : 1.0;
    const auto* base = impl_->postings.bytes().data() + kHeaderBytes;

    std::vector<double> scores(impl_->lengths.size(), 0.0);
    std::vector<std::uint32_t> touched;
    for (const auto& term : terms) {
        auto it = impl_->terms.find(term);
        if (it == impl_->terms.end()) continue;
        const auto& info = it->second;
        const double df = info.df;
        const double idf = std::log(1.0 + (n_docs - df + 0.5) / (df + 0.5));
        const auto* entry = base + info.offset * kPostingBytes;
        for (std::uint32_t i = 0; i < info.df; ++i, entry += kPostingBytes) {
            std::uint32_t ord = entry[0] | entry[1] << 8 | entry[2] << 16 | static_cast<std::uint32_t>(entry[3]) << 24;
            std::uint32_t tf_raw =
                entry[4] | entry[5] << 8 | entry[6] << 16 | static_cast<std::uint32_t>(entry[7]) << 24;
            const double tf = tf_raw;
            const double norm = p.k1 * (1.0 - p.b + p.b * impl_->lengths[ord] / avg);
            if (scores[ord] == 0.0) touched.push_back(ord);
            scores[ord] += idf * (tf * (p.k1 + 1.0)) / (tf + norm);
        }
    }

    auto better = [&](std::uint32_t a, std::uint32_t b) {
        if (scores[a] != scores[b]) return scores[a] > scores[b];
        return impl_->ids[a] < impl_->ids[b];
    };
    std::size_t take = std::min(k, touched.size());
    std::partial_sort(touched.begin(), touched.begin() + static_cast<std::ptrdiff_t>(take), touched.end(), better);

    std::vector<LexicalHit> hits;
    hits.reserve(take);
    for (std::size_t i = 0; i < take; ++i) hits.push_back({impl_->ids[touched[i]], scores[touched[i]]});
    return hits;
}

std::size_t LexicalIndex::size() const { return impl_->lengths.size(); }
std::size_t LexicalIndex::vocabulary_size() const { return impl_->terms.size(); }
double LexicalIndex::average_length() const { return impl_->avg_length; }
const Bm25Params& LexicalIndex::params() const { return impl_->params; }

std::uint32_t LexicalIndex::document_frequency(std::string_view term) const {
    auto it = impl_->terms.find(term);
    return it == impl_->terms.end() ? 0 : it->second.df;
}

const std::string& LexicalIndex::doc_id(std::uint32_t ordinal) const { return impl_->ids.at(ordinal); }

}  // namespace verifai

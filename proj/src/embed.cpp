#include "tenfact/embed.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <istream>
#include <numeric>
#include <sstream>

#include <fmt/format.h>

#include "tenfact/error.hpp"
#include "tenfact/io.hpp"

namespace tenfact::embed {

// ---------------------------------------------------------------- tokenizer

namespace {

bool is_ascii_alnum(unsigned char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9');
}

char lower(unsigned char c) { return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : static_cast<char>(c); }

/// Bytes in a UTF-8 sequence given its lead byte; 0 for an invalid lead.
std::size_t utf8_length(unsigned char lead) {
    if (lead >= 0xC2 && lead <= 0xDF) return 2;
    if (lead >= 0xE0 && lead <= 0xEF) return 3;
    if (lead >= 0xF0 && lead <= 0xF4) return 4;
    return 0;
}

/// Non-ASCII code points that separate words: Latin-1 symbols, general and
/// supplemental punctuation, CJK punctuation, and the BOM.
bool is_separator(char32_t cp) {
    return (cp >= 0x80 && cp <= 0xBF) || cp == 0xD7 || cp == 0xF7 || (cp >= 0x2000 && cp <= 0x2BFF) ||
           (cp >= 0x2E00 && cp <= 0x2E7F) || (cp >= 0x3000 && cp <= 0x303F) || cp == 0xFEFF;
}

char32_t decode(const std::string& seq) {
    const auto b = [&](std::size_t i) { return static_cast<char32_t>(static_cast<unsigned char>(seq[i])); };
    switch (seq.size()) {
        case 2: return ((b(0) & 0x1F) << 6) | (b(1) & 0x3F);
        case 3: return ((b(0) & 0x0F) << 12) | ((b(1) & 0x3F) << 6) | (b(2) & 0x3F);
        default: return ((b(0) & 0x07) << 18) | ((b(1) & 0x3F) << 12) | ((b(2) & 0x3F) << 6) | (b(3) & 0x3F);
    }
}

}  // namespace

void Tokenizer::feed(std::string_view chunk, const Sink& emit) {
    const auto split = [&] {
        if (!pending_.empty()) emit(pending_);
        pending_.clear();
    };
    for (const char ch : chunk) {
        const auto c = static_cast<unsigned char>(ch);
        if (!partial_.empty()) {
            if ((c & 0xC0) == 0x80) {
                partial_.push_back(ch);
                if (partial_.size() == utf8_length(static_cast<unsigned char>(partial_[0]))) {
                    if (is_separator(decode(partial_))) {
                        split();
                    } else {
                        pending_ += partial_;
                    }
                    partial_.clear();
                }
                continue;
            }
            // Truncated sequence: drop it as a separator and reprocess c.
            partial_.clear();
            split();
        }
        if (c < 0x80) {
            if (is_ascii_alnum(c)) {
                pending_.push_back(lower(c));
            } else {
                split();
            }
        } else if (utf8_length(c) > 0) {
            partial_.push_back(ch);
        } else {
            split();
        }
    }
}

void Tokenizer::finish(const Sink& emit) {
    partial_.clear();
    if (!pending_.empty()) emit(pending_);
    pending_.clear();
}

std::vector<std::string> tokenize(std::string_view text) {
    std::vector<std::string> out;
    Tokenizer tok;
    const auto sink = [&](std::string_view t) { out.emplace_back(t); };
    tok.feed(text, sink);
    tok.finish(sink);
    return out;
}

// ---------------------------------------------------------------- vocab

std::optional<Index> Vocab::find(std::string_view word) const {
    const auto it = index.find(std::string(word));
    if (it == index.end()) return std::nullopt;
    return it->second;
}

Vocab Vocab::from_counts(const std::unordered_map<std::string, std::uint64_t>& counts, Index max_size) {
    if (max_size < 1) throw InvalidArgument("vocabulary size must be at least 1");
    std::vector<std::pair<std::string, std::uint64_t>> items(counts.begin(), counts.end());
    std::sort(items.begin(), items.end(), [](const auto& x, const auto& y) {
        return x.second != y.second ? x.second > y.second : x.first < y.first;
    });
    if (static_cast<Index>(items.size()) > max_size) items.resize(static_cast<std::size_t>(max_size));
    Vocab v;
    for (auto& [w, c] : items) {
        v.index.emplace(w, v.size());
        v.words.push_back(std::move(w));
        v.counts.push_back(c);
    }
    return v;
}

// ---------------------------------------------------------------- triple counting

namespace {

constexpr int kKeyBits = 21;
constexpr std::uint64_t kKeyMask = (std::uint64_t{1} << kKeyBits) - 1;

std::uint64_t pack(Index a, Index b, Index c) {
    if (a > b) std::swap(a, b);
    if (b > c) std::swap(b, c);
    if (a > b) std::swap(a, b);
    return (static_cast<std::uint64_t>(a) << (2 * kKeyBits)) | (static_cast<std::uint64_t>(b) << kKeyBits) |
           static_cast<std::uint64_t>(c);
}

constexpr std::size_t kShards = 16;

}  // namespace

TriCounter::TriCounter(Index vocab_size, int window) : vocab_size_(vocab_size), window_(window) {
    if (window < 3) throw InvalidArgument(fmt::format("window must be at least 3, got {}", window));
    if (vocab_size < 0 || static_cast<std::uint64_t>(vocab_size) > kKeyMask) {
        throw InvalidArgument(fmt::format("vocabulary size {} out of range", vocab_size));
    }
}

void TriCounter::feed(std::span<const Index> ids) {
    for (const Index id : ids) {
        if (id != kOutOfVocab && (id < 0 || id >= vocab_size_)) {
            throw InvalidArgument(fmt::format("token id {} outside vocabulary of size {}", id, vocab_size_));
        }
    }
    std::vector<Index> buf(history_);
    buf.insert(buf.end(), ids.begin(), ids.end());
    const std::size_t start = history_.size();
    const std::size_t n = buf.size();
    const std::size_t span = static_cast<std::size_t>(window_ - 1);

    // Shard s owns the triples whose last position falls in its range.
    std::array<std::unordered_map<std::uint64_t, double>, kShards> local;
#pragma omp parallel for schedule(static)
    for (std::size_t s = 0; s < kShards; ++s) {
        const std::size_t lo = start + (n - start) * s / kShards;
        const std::size_t hi = start + (n - start) * (s + 1) / kShards;
        auto& m = local[s];
        for (std::size_t r = lo; r < hi; ++r) {
            if (buf[r] == kOutOfVocab) continue;
            const std::size_t first = r >= span ? r - span : 0;
            for (std::size_t p = first; p + 1 < r; ++p) {
                if (buf[p] == kOutOfVocab) continue;
                for (std::size_t q = p + 1; q < r; ++q) {
                    if (buf[q] == kOutOfVocab) continue;
                    m[pack(buf[p], buf[q], buf[r])] += 1.0;
                }
            }
        }
    }
    for (const auto& m : local)
        for (const auto& [key, c] : m) counts_[key] += c;

    const std::size_t keep = std::min(span, n);
    history_.assign(buf.end() - static_cast<std::ptrdiff_t>(keep), buf.end());
}

SymmetricSparseTensor3 TriCounter::finish() const {
    std::vector<SparseTensor3::Entry> entries;
    entries.reserve(counts_.size());
    for (const auto& [key, c] : counts_) {
        entries.push_back({static_cast<Index>(key >> (2 * kKeyBits)), static_cast<Index>((key >> kKeyBits) & kKeyMask),
                           static_cast<Index>(key & kKeyMask), c});
    }
    return SymmetricSparseTensor3(vocab_size_, std::move(entries));
}

namespace {

/// Token stream interned to provisional ids, with stream boundaries.
struct Interned {
    std::unordered_map<std::string, std::uint32_t> ids;
    std::vector<std::string> names;
    std::vector<std::uint64_t> freq;
    std::vector<std::uint32_t> stream;
    std::vector<std::size_t> breaks;  // stream offsets where a new file starts

    void add(std::string_view tok) {
        auto [it, fresh] = ids.try_emplace(std::string(tok), static_cast<std::uint32_t>(names.size()));
        if (fresh) {
            names.emplace_back(tok);
            freq.push_back(0);
        }
        ++freq[it->second];
        stream.push_back(it->second);
    }

    void read(std::istream& in, std::size_t chunk_bytes) {
        Tokenizer tok;
        const auto sink = [&](std::string_view t) { add(t); };
        std::string buf(std::max<std::size_t>(chunk_bytes, 1), '\0');
        while (in) {
            in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
            const auto got = static_cast<std::size_t>(in.gcount());
            if (got == 0) break;
            tok.feed(std::string_view(buf.data(), got), sink);
        }
        tok.finish(sink);
    }
};

TriOccurrence count(const Interned& in, Index max_vocab, int window) {
    if (window < 3) throw InvalidArgument(fmt::format("window must be at least 3, got {}", window));
    std::unordered_map<std::string, std::uint64_t> table;
    table.reserve(in.names.size());
    for (std::size_t i = 0; i < in.names.size(); ++i) table.emplace(in.names[i], in.freq[i]);

    TriOccurrence out;
    out.tokens = in.stream.size();
    out.vocab = Vocab::from_counts(table, max_vocab);
    std::vector<Index> remap(in.names.size(), TriCounter::kOutOfVocab);
    for (std::size_t i = 0; i < in.names.size(); ++i) {
        if (const auto v = out.vocab.find(in.names[i])) remap[i] = *v;
    }

    TriCounter counter(out.vocab.size(), window);
    constexpr std::size_t kBlock = std::size_t{1} << 20;
    std::vector<Index> block;
    std::size_t next_break = 0;
    for (std::size_t pos = 0; pos < in.stream.size();) {
        while (next_break < in.breaks.size() && in.breaks[next_break] <= pos) {
            if (in.breaks[next_break] == pos) counter.reset_history();
            ++next_break;
        }
        std::size_t end = std::min(in.stream.size(), pos + kBlock);
        if (next_break < in.breaks.size()) end = std::min(end, in.breaks[next_break]);
        block.clear();
        for (std::size_t p = pos; p < end; ++p) block.push_back(remap[in.stream[p]]);
        counter.feed(block);
        pos = end;
    }
    out.counts = counter.finish();
    return out;
}

}  // namespace

TriOccurrence build_trioccurrence(std::istream& corpus, Index max_vocab, int window, std::size_t chunk_bytes) {
    if (max_vocab < 1) throw InvalidArgument("vocabulary size must be at least 1");
    if (window < 3) throw InvalidArgument(fmt::format("window must be at least 3, got {}", window));
    Interned in;
    in.read(corpus, chunk_bytes);
    return count(in, max_vocab, window);
}

TriOccurrence build_trioccurrence(const std::vector<std::filesystem::path>& files, Index max_vocab, int window) {
    if (max_vocab < 1) throw InvalidArgument("vocabulary size must be at least 1");
    if (window < 3) throw InvalidArgument(fmt::format("window must be at least 3, got {}", window));
    Interned in;
    for (const auto& f : files) {
        std::ifstream is(f, std::ios::binary);
        if (!is) throw InvalidArgument(fmt::format("cannot open corpus file {}", f.string()));
        in.breaks.push_back(in.stream.size());
        in.read(is, std::size_t{1} << 20);
    }
    return count(in, max_vocab, window);
}

// ---------------------------------------------------------------- scaling

namespace {

std::vector<SparseTensor3::Entry> log1p_entries(std::span<const SparseTensor3::Entry> in) {
    std::vector<SparseTensor3::Entry> out(in.begin(), in.end());
    for (auto& e : out) {
        if (e.value < 0.0) {
            throw InvalidArgument(fmt::format("scale_log1p: negative count {} at ({}, {}, {})", e.value, e.i, e.j, e.k));
        }
        e.value = std::log1p(e.value);
    }
    return out;
}

}  // namespace

SparseTensor3 scale_log1p(const SparseTensor3& s) {
    if (s.nnz() == 0) return s;
    return SparseTensor3(s.dims(), log1p_entries(s.entries()));
}

SymmetricSparseTensor3 scale_log1p(const SymmetricSparseTensor3& s) {
    return SymmetricSparseTensor3(s.dims().d1, log1p_entries(s.entries()));
}

// ---------------------------------------------------------------- embeddings

EmbeddingMatrix extract_embeddings(const CpModel& m, double zero_tol) {
    if (m.A.rows() != m.B.rows() || m.A.rows() != m.C.rows()) {
        throw InvalidArgument(fmt::format("extract_embeddings: factor row counts {}, {}, {} differ", m.A.rows(),
                                          m.B.rows(), m.C.rows()));
    }
    if (m.A.cols() != m.B.cols() || m.A.cols() != m.C.cols()) {
        throw InvalidArgument("extract_embeddings: factor column counts differ");
    }
    const Index V = m.A.rows();
    const Index k = m.A.cols();
    EmbeddingMatrix e;
    e.rows.resize(V, 3 * k);
    e.rows << m.A, m.B, m.C;
    e.zero_row.assign(static_cast<std::size_t>(V), 0);
    for (Index i = 0; i < V; ++i) {
        const double n = e.rows.row(i).norm();
        if (!(n > zero_tol)) {
            e.zero_row[static_cast<std::size_t>(i)] = 1;
            e.rows.row(i).setZero();
        } else {
            e.rows.row(i) /= n;
        }
    }
    return e;
}

// ---------------------------------------------------------------- evaluation

namespace {

/// 1-based ranks, ties get the average of their positions.
std::vector<double> ranks(std::span<const double> x) {
    std::vector<std::size_t> order(x.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
    std::vector<double> r(x.size());
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i;
        while (j + 1 < order.size() && x[order[j + 1]] == x[order[i]]) ++j;
        const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t t = i; t <= j; ++t) r[order[t]] = avg;
        i = j + 1;
    }
    return r;
}

std::optional<Index> usable_index(const EmbeddingMatrix& e, const Vocab& v, const std::string& w) {
    const auto i = v.find(w);
    if (!i || *i >= e.size() || !e.usable(*i)) return std::nullopt;
    return i;
}

}  // namespace

double spearman(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw InvalidArgument("spearman: samples differ in length");
    if (x.size() < 2) throw NumericalFailure("spearman: fewer than 2 samples");
    const std::vector<double> rx = ranks(x);
    const std::vector<double> ry = ranks(y);
    const double n = static_cast<double>(x.size());
    const double mean = (n + 1.0) / 2.0;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < rx.size(); ++i) {
        sxy += (rx[i] - mean) * (ry[i] - mean);
        sxx += (rx[i] - mean) * (rx[i] - mean);
        syy += (ry[i] - mean) * (ry[i] - mean);
    }
    if (sxx == 0.0 || syy == 0.0) throw NumericalFailure("spearman: a sample has no rank variance");
    return sxy / std::sqrt(sxx * syy);
}

EvalReport eval_similarity(const EmbeddingMatrix& e, const Vocab& vocab, const std::vector<SimilarityPair>& pairs) {
    EvalReport rep;
    std::vector<double> model;
    std::vector<double> human;
    for (const auto& p : pairs) {
        const auto i = usable_index(e, vocab, p.w1);
        const auto j = usable_index(e, vocab, p.w2);
        if (!i || !j) {
            ++rep.skipped;
            continue;
        }
        model.push_back(e.rows.row(*i).dot(e.rows.row(*j)));
        human.push_back(p.score);
    }
    rep.used = model.size();
    if (rep.used < 2) {
        throw NumericalFailure(fmt::format("eval_similarity: {} usable pairs ({} skipped), need at least 2", rep.used,
                                           rep.skipped));
    }
    rep.value = spearman(model, human);
    return rep;
}

EvalReport eval_analogy(const EmbeddingMatrix& e, const Vocab& vocab, const std::vector<AnalogyQuad>& quads) {
    EvalReport rep;
    std::size_t correct = 0;
    for (const auto& q : quads) {
        const auto a = usable_index(e, vocab, q.a);
        const auto as = usable_index(e, vocab, q.a_star);
        const auto b = usable_index(e, vocab, q.b);
        const auto bs = usable_index(e, vocab, q.b_star);
        if (!a || !as || !b || !bs) {
            ++rep.skipped;
            continue;
        }
        ++rep.used;
        Vector target = e.rows.row(*as) - e.rows.row(*a) + e.rows.row(*b);
        const double tn = target.norm();
        if (tn > 0.0) target /= tn;
        const Vector cos = e.rows * target;
        Index best = -1;
        for (Index i = 0; i < e.size(); ++i) {
            if (i == *a || i == *as || i == *b || !e.usable(i)) continue;
            if (best < 0 || cos[i] > cos[best]) best = i;
        }
        if (best == *bs) ++correct;
    }
    if (rep.used == 0) {
        throw NumericalFailure(fmt::format("eval_analogy: no usable quads ({} skipped)", rep.skipped));
    }
    rep.value = static_cast<double>(correct) / static_cast<double>(rep.used);
    return rep;
}

// ---------------------------------------------------------------- files

namespace {

std::ifstream open_in(const std::filesystem::path& p) {
    std::ifstream in(p);
    if (!in) throw InvalidArgument(fmt::format("cannot open {}", p.string()));
    return in;
}

std::ofstream open_out(const std::filesystem::path& p) {
    std::ofstream out(p);
    if (!out) throw InvalidArgument(fmt::format("cannot write {}", p.string()));
    return out;
}

bool skip_line(const std::string& line) {
    const auto pos = line.find_first_not_of(" \t\r");
    return pos == std::string::npos || line[pos] == '#';
}

}  // namespace

void write_vocab(const std::filesystem::path& path, const Vocab& v) {
    auto out = open_out(path);
    for (Index i = 0; i < v.size(); ++i) {
        out << v.words[static_cast<std::size_t>(i)] << '\t' << v.counts[static_cast<std::size_t>(i)] << '\n';
    }
}

Vocab read_vocab(const std::filesystem::path& path) {
    auto in = open_in(path);
    Vocab v;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (skip_line(line)) continue;
        std::istringstream ls(line);
        std::string w;
        std::uint64_t c = 0;
        if (!(ls >> w)) throw InvalidArgument(fmt::format("{}:{}: malformed vocabulary line", path.string(), lineno));
        ls >> c;
        if (!v.index.emplace(w, v.size()).second) {
            throw InvalidArgument(fmt::format("{}:{}: duplicate word '{}'", path.string(), lineno, w));
        }
        v.words.push_back(w);
        v.counts.push_back(c);
    }
    return v;
}

void write_trioccurrence(const std::filesystem::path& path, const SymmetricSparseTensor3& t) {
    auto out = open_out(path);
    io::write_coo(out, t.dims(), std::vector<SparseTensor3::Entry>(t.entries().begin(), t.entries().end()));
}

SymmetricSparseTensor3 read_symmetric_coo(const std::filesystem::path& path) {
    io::CooFile f = io::read_coo_file(path);
    if (f.dims.d1 != f.dims.d2 || f.dims.d1 != f.dims.d3) {
        throw InvalidArgument(fmt::format("{}: symmetric tensor needs equal dims, got {}x{}x{}", path.string(),
                                          f.dims.d1, f.dims.d2, f.dims.d3));
    }
    return SymmetricSparseTensor3(f.dims.d1, std::move(f.entries));
}

void write_embeddings(const std::filesystem::path& path, const EmbeddingMatrix& e, const Vocab& v) {
    if (v.size() != e.size()) throw InvalidArgument("write_embeddings: vocabulary and matrix sizes differ");
    auto out = open_out(path);
    for (Index i = 0; i < e.size(); ++i) {
        out << v.words[static_cast<std::size_t>(i)];
        for (Index c = 0; c < e.rows.cols(); ++c) out << '\t' << io::format_double(e.rows(i, c));
        out << '\n';
    }
}

std::pair<EmbeddingMatrix, Vocab> read_embeddings(const std::filesystem::path& path) {
    auto in = open_in(path);
    Vocab v;
    std::vector<std::vector<double>> rows;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (skip_line(line)) continue;
        std::istringstream ls(line);
        std::string w;
        ls >> w;
        std::vector<double> r;
        for (double x; ls >> x;) r.push_back(x);
        if (!ls.eof()) throw InvalidArgument(fmt::format("{}:{}: malformed embedding row", path.string(), lineno));
        if (!rows.empty() && r.size() != rows.front().size()) {
            throw InvalidArgument(fmt::format("{}:{}: row has {} values, expected {}", path.string(), lineno, r.size(),
                                              rows.front().size()));
        }
        if (!v.index.emplace(w, v.size()).second) {
            throw InvalidArgument(fmt::format("{}:{}: duplicate word '{}'", path.string(), lineno, w));
        }
        v.words.push_back(w);
        v.counts.push_back(0);
        rows.push_back(std::move(r));
    }
    EmbeddingMatrix e;
    const Index cols = rows.empty() ? 0 : static_cast<Index>(rows.front().size());
    e.rows.resize(static_cast<Index>(rows.size()), cols);
    e.zero_row.assign(rows.size(), 0);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        for (Index c = 0; c < cols; ++c) e.rows(static_cast<Index>(i), c) = rows[i][static_cast<std::size_t>(c)];
        if (e.rows.row(static_cast<Index>(i)).norm() == 0.0) e.zero_row[i] = 1;
    }
    return {std::move(e), std::move(v)};
}

std::vector<SimilarityPair> read_similarity(const std::filesystem::path& path) {
    auto in = open_in(path);
    std::vector<SimilarityPair> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (skip_line(line)) continue;
        std::istringstream ls(line);
        SimilarityPair p;
        if (!(ls >> p.w1 >> p.w2 >> p.score)) {
            throw InvalidArgument(fmt::format("{}:{}: expected 'word1 word2 score'", path.string(), lineno));
        }
        // Evaluation sets are matched against lowercased corpus tokens.
        p.w1 = tokenize(p.w1).empty() ? p.w1 : tokenize(p.w1).front();
        p.w2 = tokenize(p.w2).empty() ? p.w2 : tokenize(p.w2).front();
        out.push_back(std::move(p));
    }
    return out;
}

std::vector<AnalogyQuad> read_analogy(const std::filesystem::path& path) {
    auto in = open_in(path);
    std::vector<AnalogyQuad> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (skip_line(line)) continue;
        std::istringstream ls(line);
        AnalogyQuad q;
        if (!(ls >> q.a >> q.a_star >> q.b >> q.b_star)) {
            throw InvalidArgument(fmt::format("{}:{}: expected four words", path.string(), lineno));
        }
        for (std::string* w : {&q.a, &q.a_star, &q.b, &q.b_star}) {
            const auto t = tokenize(*w);
            if (!t.empty()) *w = t.front();
        }
        out.push_back(std::move(q));
    }
    return out;
}

void write_analogy(const std::filesystem::path& path, const std::vector<AnalogyQuad>& quads) {
    auto out = open_out(path);
    for (const auto& q : quads) out << q.a << '\t' << q.a_star << '\t' << q.b << '\t' << q.b_star << '\n';
}

}  // namespace tenfact::embed

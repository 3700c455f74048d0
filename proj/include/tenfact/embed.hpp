#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "tenfact/tensor.hpp"

namespace tenfact::embed {

/// Streaming UTF-8 tokenizer. ASCII letters and digits form words (letters
/// lowercased); other ASCII bytes separate. Non-ASCII code points are word
/// characters, kept verbatim, except punctuation and symbol ranges (curly
/// quotes, dashes, no-break space, ...) which separate. Malformed bytes
/// separate. Tokens and multibyte sequences may straddle chunk boundaries.
class Tokenizer {
public:
    using Sink = std::function<void(std::string_view)>;

    void feed(std::string_view chunk, const Sink& emit);
    /// Flushes a pending token.
    void finish(const Sink& emit);

private:
    std::string pending_;
    std::string partial_;
};

std::vector<std::string> tokenize(std::string_view text);

struct Vocab {
    /// Descending frequency, ties broken lexicographically.
    std::vector<std::string> words;
    std::vector<std::uint64_t> counts;
    std::unordered_map<std::string, Index> index;

    Index size() const { return static_cast<Index>(words.size()); }
    std::optional<Index> find(std::string_view word) const;

    /// Keeps the top `max_size` words of a frequency table.
    static Vocab from_counts(const std::unordered_map<std::string, std::uint64_t>& counts, Index max_size);
};

/// Tri-occurrence counts over vocabulary ids. Each unordered triple of
/// distinct positions p < q < r with r - p <= w - 1 and all three words in
/// the vocabulary adds 1 to the sorted word triple. Chunks may be fed in any
/// split; the result only depends on the concatenated id stream.
class TriCounter {
public:
    /// Id for tokens outside the vocabulary; they occupy a position but never
    /// take part in a triple.
    static constexpr Index kOutOfVocab = -1;

    TriCounter(Index vocab_size, int window);

    /// Counting within a chunk is sharded across threads; each shard looks
    /// back w - 1 positions so no window is lost at shard or chunk edges.
    void feed(std::span<const Index> ids);
    /// Starts an independent stream (no window crosses the break).
    void reset_history() { history_.clear(); }

    /// Sorted canonical triples with their counts.
    SymmetricSparseTensor3 finish() const;

private:
    Index vocab_size_;
    int window_;
    std::vector<Index> history_;
    std::unordered_map<std::uint64_t, double> counts_;
};

struct TriOccurrence {
    Vocab vocab;
    SymmetricSparseTensor3 counts;
    std::uint64_t tokens = 0;
};

/// One pass over the stream: tokens are interned, the vocabulary is the
/// top-V words, then triples are counted. Throws InvalidArgument for w < 3
/// or V < 1. An empty corpus gives an empty vocabulary and tensor.
TriOccurrence build_trioccurrence(std::istream& corpus, Index max_vocab, int window,
                                  std::size_t chunk_bytes = std::size_t{1} << 20);
/// Files are independent streams: no window spans two files.
TriOccurrence build_trioccurrence(const std::vector<std::filesystem::path>& files, Index max_vocab, int window);

/// v -> ln(1 + v) on stored entries. Throws InvalidArgument on negative values.
SparseTensor3 scale_log1p(const SparseTensor3& s);
SymmetricSparseTensor3 scale_log1p(const SymmetricSparseTensor3& s);

struct EmbeddingMatrix {
    /// V x 3k, unit rows except flagged ones.
    Matrix rows;
    /// Rows that were zero before normalization; they stay zero and are
    /// skipped by the evaluators.
    std::vector<char> zero_row;

    Index size() const { return rows.rows(); }
    bool usable(Index i) const { return !zero_row[static_cast<std::size_t>(i)]; }
};

/// [A | B | C] with every row scaled to unit norm. Weights are not folded in.
/// Throws InvalidArgument unless A, B and C have the same number of rows.
EmbeddingMatrix extract_embeddings(const CpModel& m, double zero_tol = 1e-300);

struct SimilarityPair {
    std::string w1;
    std::string w2;
    double score;
};

struct AnalogyQuad {
    std::string a;
    std::string a_star;
    std::string b;
    std::string b_star;
};

struct EvalReport {
    /// Spearman correlation or accuracy.
    double value = 0.0;
    std::size_t used = 0;
    std::size_t skipped = 0;
};

/// Spearman rank correlation (average ranks for ties) between embedding
/// cosines and human scores. Pairs with an unknown or zero-row word are
/// skipped. Throws NumericalFailure when fewer than 2 pairs remain or either
/// side has no rank variance.
EvalReport eval_similarity(const EmbeddingMatrix& e, const Vocab& vocab, const std::vector<SimilarityPair>& pairs);

/// Fraction of quads whose best cosine match to w_{a*} - w_a + w_b, over the
/// vocabulary minus {a, a*, b} and zero rows, is b*. Quads with an unknown or
/// zero-row word are skipped. Throws NumericalFailure when none remain.
EvalReport eval_analogy(const EmbeddingMatrix& e, const Vocab& vocab, const std::vector<AnalogyQuad>& quads);

/// Spearman correlation of two equal-length samples.
double spearman(std::span<const double> x, std::span<const double> y);

// ---------------------------------------------------------------- files

/// `word<TAB>count` per line, in vocabulary order.
void write_vocab(const std::filesystem::path& path, const Vocab& v);
Vocab read_vocab(const std::filesystem::path& path);

/// Canonical triples as ".coo" with dims V x V x V.
void write_trioccurrence(const std::filesystem::path& path, const SymmetricSparseTensor3& t);
/// Reads a ".coo" file as a symmetric tensor (coordinates are sorted into
/// canonical order and duplicates summed). Requires d1 = d2 = d3.
SymmetricSparseTensor3 read_symmetric_coo(const std::filesystem::path& path);

/// `word v1 ... v_{3k}`, tab separated.
void write_embeddings(const std::filesystem::path& path, const EmbeddingMatrix& e, const Vocab& v);
/// Returns the matrix and a vocabulary in file order (counts 0).
std::pair<EmbeddingMatrix, Vocab> read_embeddings(const std::filesystem::path& path);

/// Whitespace-separated `w1 w2 score`; blank lines and '#' lines ignored.
std::vector<SimilarityPair> read_similarity(const std::filesystem::path& path);
/// Whitespace-separated `a a* b b*`; blank lines and '#' lines ignored.
std::vector<AnalogyQuad> read_analogy(const std::filesystem::path& path);
void write_analogy(const std::filesystem::path& path, const std::vector<AnalogyQuad>& quads);

// ---------------------------------------------------------------- synthetic corpus

/// Corpus with planted analogy structure. Grid words g(c, a) combine one of
/// `concepts` concepts with one of `attributes` attributes; every concept and
/// attribute also owns `anchors` private words. Each sentence picks a concept
/// or attribute topic uniformly and draws `sentence_length` words uniformly
/// from its members, then a unique filler token (which never enters a
/// vocabulary of size vocab_size()) ends the sentence.
struct PlantedSpec {
    int concepts = 10;
    int attributes = 5;
    int anchors = 4;
    int sentence_length = 3;
    std::size_t sentences = 200000;
    std::uint64_t seed = 0;

    void validate() const;
    /// Number of non-filler words.
    Index vocab_size() const;
    /// Topics: concepts + attributes.
    Index topics() const { return concepts + attributes; }
};

std::string grid_word(int concept_id, int attribute_id);

void write_planted_corpus(std::ostream& out, const PlantedSpec& spec);
/// Every (g(c1,x), g(c1,y), g(c2,x), g(c2,y)) with c1 != c2 and x != y,
/// subsampled to at most `max_quads` with a seeded shuffle.
std::vector<AnalogyQuad> planted_analogies(const PlantedSpec& spec, std::size_t max_quads = 500);

}  // namespace tenfact::embed

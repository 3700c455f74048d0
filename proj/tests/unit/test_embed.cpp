#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include "tenfact/embed.hpp"
#include "tenfact/error.hpp"
#include "tenfact/rng.hpp"

using namespace tenfact;
using namespace tenfact::embed;
namespace fs = std::filesystem;

namespace {

TriOccurrence build(const std::string& text, Index V, int w, std::size_t chunk = 1 << 20) {
    std::istringstream in(text);
    return build_trioccurrence(in, V, w, chunk);
}

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() / ("tenfact_embed_" + std::to_string(Rng(std::random_device{}()).next()));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

Vocab vocab_of(const std::vector<std::string>& words) {
    std::unordered_map<std::string, std::uint64_t> c;
    for (std::size_t i = 0; i < words.size(); ++i) c[words[i]] = words.size() - i;
    return Vocab::from_counts(c, static_cast<Index>(words.size()));
}

EmbeddingMatrix from_rows(const Matrix& rows) {
    EmbeddingMatrix e;
    e.rows = rows;
    e.zero_row.assign(static_cast<std::size_t>(rows.rows()), 0);
    return e;
}

// Pearson correlation of average ranks.
double spearman_oracle(const std::vector<double>& x, const std::vector<double>& y) {
    auto ranks = [](const std::vector<double>& v) {
        std::vector<double> r(v.size());
        for (std::size_t i = 0; i < v.size(); ++i) {
            double less = 0, equal = 0;
            for (double u : v) {
                less += u < v[i];
                equal += u == v[i];
            }
            r[i] = less + (equal + 1.0) / 2.0;
        }
        return r;
    };
    const auto rx = ranks(x), ry = ranks(y);
    const double n = static_cast<double>(x.size());
    const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
    const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
    double sxy = 0, sxx = 0, syy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (rx[i] - mx) * (ry[i] - my);
        sxx += (rx[i] - mx) * (rx[i] - mx);
        syy += (ry[i] - my) * (ry[i] - my);
    }
    return sxy / std::sqrt(sxx * syy);
}

}  // namespace

TEST_CASE("tokenizer") {
    CHECK(tokenize("Hello, World--it's 42!") == std::vector<std::string>{"hello", "world", "it", "s", "42"});
    CHECK(tokenize("na\xc3\xafve caf\xc3\xa9") == std::vector<std::string>{"na\xc3\xafve", "caf\xc3\xa9"});
    // Em dash, curly quotes and no-break space separate.
    CHECK(tokenize("one\xe2\x80\x94two \xe2\x80\x9cthree\xe2\x80\x9d\xc2\xa0"
                   "four") == std::vector<std::string>{"one", "two", "three", "four"});
    // A stray continuation byte separates.
    CHECK(tokenize("ab\x80" "cd") == std::vector<std::string>{"ab", "cd"});
    CHECK(tokenize("").empty());

    const std::string text = "Caf\xc3\xa9 au lait\xe2\x80\x94Ok";
    std::vector<std::string> split;
    Tokenizer tok;
    for (char ch : text) tok.feed(std::string_view(&ch, 1), [&](std::string_view w) { split.emplace_back(w); });
    tok.finish([&](std::string_view w) { split.emplace_back(w); });
    CHECK(split == tokenize(text));
}

TEST_CASE("single window a b c") {
    const TriOccurrence t = build("a b c", 3, 3);
    CHECK(t.tokens == 3);
    CHECK(t.counts.nnz() == 1);
    CHECK(t.counts.logical_nnz() == 6);
    const Index a = *t.vocab.find("a"), b = *t.vocab.find("b"), c = *t.vocab.find("c");
    CHECK(t.counts.at(a, b, c) == 1.0);
    CHECK(t.counts.at(c, a, b) == 1.0);
    CHECK(t.counts.at(a, a, b) == 0.0);
}

TEST_CASE("repeated word gives diagonal counts only") {
    const TriOccurrence t = build("x x x x x", 1, 3);
    REQUIRE(t.counts.nnz() == 1);
    CHECK(t.counts.at(0, 0, 0) == 3.0);
}

TEST_CASE("counts match exhaustive window enumeration") {
    const std::vector<std::string> words{"the", "cat", "sat", "on", "the", "mat", "the", "cat", "ran", "to", "the", "cat"};
    std::string text;
    for (const auto& w : words) text += w + " ";
    for (int w : {3, 4, 5}) {
        for (Index V : {3, 4, 7}) {
            const TriOccurrence t = build(text, V, w);
            std::map<std::array<Index, 3>, double> expect;
            const auto n = static_cast<int>(words.size());
            for (int p = 0; p < n; ++p)
                for (int q = p + 1; q < n; ++q)
                    for (int r = q + 1; r < n && r - p <= w - 1; ++r) {
                        auto a = t.vocab.find(words[static_cast<std::size_t>(p)]);
                        auto b = t.vocab.find(words[static_cast<std::size_t>(q)]);
                        auto c = t.vocab.find(words[static_cast<std::size_t>(r)]);
                        if (!a || !b || !c) continue;
                        std::array<Index, 3> key{*a, *b, *c};
                        std::sort(key.begin(), key.end());
                        expect[key] += 1.0;
                    }
            REQUIRE(t.counts.nnz() == expect.size());
            for (const auto& [key, v] : expect) CHECK(t.counts.at(key[0], key[1], key[2]) == v);
        }
    }
}

TEST_CASE("vocabulary order is frequency then lexicographic") {
    const TriOccurrence t = build("b a c b a d b", 3, 3);
    CHECK(t.vocab.words == std::vector<std::string>{"b", "a", "c"});
    CHECK(t.vocab.counts == std::vector<std::uint64_t>{3, 2, 1});
    CHECK_FALSE(t.vocab.find("d").has_value());
}

TEST_CASE("counting is independent of chunk size") {
    PlantedSpec spec;
    spec.sentences = 300;
    spec.seed = 3;
    std::ostringstream out;
    write_planted_corpus(out, spec);
    const std::string text = out.str() + " caf\xc3\xa9 \xe2\x80\x94 na\xc3\xafve caf\xc3\xa9";
    const TriOccurrence ref = build(text, 50, 4);
    for (std::size_t chunk : {1, 2, 3, 7, 64, 4096}) {
        const TriOccurrence t = build(text, 50, 4, chunk);
        CHECK(t.vocab.words == ref.vocab.words);
        CHECK(t.tokens == ref.tokens);
        REQUIRE(t.counts.nnz() == ref.counts.nnz());
        for (std::size_t e = 0; e < ref.counts.nnz(); ++e) {
            CHECK(t.counts.entries()[e].value == ref.counts.entries()[e].value);
        }
    }
}

TEST_CASE("files are separate streams") {
    TempDir dir;
    {
        std::ofstream(dir.path / "a.txt") << "x y";
        std::ofstream(dir.path / "b.txt") << "z";
    }
    const TriOccurrence t = build_trioccurrence({dir.path / "a.txt", dir.path / "b.txt"}, 3, 3);
    CHECK(t.tokens == 3);
    CHECK(t.counts.nnz() == 0);
    CHECK(build("x y z", 3, 3).counts.nnz() == 1);
}

TEST_CASE("argument checks and empty corpus") {
    CHECK_THROWS_AS(build("a b c", 3, 2), InvalidArgument);
    CHECK_THROWS_AS(build("a b c", 0, 3), InvalidArgument);
    const TriOccurrence e = build("", 10, 3);
    CHECK(e.vocab.size() == 0);
    CHECK(e.counts.nnz() == 0);
}

TEST_CASE("scale_log1p") {
    CHECK(scale_log1p(SparseTensor3({2, 2, 2})).nnz() == 0);
    const SparseTensor3 s({2, 2, 2}, {{0, 1, 1, std::exp(1.0) - 1.0}, {1, 0, 0, 3.0}});
    const SparseTensor3 f = scale_log1p(s);
    CHECK(f.entries()[0].value == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(f.entries()[1].value == doctest::Approx(std::log(4.0)));
    CHECK_THROWS_AS(scale_log1p(SparseTensor3({2, 2, 2}, {{0, 0, 0, -1.0}})), InvalidArgument);
    const SymmetricSparseTensor3 y(3, {{2, 0, 1, std::exp(2.0) - 1.0}});
    CHECK(scale_log1p(y).at(0, 1, 2) == doctest::Approx(2.0));
}

TEST_CASE("extract_embeddings") {
    SUBCASE("one-hot rows") {
        const CpModel m{Vector::Ones(1), Vector::Unit(3, 1), Vector::Unit(3, 1), Vector::Unit(3, 1)};
        const EmbeddingMatrix e = extract_embeddings(m);
        CHECK(e.rows.rows() == 3);
        CHECK(e.rows.cols() == 3);
        CHECK(e.usable(1));
        CHECK_FALSE(e.usable(0));
        CHECK(e.rows.row(1).norm() == doctest::Approx(1.0));
        CHECK(e.rows.row(0).norm() == 0.0);
    }
    SUBCASE("matches concatenate then normalize") {
        Rng rng(4);
        const CpModel m{Vector::Ones(3), rng.unit_columns(7, 3), rng.unit_columns(7, 3), rng.unit_columns(7, 3)};
        const EmbeddingMatrix e = extract_embeddings(m);
        for (Index i = 0; i < 7; ++i) {
            std::vector<double> row;
            for (const Matrix* F : {&m.A, &m.B, &m.C})
                for (Index r = 0; r < 3; ++r) row.push_back((*F)(i, r));
            double n = 0;
            for (double v : row) n += v * v;
            n = std::sqrt(n);
            for (Index c = 0; c < 9; ++c) CHECK(std::abs(e.rows(i, c) - row[static_cast<std::size_t>(c)] / n) <= 1e-12);
            CHECK(std::abs(e.rows.row(i).norm() - 1.0) <= 1e-12);
        }
    }
    SUBCASE("row count mismatch") {
        const CpModel m{Vector::Ones(1), Matrix::Ones(3, 1), Matrix::Ones(4, 1), Matrix::Ones(3, 1)};
        CHECK_THROWS_AS(extract_embeddings(m), InvalidArgument);
    }
}

TEST_CASE("spearman") {
    const std::vector<double> x{0.1, 0.4, 0.3, 0.9, 0.5};
    CHECK(spearman(x, x) == doctest::Approx(1.0));
    const std::vector<double> neg{-0.1, -0.4, -0.3, -0.9, -0.5};
    CHECK(spearman(x, neg) == doctest::Approx(-1.0));
    const std::vector<double> y{2, 1, 4, 3, 5};
    CHECK(spearman(x, y) == doctest::Approx(0.3));
    const std::vector<double> ties{1, 1, 2, 3, 3};
    CHECK(spearman(x, ties) == doctest::Approx(spearman_oracle(x, ties)).epsilon(1e-12));
}

TEST_CASE("eval_similarity on hand-built embeddings") {
    const std::vector<double> cosines{0.1, 0.4, 0.3, 0.9, 0.5};
    const std::vector<double> human{2, 1, 4, 3, 5};
    std::vector<std::string> words;
    Matrix rows(10, 2);
    std::vector<SimilarityPair> pairs;
    for (std::size_t p = 0; p < 5; ++p) {
        const std::string u = "u" + std::to_string(p), v = "v" + std::to_string(p);
        words.push_back(u);
        words.push_back(v);
        rows.row(static_cast<Index>(2 * p)) << 1.0, 0.0;
        rows.row(static_cast<Index>(2 * p + 1)) << cosines[p], std::sqrt(1.0 - cosines[p] * cosines[p]);
        pairs.push_back({u, v, human[p]});
    }
    const Vocab vocab = vocab_of(words);
    Matrix ordered(10, 2);
    for (std::size_t i = 0; i < words.size(); ++i) ordered.row(*vocab.find(words[i])) = rows.row(static_cast<Index>(i));
    const EmbeddingMatrix e = from_rows(ordered);

    CHECK(eval_similarity(e, vocab, pairs).value == doctest::Approx(0.3));
    auto same = pairs;
    for (std::size_t p = 0; p < 5; ++p) same[p].score = cosines[p];
    CHECK(eval_similarity(e, vocab, same).value == doctest::Approx(1.0));
    for (std::size_t p = 0; p < 5; ++p) same[p].score = -cosines[p];
    CHECK(eval_similarity(e, vocab, same).value == doctest::Approx(-1.0));

    same.push_back({"u0", "missing", 1.0});
    const EvalReport r = eval_similarity(e, vocab, same);
    CHECK(r.used == 5);
    CHECK(r.skipped == 1);
    CHECK_THROWS_AS(eval_similarity(e, vocab, {pairs[0], {"nope", "u1", 2.0}}), NumericalFailure);
}

TEST_CASE("eval_analogy") {
    SUBCASE("exact parallelogram") {
        Rng rng(5);
        const std::vector<std::string> words{"a", "as", "b", "bs", "n1", "n2", "n3", "n4"};
        const Vocab vocab = vocab_of(words);
        Matrix rows(8, 6);
        for (Index i = 0; i < 8; ++i) rows.row(i) = rng.unit_vector(6).transpose();
        auto set = [&](const std::string& w, const Vector& v) { rows.row(*vocab.find(w)) = v.transpose(); };
        set("a", Vector::Unit(6, 0));
        set("as", Vector::Unit(6, 1));
        set("b", Vector::Unit(6, 2));
        set("bs", (Vector::Unit(6, 1) - Vector::Unit(6, 0) + Vector::Unit(6, 2)).normalized());
        const EvalReport r = eval_analogy(from_rows(rows), vocab, {{"a", "as", "b", "bs"}, {"a", "as", "b", "zz"}});
        CHECK(r.value == 1.0);
        CHECK(r.used == 1);
        CHECK(r.skipped == 1);
        CHECK_THROWS_AS(eval_analogy(from_rows(rows), vocab, {{"a", "as", "b", "zz"}}), NumericalFailure);
    }
    SUBCASE("random embeddings score at chance") {
        Rng rng(6);
        const Index V = 200;
        std::vector<std::string> words;
        for (Index i = 0; i < V; ++i) words.push_back("w" + std::to_string(i));
        const Vocab vocab = vocab_of(words);
        Matrix rows(V, 30);
        for (Index i = 0; i < V; ++i) rows.row(i) = rng.unit_vector(30).transpose();
        std::vector<AnalogyQuad> quads;
        for (int q = 0; q < 3000; ++q) {
            std::array<std::size_t, 4> id{};
            for (auto& x : id) x = static_cast<std::size_t>(rng.next() % static_cast<std::uint64_t>(V));
            quads.push_back({words[id[0]], words[id[1]], words[id[2]], words[id[3]]});
        }
        const double acc = eval_analogy(from_rows(rows), vocab, quads).value;
        const double chance = 1.0 / static_cast<double>(V - 3);
        // Binomial standard error at 3000 draws is about 0.0013.
        CHECK(std::abs(acc - chance) < 0.006);
    }
}

TEST_CASE("file round trips") {
    TempDir dir;
    const TriOccurrence t = build("a b c a b d a", 3, 4);
    write_vocab(dir.path / "v.tsv", t.vocab);
    const Vocab v = read_vocab(dir.path / "v.tsv");
    CHECK(v.words == t.vocab.words);
    CHECK(v.counts == t.vocab.counts);

    write_trioccurrence(dir.path / "t.coo", t.counts);
    const SymmetricSparseTensor3 back = read_symmetric_coo(dir.path / "t.coo");
    REQUIRE(back.nnz() == t.counts.nnz());
    for (std::size_t e = 0; e < back.nnz(); ++e) CHECK(back.entries()[e].value == t.counts.entries()[e].value);

    Rng rng(7);
    const CpModel m{Vector::Ones(2), rng.unit_columns(3, 2), rng.unit_columns(3, 2), rng.unit_columns(3, 2)};
    const EmbeddingMatrix e = extract_embeddings(m);
    write_embeddings(dir.path / "e.tsv", e, t.vocab);
    const auto [e2, v2] = read_embeddings(dir.path / "e.tsv");
    CHECK(e2.rows == e.rows);
    CHECK(v2.words == t.vocab.words);

    std::ofstream(dir.path / "s.txt") << "# comment\n\nA b 3.5\nc d 1\n";
    const auto sim = read_similarity(dir.path / "s.txt");
    REQUIRE(sim.size() == 2);
    CHECK(sim[0].w1 == "a");
    CHECK(sim[0].score == 3.5);

    const std::vector<AnalogyQuad> quads{{"a", "b", "c", "d"}, {"e", "f", "g", "h"}};
    write_analogy(dir.path / "q.txt", quads);
    const auto q2 = read_analogy(dir.path / "q.txt");
    REQUIRE(q2.size() == 2);
    CHECK(q2[1].b_star == "h");
}

TEST_CASE("planted corpus") {
    PlantedSpec spec;
    spec.sentences = 2000;
    spec.seed = 8;
    CHECK(spec.vocab_size() == 110);
    CHECK(spec.topics() == 15);
    CHECK(grid_word(3, 2) == "c3a2");
    std::ostringstream a, b;
    write_planted_corpus(a, spec);
    write_planted_corpus(b, spec);
    CHECK(a.str() == b.str());
    const TriOccurrence t = build(a.str(), spec.vocab_size(), 3);
    for (const auto& w : t.vocab.words) CHECK(w.rfind("zz", 0) != 0);
    CHECK(planted_analogies(spec).size() == 500);
    CHECK(planted_analogies(spec, 100000).size() == 1800);
    const auto q = planted_analogies(spec, 5);
    for (const auto& x : q) {
        CHECK(x.a != x.b);
        CHECK(x.a != x.a_star);
    }
    spec.concepts = 1;
    CHECK_THROWS_AS(spec.validate(), InvalidArgument);
}

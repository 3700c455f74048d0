#include <algorithm>
#include <ostream>

#include <fmt/format.h>

#include "tenfact/embed.hpp"
#include "tenfact/error.hpp"
#include "tenfact/rng.hpp"

namespace tenfact::embed {

void PlantedSpec::validate() const {
    if (concepts < 2 || attributes < 2) throw InvalidArgument("planted corpus: need at least 2 concepts and 2 attributes");
    if (anchors < 0) throw InvalidArgument("planted corpus: anchors must be non-negative");
    if (sentence_length < 3) throw InvalidArgument("planted corpus: sentences need at least 3 words");
}

Index PlantedSpec::vocab_size() const {
    return static_cast<Index>(concepts) * attributes + static_cast<Index>(concepts + attributes) * anchors;
}

std::string grid_word(int concept_id, int attribute_id) { return fmt::format("c{}a{}", concept_id, attribute_id); }

void write_planted_corpus(std::ostream& out, const PlantedSpec& spec) {
    spec.validate();
    // Topic members: concept topics first, then attribute topics.
    std::vector<std::vector<std::string>> topics;
    for (int c = 0; c < spec.concepts; ++c) {
        auto& t = topics.emplace_back();
        for (int a = 0; a < spec.attributes; ++a) t.push_back(grid_word(c, a));
        for (int j = 0; j < spec.anchors; ++j) t.push_back(fmt::format("c{}k{}", c, j));
    }
    for (int a = 0; a < spec.attributes; ++a) {
        auto& t = topics.emplace_back();
        for (int c = 0; c < spec.concepts; ++c) t.push_back(grid_word(c, a));
        for (int j = 0; j < spec.anchors; ++j) t.push_back(fmt::format("a{}k{}", a, j));
    }
    Rng rng(spec.seed);
    std::uniform_int_distribution<std::size_t> pick_topic(0, topics.size() - 1);
    std::string line;
    for (std::size_t s = 0; s < spec.sentences; ++s) {
        const auto& t = topics[pick_topic(rng.engine())];
        std::uniform_int_distribution<std::size_t> pick_word(0, t.size() - 1);
        line.clear();
        for (int i = 0; i < spec.sentence_length; ++i) {
            line += t[pick_word(rng.engine())];
            line += ' ';
        }
        // Seen once, so never inside the vocabulary; breaks every window.
        line += fmt::format("zz{}\n", s);
        out << line;
    }
}

std::vector<AnalogyQuad> planted_analogies(const PlantedSpec& spec, std::size_t max_quads) {
    spec.validate();
    std::vector<AnalogyQuad> all;
    for (int c1 = 0; c1 < spec.concepts; ++c1)
        for (int c2 = 0; c2 < spec.concepts; ++c2)
            for (int x = 0; x < spec.attributes; ++x)
                for (int y = 0; y < spec.attributes; ++y)
                    if (c1 != c2 && x != y) all.push_back({grid_word(c1, x), grid_word(c1, y), grid_word(c2, x), grid_word(c2, y)});
    if (all.size() > max_quads) {
        Rng rng(derive_seed(spec.seed, 1));
        std::shuffle(all.begin(), all.end(), rng.engine());
        all.resize(max_quads);
    }
    return all;
}

}  // namespace tenfact::embed

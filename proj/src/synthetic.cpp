#include "prereq/synthetic.hpp"

#include <array>

namespace prereq {

std::string pseudo_word(std::size_t index) {
    static constexpr std::array<char, 15> consonants{'b', 'd', 'f', 'g', 'k', 'l', 'm', 'n',
                                                     'p', 'r', 's', 't', 'v', 'z', 'h'};
    static constexpr std::array<char, 5> vowels{'a', 'e', 'i', 'o', 'u'};
    constexpr std::size_t syll = consonants.size() * vowels.size();
    // Three syllables give 421875 words; a leading marker keeps longer ones distinct.
    std::string w;
    std::size_t v = index;
    for (int s = 0; s < 3; ++s) {
        const std::size_t k = v % syll;
        v /= syll;
        w += consonants[k / vowels.size()];
        w += vowels[k % vowels.size()];
    }
    while (v > 0) {
        w += consonants[v % consonants.size()];
        v /= consonants.size();
    }
    return w;
}

namespace {

class WordPool {
public:
    explicit WordPool(std::uint64_t seed) : next_(seed % 421875) {}

    std::vector<std::string> take(int count) {
        std::vector<std::string> out;
        for (int i = 0; i < count; ++i) out.push_back(pseudo_word(next_++ * 7919 % 421875));
        return out;
    }

private:
    std::size_t next_;
};

const std::string& pick(const std::vector<std::string>& words, Rng& rng) {
    return words[uniform_index(rng, words.size())];
}

}  // namespace

SyntheticData generate_synthetic(const SyntheticSpec& spec) {
    if (spec.concepts < 2 || spec.layers < 2 || spec.layers > spec.concepts) {
        throw Error("generate_synthetic: need at least 2 concepts and 2 layers, with no more layers than concepts");
    }
    if (spec.docs_per_concept < 1 || spec.tokens_per_doc < 1 || spec.tokens_per_slide < 1) {
        throw Error("generate_synthetic: document sizes must be positive");
    }
    const int n = spec.concepts;
    WordPool pool(spec.seed);
    Rng rng(mix_seed(spec.seed, 62));

    SyntheticData data;
    data.layer.resize(static_cast<std::size_t>(n));
    std::vector<std::vector<int>> by_layer(static_cast<std::size_t>(spec.layers));
    for (int i = 0; i < n; ++i) {
        const int l = i * spec.layers / n;
        data.layer[static_cast<std::size_t>(i)] = l;
        by_layer[static_cast<std::size_t>(l)].push_back(i);
    }

    std::vector<std::string> names;
    std::vector<std::vector<std::string>> name_words, specific;
    for (int i = 0; i < n; ++i) {
        auto w = pool.take(2);
        names.push_back(w[0] + " " + w[1]);
        name_words.push_back(std::move(w));
        specific.push_back(pool.take(spec.specific_words));
    }
    std::vector<std::vector<std::string>> layer_vocab;
    for (int l = 0; l < spec.layers; ++l) layer_vocab.push_back(pool.take(spec.layer_words));
    const auto background = pool.take(spec.background_words);

    std::vector<Edge> edges;
    for (int j = 0; j < n; ++j) {
        const int lj = data.layer[static_cast<std::size_t>(j)];
        if (lj == 0) continue;
        bool has_adjacent = false;
        for (int i = 0; i < n; ++i) {
            const int gap = lj - data.layer[static_cast<std::size_t>(i)];
            if (gap <= 0) continue;
            const double p = gap == 1 ? spec.p_adjacent : gap == 2 ? spec.p_skip : spec.p_far;
            if (uniform01(rng) < p) {
                edges.emplace_back(i, j);
                has_adjacent = has_adjacent || gap == 1;
            }
        }
        if (!has_adjacent) {
            const auto& prev = by_layer[static_cast<std::size_t>(lj - 1)];
            edges.emplace_back(prev[uniform_index(rng, prev.size())], j);
        }
    }
    data.graph = ConceptGraph(names, edges);

    static constexpr std::array<Domain, 4> domains{Domain::ML, Domain::NLP, Domain::DL, Domain::AI};
    std::vector<Document> docs;
    for (int c = 0; c < n; ++c) {
        const auto& prereqs = data.graph.predecessors(c);
        const int l = data.layer[static_cast<std::size_t>(c)];
        for (int d = 0; d < spec.docs_per_concept; ++d) {
            Document doc;
            doc.id = "synthetic/c" + std::to_string(c) + "_d" + std::to_string(d);
            doc.source_path = doc.id + ".txt";
            doc.domain = domains[static_cast<std::size_t>(l) % domains.size()];
            doc.course = "layer" + std::to_string(l);
            std::string slide = names[static_cast<std::size_t>(c)] + "\n";
            int in_slide = 0;
            for (int t = 0; t < spec.tokens_per_doc; ++t) {
                const double r = uniform01(rng);
                std::string word;
                if (r < 0.12) {
                    word = pick(name_words[static_cast<std::size_t>(c)], rng);
                } else if (r < 0.35) {
                    word = pick(specific[static_cast<std::size_t>(c)], rng);
                } else if (r < 0.60) {
                    word = pick(layer_vocab[static_cast<std::size_t>(l)], rng);
                } else if (r < 0.75 && !prereqs.empty()) {
                    const int p = prereqs[uniform_index(rng, prereqs.size())];
                    word = pick(uniform01(rng) < 0.5 ? name_words[static_cast<std::size_t>(p)]
                                                     : specific[static_cast<std::size_t>(p)],
                                rng);
                } else {
                    word = pick(background, rng);
                }
                slide += (in_slide ? " " : "") + word;
                if (++in_slide == spec.tokens_per_slide) {
                    doc.slide_texts.push_back(slide);
                    slide = names[static_cast<std::size_t>(c)] + "\n";
                    in_slide = 0;
                }
            }
            if (in_slide) doc.slide_texts.push_back(slide);
            for (const auto& s : doc.slide_texts) {
                auto toks = tokenize(s);
                doc.tokens.insert(doc.tokens.end(), toks.begin(), toks.end());
            }
            docs.push_back(std::move(doc));
        }
    }
    data.documents = DocumentSet(std::move(docs), Provenance::Synthetic);
    return data;
}

}  // namespace prereq

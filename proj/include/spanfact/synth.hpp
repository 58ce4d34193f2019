#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "spanfact/corpus.hpp"

namespace spanfact {

// Templated synthetic benchmark corpus: short newswire-style source/summary
// pairs with planted NUMBER / PROPER / DATE / QUANTITY entities. Every
// summary entity appears verbatim exactly once in its source.
struct SynthPair {
    DocumentPair pair;
    std::size_t planted = 0;  // designed summary entity count
};

struct SynthCorpus {
    std::vector<SynthPair> pairs;
    double mean_planted() const;
    std::vector<DocumentPair> documents() const;
};

SynthCorpus generate_synthetic_corpus(std::size_t n_pairs, std::uint64_t seed);

// City names used as the proper-noun lexicon for the synthetic corpus.
const std::vector<std::string>& synthetic_proper_lexicon();

}  // namespace spanfact

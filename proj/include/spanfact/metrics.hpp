#pragma once

#include <map>
#include <string>
#include <vector>

#include "spanfact/corpus.hpp"
#include "spanfact/entities.hpp"

namespace spanfact {

struct RougeScore {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

// Clipped n-gram overlap, n in {1,2}. Empty candidate or reference -> zeros.
RougeScore rouge_n(const std::vector<std::string>& candidate,
                   const std::vector<std::string>& reference, int n);

// Longest common subsequence variant.
RougeScore rouge_l(const std::vector<std::string>& candidate,
                   const std::vector<std::string>& reference);

// Multiset token overlap F1 after normalization (lowercase, punctuation
// stripped). Both empty -> 1, one empty -> 0.
double token_f1(const std::string& answer_a, const std::string& answer_b);

// Fraction of summary entity surfaces appearing verbatim in the source;
// no entities -> 1. Desk-scale factuality proxy.
double entity_precision(const TokenizedText& summary, const TokenizedText& source,
                        const EntityTagger& tagger);

struct RestorationResult {
    std::size_t corrupted = 0;
    std::size_t restored = 0;
    std::size_t uncorrupted = 0;
    std::size_t false_changes = 0;
    double restoration_rate = 0.0;
    double false_change_rate = 0.0;
};

// Per entity (draft surface, corrected surface), keyed by doc_id, aligned
// against corruption logs by entity position. Throws on misaligned ids.
using DocEntityOutcomes = std::map<std::string, std::vector<std::pair<std::string, std::string>>>;
RestorationResult restoration_rate(const DocEntityOutcomes& outcomes,
                                   const std::vector<DocCorruptionLog>& logs);

}  // namespace spanfact

#pragma once

#include <memory>
#include <string>
#include <unordered_set>
#include <vector>

#include "spanfact/textcore.hpp"

namespace spanfact {

enum class EntityKind { Number, Date, Proper, Quantity };

const char* entity_kind_name(EntityKind kind);

struct EntitySpan {
    std::size_t token_start = 0;  // inclusive
    std::size_t token_end = 0;    // exclusive
    std::string surface;          // lowercased detokenized slice
    EntityKind kind = EntityKind::Number;
};

struct Occurrence {
    EntitySpan span;  // span in the source
    double score = 0.0;
};

struct OccurrenceRanking {
    std::vector<Occurrence> candidates;  // scores non-increasing, ties by position
};

// Pluggable tagging contract; a learned tagger can replace RuleTagger.
class EntityTagger {
public:
    virtual ~EntityTagger() = default;
    virtual std::vector<EntitySpan> tag(const TokenizedText& text) const = 0;
};

// Deterministic rule-based tagger:
//   maximal digit / number-word runs            -> NUMBER
//   [number] month-name [number]                -> DATE
//   number run followed by unit tokens          -> QUANTITY
//   maximal runs of lexicon-marked proper nouns -> PROPER
class RuleTagger : public EntityTagger {
public:
    RuleTagger() = default;
    explicit RuleTagger(std::unordered_set<std::string> proper_lexicon);
    static RuleTagger from_lexicon_file(const std::string& path);

    std::vector<EntitySpan> tag(const TokenizedText& text) const override;

    const std::unordered_set<std::string>& proper_lexicon() const { return proper_; }

private:
    std::unordered_set<std::string> proper_;
};

// Unit-cost character-level Levenshtein distance.
std::size_t edit_distance(const std::string& a, const std::string& b);

// 1 - edit_distance(a,b) / max(|a|,|b|,1); symmetric, in [0,1].
double fuzzy_similarity(const std::string& a, const std::string& b);

// Sentence token ranges: a sentence ends after a ".", "!" or "?" token.
std::vector<std::pair<std::size_t, std::size_t>> sentence_spans(const TokenizedText& text);

// Every source span whose lowercased surface equals entity.surface, scored
// by fuzzy similarity of the query sentence against the enclosing source
// sentence. Empty ranking when the entity is absent.
OccurrenceRanking rank_occurrences(const EntitySpan& entity, const std::string& query_sentence,
                                   const TokenizedText& source);

}  // namespace spanfact

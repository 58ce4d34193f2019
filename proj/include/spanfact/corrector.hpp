#pragma once

#include <functional>
#include <string>
#include <vector>

#include "spanfact/corpus.hpp"
#include "spanfact/entities.hpp"
#include "spanfact/qaspan.hpp"
#include "spanfact/train.hpp"

namespace spanfact {

struct TraceRecord {
    std::string query_snapshot;   // masked query at this step
    SpanPrediction predicted;
    std::string original;         // draft surface of the entity
    std::string substituted;      // surface placed into the summary
    double logprob = 0.0;
    bool sentinel = false;
};

struct CorrectionTrace {
    std::string engine;  // "qa" or "ar"
    std::vector<TraceRecord> records;       // one per draft entity
    std::vector<std::string> corrected_tokens;
    std::string corrected_raw;
};

// Single-mask span predictor: maps a packed example to one constrained
// span. Engines take the functor so tests can substitute oracle models.
using SpanPredictor = std::function<SpanPrediction(const SpanExample&)>;
// All-mask predictor: one span per MASK, left to right.
using SequencePredictor = std::function<std::vector<SpanPrediction>(const SpanExample&)>;

SpanPredictor make_predictor(const QaModel& model, std::size_t k);
SequencePredictor make_predictor(const ArModel& model, std::size_t b, std::size_t k);

// Entities processed left to right; step i's query is the updated summary
// with only entity i masked. Sentinel predictions keep the original
// surface.
CorrectionTrace correct_iterative(const TokenizedText& source, const TokenizedText& draft,
                                  const EntityTagger& tagger, const SpanPredictor& predictor,
                                  std::size_t max_len);

// One packed input with all T entities masked; beam-searched spans fill
// the masks left to right.
CorrectionTrace correct_autoregressive(const TokenizedText& source, const TokenizedText& draft,
                                       const EntityTagger& tagger,
                                       const SequencePredictor& predictor, std::size_t max_len);

}  // namespace spanfact

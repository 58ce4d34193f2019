#pragma once

#include <random>
#include <string>
#include <utility>
#include <vector>

#include "spanfact/encoder.hpp"
#include "spanfact/tensor.hpp"

namespace spanfact {

struct PointerDistributions {
    std::vector<double> a_start;  // p(i = start), length H
    std::vector<double> a_end;    // p(i = end pointer), length H
};

// Spans are end-exclusive in the public API. The end pointer distribution
// indexes the last in-span token, so a prediction (s, e) carries
// probability a_start[s] * a_end[e-1]; the sentinel scores
// a_start[0] * a_end[1].
struct SpanPrediction {
    std::size_t start = 0;
    std::size_t end = 1;
    double score = 0.0;  // joint log-probability
    bool is_sentinel = false;

    std::size_t length() const { return end - start; }
    bool operator==(const SpanPrediction& o) const {
        return start == o.start && end == o.end && is_sentinel == o.is_sentinel;
    }
};

void init_qa_params(std::size_t d_model, ParamMap& params, std::mt19937_64& rng,
                    const std::string& prefix = "qa.");

// Per-position scalar projections q_i = ReLU(w^T h_i + b); padded
// positions forced to a large negative value before softmax.
std::pair<Tensor, Tensor> span_logits(const EncoderStates& states, const ParamMap& params,
                                      const std::string& prefix = "qa.");

// Softmax over positions 0..H-1. Throws when every position is padded.
PointerDistributions pointer_distributions(const Tensor& start_logits, const Tensor& end_logits);

// Constrained joint argmax over the source segment: start > query_len+1,
// span length in [1, k]. Ties take the smallest start, then smallest end.
// The sentinel wins only on a strictly greater score; it is also returned
// when no valid pair exists.
SpanPrediction best_constrained_span(const PointerDistributions& dists, std::size_t query_len,
                                     std::size_t k);

// Top-n constrained spans by joint log-probability (sentinel included),
// ordered by score desc then smallest start/end; beam expansion pool.
std::vector<SpanPrediction> top_constrained_spans(const PointerDistributions& dists,
                                                  std::size_t query_len, std::size_t k,
                                                  std::size_t n);

}  // namespace spanfact

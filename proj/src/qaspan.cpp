#include "spanfact/qaspan.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace spanfact {

namespace {
constexpr double kMaskBias = -1e30;
}

void init_qa_params(std::size_t d_model, ParamMap& params, std::mt19937_64& rng,
                    const std::string& prefix) {
    // Positive bias keeps the rectified pointer head active at init;
    // a zero bias can leave every position dead with no gradient path.
    const double stddev = 1.0 / std::sqrt(static_cast<double>(d_model));
    params.add_randn(prefix + "w_s", {d_model, 1}, rng, stddev);
    params.add_ones(prefix + "b_s", {1});
    params.add_randn(prefix + "w_e", {d_model, 1}, rng, stddev);
    params.add_ones(prefix + "b_e", {1});
}

std::pair<Tensor, Tensor> span_logits(const EncoderStates& states, const ParamMap& params,
                                      const std::string& prefix) {
    const std::size_t h = states.hidden.rows();
    std::vector<double> pad_bias(h, 0.0);
    bool any_pad = false;
    for (std::size_t i = 0; i < h; ++i)
        if (i < states.pad_mask.size() && states.pad_mask[i]) {
            pad_bias[i] = kMaskBias;
            any_pad = true;
        }
    auto project = [&](const char* w, const char* b) {
        Tensor logits = reshape(
            relu(add_bias(matmul(states.hidden, params.at(prefix + w)), params.at(prefix + b))),
            {h});
        return any_pad ? add_const(logits, pad_bias) : logits;
    };
    return {project("w_s", "b_s"), project("w_e", "b_e")};
}

PointerDistributions pointer_distributions(const Tensor& start_logits, const Tensor& end_logits) {
    if (start_logits.shape().size() != 1 || end_logits.shape() != start_logits.shape())
        throw std::invalid_argument("pointer logits must be equal-length vectors");
    auto all_masked = [](const Tensor& t) {
        for (std::size_t i = 0; i < t.size(); ++i)
            if (t.at(i) > kMaskBias / 2) return false;
        return true;
    };
    if (all_masked(start_logits)) throw std::runtime_error("all positions padded");
    PointerDistributions d;
    d.a_start = softmax_rows(start_logits).vec();
    d.a_end = softmax_rows(end_logits).vec();
    return d;
}

std::vector<SpanPrediction> top_constrained_spans(const PointerDistributions& dists,
                                                  std::size_t query_len, std::size_t k,
                                                  std::size_t n) {
    if (k < 1) throw std::invalid_argument("span length constraint k must be >= 1");
    const std::size_t h = dists.a_start.size();
    std::vector<SpanPrediction> pairs;
    for (std::size_t s = query_len + 2; s < h; ++s) {
        const double ls = std::log(dists.a_start[s]);
        for (std::size_t j = s; j < std::min(h, s + k); ++j) {
            // j is the end pointer (last in-span token); exclusive end j+1
            pairs.push_back({s, j + 1, ls + std::log(dists.a_end[j]), false});
        }
    }
    std::sort(pairs.begin(), pairs.end(), [](const SpanPrediction& a, const SpanPrediction& b) {
        if (a.score != b.score) return a.score > b.score;
        if (a.start != b.start) return a.start < b.start;
        return a.end < b.end;
    });

    SpanPrediction sentinel{0, 1, 0.0, true};
    sentinel.score = std::log(dists.a_start[0]) + (h > 1 ? std::log(dists.a_end[1]) : kMaskBias);

    std::vector<SpanPrediction> out;
    bool sentinel_placed = false;
    for (const auto& p : pairs) {
        if (!sentinel_placed && sentinel.score > p.score) {
            out.push_back(sentinel);
            sentinel_placed = true;
        }
        out.push_back(p);
        if (out.size() >= n && sentinel_placed) break;
        if (out.size() >= n + 1) break;  // room left for sentinel only
    }
    if (!sentinel_placed) out.push_back(sentinel);
    if (out.size() > n) out.resize(n);
    return out;
}

SpanPrediction best_constrained_span(const PointerDistributions& dists, std::size_t query_len,
                                     std::size_t k) {
    return top_constrained_spans(dists, query_len, k, 1).front();
}

}  // namespace spanfact

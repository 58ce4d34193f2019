#pragma once

#include <random>
#include <string>
#include <vector>

#include "spanfact/corpus.hpp"
#include "spanfact/encoder.hpp"
#include "spanfact/qaspan.hpp"

namespace spanfact {

struct DecoderConfig {
    std::size_t d_model = 64;
    std::size_t n_heads = 4;
    std::size_t n_layers = 2;  // shallow decoder
    std::size_t d_ff = 256;
};

struct BeamHypothesis {
    std::vector<SpanPrediction> spans;
    double cum_logprob = 0.0;
};

void init_decoder_params(const DecoderConfig& cfg, ParamMap& params, std::mt19937_64& rng,
                         const std::string& prefix = "dec.");

// z_t = W [h_mask_t ; s_ent_prev], no bias. Inputs are (1, d_model).
Tensor fuse(const Tensor& h_mask_t, const Tensor& s_ent_prev, const ParamMap& params,
            const std::string& prefix = "dec.");

// Causal transformer decoder over the fused inputs Z (t, d_model) with a
// cross-attention sublayer over the encoder states; returns all decoder
// hidden states (t, d_model).
Tensor decoder_forward(const Tensor& z, const EncoderStates& encoder, const DecoderConfig& cfg,
                       const ParamMap& params, const std::string& prefix = "dec.");

// Bilinear two-pointer scores of a decoder state against every encoder
// state: h'^T W_s h_i and h'^T W_e h_i, padded positions masked.
std::pair<Tensor, Tensor> pointer_logits(const Tensor& decoder_state,
                                         const EncoderStates& encoder, const ParamMap& params,
                                         const std::string& prefix = "dec.");

// Decoder step t over fused inputs z_1..z_t: returns (h'_t, start/end
// distributions over the encoder states).
std::pair<Tensor, PointerDistributions> decode_step(const Tensor& z_prefix,
                                                    const EncoderStates& encoder,
                                                    const DecoderConfig& cfg,
                                                    const ParamMap& params,
                                                    const std::string& prefix = "dec.");

// Mean of encoder hidden rows start..end-1; the sentinel maps to the CLS
// row.
Tensor mean_pool_span(const EncoderStates& encoder, const SpanPrediction& span);

// Beam search over the T mask slots of an all-mask example: exactly T
// steps, per-step candidates = top-b constrained spans plus the sentinel,
// keep global top-b by cumulative log-probability. Throws on T == 0.
BeamHypothesis beam_search(const SpanExample& example, const EncoderStates& encoder,
                           const DecoderConfig& cfg, const ParamMap& params, std::size_t b,
                           std::size_t k, const std::string& prefix = "dec.");

}  // namespace spanfact

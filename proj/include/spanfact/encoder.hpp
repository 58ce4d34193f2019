#pragma once

#include <random>
#include <string>
#include <vector>

#include "spanfact/corpus.hpp"
#include "spanfact/tensor.hpp"

namespace spanfact {

struct EncoderConfig {
    std::size_t vocab_size = 0;
    std::size_t d_model = 64;
    std::size_t n_heads = 4;
    std::size_t n_layers = 2;
    std::size_t d_ff = 256;
    std::size_t max_len = 128;
    double dropout_rate = 0.0;  // fixed 0 at desk scale

    std::size_t d_head() const { return d_model / n_heads; }
    void check() const;  // d_model divisible by n_heads, vocab_size > 0
};

struct EncoderStates {
    Tensor hidden;               // (seq_len, d_model), top layer
    std::vector<bool> pad_mask;  // true -> padded position
};

// Parameter names are "<prefix>..."; default prefix "enc.".
void init_encoder_params(const EncoderConfig& cfg, ParamMap& params, std::mt19937_64& rng,
                         const std::string& prefix = "enc.");

// Row i = tok_emb[id_i] + pos_emb[i] + seg_emb[segment_i].
Tensor embed_input(const std::vector<int>& ids, const std::vector<int>& segment_ids,
                   const EncoderConfig& cfg, const ParamMap& params,
                   const std::string& prefix = "enc.");

// Post-norm residual stack: h~ = LN(h + MHAtt(h)); h = LN(h~ + FFN(h~)).
// Padded keys are masked out of every attention row.
EncoderStates encode(const Tensor& embedded, const std::vector<bool>& pad_mask,
                     const EncoderConfig& cfg, const ParamMap& params,
                     const std::string& prefix = "enc.");

EncoderStates encode_example(const SpanExample& example, const EncoderConfig& cfg,
                             const ParamMap& params, const std::string& prefix = "enc.");

// Shared multi-head attention; query rows attend to key/value rows.
// attn_bias, when non-empty, is a (q_len*kv_len) additive score matrix
// (large negative entries mask keys).
Tensor multi_head_attention(const Tensor& query_in, const Tensor& kv_in, std::size_t n_heads,
                            const ParamMap& params, const std::string& prefix,
                            const std::vector<double>& attn_bias);

void init_attention_params(std::size_t d_model, ParamMap& params, std::mt19937_64& rng,
                           const std::string& prefix);

std::vector<double> pad_attn_bias(std::size_t q_len, const std::vector<bool>& key_pad);
std::vector<double> causal_attn_bias(std::size_t len);

}  // namespace spanfact

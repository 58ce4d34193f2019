#include "spanfact/encoder.hpp"

#include <cmath>
#include <stdexcept>

namespace spanfact {

namespace {

constexpr double kMaskBias = -1e30;

Tensor feed_forward(const Tensor& x, const ParamMap& p, const std::string& prefix) {
    Tensor h = relu(add_bias(matmul(x, p.at(prefix + "w1")), p.at(prefix + "b1")));
    return add_bias(matmul(h, p.at(prefix + "w2")), p.at(prefix + "b2"));
}

Tensor ln_affine(const Tensor& x, const ParamMap& p, const std::string& prefix) {
    return add_bias(mul_rowwise(layer_norm(x), p.at(prefix + "g")), p.at(prefix + "b"));
}

}  // namespace

void EncoderConfig::check() const {
    if (vocab_size == 0) throw std::invalid_argument("encoder vocab_size must be > 0");
    if (n_heads == 0 || d_model % n_heads != 0)
        throw std::invalid_argument("d_model must be divisible by n_heads");
}

void init_attention_params(std::size_t d, ParamMap& params, std::mt19937_64& rng,
                           const std::string& prefix) {
    const double xavier = std::sqrt(2.0 / static_cast<double>(d + d));
    params.add_randn(prefix + "wq", {d, d}, rng, xavier);
    params.add_randn(prefix + "wk", {d, d}, rng, xavier);
    params.add_randn(prefix + "wv", {d, d}, rng, xavier);
    params.add_randn(prefix + "wo", {d, d}, rng, xavier);
    params.add_zeros(prefix + "bq", {d});
    params.add_zeros(prefix + "bk", {d});
    params.add_zeros(prefix + "bv", {d});
    params.add_zeros(prefix + "bo", {d});
}

void init_encoder_params(const EncoderConfig& cfg, ParamMap& params, std::mt19937_64& rng,
                         const std::string& prefix) {
    cfg.check();
    // Embeddings feed the first attention layer un-normalized, so they need
    // enough scale to produce usable attention logits from step one.
    const double emb = 1.0 / std::sqrt(static_cast<double>(cfg.d_model));
    const double xavier_ffn =
        std::sqrt(2.0 / static_cast<double>(cfg.d_model + cfg.d_ff));
    params.add_randn(prefix + "tok_emb", {cfg.vocab_size, cfg.d_model}, rng, emb);
    params.add_randn(prefix + "pos_emb", {cfg.max_len, cfg.d_model}, rng, emb);
    params.add_randn(prefix + "seg_emb", {2, cfg.d_model}, rng, emb);
    for (std::size_t l = 0; l < cfg.n_layers; ++l) {
        const std::string lp = prefix + "layer" + std::to_string(l) + ".";
        init_attention_params(cfg.d_model, params, rng, lp + "attn.");
        params.add_ones(lp + "ln1.g", {cfg.d_model});
        params.add_zeros(lp + "ln1.b", {cfg.d_model});
        params.add_randn(lp + "ffn.w1", {cfg.d_model, cfg.d_ff}, rng, xavier_ffn);
        params.add_zeros(lp + "ffn.b1", {cfg.d_ff});
        params.add_randn(lp + "ffn.w2", {cfg.d_ff, cfg.d_model}, rng, xavier_ffn);
        params.add_zeros(lp + "ffn.b2", {cfg.d_model});
        params.add_ones(lp + "ln2.g", {cfg.d_model});
        params.add_zeros(lp + "ln2.b", {cfg.d_model});
    }
}

Tensor embed_input(const std::vector<int>& ids, const std::vector<int>& segment_ids,
                   const EncoderConfig& cfg, const ParamMap& params, const std::string& prefix) {
    if (ids.size() != segment_ids.size())
        throw std::invalid_argument("ids and segment_ids lengths differ");
    if (ids.size() > cfg.max_len)
        throw std::invalid_argument("sequence length " + std::to_string(ids.size()) +
                                    " exceeds max_len " + std::to_string(cfg.max_len));
    for (int id : ids)
        if (id < 0 || static_cast<std::size_t>(id) >= cfg.vocab_size)
            throw std::out_of_range("token id out of range: " + std::to_string(id));
    std::vector<std::size_t> positions(ids.size());
    for (std::size_t i = 0; i < positions.size(); ++i) positions[i] = i;
    Tensor tok = embed(params.at(prefix + "tok_emb"), ids);
    Tensor pos = gather_rows(params.at(prefix + "pos_emb"), positions);
    Tensor seg = embed(params.at(prefix + "seg_emb"), segment_ids);
    return add(add(tok, pos), seg);
}

Tensor multi_head_attention(const Tensor& query_in, const Tensor& kv_in, std::size_t n_heads,
                            const ParamMap& params, const std::string& prefix,
                            const std::vector<double>& attn_bias) {
    const std::size_t d = query_in.cols();
    const std::size_t dh = d / n_heads;
    Tensor q = add_bias(matmul(query_in, params.at(prefix + "wq")), params.at(prefix + "bq"));
    Tensor k = add_bias(matmul(kv_in, params.at(prefix + "wk")), params.at(prefix + "bk"));
    Tensor v = add_bias(matmul(kv_in, params.at(prefix + "wv")), params.at(prefix + "bv"));

    Tensor heads;
    for (std::size_t h = 0; h < n_heads; ++h) {
        Tensor qh = slice_cols(q, h * dh, dh);
        Tensor kh = slice_cols(k, h * dh, dh);
        Tensor vh = slice_cols(v, h * dh, dh);
        Tensor scores = scale(matmul(qh, transpose(kh)), 1.0 / std::sqrt(static_cast<double>(dh)));
        if (!attn_bias.empty()) scores = add_const(scores, attn_bias);
        Tensor out = matmul(softmax_rows(scores), vh);
        heads = h == 0 ? out : concat(heads, out, 1);
    }
    return add_bias(matmul(heads, params.at(prefix + "wo")), params.at(prefix + "bo"));
}

std::vector<double> pad_attn_bias(std::size_t q_len, const std::vector<bool>& key_pad) {
    bool any = false;
    for (bool b : key_pad) any = any || b;
    if (!any) return {};
    std::vector<double> bias(q_len * key_pad.size(), 0.0);
    for (std::size_t i = 0; i < q_len; ++i)
        for (std::size_t j = 0; j < key_pad.size(); ++j)
            if (key_pad[j]) bias[i * key_pad.size() + j] = kMaskBias;
    return bias;
}

std::vector<double> causal_attn_bias(std::size_t len) {
    std::vector<double> bias(len * len, 0.0);
    for (std::size_t i = 0; i < len; ++i)
        for (std::size_t j = i + 1; j < len; ++j) bias[i * len + j] = kMaskBias;
    return bias;
}

EncoderStates encode(const Tensor& embedded, const std::vector<bool>& pad_mask,
                     const EncoderConfig& cfg, const ParamMap& params,
                     const std::string& prefix) {
    if (embedded.shape().size() != 2 || embedded.cols() != cfg.d_model)
        throw std::invalid_argument("encode expects (seq_len, d_model) input, got " +
                                    shape_str(embedded.shape()));
    const std::size_t seq = embedded.rows();
    std::vector<bool> mask = pad_mask.empty() ? std::vector<bool>(seq, false) : pad_mask;
    if (mask.size() != seq) throw std::invalid_argument("pad mask length mismatch");
    const std::vector<double> bias = pad_attn_bias(seq, mask);

    Tensor h = embedded;
    for (std::size_t l = 0; l < cfg.n_layers; ++l) {
        const std::string lp = prefix + "layer" + std::to_string(l) + ".";
        Tensor attn = multi_head_attention(h, h, cfg.n_heads, params, lp + "attn.", bias);
        h = ln_affine(add(h, attn), params, lp + "ln1.");
        Tensor ffn = feed_forward(h, params, lp + "ffn.");
        h = ln_affine(add(h, ffn), params, lp + "ln2.");
    }
    return {h, mask};
}

EncoderStates encode_example(const SpanExample& example, const EncoderConfig& cfg,
                             const ParamMap& params, const std::string& prefix) {
    std::vector<bool> pad(example.input_ids.size());
    for (std::size_t i = 0; i < pad.size(); ++i) pad[i] = example.input_ids[i] == Vocabulary::kPad;
    Tensor embedded = embed_input(example.input_ids, example.segment_ids, cfg, params, prefix);
    return encode(embedded, pad, cfg, params, prefix);
}

}  // namespace spanfact

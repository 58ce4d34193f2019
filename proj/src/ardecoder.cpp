#include "spanfact/ardecoder.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace spanfact {

namespace {
constexpr double kMaskBias = -1e30;
}

void init_decoder_params(const DecoderConfig& cfg, ParamMap& params, std::mt19937_64& rng,
                         const std::string& prefix) {
    if (cfg.n_heads == 0 || cfg.d_model % cfg.n_heads != 0)
        throw std::invalid_argument("decoder d_model must be divisible by n_heads");
    const double xavier_fuse =
        std::sqrt(2.0 / static_cast<double>(3 * cfg.d_model));
    const double xavier_ffn =
        std::sqrt(2.0 / static_cast<double>(cfg.d_model + cfg.d_ff));
    params.add_randn(prefix + "fuse_w", {2 * cfg.d_model, cfg.d_model}, rng, xavier_fuse);
    for (std::size_t l = 0; l < cfg.n_layers; ++l) {
        const std::string lp = prefix + "layer" + std::to_string(l) + ".";
        init_attention_params(cfg.d_model, params, rng, lp + "self.");
        params.add_ones(lp + "ln1.g", {cfg.d_model});
        params.add_zeros(lp + "ln1.b", {cfg.d_model});
        init_attention_params(cfg.d_model, params, rng, lp + "cross.");
        params.add_ones(lp + "lnc.g", {cfg.d_model});
        params.add_zeros(lp + "lnc.b", {cfg.d_model});
        params.add_randn(lp + "ffn.w1", {cfg.d_model, cfg.d_ff}, rng, xavier_ffn);
        params.add_zeros(lp + "ffn.b1", {cfg.d_ff});
        params.add_randn(lp + "ffn.w2", {cfg.d_ff, cfg.d_model}, rng, xavier_ffn);
        params.add_zeros(lp + "ffn.b2", {cfg.d_model});
        params.add_ones(lp + "ln2.g", {cfg.d_model});
        params.add_zeros(lp + "ln2.b", {cfg.d_model});
    }
    // Bilinear pointer scores sum d_model^2 products; 1/d keeps them O(1).
    const double ptr = 1.0 / static_cast<double>(cfg.d_model);
    params.add_randn(prefix + "ptr_s", {cfg.d_model, cfg.d_model}, rng, ptr);
    params.add_randn(prefix + "ptr_e", {cfg.d_model, cfg.d_model}, rng, ptr);
}

Tensor fuse(const Tensor& h_mask_t, const Tensor& s_ent_prev, const ParamMap& params,
            const std::string& prefix) {
    if (h_mask_t.shape().size() != 2 || h_mask_t.rows() != 1 ||
        s_ent_prev.shape() != h_mask_t.shape())
        throw std::invalid_argument("fuse expects two (1, d_model) vectors, got " +
                                    shape_str(h_mask_t.shape()) + " and " +
                                    shape_str(s_ent_prev.shape()));
    return matmul(concat(h_mask_t, s_ent_prev, 1), params.at(prefix + "fuse_w"));
}

Tensor decoder_forward(const Tensor& z, const EncoderStates& encoder, const DecoderConfig& cfg,
                       const ParamMap& params, const std::string& prefix) {
    if (z.shape().size() != 2 || z.cols() != cfg.d_model)
        throw std::invalid_argument("decoder input must be (t, d_model), got " +
                                    shape_str(z.shape()));
    const std::size_t t = z.rows();
    const std::vector<double> causal = causal_attn_bias(t);
    const std::vector<double> cross_bias = pad_attn_bias(t, encoder.pad_mask);

    auto ln_affine = [&](const Tensor& x, const std::string& lnp) {
        return add_bias(mul_rowwise(layer_norm(x), params.at(lnp + "g")), params.at(lnp + "b"));
    };

    Tensor h = z;
    for (std::size_t l = 0; l < cfg.n_layers; ++l) {
        const std::string lp = prefix + "layer" + std::to_string(l) + ".";
        Tensor self = multi_head_attention(h, h, cfg.n_heads, params, lp + "self.", causal);
        h = ln_affine(add(h, self), lp + "ln1.");
        Tensor cross =
            multi_head_attention(h, encoder.hidden, cfg.n_heads, params, lp + "cross.", cross_bias);
        h = ln_affine(add(h, cross), lp + "lnc.");
        Tensor f = relu(add_bias(matmul(h, params.at(lp + "ffn.w1")), params.at(lp + "ffn.b1")));
        f = add_bias(matmul(f, params.at(lp + "ffn.w2")), params.at(lp + "ffn.b2"));
        h = ln_affine(add(h, f), lp + "ln2.");
    }
    return h;
}

std::pair<Tensor, Tensor> pointer_logits(const Tensor& decoder_state,
                                         const EncoderStates& encoder, const ParamMap& params,
                                         const std::string& prefix) {
    if (decoder_state.shape().size() != 2 || decoder_state.rows() != 1)
        throw std::invalid_argument("pointer_logits expects a (1, d_model) decoder state");
    const std::size_t h = encoder.hidden.rows();
    std::vector<double> pad_bias(h, 0.0);
    bool any_pad = false;
    for (std::size_t i = 0; i < h && i < encoder.pad_mask.size(); ++i)
        if (encoder.pad_mask[i]) {
            pad_bias[i] = kMaskBias;
            any_pad = true;
        }
    auto project = [&](const char* w) {
        Tensor scores = reshape(
            matmul(matmul(decoder_state, params.at(prefix + w)), transpose(encoder.hidden)), {h});
        return any_pad ? add_const(scores, pad_bias) : scores;
    };
    return {project("ptr_s"), project("ptr_e")};
}

std::pair<Tensor, PointerDistributions> decode_step(const Tensor& z_prefix,
                                                    const EncoderStates& encoder,
                                                    const DecoderConfig& cfg,
                                                    const ParamMap& params,
                                                    const std::string& prefix) {
    Tensor states = decoder_forward(z_prefix, encoder, cfg, params, prefix);
    Tensor h_t = gather_rows(states, {states.rows() - 1});
    auto [qs, qe] = pointer_logits(h_t, encoder, params, prefix);
    return {h_t, pointer_distributions(qs, qe)};
}

Tensor mean_pool_span(const EncoderStates& encoder, const SpanPrediction& span) {
    if (span.is_sentinel) return gather_rows(encoder.hidden, {0});
    if (span.start >= span.end || span.end > encoder.hidden.rows())
        throw std::invalid_argument("mean_pool_span: invalid span");
    std::vector<std::size_t> rows;
    for (std::size_t i = span.start; i < span.end; ++i) rows.push_back(i);
    return reshape(mean_rows(gather_rows(encoder.hidden, rows)), {1, encoder.hidden.cols()});
}

BeamHypothesis beam_search(const SpanExample& example, const EncoderStates& encoder,
                           const DecoderConfig& cfg, const ParamMap& params, std::size_t b,
                           std::size_t k, const std::string& prefix) {
    const auto masks = example.mask_positions();
    if (masks.empty()) throw std::invalid_argument("nothing to decode");
    if (b < 1) throw std::invalid_argument("beam width must be >= 1");
    NoGradGuard no_grad;

    // Lexicographic span-sequence comparison for deterministic tie-breaks.
    auto span_seq_less = [](const std::vector<SpanPrediction>& a,
                            const std::vector<SpanPrediction>& b) {
        for (std::size_t i = 0; i < std::min(a.size(), b.size()); ++i) {
            if (a[i].start != b[i].start) return a[i].start < b[i].start;
            if (a[i].end != b[i].end) return a[i].end < b[i].end;
        }
        return a.size() < b.size();
    };

    struct Hyp {
        std::vector<SpanPrediction> spans;
        double cum = 0.0;
        Tensor z;  // fused inputs so far, (t, d_model)
    };

    // One pruned-beam pass of width w: expand each hypothesis with its top-w
    // constrained spans, keep the global top-w by cumulative log-probability.
    auto run_width = [&](std::size_t w) -> Hyp {
        std::vector<Hyp> beam{{{}, 0.0, Tensor{}}};
        for (std::size_t t = 0; t < masks.size(); ++t) {
            // Mask positions index the packed input, whose encoder rows align.
            Tensor h_mask = gather_rows(encoder.hidden, {masks[t]});
            std::vector<Hyp> next;
            for (const auto& hyp : beam) {
                Tensor s_prev = t == 0 ? gather_rows(encoder.hidden, {0})
                                       : mean_pool_span(encoder, hyp.spans.back());
                Tensor z_t = fuse(h_mask, s_prev, params, prefix);
                Tensor z_all = t == 0 ? z_t : concat(hyp.z, z_t, 0);
                auto [h_t, dists] = decode_step(z_all, encoder, cfg, params, prefix);
                (void)h_t;
                for (const auto& cand : top_constrained_spans(dists, example.query_len, k, w)) {
                    Hyp h2;
                    h2.spans = hyp.spans;
                    h2.spans.push_back(cand);
                    h2.cum = hyp.cum + cand.score;
                    h2.z = z_all;
                    next.push_back(std::move(h2));
                }
            }
            std::sort(next.begin(), next.end(), [&](const Hyp& a, const Hyp& c) {
                if (a.cum != c.cum) return a.cum > c.cum;
                return span_seq_less(a.spans, c.spans);
            });
            if (next.size() > w) next.resize(w);
            beam = std::move(next);
        }
        return std::move(beam.front());
    };

    // Pruning by cumulative score alone does not make the best final score
    // monotone in the width: a wider beam can evict the narrow beam's winning
    // lineage mid-sequence on prefix score and finish lower. Returning the
    // best hypothesis over widths 1..b restores monotonicity (the candidate
    // set is nested in b) and keeps width 1 exactly greedy.
    Hyp best = run_width(1);
    for (std::size_t w = 2; w <= b; ++w) {
        Hyp h = run_width(w);
        if (h.cum > best.cum || (h.cum == best.cum && span_seq_less(h.spans, best.spans)))
            best = std::move(h);
    }
    return {best.spans, best.cum};
}

}  // namespace spanfact

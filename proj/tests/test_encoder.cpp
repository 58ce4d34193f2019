#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "spanfact/encoder.hpp"
#include "spanfact/train.hpp"

using namespace spanfact;

namespace {

EncoderConfig tiny_config() {
    EncoderConfig cfg;
    cfg.vocab_size = 20;
    cfg.d_model = 8;
    cfg.n_heads = 2;
    cfg.n_layers = 2;
    cfg.d_ff = 16;
    cfg.max_len = 16;
    return cfg;
}

}  // namespace

TEST_CASE("config validation") {
    EncoderConfig cfg = tiny_config();
    cfg.n_heads = 3;  // 8 % 3 != 0
    CHECK_THROWS_AS(cfg.check(), std::invalid_argument);
    cfg = tiny_config();
    cfg.vocab_size = 0;
    CHECK_THROWS_AS(cfg.check(), std::invalid_argument);
}

TEST_CASE("zero embedding tables embed to zero") {
    EncoderConfig cfg = tiny_config();
    ParamMap params;
    params.add("enc.tok_emb", Tensor::zeros({cfg.vocab_size, cfg.d_model}));
    params.add("enc.pos_emb", Tensor::zeros({cfg.max_len, cfg.d_model}));
    params.add("enc.seg_emb", Tensor::zeros({2, cfg.d_model}));
    Tensor e = embed_input({1, 2, 3}, {0, 0, 1}, cfg, params);
    for (std::size_t i = 0; i < e.size(); ++i) CHECK(e.at(i) == 0.0);
}

TEST_CASE("embedding is the three-table sum") {
    EncoderConfig cfg = tiny_config();
    ParamMap params;
    std::mt19937_64 rng(3);
    init_encoder_params(cfg, params, rng);
    const std::vector<int> ids = {4, 0, 9, 9, 17};
    const std::vector<int> segs = {0, 0, 1, 1, 1};
    Tensor e = embed_input(ids, segs, cfg, params);
    const Tensor& tok = params.at("enc.tok_emb");
    const Tensor& pos = params.at("enc.pos_emb");
    const Tensor& seg = params.at("enc.seg_emb");
    for (std::size_t i = 0; i < ids.size(); ++i)
        for (std::size_t c = 0; c < cfg.d_model; ++c)
            CHECK(e.at2(i, c) == doctest::Approx(tok.at2(static_cast<std::size_t>(ids[i]), c) +
                                                 pos.at2(i, c) +
                                                 seg.at2(static_cast<std::size_t>(segs[i]), c))
                                     .epsilon(1e-15));

    CHECK_THROWS_AS(embed_input({19, 20}, {0, 0}, cfg, params), std::exception);
}

TEST_CASE("zero layers pass the embedding through") {
    EncoderConfig cfg = tiny_config();
    cfg.n_layers = 0;
    ParamMap params;
    std::mt19937_64 rng(5);
    init_encoder_params(cfg, params, rng);
    Tensor e = embed_input({1, 2, 3}, {0, 0, 1}, cfg, params);
    EncoderStates out = encode(e, {false, false, false}, cfg, params);
    for (std::size_t i = 0; i < e.size(); ++i) CHECK(out.hidden.at(i) == e.at(i));
}

TEST_CASE("single position attends only to itself") {
    EncoderConfig cfg = tiny_config();
    ParamMap params;
    std::mt19937_64 rng(7);
    init_attention_params(cfg.d_model, params, rng, "a.");
    Tensor x = Tensor::randn({1, cfg.d_model}, rng, 1.0, false);
    Tensor attn = multi_head_attention(x, x, cfg.n_heads, params, "a.", {});
    // softmax over one key is 1, so output = (x Wv + bv) Wo + bo
    Tensor v = add_bias(matmul(x, params.at("a.wv")), params.at("a.bv"));
    Tensor expect = add_bias(matmul(v, params.at("a.wo")), params.at("a.bo"));
    for (std::size_t i = 0; i < expect.size(); ++i)
        CHECK(attn.at(i) == doctest::Approx(expect.at(i)).epsilon(1e-12));
}

TEST_CASE("pad suffix never leaks into non-pad outputs") {
    EncoderConfig cfg = tiny_config();
    ParamMap params;
    std::mt19937_64 rng(9);
    init_encoder_params(cfg, params, rng);
    const std::vector<int> base = {1, 2, 3, 4};
    const std::vector<int> segs = {0, 0, 1, 1};
    auto run = [&](std::vector<int> pad_ids) {
        std::vector<int> ids = base;
        ids.insert(ids.end(), pad_ids.begin(), pad_ids.end());
        std::vector<int> s = segs;
        s.resize(ids.size(), 1);
        std::vector<bool> mask(ids.size(), false);
        for (std::size_t i = base.size(); i < ids.size(); ++i) mask[i] = true;
        return encode(embed_input(ids, s, cfg, params), mask, cfg, params);
    };
    EncoderStates a = run({5, 6});
    EncoderStates b = run({6, 5});
    for (std::size_t i = 0; i < base.size(); ++i)
        for (std::size_t c = 0; c < cfg.d_model; ++c)
            CHECK(a.hidden.at2(i, c) == doctest::Approx(b.hidden.at2(i, c)).epsilon(1e-12));
}

TEST_CASE("encoding is deterministic") {
    EncoderConfig cfg = tiny_config();
    ParamMap params;
    std::mt19937_64 rng(11);
    init_encoder_params(cfg, params, rng);
    Tensor e = embed_input({1, 2, 3, 4}, {0, 0, 1, 1}, cfg, params);
    EncoderStates a = encode(e, std::vector<bool>(4, false), cfg, params);
    EncoderStates b = encode(e, std::vector<bool>(4, false), cfg, params);
    for (std::size_t i = 0; i < a.hidden.size(); ++i) CHECK(a.hidden.at(i) == b.hidden.at(i));
}

TEST_CASE("full encoder gradients pass finite differences") {
    EncoderConfig cfg = tiny_config();
    ParamMap params;
    std::mt19937_64 rng(13);
    init_encoder_params(cfg, params, rng);
    const std::vector<int> ids = {1, 2, 3, 4};
    const std::vector<int> segs = {0, 0, 1, 1};
    const std::vector<bool> mask(4, false);
    auto forward = [&] {
        EncoderStates st = encode(embed_input(ids, segs, cfg, params), mask, cfg, params);
        return sum_all(relu(st.hidden));
    };
    std::mt19937_64 pick_rng(17);
    for (auto& [name, t] : params.tensors) {
        std::uniform_int_distribution<std::size_t> pick(0, t.size() - 1);
        const std::size_t i = pick(pick_rng);
        params.zero_grads();
        backward(forward());
        const double analytic = t.grad()[i];
        const double numeric = finite_difference(
            [&] { NoGradGuard g; return forward().item(); }, params, name, i);
        const double denom = std::max({std::fabs(analytic), std::fabs(numeric), 1e-3});
        CHECK(std::fabs(analytic - numeric) / denom <= 1e-4);
    }
}

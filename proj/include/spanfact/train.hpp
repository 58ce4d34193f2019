#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "spanfact/ardecoder.hpp"
#include "spanfact/corpus.hpp"
#include "spanfact/encoder.hpp"
#include "spanfact/qaspan.hpp"
#include "spanfact/tensor.hpp"

namespace spanfact {

struct TrainConfig {
    std::size_t epochs = 20;
    std::size_t batch_size = 16;
    double lr = 3e-4;
    std::size_t warmup_steps = 200;
    std::size_t total_steps = 0;  // 0: derived from epochs * steps_per_epoch
    double weight_decay = 0.01;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    std::uint64_t seed = 1;
    std::size_t k = 10;      // span length constraint
    std::size_t beam_b = 5;  // beam width (AR validation decode)
    double clip_norm = 1.0;
    double val_fraction = 0.1;
    bool grad_check = false;  // opt-in finite-difference spot check

    void check() const;
};

enum class ModelVariant { QaSpan, Autoregressive };

struct TrainingDiverged : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Linear warmup to lr, then linear decay to 0 at total_steps.
double lr_at(std::size_t step, const TrainConfig& cfg);

// Adam-style moments with decoupled weight decay (applied directly to the
// parameters, scaled by the current learning rate).
class AdamW {
public:
    explicit AdamW(const TrainConfig& cfg) : cfg_(cfg) {}
    void step(ParamMap& params, double lr);
    std::size_t steps_taken() const { return t_; }

private:
    TrainConfig cfg_;
    std::size_t t_ = 0;
    std::map<std::string, std::vector<double>> m_, v_;
};

// Scales all gradients so the global norm is at most max_norm.
void clip_gradients(ParamMap& params, double max_norm);

// Mean over masks of -(log a_start[target_s] + log a_end[target_e]) / 2.
// Non-sentinel gold (s,e) targets (s, e-1) -- the end head is trained on
// the last in-span position; the sentinel targets (0,1).
std::pair<std::size_t, std::size_t> loss_targets(std::pair<std::size_t, std::size_t> gold_span);
double span_loss_value(const std::vector<PointerDistributions>& dists,
                       const std::vector<std::pair<std::size_t, std::size_t>>& gold_spans);

// ---- model bundles ----

struct QaModel {
    EncoderConfig cfg;
    ParamMap params;

    static QaModel init(const EncoderConfig& cfg, std::uint64_t seed);
    Tensor loss(const SpanExample& example) const;  // differentiable graph
    PointerDistributions distributions(const SpanExample& example) const;
    SpanPrediction predict(const SpanExample& example, std::size_t k) const;

    void save(const std::string& path) const;
    static QaModel load(const std::string& path);
};

struct ArModel {
    EncoderConfig cfg;
    DecoderConfig dcfg;
    ParamMap params;

    static ArModel init(const EncoderConfig& cfg, const DecoderConfig& dcfg, std::uint64_t seed);
    Tensor loss(const SpanExample& example) const;  // teacher forcing
    std::vector<SpanPrediction> predict(const SpanExample& example, std::size_t b,
                                        std::size_t k) const;

    void save(const std::string& path) const;
    static ArModel load(const std::string& path);
};

struct TrainResult {
    double final_loss = 0.0;
    double best_val_exact = 0.0;
    double train_exact = 0.0;  // exact match on the training split, final params
    std::string best_checkpoint;
    std::size_t steps = 0;
};

// Deterministic given config.seed; emits per-epoch checkpoints plus
// "<variant>-best.sfk" selected by validation span exact-match, and a
// "step,lr,loss,val_exact_match" CSV when log is non-null.
TrainResult train_model(const std::vector<SpanExample>& dataset, const TrainConfig& cfg,
                        ModelVariant variant, const EncoderConfig& enc_cfg,
                        const std::string& out_dir, std::ostream* log);

// Exact-match fraction (per mask) of the constrained decode against gold.
double exact_match(const QaModel& model, const std::vector<SpanExample>& examples, std::size_t k);
double exact_match(const ArModel& model, const std::vector<SpanExample>& examples, std::size_t b,
                   std::size_t k);

// Central finite-difference gradient of a scalar-valued forward function
// with respect to params[name][index]; oracle for gradient checks.
double finite_difference(const std::function<double()>& forward, ParamMap& params,
                         const std::string& name, std::size_t index, double h = 1e-5);

}  // namespace spanfact

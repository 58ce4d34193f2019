#include "spanfact/train.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>
#include <random>
#include <stdexcept>

namespace spanfact {

void TrainConfig::check() const {
    if (epochs == 0 || batch_size == 0 || lr <= 0.0) throw std::invalid_argument("bad train config");
    if (total_steps > 0 && warmup_steps > total_steps)
        throw std::invalid_argument("warmup_steps must be <= total_steps");
}

double lr_at(std::size_t step, const TrainConfig& cfg) {
    if (cfg.warmup_steps > 0 && step <= cfg.warmup_steps)
        return cfg.lr * static_cast<double>(step) / static_cast<double>(cfg.warmup_steps);
    if (cfg.total_steps == 0) return cfg.lr;
    if (step >= cfg.total_steps) return 0.0;
    const double frac = static_cast<double>(cfg.total_steps - step) /
                        static_cast<double>(cfg.total_steps - cfg.warmup_steps);
    return cfg.lr * frac;
}

void AdamW::step(ParamMap& params, double lr) {
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.adam_beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(cfg_.adam_beta2, static_cast<double>(t_));
    for (auto& [name, p] : params.tensors) {
        if (!p.requires_grad()) continue;
        auto& m = m_[name];
        auto& v = v_[name];
        if (m.empty()) {
            m.assign(p.size(), 0.0);
            v.assign(p.size(), 0.0);
        }
        const auto& g = p.grad();
        double* x = p.data();
        for (std::size_t i = 0; i < p.size(); ++i) {
            if (!std::isfinite(g[i])) throw TrainingDiverged("non-finite gradient at " + name);
            m[i] = cfg_.adam_beta1 * m[i] + (1.0 - cfg_.adam_beta1) * g[i];
            v[i] = cfg_.adam_beta2 * v[i] + (1.0 - cfg_.adam_beta2) * g[i] * g[i];
            const double mhat = m[i] / bc1;
            const double vhat = v[i] / bc2;
            x[i] -= lr * cfg_.weight_decay * x[i];  // decoupled decay
            x[i] -= lr * mhat / (std::sqrt(vhat) + cfg_.adam_eps);
        }
    }
}

void clip_gradients(ParamMap& params, double max_norm) {
    if (max_norm <= 0.0) return;
    double sq = 0.0;
    for (auto& [name, p] : params.tensors)
        if (p.requires_grad())
            for (double g : p.grad()) sq += g * g;
    const double norm = std::sqrt(sq);
    if (norm <= max_norm) return;
    const double s = max_norm / norm;
    for (auto& [name, p] : params.tensors)
        if (p.requires_grad())
            for (double& g : p.grad()) g *= s;
}

std::pair<std::size_t, std::size_t> loss_targets(std::pair<std::size_t, std::size_t> gold_span) {
    if (gold_span == kClsSentinel) return kClsSentinel;
    return {gold_span.first, gold_span.second - 1};
}

double span_loss_value(const std::vector<PointerDistributions>& dists,
                       const std::vector<std::pair<std::size_t, std::size_t>>& gold_spans) {
    if (dists.size() != gold_spans.size() || dists.empty())
        throw std::invalid_argument("span_loss: one distribution pair per gold span required");
    double total = 0.0;
    for (std::size_t i = 0; i < dists.size(); ++i) {
        const auto [ts, te] = loss_targets(gold_spans[i]);
        if (ts >= dists[i].a_start.size() || te >= dists[i].a_end.size())
            throw std::out_of_range("gold span out of range");
        total += -0.5 * (std::log(dists[i].a_start[ts]) + std::log(dists[i].a_end[te]));
    }
    return total / static_cast<double>(dists.size());
}

// ---- model bundles ----

namespace {

constexpr double kQaKind = 0.0;
constexpr double kArKind = 1.0;

Tensor meta_tensor(const EncoderConfig& e, double kind, const DecoderConfig* d) {
    std::vector<double> v{static_cast<double>(e.vocab_size), static_cast<double>(e.d_model),
                          static_cast<double>(e.n_heads),    static_cast<double>(e.n_layers),
                          static_cast<double>(e.d_ff),       static_cast<double>(e.max_len),
                          kind,
                          d ? static_cast<double>(d->n_layers) : 0.0,
                          d ? static_cast<double>(d->d_ff) : 0.0};
    const std::size_t n = v.size();
    return Tensor::from({n}, std::move(v), false);
}

void parse_meta(const ParamMap& p, EncoderConfig& e, double& kind, DecoderConfig& d) {
    const Tensor& m = p.at("meta");
    e.vocab_size = static_cast<std::size_t>(m.at(0));
    e.d_model = static_cast<std::size_t>(m.at(1));
    e.n_heads = static_cast<std::size_t>(m.at(2));
    e.n_layers = static_cast<std::size_t>(m.at(3));
    e.d_ff = static_cast<std::size_t>(m.at(4));
    e.max_len = static_cast<std::size_t>(m.at(5));
    kind = m.at(6);
    d.d_model = e.d_model;
    d.n_heads = e.n_heads;
    d.n_layers = static_cast<std::size_t>(m.at(7));
    d.d_ff = static_cast<std::size_t>(m.at(8));
}

// Gold spans as SpanPredictions (teacher forcing previous-entity input).
SpanPrediction as_prediction(std::pair<std::size_t, std::size_t> gold) {
    if (gold == kClsSentinel) return {0, 1, 0.0, true};
    return {gold.first, gold.second, 0.0, false};
}

Tensor average(const std::vector<Tensor>& terms) {
    Tensor sum = terms.front();
    for (std::size_t i = 1; i < terms.size(); ++i) sum = add(sum, terms[i]);
    return scale(sum, 1.0 / static_cast<double>(terms.size()));
}

}  // namespace

QaModel QaModel::init(const EncoderConfig& cfg, std::uint64_t seed) {
    QaModel model;
    model.cfg = cfg;
    std::mt19937_64 rng(seed);
    init_encoder_params(cfg, model.params, rng);
    init_qa_params(cfg.d_model, model.params, rng);
    return model;
}

Tensor QaModel::loss(const SpanExample& example) const {
    if (example.gold_spans.empty()) throw std::invalid_argument("example has no gold spans");
    EncoderStates states = encode_example(example, cfg, params);
    auto [qs, qe] = span_logits(states, params);
    std::vector<Tensor> terms;
    for (const auto& gold : example.gold_spans) {
        const auto [ts, te] = loss_targets(gold);
        terms.push_back(scale(add(cross_entropy(qs, ts), cross_entropy(qe, te)), 0.5));
    }
    return average(terms);
}

PointerDistributions QaModel::distributions(const SpanExample& example) const {
    NoGradGuard no_grad;
    EncoderStates states = encode_example(example, cfg, params);
    auto [qs, qe] = span_logits(states, params);
    return pointer_distributions(qs, qe);
}

SpanPrediction QaModel::predict(const SpanExample& example, std::size_t k) const {
    return best_constrained_span(distributions(example), example.query_len, k);
}

void QaModel::save(const std::string& path) const {
    ParamMap out;
    out.add("meta", meta_tensor(cfg, kQaKind, nullptr));
    for (const auto& [name, t] : params.tensors) out.add(name, t);
    save_checkpoint(path, out);
}

QaModel QaModel::load(const std::string& path) {
    ParamMap loaded = load_checkpoint(path);
    QaModel model;
    double kind = 0.0;
    DecoderConfig unused;
    parse_meta(loaded, model.cfg, kind, unused);
    if (kind != kQaKind) throw std::runtime_error("checkpoint is not a qa-span model: " + path);
    loaded.tensors.erase("meta");
    model.params = std::move(loaded);
    return model;
}

ArModel ArModel::init(const EncoderConfig& cfg, const DecoderConfig& dcfg, std::uint64_t seed) {
    ArModel model;
    model.cfg = cfg;
    model.dcfg = dcfg;
    std::mt19937_64 rng(seed);
    init_encoder_params(cfg, model.params, rng);
    init_decoder_params(dcfg, model.params, rng);
    return model;
}

Tensor ArModel::loss(const SpanExample& example) const {
    const auto masks = example.mask_positions();
    if (masks.empty() || masks.size() != example.gold_spans.size())
        throw std::invalid_argument("all-mask example must carry one gold span per mask");
    EncoderStates states = encode_example(example, cfg, params);

    Tensor z;
    for (std::size_t t = 0; t < masks.size(); ++t) {
        Tensor h_mask = gather_rows(states.hidden, {masks[t]});
        Tensor s_prev = t == 0 ? gather_rows(states.hidden, {0})
                               : mean_pool_span(states, as_prediction(example.gold_spans[t - 1]));
        Tensor z_t = fuse(h_mask, s_prev, params);
        z = t == 0 ? z_t : concat(z, z_t, 0);
    }
    Tensor decoded = decoder_forward(z, states, dcfg, params);

    std::vector<Tensor> terms;
    for (std::size_t t = 0; t < masks.size(); ++t) {
        Tensor h_t = gather_rows(decoded, {t});
        auto [qs, qe] = pointer_logits(h_t, states, params);
        const auto [ts, te] = loss_targets(example.gold_spans[t]);
        terms.push_back(scale(add(cross_entropy(qs, ts), cross_entropy(qe, te)), 0.5));
    }
    return average(terms);
}

std::vector<SpanPrediction> ArModel::predict(const SpanExample& example, std::size_t b,
                                             std::size_t k) const {
    NoGradGuard no_grad;
    EncoderStates states = encode_example(example, cfg, params);
    return beam_search(example, states, dcfg, params, b, k).spans;
}

void ArModel::save(const std::string& path) const {
    ParamMap out;
    out.add("meta", meta_tensor(cfg, kArKind, &dcfg));
    for (const auto& [name, t] : params.tensors) out.add(name, t);
    save_checkpoint(path, out);
}

ArModel ArModel::load(const std::string& path) {
    ParamMap loaded = load_checkpoint(path);
    ArModel model;
    double kind = 0.0;
    parse_meta(loaded, model.cfg, kind, model.dcfg);
    if (kind != kArKind)
        throw std::runtime_error("checkpoint is not an auto-regressive model: " + path);
    loaded.tensors.erase("meta");
    model.params = std::move(loaded);
    return model;
}

double exact_match(const QaModel& model, const std::vector<SpanExample>& examples, std::size_t k) {
    if (examples.empty()) return 0.0;
    std::size_t hit = 0;
    for (const auto& ex : examples) {
        const SpanPrediction pred = model.predict(ex, k);
        const auto gold = ex.gold_spans.at(0);
        const bool gold_sentinel = gold == kClsSentinel;
        if ((gold_sentinel && pred.is_sentinel) ||
            (!gold_sentinel && !pred.is_sentinel && pred.start == gold.first &&
             pred.end == gold.second))
            ++hit;
    }
    return static_cast<double>(hit) / static_cast<double>(examples.size());
}

double exact_match(const ArModel& model, const std::vector<SpanExample>& examples, std::size_t b,
                   std::size_t k) {
    std::size_t hit = 0, total = 0;
    for (const auto& ex : examples) {
        const auto spans = model.predict(ex, b, k);
        for (std::size_t t = 0; t < spans.size(); ++t) {
            ++total;
            const auto gold = ex.gold_spans.at(t);
            const bool gold_sentinel = gold == kClsSentinel;
            if ((gold_sentinel && spans[t].is_sentinel) ||
                (!gold_sentinel && !spans[t].is_sentinel && spans[t].start == gold.first &&
                 spans[t].end == gold.second))
                ++hit;
        }
    }
    return total == 0 ? 0.0 : static_cast<double>(hit) / static_cast<double>(total);
}

double finite_difference(const std::function<double()>& forward, ParamMap& params,
                         const std::string& name, std::size_t index, double h) {
    Tensor& p = params.at(name);
    const double saved = p.data()[index];
    p.data()[index] = saved + h;
    const double up = forward();
    p.data()[index] = saved - h;
    const double down = forward();
    p.data()[index] = saved;
    return (up - down) / (2.0 * h);
}

namespace {

template <typename Model, typename EvalFn>
TrainResult run_training(Model& model, const std::vector<SpanExample>& train_split,
                         const std::vector<SpanExample>& val_split, const TrainConfig& cfg,
                         const std::string& variant_name, const std::string& out_dir,
                         std::ostream* log, EvalFn evaluate) {
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);

    TrainConfig runtime = cfg;
    const std::size_t steps_per_epoch =
        (train_split.size() + cfg.batch_size - 1) / cfg.batch_size;
    if (runtime.total_steps == 0) runtime.total_steps = cfg.epochs * steps_per_epoch;
    if (runtime.warmup_steps > runtime.total_steps) runtime.warmup_steps = runtime.total_steps;

    if (cfg.grad_check && !train_split.empty()) {
        std::mt19937_64 check_rng(cfg.seed ^ 0x5eed);
        auto forward = [&]() { NoGradGuard g; return model.loss(train_split.front()).item(); };
        model.params.zero_grads();
        Tensor l = model.loss(train_split.front());
        backward(l);
        std::vector<std::string> names;
        for (auto& [n, t] : model.params.tensors) names.push_back(n);
        for (int trial = 0; trial < 10; ++trial) {
            const auto& name = names[check_rng() % names.size()];
            Tensor& p = model.params.at(name);
            const std::size_t idx = check_rng() % p.size();
            const double num = finite_difference(forward, model.params, name, idx);
            const double ana = p.grad()[idx];
            const double err = std::abs(num - ana) / std::max({std::abs(num), std::abs(ana), 1.0});
            if (err > 1e-4)
                throw std::runtime_error("gradient check failed at " + name + "[" +
                                         std::to_string(idx) + "]");
        }
    }

    AdamW opt(runtime);
    std::mt19937_64 shuffle_rng(cfg.seed);
    std::vector<std::size_t> order(train_split.size());
    std::iota(order.begin(), order.end(), std::size_t{0});

    if (log) *log << "step,lr,loss,val_exact_match\n";

    TrainResult result;
    std::size_t step = 0;
    double best_val = -1.0;
    for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), shuffle_rng);
        for (std::size_t b0 = 0; b0 < order.size(); b0 += cfg.batch_size) {
            const std::size_t b1 = std::min(order.size(), b0 + cfg.batch_size);
            model.params.zero_grads();
            double batch_loss = 0.0;
            for (std::size_t i = b0; i < b1; ++i) {
                Tensor l = model.loss(train_split[order[i]]);
                if (!std::isfinite(l.item())) throw TrainingDiverged("training loss diverged");
                backward(l);
                batch_loss += l.item();
            }
            const double inv = 1.0 / static_cast<double>(b1 - b0);
            for (auto& [name, p] : model.params.tensors)
                if (p.requires_grad())
                    for (double& g : p.grad()) g *= inv;
            clip_gradients(model.params, cfg.clip_norm);
            ++step;
            const double lr = lr_at(step, runtime);
            opt.step(model.params, lr);
            result.final_loss = batch_loss * inv;
            const bool epoch_end = b1 == order.size();
            if (log) {
                *log << step << ',' << lr << ',' << result.final_loss << ',';
                if (epoch_end) *log << evaluate(val_split);
                *log << '\n';
            }
        }
        const std::string epoch_path =
            out_dir + "/" + variant_name + "-epoch" + std::to_string(epoch) + ".sfk";
        model.save(epoch_path);
        const double val = evaluate(val_split);
        if (val > best_val) {
            best_val = val;
            result.best_checkpoint = out_dir + "/" + variant_name + "-best.sfk";
            model.save(result.best_checkpoint);
        }
    }
    result.steps = step;
    result.best_val_exact = best_val;
    result.train_exact = evaluate(train_split);
    return result;
}

}  // namespace

TrainResult train_model(const std::vector<SpanExample>& dataset, const TrainConfig& cfg,
                        ModelVariant variant, const EncoderConfig& enc_cfg,
                        const std::string& out_dir, std::ostream* log) {
    cfg.check();
    if (dataset.empty()) throw std::invalid_argument("empty training dataset");

    // Deterministic split: every stride-th example held out for validation.
    std::vector<SpanExample> train_split, val_split;
    const std::size_t stride =
        cfg.val_fraction > 0.0
            ? std::max<std::size_t>(2, static_cast<std::size_t>(std::lround(1.0 / cfg.val_fraction)))
            : 0;
    for (std::size_t i = 0; i < dataset.size(); ++i) {
        if (stride > 0 && i % stride == stride - 1)
            val_split.push_back(dataset[i]);
        else
            train_split.push_back(dataset[i]);
    }
    if (train_split.empty()) train_split = dataset;
    if (val_split.empty()) val_split = train_split;

    if (variant == ModelVariant::QaSpan) {
        QaModel model = QaModel::init(enc_cfg, cfg.seed);
        return run_training(model, train_split, val_split, cfg, "qa", out_dir, log,
                            [&](const std::vector<SpanExample>& split) {
                                return exact_match(model, split, cfg.k);
                            });
    }
    DecoderConfig dcfg;
    dcfg.d_model = enc_cfg.d_model;
    dcfg.n_heads = enc_cfg.n_heads;
    dcfg.d_ff = enc_cfg.d_ff;
    dcfg.n_layers = 2;
    ArModel model = ArModel::init(enc_cfg, dcfg, cfg.seed);
    return run_training(model, train_split, val_split, cfg, "ar", out_dir, log,
                        [&](const std::vector<SpanExample>& split) {
                            return exact_match(model, split, cfg.beam_b, cfg.k);
                        });
}

}  // namespace spanfact

#include "spanfact/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

namespace spanfact {

namespace {

thread_local bool g_grad_enabled = true;

std::size_t numel(const std::vector<std::size_t>& shape) {
    std::size_t n = 1;
    for (auto d : shape) n *= d;
    return n;
}

[[noreturn]] void shape_error(const std::string& op, const Tensor& a, const Tensor& b) {
    throw std::invalid_argument(op + " shape mismatch: " + shape_str(a.shape()) + " vs " +
                                shape_str(b.shape()));
}

// Builds the result node and wires parents when autograd is active.
Tensor make_result(std::vector<std::size_t> shape, std::vector<double> data,
                   std::vector<Tensor> parents,
                   std::function<void(Tensor::Impl&)> backward_fn) {
    auto impl = std::make_shared<Tensor::Impl>();
    impl->shape = std::move(shape);
    impl->data = std::move(data);
    bool track = false;
    if (g_grad_enabled)
        for (const auto& p : parents)
            if (p.requires_grad()) track = true;
    if (track) {
        impl->requires_grad = true;
        impl->grad.assign(impl->data.size(), 0.0);
        for (auto& p : parents) impl->parents.push_back(p.impl());
        impl->backward_fn = std::move(backward_fn);
    }
    return Tensor::wrap(std::move(impl));
}

std::vector<double>& pgrad(Tensor::Impl& node, std::size_t i) { return node.parents[i]->grad; }
bool pneeds(Tensor::Impl& node, std::size_t i) { return node.parents[i]->requires_grad; }

}  // namespace

std::string shape_str(const std::vector<std::size_t>& s) {
    std::ostringstream os;
    os << '(';
    for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
    os << ')';
    return os.str();
}

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : prev_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = prev_; }

Tensor Tensor::zeros(std::vector<std::size_t> shape, bool requires_grad) {
    auto impl = std::make_shared<Impl>();
    impl->data.assign(numel(shape), 0.0);
    impl->shape = std::move(shape);
    impl->requires_grad = requires_grad;
    if (requires_grad) impl->grad.assign(impl->data.size(), 0.0);
    return wrap(std::move(impl));
}

Tensor Tensor::from(std::vector<std::size_t> shape, std::vector<double> data, bool requires_grad) {
    if (numel(shape) != data.size())
        throw std::invalid_argument("tensor data size " + std::to_string(data.size()) +
                                    " does not match shape " + shape_str(shape));
    auto impl = std::make_shared<Impl>();
    impl->shape = std::move(shape);
    impl->data = std::move(data);
    impl->requires_grad = requires_grad;
    if (requires_grad) impl->grad.assign(impl->data.size(), 0.0);
    return wrap(std::move(impl));
}

Tensor Tensor::scalar(double v, bool requires_grad) { return from({1}, {v}, requires_grad); }

Tensor Tensor::randn(std::vector<std::size_t> shape, std::mt19937_64& rng, double stddev,
                     bool requires_grad) {
    std::normal_distribution<double> dist(0.0, stddev);
    std::vector<double> data(numel(shape));
    for (auto& v : data) v = dist(rng);
    return from(std::move(shape), std::move(data), requires_grad);
}

double Tensor::item() const {
    if (size() != 1) throw std::invalid_argument("item() on non-scalar tensor " + shape_str(shape()));
    return impl_->data[0];
}

std::vector<double>& Tensor::grad() {
    if (!requires_grad()) throw std::logic_error("grad() on tensor without gradient tracking");
    return impl_->grad;
}

const std::vector<double>& Tensor::grad() const {
    if (!requires_grad()) throw std::logic_error("grad() on tensor without gradient tracking");
    return impl_->grad;
}

void Tensor::zero_grad() {
    if (requires_grad()) std::fill(impl_->grad.begin(), impl_->grad.end(), 0.0);
}

// ---- ops ----

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.shape().size() != 2 || b.shape().size() != 2 || a.cols() != b.rows())
        shape_error("matmul", a, b);
    const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
    std::vector<double> out(m * n, 0.0);
    const double* A = a.data();
    const double* B = b.data();
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) {
            const double av = A[i * k + p];
            if (av == 0.0) continue;
            const double* brow = B + p * n;
            double* orow = out.data() + i * n;
            for (std::size_t j = 0; j < n; ++j) orow[j] += av * brow[j];
        }
    return make_result({m, n}, std::move(out), {a, b}, [m, k, n](Tensor::Impl& node) {
        const double* G = node.grad.data();
        const double* A = node.parents[0]->data.data();
        const double* B = node.parents[1]->data.data();
        if (pneeds(node, 0)) {
            double* dA = pgrad(node, 0).data();
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t j = 0; j < n; ++j) {
                    const double g = G[i * n + j];
                    if (g == 0.0) continue;
                    for (std::size_t p = 0; p < k; ++p) dA[i * k + p] += g * B[p * n + j];
                }
        }
        if (pneeds(node, 1)) {
            double* dB = pgrad(node, 1).data();
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t p = 0; p < k; ++p) {
                    const double av = A[i * k + p];
                    if (av == 0.0) continue;
                    for (std::size_t j = 0; j < n; ++j) dB[p * n + j] += av * G[i * n + j];
                }
        }
    });
}

Tensor add(const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape()) shape_error("add", a, b);
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] + b.data()[i];
    return make_result(a.shape(), std::move(out), {a, b}, [](Tensor::Impl& node) {
        for (int p = 0; p < 2; ++p)
            if (pneeds(node, p)) {
                auto& g = pgrad(node, p);
                for (std::size_t i = 0; i < g.size(); ++i) g[i] += node.grad[i];
            }
    });
}

Tensor add_bias(const Tensor& m, const Tensor& bias) {
    if (m.shape().size() != 2 || bias.shape().size() != 1 || bias.shape()[0] != m.cols())
        shape_error("add_bias", m, bias);
    const std::size_t r = m.rows(), c = m.cols();
    std::vector<double> out(m.size());
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) out[i * c + j] = m.data()[i * c + j] + bias.data()[j];
    return make_result({r, c}, std::move(out), {m, bias}, [r, c](Tensor::Impl& node) {
        if (pneeds(node, 0)) {
            auto& g = pgrad(node, 0);
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += node.grad[i];
        }
        if (pneeds(node, 1)) {
            auto& g = pgrad(node, 1);
            for (std::size_t i = 0; i < r; ++i)
                for (std::size_t j = 0; j < c; ++j) g[j] += node.grad[i * c + j];
        }
    });
}

Tensor mul_rowwise(const Tensor& m, const Tensor& gain) {
    if (m.shape().size() != 2 || gain.shape().size() != 1 || gain.shape()[0] != m.cols())
        shape_error("mul_rowwise", m, gain);
    const std::size_t r = m.rows(), c = m.cols();
    std::vector<double> out(m.size());
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) out[i * c + j] = m.data()[i * c + j] * gain.data()[j];
    return make_result({r, c}, std::move(out), {m, gain}, [r, c](Tensor::Impl& node) {
        const auto& M = node.parents[0]->data;
        const auto& G = node.parents[1]->data;
        if (pneeds(node, 0)) {
            auto& g = pgrad(node, 0);
            for (std::size_t i = 0; i < r; ++i)
                for (std::size_t j = 0; j < c; ++j) g[i * c + j] += node.grad[i * c + j] * G[j];
        }
        if (pneeds(node, 1)) {
            auto& g = pgrad(node, 1);
            for (std::size_t i = 0; i < r; ++i)
                for (std::size_t j = 0; j < c; ++j) g[j] += node.grad[i * c + j] * M[i * c + j];
        }
    });
}

Tensor relu(const Tensor& t) {
    std::vector<double> out(t.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = t.data()[i] > 0.0 ? t.data()[i] : 0.0;
    return make_result(t.shape(), std::move(out), {t}, [](Tensor::Impl& node) {
        if (!pneeds(node, 0)) return;
        auto& g = pgrad(node, 0);
        const auto& x = node.parents[0]->data;
        for (std::size_t i = 0; i < g.size(); ++i)
            if (x[i] > 0.0) g[i] += node.grad[i];  // derivative at the kink is 0
    });
}

Tensor softmax_rows(const Tensor& t) {
    const std::size_t rank = t.shape().size();
    if (rank != 1 && rank != 2) throw std::invalid_argument("softmax expects 1D or 2D tensor");
    const std::size_t r = rank == 2 ? t.rows() : 1;
    const std::size_t c = rank == 2 ? t.cols() : t.shape()[0];
    std::vector<double> out(t.size());
    for (std::size_t i = 0; i < r; ++i) {
        const double* x = t.data() + i * c;
        double mx = x[0];
        for (std::size_t j = 1; j < c; ++j) mx = std::max(mx, x[j]);
        double sum = 0.0;
        for (std::size_t j = 0; j < c; ++j) {
            out[i * c + j] = std::exp(x[j] - mx);
            sum += out[i * c + j];
        }
        for (std::size_t j = 0; j < c; ++j) out[i * c + j] /= sum;
    }
    auto result = make_result(t.shape(), std::move(out), {t}, [r, c](Tensor::Impl& node) {
        if (!pneeds(node, 0)) return;
        auto& g = pgrad(node, 0);
        const auto& y = node.data;
        for (std::size_t i = 0; i < r; ++i) {
            double dot = 0.0;
            for (std::size_t j = 0; j < c; ++j) dot += node.grad[i * c + j] * y[i * c + j];
            for (std::size_t j = 0; j < c; ++j)
                g[i * c + j] += y[i * c + j] * (node.grad[i * c + j] - dot);
        }
    });
    return result;
}

Tensor layer_norm(const Tensor& t, double eps) {
    if (t.shape().size() != 2) throw std::invalid_argument("layer_norm expects 2D tensor");
    const std::size_t r = t.rows(), c = t.cols();
    std::vector<double> out(t.size());
    std::vector<double> inv_std(r), means(r);
    for (std::size_t i = 0; i < r; ++i) {
        const double* x = t.data() + i * c;
        double mu = 0.0;
        for (std::size_t j = 0; j < c; ++j) mu += x[j];
        mu /= static_cast<double>(c);
        double var = 0.0;
        for (std::size_t j = 0; j < c; ++j) var += (x[j] - mu) * (x[j] - mu);
        var /= static_cast<double>(c);
        const double is = 1.0 / std::sqrt(var + eps);
        means[i] = mu;
        inv_std[i] = is;
        for (std::size_t j = 0; j < c; ++j) out[i * c + j] = (x[j] - mu) * is;
    }
    return make_result({r, c}, std::move(out), {t},
                       [r, c, inv_std = std::move(inv_std)](Tensor::Impl& node) {
        if (!pneeds(node, 0)) return;
        auto& g = pgrad(node, 0);
        const auto& y = node.data;  // normalized values
        for (std::size_t i = 0; i < r; ++i) {
            const double* dy = node.grad.data() + i * c;
            const double* yi = y.data() + i * c;
            double mean_dy = 0.0, mean_dy_y = 0.0;
            for (std::size_t j = 0; j < c; ++j) {
                mean_dy += dy[j];
                mean_dy_y += dy[j] * yi[j];
            }
            mean_dy /= static_cast<double>(c);
            mean_dy_y /= static_cast<double>(c);
            for (std::size_t j = 0; j < c; ++j)
                g[i * c + j] += inv_std[i] * (dy[j] - mean_dy - yi[j] * mean_dy_y);
        }
    });
}

Tensor embed(const Tensor& table, const std::vector<int>& ids) {
    if (table.shape().size() != 2) throw std::invalid_argument("embed expects 2D table");
    const std::size_t c = table.cols();
    for (int id : ids)
        if (id < 0 || static_cast<std::size_t>(id) >= table.rows())
            throw std::out_of_range("embed id " + std::to_string(id) + " out of range for table " +
                                    shape_str(table.shape()));
    std::vector<double> out(ids.size() * c);
    for (std::size_t i = 0; i < ids.size(); ++i)
        std::copy_n(table.data() + static_cast<std::size_t>(ids[i]) * c, c, out.data() + i * c);
    return make_result({ids.size(), c}, std::move(out), {table}, [ids, c](Tensor::Impl& node) {
        if (!pneeds(node, 0)) return;
        auto& g = pgrad(node, 0);
        for (std::size_t i = 0; i < ids.size(); ++i)
            for (std::size_t j = 0; j < c; ++j)
                g[static_cast<std::size_t>(ids[i]) * c + j] += node.grad[i * c + j];
    });
}

Tensor gather_rows(const Tensor& t, const std::vector<std::size_t>& indices) {
    if (t.shape().size() != 2) throw std::invalid_argument("gather_rows expects 2D tensor");
    const std::size_t c = t.cols();
    for (auto i : indices)
        if (i >= t.rows())
            throw std::out_of_range("gather_rows index " + std::to_string(i) +
                                    " out of range for " + shape_str(t.shape()));
    std::vector<double> out(indices.size() * c);
    for (std::size_t i = 0; i < indices.size(); ++i)
        std::copy_n(t.data() + indices[i] * c, c, out.data() + i * c);
    return make_result({indices.size(), c}, std::move(out), {t}, [indices, c](Tensor::Impl& node) {
        if (!pneeds(node, 0)) return;
        auto& g = pgrad(node, 0);
        for (std::size_t i = 0; i < indices.size(); ++i)
            for (std::size_t j = 0; j < c; ++j) g[indices[i] * c + j] += node.grad[i * c + j];
    });
}

Tensor concat(const Tensor& a, const Tensor& b, int axis) {
    if (a.shape().size() != 2 || b.shape().size() != 2) shape_error("concat", a, b);
    if (axis == 0) {
        if (a.cols() != b.cols()) shape_error("concat", a, b);
        const std::size_t c = a.cols();
        std::vector<double> out;
        out.reserve(a.size() + b.size());
        out.insert(out.end(), a.data(), a.data() + a.size());
        out.insert(out.end(), b.data(), b.data() + b.size());
        const std::size_t na = a.size();
        return make_result({a.rows() + b.rows(), c}, std::move(out), {a, b},
                           [na](Tensor::Impl& node) {
            if (pneeds(node, 0)) {
                auto& g = pgrad(node, 0);
                for (std::size_t i = 0; i < g.size(); ++i) g[i] += node.grad[i];
            }
            if (pneeds(node, 1)) {
                auto& g = pgrad(node, 1);
                for (std::size_t i = 0; i < g.size(); ++i) g[i] += node.grad[na + i];
            }
        });
    }
    if (axis == 1) {
        if (a.rows() != b.rows()) shape_error("concat", a, b);
        const std::size_t r = a.rows(), ca = a.cols(), cb = b.cols();
        std::vector<double> out(r * (ca + cb));
        for (std::size_t i = 0; i < r; ++i) {
            std::copy_n(a.data() + i * ca, ca, out.data() + i * (ca + cb));
            std::copy_n(b.data() + i * cb, cb, out.data() + i * (ca + cb) + ca);
        }
        return make_result({r, ca + cb}, std::move(out), {a, b}, [r, ca, cb](Tensor::Impl& node) {
            const std::size_t c = ca + cb;
            if (pneeds(node, 0)) {
                auto& g = pgrad(node, 0);
                for (std::size_t i = 0; i < r; ++i)
                    for (std::size_t j = 0; j < ca; ++j) g[i * ca + j] += node.grad[i * c + j];
            }
            if (pneeds(node, 1)) {
                auto& g = pgrad(node, 1);
                for (std::size_t i = 0; i < r; ++i)
                    for (std::size_t j = 0; j < cb; ++j) g[i * cb + j] += node.grad[i * c + ca + j];
            }
        });
    }
    throw std::invalid_argument("concat axis must be 0 or 1");
}

Tensor mean_rows(const Tensor& t) {
    if (t.shape().size() != 2) throw std::invalid_argument("mean_rows expects 2D tensor");
    const std::size_t r = t.rows(), c = t.cols();
    std::vector<double> out(c, 0.0);
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) out[j] += t.data()[i * c + j];
    for (auto& v : out) v /= static_cast<double>(r);
    return make_result({c}, std::move(out), {t}, [r, c](Tensor::Impl& node) {
        if (!pneeds(node, 0)) return;
        auto& g = pgrad(node, 0);
        for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < c; ++j) g[i * c + j] += node.grad[j] / static_cast<double>(r);
    });
}

Tensor scale(const Tensor& t, double c) {
    std::vector<double> out(t.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = t.data()[i] * c;
    return make_result(t.shape(), std::move(out), {t}, [c](Tensor::Impl& node) {
        if (!pneeds(node, 0)) return;
        auto& g = pgrad(node, 0);
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += node.grad[i] * c;
    });
}

Tensor transpose(const Tensor& t) {
    if (t.shape().size() != 2) throw std::invalid_argument("transpose expects 2D tensor");
    const std::size_t r = t.rows(), c = t.cols();
    std::vector<double> out(t.size());
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) out[j * r + i] = t.data()[i * c + j];
    return make_result({c, r}, std::move(out), {t}, [r, c](Tensor::Impl& node) {
        if (!pneeds(node, 0)) return;
        auto& g = pgrad(node, 0);
        for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < c; ++j) g[i * c + j] += node.grad[j * r + i];
    });
}

Tensor slice_cols(const Tensor& t, std::size_t start, std::size_t len) {
    if (t.shape().size() != 2 || start + len > t.cols())
        throw std::invalid_argument("slice_cols [" + std::to_string(start) + "," +
                                    std::to_string(start + len) + ") out of range for " +
                                    shape_str(t.shape()));
    const std::size_t r = t.rows(), c = t.cols();
    std::vector<double> out(r * len);
    for (std::size_t i = 0; i < r; ++i)
        std::copy_n(t.data() + i * c + start, len, out.data() + i * len);
    return make_result({r, len}, std::move(out), {t}, [r, c, start, len](Tensor::Impl& node) {
        if (!pneeds(node, 0)) return;
        auto& g = pgrad(node, 0);
        for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < len; ++j) g[i * c + start + j] += node.grad[i * len + j];
    });
}

Tensor reshape(const Tensor& t, std::vector<std::size_t> shape) {
    if (numel(shape) != t.size())
        throw std::invalid_argument("reshape to " + shape_str(shape) + " from " +
                                    shape_str(t.shape()));
    std::vector<double> out(t.data(), t.data() + t.size());
    return make_result(std::move(shape), std::move(out), {t}, [](Tensor::Impl& node) {
        if (!pneeds(node, 0)) return;
        auto& g = pgrad(node, 0);
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += node.grad[i];
    });
}

Tensor sum_all(const Tensor& t) {
    double s = 0.0;
    for (std::size_t i = 0; i < t.size(); ++i) s += t.data()[i];
    return make_result({1}, {s}, {t}, [](Tensor::Impl& node) {
        if (!pneeds(node, 0)) return;
        auto& g = pgrad(node, 0);
        for (auto& v : g) v += node.grad[0];
    });
}

Tensor add_const(const Tensor& t, std::vector<double> bias) {
    if (bias.size() != t.size())
        throw std::invalid_argument("add_const bias size " + std::to_string(bias.size()) +
                                    " vs tensor " + shape_str(t.shape()));
    std::vector<double> out(t.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = t.data()[i] + bias[i];
    return make_result(t.shape(), std::move(out), {t}, [](Tensor::Impl& node) {
        if (!pneeds(node, 0)) return;
        auto& g = pgrad(node, 0);
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += node.grad[i];
    });
}

Tensor cross_entropy(const Tensor& logits, std::size_t target) {
    if (logits.shape().size() != 1)
        throw std::invalid_argument("cross_entropy expects 1D logits, got " +
                                    shape_str(logits.shape()));
    const std::size_t n = logits.size();
    if (target >= n)
        throw std::out_of_range("cross_entropy target " + std::to_string(target) +
                                " out of range for " + std::to_string(n) + " logits");
    double mx = logits.data()[0];
    for (std::size_t i = 1; i < n; ++i) mx = std::max(mx, logits.data()[i]);
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) sum += std::exp(logits.data()[i] - mx);
    const double loss = mx + std::log(sum) - logits.data()[target];
    return make_result({1}, {loss}, {logits}, [target, mx, sum, n](Tensor::Impl& node) {
        if (!pneeds(node, 0)) return;
        auto& g = pgrad(node, 0);
        const auto& x = node.parents[0]->data;
        const double d = node.grad[0];
        for (std::size_t i = 0; i < n; ++i) {
            const double p = std::exp(x[i] - mx) / sum;
            g[i] += d * (p - (i == target ? 1.0 : 0.0));
        }
    });
}

void backward(const Tensor& loss) {
    if (!loss.defined() || loss.size() != 1)
        throw std::invalid_argument("backward requires a scalar loss");
    if (!loss.requires_grad()) return;

    // Iterative post-order topological sort.
    std::vector<Tensor::Impl*> order;
    std::unordered_set<Tensor::Impl*> visited;
    std::vector<std::pair<Tensor::Impl*, std::size_t>> stack;
    stack.emplace_back(loss.impl().get(), 0);
    visited.insert(loss.impl().get());
    while (!stack.empty()) {
        auto& [node, idx] = stack.back();
        if (idx < node->parents.size()) {
            Tensor::Impl* parent = node->parents[idx++].get();
            if (parent->requires_grad && !visited.count(parent)) {
                visited.insert(parent);
                stack.emplace_back(parent, 0);
            }
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }

    loss.impl()->grad[0] += 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it)
        if ((*it)->backward_fn) (*it)->backward_fn(**it);

    for (auto* node : order)
        for (double v : node->grad)
            if (!std::isfinite(v)) throw std::runtime_error("non-finite gradient");
}

// ---- parameters & checkpointing ----

Tensor& ParamMap::at(const std::string& name) {
    auto it = tensors.find(name);
    if (it == tensors.end()) throw std::out_of_range("unknown parameter: " + name);
    return it->second;
}

const Tensor& ParamMap::at(const std::string& name) const {
    auto it = tensors.find(name);
    if (it == tensors.end()) throw std::out_of_range("unknown parameter: " + name);
    return it->second;
}

Tensor& ParamMap::add(const std::string& name, Tensor t) {
    auto [it, ok] = tensors.emplace(name, std::move(t));
    if (!ok) throw std::logic_error("duplicate parameter: " + name);
    return it->second;
}

Tensor& ParamMap::add_randn(const std::string& name, std::vector<std::size_t> shape,
                            std::mt19937_64& rng, double stddev) {
    return add(name, Tensor::randn(std::move(shape), rng, stddev, true));
}

Tensor& ParamMap::add_zeros(const std::string& name, std::vector<std::size_t> shape) {
    return add(name, Tensor::zeros(std::move(shape), true));
}

Tensor& ParamMap::add_ones(const std::string& name, std::vector<std::size_t> shape) {
    Tensor t = Tensor::zeros(std::move(shape), true);
    std::fill(t.vec().begin(), t.vec().end(), 1.0);
    return add(name, std::move(t));
}

void ParamMap::zero_grads() {
    for (auto& [name, t] : tensors) t.zero_grad();
}

namespace {

template <typename T>
void write_pod(std::ostream& out, T v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

template <typename T>
T read_pod(std::istream& in) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(v));
    if (!in) throw std::runtime_error("truncated checkpoint");
    return v;
}

}  // namespace

void save_checkpoint(const std::string& path, const ParamMap& params) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open checkpoint for writing: " + path);
    out.write("SFK1", 4);
    write_pod<std::uint32_t>(out, kCheckpointVersion);
    write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(params.tensors.size()));
    for (const auto& [name, t] : params.tensors) {
        write_pod<std::uint16_t>(out, static_cast<std::uint16_t>(name.size()));
        out.write(name.data(), static_cast<std::streamsize>(name.size()));
        write_pod<std::uint8_t>(out, static_cast<std::uint8_t>(t.shape().size()));
        for (auto d : t.shape()) write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(d));
        out.write(reinterpret_cast<const char*>(t.data()),
                  static_cast<std::streamsize>(t.size() * sizeof(double)));
    }
    if (!out) throw std::runtime_error("checkpoint write failed: " + path);
}

ParamMap load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, "SFK1", 4) != 0)
        throw std::runtime_error("bad checkpoint magic: " + path);
    const auto version = read_pod<std::uint32_t>(in);
    if (version != kCheckpointVersion)
        throw std::runtime_error("unsupported checkpoint version " + std::to_string(version));
    const auto count = read_pod<std::uint32_t>(in);
    ParamMap params;
    for (std::uint32_t i = 0; i < count; ++i) {
        const auto name_len = read_pod<std::uint16_t>(in);
        std::string name(name_len, '\0');
        in.read(name.data(), name_len);
        const auto rank = read_pod<std::uint8_t>(in);
        std::vector<std::size_t> shape(rank);
        for (auto& d : shape) d = read_pod<std::uint32_t>(in);
        std::size_t n = 1;
        for (auto d : shape) n *= d;
        std::vector<double> data(n);
        in.read(reinterpret_cast<char*>(data.data()),
                static_cast<std::streamsize>(n * sizeof(double)));
        if (!in) throw std::runtime_error("truncated checkpoint: " + path);
        params.add(name, Tensor::from(std::move(shape), std::move(data), true));
    }
    return params;
}

}  // namespace spanfact

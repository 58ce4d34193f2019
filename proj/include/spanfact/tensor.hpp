#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <memory>
#include <random>
#include <string>
#include <vector>

namespace spanfact {

// Dense row-major f64 tensor participating in a reverse-mode graph.
// Copying a Tensor copies the handle, not the storage.
class Tensor {
public:
    struct Impl {
        std::vector<std::size_t> shape;
        std::vector<double> data;
        std::vector<double> grad;  // allocated iff requires_grad
        bool requires_grad = false;
        std::vector<std::shared_ptr<Impl>> parents;
        std::function<void(Impl&)> backward_fn;  // pulls impl.grad into parents
    };

    Tensor() = default;

    static Tensor zeros(std::vector<std::size_t> shape, bool requires_grad = false);
    static Tensor from(std::vector<std::size_t> shape, std::vector<double> data,
                       bool requires_grad = false);
    static Tensor scalar(double v, bool requires_grad = false);
    static Tensor randn(std::vector<std::size_t> shape, std::mt19937_64& rng, double stddev,
                        bool requires_grad = true);

    bool defined() const { return impl_ != nullptr; }
    const std::vector<std::size_t>& shape() const { return impl_->shape; }
    std::size_t size() const { return impl_->data.size(); }
    std::size_t rows() const { return impl_->shape.at(0); }
    std::size_t cols() const { return impl_->shape.at(1); }

    double* data() { return impl_->data.data(); }
    const double* data() const { return impl_->data.data(); }
    std::vector<double>& vec() { return impl_->data; }
    const std::vector<double>& vec() const { return impl_->data; }

    double item() const;                    // scalar only
    double at(std::size_t i) const { return impl_->data[i]; }
    double at2(std::size_t r, std::size_t c) const { return impl_->data[r * cols() + c]; }

    bool requires_grad() const { return impl_ && impl_->requires_grad; }
    std::vector<double>& grad();
    const std::vector<double>& grad() const;
    void zero_grad();

    std::shared_ptr<Impl> impl() const { return impl_; }
    static Tensor wrap(std::shared_ptr<Impl> impl) { Tensor t; t.impl_ = std::move(impl); return t; }

private:
    std::shared_ptr<Impl> impl_;
};

// Thread-local autograd switch; inference paths disable graph recording.
bool grad_enabled();
class NoGradGuard {
public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool prev_;
};

std::string shape_str(const std::vector<std::size_t>& s);

// ---- forward ops ----
Tensor matmul(const Tensor& a, const Tensor& b);            // 2D x 2D
Tensor add(const Tensor& a, const Tensor& b);               // same shape
Tensor add_bias(const Tensor& m, const Tensor& bias);       // (r,c) + (c)
Tensor mul_rowwise(const Tensor& m, const Tensor& gain);    // (r,c) * (c) per row
Tensor relu(const Tensor& t);
Tensor softmax_rows(const Tensor& t);                       // softmax over last axis, 1D or 2D
Tensor layer_norm(const Tensor& t, double eps = 1e-5);      // per row, no affine
Tensor embed(const Tensor& table, const std::vector<int>& ids);
Tensor gather_rows(const Tensor& t, const std::vector<std::size_t>& indices);
Tensor concat(const Tensor& a, const Tensor& b, int axis);  // 2D, axis 0 or 1
Tensor mean_rows(const Tensor& t);                          // (r,c) -> (c)
Tensor scale(const Tensor& t, double c);
Tensor transpose(const Tensor& t);                          // 2D
Tensor slice_cols(const Tensor& t, std::size_t start, std::size_t len);
Tensor reshape(const Tensor& t, std::vector<std::size_t> shape);
Tensor sum_all(const Tensor& t);                            // scalar
// Additive constant bias (e.g. attention masks); `bias` is untracked data.
Tensor add_const(const Tensor& t, std::vector<double> bias);
// -log softmax(logits)[target] for a 1D logits vector; scalar output.
Tensor cross_entropy(const Tensor& logits, std::size_t target);

// ---- backward ----
// Topologically replays the graph from a scalar loss; accumulates into
// .grad of every requires_grad node. Throws on non-scalar loss and on
// any non-finite gradient.
void backward(const Tensor& loss);

// ---- parameters & checkpointing ----
struct ParamMap {
    std::map<std::string, Tensor> tensors;  // ordered: deterministic serialization

    Tensor& at(const std::string& name);
    const Tensor& at(const std::string& name) const;
    Tensor& add(const std::string& name, Tensor t);
    Tensor& add_randn(const std::string& name, std::vector<std::size_t> shape,
                      std::mt19937_64& rng, double stddev = 0.02);
    Tensor& add_zeros(const std::string& name, std::vector<std::size_t> shape);
    Tensor& add_ones(const std::string& name, std::vector<std::size_t> shape);
    void zero_grads();
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

// Binary little-endian checkpoint: magic "SFK1", version u32, count u32,
// then per tensor: name len u16, name, rank u8, dims u32 each, f64 payload.
void save_checkpoint(const std::string& path, const ParamMap& params);
ParamMap load_checkpoint(const std::string& path);

}  // namespace spanfact

#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace unist {

// Error taxonomy shared across the library. The C API and CLI map these
// onto stable status / exit codes.
struct ShapeError : std::runtime_error {
    explicit ShapeError(const std::string& msg) : std::runtime_error(msg) {}
};
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};
struct NumericError : std::runtime_error {
    explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};
struct IoError : std::runtime_error {
    explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};
struct DeterminismError : std::runtime_error {
    explicit DeterminismError(const std::string& msg) : std::runtime_error(msg) {}
};

// SplitMix64. Fixed algorithm so that a given seed yields the same draw
// sequence on every platform.
class Rng {
  public:
    explicit Rng(uint64_t seed) : state_(seed) {}

    uint64_t next_u64() {
        state_ += 0x9e3779b97f4a7c15ull;
        uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    // Uniform in [0, 1) with 53 bits of mantissa.
    double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Uniform in [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

  private:
    uint64_t state_;
};

class Tensor;

struct TensorImpl {
    std::vector<int> shape;
    std::vector<double> data;
    bool requires_grad = false;
    std::vector<double> grad;  // allocated lazily, same length as data

    // Tape node. Leaves have no backward fn. The graph is rebuilt on every
    // forward pass; backward() walks parents in reverse topological order.
    std::vector<Tensor> parents;
    std::function<void(TensorImpl&)> backward_fn;
    const char* op_name = "leaf";
    int64_t node_id = 0;
};

// Value-semantics handle over a shared buffer, in the style of the usual
// tape-based tensor libraries: copying a Tensor aliases the same storage.
class Tensor {
  public:
    Tensor() = default;
    explicit Tensor(std::shared_ptr<TensorImpl> impl) : impl_(std::move(impl)) {}

    static Tensor zeros(const std::vector<int>& shape, bool requires_grad = false);
    static Tensor full(const std::vector<int>& shape, double value, bool requires_grad = false);
    static Tensor from_data(const std::vector<int>& shape, std::vector<double> data,
                            bool requires_grad = false);
    static Tensor scalar(double value, bool requires_grad = false);
    // Uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)) weight initialization.
    static Tensor init_uniform(const std::vector<int>& shape, int fan_in, Rng& rng,
                               bool requires_grad = true);
    static Tensor random_uniform(const std::vector<int>& shape, double lo, double hi, Rng& rng,
                                 bool requires_grad = false);

    bool defined() const { return impl_ != nullptr; }
    const std::vector<int>& shape() const { return impl_->shape; }
    int dim(int axis) const { return impl_->shape.at(static_cast<size_t>(axis)); }
    int rank() const { return static_cast<int>(impl_->shape.size()); }
    int64_t numel() const { return static_cast<int64_t>(impl_->data.size()); }

    const std::vector<double>& data() const { return impl_->data; }
    std::vector<double>& mutable_data() { return impl_->data; }
    double at(int64_t i) const { return impl_->data[static_cast<size_t>(i)]; }

    bool requires_grad() const { return impl_->requires_grad; }
    void set_requires_grad(bool v) { impl_->requires_grad = v; }
    bool has_grad() const { return !impl_->grad.empty(); }
    const std::vector<double>& grad() const;
    void zero_grad();

    // Value of a one-element tensor.
    double scalar_value() const;

    TensorImpl& impl() { return *impl_; }
    const TensorImpl& impl() const { return *impl_; }
    std::shared_ptr<TensorImpl> impl_ptr() const { return impl_; }
    bool same_storage(const Tensor& other) const { return impl_ == other.impl_; }

  private:
    std::shared_ptr<TensorImpl> impl_;
};

int64_t shape_numel(const std::vector<int>& shape);
std::string shape_str(const std::vector<int>& shape);

// Reverse-mode sweep from a scalar loss. Accumulates dLoss/dParam into the
// grad buffer of every requires_grad tensor reachable through the tape.
// Repeated calls accumulate; call zero_grad on the leaves to reset.
void backward(const Tensor& loss);

// Throws NumericError naming the op if any output value is non-finite.
// Enabled by default; the trainer relies on it for NaN diagnostics.
void set_finite_checks(bool enabled);
bool finite_checks_enabled();

// When grad mode is off, ops produce plain values and no tape nodes even if
// inputs require grad. Finite-difference probes run under NoGradGuard.
void set_grad_enabled(bool enabled);
bool grad_enabled();

struct NoGradGuard {
    NoGradGuard() : prev_(grad_enabled()) { set_grad_enabled(false); }
    ~NoGradGuard() { set_grad_enabled(prev_); }
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

  private:
    bool prev_;
};

}  // namespace unist

#include "tensor.hpp"

#include <atomic>
#include <cmath>
#include <sstream>
#include <unordered_set>

namespace unist {

namespace {
std::atomic<int64_t> g_next_node_id{1};
bool g_finite_checks = true;
thread_local bool g_grad_enabled = true;
}  // namespace

void set_finite_checks(bool enabled) { g_finite_checks = enabled; }
bool finite_checks_enabled() { return g_finite_checks; }

void set_grad_enabled(bool enabled) { g_grad_enabled = enabled; }
bool grad_enabled() { return g_grad_enabled; }

int64_t shape_numel(const std::vector<int>& shape) {
    int64_t n = 1;
    for (int d : shape) {
        if (d < 1) throw ShapeError("tensor dims must be >= 1, got " + shape_str(shape));
        n *= d;
    }
    return n;
}

std::string shape_str(const std::vector<int>& shape) {
    std::ostringstream os;
    os << "[";
    for (size_t i = 0; i < shape.size(); ++i) {
        if (i) os << ",";
        os << shape[i];
    }
    os << "]";
    return os.str();
}

static std::shared_ptr<TensorImpl> make_impl(const std::vector<int>& shape, bool requires_grad) {
    auto impl = std::make_shared<TensorImpl>();
    impl->shape = shape;
    impl->data.assign(static_cast<size_t>(shape_numel(shape)), 0.0);
    impl->requires_grad = requires_grad;
    impl->node_id = g_next_node_id.fetch_add(1);
    return impl;
}

Tensor Tensor::zeros(const std::vector<int>& shape, bool requires_grad) {
    return Tensor(make_impl(shape, requires_grad));
}

Tensor Tensor::full(const std::vector<int>& shape, double value, bool requires_grad) {
    auto impl = make_impl(shape, requires_grad);
    for (auto& v : impl->data) v = value;
    return Tensor(impl);
}

Tensor Tensor::from_data(const std::vector<int>& shape, std::vector<double> data,
                         bool requires_grad) {
    if (static_cast<int64_t>(data.size()) != shape_numel(shape)) {
        throw ShapeError("from_data: " + std::to_string(data.size()) +
                         " values do not fill shape " + shape_str(shape));
    }
    auto impl = std::make_shared<TensorImpl>();
    impl->shape = shape;
    impl->data = std::move(data);
    impl->requires_grad = requires_grad;
    impl->node_id = g_next_node_id.fetch_add(1);
    return Tensor(impl);
}

Tensor Tensor::scalar(double value, bool requires_grad) {
    return from_data({}, {value}, requires_grad);
}

Tensor Tensor::init_uniform(const std::vector<int>& shape, int fan_in, Rng& rng,
                            bool requires_grad) {
    if (fan_in < 1) throw ConfigError("init_uniform: fan_in must be >= 1");
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    return random_uniform(shape, -bound, bound, rng, requires_grad);
}

Tensor Tensor::random_uniform(const std::vector<int>& shape, double lo, double hi, Rng& rng,
                              bool requires_grad) {
    auto impl = make_impl(shape, requires_grad);
    for (auto& v : impl->data) v = rng.uniform(lo, hi);
    return Tensor(impl);
}

const std::vector<double>& Tensor::grad() const {
    if (impl_->grad.empty()) {
        throw NumericError("grad requested before backward populated it (op=" +
                           std::string(impl_->op_name) + ")");
    }
    return impl_->grad;
}

void Tensor::zero_grad() { impl_->grad.assign(impl_->data.size(), 0.0); }

double Tensor::scalar_value() const {
    if (numel() != 1) {
        throw ShapeError("scalar_value on tensor of shape " + shape_str(impl_->shape));
    }
    return impl_->data[0];
}

void backward(const Tensor& loss) {
    if (loss.numel() != 1) {
        throw ShapeError("backward requires a scalar loss, got shape " + shape_str(loss.shape()));
    }
    // Reverse postorder over the tape (iterative DFS over parents).
    std::vector<TensorImpl*> order;
    std::unordered_set<TensorImpl*> visited;
    struct Frame {
        TensorImpl* node;
        size_t next_parent;
    };
    std::vector<Frame> stack;
    TensorImpl* root = const_cast<TensorImpl*>(&loss.impl());
    stack.push_back({root, 0});
    visited.insert(root);
    while (!stack.empty()) {
        Frame& f = stack.back();
        if (f.next_parent < f.node->parents.size()) {
            TensorImpl* p = &f.node->parents[f.next_parent++].impl();
            if (!visited.count(p)) {
                visited.insert(p);
                stack.push_back({p, 0});
            }
        } else {
            order.push_back(f.node);
            stack.pop_back();
        }
    }

    for (TensorImpl* node : order) {
        if (node->requires_grad && node->grad.empty()) node->grad.assign(node->data.size(), 0.0);
    }
    if (root->grad.empty()) root->grad.assign(root->data.size(), 0.0);
    root->grad[0] += 1.0;

    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        TensorImpl* node = *it;
        if (node->backward_fn && node->requires_grad) node->backward_fn(*node);
    }
}

}  // namespace unist

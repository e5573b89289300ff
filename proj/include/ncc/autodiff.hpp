#pragma once

// Reverse-mode automatic differentiation over dense row-major tensors of
// 64-bit reals. The graph is built define-by-run: every op allocates a Node
// that remembers its inputs and a local gradient rule, and backward() replays
// the recorded graph in reverse topological order.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <numeric>
#include <optional>
#include <span>
#include <unordered_set>
#include <utility>
#include <vector>

#include "ncc/error.hpp"

namespace ncc::ad {

using Shape = std::vector<std::size_t>;

inline std::size_t numel(const Shape& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>{});
}

struct Node {
    Shape shape;
    std::vector<double> value;
    // Empty until populated; leaves created with requires_grad start zero-filled.
    std::vector<double> grad;
    bool requires_grad = false;
    std::vector<std::shared_ptr<Node>> inputs;
    // Reads this node's grad and accumulates into the inputs' grads.
    std::function<void(Node&)> backward;
    std::uint64_t visits = 0;

    bool is_leaf() const { return !backward; }
};

class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::shared_ptr<Node> node) : node_(std::move(node)) {}

    static Tensor constant(Shape shape, std::vector<double> values) {
        if (numel(shape) != values.size())
            throw Error(ErrorKind::shape_mismatch, "tensor shape " + shape_string(shape) + " holds " +
                                                       std::to_string(numel(shape)) + " values, got " +
                                                       std::to_string(values.size()));
        auto node = std::make_shared<Node>();
        node->shape = std::move(shape);
        node->value = std::move(values);
        return Tensor(std::move(node));
    }

    static Tensor zeros(Shape shape) {
        const auto n = numel(shape);
        return constant(std::move(shape), std::vector<double>(n, 0.0));
    }

    static Tensor scalar(double v) { return constant({}, {v}); }

    static Tensor vector(std::vector<double> values) {
        const auto n = values.size();
        return constant({n}, std::move(values));
    }

    /// A trainable leaf: requires_grad with a zero-filled gradient slot.
    static Tensor parameter(Shape shape, std::vector<double> values) {
        Tensor t = constant(std::move(shape), std::move(values));
        t.node_->requires_grad = true;
        t.node_->grad.assign(t.node_->value.size(), 0.0);
        return t;
    }

    bool defined() const { return node_ != nullptr; }
    const std::shared_ptr<Node>& node() const { return node_; }

    const Shape& shape() const { return node_->shape; }
    std::size_t rank() const { return node_->shape.size(); }
    std::size_t size() const { return node_->value.size(); }
    std::size_t dim(std::size_t axis) const { return node_->shape.at(axis); }

    std::span<const double> data() const { return node_->value; }
    /// In-place access for optimizers and checkpoint loading.
    std::span<double> data_mut() { return node_->value; }
    double at(std::size_t i) const { return node_->value.at(i); }

    double item() const {
        if (size() != 1)
            throw Error(ErrorKind::not_scalar, "item() on tensor of shape " + shape_string(shape()));
        return node_->value[0];
    }

    bool requires_grad() const { return node_->requires_grad; }
    bool has_grad() const { return node_->requires_grad && node_->grad.size() == node_->value.size(); }
    std::span<const double> grad() const { return node_->grad; }
    std::span<double> grad_mut() { return node_->grad; }

    void zero_grad() {
        if (node_->requires_grad) node_->grad.assign(node_->value.size(), 0.0);
    }

    /// Same values, cut from the graph.
    Tensor detach() const { return constant(shape(), node_->value); }

    /// Deep copy that keeps the leaf's requires_grad status.
    Tensor clone() const {
        if (node_->requires_grad) return parameter(shape(), node_->value);
        return detach();
    }

private:
    std::shared_ptr<Node> node_;
};

// ---------------------------------------------------------------------------
// Tape
// ---------------------------------------------------------------------------

struct BackwardStats {
    std::size_t nodes_visited = 0;
};

/// The recorded operations reachable from a loss, in topological order
/// (every node's inputs precede it).
class Tape {
public:
    static Tape record(const Tensor& loss) {
        Tape tape;
        tape.root_ = loss.node();
        if (!tape.root_->requires_grad) return tape;
        std::unordered_set<const Node*> seen;
        // Iterative post-order DFS; the graph can be deep for long unrolled losses.
        std::vector<std::pair<Node*, std::size_t>> stack;
        stack.emplace_back(tape.root_.get(), 0);
        seen.insert(tape.root_.get());
        while (!stack.empty()) {
            auto& [node, next] = stack.back();
            if (next < node->inputs.size()) {
                Node* child = node->inputs[next++].get();
                if (child->requires_grad && seen.insert(child).second) stack.emplace_back(child, 0);
            } else {
                tape.order_.push_back(node);
                stack.pop_back();
            }
        }
        return tape;
    }

    std::size_t size() const { return order_.size(); }
    std::span<Node* const> nodes() const { return order_; }

    BackwardStats backward() {
        BackwardStats stats;
        if (order_.empty()) return stats;
        for (Node* node : order_)
            if (!node->is_leaf()) node->grad.assign(node->value.size(), 0.0);
        if (root_->grad.size() != 1) root_->grad.assign(1, 0.0);
        root_->grad[0] += 1.0;
        for (auto it = order_.rbegin(); it != order_.rend(); ++it) {
            Node* node = *it;
            ++node->visits;
            ++stats.nodes_visited;
            if (!node->is_leaf()) node->backward(*node);
        }
        return stats;
    }

private:
    std::shared_ptr<Node> root_;
    std::vector<Node*> order_;
};

/// Populates grad on every requires_grad ancestor of a scalar loss.
/// Leaf gradients accumulate across calls until zero_grad().
inline BackwardStats backward(const Tensor& loss) {
    if (loss.size() != 1)
        throw Error(ErrorKind::not_scalar, "backward() needs a scalar loss, got shape " + shape_string(loss.shape()));
    auto tape = Tape::record(loss);
    return tape.backward();
}

// ---------------------------------------------------------------------------
// Op construction helpers
// ---------------------------------------------------------------------------

namespace detail {

inline Tensor make_result(Shape shape, std::vector<double> value, std::vector<Tensor> inputs,
                          std::function<void(Node&)> rule) {
    auto node = std::make_shared<Node>();
    node->shape = std::move(shape);
    node->value = std::move(value);
    bool any = false;
    for (const auto& in : inputs) any = any || in.requires_grad();
    if (any) {
        node->requires_grad = true;
        node->inputs.reserve(inputs.size());
        for (auto& in : inputs) node->inputs.push_back(in.node());
        node->backward = std::move(rule);
    }
    return Tensor(std::move(node));
}

/// Gradient slot of an input, or nullptr when it does not need one.
inline std::vector<double>* grad_slot(Node& node) {
    if (!node.requires_grad) return nullptr;
    if (node.grad.size() != node.value.size()) node.grad.assign(node.value.size(), 0.0);
    return &node.grad;
}

inline void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() != b.shape())
        throw Error(ErrorKind::shape_mismatch,
                    std::string(op) + ": shapes " + shape_string(a.shape()) + " and " + shape_string(b.shape()));
}

inline void require_rank(const Tensor& a, std::size_t rank, const char* op) {
    if (a.rank() != rank)
        throw Error(ErrorKind::shape_mismatch, std::string(op) + ": expected rank " + std::to_string(rank) +
                                                   ", got shape " + shape_string(a.shape()));
}

template <class Fwd, class Deriv>
Tensor unary(const Tensor& a, Fwd fwd, Deriv deriv) {
    std::vector<double> out(a.size());
    const auto x = a.data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd(x[i]);
    return make_result(a.shape(), std::move(out), {a}, [deriv](Node& self) {
        Node& in = *self.inputs[0];
        if (auto* g = grad_slot(in))
            for (std::size_t i = 0; i < self.value.size(); ++i)
                (*g)[i] += self.grad[i] * deriv(in.value[i], self.value[i]);
    });
}

} // namespace detail

// ---------------------------------------------------------------------------
// Elementwise
// ---------------------------------------------------------------------------

inline Tensor add(const Tensor& a, const Tensor& b) {
    detail::require_same_shape(a, b, "add");
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] + b.data()[i];
    return detail::make_result(a.shape(), std::move(out), {a, b}, [](Node& self) {
        for (int k = 0; k < 2; ++k)
            if (auto* g = detail::grad_slot(*self.inputs[k]))
                for (std::size_t i = 0; i < self.grad.size(); ++i) (*g)[i] += self.grad[i];
    });
}

inline Tensor sub(const Tensor& a, const Tensor& b) {
    detail::require_same_shape(a, b, "sub");
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] - b.data()[i];
    return detail::make_result(a.shape(), std::move(out), {a, b}, [](Node& self) {
        if (auto* g = detail::grad_slot(*self.inputs[0]))
            for (std::size_t i = 0; i < self.grad.size(); ++i) (*g)[i] += self.grad[i];
        if (auto* g = detail::grad_slot(*self.inputs[1]))
            for (std::size_t i = 0; i < self.grad.size(); ++i) (*g)[i] -= self.grad[i];
    });
}

inline Tensor mul(const Tensor& a, const Tensor& b) {
    detail::require_same_shape(a, b, "mul");
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] * b.data()[i];
    return detail::make_result(a.shape(), std::move(out), {a, b}, [](Node& self) {
        Node& x = *self.inputs[0];
        Node& y = *self.inputs[1];
        if (auto* g = detail::grad_slot(x))
            for (std::size_t i = 0; i < self.grad.size(); ++i) (*g)[i] += self.grad[i] * y.value[i];
        if (auto* g = detail::grad_slot(y))
            for (std::size_t i = 0; i < self.grad.size(); ++i) (*g)[i] += self.grad[i] * x.value[i];
    });
}

inline Tensor relu(const Tensor& a) {
    return detail::unary(
        a, [](double x) { return x > 0.0 ? x : 0.0; }, [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

inline Tensor tanh(const Tensor& a) {
    return detail::unary(
        a, [](double x) { return std::tanh(x); }, [](double, double y) { return 1.0 - y * y; });
}

inline Tensor exp(const Tensor& a) {
    return detail::unary(
        a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

inline Tensor log(const Tensor& a) {
    for (double x : a.data())
        if (!(x > 0.0)) throw Error(ErrorKind::domain, "log of non-positive value " + std::to_string(x));
    return detail::unary(
        a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

inline Tensor square(const Tensor& a) {
    return detail::unary(
        a, [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

inline Tensor negate(const Tensor& a) {
    return detail::unary(
        a, [](double x) { return -x; }, [](double, double) { return -1.0; });
}

inline Tensor scale(const Tensor& a, double c) {
    return detail::unary(
        a, [c](double x) { return c * x; }, [c](double, double) { return c; });
}

inline Tensor add_scalar(const Tensor& a, double c) {
    return detail::unary(
        a, [c](double x) { return x + c; }, [](double, double) { return 1.0; });
}

/// Clamp into [lo, hi]; the gradient is zero where the clamp is active.
inline Tensor clamp(const Tensor& a, double lo, double hi) {
    return detail::unary(
        a, [lo, hi](double x) { return std::clamp(x, lo, hi); },
        [lo, hi](double x, double) { return (x >= lo && x <= hi) ? 1.0 : 0.0; });
}

enum class ElementwiseKind { add, sub, mul, relu, tanh, exp, log, square, negate };

inline Tensor elementwise(ElementwiseKind kind, const Tensor& a, const std::optional<Tensor>& b = std::nullopt) {
    auto need_b = [&]() -> const Tensor& {
        if (!b || !b->defined()) throw Error(ErrorKind::invalid_argument, "binary elementwise op needs two operands");
        return *b;
    };
    switch (kind) {
    case ElementwiseKind::add: return add(a, need_b());
    case ElementwiseKind::sub: return sub(a, need_b());
    case ElementwiseKind::mul: return mul(a, need_b());
    case ElementwiseKind::relu: return relu(a);
    case ElementwiseKind::tanh: return tanh(a);
    case ElementwiseKind::exp: return exp(a);
    case ElementwiseKind::log: return log(a);
    case ElementwiseKind::square: return square(a);
    case ElementwiseKind::negate: return negate(a);
    }
    throw Error(ErrorKind::invalid_argument, "unknown elementwise kind");
}

// ---------------------------------------------------------------------------
// Linear algebra and shape ops
// ---------------------------------------------------------------------------

inline Tensor matmul(const Tensor& a, const Tensor& b) {
    detail::require_rank(a, 2, "matmul");
    detail::require_rank(b, 2, "matmul");
    const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
    if (b.dim(0) != k)
        throw Error(ErrorKind::shape_mismatch,
                    "matmul inner dimensions: " + shape_string(a.shape()) + " x " + shape_string(b.shape()));
    std::vector<double> out(m * n, 0.0);
    const auto x = a.data();
    const auto y = b.data();
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) {
            const double xv = x[i * k + p];
            for (std::size_t j = 0; j < n; ++j) out[i * n + j] += xv * y[p * n + j];
        }
    return detail::make_result({m, n}, std::move(out), {a, b}, [m, k, n](Node& self) {
        Node& A = *self.inputs[0];
        Node& B = *self.inputs[1];
        const auto& G = self.grad;
        if (auto* g = detail::grad_slot(A))
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t p = 0; p < k; ++p) {
                    double acc = 0.0;
                    for (std::size_t j = 0; j < n; ++j) acc += G[i * n + j] * B.value[p * n + j];
                    (*g)[i * k + p] += acc;
                }
        if (auto* g = detail::grad_slot(B))
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t p = 0; p < k; ++p) {
                    const double av = A.value[i * k + p];
                    for (std::size_t j = 0; j < n; ++j) (*g)[p * n + j] += av * G[i * n + j];
                }
    });
}

/// x[m,n] + bias[n], broadcast over rows.
inline Tensor add_bias(const Tensor& x, const Tensor& bias) {
    detail::require_rank(x, 2, "add_bias");
    detail::require_rank(bias, 1, "add_bias");
    const std::size_t m = x.dim(0), n = x.dim(1);
    if (bias.dim(0) != n)
        throw Error(ErrorKind::shape_mismatch,
                    "add_bias: " + shape_string(x.shape()) + " with bias " + shape_string(bias.shape()));
    std::vector<double> out(m * n);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) out[i * n + j] = x.data()[i * n + j] + bias.data()[j];
    return detail::make_result({m, n}, std::move(out), {x, bias}, [m, n](Node& self) {
        if (auto* g = detail::grad_slot(*self.inputs[0]))
            for (std::size_t i = 0; i < m * n; ++i) (*g)[i] += self.grad[i];
        if (auto* g = detail::grad_slot(*self.inputs[1]))
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t j = 0; j < n; ++j) (*g)[j] += self.grad[i * n + j];
    });
}

inline Tensor reshape(const Tensor& a, Shape shape) {
    if (numel(shape) != a.size())
        throw Error(ErrorKind::shape_mismatch,
                    "reshape " + shape_string(a.shape()) + " to " + shape_string(shape));
    std::vector<double> out(a.data().begin(), a.data().end());
    return detail::make_result(std::move(shape), std::move(out), {a}, [](Node& self) {
        if (auto* g = detail::grad_slot(*self.inputs[0]))
            for (std::size_t i = 0; i < self.grad.size(); ++i) (*g)[i] += self.grad[i];
    });
}

enum class ReduceKind { sum, mean };

/// Sum or mean over one axis, or over everything (result has rank 0).
inline Tensor reduce(ReduceKind kind, const Tensor& a, std::optional<std::size_t> axis = std::nullopt) {
    const Shape& in_shape = a.shape();
    std::size_t outer = 1, len = a.size(), inner = 1;
    Shape out_shape;
    if (axis) {
        if (*axis >= in_shape.size())
            throw Error(ErrorKind::invalid_axis,
                        "axis " + std::to_string(*axis) + " for tensor of shape " + shape_string(in_shape));
        outer = 1;
        for (std::size_t d = 0; d < *axis; ++d) outer *= in_shape[d];
        len = in_shape[*axis];
        inner = 1;
        for (std::size_t d = *axis + 1; d < in_shape.size(); ++d) inner *= in_shape[d];
        for (std::size_t d = 0; d < in_shape.size(); ++d)
            if (d != *axis) out_shape.push_back(in_shape[d]);
    }
    const double factor = (kind == ReduceKind::mean) ? 1.0 / static_cast<double>(len) : 1.0;
    std::vector<double> out(outer * inner, 0.0);
    const auto x = a.data();
    for (std::size_t o = 0; o < outer; ++o)
        for (std::size_t l = 0; l < len; ++l)
            for (std::size_t i = 0; i < inner; ++i) out[o * inner + i] += x[(o * len + l) * inner + i];
    if (kind == ReduceKind::mean)
        for (double& v : out) v /= static_cast<double>(len);
    return detail::make_result(std::move(out_shape), std::move(out), {a}, [outer, len, inner, factor](Node& self) {
        if (auto* g = detail::grad_slot(*self.inputs[0]))
            for (std::size_t o = 0; o < outer; ++o)
                for (std::size_t l = 0; l < len; ++l)
                    for (std::size_t i = 0; i < inner; ++i)
                        (*g)[(o * len + l) * inner + i] += factor * self.grad[o * inner + i];
    });
}

inline Tensor sum(const Tensor& a, std::optional<std::size_t> axis = std::nullopt) {
    return reduce(ReduceKind::sum, a, axis);
}

inline Tensor mean(const Tensor& a, std::optional<std::size_t> axis = std::nullopt) {
    return reduce(ReduceKind::mean, a, axis);
}

/// Row-wise softmax applied independently to consecutive column segments.
inline Tensor softmax_segments(const Tensor& x, std::vector<std::size_t> segments) {
    detail::require_rank(x, 2, "softmax_segments");
    const std::size_t m = x.dim(0), n = x.dim(1);
    if (std::accumulate(segments.begin(), segments.end(), std::size_t{0}) != n)
        throw Error(ErrorKind::shape_mismatch, "softmax_segments: segment widths do not cover " +
                                                   shape_string(x.shape()));
    std::vector<double> out(m * n);
    const auto v = x.data();
    for (std::size_t r = 0; r < m; ++r) {
        std::size_t begin = r * n;
        for (std::size_t width : segments) {
            if (width == 0) continue;
            double hi = v[begin];
            for (std::size_t c = 1; c < width; ++c) hi = std::max(hi, v[begin + c]);
            double total = 0.0;
            for (std::size_t c = 0; c < width; ++c) total += (out[begin + c] = std::exp(v[begin + c] - hi));
            for (std::size_t c = 0; c < width; ++c) out[begin + c] /= total;
            begin += width;
        }
    }
    return detail::make_result({m, n}, std::move(out), {x}, [m, n, segments](Node& self) {
        auto* g = detail::grad_slot(*self.inputs[0]);
        if (!g) return;
        for (std::size_t r = 0; r < m; ++r) {
            std::size_t begin = r * n;
            for (std::size_t width : segments) {
                double dot = 0.0;
                for (std::size_t c = 0; c < width; ++c) dot += self.grad[begin + c] * self.value[begin + c];
                for (std::size_t c = 0; c < width; ++c)
                    (*g)[begin + c] += self.value[begin + c] * (self.grad[begin + c] - dot);
                begin += width;
            }
        }
    });
}

/// Picks x[r, index[r]] for each row; result has shape [m].
inline Tensor gather_cols(const Tensor& x, std::span<const std::size_t> index) {
    detail::require_rank(x, 2, "gather_cols");
    const std::size_t m = x.dim(0), n = x.dim(1);
    if (index.size() != m)
        throw Error(ErrorKind::shape_mismatch, "gather_cols: " + std::to_string(index.size()) +
                                                   " indices for " + shape_string(x.shape()));
    std::vector<std::size_t> idx(index.begin(), index.end());
    std::vector<double> out(m);
    for (std::size_t r = 0; r < m; ++r) {
        if (idx[r] >= n)
            throw Error(ErrorKind::invalid_argument, "gather_cols: index " + std::to_string(idx[r]) +
                                                         " out of range for width " + std::to_string(n));
        out[r] = x.data()[r * n + idx[r]];
    }
    return detail::make_result({m}, std::move(out), {x}, [n, idx = std::move(idx)](Node& self) {
        if (auto* g = detail::grad_slot(*self.inputs[0]))
            for (std::size_t r = 0; r < idx.size(); ++r) (*g)[r * n + idx[r]] += self.grad[r];
    });
}

/// Weighted sum Σ_j weight_j · terms_j. Each output component is accumulated
/// in ascending order of its addends, so the result depends only on the
/// multiset of weighted terms and not on the order they are listed in.
inline Tensor weighted_sum_canonical(std::span<const Tensor> terms, std::span<const double> weights) {
    if (terms.empty()) throw Error(ErrorKind::invalid_argument, "weighted_sum_canonical: no terms");
    if (terms.size() != weights.size())
        throw Error(ErrorKind::invalid_argument, "weighted_sum_canonical: terms and weights differ in length");
    for (const auto& t : terms) detail::require_same_shape(terms[0], t, "weighted_sum_canonical");
    const std::size_t len = terms[0].size();
    std::vector<double> out(len);
    std::vector<double> addends(terms.size());
    for (std::size_t k = 0; k < len; ++k) {
        for (std::size_t j = 0; j < terms.size(); ++j) addends[j] = weights[j] * terms[j].data()[k];
        std::sort(addends.begin(), addends.end());
        double acc = 0.0;
        for (double v : addends) acc += v;
        out[k] = acc;
    }
    std::vector<double> w(weights.begin(), weights.end());
    std::vector<Tensor> inputs(terms.begin(), terms.end());
    return detail::make_result(terms[0].shape(), std::move(out), std::move(inputs), [w = std::move(w)](Node& self) {
        for (std::size_t j = 0; j < self.inputs.size(); ++j)
            if (auto* g = detail::grad_slot(*self.inputs[j]))
                for (std::size_t k = 0; k < self.grad.size(); ++k) (*g)[k] += w[j] * self.grad[k];
    });
}

inline Tensor add_all(std::span<const Tensor> terms) {
    if (terms.empty()) throw Error(ErrorKind::invalid_argument, "add_all: no terms");
    Tensor acc = terms[0];
    for (std::size_t i = 1; i < terms.size(); ++i) acc = add(acc, terms[i]);
    return acc;
}

inline Tensor mse(const Tensor& target, const Tensor& prediction) {
    return mean(square(sub(target, prediction)));
}

// ---------------------------------------------------------------------------
// Optimizers
// ---------------------------------------------------------------------------

struct OptimizerConfig {
    enum class Kind { sgd, adam };
    Kind kind = Kind::adam;
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

/// Plain SGD or Adam with bias correction over a fixed parameter list.
/// step() consumes the populated gradients and clears them.
class Optimizer {
public:
    Optimizer() = default;
    Optimizer(OptimizerConfig config, std::vector<Tensor> params) : config_(config), params_(std::move(params)) {
        if (config_.kind == OptimizerConfig::Kind::adam) {
            m_.reserve(params_.size());
            v_.reserve(params_.size());
            for (const auto& p : params_) {
                m_.emplace_back(p.size(), 0.0);
                v_.emplace_back(p.size(), 0.0);
            }
        }
    }

    const OptimizerConfig& config() const { return config_; }
    void set_lr(double lr) { config_.lr = lr; }
    std::size_t steps() const { return steps_; }
    std::span<const Tensor> params() const { return params_; }

    void zero_grad() {
        for (auto& p : params_) p.zero_grad();
    }

    void step() {
        for (std::size_t i = 0; i < params_.size(); ++i)
            if (!params_[i].has_grad())
                throw Error(ErrorKind::missing_grad, "parameter #" + std::to_string(i) + " of shape " +
                                                         shape_string(params_[i].shape()) + " has no gradient");
        ++steps_;
        if (config_.kind == OptimizerConfig::Kind::sgd) {
            for (auto& p : params_) {
                auto w = p.data_mut();
                auto g = p.grad();
                for (std::size_t k = 0; k < w.size(); ++k) w[k] -= config_.lr * g[k];
            }
        } else {
            const double t = static_cast<double>(steps_);
            const double c1 = 1.0 - std::pow(config_.beta1, t);
            const double c2 = 1.0 - std::pow(config_.beta2, t);
            for (std::size_t i = 0; i < params_.size(); ++i) {
                auto w = params_[i].data_mut();
                auto g = params_[i].grad();
                auto& m = m_[i];
                auto& v = v_[i];
                for (std::size_t k = 0; k < w.size(); ++k) {
                    m[k] = config_.beta1 * m[k] + (1.0 - config_.beta1) * g[k];
                    v[k] = config_.beta2 * v[k] + (1.0 - config_.beta2) * g[k] * g[k];
                    const double m_hat = m[k] / c1;
                    const double v_hat = v[k] / c2;
                    w[k] -= config_.lr * m_hat / (std::sqrt(v_hat) + config_.epsilon);
                }
            }
        }
        zero_grad();
    }

private:
    OptimizerConfig config_;
    std::vector<Tensor> params_;
    std::vector<std::vector<double>> m_, v_;
    std::size_t steps_ = 0;
};

/// One-shot convenience around Optimizer for callers holding their own state.
inline void sgd_adam_step(Optimizer& optimizer) { optimizer.step(); }

} // namespace ncc::ad

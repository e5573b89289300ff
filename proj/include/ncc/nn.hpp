#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "ncc/autodiff.hpp"

namespace ncc {

// ---------------------------------------------------------------------------
// Random streams
// ---------------------------------------------------------------------------

/// Stream offsets used to derive independent generators from one master seed.
enum class StreamId : std::uint32_t {
    init = 1,     // parameter initialization
    explore = 2,  // epsilon-greedy draws and action noise
    reparam = 3,  // reparameterization epsilon
    env = 4,      // environment demand / load processes
    replay = 5,   // minibatch sampling
};

inline std::mt19937_64 make_stream(std::uint64_t master_seed, StreamId id) {
    std::seed_seq seq{static_cast<std::uint32_t>(master_seed & 0xffffffffu),
                      static_cast<std::uint32_t>(master_seed >> 32), static_cast<std::uint32_t>(id)};
    return std::mt19937_64(seq);
}

/// Unit-Gaussian sampler owning its generator and distribution state.
class GaussianStream {
public:
    GaussianStream() = default;
    explicit GaussianStream(std::mt19937_64 engine) : engine_(std::move(engine)) {}

    double next() { return dist_(engine_); }

    ad::Tensor tensor(ad::Shape shape) {
        std::vector<double> values(ad::numel(shape));
        for (double& v : values) v = next();
        return ad::Tensor::constant(std::move(shape), std::move(values));
    }

    std::mt19937_64& engine() { return engine_; }

private:
    std::mt19937_64 engine_;
    std::normal_distribution<double> dist_{0.0, 1.0};
};

// ---------------------------------------------------------------------------
// Layers
// ---------------------------------------------------------------------------

enum class Activation { identity, relu, tanh };

inline ad::Tensor activate(Activation act, const ad::Tensor& x) {
    switch (act) {
    case Activation::identity: return x;
    case Activation::relu: return ad::relu(x);
    case Activation::tanh: return ad::tanh(x);
    }
    return x;
}

inline std::string to_string(Activation act) {
    switch (act) {
    case Activation::identity: return "identity";
    case Activation::relu: return "relu";
    case Activation::tanh: return "tanh";
    }
    return "identity";
}

struct NamedTensor {
    std::string name;
    ad::Tensor tensor;
};

/// Glorot-uniform weight matrix of shape in x out.
inline ad::Tensor glorot(std::size_t in, std::size_t out, std::mt19937_64& rng) {
    const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
    std::uniform_real_distribution<double> dist(-limit, limit);
    std::vector<double> values(in * out);
    for (double& v : values) v = dist(rng);
    return ad::Tensor::parameter({in, out}, std::move(values));
}

/// Fully-connected layer y = x W + b over row-batched input [batch, in].
struct Dense {
    ad::Tensor weight;
    ad::Tensor bias;

    Dense() = default;
    Dense(std::size_t in, std::size_t out, std::mt19937_64& rng)
        : weight(glorot(in, out, rng)), bias(ad::Tensor::parameter({out}, std::vector<double>(out, 0.0))) {}

    std::size_t in_dim() const { return weight.dim(0); }
    std::size_t out_dim() const { return weight.dim(1); }

    ad::Tensor operator()(const ad::Tensor& x) const {
        if (x.rank() != 2 || x.dim(1) != in_dim())
            throw Error(ErrorKind::shape_mismatch, "dense layer expects [batch, " + std::to_string(in_dim()) +
                                                       "], got " + shape_string(x.shape()));
        return ad::add_bias(ad::matmul(x, weight), bias);
    }

    void collect(const std::string& prefix, std::vector<NamedTensor>& out) const {
        out.push_back({prefix + ".weight", weight});
        out.push_back({prefix + ".bias", bias});
    }

    Dense clone() const { return Dense{weight.clone(), bias.clone()}; }

private:
    Dense(ad::Tensor w, ad::Tensor b) : weight(std::move(w)), bias(std::move(b)) {}
};

/// Overwrites destination values with source values, tensor by tensor.
inline void copy_values(const std::vector<NamedTensor>& source, std::vector<NamedTensor>& destination) {
    if (source.size() != destination.size())
        throw Error(ErrorKind::shape_mismatch, "parameter lists differ in length");
    for (std::size_t i = 0; i < source.size(); ++i) {
        auto& dst = destination[i].tensor;
        const auto& src = source[i].tensor;
        if (src.shape() != dst.shape())
            throw Error(ErrorKind::shape_mismatch, "parameter " + destination[i].name + ": " +
                                                       shape_string(src.shape()) + " vs " +
                                                       shape_string(dst.shape()));
        std::copy(src.data().begin(), src.data().end(), dst.data_mut().begin());
    }
}

/// Polyak averaging: destination <- tau * source + (1 - tau) * destination.
inline void blend_values(const std::vector<NamedTensor>& source, std::vector<NamedTensor>& destination, double tau) {
    if (source.size() != destination.size())
        throw Error(ErrorKind::shape_mismatch, "parameter lists differ in length");
    for (std::size_t i = 0; i < source.size(); ++i) {
        auto dst = destination[i].tensor.data_mut();
        auto src = source[i].tensor.data();
        for (std::size_t k = 0; k < dst.size(); ++k) dst[k] = tau * src[k] + (1.0 - tau) * dst[k];
    }
}

inline std::vector<ad::Tensor> tensors_of(const std::vector<NamedTensor>& named) {
    std::vector<ad::Tensor> out;
    out.reserve(named.size());
    for (const auto& n : named) out.push_back(n.tensor);
    return out;
}

inline void zero_values(const std::vector<NamedTensor>& named) {
    for (auto n : named) std::fill(n.tensor.data_mut().begin(), n.tensor.data_mut().end(), 0.0);
}

inline void zero_grads(const std::vector<NamedTensor>& named) {
    for (auto n : named) n.tensor.zero_grad();
}

/// Stacks per-sample rows into a [rows, width] constant tensor.
inline ad::Tensor stack_rows(const std::vector<const std::vector<double>*>& rows, std::size_t width) {
    std::vector<double> values;
    values.reserve(rows.size() * width);
    for (const auto* row : rows) {
        if (row->size() != width)
            throw Error(ErrorKind::shape_mismatch, "row of width " + std::to_string(row->size()) +
                                                       " where " + std::to_string(width) + " expected");
        values.insert(values.end(), row->begin(), row->end());
    }
    return ad::Tensor::constant({rows.size(), width}, std::move(values));
}

} // namespace ncc

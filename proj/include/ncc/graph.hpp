#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ncc/autodiff.hpp"
#include "ncc/nn.hpp"

namespace ncc {

/// Undirected agent topology. Only off-diagonal adjacency is stored; the
/// self term is added inside the graph convolution.
class AgentGraph {
public:
    AgentGraph() = default;
    explicit AgentGraph(std::size_t n_agents) : n_(n_agents), adjacency_(n_agents * n_agents, 0) {
        if (n_agents == 0) throw Error(ErrorKind::invalid_argument, "agent graph needs at least one agent");
    }

    static AgentGraph from_edges(std::size_t n_agents, std::span<const std::pair<std::size_t, std::size_t>> edges) {
        AgentGraph g(n_agents);
        for (auto [a, b] : edges) g.connect(a, b);
        return g;
    }

    static AgentGraph complete(std::size_t n_agents) {
        AgentGraph g(n_agents);
        for (std::size_t a = 0; a < n_agents; ++a)
            for (std::size_t b = a + 1; b < n_agents; ++b) g.connect(a, b);
        return g;
    }

    static AgentGraph line(std::size_t n_agents) {
        AgentGraph g(n_agents);
        for (std::size_t a = 0; a + 1 < n_agents; ++a) g.connect(a, a + 1);
        return g;
    }

    std::size_t size() const { return n_; }

    /// Adds the undirected edge a-b. Self-loops are ignored.
    void connect(std::size_t a, std::size_t b) {
        check(a);
        check(b);
        if (a == b) return;
        adjacency_[a * n_ + b] = 1;
        adjacency_[b * n_ + a] = 1;
    }

    bool adjacent(std::size_t a, std::size_t b) const {
        check(a);
        check(b);
        return adjacency_[a * n_ + b] != 0;
    }

    /// N(i), excluding i itself, in ascending order.
    std::vector<std::size_t> neighbors(std::size_t i) const {
        check(i);
        std::vector<std::size_t> out;
        for (std::size_t j = 0; j < n_; ++j)
            if (adjacency_[i * n_ + j]) out.push_back(j);
        return out;
    }

    /// N(i) ∪ {i}, ascending.
    std::vector<std::size_t> closed_neighborhood(std::size_t i) const {
        auto out = neighbors(i);
        out.insert(std::lower_bound(out.begin(), out.end(), i), i);
        return out;
    }

    std::size_t degree(std::size_t i) const { return neighbors(i).size(); }

    /// |N(i)| + 1, the normalization degree used by the graph convolution.
    std::size_t closed_degree(std::size_t i) const { return degree(i) + 1; }

    std::vector<std::pair<std::size_t, std::size_t>> edges() const {
        std::vector<std::pair<std::size_t, std::size_t>> out;
        for (std::size_t a = 0; a < n_; ++a)
            for (std::size_t b = a + 1; b < n_; ++b)
                if (adjacency_[a * n_ + b]) out.emplace_back(a, b);
        return out;
    }

    bool operator==(const AgentGraph&) const = default;

private:
    void check(std::size_t i) const {
        if (i >= n_)
            throw Error(ErrorKind::invalid_argument,
                        "agent index " + std::to_string(i) + " out of range for " + std::to_string(n_) + " agents");
    }

    std::size_t n_ = 0;
    std::vector<char> adjacency_;
};

inline std::vector<std::size_t> neighbors(const AgentGraph& graph, std::size_t i) { return graph.neighbors(i); }

/// One graph-convolution layer; the weight is shared by every agent.
struct GcnLayer {
    ad::Tensor weight;  // d_in x d_out
    Activation activation = Activation::relu;

    GcnLayer() = default;
    GcnLayer(ad::Tensor w, Activation act) : weight(std::move(w)), activation(act) {}
    GcnLayer(std::size_t d_in, std::size_t d_out, std::mt19937_64& rng, Activation act = Activation::relu)
        : weight(glorot(d_in, d_out, rng)), activation(act) {}

    std::size_t in_dim() const { return weight.dim(0); }
    std::size_t out_dim() const { return weight.dim(1); }

    GcnLayer clone() const { return GcnLayer(weight.clone(), activation); }
};

namespace detail {

inline ad::Tensor as_matrix(const ad::Tensor& h) {
    if (h.rank() == 2) return h;
    if (h.rank() == 1) return ad::reshape(h, {1, h.dim(0)});
    throw Error(ErrorKind::shape_mismatch, "graph features must be [d] or [batch, d], got " + shape_string(h.shape()));
}

} // namespace detail

/// H_i for a single agent:
///   activation( (Σ_{j ∈ N(i) ∪ {i}} h_j / √(d_i d_j)) W ),  d_k = |N(k)| + 1.
/// `h` is indexed by agent; only entries in the closed neighborhood of i are read.
inline ad::Tensor gcn_forward_one(const GcnLayer& layer, const AgentGraph& graph, std::size_t i,
                                  std::span<const ad::Tensor> h) {
    if (h.size() != graph.size())
        throw Error(ErrorKind::shape_mismatch, "gcn: " + std::to_string(h.size()) + " feature tensors for " +
                                                   std::to_string(graph.size()) + " agents");
    const auto members = graph.closed_neighborhood(i);
    const double d_i = static_cast<double>(members.size());
    std::vector<ad::Tensor> terms;
    std::vector<double> weights;
    terms.reserve(members.size());
    for (std::size_t j : members) {
        const auto& hj = h[j];
        const std::size_t width = hj.shape().empty() ? 0 : hj.shape().back();
        if (width != layer.in_dim())
            throw Error(ErrorKind::shape_mismatch, "gcn: agent " + std::to_string(j) + " features " +
                                                       shape_string(hj.shape()) + " do not match weight " +
                                                       shape_string(layer.weight.shape()));
        terms.push_back(detail::as_matrix(hj));
        weights.push_back(1.0 / std::sqrt(d_i * static_cast<double>(graph.closed_degree(j))));
    }
    const bool was_vector = h[i].rank() == 1;
    auto aggregated = ad::weighted_sum_canonical(terms, weights);
    auto out = activate(layer.activation, ad::matmul(aggregated, layer.weight));
    return was_vector ? ad::reshape(out, {layer.out_dim()}) : out;
}

/// Applies the layer to every agent.
inline std::vector<ad::Tensor> gcn_forward(const GcnLayer& layer, const AgentGraph& graph,
                                           std::span<const ad::Tensor> h) {
    std::vector<ad::Tensor> out;
    out.reserve(graph.size());
    for (std::size_t i = 0; i < graph.size(); ++i) out.push_back(gcn_forward_one(layer, graph, i, h));
    return out;
}

} // namespace ncc

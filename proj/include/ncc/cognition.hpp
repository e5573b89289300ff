#pragma once

// Variational cognition head: an encoder to a diagonal Gaussian latent,
// reparameterized sampling, a decoder back to the observation (and action),
// and the cognitive-dissonance losses built from them.

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ncc/autodiff.hpp"
#include "ncc/nn.hpp"

namespace ncc {

inline constexpr double kLogSigmaMin = -5.0;
inline constexpr double kLogSigmaMax = 2.0;

/// Diagonal Gaussian N(mu, exp(log_sigma)^2). Both tensors are [d] or [batch, d].
struct GaussianLatent {
    ad::Tensor mu;
    ad::Tensor log_sigma;

    std::size_t dim() const { return mu.shape().back(); }

    GaussianLatent detached() const { return {mu.detach(), log_sigma.detach()}; }

    static GaussianLatent unit_like(const GaussianLatent& like) {
        return {ad::Tensor::zeros(like.mu.shape()), ad::Tensor::zeros(like.mu.shape())};
    }
};

struct CognitionHeadConfig {
    std::size_t input_dim = 32;        // width of H_i
    std::size_t agent_input_dim = 32;  // width of the tensor feeding A_i
    std::size_t latent_dim = 16;
    std::size_t decoder_hidden = 32;
    std::size_t obs_dim = 0;     // reconstruction target ô_i
    std::size_t action_dim = 0;  // â_i, actor-critic only; 0 disables
    Activation hidden_activation = Activation::relu;
};

struct Reconstruction {
    ad::Tensor obs;
    std::optional<ad::Tensor> action;
};

struct Encoded {
    ad::Tensor agent;  // A_i
    GaussianLatent latent;
};

class CognitionHead {
public:
    CognitionHead() = default;
    CognitionHead(const CognitionHeadConfig& config, std::mt19937_64& rng)
        : config_(config),
          agent_branch_(config.agent_input_dim, config.latent_dim, rng),
          enc_mu_(config.input_dim, config.latent_dim, rng),
          enc_log_sigma_(config.input_dim, config.latent_dim, rng),
          dec_hidden_(config.latent_dim, config.decoder_hidden, rng),
          dec_obs_(config.decoder_hidden, config.obs_dim, rng) {
        if (config.action_dim > 0) dec_action_ = Dense(config.decoder_hidden, config.action_dim, rng);
    }

    const CognitionHeadConfig& config() const { return config_; }

    /// Splits H_i into the agent-specific branch A_i and the cognition latent.
    /// `agent_input` defaults to H_i; the critic passes its action shortcut.
    Encoded encode(const ad::Tensor& H, const std::optional<ad::Tensor>& agent_input = std::nullopt) const {
        const auto& a_in = agent_input ? *agent_input : H;
        auto mu = enc_mu_(H);
        auto log_sigma = ad::clamp(enc_log_sigma_(H), kLogSigmaMin, kLogSigmaMax);
        return {agent_branch_(a_in), {mu, log_sigma}};
    }

    Reconstruction reconstruct(const ad::Tensor& latent_sample) const {
        if (latent_sample.rank() != 2 || latent_sample.dim(1) != config_.latent_dim)
            throw Error(ErrorKind::shape_mismatch, "reconstruct expects [batch, " +
                                                       std::to_string(config_.latent_dim) + "], got " +
                                                       shape_string(latent_sample.shape()));
        auto hidden = activate(config_.hidden_activation, dec_hidden_(latent_sample));
        Reconstruction out{dec_obs_(hidden), std::nullopt};
        if (dec_action_) out.action = (*dec_action_)(hidden);
        return out;
    }

    void collect(const std::string& prefix, std::vector<NamedTensor>& out) const {
        agent_branch_.collect(prefix + ".agent", out);
        enc_mu_.collect(prefix + ".enc_mu", out);
        enc_log_sigma_.collect(prefix + ".enc_log_sigma", out);
        dec_hidden_.collect(prefix + ".dec_hidden", out);
        dec_obs_.collect(prefix + ".dec_obs", out);
        if (dec_action_) dec_action_->collect(prefix + ".dec_action", out);
    }

    /// Encoder-side parameters only (everything the Q path touches).
    void collect_encoder(const std::string& prefix, std::vector<NamedTensor>& out) const {
        agent_branch_.collect(prefix + ".agent", out);
        enc_mu_.collect(prefix + ".enc_mu", out);
        enc_log_sigma_.collect(prefix + ".enc_log_sigma", out);
    }

    CognitionHead clone() const {
        CognitionHead c;
        c.config_ = config_;
        c.agent_branch_ = agent_branch_.clone();
        c.enc_mu_ = enc_mu_.clone();
        c.enc_log_sigma_ = enc_log_sigma_.clone();
        c.dec_hidden_ = dec_hidden_.clone();
        c.dec_obs_ = dec_obs_.clone();
        if (dec_action_) c.dec_action_ = dec_action_->clone();
        return c;
    }

private:
    CognitionHeadConfig config_;
    Dense agent_branch_;
    Dense enc_mu_;
    Dense enc_log_sigma_;
    Dense dec_hidden_;
    Dense dec_obs_;
    std::optional<Dense> dec_action_;
};

inline Encoded encode(const CognitionHead& head, const ad::Tensor& H) { return head.encode(H); }

inline Reconstruction reconstruct(const CognitionHead& head, const ad::Tensor& latent_sample) {
    return head.reconstruct(latent_sample);
}

/// Ĉ = mu + exp(log_sigma) ⊙ epsilon. epsilon is a constant, so gradients
/// reach mu and log_sigma only.
inline ad::Tensor sample(const GaussianLatent& latent, const ad::Tensor& epsilon) {
    if (epsilon.shape() != latent.mu.shape())
        throw Error(ErrorKind::shape_mismatch, "sample: epsilon " + shape_string(epsilon.shape()) +
                                                   " vs latent " + shape_string(latent.mu.shape()));
    return ad::add(latent.mu, ad::mul(ad::exp(latent.log_sigma), epsilon.detach()));
}

namespace detail {

inline void require_latent_match(const GaussianLatent& p, const GaussianLatent& q) {
    if (p.mu.shape() != q.mu.shape() || p.log_sigma.shape() != p.mu.shape() || q.log_sigma.shape() != q.mu.shape())
        throw Error(ErrorKind::shape_mismatch, "KL between latents of shapes " + shape_string(p.mu.shape()) +
                                                   " and " + shape_string(q.mu.shape()));
}

} // namespace detail

/// KL(p ‖ q) for diagonal Gaussians, summed over latent components. For
/// batched latents [batch, d] the per-row divergences are averaged.
inline ad::Tensor kl_diag_gaussians(const GaussianLatent& p, const GaussianLatent& q) {
    detail::require_latent_match(p, q);
    // log(σq/σp) + σp²/(2σq²) + (μp−μq)²/(2σq²) − 1/2, with δ = log σq − log σp.
    auto delta = ad::sub(q.log_sigma, p.log_sigma);
    auto ratio = ad::scale(ad::exp(ad::scale(delta, -2.0)), 0.5);
    auto mean_term =
        ad::scale(ad::mul(ad::square(ad::sub(p.mu, q.mu)), ad::exp(ad::scale(q.log_sigma, -2.0))), 0.5);
    auto per_component = ad::add_scalar(ad::add(ad::add(delta, ratio), mean_term), -0.5);
    if (per_component.rank() == 1) return ad::sum(per_component);
    return ad::mean(ad::sum(per_component, per_component.rank() - 1));
}

inline ad::Tensor kl_to_unit_gaussian(const GaussianLatent& p) {
    return kl_diag_gaussians(p, GaussianLatent::unit_like(p));
}

enum class CdMode { neighborhood, global_unit };

/// One squared-error reconstruction term of the cognitive-dissonance loss.
struct ReconstructionTerm {
    ad::Tensor target;
    ad::Tensor reconstruction;
};

/// Cognitive-dissonance loss for one agent.
///   neighborhood: Σ L2 terms + (1/|N(i)|) Σ_{j∈N(i)} KL(q_i ‖ q_j)
///   global_unit:  Σ L2 terms + KL(q_i ‖ N(0, I))
/// L2 is the mean squared error over components. An agent without neighbors
/// falls back to global_unit. With stop_grad_neighbors the q_j are constants.
inline ad::Tensor cd_loss(std::span<const ReconstructionTerm> terms, const GaussianLatent& own,
                          std::span<const GaussianLatent> neighbor_latents, CdMode mode,
                          bool stop_grad_neighbors = false) {
    std::vector<ad::Tensor> parts;
    for (const auto& term : terms) {
        ad::detail::require_same_shape(term.target, term.reconstruction, "cd_loss reconstruction");
        parts.push_back(ad::mse(term.target.detach(), term.reconstruction));
    }
    if (mode == CdMode::neighborhood && neighbor_latents.empty()) {
        warn("cd_loss: agent without neighbors falls back to the unit-Gaussian prior");
        mode = CdMode::global_unit;
    }
    if (mode == CdMode::global_unit) {
        parts.push_back(kl_to_unit_gaussian(own));
    } else {
        std::vector<ad::Tensor> kls;
        for (const auto& q : neighbor_latents) kls.push_back(kl_diag_gaussians(own, stop_grad_neighbors ? q.detached() : q));
        parts.push_back(ad::scale(ad::add_all(kls), 1.0 / static_cast<double>(kls.size())));
    }
    return ad::add_all(parts);
}

/// Arithmetic mean of all latent-mean components: the scalar "cognition value".
inline double cognition_value(const GaussianLatent& latent) {
    const auto mu = latent.mu.data();
    double acc = 0.0;
    for (double v : mu) acc += v;
    return mu.empty() ? 0.0 : acc / static_cast<double>(mu.size());
}

} // namespace ncc

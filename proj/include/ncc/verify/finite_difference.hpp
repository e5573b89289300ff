#pragma once

// Central finite-difference checks of reverse-mode gradients. Test-side only:
// nothing in the training path includes this header.

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "ncc/autodiff.hpp"

namespace ncc::verify {

/// |a - n| / max(|a|, |n|, floor). The floor keeps near-zero gradients from
/// turning round-off noise into large relative errors.
inline double relative_error(double analytic, double numeric, double floor = 1e-6) {
    const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
    return std::abs(analytic - numeric) / denom;
}

struct GradCheckResult {
    double max_rel_error = 0.0;
    std::size_t coordinates = 0;
};

/// Compares backward() against central differences of `loss_fn` with respect
/// to every coordinate of `params` (or a random subset of at most
/// `max_coords` per tensor when `rng` is given).
inline GradCheckResult check_gradients(const std::function<ad::Tensor()>& loss_fn, std::vector<ad::Tensor> params,
                                       double step = 1e-5, std::size_t max_coords = 0,
                                       std::mt19937_64* rng = nullptr) {
    for (auto& p : params) p.zero_grad();
    ad::backward(loss_fn());
    std::vector<std::vector<double>> analytic;
    for (const auto& p : params) analytic.emplace_back(p.grad().begin(), p.grad().end());
    for (auto& p : params) p.zero_grad();

    GradCheckResult result;
    for (std::size_t t = 0; t < params.size(); ++t) {
        auto values = params[t].data_mut();
        std::vector<std::size_t> coords(values.size());
        for (std::size_t k = 0; k < coords.size(); ++k) coords[k] = k;
        if (rng && max_coords > 0 && coords.size() > max_coords) {
            std::shuffle(coords.begin(), coords.end(), *rng);
            coords.resize(max_coords);
        }
        for (std::size_t k : coords) {
            const double saved = values[k];
            values[k] = saved + step;
            const double plus = loss_fn().item();
            values[k] = saved - step;
            const double minus = loss_fn().item();
            values[k] = saved;
            const double numeric = (plus - minus) / (2.0 * step);
            result.max_rel_error = std::max(result.max_rel_error, relative_error(analytic[t][k], numeric));
            ++result.coordinates;
        }
    }
    return result;
}

} // namespace ncc::verify

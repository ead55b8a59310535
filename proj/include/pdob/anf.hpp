#pragma once

// Adaptive notch filter: a constrained notch whose coefficient xi adapts by
// regularized recursive least squares at a slow multi-rate tick, recovering
// the tone frequency as acos(-xi/2)/T. A batch closed-form solver of the same
// exponentially weighted cost is provided as an independent reference.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>

#include "pdob/signal.hpp"

namespace pdob {

struct AnfConfig {
    double notch_r = 0.7;          // 0 < r < 1
    int multirate = 10;            // slow tick every kappa fast samples
    double forgetting = 0.999;     // 0 < lambda < 1
    double regularization = 1000;  // delta > 0
    double init_omega = 0.0;       // rad/s
    double sample_time = 0.0;      // fast-rate period, s
};

inline AnfConfig make_anf_config(double notch_r, int multirate, double forgetting,
                                 double regularization, double init_omega, double sample_time) {
    if (!(notch_r > 0.0 && notch_r < 1.0)) {
        throw std::invalid_argument("make_anf_config: notch parameter requires 0 < r < 1");
    }
    if (multirate < 1) {
        throw std::invalid_argument("make_anf_config: multi-rate ratio requires 0 < kappa");
    }
    if (!(forgetting > 0.0 && forgetting < 1.0)) {
        throw std::invalid_argument("make_anf_config: forgetting factor requires 0 < lambda < 1");
    }
    if (!(regularization > 0.0)) {
        throw std::invalid_argument("make_anf_config: regularization requires 0 < delta");
    }
    if (!(sample_time > 0.0)) {
        throw std::invalid_argument("make_anf_config: sample_time must be positive");
    }
    if (!(init_omega > 0.0) || init_omega * sample_time >= std::numbers::pi) {
        throw std::invalid_argument("make_anf_config: initial frequency must lie in (0, Nyquist)");
    }
    return {notch_r, multirate, forgetting, regularization, init_omega, sample_time};
}

/// Scalar RLS on the model eta = alpha * xi, with forgetting factor baked in.
/// Kept free of the Table-style range checks so the convergence analysis
/// (lambda = 1, delta = 0) can drive it directly.
struct XiRls {
    double xi = 0.0;
    double gain_p = 0.0;  // inverse-correlation scalar P
    double forgetting = 1.0;

    void apply(double alpha, double error) {
        const double g = gain_p * alpha / (forgetting + gain_p * alpha * alpha);
        xi += g * error;
        gain_p = (gain_p - g * alpha * gain_p) / forgetting;
    }

    void update(double alpha, double target) { apply(alpha, target - alpha * xi); }
};

inline double frequency_of_xi(double xi, double sample_time) {
    const double arg = std::clamp(-0.5 * xi, -1.0 + 1e-9, 1.0 - 1e-9);
    return std::acos(arg) / sample_time;
}

struct AnfState {
    NotchFilter notch;
    XiRls rls;
    std::int64_t fast_index = 0;
    std::int64_t slow_index = 0;
    double last_estimate = 0.0;  // latest omega_tilde, rad/s

    AnfState(const AnfConfig& cfg)
        : notch(cfg.notch_r, -2.0 * std::cos(cfg.init_omega * cfg.sample_time)),
          last_estimate(cfg.init_omega) {
        rls.xi = notch.xi();
        rls.gain_p = 1.0 / cfg.regularization;
        rls.forgetting = cfg.forgetting;
    }
};

inline AnfState anf_init(const AnfConfig& cfg) {
    // re-validate so directly aggregate-built configs fail loudly too
    make_anf_config(cfg.notch_r, cfg.multirate, cfg.forgetting, cfg.regularization,
                    cfg.init_omega, cfg.sample_time);
    return AnfState(cfg);
}

/// Fast-rate step. Runs the notch recurrences every sample; every kappa-th
/// sample runs the RLS correction against the ideal-notch target eta = 0 and
/// returns a fresh frequency estimate, otherwise returns nothing.
inline std::optional<double> anf_step(AnfState& state, const AnfConfig& cfg, double d_tilde) {
    const double eta_hat = state.notch.step(d_tilde);
    ++state.fast_index;
    if (state.fast_index % cfg.multirate != 0) {
        return std::nullopt;
    }
    const double alpha = state.notch.alpha();
    const double error = 0.0 - eta_hat;
    state.rls.apply(alpha, error);
    state.notch.set_xi(state.rls.xi);
    ++state.slow_index;
    state.last_estimate = frequency_of_xi(state.rls.xi, cfg.sample_time);
    return state.last_estimate;
}

/// Closed-form minimizer of the exponentially weighted, regularized cost over
/// a recorded regressor stream:
///   xi(h) = P(h) * { sum_n lambda^{h-n} alpha(n) t(n) + delta lambda^h xi0 }
///   P(h)  = 1 / { sum_n lambda^{h-n} alpha(n)^2 + delta lambda^h }
/// with targets t(n) = eta(n) - beta(n). prior_xi = 0 reproduces the plain
/// regularizer; a nonzero prior matches a warm-started recursion.
inline double batch_xi_estimate(std::span<const double> alphas, std::span<const double> targets,
                                double forgetting, double regularization, double prior_xi = 0.0) {
    if (alphas.empty()) {
        throw std::invalid_argument("batch_xi_estimate: needs at least one sample (h >= 1)");
    }
    if (alphas.size() != targets.size()) {
        throw std::invalid_argument("batch_xi_estimate: regressor/target length mismatch");
    }
    double weighted_corr = regularization * prior_xi;
    double weighted_energy = regularization;
    for (std::size_t n = 0; n < alphas.size(); ++n) {
        weighted_corr = forgetting * weighted_corr + alphas[n] * targets[n];
        weighted_energy = forgetting * weighted_energy + alphas[n] * alphas[n];
    }
    return weighted_corr / weighted_energy;
}

}  // namespace pdob

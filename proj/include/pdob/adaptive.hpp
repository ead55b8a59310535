#pragma once

// Adaptive observer composition: the band-pass isolates the fundamental from
// the observer's raw disturbance image, the ANF estimates its frequency, a
// slow-rate low-pass smooths the estimate, and the observer delay plus the
// band-pass center retune to the smoothed value.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <stdexcept>

#include "pdob/anf.hpp"
#include "pdob/observer.hpp"
#include "pdob/signal.hpp"

namespace pdob {

struct FrequencyEstimatorConfig {
    AnfConfig anf;
    double smoothing_cutoff = 1.0;  // g_a, rad/s, applied at the slow rate
    double bandpass_width = 1.0;    // g_b, rad/s
    double omega_min = 0.0;         // rad/s
    double omega_max = 0.0;         // rad/s
};

inline FrequencyEstimatorConfig make_frequency_estimator_config(const AnfConfig& anf,
                                                                double smoothing_cutoff,
                                                                double bandpass_width,
                                                                double omega_min = 0.0,
                                                                double omega_max = 0.0) {
    // default bounds: an octave guard around the initial frequency, so the
    // estimator cannot lock onto the second harmonic
    if (omega_min == 0.0) omega_min = 0.5 * anf.init_omega;
    if (omega_max == 0.0) omega_max = 2.0 * anf.init_omega;
    if (!(omega_min > 0.0) || !(omega_max > omega_min)) {
        throw std::invalid_argument("frequency estimator: requires 0 < omega_min < omega_max");
    }
    if (omega_max * anf.sample_time >= std::numbers::pi) {
        throw std::invalid_argument("frequency estimator: omega_max must stay below Nyquist");
    }
    if (anf.init_omega < omega_min || anf.init_omega > omega_max) {
        throw std::invalid_argument("frequency estimator: initial frequency outside [omega_min, omega_max]");
    }
    if (!(smoothing_cutoff > 0.0) || !(bandpass_width > 0.0)) {
        throw std::invalid_argument("frequency estimator: smoothing cutoff and band-pass width must be positive");
    }
    return {anf, smoothing_cutoff, bandpass_width, omega_min, omega_max};
}

/// Band-pass + ANF + slow-rate smoother with bounded output; the band-pass
/// center follows the smoothed estimate with its state kept.
struct FrequencyEstimator {
    BandPassResonator bandpass;
    AnfState anf;
    FirstOrderLowPass smoother;  // seeded at the initial frequency, not zero
    double omega_hat;
    double last_d_tilde = 0.0;
    bool clamped = false;

    FrequencyEstimator(const FrequencyEstimatorConfig& cfg)
        : bandpass(cfg.anf.init_omega, cfg.bandpass_width, cfg.anf.sample_time),
          anf(cfg.anf),
          smoother(cfg.smoothing_cutoff,
                   cfg.anf.sample_time * static_cast<double>(cfg.anf.multirate),
                   cfg.anf.init_omega),
          omega_hat(cfg.anf.init_omega) {}
};

inline FrequencyEstimator make_frequency_estimator(const FrequencyEstimatorConfig& cfg) {
    anf_init(cfg.anf);  // range validation
    return FrequencyEstimator(cfg);
}

struct EstimateUpdate {
    std::optional<double> omega_tilde;  // raw ANF output, present at slow ticks
    double omega_hat = 0.0;             // smoothed, bounded estimate
};

inline EstimateUpdate estimator_step(FrequencyEstimator& est, const FrequencyEstimatorConfig& cfg,
                                     double input) {
    est.last_d_tilde = est.bandpass.step(input);
    EstimateUpdate update;
    update.omega_tilde = anf_step(est.anf, cfg.anf, est.last_d_tilde);
    if (update.omega_tilde) {
        const double smoothed = est.smoother.step(*update.omega_tilde);
        const double bounded = std::clamp(smoothed, cfg.omega_min, cfg.omega_max);
        est.clamped = bounded != smoothed;
        est.omega_hat = bounded;
        est.bandpass.retune(bounded);
    }
    update.omega_hat = est.omega_hat;
    return update;
}

// ---------------------------------------------------------------------------
// Observer + estimator composition
// ---------------------------------------------------------------------------

struct AdaptivePdobConfig {
    PdobConfig pdob;
    FrequencyEstimatorConfig estimator;
    int delay_capacity = 0;  // sized for omega_min, fixed for the state's lifetime
};

inline AdaptivePdobConfig make_adaptive_pdob_config(const PdobConfig& pdob,
                                                    const FrequencyEstimatorConfig& estimator) {
    if (pdob.sample_time != estimator.anf.sample_time) {
        throw std::invalid_argument("make_adaptive_pdob_config: observer and estimator sample times differ");
    }
    if (pdob.omega0 != estimator.anf.init_omega) {
        throw std::invalid_argument("make_adaptive_pdob_config: observer fundamental and estimator seed differ");
    }
    AdaptivePdobConfig cfg{pdob, estimator, 0};
    cfg.delay_capacity =
        compute_delay_n(estimator.omega_min, pdob.cutoff, pdob.gamma, pdob.sample_time);
    return cfg;
}

struct AdaptivePdobState {
    PdobState pdob;
    FrequencyEstimator estimator;

    AdaptivePdobState(const AdaptivePdobConfig& cfg)
        : pdob(make_pdob_state(cfg.pdob, cfg.delay_capacity)),
          estimator(make_frequency_estimator(cfg.estimator)) {}
};

inline AdaptivePdobState make_adaptive_pdob_state(const AdaptivePdobConfig& cfg) {
    return AdaptivePdobState(cfg);
}

/// Moves the estimator and the observer delay to a new fundamental. Out-of-
/// bounds requests are clamped and flagged. The delay line is re-read at the
/// new offset with its history preserved; the band-pass keeps its state.
inline void retune(AdaptivePdobState& state, const AdaptivePdobConfig& cfg, double new_omega) {
    const double bounded = std::clamp(new_omega, cfg.estimator.omega_min, cfg.estimator.omega_max);
    state.estimator.clamped = bounded != new_omega;
    state.estimator.omega_hat = bounded;
    state.estimator.bandpass.retune(bounded);
    state.pdob.active_delay =
        compute_delay_n(bounded, cfg.pdob.cutoff, cfg.pdob.gamma, cfg.pdob.sample_time);
}

struct AdaptiveStepResult {
    double d_hat = 0.0;     // compensation estimate
    double omega_hat = 0.0; // current smoothed fundamental
};

/// One sample of the adaptive observer: estimate with the current delay, feed
/// the raw image through the band-pass and ANF, and on each slow tick retune
/// the delay and band-pass center to the smoothed frequency.
inline AdaptiveStepResult adaptive_pdob_step(AdaptivePdobState& state,
                                             const AdaptivePdobConfig& cfg, double u,
                                             double y_inv) {
    const double d_hat = pdob_step(state.pdob, cfg.pdob, u, y_inv);
    const EstimateUpdate update = estimator_step(state.estimator, cfg.estimator, state.pdob.last_raw);
    if (update.omega_tilde) {
        state.pdob.active_delay = compute_delay_n(state.estimator.omega_hat, cfg.pdob.cutoff,
                                                  cfg.pdob.gamma, cfg.pdob.sample_time);
    }
    return {d_hat, state.estimator.omega_hat};
}

}  // namespace pdob

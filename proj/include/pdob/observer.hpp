#pragma once

// Periodic-disturbance observer: Q-filter with an embedded one-period delay,
// delay-length design, frequency-response tooling, small-gain margin check,
// and the time-domain estimation step.

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <limits>
#include <numbers>
#include <span>
#include <stdexcept>
#include <vector>

#include "pdob/signal.hpp"

namespace pdob {

struct DelayDesign {
    double corrected_raw = 0.0;    // (2*pi*g*gamma - w0) / (T*g*w0*gamma)
    int corrected = 0;
    double uncorrected_raw = 0.0;  // 2*pi / (T*w0)
    int uncorrected = 0;
};

/// Delay length for the Q-filter. The corrected value moves the band-stops
/// back onto the harmonics by absorbing the low-pass phase at the fundamental;
/// the plain period count is kept for diagnostics.
inline DelayDesign delay_design(double omega0, double cutoff, double gamma, double sample_time) {
    if (!(sample_time > 0.0)) {
        throw std::invalid_argument("delay_design: sample_time must be positive");
    }
    if (!(omega0 > 0.0) || !(cutoff > 0.0) || !(gamma > 0.0)) {
        throw std::invalid_argument("delay_design: omega0, cutoff, gamma must be positive");
    }
    DelayDesign d;
    d.uncorrected_raw = 2.0 * std::numbers::pi / (sample_time * omega0);
    d.uncorrected = static_cast<int>(std::lround(d.uncorrected_raw));
    const double numerator = 2.0 * std::numbers::pi * cutoff * gamma - omega0;
    if (!(numerator > 0.0)) {
        throw std::invalid_argument(
            "delay_design: requires 2*pi*cutoff*gamma > omega0 (corrected delay would not be positive)");
    }
    d.corrected_raw = numerator / (sample_time * cutoff * omega0 * gamma);
    d.corrected = static_cast<int>(std::lround(d.corrected_raw));
    if (d.corrected < 1) {
        throw std::invalid_argument("delay_design: corrected delay rounds below one sample");
    }
    return d;
}

inline int compute_delay_n(double omega0, double cutoff, double gamma, double sample_time) {
    return delay_design(omega0, cutoff, gamma, sample_time).corrected;
}

struct PdobConfig {
    double omega0 = 0.0;       // fundamental, rad/s
    double gamma = 0.0;        // delay-mix design parameter
    double cutoff = 0.0;       // q low-pass cutoff, rad/s
    double sample_time = 0.0;  // s
    int delay = 0;             // samples
    bool unity_q = false;      // analysis mode: q(z) == 1
};

inline PdobConfig make_pdob_config(double omega0, double gamma, double cutoff,
                                   double sample_time, bool unity_q = false) {
    if (!(omega0 > 0.0)) throw std::invalid_argument("make_pdob_config: omega0 must be positive");
    if (!(gamma > 0.0 && gamma <= 1.0)) throw std::invalid_argument("make_pdob_config: requires 0 < gamma <= 1");
    if (!(cutoff > 0.0)) throw std::invalid_argument("make_pdob_config: cutoff must be positive");
    if (!(sample_time > 0.0)) throw std::invalid_argument("make_pdob_config: sample_time must be positive");
    PdobConfig cfg{omega0, gamma, cutoff, sample_time, 0, unity_q};
    const DelayDesign d = delay_design(omega0, cutoff, gamma, sample_time);
    cfg.delay = unity_q ? d.uncorrected : d.corrected;
    return cfg;
}

namespace detail {

/// Backward-difference realization of the first-order q at z = e^{j w T}.
/// The denominator is grouped as a + (1-a)(1 - z^-1) so the DC gain is
/// exactly one in floating point.
inline std::complex<double> discrete_lpf_response(double cutoff, double sample_time, double omega) {
    const double a = cutoff * sample_time / (1.0 + cutoff * sample_time);
    const std::complex<double> z1 = std::polar(1.0, -omega * sample_time);
    return a / (a + (1.0 - a) * (1.0 - z1));
}

}  // namespace detail

/// Q(e^{-jwT}) = q(e^{-jwT}) * {1 - gamma*(1 - e^{-jwTN})}, evaluated with the
/// shipped discrete q realization (or q == 1 in unity_q mode).
inline std::complex<double> q_filter_response(const PdobConfig& cfg, double omega) {
    const std::complex<double> delay_term =
        std::polar(1.0, -omega * cfg.sample_time * static_cast<double>(cfg.delay));
    const std::complex<double> mix = 1.0 - cfg.gamma * (1.0 - delay_term);
    if (cfg.unity_q) {
        return mix;
    }
    return detail::discrete_lpf_response(cfg.cutoff, cfg.sample_time, omega) * mix;
}

inline std::complex<double> sensitivity_response(const PdobConfig& cfg, double omega) {
    const std::complex<double> z1 = std::polar(1.0, -omega * cfg.sample_time);
    return 1.0 - q_filter_response(cfg, omega) * z1;
}

inline std::complex<double> complementary_response(const PdobConfig& cfg, double omega) {
    const std::complex<double> z1 = std::polar(1.0, -omega * cfg.sample_time);
    return q_filter_response(cfg, omega) * z1;
}

inline double sensitivity_gain(const PdobConfig& cfg, double omega) {
    return std::abs(sensitivity_response(cfg, omega));
}

inline double complementary_gain(const PdobConfig& cfg, double omega) {
    return std::abs(complementary_response(cfg, omega));
}

struct FrequencyResponsePoint {
    double omega = 0.0;
    double sensitivity_mag = 0.0;
    double complementary_mag = 0.0;
};

inline FrequencyResponsePoint frequency_response_point(const PdobConfig& cfg, double omega) {
    return {omega, sensitivity_gain(cfg, omega), complementary_gain(cfg, omega)};
}

// ---------------------------------------------------------------------------
// Design-mode responses: q == 1, the causality z^-1 neglected, and the delay
// treated as the exact (real-valued) period count 2*pi/(w0*T). This is the
// algebra behind the gamma choice: |1-Q| = 2*gamma*|sin(pi w/w0)| and
// |Q| = sqrt(1 + 4*gamma*(gamma-1)*sin^2(pi w/w0)).
// ---------------------------------------------------------------------------

inline std::complex<double> ideal_q_response(double gamma, double omega_over_omega0) {
    const double theta = 2.0 * std::numbers::pi * omega_over_omega0;
    return 1.0 - gamma * (1.0 - std::polar(1.0, -theta));
}

inline double ideal_sensitivity_gain(double gamma, double omega_over_omega0) {
    return std::abs(1.0 - ideal_q_response(gamma, omega_over_omega0));
}

inline double ideal_complementary_gain(double gamma, double omega_over_omega0) {
    return std::abs(ideal_q_response(gamma, omega_over_omega0));
}

/// Residual gain at the fundamental as a function of mu = w0/g alone,
/// for gamma = 0.5 and the corrected delay. Used to pick the lower limit
/// of the cutoff from a precision target.
inline double fundamental_suppression_gain(double omega0, double cutoff) {
    if (!(cutoff > 0.0)) {
        throw std::invalid_argument("fundamental_suppression_gain: cutoff must be positive");
    }
    const double mu = omega0 / cutoff;
    // the numerator is O(mu^4) and cancels below ~1e-8; clamp the rounding dust
    const double num =
        std::max(0.0, (1.0 - std::cos(2.0 * mu)) + 2.0 * mu * (mu - std::sin(2.0 * mu)));
    return std::sqrt(num / (2.0 * (1.0 + mu * mu)));
}

struct MarginReport {
    double margin = std::numeric_limits<double>::infinity();  // min 1/(|W||Q z^-1|)
    double worst_omega = 0.0;
    bool small_gain_ok = true;   // sup |W Q z^-1| < 1
    bool sufficient_ok = true;   // |g/(g+jw)| < 1/|W| on the grid (delay ignored)
};

inline MarginReport robust_stability_margin(const PdobConfig& cfg,
                                            const std::function<double(double)>& weight,
                                            std::span<const double> grid) {
    if (grid.empty()) {
        throw std::invalid_argument("robust_stability_margin: empty frequency grid");
    }
    MarginReport report;
    for (double omega : grid) {
        const double w_mag = weight(omega);
        const double loop = w_mag * complementary_gain(cfg, omega);
        const double margin = loop > 0.0 ? 1.0 / loop : std::numeric_limits<double>::infinity();
        if (margin < report.margin) {
            report.margin = margin;
            report.worst_omega = omega;
        }
        if (loop >= 1.0) {
            report.small_gain_ok = false;
        }
        const double q_cont = cfg.unity_q
                                  ? 1.0
                                  : std::abs(cfg.cutoff / std::complex<double>(cfg.cutoff, omega));
        if (w_mag * q_cont >= 1.0) {
            report.sufficient_ok = false;
        }
    }
    return report;
}

// ---------------------------------------------------------------------------
// Time-domain estimation
// ---------------------------------------------------------------------------

struct PdobState {
    DelayLine history;      // raw-estimate ring, sized for the smallest expected w0
    FirstOrderLowPass q;
    int active_delay;       // live delay; retuned by the adaptive layer
    double prev_input = 0.0;
    double last_raw = 0.0;       // eps(k): the pre-Q disturbance image
    double last_estimate = 0.0;  // d_hat_p(k)

    PdobState(const PdobConfig& cfg, int capacity)
        : history(static_cast<std::size_t>(capacity)),
          q(cfg.cutoff, cfg.sample_time),
          active_delay(cfg.delay) {}
};

inline PdobState make_pdob_state(const PdobConfig& cfg, int capacity = 0) {
    if (capacity == 0) {
        capacity = cfg.delay;
    }
    if (capacity < cfg.delay) {
        throw std::invalid_argument("make_pdob_state: capacity shorter than the configured delay");
    }
    return PdobState(cfg, capacity);
}

/// One estimation step. eps(k) = y_inv(k) - u(k-1) is the raw disturbance
/// image; the estimate is q applied to (1-gamma)*eps(k) + gamma*eps(k-N).
/// The u passed here is stored as u(k-1) for the next call.
inline double pdob_step(PdobState& state, const PdobConfig& cfg, double u, double y_inv) {
    if (static_cast<std::size_t>(state.active_delay) > state.history.capacity()) {
        throw std::invalid_argument("pdob_step: delay line shorter than the active delay");
    }
    const double eps = y_inv - state.prev_input;
    state.prev_input = u;
    const double eps_delayed = state.history.read(static_cast<std::size_t>(state.active_delay));
    state.history.push(eps);
    const double mixed = (1.0 - cfg.gamma) * eps + cfg.gamma * eps_delayed;
    state.last_raw = eps;
    state.last_estimate = cfg.unity_q ? mixed : state.q.step(mixed);
    return state.last_estimate;
}

// ---------------------------------------------------------------------------
// Nominal stability probe
// ---------------------------------------------------------------------------

struct FirstOrderNominalPlant {
    double pole = 0.9;  // y(k) = pole*y(k-1) + gain*u(k-1)
    double gain = 0.1;
};

struct StabilityProbeEntry {
    int delay = 0;
    double max_amplitude = 0.0;
    bool bounded = false;
};

struct StabilityVerdict {
    bool all_bounded = true;
    std::vector<StabilityProbeEntry> per_delay;
};

/// Runs the nominal closed loop (no modeling error, exact plant inverse) on a
/// disturbance impulse for several delay lengths and reports boundedness.
/// Accepts a raw cutoff, including non-positive values, so a deliberately
/// unstable q can be fed to validate the detector.
inline StabilityVerdict nominal_stability_probe(const PdobConfig& cfg,
                                                FirstOrderNominalPlant plant,
                                                std::span<const int> delays) {
    StabilityVerdict verdict;
    const double a = cfg.cutoff * cfg.sample_time / (1.0 + cfg.cutoff * cfg.sample_time);
    for (int n : delays) {
        const long steps = std::max<long>(5L * n, 2000L);
        DelayLine eps_history(static_cast<std::size_t>(std::max(n, 1)));
        double y = 0.0, y_prev = 0.0, u_prev = 0.0, q_state = 0.0;
        double peak = 0.0;
        bool finite = true;
        std::vector<double> abs_y;
        abs_y.reserve(static_cast<std::size_t>(steps));
        for (long k = 0; k < steps; ++k) {
            const double d = (k == 0) ? 1.0 : 0.0;
            y = plant.pole * y_prev + plant.gain * (u_prev + d);
            const double u_total = (y - plant.pole * y_prev) / plant.gain;  // exact inverse
            const double eps = u_total - u_prev;
            const double eps_delayed = eps_history.read(static_cast<std::size_t>(n));
            eps_history.push(eps);
            const double mixed = (1.0 - cfg.gamma) * eps + cfg.gamma * eps_delayed;
            q_state += a * (mixed - q_state);
            const double d_hat = q_state;
            u_prev = -d_hat;
            y_prev = y;
            const double mag = std::abs(y);
            abs_y.push_back(mag);
            peak = std::max(peak, mag);
            if (!std::isfinite(y) || mag > 1e12) {
                finite = false;
                break;
            }
        }
        bool bounded = finite;
        if (bounded) {
            // non-growing: the final 20% must not exceed the peak seen before it
            const std::size_t tail_start = abs_y.size() - abs_y.size() / 5;
            double head_peak = 0.0, tail_peak = 0.0;
            for (std::size_t i = 0; i < tail_start; ++i) {
                head_peak = std::max(head_peak, abs_y[i]);
            }
            for (std::size_t i = tail_start; i < abs_y.size(); ++i) {
                tail_peak = std::max(tail_peak, abs_y[i]);
            }
            bounded = tail_peak <= head_peak + 1e-12;
        }
        verdict.per_delay.push_back({n, peak, bounded});
        verdict.all_bounded = verdict.all_bounded && bounded;
    }
    return verdict;
}

}  // namespace pdob

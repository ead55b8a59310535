#pragma once

// Discrete-time primitives shared by the observer, estimator, and simulation
// code: delay line, first-order low-pass, resonant band-pass, constrained
// notch, pseudo-differentiator, fixed-frequency DFT and RMSE helpers.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace pdob {

/// Ring buffer of past samples. read(n) returns the sample pushed exactly
/// n pushes ago (1 <= n <= capacity); history is zero before it is written.
class DelayLine {
public:
    explicit DelayLine(std::size_t capacity)
        : buffer_(capacity, 0.0) {
        if (capacity == 0) {
            throw std::invalid_argument("DelayLine: capacity must be positive");
        }
    }

    void push(double x) {
        buffer_[write_index_] = x;
        write_index_ = (write_index_ + 1) % buffer_.size();
    }

    double read(std::size_t n_ago) const {
        if (n_ago < 1 || n_ago > buffer_.size()) {
            throw std::invalid_argument("DelayLine: read offset out of range [1, capacity]");
        }
        const std::size_t idx = (write_index_ + buffer_.size() - n_ago) % buffer_.size();
        return buffer_[idx];
    }

    std::size_t capacity() const { return buffer_.size(); }

    void clear() {
        std::fill(buffer_.begin(), buffer_.end(), 0.0);
        write_index_ = 0;
    }

private:
    std::vector<double> buffer_;
    std::size_t write_index_ = 0;
};

/// First-order low-pass, backward-difference mapping of g/(g+s).
/// y(k) = y(k-1) + a*(x(k) - y(k-1)) with a = g*T/(1 + g*T); the fixed point
/// of the recursion is exactly the input, so DC gain is 1 in the coefficients.
class FirstOrderLowPass {
public:
    FirstOrderLowPass(double cutoff, double sample_time, double initial_state = 0.0)
        : state_(initial_state) {
        if (!(cutoff > 0.0)) {
            throw std::invalid_argument("FirstOrderLowPass: cutoff must be positive");
        }
        if (!(sample_time > 0.0)) {
            throw std::invalid_argument("FirstOrderLowPass: sample_time must be positive");
        }
        coeff_ = cutoff * sample_time / (1.0 + cutoff * sample_time);
    }

    // Non-finite input poisons the filter; it refuses further samples until reset().
    double step(double x) {
        if (poisoned_) {
            throw std::invalid_argument("FirstOrderLowPass: poisoned by non-finite input, reset() required");
        }
        if (!std::isfinite(x)) {
            poisoned_ = true;
            throw std::invalid_argument("FirstOrderLowPass: non-finite input");
        }
        state_ += coeff_ * (x - state_);
        return state_;
    }

    void reset(double state = 0.0) {
        state_ = state;
        poisoned_ = false;
    }

    double state() const { return state_; }
    double coeff() const { return coeff_; }
    bool poisoned() const { return poisoned_; }

private:
    double state_;
    double coeff_;
    bool poisoned_ = false;
};

/// Squared resonator band-pass B(s) = {g_b*s / (s^2 + g_b*s + w0^2)}^2,
/// two identical second-order sections discretized by the bilinear transform
/// with frequency prewarping at the center, so the gain there is exactly 1.
/// Each section is realized as a trapezoidal state-variable filter: its states
/// are the integrator outputs, which stay physically meaningful when the
/// coefficients change, so retune() keeps state and the output drifts smoothly
/// instead of ringing while the center frequency tracks an estimate.
class BandPassResonator {
public:
    BandPassResonator(double center, double width, double sample_time)
        : sample_time_(sample_time), width_(width) {
        if (!(sample_time > 0.0)) {
            throw std::invalid_argument("BandPassResonator: sample_time must be positive");
        }
        if (!(width > 0.0)) {
            throw std::invalid_argument("BandPassResonator: width must be positive");
        }
        set_coefficients(center);
    }

    void retune(double center) { set_coefficients(center); }

    double step(double x) {
        const double y1 = section_step(sections_[0], x);
        return section_step(sections_[1], y1);
    }

    double center() const { return center_; }

    /// Continuous-frequency magnitude of one second-order section; the full
    /// filter response is this squared.
    static double section_gain(double omega, double center, double width) {
        const std::complex<double> jw(0.0, omega);
        const std::complex<double> den = center * center - omega * omega + jw * width;
        return std::abs(jw * width / den);
    }

private:
    struct Section {
        double s1 = 0.0, s2 = 0.0;
    };

    void set_coefficients(double center) {
        if (!(center > 0.0) || center >= std::numbers::pi / sample_time_) {
            throw std::invalid_argument("BandPassResonator: center must lie in (0, pi/sample_time)");
        }
        center_ = center;
        g_ = std::tan(0.5 * center * sample_time_);
        two_r_ = width_ / center;
        inv_a0_ = 1.0 / (1.0 + two_r_ * g_ + g_ * g_);
    }

    double section_step(Section& s, double x) {
        const double hp = (x - (two_r_ + g_) * s.s1 - s.s2) * inv_a0_;
        const double bp = g_ * hp + s.s1;
        s.s1 = g_ * hp + bp;
        const double lp = g_ * bp + s.s2;
        s.s2 = g_ * bp + lp;
        return two_r_ * bp;  // normalizes the resonance peak to unity
    }

    double sample_time_;
    double width_;
    double center_ = 0.0;
    double g_ = 0.0;       // tan(center * T / 2): prewarped integrator gain
    double two_r_ = 0.0;   // width / center: section damping
    double inv_a0_ = 0.0;
    Section sections_[2];
};

/// Constrained second-order notch
///   eta(k) = alpha(k)*xi + beta(k)
///   alpha(k) = -r*eta(k-1) + d(k-1)
///   beta(k)  = -r^2*eta(k-2) + d(k) + d(k-2)
/// i.e. (1 + xi z^-1 + z^-2) / (1 + r xi z^-1 + r^2 z^-2). With
/// xi = -2cos(w*T) the zeros sit on the unit circle at the tone frequency.
/// alpha() exposes the latest regressor for the RLS consumer.
class NotchFilter {
public:
    NotchFilter(double r, double xi) : r_(r), xi_(xi) {
        if (!(r > 0.0 && r < 1.0)) {
            throw std::invalid_argument("NotchFilter: requires 0 < r < 1");
        }
        if (!(xi > -2.0 && xi < 2.0)) {
            throw std::invalid_argument("NotchFilter: requires -2 < xi < 2");
        }
    }

    double step(double d) {
        if (!std::isfinite(d)) {
            throw std::invalid_argument("NotchFilter: non-finite input");
        }
        alpha_ = -r_ * eta1_ + d1_;
        const double beta = -r_ * r_ * eta2_ + d + d2_;
        const double eta = alpha_ * xi_ + beta;
        d2_ = d1_;
        d1_ = d;
        eta2_ = eta1_;
        eta1_ = eta;
        return eta;
    }

    double alpha() const { return alpha_; }
    double xi() const { return xi_; }
    double r() const { return r_; }

    // Coefficient update used by the adaptive loop; histories are kept.
    void set_xi(double xi) { xi_ = xi; }

    /// Steady-state complex gain at angular frequency omega (rad/s).
    static std::complex<double> response(double r, double xi, double omega, double sample_time) {
        const std::complex<double> z1 = std::polar(1.0, -omega * sample_time);
        const std::complex<double> z2 = z1 * z1;
        return (1.0 + xi * z1 + z2) / (1.0 + r * xi * z1 + r * r * z2);
    }

private:
    double r_;
    double xi_;
    double d1_ = 0.0, d2_ = 0.0;
    double eta1_ = 0.0, eta2_ = 0.0;
    double alpha_ = 0.0;
};

/// Backward difference cascaded with a first-order low-pass; the causal
/// stand-in for d/dt used by the PD controller and the inverse plant.
class PseudoDifferentiator {
public:
    PseudoDifferentiator(double sample_time, double cutoff = 1000.0)
        : inv_dt_(1.0 / sample_time), lpf_(cutoff, sample_time) {
        if (!(sample_time > 0.0)) {
            throw std::invalid_argument("PseudoDifferentiator: sample_time must be positive");
        }
    }

    double step(double x) {
        const double raw = (x - prev_) * inv_dt_;
        prev_ = x;
        return lpf_.step(raw);
    }

    void reset() {
        prev_ = 0.0;
        lpf_.reset();
    }

private:
    double inv_dt_;
    FirstOrderLowPass lpf_;
    double prev_ = 0.0;
};

struct Spectrum {
    std::vector<double> frequencies;  // rad/s
    std::vector<double> magnitudes;   // amplitude per requested frequency
};

/// Single-sided amplitude at the requested frequencies via direct correlation
/// over the window [t_start, t_end). Exact for tones spanning an integer
/// number of periods; no windowing beyond the rectangular cut.
inline Spectrum dft_magnitude(std::span<const double> trace, double sample_time,
                              double t_start, double t_end,
                              std::span<const double> frequencies) {
    if (!(sample_time > 0.0)) {
        throw std::invalid_argument("dft_magnitude: sample_time must be positive");
    }
    const auto k_start = static_cast<std::ptrdiff_t>(std::llround(t_start / sample_time));
    const auto k_end = static_cast<std::ptrdiff_t>(std::llround(t_end / sample_time));
    if (k_start < 0 || k_end > static_cast<std::ptrdiff_t>(trace.size()) || k_end <= k_start) {
        throw std::invalid_argument("dft_magnitude: window empty or outside trace");
    }
    const double nyquist = std::numbers::pi / sample_time;
    Spectrum result;
    result.frequencies.assign(frequencies.begin(), frequencies.end());
    result.magnitudes.reserve(frequencies.size());
    const auto count = static_cast<double>(k_end - k_start);
    for (double omega : frequencies) {
        if (!(omega >= 0.0) || omega >= nyquist) {
            throw std::invalid_argument("dft_magnitude: frequency outside [0, Nyquist)");
        }
        double re = 0.0;
        double im = 0.0;
        // Incremental rotation keeps this O(n) per frequency without sin/cos per sample.
        const double theta = omega * sample_time;
        const double c = std::cos(theta);
        const double s = std::sin(theta);
        double cr = std::cos(theta * static_cast<double>(k_start));
        double ci = -std::sin(theta * static_cast<double>(k_start));
        for (std::ptrdiff_t k = k_start; k < k_end; ++k) {
            re += trace[static_cast<std::size_t>(k)] * cr;
            im += trace[static_cast<std::size_t>(k)] * ci;
            const double next_r = cr * c + ci * s;
            ci = ci * c - cr * s;
            cr = next_r;
        }
        const double scale = (omega == 0.0) ? 1.0 : 2.0;
        result.magnitudes.push_back(scale * std::hypot(re, im) / count);
    }
    return result;
}

inline double rmse(std::span<const double> trace, std::span<const double> reference) {
    if (trace.size() != reference.size()) {
        throw std::invalid_argument("rmse: length mismatch");
    }
    if (trace.empty()) {
        throw std::invalid_argument("rmse: empty input");
    }
    double acc = 0.0;
    for (std::size_t i = 0; i < trace.size(); ++i) {
        const double d = trace[i] - reference[i];
        acc += d * d;
    }
    return std::sqrt(acc / static_cast<double>(trace.size()));
}

inline double rms(std::span<const double> trace) {
    const std::vector<double> zeros(trace.size(), 0.0);
    return rmse(trace, zeros);
}

}  // namespace pdob

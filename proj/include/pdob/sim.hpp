#pragma once

// Closed-loop reproduction harness: discrete double-integrator plant under PD
// control with zero command, a multi-harmonic disturbance generator, the
// baseline compensators (classical DOB, plug-in repetitive controller), and
// the scripted experiments.
//
// Sign conventions. The plant realizes
//   x = (1/J) * (T/(1-z^-1))^2 * [ {Kt*I_ref + comp} z^-1 - d_p ],
// so a compensation torque comp(k) ~= d_p(k) cancels the disturbance. The
// observers reconstruct eps(k) = y_inv(k) - tau(k-1) ~= -d_p(k), hence the
// loop feeds comp = -estimate. Compensation always acts with a one-sample
// delay: comp(k) is built from signals up to k-1.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numbers>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "pdob/adaptive.hpp"
#include "pdob/anf.hpp"
#include "pdob/observer.hpp"
#include "pdob/signal.hpp"

namespace pdob {

struct SimParams {
    double sample_time = 1e-4;      // Tk, s
    double inertia = 0.0028;        // J, kg m^2
    double torque_constant = 1.18;  // Kt, N m / A

    double omega0 = 10.0;           // initial fundamental, rad/s
    double gamma = 0.7;
    double cutoff = 1000.0;         // q cutoff g, rad/s

    double notch_r = 0.7;
    int multirate = 10;
    double forgetting = 0.999;
    double regularization = 1000.0;
    double smoothing_cutoff = 1.0;  // g_a
    double bandpass_width = 1.0;    // g_b
    double omega_min = 0.0;         // 0: octave guard below omega0
    double omega_max = 0.0;         // 0: octave guard above omega0

    int harmonics = 20;
    double duration_s = 100.0;
    double dob_cutoff = 1000.0;
    double rc_cutoff = 1000.0;
    unsigned seed = 0;              // reserved for noise hooks (none by default)
};

// ---------------------------------------------------------------------------
// Plant, controller, disturbance
// ---------------------------------------------------------------------------

struct PlantDoubleIntegrator {
    double inertia;
    double torque_constant;
    double sample_time;
    double velocity = 0.0;
    double position = 0.0;
    double prev_torque = 0.0;

    PlantDoubleIntegrator(double J, double Kt, double Tk)
        : inertia(J), torque_constant(Kt), sample_time(Tk) {}
};

/// Advances one sample: the commanded torque Kt*I_ref + d_hat enters through
/// a one-sample delay, the disturbance d_p directly.
inline double plant_step(PlantDoubleIntegrator& plant, double i_ref, double d_hat, double d_p) {
    const double input = plant.prev_torque - d_p;
    plant.velocity += plant.sample_time / plant.inertia * input;
    plant.position += plant.sample_time * plant.velocity;
    plant.prev_torque = plant.torque_constant * i_ref + d_hat;
    return plant.position;
}

struct PdController {
    double inertia;
    double torque_constant;
    double kp = 2500.0;
    double kd = 100.0;
    PseudoDifferentiator diff;

    PdController(double J, double Kt, double Tk, double diff_cutoff = 1000.0)
        : inertia(J), torque_constant(Kt), diff(Tk, diff_cutoff) {}
};

inline double pd_controller_step(PdController& ctrl, double x) {
    return -(ctrl.inertia / ctrl.torque_constant) * (ctrl.kp * x + ctrl.kd * ctrl.diff.step(x));
}

/// Approximate inverse of the nominal double integrator: two cascaded
/// pseudo-differentiators scaled by the inertia, output in torque units.
struct InverseDoubleIntegrator {
    double inertia;
    PseudoDifferentiator d1;
    PseudoDifferentiator d2;

    InverseDoubleIntegrator(double J, double Tk, double diff_cutoff = 1000.0)
        : inertia(J), d1(Tk, diff_cutoff), d2(Tk, diff_cutoff) {}

    double step(double x) { return inertia * d2.step(d1.step(x)); }
};

/// d(k) = sum_n amp_n * sin(n * w0(k) * Tk * k) + d_a(k), with a piecewise-
/// constant fundamental schedule and an optional additive aperiodic hook;
/// the phase argument uses the current w0 and absolute time, matching the
/// scripted step experiments.
struct DisturbanceGenerator {
    int harmonics;
    double sample_time;
    std::vector<std::pair<double, double>> schedule;  // (start time s, omega0 rad/s)
    std::vector<double> amplitudes;                   // defaults to all ones
    std::function<double(std::int64_t)> aperiodic;    // d_a, zero when unset

    DisturbanceGenerator(int harmonic_count, double Tk, double omega0)
        : harmonics(harmonic_count), sample_time(Tk), schedule{{0.0, omega0}} {
        if (harmonic_count < 0) {
            throw std::invalid_argument("DisturbanceGenerator: negative harmonic count");
        }
        amplitudes.assign(static_cast<std::size_t>(harmonic_count), 1.0);
    }

    void add_step(double at_time, double omega0) { schedule.emplace_back(at_time, omega0); }

    double omega_at(std::int64_t k) const {
        const double t = sample_time * static_cast<double>(k);
        double omega = schedule.front().second;
        for (const auto& [start, value] : schedule) {
            if (t >= start) omega = value;
        }
        return omega;
    }

    double at(std::int64_t k) const {
        const double omega = omega_at(k);
        const double base = omega * sample_time * static_cast<double>(k);
        double d = 0.0;
        for (int n = 1; n <= harmonics; ++n) {
            d += amplitudes[static_cast<std::size_t>(n - 1)] * std::sin(static_cast<double>(n) * base);
        }
        return aperiodic ? d + aperiodic(k) : d;
    }
};

// ---------------------------------------------------------------------------
// Baseline compensators
// ---------------------------------------------------------------------------

/// Classical disturbance observer: Q is the first-order low-pass alone.
struct BaselineDob {
    FirstOrderLowPass q;
    double prev_input = 0.0;

    BaselineDob(double cutoff, double Tk) : q(cutoff, Tk) {}
};

inline double dob_step(BaselineDob& dob, double u, double y_inv) {
    const double eps = y_inv - dob.prev_input;
    dob.prev_input = u;
    return dob.q.step(eps);
}

/// Plug-in repetitive internal model v(k) = lpf{ v(k-N) + e(k-N) } with unit
/// internal-model gain (a = 1). The tracking error is expected in the same
/// units as the produced compensation.
struct BaselineRc {
    int period_delay;
    FirstOrderLowPass q;
    DelayLine comp_history;
    DelayLine error_history;

    BaselineRc(int delay_samples, double cutoff, double Tk)
        : period_delay(delay_samples),
          q(cutoff, Tk),
          comp_history(static_cast<std::size_t>(delay_samples)),
          error_history(static_cast<std::size_t>(delay_samples)) {
        if (delay_samples < 1) {
            throw std::invalid_argument("BaselineRc: period delay must be at least one sample");
        }
    }
};

inline double rc_step(BaselineRc& rc, double tracking_error) {
    const auto n = static_cast<std::size_t>(rc.period_delay);
    const double v = rc.q.step(rc.comp_history.read(n) + rc.error_history.read(n));
    rc.comp_history.push(v);
    rc.error_history.push(tracking_error);
    return v;
}

// ---------------------------------------------------------------------------
// Experiment records and runners
// ---------------------------------------------------------------------------

struct ExperimentRecord {
    std::string name;
    double sample_time = 0.0;
    std::vector<double> output;     // x_res
    std::vector<double> estimate;   // compensation torque trace
    std::vector<double> frequency;  // omega_hat trace (configured w0 for fixed methods)
    std::string config_echo;
};

enum class CompensatorKind { none, dob, rc, pdob, adaptive_pdob, oracle };

namespace detail {

inline FrequencyEstimatorConfig estimator_config_from(const SimParams& p) {
    const AnfConfig anf = make_anf_config(p.notch_r, p.multirate, p.forgetting,
                                          p.regularization, p.omega0, p.sample_time);
    return make_frequency_estimator_config(anf, p.smoothing_cutoff, p.bandpass_width,
                                           p.omega_min, p.omega_max);
}

struct LoopCompensator {
    CompensatorKind kind;
    const DisturbanceGenerator* oracle_source = nullptr;

    std::optional<BaselineDob> dob;
    std::optional<BaselineRc> rc;
    PdobConfig pdob_cfg{};
    std::optional<PdobState> pdob;
    AdaptivePdobConfig adaptive_cfg{};
    std::optional<AdaptivePdobState> adaptive;

    double comp_next = 0.0;
    double omega_now = 0.0;

    LoopCompensator(CompensatorKind k, const SimParams& p) : kind(k), omega_now(p.omega0) {
        switch (kind) {
            case CompensatorKind::dob:
                dob.emplace(p.dob_cutoff, p.sample_time);
                break;
            case CompensatorKind::rc: {
                const int n = static_cast<int>(
                    std::lround(2.0 * std::numbers::pi / (p.sample_time * p.omega0)));
                rc.emplace(n, p.rc_cutoff, p.sample_time);
                break;
            }
            case CompensatorKind::pdob:
                pdob_cfg = make_pdob_config(p.omega0, p.gamma, p.cutoff, p.sample_time);
                pdob.emplace(make_pdob_state(pdob_cfg));
                break;
            case CompensatorKind::adaptive_pdob: {
                const PdobConfig base = make_pdob_config(p.omega0, p.gamma, p.cutoff, p.sample_time);
                adaptive_cfg = make_adaptive_pdob_config(base, estimator_config_from(p));
                adaptive.emplace(make_adaptive_pdob_state(adaptive_cfg));
                break;
            }
            case CompensatorKind::none:
            case CompensatorKind::oracle:
                break;
        }
    }

    // called once per sample after the plant and inverse model have advanced
    void update(double tau, double y_inv, double u_c, std::int64_t k) {
        switch (kind) {
            case CompensatorKind::none:
                comp_next = 0.0;
                break;
            case CompensatorKind::oracle:
                // perfect feed: the compensation is buffered one sample and the
                // plant delays the torque by another, so cancel two ahead
                comp_next = oracle_source->at(k + 2);
                break;
            case CompensatorKind::dob:
                comp_next = -dob_step(*dob, tau, y_inv);
                break;
            case CompensatorKind::rc:
                // torque-equivalent tracking error: the PD torque minus the
                // inverse-model torque image, ~= d_p - v from one period ago
                comp_next = rc_step(*rc, u_c - y_inv);
                break;
            case CompensatorKind::pdob:
                comp_next = -pdob_step(*pdob, pdob_cfg, tau, y_inv);
                break;
            case CompensatorKind::adaptive_pdob: {
                const AdaptiveStepResult r = adaptive_pdob_step(*adaptive, adaptive_cfg, tau, y_inv);
                comp_next = -r.d_hat;
                omega_now = r.omega_hat;
                break;
            }
        }
    }
};

}  // namespace detail

/// Runs the zero-command PD loop for one compensator over the disturbance
/// schedule and records output, compensation, and frequency traces.
inline ExperimentRecord run_closed_loop(CompensatorKind kind, const SimParams& params,
                                        const DisturbanceGenerator& dgen, std::string name) {
    const auto steps = static_cast<std::int64_t>(std::llround(params.duration_s / params.sample_time));
    PlantDoubleIntegrator plant(params.inertia, params.torque_constant, params.sample_time);
    PdController controller(params.inertia, params.torque_constant, params.sample_time);
    InverseDoubleIntegrator inverse(params.inertia, params.sample_time);
    detail::LoopCompensator comp(kind, params);
    comp.oracle_source = &dgen;
    if (kind == CompensatorKind::oracle) {
        comp.comp_next = dgen.at(1);  // covers the first delayed plant input
    }

    ExperimentRecord record;
    record.name = std::move(name);
    record.sample_time = params.sample_time;
    record.output.reserve(static_cast<std::size_t>(steps));
    record.estimate.reserve(static_cast<std::size_t>(steps));
    record.frequency.reserve(static_cast<std::size_t>(steps));

    double x_meas = 0.0;
    for (std::int64_t k = 0; k < steps; ++k) {
        const double i_ref = pd_controller_step(controller, x_meas);
        const double compensation = comp.comp_next;  // built from samples up to k-1
        x_meas = plant_step(plant, i_ref, compensation, dgen.at(k));
        const double y_inv = inverse.step(x_meas);
        const double u_c = params.torque_constant * i_ref;
        comp.update(u_c + compensation, y_inv, u_c, k);

        record.output.push_back(x_meas);
        record.estimate.push_back(compensation);
        record.frequency.push_back(comp.omega_now);
    }
    return record;
}

/// Fixed 20-harmonic disturbance; compares RC, DOB, and the periodic-
/// disturbance observer over the full duration.
inline std::vector<ExperimentRecord> run_simulation_1(const SimParams& params) {
    DisturbanceGenerator dgen(params.harmonics, params.sample_time, params.omega0);
    std::vector<ExperimentRecord> records;
    records.push_back(run_closed_loop(CompensatorKind::rc, params, dgen, "rc"));
    records.push_back(run_closed_loop(CompensatorKind::dob, params, dgen, "dob"));
    records.push_back(run_closed_loop(CompensatorKind::pdob, params, dgen, "pdob"));
    return records;
}

/// Fundamental step 10 -> 11 rad/s at 40 s; compares the observer with a
/// stale delay against the adaptive composition.
inline std::vector<ExperimentRecord> run_simulation_2(const SimParams& params) {
    DisturbanceGenerator dgen(params.harmonics, params.sample_time, params.omega0);
    dgen.add_step(0.4 * params.duration_s, 1.1 * params.omega0);
    std::vector<ExperimentRecord> records;
    records.push_back(run_closed_loop(CompensatorKind::pdob, params, dgen, "pdob_fixed"));
    records.push_back(run_closed_loop(CompensatorKind::adaptive_pdob, params, dgen, "adaptive_pdob"));
    return records;
}

// ---------------------------------------------------------------------------
// Open-loop step-frequency studies
// ---------------------------------------------------------------------------

enum class StepStudyVariant {
    notch_r,
    multirate,
    forgetting,
    regularization,
    smoothing_cutoff,
    bandpass_width,
    harmonic_mix,  // ten-harmonic input under g_a/g_b combinations
};

/// Feeds the scripted estimator input (tone stepping omega0 -> 1.1*omega0 at
/// 3 s, or its ten-harmonic variant) straight into the band-pass + ANF chain
/// and records the frequency trajectory per swept setting.
inline ExperimentRecord run_estimator_script(const SimParams& params, int harmonics,
                                             double t_step_s, std::string name) {
    const auto steps = static_cast<std::int64_t>(std::llround(params.duration_s / params.sample_time));
    const FrequencyEstimatorConfig cfg = detail::estimator_config_from(params);
    FrequencyEstimator est = make_frequency_estimator(cfg);

    DisturbanceGenerator dgen(harmonics, params.sample_time, params.omega0);
    dgen.add_step(t_step_s, 1.1 * params.omega0);

    ExperimentRecord record;
    record.name = std::move(name);
    record.sample_time = params.sample_time;
    for (std::int64_t k = 0; k < steps; ++k) {
        const double eps = dgen.at(k);
        const EstimateUpdate update = estimator_step(est, cfg, eps);
        record.output.push_back(eps);
        record.estimate.push_back(est.last_d_tilde);
        record.frequency.push_back(update.omega_hat);
    }
    return record;
}

inline std::vector<ExperimentRecord> run_step_frequency_study(StepStudyVariant variant,
                                                              const SimParams& base) {
    // standard single-tone study setup: wide smoothing and band-pass
    SimParams p = base;
    p.smoothing_cutoff = 1000.0;
    p.bandpass_width = 1000.0;

    auto label = [](const char* key, double value) {
        std::string v = std::to_string(value);
        v.erase(v.find_last_not_of('0') + 1);
        if (!v.empty() && v.back() == '.') v.pop_back();
        return std::string(key) + "_" + v;
    };

    std::vector<ExperimentRecord> records;
    switch (variant) {
        case StepStudyVariant::notch_r:
            for (double r : {0.7, 0.9, 0.99}) {
                SimParams q = p;
                q.notch_r = r;
                records.push_back(run_estimator_script(q, 1, 3.0, label("r", r)));
            }
            break;
        case StepStudyVariant::multirate:
            for (int kappa : {1, 10, 100}) {
                SimParams q = p;
                q.multirate = kappa;
                records.push_back(run_estimator_script(q, 1, 3.0, label("kappa", kappa)));
            }
            break;
        case StepStudyVariant::forgetting:
            for (double lambda : {0.9, 0.99, 0.999}) {
                SimParams q = p;
                q.forgetting = lambda;
                records.push_back(run_estimator_script(q, 1, 3.0, label("lambda", lambda)));
            }
            break;
        case StepStudyVariant::regularization:
            for (double delta : {1.0, 1000.0, 1e6}) {
                SimParams q = p;
                q.regularization = delta;
                records.push_back(run_estimator_script(q, 1, 3.0, label("delta", delta)));
            }
            break;
        case StepStudyVariant::smoothing_cutoff:
            for (double ga : {1.0, 100.0, 1000.0}) {
                SimParams q = p;
                q.smoothing_cutoff = ga;
                records.push_back(run_estimator_script(q, 1, 3.0, label("g_a", ga)));
            }
            break;
        case StepStudyVariant::bandpass_width:
            for (double gb : {1.0, 100.0, 1000.0}) {
                SimParams q = p;
                q.bandpass_width = gb;
                records.push_back(run_estimator_script(q, 1, 3.0, label("g_b", gb)));
            }
            break;
        case StepStudyVariant::harmonic_mix:
            for (double g : {1.0, 1000.0}) {
                SimParams q = p;
                q.smoothing_cutoff = g;
                q.bandpass_width = g;
                records.push_back(run_estimator_script(q, 10, 3.0, label("ga_gb", g)));
            }
            break;
    }
    return records;
}

}  // namespace pdob

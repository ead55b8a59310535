#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstring>
#include <vector>

#include "pdob/sim.hpp"
#include "test_support.hpp"

using namespace pdob;
using testsup::steady_amplitude;
using testsup::tone;

TEST_CASE("plant at rest stays at rest") {
    PlantDoubleIntegrator plant(0.0028, 1.18, 1e-4);
    for (int k = 0; k < 1000; ++k) {
        CHECK(plant_step(plant, 0.0, 0.0, 0.0) == 0.0);
    }
}

TEST_CASE("plant under constant torque follows the quadratic law") {
    const double J = 0.0028;
    const double Kt = 1.18;
    const double dt = 1e-4;
    const double torque = 0.5;
    PlantDoubleIntegrator plant(J, Kt, dt);
    double x = 0.0;
    const int steps = 2000;
    for (int k = 0; k < steps; ++k) {
        x = plant_step(plant, torque / Kt, 0.0, 0.0);
    }
    const double t = dt * steps;
    CHECK(x == doctest::Approx(torque * t * t / (2.0 * J)).epsilon(0.01));
}

TEST_CASE("feeding the disturbance one sample ahead cancels it exactly") {
    const double dt = 1e-4;
    DisturbanceGenerator dgen(20, dt, 10.0);
    PlantDoubleIntegrator plant(0.0028, 1.18, dt);
    for (std::int64_t k = 0; k < 20000; ++k) {
        const double x = plant_step(plant, 0.0, dgen.at(k + 1), dgen.at(k));
        CHECK(std::abs(x) <= 1e-12);
    }
}

TEST_CASE("pd controller holds still at zero and scales a constant offset") {
    PdController ctrl(0.0028, 1.18, 1e-4);
    for (int k = 0; k < 100; ++k) {
        CHECK(pd_controller_step(ctrl, 0.0) == 0.0);
    }
    PdController offset_ctrl(0.0028, 1.18, 1e-4);
    double i_ref = 0.0;
    for (int k = 0; k < 50000; ++k) {
        i_ref = pd_controller_step(offset_ctrl, 0.01);
    }
    CHECK(i_ref == doctest::Approx(-(0.0028 / 1.18) * 2500.0 * 0.01).epsilon(1e-6));
}

TEST_CASE("pd loop drives a nonzero initial position back toward zero") {
    const double dt = 1e-4;
    PlantDoubleIntegrator plant(0.0028, 1.18, dt);
    plant.position = 0.02;
    PdController ctrl(0.0028, 1.18, dt);
    double x = plant.position;
    double peak = std::abs(x);
    for (int k = 0; k < 100000; ++k) {  // 10 s
        const double i_ref = pd_controller_step(ctrl, x);
        x = plant_step(plant, i_ref, 0.0, 0.0);
        peak = std::max(peak, std::abs(x));
    }
    CHECK(peak < 0.05);           // no divergence
    CHECK(std::abs(x) < 1e-4);    // decayed
}

TEST_CASE("aperiodic hook adds on top of the harmonic series") {
    DisturbanceGenerator dgen(2, 1e-3, 10.0);
    const double base = dgen.at(37);
    dgen.aperiodic = [](std::int64_t) { return 0.25; };
    CHECK(dgen.at(37) == base + 0.25);
}

TEST_CASE("classical dob converges to a constant disturbance image") {
    const double dt = 1e-4;
    BaselineDob dob(1000.0, dt);
    double estimate = 0.0;
    const auto steps = static_cast<std::int64_t>(5.0 / (1000.0 * dt) / dt);
    for (std::int64_t k = 0; k < steps; ++k) {
        estimate = dob_step(dob, 0.0, 1.0);  // y_inv - u == 1
    }
    CHECK(estimate == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("classical dob residual at the cutoff and far above it") {
    const double dt = 1e-5;
    const double g = 1000.0;
    BaselineDob dob(g, dt);
    std::vector<double> residual;
    for (double x : tone(g, dt, 100000)) {
        residual.push_back(x - dob_step(dob, 0.0, x));
    }
    CHECK(steady_amplitude(residual) == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(0.02));

    BaselineDob slow_dob(10.0, dt);
    std::vector<double> high_freq_residual;
    for (double x : tone(1000.0, dt, 100000)) {  // 100x the cutoff
        high_freq_residual.push_back(x - dob_step(slow_dob, 0.0, x));
    }
    CHECK(steady_amplitude(high_freq_residual) == doctest::Approx(1.0).epsilon(0.02));
}

TEST_CASE("rc with zero error produces zero compensation") {
    BaselineRc rc(100, 1000.0, 1e-4);
    for (int k = 0; k < 1000; ++k) {
        CHECK(rc_step(rc, 0.0) == 0.0);
    }
}

TEST_CASE("rc accumulates a periodic error across the first periods") {
    const double dt = 1e-4;
    const int n = 200;
    BaselineRc rc(n, 1000.0, dt);
    double first_period_peak = 0.0;
    double fifth_period_peak = 0.0;
    for (int k = 0; k < 5 * n; ++k) {
        const double v = rc_step(rc, 1.0);
        if (k < n) first_period_peak = std::max(first_period_peak, std::abs(v));
        if (k >= 4 * n) fifth_period_peak = std::max(fifth_period_peak, std::abs(v));
    }
    CHECK(first_period_peak == 0.0);  // nothing stored yet
    CHECK(fifth_period_peak > 2.0);   // open-loop accumulation
}

namespace {

SimParams short_params(double duration) {
    SimParams p;
    p.duration_s = duration;
    return p;
}

double window_rms(const ExperimentRecord& rec, double t0, double t1) {
    const auto k0 = static_cast<std::size_t>(std::llround(t0 / rec.sample_time));
    const auto k1 = static_cast<std::size_t>(std::llround(t1 / rec.sample_time));
    return rms(std::span<const double>(rec.output).subspan(k0, k1 - k0));
}

}  // namespace

TEST_CASE("rc closed loop reduces the steady periodic error against no compensation") {
    SimParams p = short_params(15.0);
    DisturbanceGenerator dgen(p.harmonics, p.sample_time, p.omega0);
    const ExperimentRecord with_rc = run_closed_loop(CompensatorKind::rc, p, dgen, "rc");
    const ExperimentRecord without = run_closed_loop(CompensatorKind::none, p, dgen, "none");
    const double rms_rc = window_rms(with_rc, 10.0, 15.0);
    const double rms_none = window_rms(without, 10.0, 15.0);
    CHECK(rms_rc < 0.5 * rms_none);
}

TEST_CASE("rc amplifies a half-harmonic disturbance relative to no compensation") {
    SimParams p = short_params(15.0);
    // single tone between the internal-model notches: 1.5x the fundamental
    DisturbanceGenerator dgen(1, p.sample_time, 1.5 * p.omega0);
    const ExperimentRecord with_rc = run_closed_loop(CompensatorKind::rc, p, dgen, "rc");
    // the rc period still corresponds to p.omega0: rebuild by hand
    const ExperimentRecord without = run_closed_loop(CompensatorKind::none, p, dgen, "none");
    const double rms_rc = window_rms(with_rc, 10.0, 15.0);
    const double rms_none = window_rms(without, 10.0, 15.0);
    CHECK(rms_rc >= rms_none);
}

TEST_CASE("oracle compensation reproduces the disturbance-free run exactly") {
    SimParams p = short_params(2.0);
    DisturbanceGenerator dgen(p.harmonics, p.sample_time, p.omega0);
    const ExperimentRecord oracle = run_closed_loop(CompensatorKind::oracle, p, dgen, "oracle");
    DisturbanceGenerator silent(0, p.sample_time, p.omega0);
    const ExperimentRecord clean = run_closed_loop(CompensatorKind::none, p, silent, "clean");
    REQUIRE(oracle.output.size() == clean.output.size());
    for (std::size_t k = 0; k < oracle.output.size(); ++k) {
        CHECK(std::abs(oracle.output[k] - clean.output[k]) <= 1e-12);
    }
}

TEST_CASE("no disturbance means no output for every method") {
    SimParams p = short_params(1.0);
    p.harmonics = 0;
    DisturbanceGenerator dgen(0, p.sample_time, p.omega0);
    for (CompensatorKind kind : {CompensatorKind::dob, CompensatorKind::rc, CompensatorKind::pdob}) {
        const ExperimentRecord rec = run_closed_loop(kind, p, dgen, "m");
        CHECK(rms(rec.output) < 1e-9);
    }
}

TEST_CASE("runs are deterministic bit for bit") {
    std::mt19937 rng(3);
    for (int trial = 0; trial < 100; ++trial) {
        SimParams p = short_params(0.15 + 0.001 * static_cast<double>(rng() % 100));
        p.harmonics = 1 + static_cast<int>(rng() % 5);
        DisturbanceGenerator dgen(p.harmonics, p.sample_time, p.omega0);
        const auto kind = (trial % 2 == 0) ? CompensatorKind::pdob : CompensatorKind::dob;
        const ExperimentRecord a = run_closed_loop(kind, p, dgen, "a");
        const ExperimentRecord b = run_closed_loop(kind, p, dgen, "a");
        REQUIRE(a.output.size() == b.output.size());
        CHECK(std::memcmp(a.output.data(), b.output.data(), a.output.size() * sizeof(double)) == 0);
        CHECK(std::memcmp(a.estimate.data(), b.estimate.data(), a.estimate.size() * sizeof(double)) == 0);
        CHECK(std::memcmp(a.frequency.data(), b.frequency.data(), a.frequency.size() * sizeof(double)) == 0);
    }
}

TEST_CASE("storing transient: the observer with a delay is no better early on") {
    SimParams p = short_params(2.0);  // first fundamental period is 0.628 s
    DisturbanceGenerator dgen(p.harmonics, p.sample_time, p.omega0);
    const ExperimentRecord pdob_rec = run_closed_loop(CompensatorKind::pdob, p, dgen, "pdob");
    const ExperimentRecord dob_rec = run_closed_loop(CompensatorKind::dob, p, dgen, "dob");
    const double period = 2.0 * std::numbers::pi / p.omega0;
    const double pdob_first = window_rms(pdob_rec, 0.0, period);
    const double dob_first = window_rms(dob_rec, 0.0, period);
    CHECK(pdob_first >= 0.5 * dob_first);
}

TEST_CASE("scripted studies expose the documented parameter trends") {
    SimParams p;
    p.omega0 = 100.0;
    p.duration_s = 8.0;
    SUBCASE("large notch parameter overshoots where 0.7 does not") {
        const auto records = run_step_frequency_study(StepStudyVariant::notch_r, p);
        double overshoot_small = 0.0, overshoot_large = 0.0;
        for (const auto& rec : records) {
            double peak = 0.0;
            for (double w : rec.frequency) peak = std::max(peak, w);
            if (rec.name == "r_0.7") overshoot_small = peak - 110.0;
            if (rec.name == "r_0.99") overshoot_large = peak - 110.0;
        }
        CHECK(overshoot_large > overshoot_small + 0.5);
    }
    SUBCASE("small forgetting factor settles less cleanly than 0.999") {
        const auto records = run_step_frequency_study(StepStudyVariant::forgetting, p);
        double err_small = 0.0, err_standard = 0.0;
        for (const auto& rec : records) {
            // worst deviation from the target over the final two seconds
            const std::size_t tail = rec.frequency.size() - static_cast<std::size_t>(2.0 / p.sample_time);
            double worst = 0.0;
            for (std::size_t k = tail; k < rec.frequency.size(); ++k) {
                worst = std::max(worst, std::abs(rec.frequency[k] - 110.0));
            }
            if (rec.name == "lambda_0.9") err_small = worst;
            if (rec.name == "lambda_0.999") err_standard = worst;
        }
        CHECK(err_small > err_standard);
    }
    SUBCASE("harmonic-rich input: the narrow chain converges, the wide one biases") {
        SimParams q = p;
        q.duration_s = 20.0;
        const auto records = run_step_frequency_study(StepStudyVariant::harmonic_mix, q);
        double err_narrow = -1.0, err_wide = -1.0;
        for (const auto& rec : records) {
            const double err = std::abs(rec.frequency.back() - 110.0);
            if (rec.name == "ga_gb_1") err_narrow = err;
            if (rec.name == "ga_gb_1000") err_wide = err;
        }
        CHECK(err_narrow >= 0.0);
        CHECK(err_narrow < 2.0);
        CHECK(err_wide > err_narrow);
    }
}

TEST_CASE("before the frequency step the adaptive variant stays on the fundamental") {
    // The two variants cannot match sample for sample before the step: the
    // estimator wanders a few hundredths of a rad/s on the band-pass settling
    // transient and the harmonic leakage, which flickers the delay length.
    // What does hold is that the estimate stays pinned to the fundamental
    // until the step, and that both variants suppress at the same level.
    SimParams p = short_params(20.0);  // step lands at 8 s
    const auto records = run_simulation_2(p);
    REQUIRE(records.size() == 2);
    const auto pre_step = static_cast<std::size_t>(std::llround(8.0 / p.sample_time));
    for (std::size_t k = 0; k < pre_step; ++k) {
        CHECK(std::abs(records[1].frequency[k] - p.omega0) < 0.1);
    }
    // pre-step, both variants stay in the suppressed regime; after the step
    // the stale delay degrades by two orders of magnitude
    const double pre_fixed = window_rms(records[0], 4.0, 8.0);
    const double pre_adaptive = window_rms(records[1], 4.0, 8.0);
    const double post_fixed = window_rms(records[0], 16.0, 20.0);
    CHECK(pre_adaptive < 10.0 * pre_fixed);
    CHECK(pre_adaptive < 0.2 * post_fixed);
}

TEST_CASE("simulation runners produce aligned traces") {
    SimParams p = short_params(1.0);
    const auto records = run_simulation_1(p);
    REQUIRE(records.size() == 3);
    CHECK(records[0].name == "rc");
    CHECK(records[1].name == "dob");
    CHECK(records[2].name == "pdob");
    for (const auto& rec : records) {
        CHECK(rec.output.size() == rec.estimate.size());
        CHECK(rec.output.size() == rec.frequency.size());
        CHECK(rec.output.size() == 10000);
    }
}

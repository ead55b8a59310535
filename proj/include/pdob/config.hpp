#pragma once

// Flat key = value run configuration with Table-style defaults, environment
// overrides, and a canonical echo used for reproducible reruns. Unknown keys
// are rejected rather than silently ignored.

#include <cctype>
#include <charconv>
#include <cstdlib>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "pdob/sim.hpp"

namespace pdob {

struct RunConfig {
    SimParams sim;
    std::string experiment;
    std::string outdir;
};

inline std::string format_number(double value) {
    char buf[64];
    const auto result = std::to_chars(buf, buf + sizeof(buf), value);
    return std::string(buf, result.ptr);
}

inline std::string format_number(int value) { return std::to_string(value); }
inline std::string format_number(unsigned value) { return std::to_string(value); }

namespace detail {

inline double parse_double(std::string_view key, std::string_view text) {
    double value = 0.0;
    const auto begin = text.data();
    const auto end = text.data() + text.size();
    const auto result = std::from_chars(begin, end, value);
    if (result.ec != std::errc{} || result.ptr != end) {
        throw std::invalid_argument("config: key '" + std::string(key) + "' has non-numeric value '" +
                                    std::string(text) + "'");
    }
    return value;
}

inline long parse_integer(std::string_view key, std::string_view text) {
    long value = 0;
    const auto begin = text.data();
    const auto end = text.data() + text.size();
    const auto result = std::from_chars(begin, end, value);
    if (result.ec != std::errc{} || result.ptr != end) {
        throw std::invalid_argument("config: key '" + std::string(key) + "' has non-integer value '" +
                                    std::string(text) + "'");
    }
    return value;
}

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) {
        s.remove_prefix(1);
    }
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
        s.remove_suffix(1);
    }
    return s;
}

}  // namespace detail

/// Canonical key order; also the echo order.
inline const std::vector<std::string>& config_keys() {
    static const std::vector<std::string> keys = {
        "omega0", "gamma", "g", "Tk", "r", "kappa", "lambda", "delta",
        "g_a", "g_b", "omega_min", "omega_max", "J", "Kt", "harmonics",
        "duration_s", "dob_cutoff", "rc_cutoff", "experiment", "outdir", "seed"};
    return keys;
}

inline void apply_config_value(RunConfig& cfg, std::string_view key, std::string_view value) {
    using detail::parse_double;
    using detail::parse_integer;
    if (key == "omega0") cfg.sim.omega0 = parse_double(key, value);
    else if (key == "gamma") cfg.sim.gamma = parse_double(key, value);
    else if (key == "g") cfg.sim.cutoff = parse_double(key, value);
    else if (key == "Tk") cfg.sim.sample_time = parse_double(key, value);
    else if (key == "r") cfg.sim.notch_r = parse_double(key, value);
    else if (key == "kappa") cfg.sim.multirate = static_cast<int>(parse_integer(key, value));
    else if (key == "lambda") cfg.sim.forgetting = parse_double(key, value);
    else if (key == "delta") cfg.sim.regularization = parse_double(key, value);
    else if (key == "g_a") cfg.sim.smoothing_cutoff = parse_double(key, value);
    else if (key == "g_b") cfg.sim.bandpass_width = parse_double(key, value);
    else if (key == "omega_min") cfg.sim.omega_min = parse_double(key, value);
    else if (key == "omega_max") cfg.sim.omega_max = parse_double(key, value);
    else if (key == "J") cfg.sim.inertia = parse_double(key, value);
    else if (key == "Kt") cfg.sim.torque_constant = parse_double(key, value);
    else if (key == "harmonics") cfg.sim.harmonics = static_cast<int>(parse_integer(key, value));
    else if (key == "duration_s") cfg.sim.duration_s = parse_double(key, value);
    else if (key == "dob_cutoff") cfg.sim.dob_cutoff = parse_double(key, value);
    else if (key == "rc_cutoff") cfg.sim.rc_cutoff = parse_double(key, value);
    else if (key == "experiment") cfg.experiment = std::string(value);
    else if (key == "outdir") cfg.outdir = std::string(value);
    else if (key == "seed") cfg.sim.seed = static_cast<unsigned>(parse_integer(key, value));
    else throw std::invalid_argument("config: unknown key '" + std::string(key) + "'");
}

/// Parses `key = value` lines; '#' starts a comment, blank lines are skipped.
inline RunConfig parse_config_text(std::string_view text) {
    RunConfig cfg;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const std::size_t eol = text.find('\n', pos);
        std::string_view line = text.substr(pos, eol == std::string_view::npos ? text.size() - pos : eol - pos);
        pos = (eol == std::string_view::npos) ? text.size() + 1 : eol + 1;
        ++line_no;
        const std::size_t hash = line.find('#');
        if (hash != std::string_view::npos) {
            line = line.substr(0, hash);
        }
        line = detail::trim(line);
        if (line.empty()) continue;
        const std::size_t eq = line.find('=');
        if (eq == std::string_view::npos) {
            throw std::invalid_argument("config: line " + std::to_string(line_no) +
                                        " is not of the form key = value");
        }
        const std::string_view key = detail::trim(line.substr(0, eq));
        const std::string_view value = detail::trim(line.substr(eq + 1));
        apply_config_value(cfg, key, value);
    }
    return cfg;
}

/// Environment overrides: PDOB_<KEY> (key upper-cased) wins over file values.
inline void apply_env_overrides(RunConfig& cfg, const char* prefix = "PDOB_") {
    for (const std::string& key : config_keys()) {
        std::string name = prefix;
        for (char c : key) {
            name.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
        }
        if (const char* value = std::getenv(name.c_str())) {
            apply_config_value(cfg, key, value);
        }
    }
}

/// Canonical echo; parsing it back reproduces the same configuration.
inline std::string echo_config(const RunConfig& cfg) {
    std::ostringstream out;
    out << "omega0 = " << format_number(cfg.sim.omega0) << "\n";
    out << "gamma = " << format_number(cfg.sim.gamma) << "\n";
    out << "g = " << format_number(cfg.sim.cutoff) << "\n";
    out << "Tk = " << format_number(cfg.sim.sample_time) << "\n";
    out << "r = " << format_number(cfg.sim.notch_r) << "\n";
    out << "kappa = " << format_number(cfg.sim.multirate) << "\n";
    out << "lambda = " << format_number(cfg.sim.forgetting) << "\n";
    out << "delta = " << format_number(cfg.sim.regularization) << "\n";
    out << "g_a = " << format_number(cfg.sim.smoothing_cutoff) << "\n";
    out << "g_b = " << format_number(cfg.sim.bandpass_width) << "\n";
    out << "omega_min = " << format_number(cfg.sim.omega_min) << "\n";
    out << "omega_max = " << format_number(cfg.sim.omega_max) << "\n";
    out << "J = " << format_number(cfg.sim.inertia) << "\n";
    out << "Kt = " << format_number(cfg.sim.torque_constant) << "\n";
    out << "harmonics = " << format_number(cfg.sim.harmonics) << "\n";
    out << "duration_s = " << format_number(cfg.sim.duration_s) << "\n";
    out << "dob_cutoff = " << format_number(cfg.sim.dob_cutoff) << "\n";
    out << "rc_cutoff = " << format_number(cfg.sim.rc_cutoff) << "\n";
    out << "experiment = " << cfg.experiment << "\n";
    out << "outdir = " << cfg.outdir << "\n";
    out << "seed = " << format_number(cfg.sim.seed) << "\n";
    return out.str();
}

}  // namespace pdob

#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <string>
#include <vector>

#include <json.hpp>

#include "hdrnn/errors.hpp"

namespace hdrnn {

/// Excitation band and the quantities it was derived from (rad/s, s).
struct BandSpec {
    double omega_low = 0.0;
    double omega_high = 0.0;
    double omega_nyquist = 0.0;
    double safety = 2.0;
    double tau_ol = 0.0;
    double tau_cl = 0.0;

    void validate() const {
        if (!(omega_low > 0.0) || !(omega_low < omega_high) || !(omega_high <= omega_nyquist))
            throw ConfigError("infeasible band: need 0 < omega_low < omega_high <= omega_nyquist");
    }
};

/// omega_low = 1 / (S_f tau_ol), omega_high = min(4 S_f / tau_cl, omega_N).
inline BandSpec design_band(double tau_ol, double tau_cl, double safety, double omega_nyquist) {
    if (!(tau_ol > 0.0) || !(tau_cl > 0.0)) throw ConfigError("time constants must be positive");
    if (!(safety >= 1.0)) throw ConfigError("safety factor must be at least 1");
    if (!(omega_nyquist > 0.0)) throw ConfigError("Nyquist frequency must be positive");
    BandSpec b;
    b.tau_ol = tau_ol;
    b.tau_cl = tau_cl;
    b.safety = safety;
    b.omega_nyquist = omega_nyquist;
    b.omega_low = 1.0 / (safety * tau_ol);
    b.omega_high = std::min(4.0 * safety / tau_cl, omega_nyquist);
    if (!(b.omega_low < b.omega_high))
        throw ConfigError("infeasible band: omega_low " + std::to_string(b.omega_low) + " >= omega_high " +
                          std::to_string(b.omega_high));
    return b;
}

inline constexpr unsigned kMinRegister = 2;
inline constexpr unsigned kMaxRegister = 16;

/// Feedback taps of a primitive polynomial for each register length
/// (stage numbers, 1-based, highest stage first).
inline const std::vector<unsigned>& primitive_taps(unsigned n) {
    static const std::vector<std::vector<unsigned>> table{
        {},           {},           {2, 1},      {3, 2},       {4, 3},       {5, 3},
        {6, 5},       {7, 6},       {8, 6, 5, 4}, {9, 5},      {10, 7},      {11, 9},
        {12, 6, 4, 1}, {13, 4, 3, 1}, {14, 5, 3, 1}, {15, 14}, {16, 15, 13, 4},
    };
    if (n < kMinRegister || n > kMaxRegister)
        throw ConfigError("register length " + std::to_string(n) + " outside [2, 16]");
    return table[n];
}

struct PrbsPlan {
    double amplitude = 1.0;
    double sample_time = 1.0;
    std::size_t clock_multiple = 1; // t_clock = clock_multiple * sample_time
    unsigned register_length = 2;
    std::vector<unsigned> taps;
    std::uint32_t seed_state = 1;
    std::size_t burst_length = 40;
    std::size_t burst_interval = 80;
    std::string target = "setpoint0";

    double t_clock() const { return static_cast<double>(clock_multiple) * sample_time; }
    std::size_t period() const { return (std::size_t{1} << register_length) - 1; }
};

/// Slowest clock meeting 2.8 / t_clock >= omega_high, then the shortest
/// register meeting 2 pi / (N t_clock) <= omega_low.
inline PrbsPlan plan_from_band(const BandSpec& band, double sample_time, double amplitude) {
    band.validate();
    if (!(sample_time > 0.0)) throw ConfigError("sample time must be positive");
    if (!(amplitude > 0.0)) throw ConfigError("amplitude must be positive");
    const double kmax = std::floor(2.8 / (band.omega_high * sample_time));
    if (!(kmax >= 1.0) || !std::isfinite(kmax))
        throw ConfigError("infeasible band: omega_high " + std::to_string(band.omega_high) +
                          " exceeds 2.8 / sample_time");
    auto clock_ok = [&](double k) { return 2.8 / (k * sample_time) >= band.omega_high; };
    double k = std::min(kmax, 1e15);
    while (k > 1.0 && !clock_ok(k)) k -= 1.0;
    while (clock_ok(k + 1.0)) k += 1.0;
    if (!clock_ok(k)) throw ConfigError("infeasible band: no clock period satisfies the upper bound");

    PrbsPlan plan;
    plan.amplitude = amplitude;
    plan.sample_time = sample_time;
    plan.clock_multiple = static_cast<std::size_t>(k);
    const double tc = plan.t_clock();
    unsigned n = kMinRegister;
    for (; n <= kMaxRegister; ++n) {
        const double N = static_cast<double>((1u << n) - 1u);
        if (2.0 * std::numbers::pi / (N * tc) <= band.omega_low) break;
    }
    if (n > kMaxRegister) throw ConfigError("band too wide: register length above 16 required");
    plan.register_length = n;
    plan.taps = primitive_taps(n);
    return plan;
}

/// Maximum-length sequence of +-amplitude values from a Fibonacci LFSR, one
/// value per clock, repeated `cycles` times. Bit 0 maps to -amplitude.
inline std::vector<double> generate_mls(unsigned n, const std::vector<unsigned>& taps, std::size_t cycles,
                                        std::uint32_t seed_state, double amplitude = 1.0) {
    if (n < kMinRegister || n > kMaxRegister) throw ConfigError("register length outside [2, 16]");
    const std::uint32_t mask = (1u << n) - 1u;
    if ((seed_state & mask) == 0) throw InputError("degenerate LFSR state: seed must be nonzero");
    if (taps.empty()) throw ConfigError("empty tap set");
    for (unsigned t : taps)
        if (t < 1 || t > n) throw ConfigError("tap outside the register");

    std::uint32_t state = seed_state & mask;
    auto step = [&]() {
        const unsigned out = (state >> (n - 1)) & 1u;
        unsigned fb = 0;
        for (unsigned t : taps) fb ^= (state >> (t - 1)) & 1u;
        state = ((state << 1) | fb) & mask;
        return out;
    };
    const std::size_t N = mask;
    std::vector<double> one(N);
    const std::uint32_t start = state;
    for (std::size_t i = 0; i < N; ++i) {
        one[i] = step() ? amplitude : -amplitude;
        if (state == start && i + 1 < N) throw ConfigError("taps are not primitive: period shorter than 2^n - 1");
    }
    std::vector<double> out;
    out.reserve(N * cycles);
    for (std::size_t c = 0; c < cycles; ++c) out.insert(out.end(), one.begin(), one.end());
    return out;
}

enum class SpectrumForm {
    as_printed,     // A^2 (N+1) t / N [sin(w t / 2) / (w t)]^2
    normalized_sinc // A^2 (N+1) t / N [sin(w t / 2) / (w t / 2)]^2
};

inline double prbs_spectrum(double amplitude, double N, double t_clock, double omega,
                            SpectrumForm form = SpectrumForm::as_printed) {
    if (!(omega >= 0.0) || !(N >= 1.0) || !(t_clock > 0.0)) throw ConfigError("prbs_spectrum: invalid arguments");
    const double scale = amplitude * amplitude * (N + 1.0) * t_clock / N;
    const double denom_factor = form == SpectrumForm::as_printed ? 1.0 : 0.5;
    if (omega == 0.0) {
        const double r = 0.5 / denom_factor;
        return scale * r * r;
    }
    const double r = std::sin(omega * t_clock / 2.0) / (omega * t_clock * denom_factor);
    return scale * r * r;
}

struct SpectrumPoint {
    double omega;
    double power;
};

/// Periodogram of one period of a sampled signal at the DFT frequencies
/// 2 pi j / (M T_s), j = 1 .. M/2.
inline std::vector<SpectrumPoint> periodogram(const std::vector<double>& x, double sample_time) {
    const std::size_t M = x.size();
    std::vector<SpectrumPoint> out;
    for (std::size_t j = 1; j <= M / 2; ++j) {
        std::complex<double> acc = 0.0;
        for (std::size_t t = 0; t < M; ++t) {
            const double ph = -2.0 * std::numbers::pi * static_cast<double>((j * t) % M) / static_cast<double>(M);
            acc += x[t] * std::complex<double>(std::cos(ph), std::sin(ph));
        }
        out.push_back({2.0 * std::numbers::pi * static_cast<double>(j) / (static_cast<double>(M) * sample_time),
                       sample_time / static_cast<double>(M) * std::norm(acc)});
    }
    return out;
}

/// 1 for `burst_len` samples starting at every multiple of `interval`.
inline std::vector<std::uint8_t> schedule_injection(std::size_t horizon, std::size_t burst_len, std::size_t interval) {
    if (burst_len < 1 || interval < 1) throw ConfigError("burst length and interval must be at least 1");
    std::vector<std::uint8_t> mask(horizon);
    for (std::size_t t = 0; t < horizon; ++t) mask[t] = (t % interval) < burst_len ? 1 : 0;
    return mask;
}

/// Additive set-point signal: the held sequence value while the mask is on, else 0.
inline std::vector<double> excitation_signal(const PrbsPlan& plan, std::size_t horizon) {
    const auto mask = schedule_injection(horizon, plan.burst_length, plan.burst_interval);
    const auto seq = generate_mls(plan.register_length, plan.taps, 1, plan.seed_state, plan.amplitude);
    std::vector<double> u(horizon, 0.0);
    for (std::size_t t = 0; t < horizon; ++t)
        if (mask[t]) u[t] = seq[(t / plan.clock_multiple) % seq.size()];
    return u;
}

// ---- structured text record ----

inline nlohmann::json plan_to_json(const PrbsPlan& p) {
    return {{"amplitude", p.amplitude},
            {"sample_time", p.sample_time},
            {"clock_multiple", p.clock_multiple},
            {"t_clock", p.t_clock()},
            {"register_length", p.register_length},
            {"period", p.period()},
            {"taps", p.taps},
            {"seed_state", p.seed_state},
            {"burst_length", p.burst_length},
            {"burst_interval", p.burst_interval},
            {"target", p.target}};
}

inline PrbsPlan plan_from_json(const nlohmann::json& j) {
    try {
        PrbsPlan p;
        p.amplitude = j.at("amplitude").get<double>();
        p.sample_time = j.at("sample_time").get<double>();
        p.clock_multiple = j.at("clock_multiple").get<std::size_t>();
        p.register_length = j.at("register_length").get<unsigned>();
        p.taps = j.contains("taps") ? j.at("taps").get<std::vector<unsigned>>() : primitive_taps(p.register_length);
        p.seed_state = j.value("seed_state", 1u);
        p.burst_length = j.value("burst_length", std::size_t{40});
        p.burst_interval = j.value("burst_interval", std::size_t{80});
        p.target = j.value("target", std::string("setpoint0"));
        if (p.clock_multiple < 1) throw ConfigError("plan: clock_multiple must be at least 1");
        if (p.register_length < kMinRegister || p.register_length > kMaxRegister)
            throw ConfigError("plan: register_length outside [2, 16]");
        return p;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("plan: ") + e.what());
    }
}

} // namespace hdrnn

#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "hdrnn/errors.hpp"
#include "hdrnn/prbs.hpp"
#include "hdrnn/rng.hpp"
#include "hdrnn/tensor.hpp"

namespace hdrnn {

/// One proportional-integral loop: measured output `output` is driven to
/// `setpoint` through manipulated input `input`.
struct LoopConfig {
    std::size_t output = 0;
    std::size_t input = 0;
    double kp = 1.0;
    double ki = 0.1;
    double setpoint = 0.0;
    double setpoint_range = 50.0; // operating range, used to size excitation
};

/// x[t+1] = A x[t] + B (g * u[t]) + E d[t],  y[t] = C x[t] + noise.
/// Recorded sample t is [y_measured(t), u_command(t)].
struct PlantConfig {
    Tensor2 A, B, E, C;
    std::vector<LoopConfig> loops;     // one per column of B
    std::vector<double> noise_std;     // per output
    std::vector<double> disturbance_mean;
    std::vector<double> disturbance_std;
    double sample_time = 1.0;
    std::uint64_t seed = 1;

    std::size_t states() const { return A.rows; }
    std::size_t outputs() const { return C.rows; }
    std::size_t inputs() const { return B.cols; }
    std::size_t disturbances() const { return E.cols; }
    std::size_t recorded_dim() const { return outputs() + inputs(); }

    void validate() const;
};

namespace detail {

inline Tensor2 matmul(const Tensor2& a, const Tensor2& b) {
    Tensor2 c(a.rows, b.cols);
    for (std::size_t i = 0; i < a.rows; ++i)
        for (std::size_t k = 0; k < a.cols; ++k)
            for (std::size_t j = 0; j < b.cols; ++j) c(i, j) += a(i, k) * b(k, j);
    return c;
}

inline double inf_norm(const Tensor2& m) {
    double best = 0.0;
    for (std::size_t i = 0; i < m.rows; ++i) {
        double s = 0.0;
        for (double v : m.row(i)) s += std::abs(v);
        best = std::max(best, s);
    }
    return best;
}

} // namespace detail

/// Spectral radius below one, decided by repeated squaring: some power of A
/// has norm below one iff the radius is below one.
inline bool is_schur_stable(const Tensor2& A) {
    Tensor2 m = A;
    for (int j = 0; j < 40; ++j) {
        const double n = detail::inf_norm(m);
        if (n < 1.0) return true;
        if (!std::isfinite(n) || n > 1e150) return false;
        m = detail::matmul(m, m);
    }
    return false;
}

inline void PlantConfig::validate() const {
    const std::size_t n = states();
    if (n == 0 || A.cols != n) throw ConfigError("plant: A must be square and nonempty");
    if (B.rows != n || E.rows != n || C.cols != n) throw ConfigError("plant: B, E, C do not match the state size");
    if (loops.size() != inputs()) throw ConfigError("plant: one loop per manipulated input required");
    for (const auto& l : loops)
        if (l.output >= outputs() || l.input >= inputs()) throw ConfigError("plant: loop indices out of range");
    if (noise_std.size() != outputs()) throw ConfigError("plant: one noise std per output required");
    if (disturbance_mean.size() != disturbances() || disturbance_std.size() != disturbances())
        throw ConfigError("plant: disturbance mean/std size mismatch");
    for (double s : noise_std)
        if (!(s >= 0.0)) throw ConfigError("plant: noise stds must be nonnegative");
    for (double s : disturbance_std)
        if (!(s >= 0.0)) throw ConfigError("plant: disturbance stds must be nonnegative");
    if (!(sample_time > 0.0)) throw ConfigError("plant: sample time must be positive");
    if (!is_schur_stable(A)) throw ConfigError("plant: state matrix is not stable (spectral radius >= 1)");
}

// ---------------------------------------------------------------------------
// Faults
// ---------------------------------------------------------------------------

enum class FaultKind { step, random_variation, slow_drift, stiction };
enum class FaultSite { sensor, disturbance, actuator, loop_gain };

/// `magnitude` is the step size, the std of a random variation, or the drift
/// slope per sample. `deadband` applies to stiction only.
struct FaultSpec {
    FaultKind kind = FaultKind::step;
    FaultSite site = FaultSite::sensor;
    std::size_t channel = 0;
    double magnitude = 0.0;
    std::size_t onset = 0;
    double deadband = 0.0;
};

/// Per-fault memory: the random stream and the stuck actuator position.
struct FaultState {
    Rng rng{1};
    std::optional<double> held;
};

inline double apply_fault(double value, std::size_t t, const FaultSpec& f, FaultState& st) {
    if (t < f.onset) return value;
    switch (f.kind) {
    case FaultKind::step:
        return value + f.magnitude;
    case FaultKind::random_variation:
        return value + f.magnitude * st.rng.normal();
    case FaultKind::slow_drift:
        return value + f.magnitude * static_cast<double>(t - f.onset);
    case FaultKind::stiction:
        if (!st.held || std::abs(value - *st.held) > f.deadband) st.held = value;
        return *st.held;
    }
    throw ConfigError("unknown fault kind");
}

inline std::string to_string(FaultKind k) {
    switch (k) {
    case FaultKind::step: return "step";
    case FaultKind::random_variation: return "random_variation";
    case FaultKind::slow_drift: return "slow_drift";
    case FaultKind::stiction: return "stiction";
    }
    throw ConfigError("unknown fault kind");
}

inline std::string to_string(FaultSite s) {
    switch (s) {
    case FaultSite::sensor: return "sensor";
    case FaultSite::disturbance: return "disturbance";
    case FaultSite::actuator: return "actuator";
    case FaultSite::loop_gain: return "loop_gain";
    }
    throw ConfigError("unknown fault site");
}

inline FaultKind fault_kind_from(const std::string& s) {
    if (s == "step") return FaultKind::step;
    if (s == "random_variation") return FaultKind::random_variation;
    if (s == "slow_drift") return FaultKind::slow_drift;
    if (s == "stiction") return FaultKind::stiction;
    throw ConfigError("unknown fault kind '" + s + "'");
}

inline FaultSite fault_site_from(const std::string& s) {
    if (s == "sensor") return FaultSite::sensor;
    if (s == "disturbance") return FaultSite::disturbance;
    if (s == "actuator") return FaultSite::actuator;
    if (s == "loop_gain") return FaultSite::loop_gain;
    throw ConfigError("unknown fault site '" + s + "'");
}

inline nlohmann::json fault_to_json(const FaultSpec& f) {
    return {{"kind", to_string(f.kind)}, {"site", to_string(f.site)}, {"channel", f.channel},
            {"magnitude", f.magnitude},  {"onset", f.onset},          {"deadband", f.deadband}};
}

inline FaultSpec fault_from_json(const nlohmann::json& j) {
    try {
        FaultSpec f;
        f.kind = fault_kind_from(j.at("kind").get<std::string>());
        f.site = fault_site_from(j.at("site").get<std::string>());
        f.channel = j.at("channel").get<std::size_t>();
        f.magnitude = j.value("magnitude", 0.0);
        f.onset = j.value("onset", std::size_t{0});
        f.deadband = j.value("deadband", 0.0);
        return f;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("fault: ") + e.what());
    }
}

// ---------------------------------------------------------------------------
// Simulation
// ---------------------------------------------------------------------------

struct ScenarioDataset {
    Tensor2 records; // T x (outputs + inputs)
    std::vector<int> labels;
    std::optional<FaultSpec> fault;
    std::optional<PrbsPlan> prbs;
    std::size_t prbs_loop = 0;
    std::uint64_t seed = 0;
    int fault_class = 0;
};

/// Index of the loop a plan targets ("setpoint<k>").
inline std::size_t prbs_target_loop(const PrbsPlan& plan, std::size_t loops) {
    const std::string prefix = "setpoint";
    if (plan.target.rfind(prefix, 0) != 0) throw ConfigError("PRBS target must be setpoint<k>");
    std::size_t k = 0;
    try {
        k = std::stoul(plan.target.substr(prefix.size()));
    } catch (const std::exception&) {
        throw ConfigError("PRBS target must be setpoint<k>");
    }
    if (k >= loops) throw ConfigError("PRBS target loop out of range");
    return k;
}

/// Closed-loop simulation from the zero steady state. Samples before the
/// fault onset are labelled 0, the rest `fault_class`.
inline ScenarioDataset simulate_scenario(const PlantConfig& plant, const std::optional<FaultSpec>& fault,
                                         const std::optional<PrbsPlan>& prbs, std::size_t horizon,
                                         int fault_class = 1) {
    plant.validate();
    if (horizon < 1) throw ConfigError("simulation horizon must be at least 1");
    const std::size_t ns = plant.states(), ny = plant.outputs(), nu = plant.inputs(), nd = plant.disturbances();
    if (fault) {
        const std::size_t limit = fault->site == FaultSite::sensor        ? ny
                                  : fault->site == FaultSite::disturbance ? nd
                                                                          : nu;
        if (fault->channel >= limit) throw ConfigError("fault channel out of range");
        if (fault->kind == FaultKind::stiction && fault->site != FaultSite::actuator)
            throw ConfigError("stiction applies to actuators only");
    }

    ScenarioDataset out;
    out.fault = fault;
    out.prbs = prbs;
    out.seed = plant.seed;
    out.fault_class = fault ? fault_class : 0;
    std::vector<double> excitation(horizon, 0.0);
    if (prbs) {
        out.prbs_loop = prbs_target_loop(*prbs, nu);
        excitation = excitation_signal(*prbs, horizon);
    }

    Rng noise(plant.seed);
    FaultState fstate;
    fstate.rng = Rng(plant.seed ^ 0xa0761d6478bd642fULL);
    std::vector<double> x(ns, 0.0), xn(ns), d(nd), y(ny), u(nu), ueff(nu), integ(nu, 0.0);
    out.records = Tensor2(horizon, ny + nu);
    out.labels.assign(horizon, 0);

    for (std::size_t t = 0; t < horizon; ++t) {
        const bool active = fault && t >= fault->onset;
        for (std::size_t k = 0; k < nd; ++k) {
            d[k] = plant.disturbance_mean[k] + plant.disturbance_std[k] * noise.normal();
            if (fault && fault->site == FaultSite::disturbance && fault->channel == k)
                d[k] = apply_fault(d[k], t, *fault, fstate);
        }
        for (std::size_t i = 0; i < ny; ++i) {
            double v = 0.0;
            for (std::size_t k = 0; k < ns; ++k) v += plant.C(i, k) * x[k];
            y[i] = v + plant.noise_std[i] * noise.normal();
            if (fault && fault->site == FaultSite::sensor && fault->channel == i)
                y[i] = apply_fault(y[i], t, *fault, fstate);
        }
        for (std::size_t j = 0; j < nu; ++j) {
            const auto& loop = plant.loops[j];
            const double r = loop.setpoint + (prbs && j == out.prbs_loop ? excitation[t] : 0.0);
            const double e = r - y[loop.output];
            integ[j] += e * plant.sample_time;
            u[loop.input] = loop.kp * e + loop.ki * integ[j];
        }
        for (std::size_t j = 0; j < nu; ++j) {
            double act = u[j];
            if (fault && fault->site == FaultSite::actuator && fault->channel == j)
                act = apply_fault(act, t, *fault, fstate);
            double gain = 1.0;
            if (fault && fault->site == FaultSite::loop_gain && fault->channel == j)
                gain = apply_fault(gain, t, *fault, fstate);
            ueff[j] = gain * act;
        }

        auto row = out.records.row(t);
        for (std::size_t i = 0; i < ny; ++i) row[i] = y[i];
        for (std::size_t j = 0; j < nu; ++j) row[ny + j] = u[j];
        for (double v : row)
            if (!std::isfinite(v) || std::abs(v) > 1e6)
                throw NumericError("plant simulation diverged at sample " + std::to_string(t));
        out.labels[t] = active ? out.fault_class : 0;

        for (std::size_t i = 0; i < ns; ++i) {
            double v = 0.0;
            for (std::size_t k = 0; k < ns; ++k) v += plant.A(i, k) * x[k];
            for (std::size_t j = 0; j < nu; ++j) v += plant.B(i, j) * ueff[j];
            for (std::size_t k = 0; k < nd; ++k) v += plant.E(i, k) * d[k];
            xn[i] = v;
        }
        std::swap(x, xn);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Built-in surrogate: 6 states observed directly, 2 PI loops, 5 disturbance
// inputs. Recorded width is 8 (6 measurements + 2 controller outputs).
// ---------------------------------------------------------------------------

inline PlantConfig default_plant(std::uint64_t seed = 1) {
    PlantConfig p;
    p.A = Tensor2(6, 6);
    p.A(0, 0) = 0.8;
    p.A(1, 1) = 0.85;
    p.A(2, 2) = 0.8;
    p.A(2, 0) = 0.1;
    p.A(3, 3) = 0.7;
    p.A(3, 1) = 0.15;
    p.A(4, 4) = 0.95;
    p.A(4, 0) = 0.025;
    p.A(4, 1) = 0.025;
    p.A(5, 5) = 0.6;
    p.B = Tensor2(6, 2);
    p.B(0, 0) = 0.2;
    p.B(1, 1) = 0.15;
    p.E = Tensor2(6, 5);
    p.E(0, 0) = 0.2; // load on loop 0
    p.E(1, 1) = 0.15; // load on loop 1
    p.E(2, 2) = 0.2;
    p.E(3, 3) = 0.3;
    p.E(5, 4) = 0.4;
    p.C = Tensor2(6, 6);
    for (std::size_t i = 0; i < 6; ++i) p.C(i, i) = 1.0;
    p.loops = {{0, 0, 0.5, 0.1, 0.0, 50.0}, {1, 1, 1.0, 0.1, 0.0, 50.0}};
    p.noise_std.assign(6, 0.1);
    p.disturbance_mean.assign(5, 0.0);
    p.disturbance_std.assign(5, 0.1);
    p.sample_time = 1.0;
    p.seed = seed;
    return p;
}

struct Scenario {
    int label = 0;
    std::string name;
    std::optional<FaultSpec> fault;
    bool incipient = false;
};

/// Normal operation (class 0) followed by 12 fault classes. Classes 10-12 are
/// the incipient analogs, all acting on loop 0 where excitation is injected.
inline std::vector<Scenario> default_scenarios() {
    using K = FaultKind;
    using S = FaultSite;
    auto f = [](K k, S s, std::size_t ch, double mag, double deadband = 0.0) {
        return std::optional<FaultSpec>(FaultSpec{k, s, ch, mag, 0, deadband});
    };
    return {
        {0, "normal", std::nullopt, false},
        {1, "step d2", f(K::step, S::disturbance, 2, 1.0), false},
        {2, "step d3", f(K::step, S::disturbance, 3, 1.0), false},
        {3, "step load0", f(K::step, S::disturbance, 0, 2.0), false},
        {4, "step load1", f(K::step, S::disturbance, 1, 2.0), false},
        {5, "sensor bias y5", f(K::step, S::sensor, 5, 0.5), false},
        {6, "random d5", f(K::random_variation, S::disturbance, 4, 1.2), false},
        {7, "random load1", f(K::random_variation, S::disturbance, 1, 0.8), false},
        {8, "drift sensor y4", f(K::slow_drift, S::sensor, 4, 0.005), false},
        {9, "stiction u1", f(K::stiction, S::actuator, 1, 0.0, 1.0), false},
        {10, "gain step loop0", f(K::step, S::loop_gain, 0, 0.6), true},
        {11, "gain random loop0", f(K::random_variation, S::loop_gain, 0, 0.5), true},
        {12, "gain drop loop0", f(K::step, S::loop_gain, 0, -0.4), true},
    };
}

inline std::vector<int> incipient_labels(const std::vector<Scenario>& sc) {
    std::vector<int> out;
    for (const auto& s : sc)
        if (s.incipient) out.push_back(s.label);
    return out;
}

/// Time to reach 63.2% of the final value of a unit step response.
inline double time_constant(const std::vector<double>& response, double sample_time) {
    if (response.size() < 2) throw InputError("time_constant: response too short");
    const double final_value = response.back();
    if (final_value == 0.0) throw InputError("time_constant: zero final value");
    const double target = 0.632 * final_value;
    for (std::size_t t = 0; t < response.size(); ++t)
        if (std::abs(response[t]) >= std::abs(target)) return static_cast<double>(t + 1) * sample_time;
    return static_cast<double>(response.size()) * sample_time;
}

/// Step responses of loop `k` without noise: open loop (unit input step) and
/// closed loop (unit set-point step). Returns {tau_ol, tau_cl}.
inline std::pair<double, double> loop_time_constants(const PlantConfig& plant, std::size_t k, std::size_t length = 400) {
    PlantConfig quiet = plant;
    std::fill(quiet.noise_std.begin(), quiet.noise_std.end(), 0.0);
    std::fill(quiet.disturbance_std.begin(), quiet.disturbance_std.end(), 0.0);
    std::fill(quiet.disturbance_mean.begin(), quiet.disturbance_mean.end(), 0.0);
    for (auto& l : quiet.loops) l.setpoint = 0.0;
    const auto& loop = quiet.loops.at(k);

    // open loop: iterate the state equation with a unit step on the input
    std::vector<double> x(quiet.states(), 0.0), xn(quiet.states()), ol;
    for (std::size_t t = 0; t < length; ++t) {
        for (std::size_t i = 0; i < quiet.states(); ++i) {
            double v = quiet.B(i, loop.input);
            for (std::size_t j = 0; j < quiet.states(); ++j) v += quiet.A(i, j) * x[j];
            xn[i] = v;
        }
        std::swap(x, xn);
        double yv = 0.0;
        for (std::size_t j = 0; j < quiet.states(); ++j) yv += quiet.C(loop.output, j) * x[j];
        ol.push_back(yv);
    }
    quiet.loops[k].setpoint = 1.0;
    auto cl = simulate_scenario(quiet, std::nullopt, std::nullopt, length);
    std::vector<double> clr;
    for (std::size_t t = 1; t < length; ++t) clr.push_back(cl.records(t, loop.output));
    return {time_constant(ol, quiet.sample_time), time_constant(clr, quiet.sample_time)};
}

/// Default excitation for the built-in plant: band from loop 0's open- and
/// closed-loop time constants, amplitude 2% of the set-point range.
inline PrbsPlan default_prbs_plan(const PlantConfig& plant) {
    const auto [tau_ol, tau_cl] = loop_time_constants(plant, 0);
    const double nyquist = std::numbers::pi / plant.sample_time;
    auto band = design_band(tau_ol, tau_cl, 2.0, nyquist);
    auto plan = plan_from_band(band, plant.sample_time, 0.02 * plant.loops[0].setpoint_range);
    plan.target = "setpoint0";
    return plan;
}

inline nlohmann::json scenario_metadata(const ScenarioDataset& s) {
    nlohmann::json j;
    j["seed"] = s.seed;
    j["fault_class"] = s.fault_class;
    j["fault"] = s.fault ? fault_to_json(*s.fault) : nlohmann::json();
    j["prbs"] = s.prbs ? plan_to_json(*s.prbs) : nlohmann::json();
    j["samples"] = s.records.rows;
    j["columns"] = s.records.cols;
    return j;
}

} // namespace hdrnn

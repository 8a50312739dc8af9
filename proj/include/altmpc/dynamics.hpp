#pragma once

#include <Eigen/Core>
#include <cmath>
#include <span>
#include <vector>

#include "altmpc/errors.hpp"
#include "altmpc/types.hpp"

namespace altmpc {

/// One step of the discrete non-holonomic motion model:
///   x += v cos(theta) dt,  y += v sin(theta) dt,
///   theta += theta_dot dt + 0.5 theta_ddot dt^2,  theta_dot += theta_ddot dt.
/// The body velocity is held at `v` over the step; the returned state carries
/// `v` and a heading normalized to (-pi, pi].
inline VehicleState propagate_state(const VehicleState& s, double v, double theta_ddot, double dt) {
    if (!(dt > 0.0)) throw InvalidInputError("propagate_state: dt must be > 0");
    if (!s.finite() || !std::isfinite(v) || !std::isfinite(theta_ddot) || !std::isfinite(dt))
        throw InvalidInputError("propagate_state: non-finite input");
    VehicleState n;
    n.x = s.x + v * std::cos(s.theta) * dt;
    n.y = s.y + v * std::sin(s.theta) * dt;
    n.theta = normalize_angle(s.theta + s.theta_dot * dt + 0.5 * theta_ddot * dt * dt);
    n.theta_dot = s.theta_dot + theta_ddot * dt;
    n.v = v;
    return n;
}

/// First-order step response at t_rel after commanding v_c from velocity v_prev:
///   v(t) = v_c + (v_prev - v_c) exp(-t_rel / tau).
inline double first_order_response(double v_prev, double v_c, double tau, double t_rel) {
    if (!(tau > 0.0)) throw InvalidParameterError("first_order_response: tau must be > 0");
    if (!(t_rel >= 0.0)) throw InvalidParameterError("first_order_response: t_rel must be >= 0");
    return v_c + (v_prev - v_c) * std::exp(-t_rel / tau);
}

/// Affine map from a command sequence to the body velocities at the step
/// boundaries, given per-step decay factors m[i] = exp(-dt / tau_i):
///   v = from_commands * v_c + from_v0 * v0.
struct VelocityChainMap {
    Eigen::MatrixXd from_commands;  ///< lower-triangular, n x n
    Eigen::VectorXd from_v0;        ///< n
};

/// Builds the chain map from per-step decay factors. Row i gives v(t_{i+1}):
/// command j contributes (1 - m_j) * prod_{l=j+1..i} m_l, and v0 contributes
/// prod_{l=0..i} m_l (one factor per elapsed step).
inline VelocityChainMap velocity_chain_map(std::span<const double> m) {
    const auto n = static_cast<Eigen::Index>(m.size());
    if (n == 0) throw InvalidInputError("velocity_chain_map: empty decay sequence");
    VelocityChainMap map;
    map.from_commands = Eigen::MatrixXd::Zero(n, n);
    map.from_v0 = Eigen::VectorXd::Zero(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        double prod = 1.0;  // prod_{l=j+1..i} m_l, built from j = i downwards
        for (Eigen::Index j = i; j >= 0; --j) {
            map.from_commands(i, j) = (1.0 - m[static_cast<std::size_t>(j)]) * prod;
            prod *= m[static_cast<std::size_t>(j)];
        }
        map.from_v0(i) = prod;  // all i+1 factors
    }
    return map;
}

inline std::vector<double> decay_factors(std::span<const double> taus, double dt) {
    std::vector<double> m(taus.size());
    for (std::size_t i = 0; i < taus.size(); ++i) {
        if (!(taus[i] > 0.0)) throw InvalidParameterError("decay_factors: tau must be > 0");
        m[i] = std::exp(-dt / taus[i]);
    }
    return m;
}

/// Body velocity at each step boundary t_1..t_n for a first-order actuator,
/// evaluated through the closed-form chain coefficients (affine in v_c).
inline std::vector<double> velocity_chain(double v0, std::span<const double> v_c, double dt, double tau) {
    if (v_c.empty()) throw InvalidInputError("velocity_chain: empty command sequence");
    if (!(dt > 0.0)) throw InvalidInputError("velocity_chain: dt must be > 0");
    if (!(tau > 0.0)) throw InvalidParameterError("velocity_chain: tau must be > 0");
    const std::vector<double> m(v_c.size(), std::exp(-dt / tau));
    const VelocityChainMap map = velocity_chain_map(m);
    Eigen::Map<const Eigen::VectorXd> cmds(v_c.data(), static_cast<Eigen::Index>(v_c.size()));
    Eigen::VectorXd v = map.from_commands * cmds + map.from_v0 * v0;
    return {v.data(), v.data() + v.size()};
}

namespace detail {

/// RK4 update of (v, v_dot) under v_ddot = omega_n^2 (v_c - v) - 2 zeta omega_n v_dot.
inline void second_order_substep(double& v, double& v_dot, double v_c, const SecondOrder& p, double h) {
    const auto acc = [&](double vv, double vd) {
        return p.omega_n * p.omega_n * (v_c - vv) - 2.0 * p.zeta * p.omega_n * vd;
    };
    const double k1v = v_dot, k1a = acc(v, v_dot);
    const double k2v = v_dot + 0.5 * h * k1a, k2a = acc(v + 0.5 * h * k1v, v_dot + 0.5 * h * k1a);
    const double k3v = v_dot + 0.5 * h * k2a, k3a = acc(v + 0.5 * h * k2v, v_dot + 0.5 * h * k2a);
    const double k4v = v_dot + h * k3a, k4a = acc(v + h * k3v, v_dot + h * k3a);
    v += h / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
    v_dot += h / 6.0 * (k1a + 2.0 * k2a + 2.0 * k3a + k4a);
}

}  // namespace detail

/// Advances the plant by one control period dt: the pose follows the discrete
/// motion model at resolution dt_sub while the body velocity follows the
/// selected actuator response to the zero-order-held command v_c.
inline PlantState plant_step(const PlantState& p, double v_c, double theta_ddot,
                             const ActuatorModel& model, double dt, double dt_sub) {
    if (!(dt_sub > 0.0) || dt_sub > dt + 1e-12)
        throw InvalidParameterError("plant_step: dt_sub must be in (0, dt]");
    const int n_sub = static_cast<int>(std::lround(dt / dt_sub));
    if (n_sub < 1 || std::abs(n_sub * dt_sub - dt) > 1e-9 * dt)
        throw InvalidParameterError("plant_step: dt_sub must divide dt");
    validate(model);

    PlantState out = p;
    const double v_start = p.state.v;
    for (int k = 0; k < n_sub; ++k) {
        out.state = propagate_state(out.state, out.state.v, theta_ddot, dt_sub);
        const double t_end = (k + 1) * dt_sub;
        if (const auto* fo = std::get_if<FirstOrder>(&model)) {
            out.state.v = first_order_response(out.state.v, v_c, fo->tau, dt_sub);
        } else if (std::holds_alternative<LinearRamp>(model)) {
            out.state.v = v_start + (v_c - v_start) * (t_end / dt);
        } else {
            double v = out.state.v, v_dot = out.v_dot;
            detail::second_order_substep(v, v_dot, v_c, std::get<SecondOrder>(model), dt_sub);
            out.state.v = v;
            out.v_dot = v_dot;
        }
    }
    return out;
}

/// Convenience overload for actuator models without internal state.
inline VehicleState plant_step(const VehicleState& s, double v_c, double theta_ddot,
                               const ActuatorModel& model, double dt, double dt_sub) {
    return plant_step(PlantState{s, 0.0}, v_c, theta_ddot, model, dt, dt_sub).state;
}

/// One observed point of a velocity step response.
struct StepSample {
    double t;    ///< time since the command step [s]
    double v;    ///< observed body velocity at t [m/s]
    double v0;   ///< body velocity when the step was issued [m/s]
    double v_c;  ///< commanded velocity [m/s]
};

/// Identifies the first-order time constant from step-response data by a
/// least-squares fit of slope s in ln((v_c - v)/(v_c - v0)) = -s t, returning
/// tau = 1/s. Samples with a non-positive log argument (overshoot past the
/// command) or a negligible step are skipped rather than failing the fit.
inline double fit_tau(std::span<const StepSample> samples) {
    double st_sum = 0.0;   // sum of t * ln(r)
    double tt_sum = 0.0;   // sum of t^2
    int n_valid = 0;
    for (const auto& s : samples) {
        if (!(s.t >= 0.0)) continue;
        const double denom = s.v_c - s.v0;
        if (std::abs(denom) < 1e-9) continue;
        const double r = (s.v_c - s.v) / denom;
        if (!(r > 0.0)) continue;  // overshoot or settled exactly on the command
        if (s.t == 0.0) continue;  // no information at t = 0
        st_sum += s.t * std::log(r);
        tt_sum += s.t * s.t;
        ++n_valid;
    }
    if (n_valid < 2) throw IdentificationError("fit_tau: fewer than 2 usable samples");
    const double slope = -st_sum / tt_sum;
    if (!(slope > 0.0)) throw IdentificationError("fit_tau: fitted slope is not positive");
    return 1.0 / slope;
}

}  // namespace altmpc

#pragma once

#include <cmath>
#include <cstddef>
#include <utility>
#include <variant>
#include <vector>

#include "altmpc/errors.hpp"

namespace altmpc {

/// Wraps an angle to (-pi, pi].
inline double normalize_angle(double a) {
    a = std::fmod(a, 2.0 * M_PI);
    if (a <= -M_PI) a += 2.0 * M_PI;
    if (a > M_PI) a -= 2.0 * M_PI;
    return a;
}

/// Wrapped difference a - b in (-pi, pi].
inline double angle_diff(double a, double b) { return normalize_angle(a - b); }

/// Pose, heading rate, and actual body velocity of the ego vehicle.
/// `v` is what the plant achieves, never the commanded velocity.
struct VehicleState {
    double x = 0.0;         ///< position [m]
    double y = 0.0;         ///< position [m]
    double theta = 0.0;     ///< heading [rad], kept in (-pi, pi]
    double theta_dot = 0.0; ///< heading rate [rad/s]
    double v = 0.0;         ///< body velocity [m/s]

    bool finite() const {
        return std::isfinite(x) && std::isfinite(y) && std::isfinite(theta) &&
               std::isfinite(theta_dot) && std::isfinite(v);
    }
};

/// Horizon-length command sequences: v_c[i] and theta_ddot[i] act over the
/// i-th step of duration dt, starting from body velocity v0.
struct ControlSequence {
    std::vector<double> v_c;        ///< commanded velocities [m/s]
    std::vector<double> theta_ddot; ///< angular accelerations [rad/s^2]
    double dt = 0.1;                ///< step duration [s]
    double v0 = 0.0;                ///< body velocity at the start [m/s]

    std::size_t size() const { return v_c.size(); }

    void validate() const {
        if (v_c.empty() || v_c.size() != theta_ddot.size())
            throw InvalidInputError("ControlSequence: sequences must be non-empty and equal length");
        if (!(dt > 0.0)) throw InvalidInputError("ControlSequence: dt must be positive");
    }
};

/// First-order velocity response with time constant tau.
struct FirstOrder {
    double tau = 0.5;  ///< [s]
};

/// Velocity ramps linearly to the command within each step
/// (equivalent to piecewise-constant acceleration input).
struct LinearRamp {};

/// Underdamped second-order velocity response; plant-side only. The defaults
/// produce a visibly oscillatory response (~4.6% step overshoot, zero initial
/// slope) that is slower than the default modeled first-order lag, stressing
/// planners under actuator mismatch.
struct SecondOrder {
    double omega_n = 2.0;  ///< natural frequency [rad/s]
    double zeta = 0.7;     ///< damping ratio
};

using ActuatorModel = std::variant<FirstOrder, LinearRamp, SecondOrder>;

inline void validate(const ActuatorModel& m) {
    if (const auto* fo = std::get_if<FirstOrder>(&m)) {
        if (!(fo->tau > 0.0)) throw InvalidParameterError("FirstOrder: tau must be > 0");
    } else if (const auto* so = std::get_if<SecondOrder>(&m)) {
        if (!(so->omega_n > 0.0) || !(so->zeta > 0.0))
            throw InvalidParameterError("SecondOrder: omega_n and zeta must be > 0");
    }
}

/// Time constant as a function of body velocity: either fixed or interpolated
/// over (velocity, tau) breakpoints with clamping outside the range.
class TauSchedule {
  public:
    TauSchedule() = default;  // constant 0.5 s

    static TauSchedule constant(double tau) {
        if (!(tau > 0.0)) throw InvalidParameterError("TauSchedule: tau must be > 0");
        TauSchedule s;
        s.breakpoints_ = {{0.0, tau}};
        return s;
    }

    static TauSchedule piecewise_linear(std::vector<std::pair<double, double>> pts) {
        if (pts.empty()) throw InvalidParameterError("TauSchedule: need at least one breakpoint");
        for (std::size_t i = 0; i < pts.size(); ++i) {
            if (!(pts[i].second > 0.0))
                throw InvalidParameterError("TauSchedule: all tau values must be > 0");
            if (i > 0 && !(pts[i].first > pts[i - 1].first))
                throw InvalidParameterError("TauSchedule: breakpoint velocities must be strictly increasing");
        }
        TauSchedule s;
        s.breakpoints_ = std::move(pts);
        return s;
    }

    bool is_constant() const { return breakpoints_.size() == 1; }

    double at(double v) const {
        const auto& b = breakpoints_;
        if (b.size() == 1 || v <= b.front().first) return b.front().second;
        if (v >= b.back().first) return b.back().second;
        std::size_t i = 1;
        while (b[i].first < v) ++i;
        const double t = (v - b[i - 1].first) / (b[i].first - b[i - 1].first);
        return b[i - 1].second + t * (b[i].second - b[i - 1].second);
    }

    const std::vector<std::pair<double, double>>& breakpoints() const { return breakpoints_; }

  private:
    std::vector<std::pair<double, double>> breakpoints_{{0.0, 0.5}};
};

inline double tau_at(const TauSchedule& schedule, double v) { return schedule.at(v); }

/// Plant-side state: the vehicle state plus the internal acceleration state
/// used by the second-order actuator model.
struct PlantState {
    VehicleState state;
    double v_dot = 0.0;  ///< internal dv/dt, used by SecondOrder only
};

}  // namespace altmpc

// Comparison metrics over executed simulation traces: inter-vehicle
// clearances, velocity overshoot and post-transition oscillation, smoothness
// cost totals re-evaluated on the executed command history, and per-tick
// planner statistics. Pure functions of the trace; recomputation is
// idempotent.
#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <vector>

#include "altmpc/sim.hpp"

namespace altmpc {

struct MetricsReport {
    /// Smallest center-to-center distance minus combined radius against any
    /// scripted vehicle, on actual plant states [m]. +inf without vehicles.
    double min_inter_vehicle_distance = std::numeric_limits<double>::infinity();
    std::map<int, double> min_distance_by_obstacle;  ///< per obstacle id, all kinds
    double min_boundary_clearance = std::numeric_limits<double>::infinity();
    bool collision = false;  ///< true iff min_inter_vehicle_distance < 0

    double velocity_overshoot_pct = 0.0;  ///< worst per-transition excursion past its settled target
    double settling_oscillation = 0.0;    ///< RMS of v second-differences after the command moves

    double j_v = 0.0;      ///< jerk cost of the executed commanded velocities
    double j_theta = 0.0;  ///< executed angular-acceleration cost

    double mean_iterations = 0.0;
    int max_iterations = 0;
    double mean_wall_ms = 0.0;
    double max_wall_ms = 0.0;
    int degraded_ticks = 0;
    int ticks = 0;
};

/// Segmentation constants for commanded-speed transitions. A plateau is a
/// span where the smoothed command stays inside a kLevelBand-wide range for
/// at least kPlateauDwell; a transition is the move between two plateaus
/// whose settled levels differ by at least kMinTransitionStep.
inline constexpr double kSmoothingHalfWindow = 0.25;  ///< command smoothing [s]
inline constexpr double kLevelBand = 0.5;             ///< plateau band width [m/s]
inline constexpr double kPlateauDwell = 1.0;          ///< minimum settled hold [s]
/// Smallest plateau level change that counts as a commanded-speed transition.
/// Set to the full plateau band width so the departure and arrival bands
/// cannot overlap: anything smaller is indistinguishable from holding speed.
inline constexpr double kMinTransitionStep = 2.0 * kLevelBand;

/// One commanded-speed transition: the command departs a settled level after
/// tick `from` and holds its new level through tick `settle_end`.
struct VelocityTransition {
    std::size_t from = 0;        ///< last tick of the departed plateau
    std::size_t settle_end = 0;  ///< last tick of the arrival plateau
    double initial = 0.0;        ///< body velocity at `from`
    double target = 0.0;         ///< settled command level arrived at
};

namespace detail {

/// Body-velocity series of a run: one sample per tick plus the final state.
inline std::vector<double> body_velocity_series(const SimResult& run) {
    std::vector<double> v;
    v.reserve(run.trace.size() + 1);
    for (const TickRecord& r : run.trace) v.push_back(r.state.v);
    if (!run.trace.empty()) v.push_back(run.final_state.v);
    return v;
}

/// Centered moving mean with shrinking windows at the edges.
inline std::vector<double> moving_mean(const std::vector<double>& x, std::size_t half) {
    std::vector<double> prefix(x.size() + 1, 0.0);
    for (std::size_t k = 0; k < x.size(); ++k) prefix[k + 1] = prefix[k] + x[k];
    std::vector<double> s(x.size());
    for (std::size_t k = 0; k < x.size(); ++k) {
        const std::size_t lo = k >= half ? k - half : 0;
        const std::size_t hi = std::min(x.size() - 1, k + half);
        s[k] = (prefix[hi + 1] - prefix[lo]) / static_cast<double>(hi - lo + 1);
    }
    return s;
}

struct CommandPlateau {
    std::size_t begin = 0;
    std::size_t end = 0;  ///< inclusive
    double level = 0.0;   ///< median of the raw commands across the span
};

/// Median of cmd[begin..end] inclusive.
inline double raw_median(const std::vector<double>& cmd, std::size_t begin, std::size_t end) {
    std::vector<double> span(cmd.begin() + static_cast<std::ptrdiff_t>(begin),
                             cmd.begin() + static_cast<std::ptrdiff_t>(end + 1));
    const std::size_t mid = span.size() / 2;
    std::nth_element(span.begin(), span.begin() + static_cast<std::ptrdiff_t>(mid), span.end());
    double level = span[mid];
    if (span.size() % 2 == 0) {
        const double below =
            *std::max_element(span.begin(), span.begin() + static_cast<std::ptrdiff_t>(mid));
        level = 0.5 * (level + below);
    }
    return level;
}

/// Per-tick replanning jitter is suppressed by smoothing over this window
/// before any plateau geometry is read off the command series.
inline std::vector<double> smoothed_commands(const std::vector<double>& cmd, double dt) {
    const auto half = static_cast<std::size_t>(std::llround(kSmoothingHalfWindow / dt));
    return moving_mean(cmd, std::max<std::size_t>(1, half));
}

/// Finds settled command levels. Smoothing suppresses per-tick replanning
/// jitter; the raw-command median keeps the level itself unbiased. Span
/// edges that drift more than half the band from the median belong to the
/// neighboring move, not the plateau, and are trimmed off so the settled
/// boundaries stay honest. The pre-trace command is represented by a virtual
/// single-tick plateau so a trace that opens mid-step still yields a
/// transition with the recorded starting level.
inline std::vector<CommandPlateau> command_plateaus(const std::vector<double>& cmd,
                                                    double dt) {
    std::vector<CommandPlateau> out;
    if (cmd.empty()) return out;
    out.push_back({0, 0, cmd.front()});
    const std::size_t n = cmd.size();
    const std::size_t dwell = std::max<std::size_t>(
        2, static_cast<std::size_t>(std::llround(kPlateauDwell / dt)));
    const std::vector<double> s = smoothed_commands(cmd, dt);

    std::size_t k = 1;
    while (k < n) {
        double lo = s[k], hi = s[k];
        std::size_t e = k;
        while (e + 1 < n) {
            const double nl = std::min(lo, s[e + 1]);
            const double nh = std::max(hi, s[e + 1]);
            if (nh - nl > kLevelBand) break;
            lo = nl;
            hi = nh;
            ++e;
        }
        if (e - k + 1 >= dwell) {
            const double rough = raw_median(cmd, k, e);
            std::size_t begin = k, end = e;
            while (begin < end && std::abs(s[begin] - rough) > 0.5 * kLevelBand) ++begin;
            while (end > begin && std::abs(s[end] - rough) > 0.5 * kLevelBand) --end;
            if (end - begin + 1 >= dwell)
                out.push_back({begin, end, raw_median(cmd, begin, end)});
            k = e + 1;
        } else {
            ++k;
        }
    }
    return out;
}

}  // namespace detail

/// Segments a run's command history into commanded-speed transitions:
/// consecutive settled levels differing by at least kMinTransitionStep. A
/// trailing command move that never settles before the trace ends has no
/// target and is not a transition. An arrival level only counts as settled
/// if the command, after the plateau, holds its band to the end of the trace
/// or first leaves it against the step direction; a plateau the command
/// departs the same way it arrived is a pause inside one continuing move
/// (goal attraction produces long creeps with such pauses), not a target.
inline std::vector<VelocityTransition> commanded_speed_transitions(const SimResult& run) {
    std::vector<VelocityTransition> out;
    if (run.trace.size() < 2 || !(run.dt > 0.0)) return out;
    std::vector<double> cmd(run.trace.size());
    for (std::size_t k = 0; k < cmd.size(); ++k) cmd[k] = run.trace[k].v_cmd;
    const std::vector<detail::CommandPlateau> plateaus = detail::command_plateaus(cmd, run.dt);
    const std::vector<double> s = detail::smoothed_commands(cmd, run.dt);
    const std::vector<double> v_body = detail::body_velocity_series(run);
    for (std::size_t j = 0; j + 1 < plateaus.size(); ++j) {
        const detail::CommandPlateau& a = plateaus[j];
        const detail::CommandPlateau& b = plateaus[j + 1];
        const double step = b.level - a.level;
        if (std::abs(step) < kMinTransitionStep) continue;
        bool paused_mid_move = false;
        for (std::size_t k = b.end + 1; k < s.size(); ++k) {
            const double dev = s[k] - b.level;
            if (std::abs(dev) <= kLevelBand) continue;
            paused_mid_move = (dev > 0.0) == (step > 0.0);
            break;
        }
        if (paused_mid_move) continue;
        out.push_back({a.end, b.end, v_body[a.end], b.level});
    }
    return out;
}

/// Overshoot of one transition: the worst excursion of the body velocity
/// past the settled target in the transition's direction, as a percentage of
/// the commanded step, clamped at zero. The search window runs from the
/// start of the move through the end of the arrival plateau.
inline double transition_overshoot_pct(const std::vector<double>& v_body,
                                       const VelocityTransition& t) {
    const double step = t.target - t.initial;
    if (std::abs(step) < 1e-9) return 0.0;
    const double dir = step > 0.0 ? 1.0 : -1.0;
    double worst = 0.0;
    for (std::size_t k = t.from + 1; k < v_body.size() && k <= t.settle_end + 1; ++k)
        worst = std::max(worst, dir * (v_body[k] - t.target));
    return worst / std::abs(step) * 100.0;
}

/// RMS of the raw second differences v[k-1] - 2 v[k] + v[k+1] over the tail
/// of the series starting at `from` (first interior index considered).
inline double second_difference_rms(const std::vector<double>& v, std::size_t from) {
    double sum = 0.0;
    std::size_t n = 0;
    for (std::size_t k = std::max<std::size_t>(from, 1); k + 1 < v.size(); ++k) {
        const double d2 = v[k - 1] - 2.0 * v[k] + v[k + 1];
        sum += d2 * d2;
        ++n;
    }
    return n == 0 ? 0.0 : std::sqrt(sum / static_cast<double>(n));
}

/// Computes every report field from one executed run. Overshoot is the worst
/// per-transition overshoot across all commanded-speed transitions; the
/// oscillation window opens at the first tick whose command deviates from
/// the initial command by more than 0.1 m/s.
inline MetricsReport compute_metrics(const SimResult& run) {
    MetricsReport m;
    m.ticks = run.ticks();
    if (run.trace.empty()) return m;

    m.min_distance_by_obstacle = run.min_clearance_by_id;
    m.min_inter_vehicle_distance = run.min_vehicle_clearance;
    for (const auto& [id, c] : run.min_clearance_by_id)
        if (id < 0) m.min_boundary_clearance = std::min(m.min_boundary_clearance, c);
    m.collision = m.min_inter_vehicle_distance < 0.0;

    // --- velocity transition metrics ---
    const std::vector<double> v_body = detail::body_velocity_series(run);
    const std::size_t n = run.trace.size();
    for (const VelocityTransition& t : commanded_speed_transitions(run))
        m.velocity_overshoot_pct =
            std::max(m.velocity_overshoot_pct, transition_overshoot_pct(v_body, t));

    std::size_t change = n;  // first tick where the command has visibly moved
    for (std::size_t k = 0; k < n; ++k) {
        if (std::abs(run.trace[k].v_cmd - run.trace.front().v_cmd) > 0.1) {
            change = k;
            break;
        }
    }
    if (change < n) m.settling_oscillation = second_difference_rms(v_body, change);

    // --- smoothness of the executed command history (same boundary handling
    // as the planner: the leading jerk sample is the initial body velocity) ---
    const double dt2 = run.dt * run.dt;
    const auto cmd = [&](std::size_t j) {
        return j == 0 ? run.trace.front().state.v : run.trace[j - 1].v_cmd;
    };
    for (std::size_t i = 1; i + 1 <= n; ++i) {
        const double jerk = (cmd(i - 1) - 2.0 * cmd(i) + cmd(i + 1)) / dt2;
        m.j_v += jerk * jerk;
    }
    for (const TickRecord& r : run.trace) m.j_theta += r.theta_ddot_cmd * r.theta_ddot_cmd;

    // --- planner statistics ---
    for (const TickRecord& r : run.trace) {
        m.mean_iterations += r.iterations;
        m.max_iterations = std::max(m.max_iterations, r.iterations);
        m.mean_wall_ms += r.wall_ms;
        m.max_wall_ms = std::max(m.max_wall_ms, r.wall_ms);
        if (r.degraded) ++m.degraded_ticks;
    }
    m.mean_iterations /= static_cast<double>(n);
    m.mean_wall_ms /= static_cast<double>(n);
    return m;
}

}  // namespace altmpc

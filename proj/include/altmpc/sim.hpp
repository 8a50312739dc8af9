// Closed-loop simulation: at every control period replan from the measured
// plant state, apply the first command of the newest plan through the chosen
// actuator plant, and record a per-tick trace with ground-truth clearances.
#pragma once

#include <Eigen/Dense>

#include <chrono>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "altmpc/collision.hpp"
#include "altmpc/dynamics.hpp"
#include "altmpc/errors.hpp"
#include "altmpc/joint_planner.hpp"
#include "altmpc/planner.hpp"
#include "altmpc/scenario.hpp"
#include "altmpc/types.hpp"

namespace altmpc {

enum class PlannerKind { Alternating, Joint };

/// Actuator assumption inside the planner's prediction model.
enum class PredictionModel { FirstOrder, LinearRamp };

/// The ramp model is the zero-memory limit of the first-order chain: with
/// tau -> 0 the decay factor underflows to exactly 0 and v(t_i) = v_c[i-1],
/// i.e. the command is reached within its own step.
inline constexpr double kRampTau = 1e-9;

inline TauSchedule prediction_schedule(PredictionModel model, double tau) {
    return TauSchedule::constant(model == PredictionModel::FirstOrder ? tau : kRampTau);
}

/// Planner configuration for a scenario: limits and goal come from the scene,
/// the velocity chain from the chosen prediction model.
inline PlannerConfig scenario_planner_config(const ScenarioConfig& sc,
                                             PredictionModel model = PredictionModel::FirstOrder,
                                             double tau = 0.5) {
    PlannerConfig cfg;
    cfg.v_max = sc.v_max;
    cfg.a_min = sc.a_min;
    cfg.a_max = sc.a_max;
    cfg.goal = sc.goal;
    cfg.tau_schedule = prediction_schedule(model, tau);
    return cfg;
}

struct SimOptions {
    PlannerKind planner = PlannerKind::Alternating;
    PredictionModel prediction = PredictionModel::FirstOrder;
    double prediction_tau = 0.5;        ///< chain time constant [s]
    ActuatorModel plant = FirstOrder{}; ///< what the vehicle actually does
    int substeps = 10;                  ///< plant integration substeps per period
    std::optional<int> max_ticks;       ///< overrides the scenario duration
    std::optional<PlannerConfig> config;  ///< full override; default from scenario
    /// Radius inflation on vehicle obstacles as seen by the planner. The goal
    /// pull makes converged plans bind the collision constraint exactly, so a
    /// blocked ego settles at zero true clearance without it; metrics always
    /// use the true radii.
    double planning_margin = 0.4;
};

/// One control period: the plant state when the plan was made, the command
/// applied over the following period, and that instant's true clearance.
struct TickRecord {
    double t = 0.0;
    VehicleState state;
    double v_cmd = 0.0;
    double theta_ddot_cmd = 0.0;
    double min_clearance = 0.0;  ///< ground truth over all obstacles [m]
    int iterations = 0;
    int qp_solves = 0;
    double wall_ms = 0.0;
    bool degraded = false;
    /// Worst Eq. (10)-style violation of the plan's final rollout [m^2];
    /// NaN on degraded ticks, which have no plan.
    double planned_violation = std::numeric_limits<double>::quiet_NaN();
    /// Worst KKT residual over the tick's QP subproblems; NaN when degraded.
    double worst_kkt = std::numeric_limits<double>::quiet_NaN();
};

struct SimResult {
    std::string scenario_name;
    double dt = 0.1;
    std::vector<TickRecord> trace;
    VehicleState final_state;
    double final_clearance = std::numeric_limits<double>::infinity();
    bool collision = false;     ///< any sampled clearance fell below zero
    bool any_degraded = false;  ///< at least one tick used the fallback command
    double min_clearance = std::numeric_limits<double>::infinity();
    double min_vehicle_clearance = std::numeric_limits<double>::infinity();
    std::map<int, double> min_clearance_by_id;  ///< per obstacle, scripted agents and walls

    int ticks() const { return static_cast<int>(trace.size()); }
};

/// Smallest gap between any ego footprint circle and the obstacle's combined
/// circle at absolute time t (negative means overlap).
inline double obstacle_clearance(const VehicleState& s, const Obstacle& obs, double t_abs,
                                 std::span<const double> circle_offsets) {
    const Eigen::Vector2d c = obs.position(t_abs);
    const double cos_t = std::cos(s.theta);
    const double sin_t = std::sin(s.theta);
    double best = std::numeric_limits<double>::infinity();
    for (double off : circle_offsets) {
        const Eigen::Vector2d center(s.x + off * cos_t, s.y + off * sin_t);
        best = std::min(best, (center - c).norm() - obs.radius_combined);
    }
    return best;
}

/// Rebases obstacles from absolute time into the planner's relative clock
/// (plan time 0 is "now"), including the visibility gate.
inline std::vector<Obstacle> obstacles_relative_to(std::span<const Obstacle> absolute,
                                                   double t_now) {
    std::vector<Obstacle> rel(absolute.begin(), absolute.end());
    for (Obstacle& o : rel) {
        const auto base = o.position;
        o.position = [base, t_now](double t_rel) { return base(t_now + t_rel); };
        o.visible_from -= t_now;
    }
    return rel;
}

/// Previous plan advanced by one elapsed period: drop the first command,
/// repeat the last one, and re-roll from the given state so the guess is
/// self-consistent.
inline GuessTrajectory shift_warm_start(const GuessTrajectory& prev, const VehicleState& state,
                                        double dt, const TauSchedule& schedule) {
    std::vector<double> v_c(prev.v_c.begin() + 1, prev.v_c.end());
    std::vector<double> theta_ddot(prev.theta_ddot.begin() + 1, prev.theta_ddot.end());
    v_c.push_back(prev.v_c.back());
    theta_ddot.push_back(prev.theta_ddot.back());
    return roll_guess(state, std::move(v_c), std::move(theta_ddot), dt, schedule);
}

/// Runs the scenario tick by tick. The planner only ever sees the true plant
/// state and the obstacles rebased to its relative clock; the plant never
/// sees linearized quantities. Planner failures fall back to straight-line
/// braking at a_min and mark the tick degraded; a collision flags the run and
/// the simulation continues.
inline SimResult run_simulation(const ScenarioConfig& sc, const SimOptions& opt = {}) {
    sc.validate();
    validate(opt.plant);
    if (opt.substeps < 1) throw InvalidParameterError("run_simulation: substeps must be >= 1");
    PlannerConfig cfg =
        opt.config ? *opt.config : scenario_planner_config(sc, opt.prediction, opt.prediction_tau);
    cfg.validate();

    if (opt.planning_margin < 0.0 || !std::isfinite(opt.planning_margin))
        throw InvalidParameterError("run_simulation: planning_margin must be finite and >= 0");

    const std::vector<Obstacle> obstacles = scenario_obstacles(sc, cfg.footprint);
    std::vector<Obstacle> planner_obstacles = obstacles;
    for (Obstacle& o : planner_obstacles)
        if (o.kind == ObstacleKind::Vehicle) o.radius_combined += opt.planning_margin;
    const std::vector<double> offsets = cfg.footprint.circle_offsets();
    const int n_ticks = opt.max_ticks ? *opt.max_ticks
                                      : static_cast<int>(std::lround(sc.duration / cfg.dt));
    if (n_ticks < 0) throw InvalidParameterError("run_simulation: negative tick count");

    SimResult out;
    out.scenario_name = sc.name;
    out.dt = cfg.dt;
    out.trace.reserve(static_cast<std::size_t>(n_ticks));

    PlantState plant;
    plant.state = sc.ego_start;
    plant.state.theta = normalize_angle(plant.state.theta);

    const auto probe_clearance = [&](const VehicleState& s, double t_abs) {
        double global = std::numeric_limits<double>::infinity();
        for (const Obstacle& o : obstacles) {
            const double c = obstacle_clearance(s, o, t_abs, offsets);
            global = std::min(global, c);
            auto [it, inserted] = out.min_clearance_by_id.try_emplace(o.id, c);
            if (!inserted) it->second = std::min(it->second, c);
            if (o.kind == ObstacleKind::Vehicle)
                out.min_vehicle_clearance = std::min(out.min_vehicle_clearance, c);
        }
        out.min_clearance = std::min(out.min_clearance, global);
        if (global < 0.0) out.collision = true;
        return global;
    };

    std::optional<GuessTrajectory> warm;
    for (int k = 0; k < n_ticks; ++k) {
        const double t_now = k * cfg.dt;
        const std::vector<Obstacle> rel = obstacles_relative_to(planner_obstacles, t_now);
        if (warm) warm = shift_warm_start(*warm, plant.state, cfg.dt, cfg.tau_schedule);

        TickRecord rec;
        rec.t = t_now;
        rec.state = plant.state;
        rec.min_clearance = probe_clearance(plant.state, t_now);

        const auto t0 = std::chrono::steady_clock::now();
        try {
            const PlannerResult res = opt.planner == PlannerKind::Alternating
                                          ? plan(plant.state, rel, cfg, warm)
                                          : plan_joint(plant.state, rel, cfg, warm);
            rec.v_cmd = res.controls.v_c.front();
            rec.theta_ddot_cmd = res.controls.theta_ddot.front();
            rec.iterations = res.iterations;
            rec.qp_solves = res.qp_solves;
            rec.wall_ms = res.wall_time * 1e3;
            rec.planned_violation = res.max_violation;
            rec.worst_kkt = res.worst_kkt;
            warm = res.guess;
        } catch (const PlannerFailureError&) {
            rec.degraded = true;
            rec.v_cmd = std::max(plant.state.v + cfg.a_min * cfg.dt, 0.0);
            rec.theta_ddot_cmd = 0.0;
            rec.wall_ms = std::chrono::duration<double, std::milli>(
                              std::chrono::steady_clock::now() - t0)
                              .count();
            out.any_degraded = true;
        }

        out.trace.push_back(rec);
        plant = plant_step(plant, rec.v_cmd, rec.theta_ddot_cmd, opt.plant, cfg.dt,
                           cfg.dt / opt.substeps);
    }

    out.final_state = plant.state;
    if (n_ticks > 0) out.final_clearance = probe_clearance(plant.state, n_ticks * cfg.dt);
    return out;
}

}  // namespace altmpc

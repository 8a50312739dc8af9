// Benchmark scenes: straight multi-lane road, scripted obstacle agents with
// piecewise-constant-acceleration velocity profiles, the three named
// benchmark scenarios, and a seeded random suite with a guaranteed free
// corridor.
#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "altmpc/collision.hpp"
#include "altmpc/errors.hpp"
#include "altmpc/planner.hpp"
#include "altmpc/types.hpp"

namespace altmpc {

/// One segment of an agent's velocity profile: hold a constant acceleration
/// for a duration. After the last phase the final speed is held forever.
struct AgentPhase {
    double duration = 0.0;  ///< seconds
    double accel = 0.0;     ///< m/s^2
};

/// A scripted (non-reactive) traffic agent driving a straight line.
struct AgentScript {
    int id = 0;
    double x0 = 0.0;
    double y0 = 0.0;
    double heading = 0.0;  ///< radians; agents move along this fixed direction
    double v0 = 0.0;       ///< initial speed, m/s
    std::vector<AgentPhase> phases;
    double radius = 1.3;  ///< the agent's own circle radius [m]
    double visible_from = -std::numeric_limits<double>::infinity();
};

/// Speed (clamped at zero: scripts never reverse) at absolute time t.
inline double agent_speed(const AgentScript& a, double t) {
    double v = a.v0;
    double t_left = std::max(t, 0.0);
    for (const AgentPhase& p : a.phases) {
        if (t_left <= 0.0) break;
        const double dt = std::min(t_left, p.duration);
        v = std::max(0.0, v + p.accel * dt);
        t_left -= dt;
    }
    return v;
}

/// Distance traveled along the heading by absolute time t.
inline double agent_arclength(const AgentScript& a, double t) {
    double v = a.v0;
    double s = 0.0;
    double t_left = std::max(t, 0.0);
    for (const AgentPhase& p : a.phases) {
        if (t_left <= 0.0) break;
        const double dt = std::min(t_left, p.duration);
        if (p.accel < 0.0 && v + p.accel * dt < 0.0) {
            const double t_stop = v / -p.accel;
            s += 0.5 * v * t_stop;  // decelerate to rest, then stand still
            v = 0.0;
        } else {
            s += v * dt + 0.5 * p.accel * dt * dt;
            v = std::max(0.0, v + p.accel * dt);
        }
        t_left -= dt;
    }
    s += v * t_left;  // hold final speed beyond the scripted phases
    return s;
}

inline Eigen::Vector2d agent_position(const AgentScript& a, double t) {
    const double s = agent_arclength(a, t);
    return {a.x0 + s * std::cos(a.heading), a.y0 + s * std::sin(a.heading)};
}

/// Collision obstacle for an agent: combined radius folds in the ego
/// footprint circle radius, position is the script sampled in absolute time.
inline Obstacle agent_obstacle(const AgentScript& a, double r_ego) {
    Obstacle obs;
    obs.id = a.id;
    obs.kind = ObstacleKind::Vehicle;
    obs.radius_combined = a.radius + r_ego;
    obs.visible_from = a.visible_from;
    obs.position = [a](double t) { return agent_position(a, t); };
    return obs;
}

struct ScenarioConfig {
    std::string name;
    RoadGeometry road;
    VehicleState ego_start;
    PlannerGoal goal;
    std::vector<AgentScript> agents;
    double duration = 10.0;  ///< simulated seconds
    double v_max = 25.0;
    double a_max = 4.0;
    double a_min = -6.0;

    /// Scripted agents, ego start, and goal must stay on the road for the
    /// whole duration (sampled at 0.1 s).
    void validate() const {
        if (name.empty()) throw InvalidScenarioError("scenario: name must not be empty");
        if (!(duration >= 0.0) || !std::isfinite(duration))
            throw InvalidScenarioError("scenario '" + name + "': duration must be >= 0");
        if (!(road.x_end > road.x_begin) && duration > 0.0)
            throw InvalidScenarioError("scenario '" + name + "': road has no extent");
        const double half = 0.5 * road.width();
        const auto on_road_y = [&](double y) { return std::abs(y) <= half + 1e-9; };
        if (!on_road_y(ego_start.y))
            throw InvalidScenarioError("scenario '" + name + "': ego starts off the road");
        if (!on_road_y(goal.y))
            throw InvalidScenarioError("scenario '" + name + "': goal is off the road");
        for (const AgentScript& a : agents) {
            for (double t = 0.0; t <= duration + 1e-9; t += 0.1) {
                const Eigen::Vector2d p = agent_position(a, t);
                if (!on_road_y(p.y()) || p.x() < road.x_begin - 1e-9 ||
                    p.x() > road.x_end + 1e-9)
                    throw InvalidScenarioError("scenario '" + name + "': agent " +
                                               std::to_string(a.id) + " leaves the road");
            }
        }
    }
};

/// All collision obstacles of a scenario: scripted agents plus road-boundary
/// circle walls. A larger boundary radius keeps the circle count down without
/// changing the effective wall line.
inline std::vector<Obstacle> scenario_obstacles(const ScenarioConfig& sc,
                                                const VehicleFootprint& footprint,
                                                double boundary_radius = 4.0) {
    const double r_ego = footprint.circle_radius();
    std::vector<Obstacle> out = road_boundary_obstacles(sc.road, r_ego, boundary_radius);
    out.reserve(out.size() + sc.agents.size());
    for (const AgentScript& a : sc.agents) out.push_back(agent_obstacle(a, r_ego));
    return out;
}

/// Coarse grid check that some lateral line y = const stays clear of every
/// agent's swept band for the whole duration (with margin). Guarantees a
/// trivially feasible corridor exists; the planner still has to find it.
inline bool free_corridor_exists(const ScenarioConfig& sc, const VehicleFootprint& footprint,
                                 double margin = 0.3) {
    const double r_ego = footprint.circle_radius();
    const double half = 0.5 * sc.road.width();
    const double y_lo = -half + r_ego;
    const double y_hi = half - r_ego;
    if (y_hi <= y_lo) return false;
    for (double yc = y_lo; yc <= y_hi + 1e-9; yc += 0.25) {
        bool clear = true;
        for (const AgentScript& a : sc.agents) {
            const double keep_out = a.radius + r_ego + margin;
            for (double t = 0.0; t <= sc.duration + 1e-9; t += 0.25) {
                if (std::abs(agent_position(a, t).y() - yc) < keep_out) {
                    clear = false;
                    break;
                }
            }
            if (!clear) break;
        }
        if (clear) return true;
    }
    return false;
}

/// Ego at 15 m/s behind a slow van in its own lane; an initially occluded
/// car in the passing lane is revealed as the overtake begins and forces the
/// ego to shed speed and settle near the car's 12 m/s while sliding past the
/// van. The goal sits beyond the distance the ego can cover in the allotted
/// time, so the terminal attraction never asks it to brake for arrival.
inline ScenarioConfig scenario_occluded_overtake() {
    ScenarioConfig sc;
    sc.name = "occluded_overtake";
    sc.road = RoadGeometry{-40.0, 320.0, 2, 3.5};
    sc.ego_start = VehicleState{0.0, sc.road.lane_center(0), 0.0, 0.0, 15.0};
    sc.goal = PlannerGoal{260.0, sc.road.lane_center(1), 0.0};
    sc.duration = 12.0;

    AgentScript van;
    van.id = 1;
    van.x0 = 42.0;
    van.y0 = sc.road.lane_center(0);
    van.v0 = 9.0;
    van.radius = 1.5;
    sc.agents.push_back(van);

    AgentScript occluded;
    occluded.id = 2;
    occluded.x0 = 28.0;
    occluded.y0 = sc.road.lane_center(1);
    occluded.v0 = 12.0;
    occluded.visible_from = 3.0;  // revealed as the ego commits to the pass
    sc.agents.push_back(occluded);
    return sc;
}

/// Ego at 10 m/s forced into the adjacent 15 m/s lane: a slow truck blocks
/// its own lane while two vehicles sweep through the target lane, the first
/// close enough to rule out merging ahead of it, the second spaced so the
/// lane stays occupied until well after the ego has had to settle to the
/// truck's pace. Once the second car clears, the ego merges behind it and
/// the far goal pulls it back up toward the lane's flow.
inline ScenarioConfig scenario_lane_change() {
    ScenarioConfig sc;
    sc.name = "lane_change";
    sc.road = RoadGeometry{-80.0, 320.0, 2, 3.5};
    sc.ego_start = VehicleState{0.0, sc.road.lane_center(0), 0.0, 0.0, 10.0};
    sc.goal = PlannerGoal{260.0, sc.road.lane_center(1), 0.0};
    sc.duration = 12.0;

    AgentScript truck;
    truck.id = 1;
    truck.x0 = 22.0;
    truck.y0 = sc.road.lane_center(0);
    truck.v0 = 6.0;
    truck.radius = 1.5;
    sc.agents.push_back(truck);

    AgentScript lead;
    lead.id = 2;
    lead.x0 = 30.0;
    lead.y0 = sc.road.lane_center(1);
    lead.v0 = 15.0;
    sc.agents.push_back(lead);

    for (int k = 0; k < 3; ++k) {
        AgentScript rear;
        rear.id = 3 + k;
        rear.x0 = k == 0 ? -8.0 : k == 1 ? -22.0 : -44.0;
        rear.y0 = sc.road.lane_center(1);
        rear.v0 = 15.0;
        sc.agents.push_back(rear);
    }
    return sc;
}

/// Ego following a lead vehicle, both at 15 m/s on a single-lane road. The
/// lead brakes hard down to 8 m/s, holds, then recovers only to 12 m/s, so
/// the ego must shed speed under the actuator lag and settle behind a slower
/// vehicle. The brake event sits inside the ego's horizon from the first
/// plan; the gap is sized so the closed loop never crosses the point where
/// even full braking would be too late, with enough reserve for plants that
/// respond slower than the modeled lag.
inline ScenarioConfig scenario_sudden_brake() {
    ScenarioConfig sc;
    sc.name = "sudden_brake";
    sc.road = RoadGeometry{-40.0, 400.0, 1, 3.5};
    sc.ego_start = VehicleState{0.0, 0.0, 0.0, 0.0, 15.0};
    sc.goal = PlannerGoal{250.0, 0.0, 0.0};
    sc.duration = 12.0;

    AgentScript lead;
    lead.id = 1;
    lead.x0 = 40.0;
    lead.y0 = 0.0;
    lead.v0 = 15.0;
    // cruise, brake to 8 m/s, hold, recover to 12 m/s, hold
    lead.phases = {{0.8, 0.0}, {2.0, -3.5}, {1.2, 0.0}, {2.0, 2.0}};
    sc.agents.push_back(lead);
    return sc;
}

inline std::vector<ScenarioConfig> paper_scenarios() {
    return {scenario_occluded_overtake(), scenario_lane_change(), scenario_sudden_brake()};
}

/// Deterministic random suite. Each scene keeps one lane clear over the whole
/// duration (verified by the corridor check); the ego starts in the other,
/// obstructed lane among 2-5 parked or slow-moving agents and must merge.
inline std::vector<ScenarioConfig> random_scenarios(unsigned seed, int count) {
    if (count < 0) throw InvalidInputError("random_scenarios: count must be >= 0");
    std::mt19937 rng(seed);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    const VehicleFootprint footprint;

    std::vector<ScenarioConfig> out;
    out.reserve(static_cast<std::size_t>(count));
    for (int s = 0; s < count; ++s) {
        ScenarioConfig sc;
        sc.name = "random_" + std::to_string(seed) + "_" + std::to_string(s);
        sc.road = RoadGeometry{-60.0, 600.0, 2, 3.5};
        sc.duration = 10.0;

        const int ego_lane = uni(rng) < 0.5 ? 0 : 1;
        const int free_lane = 1 - ego_lane;
        const double ego_v = 8.0 + 7.0 * uni(rng);
        sc.ego_start = VehicleState{0.0, sc.road.lane_center(ego_lane), 0.0, 0.0, ego_v};
        sc.goal = PlannerGoal{110.0 + 40.0 * uni(rng), sc.road.lane_center(free_lane), 0.0};

        const int n_agents = 2 + static_cast<int>(uni(rng) * 4.0);  // 2..5
        // agents are non-reactive, so speeds must not decrease with position
        // or a faster agent would drive through a slower one ahead
        std::vector<double> speeds(static_cast<std::size_t>(n_agents));
        for (double& v : speeds) v = uni(rng) < 0.4 ? 0.0 : 3.0 + 6.0 * uni(rng);
        std::sort(speeds.begin(), speeds.end());
        double x = 0.0;
        for (int i = 0; i < n_agents; ++i) {
            AgentScript a;
            a.id = i + 1;
            a.v0 = speeds[static_cast<std::size_t>(i)];
            // first gap sized for stay-behind braking authority; rest spaced out
            const double closing = std::max(0.0, ego_v - a.v0);
            const double required = closing * closing / 2.0 + 25.0;
            x += i == 0 ? std::max(60.0, required) + 30.0 * uni(rng)
                        : 30.0 + 25.0 * uni(rng);
            a.x0 = x;
            a.y0 = sc.road.lane_center(ego_lane) + (uni(rng) - 0.5);
            a.radius = 1.1 + 0.4 * uni(rng);
            sc.agents.push_back(a);
        }
        sc.validate();
        if (!free_corridor_exists(sc, footprint))
            throw InvalidScenarioError("random_scenarios: generated scene has no corridor");
        out.push_back(std::move(sc));
    }
    return out;
}

}  // namespace altmpc

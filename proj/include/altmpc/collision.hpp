// Circle-overlap collision constraints: exact evaluation, linearization
// around a guess trajectory, and road boundaries as rows of static circles.
#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <limits>
#include <span>
#include <vector>

#include "altmpc/errors.hpp"

namespace altmpc {

enum class ObstacleKind { Vehicle, RoadBoundary };

/// A single obstacle circle. Multi-circle vehicles contribute one entry per
/// circle, sharing the same id so metrics can group them.
struct Obstacle {
    int id = 0;
    ObstacleKind kind = ObstacleKind::Vehicle;
    /// Combined radius: ego circle radius + obstacle circle radius.
    double radius_combined = 1.0;
    /// Absolute time at which the obstacle becomes observable. Used to
    /// script occlusions deterministically.
    double visible_from = 0.0;
    /// Center position as a function of absolute time [s].
    std::function<Eigen::Vector2d(double)> position;
};

/// Obstacle whose center moves with constant velocity from (x0, y0) at t0.
inline Obstacle constant_velocity_obstacle(int id, double x0, double y0, double vx, double vy,
                                           double radius_combined, double t0 = 0.0,
                                           double visible_from = 0.0,
                                           ObstacleKind kind = ObstacleKind::Vehicle) {
    Obstacle o;
    o.id = id;
    o.kind = kind;
    o.radius_combined = radius_combined;
    o.visible_from = visible_from;
    o.position = [x0, y0, vx, vy, t0](double t) {
        return Eigen::Vector2d(x0 + vx * (t - t0), y0 + vy * (t - t0));
    };
    return o;
}

/// Signed overlap measure between two circles with combined radius R:
///   c = R^2 - (x - x_i)^2 - (y - y_i)^2.
/// c <= 0 means collision-free, c > 0 means the circles overlap.
inline double eval_constraint(const Eigen::Vector2d& ego_xy, const Eigen::Vector2d& obs_xy,
                              double R) {
    if (!(R > 0.0)) throw InvalidParameterError("eval_constraint: combined radius must be > 0");
    return R * R - (ego_xy - obs_xy).squaredNorm();
}

/// One linearized collision row: the affine model of eval_constraint in
/// (x, y), expanded around the guess point (x_hat, y_hat) at horizon `step`.
struct CollisionRow {
    int step = 0;          ///< horizon index into the guess trajectory
    int obstacle_id = 0;
    double grad_x = 0.0;   ///< d c / d x at the guess
    double grad_y = 0.0;   ///< d c / d y at the guess
    double offset = 0.0;   ///< constraint value at the guess [m^2]
    double x_hat = 0.0;
    double y_hat = 0.0;
};

/// Affine constraint value at (x, y):
///   c_lin = offset + grad_x * (x - x_hat) + grad_y * (y - y_hat).
/// Because c is concave in (x, y), c_lin >= c everywhere, so enforcing
/// c_lin <= 0 is conservative.
inline double affine_value(const CollisionRow& row, double x, double y) {
    return row.offset + row.grad_x * (x - row.x_hat) + row.grad_y * (y - row.y_hat);
}

/// Linearization of all collision constraints around one guess trajectory.
struct LinearizedConstraint {
    std::vector<CollisionRow> rows;
    std::vector<Eigen::Vector2d> guess;  ///< trajectory the rows were built around
};

struct LinearizeOptions {
    /// Planning instant; obstacles with visible_from > plan_time are skipped.
    /// Defaults to times.front().
    double plan_time = std::numeric_limits<double>::quiet_NaN();
    /// Vehicles whose center at plan_time is farther than this from the first
    /// guess point are not sensed. Road boundaries are map knowledge and are
    /// never range-filtered.
    double sensing_range = 70.0;
    /// Rows whose clearance at the guess exceeds these margins are dropped;
    /// they cannot become active within one trust-region step.
    double prune_clearance_vehicle = 30.0;
    double prune_clearance_boundary = 8.0;
};

/// Builds one affine row per (obstacle, step) pair that survives visibility,
/// sensing-range, and clearance filters. Gradients follow
///   grad_x = -2 (x_hat - x_i),  grad_y = -2 (y_hat - y_i).
inline LinearizedConstraint linearize(std::span<const Eigen::Vector2d> guess_traj,
                                      std::span<const Obstacle> obstacles,
                                      std::span<const double> times,
                                      const LinearizeOptions& opts = {}) {
    if (guess_traj.size() != times.size())
        throw InvalidInputError("linearize: guess trajectory and time grid differ in length");
    LinearizedConstraint out;
    out.guess.assign(guess_traj.begin(), guess_traj.end());
    if (guess_traj.empty()) return out;

    const double plan_time = std::isnan(opts.plan_time) ? times.front() : opts.plan_time;
    const Eigen::Vector2d ego_now = guess_traj.front();

    for (const Obstacle& obs : obstacles) {
        if (!obs.position) throw InvalidInputError("linearize: obstacle has no trajectory");
        if (obs.visible_from > plan_time) continue;
        if (obs.kind == ObstacleKind::Vehicle &&
            (obs.position(plan_time) - ego_now).norm() > opts.sensing_range)
            continue;
        const double prune = obs.kind == ObstacleKind::Vehicle ? opts.prune_clearance_vehicle
                                                               : opts.prune_clearance_boundary;
        for (std::size_t k = 0; k < times.size(); ++k) {
            const Eigen::Vector2d center = obs.position(times[k]);
            const Eigen::Vector2d& p = guess_traj[k];
            const double dist = (p - center).norm();
            if (dist - obs.radius_combined > prune) continue;
            CollisionRow row;
            row.step = static_cast<int>(k);
            row.obstacle_id = obs.id;
            row.grad_x = -2.0 * (p.x() - center.x());
            row.grad_y = -2.0 * (p.y() - center.y());
            row.offset = eval_constraint(p, center, obs.radius_combined);
            row.x_hat = p.x();
            row.y_hat = p.y();
            out.rows.push_back(row);
        }
    }
    return out;
}

/// Rectangular vehicle body covered by circles placed along its long axis.
struct VehicleFootprint {
    double length = 4.6;
    double width = 1.8;
    int n_circles = 3;

    void validate() const {
        if (!(length > 0.0) || !(width > 0.0))
            throw InvalidParameterError("VehicleFootprint: length and width must be > 0");
        if (n_circles < 1) throw InvalidParameterError("VehicleFootprint: need at least one circle");
    }

    /// Radius so that n_circles equal circles cover the length x width box.
    double circle_radius() const {
        validate();
        const double half_seg = 0.5 * length / n_circles;
        return std::hypot(half_seg, 0.5 * width);
    }

    /// Circle-center offsets along the body x-axis, rear to front.
    std::vector<double> circle_offsets() const {
        validate();
        std::vector<double> off(static_cast<std::size_t>(n_circles));
        for (int i = 0; i < n_circles; ++i)
            off[static_cast<std::size_t>(i)] = ((i + 0.5) / n_circles - 0.5) * length;
        return off;
    }
};

/// Straight multi-lane road along the x-axis, centered on y = 0.
struct RoadGeometry {
    double x_begin = 0.0;
    double x_end = 0.0;
    int n_lanes = 2;
    double lane_width = 3.5;

    double width() const { return n_lanes * lane_width; }
    double y_right() const { return -0.5 * width(); }
    double y_left() const { return 0.5 * width(); }
    /// Center line of lane i, i = 0 being the rightmost (lowest y).
    double lane_center(int i) const { return y_right() + (i + 0.5) * lane_width; }
};

/// Models both road edges as rows of static circles. Spacing is chosen so an
/// ego circle of radius r_ego cannot slip between adjacent boundary circles:
///   spacing <= 2 sqrt(R^2 - r_ego^2)   with boundary circle radius R.
/// Circle centers sit a full radius R outside the edge so the constraint
/// boundary touches the road edge itself.
inline std::vector<Obstacle> road_boundary_obstacles(const RoadGeometry& road, double r_ego,
                                                     double boundary_radius = 2.0,
                                                     int id_start = -1000) {
    if (!(r_ego > 0.0))
        throw InvalidParameterError("road_boundary_obstacles: ego circle radius must be > 0");
    if (road.n_lanes < 1 || !(road.lane_width > 0.0))
        throw InvalidScenarioError("road_boundary_obstacles: road needs >= 1 lane of positive width");
    const double length = road.x_end - road.x_begin;
    if (length < 0.0) throw InvalidScenarioError("road_boundary_obstacles: negative road length");
    if (length == 0.0) return {};
    if (road.lane_width <= 2.0 * r_ego)
        throw InvalidScenarioError("road_boundary_obstacles: lane narrower than vehicle footprint");
    if (boundary_radius <= r_ego)
        throw InvalidScenarioError(
            "road_boundary_obstacles: boundary radius must exceed ego circle radius");

    const double spacing_max =
        2.0 * std::sqrt(boundary_radius * boundary_radius - r_ego * r_ego);
    const int count = static_cast<int>(std::ceil(length / spacing_max)) + 1;
    const double spacing = count > 1 ? length / (count - 1) : 0.0;

    std::vector<Obstacle> out;
    out.reserve(2 * static_cast<std::size_t>(count));
    int id = id_start;
    for (const double y : {road.y_left() + boundary_radius, road.y_right() - boundary_radius}) {
        for (int i = 0; i < count; ++i) {
            const double x = road.x_begin + spacing * i;
            Obstacle o;
            o.id = id--;
            o.kind = ObstacleKind::RoadBoundary;
            o.radius_combined = boundary_radius + r_ego;
            o.visible_from = -std::numeric_limits<double>::infinity();
            o.position = [x, y](double) { return Eigen::Vector2d(x, y); };
            out.push_back(std::move(o));
        }
    }
    return out;
}

}  // namespace altmpc

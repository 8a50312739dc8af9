#include "altmpc/collision.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

namespace {

using namespace altmpc;
using Eigen::Vector2d;

TEST(EvalConstraint, HandValues) {
    EXPECT_DOUBLE_EQ(eval_constraint({0.0, 0.0}, {3.0, 4.0}, 2.0), -21.0);
    EXPECT_DOUBLE_EQ(eval_constraint({1.0, -2.0}, {1.0, -2.0}, 2.0), 4.0);
    EXPECT_DOUBLE_EQ(eval_constraint({0.0, 0.0}, {2.0, 0.0}, 2.0), 0.0);
}

TEST(EvalConstraint, SymmetricInArguments) {
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(-50.0, 50.0);
    for (int i = 0; i < 100; ++i) {
        const Vector2d a{u(rng), u(rng)}, b{u(rng), u(rng)};
        EXPECT_DOUBLE_EQ(eval_constraint(a, b, 3.0), eval_constraint(b, a, 3.0));
    }
}

TEST(EvalConstraint, RejectsNonPositiveRadius) {
    EXPECT_THROW(eval_constraint({0, 0}, {1, 1}, 0.0), InvalidParameterError);
    EXPECT_THROW(eval_constraint({0, 0}, {1, 1}, -1.0), InvalidParameterError);
}

std::vector<double> time_grid(std::size_t n, double dt = 0.1, double t0 = 0.0) {
    std::vector<double> t(n);
    for (std::size_t i = 0; i < n; ++i) t[i] = t0 + dt * static_cast<double>(i);
    return t;
}

TEST(Linearize, HandGradient) {
    const std::vector<Vector2d> guess = {{0.0, 0.0}};
    const auto times = time_grid(1);
    const std::vector<Obstacle> obs = {constant_velocity_obstacle(7, 3.0, 4.0, 0.0, 0.0, 2.0)};
    const auto lin = linearize(guess, obs, times);
    ASSERT_EQ(lin.rows.size(), 1u);
    EXPECT_EQ(lin.rows[0].step, 0);
    EXPECT_EQ(lin.rows[0].obstacle_id, 7);
    EXPECT_DOUBLE_EQ(lin.rows[0].grad_x, 6.0);
    EXPECT_DOUBLE_EQ(lin.rows[0].grad_y, 8.0);
    EXPECT_DOUBLE_EQ(lin.rows[0].offset, -21.0);
}

TEST(Linearize, AffineMatchesExactAtGuess) {
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u(-20.0, 20.0);
    for (int trial = 0; trial < 100; ++trial) {
        const Vector2d p{u(rng), u(rng)}, c{u(rng), u(rng)};
        const std::vector<Vector2d> guess = {p};
        const std::vector<Obstacle> obs = {
            constant_velocity_obstacle(0, c.x(), c.y(), 0.0, 0.0, 2.5)};
        LinearizeOptions opts;
        opts.prune_clearance_vehicle = 1e9;  // keep every row in this test
        const auto lin = linearize(guess, obs, time_grid(1), opts);
        ASSERT_EQ(lin.rows.size(), 1u);
        EXPECT_NEAR(affine_value(lin.rows[0], p.x(), p.y()), eval_constraint(p, c, 2.5), 1e-12);
    }
}

TEST(Linearize, FiniteDifferenceGradient) {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-20.0, 20.0);
    const double h = 1e-6;
    for (int trial = 0; trial < 300; ++trial) {
        Vector2d p{u(rng), u(rng)}, c{u(rng), u(rng)};
        if ((p - c).norm() < 0.5) continue;  // keep configurations generic
        const std::vector<Vector2d> guess = {p};
        const std::vector<Obstacle> obs = {
            constant_velocity_obstacle(0, c.x(), c.y(), 0.0, 0.0, 2.0)};
        LinearizeOptions opts;
        opts.prune_clearance_vehicle = 1e9;
        const auto lin = linearize(guess, obs, time_grid(1), opts);
        ASSERT_EQ(lin.rows.size(), 1u);
        const double fd_x = (eval_constraint({p.x() + h, p.y()}, c, 2.0) -
                             eval_constraint({p.x() - h, p.y()}, c, 2.0)) /
                            (2.0 * h);
        const double fd_y = (eval_constraint({p.x(), p.y() + h}, c, 2.0) -
                             eval_constraint({p.x(), p.y() - h}, c, 2.0)) /
                            (2.0 * h);
        EXPECT_NEAR(lin.rows[0].grad_x, fd_x, 1e-4);
        EXPECT_NEAR(lin.rows[0].grad_y, fd_y, 1e-4);
    }
}

// The exact constraint is concave in (x, y), so its linearization bounds it
// from above everywhere. Enforcing the affine row therefore never admits a
// point the exact constraint would reject.
TEST(Linearize, OverApproximatesEverywhere) {
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> u(-30.0, 30.0);
    for (int trial = 0; trial < 1000; ++trial) {
        const Vector2d p{u(rng), u(rng)}, c{u(rng), u(rng)}, q{u(rng), u(rng)};
        const std::vector<Vector2d> guess = {p};
        const std::vector<Obstacle> obs = {
            constant_velocity_obstacle(0, c.x(), c.y(), 0.0, 0.0, 3.0)};
        LinearizeOptions opts;
        opts.prune_clearance_vehicle = 1e9;
        opts.sensing_range = 1e9;
        const auto lin = linearize(guess, obs, time_grid(1), opts);
        ASSERT_EQ(lin.rows.size(), 1u);
        EXPECT_GE(affine_value(lin.rows[0], q.x(), q.y()),
                  eval_constraint(q, c, 3.0) - 1e-10);
    }
}

TEST(Linearize, MovingObstacleSampledPerStep) {
    const std::vector<Vector2d> guess = {{0.0, 0.0}, {1.0, 0.0}, {2.0, 0.0}};
    const auto times = time_grid(3, 0.5);
    const std::vector<Obstacle> obs = {constant_velocity_obstacle(1, 10.0, 0.0, -2.0, 0.0, 2.0)};
    const auto lin = linearize(guess, obs, times);
    ASSERT_EQ(lin.rows.size(), 3u);
    // obstacle x at t = 0, 0.5, 1.0 is 10, 9, 8; guess x is 0, 1, 2
    EXPECT_DOUBLE_EQ(lin.rows[0].offset, 4.0 - 100.0);
    EXPECT_DOUBLE_EQ(lin.rows[1].offset, 4.0 - 64.0);
    EXPECT_DOUBLE_EQ(lin.rows[2].offset, 4.0 - 36.0);
}

TEST(Linearize, HiddenObstacleExcluded) {
    const std::vector<Vector2d> guess = {{0.0, 0.0}, {1.0, 0.0}};
    const auto times = time_grid(2);
    std::vector<Obstacle> obs = {constant_velocity_obstacle(1, 5.0, 0.0, 0.0, 0.0, 2.0)};
    obs[0].visible_from = 10.0;
    EXPECT_TRUE(linearize(guess, obs, times).rows.empty());
    obs[0].visible_from = 0.0;
    EXPECT_EQ(linearize(guess, obs, times).rows.size(), 2u);
    // planning at a later instant reveals it as well
    obs[0].visible_from = 10.0;
    LinearizeOptions opts;
    opts.plan_time = 10.0;
    EXPECT_EQ(linearize(guess, obs, times, opts).rows.size(), 2u);
}

TEST(Linearize, VehiclesBeyondSensingRangeExcluded) {
    const std::vector<Vector2d> guess = {{0.0, 0.0}};
    const auto times = time_grid(1);
    std::vector<Obstacle> obs = {constant_velocity_obstacle(1, 100.0, 0.0, 0.0, 0.0, 2.0)};
    LinearizeOptions opts;
    opts.prune_clearance_vehicle = 1e9;
    EXPECT_TRUE(linearize(guess, obs, times, opts).rows.empty());
    obs[0] = constant_velocity_obstacle(1, 60.0, 0.0, 0.0, 0.0, 2.0);
    EXPECT_EQ(linearize(guess, obs, times, opts).rows.size(), 1u);
    // road boundaries are map knowledge, not subject to the sensing range
    obs[0] = constant_velocity_obstacle(2, 100.0, 0.0, 0.0, 0.0, 2.0, 0.0, 0.0,
                                        ObstacleKind::RoadBoundary);
    LinearizeOptions bopts;
    bopts.prune_clearance_boundary = 1e9;
    EXPECT_EQ(linearize(guess, obs, times, bopts).rows.size(), 1u);
}

TEST(Linearize, DistantRowsPruned) {
    const std::vector<Vector2d> guess = {{0.0, 0.0}, {1.0, 0.0}};
    const auto times = time_grid(2);
    const std::vector<Obstacle> obs = {constant_velocity_obstacle(1, 50.0, 0.0, 0.0, 0.0, 2.0)};
    LinearizeOptions opts;
    opts.prune_clearance_vehicle = 10.0;  // clearance at guess is ~47 m
    EXPECT_TRUE(linearize(guess, obs, times, opts).rows.empty());
}

TEST(Linearize, LengthMismatchThrows) {
    const std::vector<Vector2d> guess = {{0.0, 0.0}, {1.0, 0.0}};
    EXPECT_THROW(linearize(guess, {}, time_grid(3)), InvalidInputError);
}

TEST(VehicleFootprint, ThreeCircleCover) {
    const VehicleFootprint fp;  // 4.6 x 1.8, 3 circles
    EXPECT_NEAR(fp.circle_radius(), std::hypot(4.6 / 6.0, 0.9), 1e-12);
    const auto off = fp.circle_offsets();
    ASSERT_EQ(off.size(), 3u);
    EXPECT_NEAR(off[0], -4.6 / 3.0, 1e-12);
    EXPECT_NEAR(off[1], 0.0, 1e-12);
    EXPECT_NEAR(off[2], 4.6 / 3.0, 1e-12);
    // every corner of the box lies inside some circle
    for (const double sx : {-1.0, 1.0})
        for (const double sy : {-1.0, 1.0}) {
            const Vector2d corner{sx * 2.3, sy * 0.9};
            double best = 1e9;
            for (const double o : off) best = std::min(best, (corner - Vector2d{o, 0.0}).norm());
            EXPECT_LE(best, fp.circle_radius() + 1e-12);
        }
}

TEST(RoadGeometry, LaneLayout) {
    const RoadGeometry road{0.0, 100.0, 2, 3.5};
    EXPECT_DOUBLE_EQ(road.width(), 7.0);
    EXPECT_DOUBLE_EQ(road.y_right(), -3.5);
    EXPECT_DOUBLE_EQ(road.y_left(), 3.5);
    EXPECT_DOUBLE_EQ(road.lane_center(0), -1.75);
    EXPECT_DOUBLE_EQ(road.lane_center(1), 1.75);
}

TEST(RoadBoundary, CountAndPlacement) {
    const RoadGeometry road{0.0, 200.0, 2, 3.5};
    const double r_ego = VehicleFootprint{}.circle_radius();
    const double R_b = 2.0;
    const auto circles = road_boundary_obstacles(road, r_ego, R_b);

    const double spacing_max = 2.0 * std::sqrt(R_b * R_b - r_ego * r_ego);
    const int per_side = static_cast<int>(std::ceil(200.0 / spacing_max)) + 1;
    ASSERT_EQ(circles.size(), 2u * static_cast<std::size_t>(per_side));

    for (const auto& o : circles) {
        EXPECT_EQ(o.kind, ObstacleKind::RoadBoundary);
        EXPECT_DOUBLE_EQ(o.radius_combined, R_b + r_ego);
        const Vector2d p = o.position(0.0);
        EXPECT_GE(p.x(), 0.0);
        EXPECT_LE(p.x(), 200.0);
        EXPECT_TRUE(std::abs(p.y() - (3.5 + R_b)) < 1e-9 || std::abs(p.y() - (-3.5 - R_b)) < 1e-9);
        EXPECT_EQ(o.position(5.0), o.position(0.0)) << "boundary circles are static";
    }

    // adjacent same-side circles never exceed the blocking spacing
    std::vector<double> left_x;
    for (const auto& o : circles)
        if (o.position(0.0).y() > 0.0) left_x.push_back(o.position(0.0).x());
    std::sort(left_x.begin(), left_x.end());
    ASSERT_EQ(static_cast<int>(left_x.size()), per_side);
    EXPECT_DOUBLE_EQ(left_x.front(), 0.0);
    EXPECT_DOUBLE_EQ(left_x.back(), 200.0);
    for (std::size_t i = 1; i < left_x.size(); ++i)
        EXPECT_LE(left_x[i] - left_x[i - 1], spacing_max + 1e-9);
}

// An ego circle center placed anywhere on the road edge line overlaps some
// boundary circle: the wall has no gaps.
TEST(RoadBoundary, EdgeLineIsBlocked) {
    const RoadGeometry road{0.0, 120.0, 2, 3.5};
    const double r_ego = VehicleFootprint{}.circle_radius();
    const auto circles = road_boundary_obstacles(road, r_ego);
    for (double x = 0.0; x <= 120.0; x += 0.05) {
        for (const double y_edge : {road.y_left(), road.y_right()}) {
            double worst = -1e18;
            for (const auto& o : circles)
                worst = std::max(worst,
                                 eval_constraint({x, y_edge}, o.position(0.0), o.radius_combined));
            EXPECT_GT(worst, 0.0) << "gap at x=" << x << " y=" << y_edge;
        }
    }
}

TEST(RoadBoundary, DegenerateInputs) {
    const double r_ego = 1.0;
    EXPECT_TRUE(road_boundary_obstacles({5.0, 5.0, 2, 3.5}, r_ego).empty());
    EXPECT_THROW(road_boundary_obstacles({0.0, -1.0, 2, 3.5}, r_ego), InvalidScenarioError);
    EXPECT_THROW(road_boundary_obstacles({0.0, 100.0, 2, 1.8}, r_ego), InvalidScenarioError);
    EXPECT_THROW(road_boundary_obstacles({0.0, 100.0, 2, 3.5}, r_ego, 0.9), InvalidScenarioError);
}

}  // namespace

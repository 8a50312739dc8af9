// Tests for the benchmark scenes: scripted-agent kinematics against hand
// integration, the named scenario invariants, road validation, the free
// corridor check, and determinism of the random suite.
#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <vector>

#include "altmpc/scenario.hpp"

namespace altmpc {
namespace {

// --- scripted agent kinematics -------------------------------------------

TEST(AgentKinematics, SpeedAndArclengthMatchHandIntegration) {
    // Cruise 1 s at 15 m/s, then brake at 3 m/s^2 for 10/3 s down to 5 m/s,
    // then hold. Closed-form values by piecewise integration.
    AgentScript a;
    a.v0 = 15.0;
    a.phases = {{1.0, 0.0}, {10.0 / 3.0, -3.0}};

    EXPECT_DOUBLE_EQ(agent_speed(a, 0.0), 15.0);
    EXPECT_DOUBLE_EQ(agent_speed(a, 0.5), 15.0);
    EXPECT_NEAR(agent_speed(a, 2.0), 12.0, 1e-12);
    EXPECT_NEAR(agent_speed(a, 1.0 + 10.0 / 3.0), 5.0, 1e-12);
    EXPECT_NEAR(agent_speed(a, 9.0), 5.0, 1e-12);

    EXPECT_NEAR(agent_arclength(a, 0.5), 7.5, 1e-12);
    EXPECT_NEAR(agent_arclength(a, 1.0), 15.0, 1e-12);
    EXPECT_NEAR(agent_arclength(a, 2.0), 15.0 + 15.0 - 1.5, 1e-12);
    const double s_brake_end = 15.0 + 15.0 * (10.0 / 3.0) - 1.5 * (10.0 / 3.0) * (10.0 / 3.0);
    EXPECT_NEAR(agent_arclength(a, 1.0 + 10.0 / 3.0), s_brake_end, 1e-12);
    EXPECT_NEAR(agent_arclength(a, 6.0), s_brake_end + 5.0 * (6.0 - 1.0 - 10.0 / 3.0), 1e-12);
}

TEST(AgentKinematics, DeceleratingAgentStopsAndStays) {
    // v0 = 4, decelerate at 2 m/s^2 for 3 s: rest is reached after 2 s having
    // covered 4 m; the remaining phase time and everything after holds still.
    AgentScript a;
    a.v0 = 4.0;
    a.phases = {{3.0, -2.0}};

    EXPECT_NEAR(agent_speed(a, 1.0), 2.0, 1e-12);
    EXPECT_DOUBLE_EQ(agent_speed(a, 2.0), 0.0);
    EXPECT_DOUBLE_EQ(agent_speed(a, 10.0), 0.0);
    EXPECT_NEAR(agent_arclength(a, 2.0), 4.0, 1e-12);
    EXPECT_NEAR(agent_arclength(a, 3.0), 4.0, 1e-12);
    EXPECT_NEAR(agent_arclength(a, 10.0), 4.0, 1e-12);
}

TEST(AgentKinematics, NegativeTimeClampsToStart) {
    AgentScript a;
    a.x0 = 3.0;
    a.y0 = -1.0;
    a.v0 = 7.0;
    a.phases = {{2.0, 1.0}};
    EXPECT_DOUBLE_EQ(agent_speed(a, -1.0), 7.0);
    EXPECT_DOUBLE_EQ(agent_arclength(a, -1.0), 0.0);
    const Eigen::Vector2d p = agent_position(a, -5.0);
    EXPECT_DOUBLE_EQ(p.x(), 3.0);
    EXPECT_DOUBLE_EQ(p.y(), -1.0);
}

TEST(AgentKinematics, HeadingRotatesDisplacement) {
    AgentScript a;
    a.x0 = 1.0;
    a.y0 = 2.0;
    a.heading = M_PI / 2.0;
    a.v0 = 3.0;
    const Eigen::Vector2d p = agent_position(a, 2.0);
    EXPECT_NEAR(p.x(), 1.0, 1e-12);
    EXPECT_NEAR(p.y(), 2.0 + 6.0, 1e-12);
}

TEST(AgentObstacle, CombinesRadiiAndTracksScript) {
    AgentScript a;
    a.id = 42;
    a.x0 = 10.0;
    a.v0 = 6.0;
    a.radius = 1.4;
    a.visible_from = 2.5;

    const Obstacle obs = agent_obstacle(a, 1.2);
    EXPECT_EQ(obs.id, 42);
    EXPECT_EQ(obs.kind, ObstacleKind::Vehicle);
    EXPECT_DOUBLE_EQ(obs.radius_combined, 1.4 + 1.2);
    EXPECT_DOUBLE_EQ(obs.visible_from, 2.5);
    for (double t : {0.0, 1.3, 4.0}) {
        const Eigen::Vector2d want = agent_position(a, t);
        const Eigen::Vector2d got = obs.position(t);
        EXPECT_NEAR((want - got).norm(), 0.0, 1e-15) << "t=" << t;
    }
}

// --- validation -----------------------------------------------------------

TEST(ScenarioValidate, RejectsBadDurationAndEmptyName) {
    ScenarioConfig sc = scenario_lane_change();
    sc.duration = -1.0;
    EXPECT_THROW(sc.validate(), InvalidScenarioError);
    sc.duration = std::numeric_limits<double>::quiet_NaN();
    EXPECT_THROW(sc.validate(), InvalidScenarioError);
    sc = scenario_lane_change();
    sc.name.clear();
    EXPECT_THROW(sc.validate(), InvalidScenarioError);
}

TEST(ScenarioValidate, RejectsOffRoadPlacements) {
    ScenarioConfig sc = scenario_lane_change();
    sc.ego_start.y = 0.5 * sc.road.width() + 0.5;
    EXPECT_THROW(sc.validate(), InvalidScenarioError);

    sc = scenario_lane_change();
    sc.goal.y = -0.5 * sc.road.width() - 1.0;
    EXPECT_THROW(sc.validate(), InvalidScenarioError);

    sc = scenario_lane_change();
    sc.agents[0].y0 = 0.5 * sc.road.width() + 0.2;
    EXPECT_THROW(sc.validate(), InvalidScenarioError);
}

TEST(ScenarioValidate, RejectsAgentDrivingOffTheRoadEnd) {
    ScenarioConfig sc = scenario_lane_change();
    sc.agents[0].x0 = sc.road.x_end - 5.0;  // 15 m/s for 12 s runs far past the end
    EXPECT_THROW(sc.validate(), InvalidScenarioError);
}

TEST(ScenarioValidate, ZeroDurationOnlyChecksInitialPlacement) {
    ScenarioConfig sc = scenario_lane_change();
    sc.duration = 0.0;
    sc.agents[0].x0 = sc.road.x_end - 5.0;  // fine at t = 0, never advances
    EXPECT_NO_THROW(sc.validate());
}

// --- named scenarios -------------------------------------------------------

TEST(NamedScenarios, AllValidateAndHaveDistinctNames) {
    const std::vector<ScenarioConfig> all = paper_scenarios();
    ASSERT_EQ(all.size(), 3u);
    std::set<std::string> names;
    for (const ScenarioConfig& sc : all) {
        EXPECT_NO_THROW(sc.validate()) << sc.name;
        names.insert(sc.name);
    }
    EXPECT_EQ(names.size(), 3u);
}

TEST(NamedScenarios, OccludedOvertakeShape) {
    const ScenarioConfig sc = scenario_occluded_overtake();
    EXPECT_DOUBLE_EQ(sc.ego_start.v, 15.0);
    ASSERT_EQ(sc.agents.size(), 2u);
    const AgentScript& van = sc.agents[0];
    const AgentScript& hidden = sc.agents[1];
    EXPECT_LT(van.v0, sc.ego_start.v);         // slow vehicle ahead in the ego lane
    EXPECT_NEAR(van.y0, sc.ego_start.y, 1e-12);
    EXPECT_GT(hidden.visible_from, 0.0);       // revealed mid-run, not at the start
    EXPECT_NEAR(hidden.y0, sc.goal.y, 1e-12);  // sits in the passing lane
    EXPECT_GT(hidden.x0, van.x0);
}

TEST(NamedScenarios, LaneChangeHasLeadAndRearInTargetLane) {
    const ScenarioConfig sc = scenario_lane_change();
    ASSERT_EQ(sc.agents.size(), 2u);
    EXPECT_GT(sc.agents[0].x0, sc.ego_start.x);
    EXPECT_LT(sc.agents[1].x0, sc.ego_start.x);  // traffic approaching from behind
    for (const AgentScript& a : sc.agents) {
        EXPECT_NEAR(a.y0, sc.goal.y, 1e-12);
        EXPECT_GT(a.v0, sc.ego_start.v);  // target lane flows faster than the ego
    }
}

TEST(NamedScenarios, SuddenBrakeLeadDipsAndRecovers) {
    const ScenarioConfig sc = scenario_sudden_brake();
    EXPECT_EQ(sc.road.n_lanes, 1);
    ASSERT_EQ(sc.agents.size(), 1u);
    const AgentScript& lead = sc.agents[0];
    EXPECT_DOUBLE_EQ(lead.v0, sc.ego_start.v);
    // hard dip followed by a partial recovery below the initial speed
    double v_min = lead.v0;
    for (double t = 0.0; t <= sc.duration; t += 0.05) v_min = std::min(v_min, agent_speed(lead, t));
    EXPECT_NEAR(v_min, 8.0, 1e-9);
    EXPECT_NEAR(agent_speed(lead, sc.duration), 12.0, 1e-9);
    for (const AgentPhase& p : lead.phases) {
        EXPECT_GE(p.accel, sc.a_min);  // the lead brakes no harder than the ego could
        EXPECT_LE(p.accel, sc.a_max);
    }
    // the brake event is inside the first plan's horizon, not sprung later
    EXPECT_LE(lead.x0 - sc.ego_start.x, 50.0);
}

TEST(NamedScenarios, ObstaclesCoverBoundariesAndAgents) {
    const ScenarioConfig sc = scenario_occluded_overtake();
    const VehicleFootprint fp;
    const std::vector<Obstacle> obs = scenario_obstacles(sc, fp);
    const std::vector<Obstacle> walls =
        road_boundary_obstacles(sc.road, fp.circle_radius(), 4.0);
    ASSERT_EQ(obs.size(), walls.size() + sc.agents.size());

    std::set<int> agent_ids;
    int n_vehicles = 0;
    for (const Obstacle& o : obs) {
        if (o.kind == ObstacleKind::Vehicle) {
            ++n_vehicles;
            agent_ids.insert(o.id);
        }
    }
    EXPECT_EQ(n_vehicles, 2);
    EXPECT_TRUE(agent_ids.count(1) == 1 && agent_ids.count(2) == 1);
}

// --- free corridor check ----------------------------------------------------

TEST(FreeCorridor, DetectsClearLaneAndFullBlockage) {
    ScenarioConfig sc;
    sc.name = "corridor_probe";
    sc.road = RoadGeometry{-20.0, 120.0, 2, 3.5};
    sc.ego_start = VehicleState{0.0, sc.road.lane_center(0), 0.0, 0.0, 5.0};
    sc.goal = PlannerGoal{80.0, sc.road.lane_center(1), 0.0};
    sc.duration = 5.0;

    AgentScript parked;
    parked.id = 1;
    parked.x0 = 40.0;
    parked.y0 = sc.road.lane_center(0);
    sc.agents.push_back(parked);

    const VehicleFootprint fp;
    EXPECT_TRUE(free_corridor_exists(sc, fp));

    AgentScript blocker = parked;
    blocker.id = 2;
    blocker.x0 = 60.0;
    blocker.y0 = sc.road.lane_center(1);
    sc.agents.push_back(blocker);
    EXPECT_FALSE(free_corridor_exists(sc, fp));
}

TEST(FreeCorridor, SingleLaneWithLeadVehicleHasNoCorridor) {
    // The sudden-brake scene has a lead in the only lane: no static line of
    // travel avoids it, which is exactly why it exercises longitudinal control.
    EXPECT_FALSE(free_corridor_exists(scenario_sudden_brake(), VehicleFootprint{}));
}

// --- random suite ------------------------------------------------------------

TEST(RandomScenarios, SameSeedReproducesIdenticalScenes) {
    const std::vector<ScenarioConfig> a = random_scenarios(7, 6);
    const std::vector<ScenarioConfig> b = random_scenarios(7, 6);
    ASSERT_EQ(a.size(), 6u);
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_EQ(a[i].name, b[i].name);
        EXPECT_EQ(a[i].ego_start.v, b[i].ego_start.v);  // bitwise: same RNG stream
        EXPECT_EQ(a[i].goal.x, b[i].goal.x);
        ASSERT_EQ(a[i].agents.size(), b[i].agents.size());
        for (std::size_t j = 0; j < a[i].agents.size(); ++j) {
            EXPECT_EQ(a[i].agents[j].x0, b[i].agents[j].x0);
            EXPECT_EQ(a[i].agents[j].y0, b[i].agents[j].y0);
            EXPECT_EQ(a[i].agents[j].v0, b[i].agents[j].v0);
            EXPECT_EQ(a[i].agents[j].radius, b[i].agents[j].radius);
        }
    }
    EXPECT_NE(random_scenarios(8, 1)[0].ego_start.v, a[0].ego_start.v);
}

TEST(RandomScenarios, EverysceneLeavesRoomToActAndAHomeLane) {
    const VehicleFootprint fp;
    for (const ScenarioConfig& sc : random_scenarios(123, 20)) {
        SCOPED_TRACE(sc.name);
        EXPECT_NO_THROW(sc.validate());
        EXPECT_TRUE(free_corridor_exists(sc, fp));
        ASSERT_GE(sc.agents.size(), 2u);
        ASSERT_LE(sc.agents.size(), 5u);
        // first obstruction is far enough to brake behind from the start speed
        EXPECT_GE(sc.agents.front().x0 - sc.ego_start.x, 60.0);
        for (std::size_t j = 0; j + 1 < sc.agents.size(); ++j) {
            EXPECT_GT(sc.agents[j + 1].x0, sc.agents[j].x0);
            // non-reactive traffic: nobody may catch up with the agent ahead
            EXPECT_LE(sc.agents[j].v0, sc.agents[j + 1].v0 + 1e-12);
        }
        // obstructions sit in the ego's lane; the goal is in the other one
        for (const AgentScript& a : sc.agents)
            EXPECT_LT(std::abs(a.y0 - sc.ego_start.y), 1.0);
        EXPECT_GT(std::abs(sc.goal.y - sc.ego_start.y), 3.0);
    }
}

TEST(RandomScenarios, CountEdgeCases) {
    EXPECT_TRUE(random_scenarios(1, 0).empty());
    EXPECT_THROW(random_scenarios(1, -1), InvalidInputError);
}

}  // namespace
}  // namespace altmpc

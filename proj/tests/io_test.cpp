// Serialization tests: pinned trace columns with a terminal record,
// step-sample round trips with strict parsing, and the JSON scenario schema
// including unknown-key rejection.
#include <gtest/gtest.h>

#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include "altmpc/scenario_io.hpp"
#include "altmpc/sim.hpp"
#include "altmpc/trace_io.hpp"

namespace altmpc {
namespace {

std::vector<std::string> split_lines(const std::string& text) {
    std::vector<std::string> lines;
    std::istringstream is(text);
    std::string line;
    while (std::getline(is, line)) lines.push_back(line);
    return lines;
}

int count_fields(const std::string& line) {
    return static_cast<int>(std::count(line.begin(), line.end(), ',')) + 1;
}

SimResult tiny_run() {
    ScenarioConfig sc;
    sc.name = "io_probe";
    sc.road = RoadGeometry{-40.0, 200.0, 2, 3.5};
    sc.ego_start = VehicleState{0.0, sc.road.lane_center(0), 0.0, 0.0, 10.0};
    sc.goal = PlannerGoal{150.0, sc.road.lane_center(0), 0.0};
    sc.duration = 0.5;
    return run_simulation(sc);
}

TEST(TraceCsv, PinnedColumnsAndTerminalRecord) {
    const SimResult run = tiny_run();
    ASSERT_EQ(run.ticks(), 5);
    std::ostringstream os;
    write_trace(os, run);
    const std::vector<std::string> lines = split_lines(os.str());

    // header + one record per tick + the terminal record
    ASSERT_EQ(lines.size(), 1u + 5u + 1u);
    EXPECT_EQ(lines[0], std::string(kTraceHeader));
    for (std::size_t i = 1; i < lines.size(); ++i) EXPECT_EQ(count_fields(lines[i]), 12);

    // the t column advances by dt through the terminal record
    for (std::size_t i = 1; i < lines.size(); ++i) {
        const double t = std::stod(lines[i].substr(0, lines[i].find(',')));
        EXPECT_NEAR(t, 0.1 * static_cast<double>(i - 1), 1e-12);
    }
    // terminal record carries no planner work
    const std::string& last = lines.back();
    std::vector<std::string> fields;
    std::istringstream fs(last);
    std::string f;
    while (std::getline(fs, f, ',')) fields.push_back(f);
    ASSERT_EQ(fields.size(), 12u);
    EXPECT_EQ(fields[9], "0");   // iters
    EXPECT_EQ(fields[10], "0");  // wall_ms
    EXPECT_EQ(fields[11], "0");  // degraded_flag
    EXPECT_NEAR(std::stod(fields[5]), run.final_state.v, 1e-6);  // 9 sig digits
}

TEST(TraceCsv, NineSignificantDigits) {
    EXPECT_EQ(format_g9(M_PI), "3.14159265");
    EXPECT_EQ(format_g9(-0.1), "-0.1");
    EXPECT_EQ(format_g9(123456789.0), "123456789");
    EXPECT_EQ(format_g9(0.0), "0");
}

TEST(StepSamplesCsv, RoundTripPreservesValues) {
    std::vector<StepSample> samples;
    for (int k = 0; k <= 20; ++k) {
        const double t = 0.05 * k;
        samples.push_back({t, first_order_response(3.0, 9.0, 0.7, t), 3.0, 9.0});
    }
    std::stringstream ss;
    write_step_samples(ss, samples);
    const std::vector<StepSample> back = read_step_samples(ss);
    ASSERT_EQ(back.size(), samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) {
        EXPECT_NEAR(back[i].t, samples[i].t, 1e-9);
        EXPECT_NEAR(back[i].v, samples[i].v, 1e-7);
        EXPECT_NEAR(back[i].v0, samples[i].v0, 1e-9);
        EXPECT_NEAR(back[i].v_c, samples[i].v_c, 1e-9);
    }
}

TEST(StepSamplesCsv, StrictParsing) {
    {
        std::istringstream is("wrong,header\n1,2,3,4\n");
        EXPECT_THROW(read_step_samples(is), ParseError);
    }
    {
        std::istringstream is("t,v,v0,v_c\n0.1,2.0,3.0\n");  // missing field
        EXPECT_THROW(read_step_samples(is), ParseError);
    }
    {
        std::istringstream is("t,v,v0,v_c\n0.1,2.0,3.0,4.0,5.0\n");  // extra field
        EXPECT_THROW(read_step_samples(is), ParseError);
    }
    {
        std::istringstream is("t,v,v0,v_c\nabc,2.0,3.0,4.0\n");
        EXPECT_THROW(read_step_samples(is), ParseError);
    }
    {
        std::istringstream is("");
        EXPECT_THROW(read_step_samples(is), ParseError);
    }
}

TEST(ScenarioJson, RoundTripPreservesEveryField) {
    for (const ScenarioConfig& sc : paper_scenarios()) {
        const ScenarioConfig back = scenario_from_json(scenario_to_json(sc));
        EXPECT_EQ(back.name, sc.name);
        EXPECT_DOUBLE_EQ(back.duration, sc.duration);
        EXPECT_DOUBLE_EQ(back.road.x_begin, sc.road.x_begin);
        EXPECT_DOUBLE_EQ(back.road.x_end, sc.road.x_end);
        EXPECT_EQ(back.road.n_lanes, sc.road.n_lanes);
        EXPECT_DOUBLE_EQ(back.road.lane_width, sc.road.lane_width);
        EXPECT_DOUBLE_EQ(back.ego_start.x, sc.ego_start.x);
        EXPECT_DOUBLE_EQ(back.ego_start.y, sc.ego_start.y);
        EXPECT_DOUBLE_EQ(back.ego_start.v, sc.ego_start.v);
        EXPECT_DOUBLE_EQ(back.goal.x, sc.goal.x);
        EXPECT_DOUBLE_EQ(back.goal.y, sc.goal.y);
        EXPECT_DOUBLE_EQ(back.v_max, sc.v_max);
        EXPECT_DOUBLE_EQ(back.a_min, sc.a_min);
        ASSERT_EQ(back.agents.size(), sc.agents.size());
        for (std::size_t i = 0; i < sc.agents.size(); ++i) {
            const AgentScript& a = sc.agents[i];
            const AgentScript& b = back.agents[i];
            EXPECT_EQ(b.id, a.id);
            EXPECT_DOUBLE_EQ(b.x0, a.x0);
            EXPECT_DOUBLE_EQ(b.y0, a.y0);
            EXPECT_DOUBLE_EQ(b.v0, a.v0);
            EXPECT_DOUBLE_EQ(b.radius, a.radius);
            EXPECT_EQ(b.visible_from, a.visible_from);  // -inf round-trips via omission
            ASSERT_EQ(b.phases.size(), a.phases.size());
            for (std::size_t p = 0; p < a.phases.size(); ++p) {
                EXPECT_DOUBLE_EQ(b.phases[p].duration, a.phases[p].duration);
                EXPECT_DOUBLE_EQ(b.phases[p].accel, a.phases[p].accel);
            }
        }
        // serialized form is loadable through the stream API too
        std::stringstream ss;
        save_scenario(ss, sc);
        EXPECT_EQ(load_scenario(ss).name, sc.name);
    }
}

TEST(ScenarioJson, UnknownKeysAreHardErrors) {
    nlohmann::json j = scenario_to_json(scenario_sudden_brake());
    j["typo_key"] = 1.0;
    try {
        scenario_from_json(j);
        FAIL() << "expected ParseError";
    } catch (const ParseError& e) {
        EXPECT_NE(std::string(e.what()).find("typo_key"), std::string::npos);
    }

    j = scenario_to_json(scenario_sudden_brake());
    j["road"]["widht"] = 3.5;
    try {
        scenario_from_json(j);
        FAIL() << "expected ParseError";
    } catch (const ParseError& e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find("widht"), std::string::npos);
        EXPECT_NE(msg.find("road"), std::string::npos);
    }

    j = scenario_to_json(scenario_sudden_brake());
    j["agents"][0]["speed"] = 3.0;
    EXPECT_THROW(scenario_from_json(j), ParseError);
}

TEST(ScenarioJson, MissingAndMistypedKeysAreRejected) {
    nlohmann::json j = scenario_to_json(scenario_lane_change());
    j["road"].erase("lane_width");
    EXPECT_THROW(scenario_from_json(j), ParseError);

    j = scenario_to_json(scenario_lane_change());
    j["duration"] = "twelve";
    EXPECT_THROW(scenario_from_json(j), ParseError);

    j = scenario_to_json(scenario_lane_change());
    j["road"]["n_lanes"] = 2.5;
    EXPECT_THROW(scenario_from_json(j), ParseError);

    j = scenario_to_json(scenario_lane_change());
    j["name"] = 7;
    EXPECT_THROW(scenario_from_json(j), ParseError);
}

TEST(ScenarioJson, MalformedDocumentReportsParseError) {
    std::istringstream is("{ this is not json");
    EXPECT_THROW(load_scenario(is), ParseError);
}

TEST(ScenarioJson, MissingFileReportsIoError) {
    EXPECT_THROW(load_scenario_file("/nonexistent/path/scene.json"), IoError);
}

}  // namespace
}  // namespace altmpc

// Scenario files: a human-readable JSON schema with nested sections (road,
// ego, goal, limits, agents). Unknown keys are hard errors so typos cannot
// silently change a benchmark; the full schema is documented in
// docs/scenario_format.md.
#pragma once

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <initializer_list>
#include <istream>
#include <limits>
#include <ostream>
#include <string>

#include "altmpc/errors.hpp"
#include "altmpc/scenario.hpp"

namespace altmpc {
namespace detail {

/// Rejects unknown keys and reports missing required ones, naming the section.
inline void check_keys(const nlohmann::json& obj, const std::string& section,
                       std::initializer_list<const char*> required,
                       std::initializer_list<const char*> optional = {}) {
    if (!obj.is_object())
        throw ParseError("scenario: section '" + section + "' must be an object");
    for (const auto& [key, value] : obj.items()) {
        const auto known = [&](std::initializer_list<const char*> names) {
            for (const char* n : names)
                if (key == n) return true;
            return false;
        };
        if (!known(required) && !known(optional))
            throw ParseError("scenario: unknown key '" + key + "' in section '" + section + "'");
    }
    for (const char* r : required)
        if (!obj.contains(r))
            throw ParseError("scenario: missing key '" + std::string(r) + "' in section '" +
                             section + "'");
}

inline double json_num(const nlohmann::json& obj, const std::string& section, const char* key) {
    const nlohmann::json& v = obj.at(key);
    if (!v.is_number())
        throw ParseError("scenario: key '" + std::string(key) + "' in section '" + section +
                         "' must be a number");
    return v.get<double>();
}

inline double json_num_or(const nlohmann::json& obj, const std::string& section, const char* key,
                          double fallback) {
    return obj.contains(key) ? json_num(obj, section, key) : fallback;
}

inline int json_int(const nlohmann::json& obj, const std::string& section, const char* key) {
    const nlohmann::json& v = obj.at(key);
    if (!v.is_number_integer())
        throw ParseError("scenario: key '" + std::string(key) + "' in section '" + section +
                         "' must be an integer");
    return v.get<int>();
}

}  // namespace detail

inline ScenarioConfig scenario_from_json(const nlohmann::json& j) {
    using detail::check_keys;
    using detail::json_int;
    using detail::json_num;
    using detail::json_num_or;

    check_keys(j, "(root)", {"name", "duration", "road", "ego", "goal", "agents"}, {"limits"});
    ScenarioConfig sc;
    if (!j.at("name").is_string()) throw ParseError("scenario: 'name' must be a string");
    sc.name = j.at("name").get<std::string>();
    sc.duration = json_num(j, "(root)", "duration");

    const nlohmann::json& road = j.at("road");
    check_keys(road, "road", {"x_begin", "x_end", "n_lanes", "lane_width"});
    sc.road.x_begin = json_num(road, "road", "x_begin");
    sc.road.x_end = json_num(road, "road", "x_end");
    sc.road.n_lanes = json_int(road, "road", "n_lanes");
    sc.road.lane_width = json_num(road, "road", "lane_width");

    const nlohmann::json& ego = j.at("ego");
    check_keys(ego, "ego", {"x", "y", "v"}, {"theta", "theta_dot"});
    sc.ego_start.x = json_num(ego, "ego", "x");
    sc.ego_start.y = json_num(ego, "ego", "y");
    sc.ego_start.v = json_num(ego, "ego", "v");
    sc.ego_start.theta = json_num_or(ego, "ego", "theta", 0.0);
    sc.ego_start.theta_dot = json_num_or(ego, "ego", "theta_dot", 0.0);

    const nlohmann::json& goal = j.at("goal");
    check_keys(goal, "goal", {"x", "y"}, {"theta"});
    sc.goal.x = json_num(goal, "goal", "x");
    sc.goal.y = json_num(goal, "goal", "y");
    sc.goal.theta = json_num_or(goal, "goal", "theta", 0.0);

    if (j.contains("limits")) {
        const nlohmann::json& lim = j.at("limits");
        check_keys(lim, "limits", {}, {"v_max", "a_max", "a_min"});
        sc.v_max = json_num_or(lim, "limits", "v_max", sc.v_max);
        sc.a_max = json_num_or(lim, "limits", "a_max", sc.a_max);
        sc.a_min = json_num_or(lim, "limits", "a_min", sc.a_min);
    }

    const nlohmann::json& agents = j.at("agents");
    if (!agents.is_array()) throw ParseError("scenario: 'agents' must be an array");
    for (std::size_t i = 0; i < agents.size(); ++i) {
        const std::string section = "agents[" + std::to_string(i) + "]";
        const nlohmann::json& a = agents[i];
        check_keys(a, section, {"id", "x", "y", "v"},
                   {"heading", "radius", "visible_from", "phases"});
        AgentScript agent;
        agent.id = json_int(a, section, "id");
        agent.x0 = json_num(a, section, "x");
        agent.y0 = json_num(a, section, "y");
        agent.v0 = json_num(a, section, "v");
        agent.heading = json_num_or(a, section, "heading", 0.0);
        agent.radius = json_num_or(a, section, "radius", agent.radius);
        if (a.contains("visible_from")) agent.visible_from = json_num(a, section, "visible_from");
        if (a.contains("phases")) {
            const nlohmann::json& phases = a.at("phases");
            if (!phases.is_array())
                throw ParseError("scenario: '" + section + ".phases' must be an array");
            for (std::size_t p = 0; p < phases.size(); ++p) {
                const std::string psec = section + ".phases[" + std::to_string(p) + "]";
                check_keys(phases[p], psec, {"duration", "accel"});
                agent.phases.push_back(
                    {json_num(phases[p], psec, "duration"), json_num(phases[p], psec, "accel")});
            }
        }
        sc.agents.push_back(std::move(agent));
    }
    return sc;
}

inline nlohmann::json scenario_to_json(const ScenarioConfig& sc) {
    nlohmann::json j;
    j["name"] = sc.name;
    j["duration"] = sc.duration;
    j["road"] = {{"x_begin", sc.road.x_begin},
                 {"x_end", sc.road.x_end},
                 {"n_lanes", sc.road.n_lanes},
                 {"lane_width", sc.road.lane_width}};
    j["ego"] = {{"x", sc.ego_start.x},
                {"y", sc.ego_start.y},
                {"theta", sc.ego_start.theta},
                {"theta_dot", sc.ego_start.theta_dot},
                {"v", sc.ego_start.v}};
    j["goal"] = {{"x", sc.goal.x}, {"y", sc.goal.y}, {"theta", sc.goal.theta}};
    j["limits"] = {{"v_max", sc.v_max}, {"a_max", sc.a_max}, {"a_min", sc.a_min}};
    j["agents"] = nlohmann::json::array();
    for (const AgentScript& a : sc.agents) {
        nlohmann::json agent = {{"id", a.id},     {"x", a.x0},
                                {"y", a.y0},      {"heading", a.heading},
                                {"v", a.v0},      {"radius", a.radius}};
        if (std::isfinite(a.visible_from)) agent["visible_from"] = a.visible_from;
        if (!a.phases.empty()) {
            agent["phases"] = nlohmann::json::array();
            for (const AgentPhase& p : a.phases)
                agent["phases"].push_back({{"duration", p.duration}, {"accel", p.accel}});
        }
        j["agents"].push_back(std::move(agent));
    }
    return j;
}

inline ScenarioConfig load_scenario(std::istream& is) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(is);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(std::string("scenario: ") + e.what());
    }
    return scenario_from_json(j);
}

inline ScenarioConfig load_scenario_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw IoError("load_scenario_file: cannot open '" + path + "'");
    return load_scenario(is);
}

inline void save_scenario(std::ostream& os, const ScenarioConfig& sc) {
    os << scenario_to_json(sc).dump(2) << '\n';
}

inline void save_scenario_file(const std::string& path, const ScenarioConfig& sc) {
    std::ofstream os(path);
    if (!os) throw IoError("save_scenario_file: cannot open '" + path + "'");
    save_scenario(os, sc);
    if (!os) throw IoError("save_scenario_file: write failed for '" + path + "'");
}

}  // namespace altmpc

// CSV serialization: simulation traces (one header line, one record per
// control period plus a terminal record) and step-response sample files for
// time-constant identification. Floating point uses 9 significant digits.
#pragma once

#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "altmpc/dynamics.hpp"
#include "altmpc/errors.hpp"
#include "altmpc/sim.hpp"

namespace altmpc {

inline constexpr const char* kTraceHeader =
    "t,x,y,theta,theta_dot,v_body,v_cmd,theta_ddot_cmd,min_clearance,iters,wall_ms,degraded_flag";

inline std::string format_g9(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return buf;
}

/// Writes the pinned-column trace. The terminal record repeats the last
/// applied command (zero-order hold) with zeroed planner statistics.
inline void write_trace(std::ostream& os, const SimResult& run) {
    os << kTraceHeader << '\n';
    const auto row = [&](double t, const VehicleState& s, double v_cmd, double theta_ddot_cmd,
                         double clearance, int iters, double wall_ms, bool degraded) {
        os << format_g9(t) << ',' << format_g9(s.x) << ',' << format_g9(s.y) << ','
           << format_g9(s.theta) << ',' << format_g9(s.theta_dot) << ',' << format_g9(s.v) << ','
           << format_g9(v_cmd) << ',' << format_g9(theta_ddot_cmd) << ',' << format_g9(clearance)
           << ',' << iters << ',' << format_g9(wall_ms) << ',' << (degraded ? 1 : 0) << '\n';
    };
    for (const TickRecord& r : run.trace)
        row(r.t, r.state, r.v_cmd, r.theta_ddot_cmd, r.min_clearance, r.iterations, r.wall_ms,
            r.degraded);
    if (!run.trace.empty()) {
        const TickRecord& last = run.trace.back();
        row(last.t + run.dt, run.final_state, last.v_cmd, last.theta_ddot_cmd,
            run.final_clearance, 0, 0.0, false);
    }
}

inline void write_trace_file(const std::string& path, const SimResult& run) {
    std::ofstream os(path);
    if (!os) throw IoError("write_trace_file: cannot open '" + path + "'");
    write_trace(os, run);
    if (!os) throw IoError("write_trace_file: write failed for '" + path + "'");
}

inline constexpr const char* kStepSampleHeader = "t,v,v0,v_c";

inline void write_step_samples(std::ostream& os, std::span<const StepSample> samples) {
    os << kStepSampleHeader << '\n';
    for (const StepSample& s : samples)
        os << format_g9(s.t) << ',' << format_g9(s.v) << ',' << format_g9(s.v0) << ','
           << format_g9(s.v_c) << '\n';
}

inline void write_step_samples_file(const std::string& path, std::span<const StepSample> samples) {
    std::ofstream os(path);
    if (!os) throw IoError("write_step_samples_file: cannot open '" + path + "'");
    write_step_samples(os, samples);
    if (!os) throw IoError("write_step_samples_file: write failed for '" + path + "'");
}

/// Parses a step-response sample file as written by write_step_samples.
/// Malformed rows raise ParseError naming the line number.
inline std::vector<StepSample> read_step_samples(std::istream& is) {
    std::string line;
    if (!std::getline(is, line)) throw ParseError("step samples: empty input");
    if (line != kStepSampleHeader)
        throw ParseError("step samples: expected header '" + std::string(kStepSampleHeader) +
                         "', got '" + line + "'");
    std::vector<StepSample> out;
    int lineno = 1;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::istringstream row(line);
        StepSample s{};
        char c1 = 0, c2 = 0, c3 = 0;
        if (!(row >> s.t >> c1 >> s.v >> c2 >> s.v0 >> c3 >> s.v_c) || c1 != ',' || c2 != ',' ||
            c3 != ',')
            throw ParseError("step samples: malformed line " + std::to_string(lineno) + ": '" +
                             line + "'");
        std::string rest;
        if (row >> rest)
            throw ParseError("step samples: trailing data on line " + std::to_string(lineno));
        out.push_back(s);
    }
    return out;
}

inline std::vector<StepSample> read_step_samples_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw IoError("read_step_samples_file: cannot open '" + path + "'");
    return read_step_samples(is);
}

}  // namespace altmpc

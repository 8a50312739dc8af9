// Command-line front end: run scenarios, run the benchmark suites, identify
// the actuator time constant, and dump plant step responses. Every file
// output is byte-reproducible from (scenario, seed, options) except the
// wall-time fields.
#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "altmpc/joint_planner.hpp"
#include "altmpc/metrics.hpp"
#include "altmpc/planner.hpp"
#include "altmpc/scenario.hpp"
#include "altmpc/scenario_io.hpp"
#include "altmpc/sim.hpp"
#include "altmpc/trace_io.hpp"

namespace {

using namespace altmpc;

PlannerKind planner_from(const std::string& s) {
    if (s == "am") return PlannerKind::Alternating;
    if (s == "joint") return PlannerKind::Joint;
    throw InvalidInputError("unknown planner '" + s + "' (expected am|joint)");
}

PredictionModel prediction_from(const std::string& s) {
    if (s == "first-order") return PredictionModel::FirstOrder;
    if (s == "linear") return PredictionModel::LinearRamp;
    throw InvalidInputError("unknown planner model '" + s + "' (expected first-order|linear)");
}

ActuatorModel plant_from(const std::string& s, double tau) {
    if (s == "first-order") return FirstOrder{tau};
    if (s == "linear") return LinearRamp{};
    if (s == "second-order") return SecondOrder{};
    throw InvalidInputError("unknown plant '" + s +
                            "' (expected first-order|linear|second-order)");
}

std::string out_path(const std::string& dir, const std::string& file) {
    std::filesystem::create_directories(dir);
    return (std::filesystem::path(dir) / file).string();
}

void write_line(std::FILE* f, const std::string& s) { std::fputs((s + "\n").c_str(), f); }

/// Shared knobs; each subcommand registers only the flags it honors.
struct Options {
    std::string scenario_path;
    std::string planner = "am";
    std::string plant = "first-order";
    std::string planner_model = "first-order";
    double tau = 0.5;
    unsigned seed = 7;
    std::string out = ".";
    int ticks = -1;  ///< <0: use the scenario duration
    bool quiet = false;
};

SimOptions sim_options(const Options& o) {
    SimOptions opt;
    opt.planner = planner_from(o.planner);
    opt.prediction = prediction_from(o.planner_model);
    opt.prediction_tau = o.tau;
    opt.plant = plant_from(o.plant, o.tau);
    if (o.ticks >= 0) opt.max_ticks = o.ticks;
    return opt;
}

const char* kMetricsHeader =
    "scenario,planner,planner_model,plant,ticks,degraded_ticks,collision,"
    "min_inter_vehicle_distance,min_boundary_clearance,velocity_overshoot_pct,"
    "settling_oscillation,j_v,j_theta,mean_iterations,max_iterations,"
    "mean_wall_ms,max_wall_ms";

std::string metrics_row(const std::string& scenario, const Options& o,
                        const MetricsReport& m) {
    std::string r = scenario + "," + o.planner + "," + o.planner_model + "," + o.plant;
    r += "," + std::to_string(m.ticks) + "," + std::to_string(m.degraded_ticks);
    r += std::string(",") + (m.collision ? "1" : "0");
    for (double v : {m.min_inter_vehicle_distance, m.min_boundary_clearance,
                     m.velocity_overshoot_pct, m.settling_oscillation, m.j_v, m.j_theta,
                     m.mean_iterations})
        r += "," + format_g9(v);
    r += "," + std::to_string(m.max_iterations);
    r += "," + format_g9(m.mean_wall_ms) + "," + format_g9(m.max_wall_ms);
    return r;
}

void print_metrics(const std::string& scenario, const Options& o, const MetricsReport& m) {
    std::printf("scenario              %s\n", scenario.c_str());
    std::printf("planner               %s (%s model, tau %g)\n", o.planner.c_str(),
                o.planner_model.c_str(), o.tau);
    std::printf("plant                 %s\n", o.plant.c_str());
    std::printf("ticks                 %d (%d degraded)\n", m.ticks, m.degraded_ticks);
    std::printf("collision             %s\n", m.collision ? "YES" : "no");
    std::printf("min vehicle distance  %.3f m\n", m.min_inter_vehicle_distance);
    std::printf("min boundary clear.   %.3f m\n", m.min_boundary_clearance);
    std::printf("velocity overshoot    %.2f %%\n", m.velocity_overshoot_pct);
    std::printf("oscillation RMS       %.4f m/s^2\n", m.settling_oscillation);
    std::printf("executed J_v          %.6g\n", m.j_v);
    std::printf("executed J_theta      %.6g\n", m.j_theta);
    std::printf("iterations            mean %.2f  max %d\n", m.mean_iterations,
                m.max_iterations);
    std::printf("wall per tick         mean %.2f ms  max %.2f ms\n", m.mean_wall_ms,
                m.max_wall_ms);
}

int cmd_run(const Options& o) {
    const ScenarioConfig sc = load_scenario_file(o.scenario_path);
    const SimResult run = run_simulation(sc, sim_options(o));
    const MetricsReport m = compute_metrics(run);

    const std::string trace_file = out_path(o.out, sc.name + "_trace.csv");
    write_trace_file(trace_file, run);
    const std::string metrics_file = out_path(o.out, sc.name + "_metrics.csv");
    {
        std::FILE* f = std::fopen(metrics_file.c_str(), "w");
        if (!f) throw IoError("cannot write " + metrics_file);
        write_line(f, kMetricsHeader);
        write_line(f, metrics_row(sc.name, o, m));
        std::fclose(f);
    }
    if (!o.quiet) {
        print_metrics(sc.name, o, m);
        std::printf("trace                 %s\n", trace_file.c_str());
        std::printf("metrics               %s\n", metrics_file.c_str());
    }
    return 0;
}

int cmd_bench_am_vs_joint(const Options& o, int count) {
    const std::vector<ScenarioConfig> suite = random_scenarios(o.seed, count);
    const PredictionModel model = prediction_from(o.planner_model);

    struct Row {
        std::string scenario, planner;
        int iterations, qp_solves;
        bool converged;
        double j_smooth, violation, wall_ms;
    };
    std::vector<Row> rows;
    double it_sum[2] = {0, 0}, wall_sum[2] = {0, 0};
    int joint_smoother = 0, both_converged = 0;

    for (const ScenarioConfig& sc : suite) {
        const PlannerConfig cfg = scenario_planner_config(sc, model, o.tau);
        const std::vector<Obstacle> obs = scenario_obstacles(sc, cfg.footprint);
        double j_smooth[2] = {0, 0};
        bool conv[2] = {false, false};
        for (int p = 0; p < 2; ++p) {
            const PlannerResult res = p == 0 ? plan(sc.ego_start, obs, cfg)
                                             : plan_joint(sc.ego_start, obs, cfg);
            j_smooth[p] = res.costs.j_theta + res.costs.j_v;
            conv[p] = res.converged;
            it_sum[p] += res.iterations;
            wall_sum[p] += res.wall_time * 1e3;
            rows.push_back({sc.name, p == 0 ? "am" : "joint", res.iterations, res.qp_solves,
                            res.converged, j_smooth[p], res.max_violation,
                            res.wall_time * 1e3});
        }
        if (conv[0] && conv[1]) {
            ++both_converged;
            if (j_smooth[1] <= j_smooth[0]) ++joint_smoother;
        }
    }

    const std::string csv = out_path(o.out, "bench_am_vs_joint.csv");
    {
        std::FILE* f = std::fopen(csv.c_str(), "w");
        if (!f) throw IoError("cannot write " + csv);
        write_line(f, "scenario,planner,iterations,qp_solves,converged,j_smooth,violation,"
                      "wall_ms");
        for (const Row& r : rows)
            write_line(f, r.scenario + "," + r.planner + "," + std::to_string(r.iterations) +
                              "," + std::to_string(r.qp_solves) + "," +
                              (r.converged ? "1" : "0") + "," + format_g9(r.j_smooth) + "," +
                              format_g9(r.violation) + "," + format_g9(r.wall_ms));
        std::fclose(f);
    }

    const double n = static_cast<double>(count);
    if (!o.quiet) {
        std::printf("%-16s %-6s %5s %4s %5s %12s %10s %9s\n", "scenario", "plan", "iters",
                    "qps", "conv", "J_smooth", "violation", "wall_ms");
        for (const Row& r : rows)
            std::printf("%-16s %-6s %5d %4d %5s %12.5g %10.3g %9.2f\n", r.scenario.c_str(),
                        r.planner.c_str(), r.iterations, r.qp_solves,
                        r.converged ? "yes" : "no", r.j_smooth, r.violation, r.wall_ms);
        std::printf("\nmean iterations    am %.2f   joint %.2f\n", it_sum[0] / n,
                    it_sum[1] / n);
        std::printf("mean wall per plan am %.2f ms   joint %.2f ms\n", wall_sum[0] / n,
                    wall_sum[1] / n);
        std::printf("joint J_smooth <= am on %d/%d converged pairs\n", joint_smoother,
                    both_converged);
        std::printf("table              %s\n", csv.c_str());
    }
    return 0;
}

int cmd_bench_actuator(const Options& o) {
    const std::vector<ScenarioConfig> scenes = paper_scenarios();
    const char* models[2] = {"first-order", "linear"};

    const std::string csv = out_path(o.out, "bench_actuator.csv");
    std::FILE* f = std::fopen(csv.c_str(), "w");
    if (!f) throw IoError("cannot write " + csv);
    write_line(f, kMetricsHeader);

    if (!o.quiet)
        std::printf("%-20s %-12s %5s %9s %10s %10s %8s\n", "scenario", "model", "coll",
                    "min_dist", "overshoot%", "osc_rms", "degraded");
    for (const ScenarioConfig& sc : scenes) {
        double min_dist[2] = {0, 0};
        for (int p = 0; p < 2; ++p) {
            Options run_o = o;
            run_o.planner_model = models[p];
            const SimResult run = run_simulation(sc, sim_options(run_o));
            const MetricsReport m = compute_metrics(run);
            min_dist[p] = m.min_inter_vehicle_distance;
            write_line(f, metrics_row(sc.name, run_o, m));
            if (!o.quiet)
                std::printf("%-20s %-12s %5s %9.3f %10.2f %10.4f %8d\n", sc.name.c_str(),
                            models[p], m.collision ? "YES" : "no",
                            m.min_inter_vehicle_distance, m.velocity_overshoot_pct,
                            m.settling_oscillation, m.degraded_ticks);
        }
        if (!o.quiet)
            std::printf("%-20s first-order margin advantage: %+.3f m\n", "",
                        min_dist[0] - min_dist[1]);
    }
    std::fclose(f);
    if (!o.quiet) std::printf("table %s\n", csv.c_str());
    return 0;
}

int cmd_fit_tau(const std::string& samples_path, bool quiet) {
    const std::vector<StepSample> samples = read_step_samples_file(samples_path);
    const double tau = fit_tau(samples);
    if (!quiet) std::printf("samples = %zu\n", samples.size());
    std::printf("tau = %.6g\n", tau);
    return 0;
}

int cmd_step_response(const Options& o, double v0, double v_c) {
    const ActuatorModel plant = plant_from(o.plant, o.tau);
    const int n = o.ticks >= 0 ? o.ticks : 350;
    const double dt = 0.01;

    PlantState p;
    p.state.v = v0;
    std::vector<StepSample> samples;
    samples.reserve(static_cast<std::size_t>(n) + 1);
    samples.push_back({0.0, v0, v0, v_c});
    for (int k = 1; k <= n; ++k) {
        p = plant_step(p, v_c, 0.0, plant, dt, dt);
        samples.push_back({k * dt, p.state.v, v0, v_c});
    }

    const std::string file = out_path(o.out, "step_response.csv");
    write_step_samples_file(file, samples);
    if (!o.quiet) {
        std::printf("plant    %s (tau %g)\n", o.plant.c_str(), o.tau);
        std::printf("step     %g -> %g m/s over %.2f s\n", v0, v_c, n * dt);
        std::printf("final v  %.6g m/s\n", p.state.v);
        std::printf("samples  %s\n", file.c_str());
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Velocity-actuated MPC: scenario runner, benchmarks, actuator tools"};
    app.require_subcommand(1);

    Options o;
    int bench_count = 20;
    double step_v0 = 0.0, step_vc = 10.0;
    std::string samples_path;

    const auto add_model_flags = [&](CLI::App* c) {
        c->add_option("--planner-model", o.planner_model,
                      "prediction model: first-order|linear")
            ->check(CLI::IsMember({"first-order", "linear"}));
        c->add_option("--tau", o.tau, "actuator time constant [s]");
    };
    const auto add_output_flags = [&](CLI::App* c) {
        c->add_option("--out", o.out, "output directory");
        c->add_flag("--quiet", o.quiet, "suppress the human-readable summary");
    };

    CLI::App* run = app.add_subcommand("run", "simulate one scenario, write trace + metrics");
    run->add_option("--scenario", o.scenario_path, "scenario file")
        ->required()
        ->check(CLI::ExistingFile);
    run->add_option("--planner", o.planner, "am|joint")
        ->check(CLI::IsMember({"am", "joint"}));
    run->add_option("--plant", o.plant, "true actuator: first-order|linear|second-order")
        ->check(CLI::IsMember({"first-order", "linear", "second-order"}));
    run->add_option("--ticks", o.ticks, "override the simulated tick count");
    run->add_option("--seed", o.seed, "accepted for interface symmetry; run is deterministic");
    add_model_flags(run);
    add_output_flags(run);

    CLI::App* bench_aj = app.add_subcommand(
        "bench-am-vs-joint", "cold-start plans on the seeded random suite, both planners");
    bench_aj->add_option("--seed", o.seed, "suite seed");
    bench_aj->add_option("--count", bench_count, "number of random scenarios")
        ->check(CLI::PositiveNumber);
    add_model_flags(bench_aj);
    add_output_flags(bench_aj);

    CLI::App* bench_act = app.add_subcommand(
        "bench-actuator", "paper scenarios, first-order vs linear prediction models");
    bench_act->add_option("--plant", o.plant,
                          "true actuator: first-order|linear|second-order")
        ->check(CLI::IsMember({"first-order", "linear", "second-order"}));
    bench_act->add_option("--ticks", o.ticks, "override the simulated tick count");
    bench_act->add_option("--tau", o.tau, "actuator time constant [s]");
    add_output_flags(bench_act);

    CLI::App* fit = app.add_subcommand("fit-tau", "identify tau from step-response samples");
    fit->add_option("samples", samples_path, "step-sample CSV (t,v,v0,v_c)")
        ->required()
        ->check(CLI::ExistingFile);
    fit->add_flag("--quiet", o.quiet, "print only the fitted value");

    CLI::App* step = app.add_subcommand("step-response", "simulate a plant velocity step");
    step->add_option("v0", step_v0, "initial body velocity [m/s]");
    step->add_option("v_c", step_vc, "commanded velocity [m/s]");
    step->add_option("--plant", o.plant, "first-order|linear|second-order")
        ->check(CLI::IsMember({"first-order", "linear", "second-order"}));
    step->add_option("--ticks", o.ticks, "number of 10 ms samples");
    step->add_option("--tau", o.tau, "actuator time constant [s]");
    add_output_flags(step);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::fprintf(stderr, "%s\n\n%s", e.what(), app.help().c_str());
        return e.get_exit_code() == 0 ? 1 : e.get_exit_code();
    }

    try {
        if (run->parsed()) return cmd_run(o);
        if (bench_aj->parsed()) return cmd_bench_am_vs_joint(o, bench_count);
        if (bench_act->parsed()) return cmd_bench_actuator(o);
        if (fit->parsed()) return cmd_fit_tau(samples_path, o.quiet);
        if (step->parsed()) return cmd_step_response(o, step_v0, step_vc);
    } catch (const altmpc::Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "internal error: %s\n", e.what());
        return 1;
    }
    return 0;
}

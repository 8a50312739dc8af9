// Receding-horizon trajectory optimization by alternating minimization:
// an angular-acceleration layer (linearized headings, trust region) and a
// commanded-velocity layer (exact affine model), with slack-relaxed collision
// rows and escalating penalties.
#pragma once

#include <Eigen/Dense>

#include <chrono>
#include <cmath>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "altmpc/collision.hpp"
#include "altmpc/dynamics.hpp"
#include "altmpc/errors.hpp"
#include "altmpc/qp.hpp"
#include "altmpc/types.hpp"

namespace altmpc {

struct PlannerGoal {
    double x = 0.0;
    double y = 0.0;
    double theta = 0.0;
};

struct PlannerConfig {
    int N = 50;
    double dt = 0.1;
    double v_max = 25.0;
    double a_min = -6.0;
    double a_max = 4.0;
    double theta_dot_min = -0.6;
    double theta_dot_max = 0.6;
    double theta_ddot_min = -2.0;
    double theta_ddot_max = 2.0;
    double kappa_max = 0.2;
    /// Convergence threshold on both layer cost deltas.
    double epsilon = 1e-3;
    double w_theta0 = 10.0;
    double w_v0 = 10.0;
    /// Penalty growth factor applied when the rolled-out constraint is violated.
    double delta = 5.0;
    double w_cap = 1e6;
    double theta_trust0 = 0.3;
    /// Commanded-velocity trust radius; used by the joint baseline only.
    double v_trust0 = 1.0;
    int max_am_iters = 20;
    TauSchedule tau_schedule;
    PlannerGoal goal;
    VehicleFootprint footprint;
    LinearizeOptions sensing;

    void validate() const {
        const auto finite = [](double v) { return std::isfinite(v); };
        if (N < 1) throw InvalidParameterError("PlannerConfig: N must be >= 1");
        if (!(dt > 0.0) || !finite(dt)) throw InvalidParameterError("PlannerConfig: dt must be > 0");
        if (!(v_max > 0.0) || !finite(v_max))
            throw InvalidParameterError("PlannerConfig: v_max must be > 0");
        if (!finite(a_min) || !finite(a_max) || !(a_min < 0.0) || !(a_max > 0.0))
            throw InvalidParameterError("PlannerConfig: need a_min < 0 < a_max");
        if (!finite(theta_dot_min) || !finite(theta_dot_max) ||
            !(theta_dot_min < 0.0) || !(theta_dot_max > 0.0))
            throw InvalidParameterError("PlannerConfig: need theta_dot_min < 0 < theta_dot_max");
        if (!finite(theta_ddot_min) || !finite(theta_ddot_max) ||
            !(theta_ddot_min < 0.0) || !(theta_ddot_max > 0.0))
            throw InvalidParameterError("PlannerConfig: need theta_ddot_min < 0 < theta_ddot_max");
        if (!(kappa_max > 0.0) || !finite(kappa_max))
            throw InvalidParameterError("PlannerConfig: kappa_max must be > 0");
        if (!(epsilon > 0.0)) throw InvalidParameterError("PlannerConfig: epsilon must be > 0");
        if (!(w_theta0 > 0.0) || !(w_v0 > 0.0))
            throw InvalidParameterError("PlannerConfig: slack weights must be > 0");
        if (!(delta > 1.0)) throw InvalidParameterError("PlannerConfig: delta must be > 1");
        if (!(w_cap >= w_theta0) || !(w_cap >= w_v0))
            throw InvalidParameterError("PlannerConfig: w_cap below initial weights");
        if (!(theta_trust0 > 0.0))
            throw InvalidParameterError("PlannerConfig: theta_trust0 must be > 0");
        if (!(v_trust0 > 0.0)) throw InvalidParameterError("PlannerConfig: v_trust0 must be > 0");
        if (max_am_iters < 1)
            throw InvalidParameterError("PlannerConfig: max_am_iters must be >= 1");
        if (!finite(goal.x) || !finite(goal.y) || !finite(goal.theta))
            throw InvalidParameterError("PlannerConfig: goal must be finite");
        footprint.validate();
    }
};

/// Rollout of a control guess through the prediction model. States cover
/// t_1..t_N; headings are kept unwrapped so heading differences and trust
/// regions stay linear. The initial state and per-interval actuator constants
/// travel along so the rollout can be reproduced exactly.
struct GuessTrajectory {
    VehicleState state0;
    double dt = 0.1;
    std::vector<double> x, y, theta, theta_dot, v;  // states t_1..t_N
    std::vector<double> v_c, theta_ddot;            // controls over (t_i, t_{i+1}]
    std::vector<double> taus;                       // actuator constant per interval

    int N() const { return static_cast<int>(v_c.size()); }
};

/// Rolls controls through the motion model (heading integration) and the
/// first-order velocity response, picking each interval's actuator constant
/// from the schedule at the interval-entry body velocity.
inline GuessTrajectory roll_guess(const VehicleState& state0, std::vector<double> v_c,
                                  std::vector<double> theta_ddot, double dt,
                                  const TauSchedule& schedule) {
    if (v_c.empty() || v_c.size() != theta_ddot.size())
        throw InvalidInputError("roll_guess: control sequences empty or of different length");
    if (!(dt > 0.0)) throw InvalidInputError("roll_guess: dt must be > 0");
    if (!state0.finite()) throw InvalidInputError("roll_guess: non-finite initial state");

    GuessTrajectory g;
    g.state0 = state0;
    g.dt = dt;
    const std::size_t N = v_c.size();
    g.x.reserve(N); g.y.reserve(N); g.theta.reserve(N);
    g.theta_dot.reserve(N); g.v.reserve(N); g.taus.reserve(N);

    double x = state0.x, y = state0.y, th = state0.theta;
    double thd = state0.theta_dot, v = state0.v;
    for (std::size_t i = 0; i < N; ++i) {
        const double tau = tau_at(schedule, v);
        x += v * std::cos(th) * dt;
        y += v * std::sin(th) * dt;
        th += thd * dt + 0.5 * theta_ddot[i] * dt * dt;
        thd += theta_ddot[i] * dt;
        v = v_c[i] + (v - v_c[i]) * std::exp(-dt / tau);
        g.x.push_back(x);
        g.y.push_back(y);
        g.theta.push_back(th);
        g.theta_dot.push_back(thd);
        g.v.push_back(v);
        g.taus.push_back(tau);
    }
    g.v_c = std::move(v_c);
    g.theta_ddot = std::move(theta_ddot);
    return g;
}

/// Re-rolls the stored controls and compares against the stored sequences.
inline bool guess_consistent(const GuessTrajectory& g, const TauSchedule& schedule,
                             double tol = 1e-9) {
    if (g.v_c.empty() || g.v_c.size() != g.theta_ddot.size() || g.x.size() != g.v_c.size())
        return false;
    const GuessTrajectory r = roll_guess(g.state0, g.v_c, g.theta_ddot, g.dt, schedule);
    for (int i = 0; i < g.N(); ++i) {
        if (std::abs(r.x[i] - g.x[i]) > tol || std::abs(r.y[i] - g.y[i]) > tol ||
            std::abs(r.theta[i] - g.theta[i]) > tol ||
            std::abs(r.theta_dot[i] - g.theta_dot[i]) > tol ||
            std::abs(r.v[i] - g.v[i]) > tol || std::abs(r.taus[i] - g.taus[i]) > tol)
            return false;
    }
    return true;
}

/// Rolls explicit control guesses from the current state. The cold-start
/// default (zero angular acceleration, hold current speed) stands in for an
/// external coarse planner.
inline GuessTrajectory initial_traj(std::span<const double> v_c_guess,
                                    std::span<const double> theta_ddot_guess,
                                    const VehicleState& state0, const PlannerConfig& config) {
    return roll_guess(state0, std::vector<double>(v_c_guess.begin(), v_c_guess.end()),
                      std::vector<double>(theta_ddot_guess.begin(), theta_ddot_guess.end()),
                      config.dt, config.tau_schedule);
}

// defined after rollout_violation below
inline GuessTrajectory cold_start_guess(const VehicleState& state0, const PlannerConfig& config,
                                        std::span<const Obstacle> obstacles = {});

struct PlannerCosts {
    double j_theta = 0.0;
    double j_v = 0.0;
    double j_goal = 0.0;
    double total() const { return j_theta + j_v + j_goal; }
};

/// Smoothness and goal costs of a rolled trajectory; the commanded-velocity
/// jerk uses the current body velocity as the sequence's leading sample.
inline PlannerCosts evaluate_costs(const GuessTrajectory& g, const PlannerGoal& goal) {
    PlannerCosts c;
    const int N = g.N();
    const double dt2 = g.dt * g.dt;
    for (double a : g.theta_ddot) c.j_theta += a * a;
    const auto cmd = [&](int j) { return j == 0 ? g.state0.v : g.v_c[static_cast<std::size_t>(j - 1)]; };
    for (int i = 1; i + 1 <= N; ++i) {
        const double jerk = (cmd(i - 1) - 2.0 * cmd(i) + cmd(i + 1)) / dt2;
        c.j_v += jerk * jerk;
    }
    const double ex = g.x.back() - goal.x;
    const double ey = g.y.back() - goal.y;
    const double eth = angle_diff(g.theta.back(), goal.theta);
    c.j_goal = ex * ex + ey * ey + eth * eth;
    return c;
}

struct ViolationStats {
    double worst = 0.0;           ///< max positive constraint value [m^2]
    double per_step_total = 0.0;  ///< sum over steps of each step's worst positive value
};

/// Exact circle-overlap check of a rolled trajectory against every obstacle
/// the planner can see (same visibility and sensing rules as the
/// linearization, but no clearance pruning: this is the ground truth).
inline ViolationStats rollout_violation(const GuessTrajectory& g,
                                        std::span<const Obstacle> obstacles,
                                        const VehicleFootprint& footprint,
                                        const LinearizeOptions& sensing) {
    ViolationStats out;
    const std::vector<double> offsets = footprint.circle_offsets();
    const double plan_time = std::isnan(sensing.plan_time) ? 0.0 : sensing.plan_time;
    const Eigen::Vector2d ego_now(g.state0.x, g.state0.y);
    for (int k = 0; k < g.N(); ++k) {
        const double t = (k + 1) * g.dt;
        double step_worst = 0.0;
        for (const Obstacle& obs : obstacles) {
            if (obs.visible_from > plan_time) continue;
            if (obs.kind == ObstacleKind::Vehicle &&
                (obs.position(plan_time) - ego_now).norm() > sensing.sensing_range)
                continue;
            const Eigen::Vector2d c = obs.position(t);
            for (double o : offsets) {
                const Eigen::Vector2d p(g.x[k] + o * std::cos(g.theta[k]),
                                        g.y[k] + o * std::sin(g.theta[k]));
                step_worst = std::max(step_worst, eval_constraint(p, c, obs.radius_combined));
            }
        }
        out.worst = std::max(out.worst, step_worst);
        out.per_step_total += step_worst;
    }
    return out;
}

/// Cold start: hold the current speed with no steering. If that rollout
/// already collides, try braking profiles as well and keep the least
/// violating guess -- a linearized planner cannot cross from the "drive
/// through" solution family to the "stay behind" one on its own, so the
/// initial guess has to pick the right side.
namespace detail {

/// Command-step-feasible ramp at the given acceleration: each command moves
/// rate*dt away from the lagged body velocity, matching the acceleration rows
/// of the layers, and stays inside [0, v_max].
inline std::vector<double> ramped_commands(double v0, double rate, const PlannerConfig& config) {
    std::vector<double> v_c(static_cast<std::size_t>(config.N));
    double v = v0;
    for (double& cmd : v_c) {
        const double tau = tau_at(config.tau_schedule, v);
        cmd = std::clamp(v + rate * config.dt, 0.0, config.v_max);
        v = cmd + (v - cmd) * std::exp(-config.dt / tau);
    }
    return v_c;
}

/// If the guess's rollout collides, tries braking command profiles that keep
/// the guess's steering plan and returns the least-violating of the bunch.
/// A linearized planner cannot cross from the "drive through" solution family
/// to the "stay behind" one on its own, so the guess has to pick the side.
inline GuessTrajectory select_longitudinal_class(GuessTrajectory guess,
                                                 std::span<const Obstacle> obstacles,
                                                 const PlannerConfig& config) {
    if (obstacles.empty()) return guess;
    double best_viol =
        rollout_violation(guess, obstacles, config.footprint, config.sensing).worst;
    for (double rate : {0.5 * config.a_min, config.a_min}) {
        if (best_viol <= 1e-6) break;
        GuessTrajectory cand =
            roll_guess(guess.state0, ramped_commands(guess.state0.v, rate, config),
                       guess.theta_ddot, config.dt, config.tau_schedule);
        const double viol =
            rollout_violation(cand, obstacles, config.footprint, config.sensing).worst;
        if (viol < best_viol) {
            guess = std::move(cand);
            best_viol = viol;
        }
    }
    return guess;
}

}  // namespace detail

inline GuessTrajectory cold_start_guess(const VehicleState& state0, const PlannerConfig& config,
                                        std::span<const Obstacle> obstacles) {
    GuessTrajectory hold =
        roll_guess(state0, detail::ramped_commands(state0.v, 0.0, config),
                   std::vector<double>(static_cast<std::size_t>(config.N), 0.0), config.dt,
                   config.tau_schedule);
    return detail::select_longitudinal_class(std::move(hold), obstacles, config);
}

struct IterationLog {
    int k = 0;
    double j_theta = 0.0;
    double j_v = 0.0;
    double max_violation = 0.0;
    double w_theta = 0.0;
    double w_v = 0.0;
    double trust = 0.0;
};

inline std::string to_string(const IterationLog& l) {
    std::ostringstream os;
    os << "k=" << l.k << " J_theta=" << l.j_theta << " J_v=" << l.j_v
       << " max_violation=" << l.max_violation << " w_theta=" << l.w_theta << " w_v=" << l.w_v
       << " trust=" << l.trust;
    return os.str();
}

struct PlannerResult {
    ControlSequence controls;
    std::vector<VehicleState> trajectory;  ///< nonlinear rollout of controls, t_1..t_N
    int iterations = 0;                    ///< alternation (outer) iterations
    int qp_solves = 0;
    bool converged = false;
    double max_violation = 0.0;  ///< worst rolled-out constraint value [m^2]
    PlannerCosts costs;
    double wall_time = 0.0;  ///< seconds
    double worst_kkt = 0.0;  ///< worst QP KKT residual encountered
    std::vector<IterationLog> iteration_log;
    GuessTrajectory guess;  ///< final internal guess, reusable as warm start
};

namespace detail {

/// Collision rows of the current guess for every footprint circle, plus the
/// step -> slack-variable assignment (one slack per step that has any row).
struct CollisionSetup {
    std::vector<CollisionRow> rows;
    std::vector<int> circle_of_row;
    std::vector<int> slack_of_step;       // -1 when the step has no rows
    int n_slack = 0;
    std::vector<double> min_slack_per_step;  // smallest feasible slack at the guess
};

inline CollisionSetup collision_setup(const GuessTrajectory& g,
                                      std::span<const Obstacle> obstacles,
                                      const PlannerConfig& cfg) {
    CollisionSetup set;
    const int N = g.N();
    set.slack_of_step.assign(static_cast<std::size_t>(N), -1);
    set.min_slack_per_step.assign(static_cast<std::size_t>(N), 0.0);

    std::vector<double> times(static_cast<std::size_t>(N));
    for (int k = 0; k < N; ++k) times[static_cast<std::size_t>(k)] = (k + 1) * g.dt;

    LinearizeOptions opts = cfg.sensing;
    if (std::isnan(opts.plan_time)) opts.plan_time = 0.0;

    const std::vector<double> offsets = cfg.footprint.circle_offsets();
    for (std::size_t c = 0; c < offsets.size(); ++c) {
        std::vector<Eigen::Vector2d> centers(static_cast<std::size_t>(N));
        for (int k = 0; k < N; ++k)
            centers[static_cast<std::size_t>(k)] =
                Eigen::Vector2d(g.x[k] + offsets[c] * std::cos(g.theta[k]),
                                g.y[k] + offsets[c] * std::sin(g.theta[k]));
        const LinearizedConstraint lin = linearize(centers, obstacles, times, opts);
        for (const CollisionRow& row : lin.rows) {
            set.rows.push_back(row);
            set.circle_of_row.push_back(static_cast<int>(c));
            double& ms = set.min_slack_per_step[static_cast<std::size_t>(row.step)];
            ms = std::max(ms, row.offset);
        }
    }
    for (const CollisionRow& row : set.rows) {
        int& slot = set.slack_of_step[static_cast<std::size_t>(row.step)];
        if (slot < 0) slot = set.n_slack++;
    }
    return set;
}

/// Exact affine maps of heading and heading rate in the angular-acceleration
/// block (decision columns 0..N-1 of an n_cols-wide vector).
struct HeadingMaps {
    AffineMap theta;      // theta(t_{k+1}), unwrapped
    AffineMap theta_dot;  // theta_dot(t_{k+1})
};

inline HeadingMaps heading_maps(const GuessTrajectory& g, Eigen::Index n_cols) {
    const int N = g.N();
    const double dt = g.dt;
    HeadingMaps m;
    m.theta.linear.setZero(N, n_cols);
    m.theta.offset.resize(N);
    m.theta_dot.linear.setZero(N, n_cols);
    m.theta_dot.offset.resize(N);
    for (int k = 0; k < N; ++k) {
        m.theta_dot.offset(k) = g.state0.theta_dot;
        m.theta.offset(k) = g.state0.theta + (k + 1) * dt * g.state0.theta_dot;
        for (int j = 0; j <= k; ++j) {
            m.theta_dot.linear(k, j) = dt;
            m.theta.linear(k, j) = dt * dt * ((k - j) + 0.5);
        }
    }
    return m;
}

/// Guess body velocity at interval-entry time t_i (i = 0..N-1).
inline double guess_v_at(const GuessTrajectory& g, int i) {
    return i == 0 ? g.state0.v : g.v[static_cast<std::size_t>(i - 1)];
}
/// Guess heading at t_i.
inline double guess_theta_at(const GuessTrajectory& g, int i) {
    return i == 0 ? g.state0.theta : g.theta[static_cast<std::size_t>(i - 1)];
}

/// Position maps for the angular layer: body velocities fixed at the guess,
/// cos/sin expanded to first order around the guess headings.
struct PositionMaps {
    AffineMap x, y;  // positions of t_1..t_N
};

inline PositionMaps linearized_position_maps(const GuessTrajectory& g, const HeadingMaps& hm,
                                             Eigen::Index n_cols) {
    const int N = g.N();
    const double dt = g.dt;
    PositionMaps m;
    m.x.linear.setZero(N, n_cols);
    m.x.offset.resize(N);
    m.y.linear.setZero(N, n_cols);
    m.y.offset.resize(N);

    Eigen::RowVectorXd ax = Eigen::RowVectorXd::Zero(n_cols);
    Eigen::RowVectorXd ay = Eigen::RowVectorXd::Zero(n_cols);
    double cx = g.state0.x + g.state0.v * std::cos(g.state0.theta) * dt;
    double cy = g.state0.y + g.state0.v * std::sin(g.state0.theta) * dt;
    m.x.linear.row(0) = ax;
    m.x.offset(0) = cx;
    m.y.linear.row(0) = ay;
    m.y.offset(0) = cy;
    for (int k = 1; k < N; ++k) {
        // contribution of the step over (t_k, t_{k+1}): velocity and heading at t_k
        const double vh = guess_v_at(g, k);
        const double th = guess_theta_at(g, k);
        const double dth0 = hm.theta.offset(k - 1) - th;  // affine-theta offset minus guess
        ax += -vh * dt * std::sin(th) * hm.theta.linear.row(k - 1);
        cx += vh * dt * (std::cos(th) - std::sin(th) * dth0);
        ay += vh * dt * std::cos(th) * hm.theta.linear.row(k - 1);
        cy += vh * dt * (std::sin(th) + std::cos(th) * dth0);
        m.x.linear.row(k) = ax;
        m.x.offset(k) = cx;
        m.y.linear.row(k) = ay;
        m.y.offset(k) = cy;
    }
    return m;
}

/// Velocity-layer maps: body velocities exactly affine in the commands via
/// the closed-form chain, positions exactly affine given the fixed headings.
struct VelocityMaps {
    AffineMap v;     // body velocity at t_1..t_N
    AffineMap x, y;  // positions of t_1..t_N (exact, headings fixed)
};

inline VelocityMaps velocity_position_maps(const GuessTrajectory& g, Eigen::Index n_cols) {
    const int N = g.N();
    const double dt = g.dt;
    std::vector<double> ms(static_cast<std::size_t>(N));
    for (int i = 0; i < N; ++i) ms[static_cast<std::size_t>(i)] = std::exp(-dt / g.taus[i]);
    const VelocityChainMap chain = velocity_chain_map(ms);

    VelocityMaps m;
    m.v.linear.setZero(N, n_cols);
    m.v.linear.leftCols(N) = chain.from_commands;
    m.v.offset = chain.from_v0 * g.state0.v;

    m.x.linear.setZero(N, n_cols);
    m.x.offset.resize(N);
    m.y.linear.setZero(N, n_cols);
    m.y.offset.resize(N);
    Eigen::RowVectorXd ax = Eigen::RowVectorXd::Zero(n_cols);
    Eigen::RowVectorXd ay = Eigen::RowVectorXd::Zero(n_cols);
    double cx = g.state0.x + g.state0.v * std::cos(g.state0.theta) * dt;
    double cy = g.state0.y + g.state0.v * std::sin(g.state0.theta) * dt;
    m.x.linear.row(0) = ax;
    m.x.offset(0) = cx;
    m.y.linear.row(0) = ay;
    m.y.offset(0) = cy;
    for (int k = 1; k < N; ++k) {
        const double th = guess_theta_at(g, k);
        ax.head(N) += dt * std::cos(th) * m.v.linear.row(k - 1).head(N);
        cx += dt * std::cos(th) * m.v.offset(k - 1);
        ay.head(N) += dt * std::sin(th) * m.v.linear.row(k - 1).head(N);
        cy += dt * std::sin(th) * m.v.offset(k - 1);
        m.x.linear.row(k) = ax;
        m.x.offset(k) = cx;
        m.y.linear.row(k) = ay;
        m.y.offset(k) = cy;
    }
    return m;
}

/// Collision rows of one layer: each row's affine value at the matching
/// footprint-circle center, minus the step's slack variable, bounded by 0.
/// When heading maps are supplied (angular/joint layers) the circle offset
/// rotates with the affine heading; otherwise the guess heading is fixed.
inline AffineRows collision_rows(const CollisionSetup& set, const GuessTrajectory& g,
                                 const PositionMaps& pm, const HeadingMaps* hm,
                                 const PlannerConfig& cfg, Eigen::Index n_cols,
                                 Eigen::Index slack_base) {
    const std::vector<double> offsets = cfg.footprint.circle_offsets();
    const Eigen::Index R = static_cast<Eigen::Index>(set.rows.size());
    AffineRows rows{{Eigen::MatrixXd::Zero(R, n_cols), Eigen::VectorXd::Zero(R)},
                    Eigen::VectorXd::Zero(R)};
    for (Eigen::Index r = 0; r < R; ++r) {
        const CollisionRow& row = set.rows[static_cast<std::size_t>(r)];
        const double o = offsets[static_cast<std::size_t>(
            set.circle_of_row[static_cast<std::size_t>(r)])];
        const int k = row.step;
        const double th = g.theta[static_cast<std::size_t>(k)];

        // circle center as an affine expression of the decisions
        Eigen::RowVectorXd cx_lin = pm.x.linear.row(k);
        Eigen::RowVectorXd cy_lin = pm.y.linear.row(k);
        double cx_off = pm.x.offset(k) + o * std::cos(th);
        double cy_off = pm.y.offset(k) + o * std::sin(th);
        if (hm != nullptr) {
            const double dth0 = hm->theta.offset(k) - th;
            cx_lin += -o * std::sin(th) * hm->theta.linear.row(k);
            cx_off += -o * std::sin(th) * dth0;
            cy_lin += o * std::cos(th) * hm->theta.linear.row(k);
            cy_off += o * std::cos(th) * dth0;
        }

        rows.expr.linear.row(r) = row.grad_x * cx_lin + row.grad_y * cy_lin;
        rows.expr.linear(r, slack_base + set.slack_of_step[static_cast<std::size_t>(k)]) = -1.0;
        rows.expr.offset(r) = row.offset + row.grad_x * (cx_off - row.x_hat) +
                              row.grad_y * (cy_off - row.y_hat);
    }
    return rows;
}

/// Goal heading re-expressed on the branch closest to the guess's terminal
/// unwrapped heading, so the quadratic pulls the short way around.
inline double goal_theta_near(const GuessTrajectory& g, double theta_f) {
    return g.theta.back() + angle_diff(theta_f, normalize_angle(g.theta.back()));
}

/// Objective value a layer would assign to the guess itself (controls
/// unchanged, slacks at their smallest feasible values). Seeds the cost
/// deltas so a warm start at a fixed point converges immediately.
inline double angular_objective_at(const GuessTrajectory& g, const CollisionSetup& set,
                                   const PlannerConfig& cfg, double w_theta) {
    const PlannerCosts c = evaluate_costs(g, cfg.goal);
    double slack = 0.0;
    for (double s : set.min_slack_per_step) slack += s;
    return c.j_theta + c.j_goal + w_theta * slack;
}

inline double velocity_objective_at(const GuessTrajectory& g, const CollisionSetup& set,
                                    const PlannerConfig& cfg, double w_v) {
    const PlannerCosts c = evaluate_costs(g, cfg.goal);
    const double ex = g.x.back() - cfg.goal.x;
    const double ey = g.y.back() - cfg.goal.y;
    double slack = 0.0;
    for (double s : set.min_slack_per_step) slack += s;
    return c.j_v + ex * ex + ey * ey + w_v * slack;
}

}  // namespace detail

struct LayerResult {
    std::vector<double> controls;
    Eigen::VectorXd slacks;
    double objective = 0.0;
    QpStatus status = QpStatus::MaxIter;
    double kkt_residual = 0.0;
    int qp_iterations = 0;
};

namespace detail {

/// Tiny quadratic on the collision slacks. They enter the objective linearly
/// (exact penalty), which leaves the Hessian singular in the slack block and
/// makes the active-set solver crawl; this curvature is negligible against
/// the penalty weight at solution scale but keeps the factorization sharp.
inline constexpr double kSlackReg = 1e-3;

inline void add_slack_terms(std::vector<QuadraticCost>& costs, Eigen::Index n, int n_slack) {
    if (n_slack == 0) return;
    AffineMap sel{Eigen::MatrixXd::Zero(n_slack, n), Eigen::VectorXd::Zero(n_slack)};
    sel.linear.rightCols(n_slack).setIdentity();
    costs.push_back({std::move(sel), Eigen::VectorXd::Zero(n_slack), kSlackReg});
}

}  // namespace detail

/// Angular-acceleration layer: minimizes angular smoothness + goal cost over
/// the heading-linearized model with body velocities fixed at the guess.
/// Curvature couples the heading rate to the guess commanded velocity; a box
/// trust region bounds the heading change per step.
inline LayerResult angular_layer(const GuessTrajectory& guess, double w_theta, double trust,
                                 const PlannerConfig& cfg, std::span<const Obstacle> obstacles) {
    if (!(w_theta > 0.0)) throw InvalidParameterError("angular_layer: w_theta must be > 0");
    if (!(trust > 0.0)) throw InvalidParameterError("angular_layer: trust must be > 0");
    const int N = guess.N();
    const detail::CollisionSetup set = detail::collision_setup(guess, obstacles, cfg);
    const Eigen::Index n = N + set.n_slack;

    const detail::HeadingMaps hm = detail::heading_maps(guess, n);
    const detail::PositionMaps pm = detail::linearized_position_maps(guess, hm, n);

    std::vector<QuadraticCost> costs;
    {
        AffineMap smooth{Eigen::MatrixXd::Zero(N, n), Eigen::VectorXd::Zero(N)};
        smooth.linear.leftCols(N).setIdentity();
        costs.push_back({std::move(smooth), Eigen::VectorXd::Zero(N), 1.0});
    }
    {
        AffineMap terminal{Eigen::MatrixXd::Zero(3, n), Eigen::VectorXd::Zero(3)};
        terminal.linear.row(0) = pm.x.linear.row(N - 1);
        terminal.linear.row(1) = pm.y.linear.row(N - 1);
        terminal.linear.row(2) = hm.theta.linear.row(N - 1);
        terminal.offset << pm.x.offset(N - 1), pm.y.offset(N - 1), hm.theta.offset(N - 1);
        Eigen::VectorXd target(3);
        target << cfg.goal.x, cfg.goal.y, detail::goal_theta_near(guess, cfg.goal.theta);
        costs.push_back({std::move(terminal), std::move(target), 1.0});
    }
    detail::add_slack_terms(costs, n, set.n_slack);
    Eigen::VectorXd lin_cost = Eigen::VectorXd::Zero(n);
    lin_cost.tail(set.n_slack).setConstant(w_theta);

    std::vector<AffineRows> cons;
    const Eigen::VectorXd ones = Eigen::VectorXd::Ones(N);
    // heading-rate bounds
    cons.push_back({hm.theta_dot, cfg.theta_dot_max * ones});
    cons.push_back({{-hm.theta_dot.linear, -hm.theta_dot.offset}, -cfg.theta_dot_min * ones});
    // curvature against the guess commanded velocity (held for the last state)
    {
        Eigen::VectorXd vc_bound(N);
        for (int i = 1; i <= N; ++i)
            vc_bound(i - 1) =
                cfg.kappa_max * guess.v_c[static_cast<std::size_t>(std::min(i, N - 1))];
        cons.push_back({hm.theta_dot, vc_bound});
        cons.push_back({{-hm.theta_dot.linear, -hm.theta_dot.offset}, vc_bound});
    }
    // trust region around the guess headings
    {
        Eigen::VectorXd th_hat(N);
        for (int k = 0; k < N; ++k) th_hat(k) = guess.theta[static_cast<std::size_t>(k)];
        cons.push_back({hm.theta, th_hat.array() + trust});
        cons.push_back({{-hm.theta.linear, -hm.theta.offset}, (-th_hat).array() + trust});
    }
    if (!set.rows.empty())
        cons.push_back(detail::collision_rows(set, guess, pm, &hm, cfg, n, N));

    Eigen::VectorXd lb = Eigen::VectorXd::Constant(n, -std::numeric_limits<double>::infinity());
    Eigen::VectorXd ub = Eigen::VectorXd::Constant(n, std::numeric_limits<double>::infinity());
    lb.head(N).setConstant(cfg.theta_ddot_min);
    ub.head(N).setConstant(cfg.theta_ddot_max);
    lb.tail(set.n_slack).setZero();

    QpProblem qp = condense(n, costs, lin_cost, cons, std::move(lb), std::move(ub));
    for (int s = 0; s < set.n_slack; ++s) qp.warm_lower_bounds.push_back(N + s);
    const QpSolution sol = solve_qp(qp);
    if (sol.status == QpStatus::Infeasible)
        throw PlannerFailureError("angular layer: QP infeasible");

    LayerResult out;
    out.controls.assign(sol.z.data(), sol.z.data() + N);
    out.slacks = sol.z.tail(set.n_slack);
    out.objective = sol.objective;
    out.status = sol.status;
    out.kkt_residual = sol.kkt_residual;
    out.qp_iterations = sol.iterations;
    return out;
}

/// Commanded-velocity layer: minimizes command jerk + goal position cost over
/// the exact affine velocity/position model with headings fixed at the guess.
/// Acceleration bounds couple each command to the previous body velocity;
/// curvature bounds the body velocity from below. No trust region.
inline LayerResult velocity_layer(const GuessTrajectory& guess, double w_v,
                                  const PlannerConfig& cfg,
                                  std::span<const Obstacle> obstacles) {
    if (!(w_v > 0.0)) throw InvalidParameterError("velocity_layer: w_v must be > 0");
    const int N = guess.N();
    const detail::CollisionSetup set = detail::collision_setup(guess, obstacles, cfg);
    const Eigen::Index n = N + set.n_slack;

    const detail::VelocityMaps vm = detail::velocity_position_maps(guess, n);

    std::vector<QuadraticCost> costs;
    if (N >= 2) {
        // command jerk rows over [v0, v_c(0..N-1)], interior samples only
        AffineMap jerk{Eigen::MatrixXd::Zero(N - 1, n), Eigen::VectorXd::Zero(N - 1)};
        const double idt2 = 1.0 / (guess.dt * guess.dt);
        for (int i = 1; i <= N - 1; ++i) {
            const Eigen::Index r = i - 1;
            if (i - 1 == 0)
                jerk.offset(r) += guess.state0.v * idt2;
            else
                jerk.linear(r, i - 2) += idt2;
            jerk.linear(r, i - 1) -= 2.0 * idt2;
            jerk.linear(r, i) += idt2;
        }
        costs.push_back({std::move(jerk), Eigen::VectorXd::Zero(N - 1), 1.0});
    }
    {
        AffineMap terminal{Eigen::MatrixXd::Zero(2, n), Eigen::VectorXd::Zero(2)};
        terminal.linear.row(0) = vm.x.linear.row(N - 1);
        terminal.linear.row(1) = vm.y.linear.row(N - 1);
        terminal.offset << vm.x.offset(N - 1), vm.y.offset(N - 1);
        Eigen::VectorXd target(2);
        target << cfg.goal.x, cfg.goal.y;
        costs.push_back({std::move(terminal), std::move(target), 1.0});
    }
    detail::add_slack_terms(costs, n, set.n_slack);
    Eigen::VectorXd lin_cost = Eigen::VectorXd::Zero(n);
    lin_cost.tail(set.n_slack).setConstant(w_v);

    std::vector<AffineRows> cons;
    {
        // a_min <= (v_c(t_i) - v(t_i)) / dt <= a_max, v(t_0) = current velocity
        AffineMap accel{Eigen::MatrixXd::Zero(N, n), Eigen::VectorXd::Zero(N)};
        const double idt = 1.0 / guess.dt;
        for (int i = 0; i < N; ++i) {
            accel.linear(i, i) += idt;
            if (i == 0)
                accel.offset(i) -= guess.state0.v * idt;
            else {
                accel.linear.row(i).head(N) -= idt * vm.v.linear.row(i - 1).head(N);
                accel.offset(i) -= idt * vm.v.offset(i - 1);
            }
        }
        cons.push_back({accel, Eigen::VectorXd::Constant(N, cfg.a_max)});
        cons.push_back({{-accel.linear, -accel.offset}, Eigen::VectorXd::Constant(N, -cfg.a_min)});
    }
    {
        // curvature: body velocity at t_i must cover the guess heading rate
        AffineRows curv{{-vm.v.linear, -vm.v.offset}, Eigen::VectorXd(N)};
        for (int i = 1; i <= N; ++i)
            curv.upper(i - 1) =
                -std::abs(guess.theta_dot[static_cast<std::size_t>(i - 1)]) / cfg.kappa_max;
        cons.push_back(std::move(curv));
    }
    if (!set.rows.empty())
        cons.push_back(detail::collision_rows(set, guess, {vm.x, vm.y}, nullptr, cfg, n, N));

    Eigen::VectorXd lb = Eigen::VectorXd::Constant(n, -std::numeric_limits<double>::infinity());
    Eigen::VectorXd ub = Eigen::VectorXd::Constant(n, std::numeric_limits<double>::infinity());
    lb.head(N).setZero();  // forward driving only
    ub.head(N).setConstant(cfg.v_max);
    lb.tail(set.n_slack).setZero();

    QpProblem qp = condense(n, costs, lin_cost, cons, std::move(lb), std::move(ub));
    for (int s = 0; s < set.n_slack; ++s) qp.warm_lower_bounds.push_back(N + s);
    const QpSolution sol = solve_qp(qp);
    if (sol.status == QpStatus::Infeasible)
        throw PlannerFailureError("velocity layer: QP infeasible");

    LayerResult out;
    out.controls.assign(sol.z.data(), sol.z.data() + N);
    out.slacks = sol.z.tail(set.n_slack);
    out.objective = sol.objective;
    out.status = sol.status;
    out.kkt_residual = sol.kkt_residual;
    out.qp_iterations = sol.iterations;
    return out;
}

namespace detail {

inline std::vector<VehicleState> rollout_states(const GuessTrajectory& g) {
    std::vector<VehicleState> out;
    out.reserve(static_cast<std::size_t>(g.N()));
    for (int k = 0; k < g.N(); ++k)
        out.push_back(VehicleState{g.x[static_cast<std::size_t>(k)],
                                   g.y[static_cast<std::size_t>(k)],
                                   normalize_angle(g.theta[static_cast<std::size_t>(k)]),
                                   g.theta_dot[static_cast<std::size_t>(k)],
                                   g.v[static_cast<std::size_t>(k)]});
    return out;
}

}  // namespace detail

/// Full alternating minimization: angular layer, velocity layer, guess
/// update after each, penalty escalation on true rolled-out violations,
/// trust-region adaptation on a cost-plus-penalty merit, until both layer
/// cost deltas drop below epsilon or the iteration budget is spent.
inline PlannerResult plan(const VehicleState& state0, std::span<const Obstacle> obstacles,
                          const PlannerConfig& cfg,
                          const std::optional<GuessTrajectory>& warm = std::nullopt) {
    const auto t_start = std::chrono::steady_clock::now();
    cfg.validate();
    if (!state0.finite()) throw InvalidInputError("plan: non-finite initial state");

    GuessTrajectory guess =
        warm ? detail::select_longitudinal_class(
                   roll_guess(state0, warm->v_c, warm->theta_ddot, cfg.dt, cfg.tau_schedule),
                   obstacles, cfg)
             : cold_start_guess(state0, cfg, obstacles);
    if (guess.N() != cfg.N) throw InvalidInputError("plan: warm start horizon mismatch");

    double w_theta = cfg.w_theta0;
    double w_v = cfg.w_v0;
    double trust = cfg.theta_trust0;
    const double trust_max = 4.0 * cfg.theta_trust0;

    PlannerResult res;
    {
        const detail::CollisionSetup set0 = detail::collision_setup(guess, obstacles, cfg);
        res.iteration_log.push_back({0, detail::angular_objective_at(guess, set0, cfg, w_theta),
                                     detail::velocity_objective_at(guess, set0, cfg, w_v),
                                     rollout_violation(guess, obstacles, cfg.footprint,
                                                       cfg.sensing)
                                         .worst,
                                     w_theta, w_v, trust});
    }
    double j_theta_prev = res.iteration_log.front().j_theta;
    double j_v_prev = res.iteration_log.front().j_v;
    bool deltas_converged = false;

    for (int k = 1; k <= cfg.max_am_iters; ++k) {
        // -- angular layer
        const ViolationStats before = rollout_violation(guess, obstacles, cfg.footprint,
                                                        cfg.sensing);
        const double merit_before =
            evaluate_costs(guess, cfg.goal).total() + w_theta * before.per_step_total;

        const LayerResult ang = angular_layer(guess, w_theta, trust, cfg, obstacles);
        ++res.qp_solves;
        res.worst_kkt = std::max(res.worst_kkt, ang.kkt_residual);
        GuessTrajectory cand = roll_guess(state0, guess.v_c, ang.controls, cfg.dt,
                                          cfg.tau_schedule);
        ViolationStats after_ang = rollout_violation(cand, obstacles, cfg.footprint,
                                                     cfg.sensing);
        if (before.worst <= 1e-6 && after_ang.worst > 1e-6) {
            // never trade a collision-free incumbent for a violating step:
            // escalate instead so the next solve prices the collision higher
            after_ang = before;
            trust = std::max(0.5 * trust, 1e-4);
            w_theta = std::min(w_theta * cfg.delta, cfg.w_cap);
        } else {
            const double merit_after =
                evaluate_costs(cand, cfg.goal).total() + w_theta * after_ang.per_step_total;
            trust = merit_after > merit_before + 1e-12 ? std::max(0.5 * trust, 1e-4)
                                                       : std::min(1.5 * trust, trust_max);
            if (after_ang.worst > 1e-6) w_theta = std::min(w_theta * cfg.delta, cfg.w_cap);
            guess = std::move(cand);
        }

        // -- velocity layer (updates the actuator constants via the schedule)
        const LayerResult vel = velocity_layer(guess, w_v, cfg, obstacles);
        ++res.qp_solves;
        res.worst_kkt = std::max(res.worst_kkt, vel.kkt_residual);
        cand = roll_guess(state0, vel.controls, guess.theta_ddot, cfg.dt, cfg.tau_schedule);
        ViolationStats after_vel = rollout_violation(cand, obstacles, cfg.footprint,
                                                     cfg.sensing);
        if (after_ang.worst <= 1e-6 && after_vel.worst > 1e-6) {
            after_vel = after_ang;
            w_v = std::min(w_v * cfg.delta, cfg.w_cap);
        } else {
            if (after_vel.worst > 1e-6) w_v = std::min(w_v * cfg.delta, cfg.w_cap);
            guess = std::move(cand);
        }

        res.iterations = k;
        res.iteration_log.push_back(
            {k, ang.objective, vel.objective, after_vel.worst, w_theta, w_v, trust});

        const double d_theta = std::abs(ang.objective - j_theta_prev);
        const double d_v = std::abs(vel.objective - j_v_prev);
        j_theta_prev = ang.objective;
        j_v_prev = vel.objective;
        if (d_theta < cfg.epsilon && d_v < cfg.epsilon) {
            deltas_converged = true;
            break;
        }
    }

    res.controls = ControlSequence{guess.v_c, guess.theta_ddot, cfg.dt, state0.v};
    res.trajectory = detail::rollout_states(guess);
    res.max_violation = rollout_violation(guess, obstacles, cfg.footprint, cfg.sensing).worst;
    res.costs = evaluate_costs(guess, cfg.goal);
    res.converged = deltas_converged && res.max_violation <= 1e-4;
    res.guess = std::move(guess);
    res.wall_time =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    return res;
}

}  // namespace altmpc

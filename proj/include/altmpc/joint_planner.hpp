// Joint baseline: one SQP over angular accelerations and commanded
// velocities simultaneously. The bilinear position terms are expanded to
// first order in both blocks; everything else (costs, collision rows,
// penalties, stopping rules) is shared with the alternating planner so the
// two are comparable run for run.
#pragma once

#include <Eigen/Dense>

#include <chrono>
#include <cmath>
#include <optional>
#include <span>
#include <vector>

#include "altmpc/planner.hpp"

namespace altmpc {

namespace detail {

/// Body-velocity map of the joint problem: the closed-form chain, placed in
/// the v_c block (columns N..2N-1).
inline AffineMap joint_velocity_map(const GuessTrajectory& g, Eigen::Index n_cols) {
    const int N = g.N();
    std::vector<double> ms(static_cast<std::size_t>(N));
    for (int i = 0; i < N; ++i) ms[static_cast<std::size_t>(i)] = std::exp(-g.dt / g.taus[i]);
    const VelocityChainMap chain = velocity_chain_map(ms);
    AffineMap v;
    v.linear.setZero(N, n_cols);
    v.linear.middleCols(N, N) = chain.from_commands;
    v.offset = chain.from_v0 * g.state0.v;
    return v;
}

/// Positions with the product v*cos(theta) expanded to first order in both
/// the affine body velocity and the affine heading.
inline PositionMaps joint_position_maps(const GuessTrajectory& g, const HeadingMaps& hm,
                                        const AffineMap& vmap, Eigen::Index n_cols) {
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
        const double vh = guess_v_at(g, k);
        const double th = guess_theta_at(g, k);
        const double dv0 = vmap.offset(k - 1) - vh;         // affine-v offset minus guess
        const double dth0 = hm.theta.offset(k - 1) - th;    // affine-theta offset minus guess
        ax += dt * (std::cos(th) * vmap.linear.row(k - 1) -
                    vh * std::sin(th) * hm.theta.linear.row(k - 1));
        cx += dt * (vh * std::cos(th) + std::cos(th) * dv0 - vh * std::sin(th) * dth0);
        ay += dt * (std::sin(th) * vmap.linear.row(k - 1) +
                    vh * std::cos(th) * hm.theta.linear.row(k - 1));
        cy += dt * (vh * std::sin(th) + std::sin(th) * dv0 + vh * std::cos(th) * dth0);
        m.x.linear.row(k) = ax;
        m.x.offset(k) = cx;
        m.y.linear.row(k) = ay;
        m.y.offset(k) = cy;
    }
    return m;
}

/// Objective the joint QP would assign to the guess itself (controls
/// unchanged, slacks minimal). Seeds the cost delta.
inline double joint_objective_at(const GuessTrajectory& g, const CollisionSetup& set,
                                 const PlannerConfig& cfg, double w) {
    const PlannerCosts c = evaluate_costs(g, cfg.goal);
    double slack = 0.0;
    for (double s : set.min_slack_per_step) slack += w * s + kSlackReg * s * s;
    return c.total() + slack;
}

}  // namespace detail

/// One SQP step of the joint problem around the guess. Decision layout:
/// [theta_ddot(N); v_c(N); s(S)]. Trust regions bound the headings (rows)
/// and the commanded velocities (tightened box).
inline LayerResult joint_step(const GuessTrajectory& guess, double w, double trust_theta,
                              double trust_v, const PlannerConfig& cfg,
                              std::span<const Obstacle> obstacles) {
    if (!(w > 0.0)) throw InvalidParameterError("joint_step: w must be > 0");
    if (!(trust_theta > 0.0) || !(trust_v > 0.0))
        throw InvalidParameterError("joint_step: trust radii must be > 0");
    const int N = guess.N();
    const detail::CollisionSetup set = detail::collision_setup(guess, obstacles, cfg);
    const Eigen::Index n = 2 * N + set.n_slack;

    const detail::HeadingMaps hm = detail::heading_maps(guess, n);
    const AffineMap vmap = detail::joint_velocity_map(guess, n);
    const detail::PositionMaps pm = detail::joint_position_maps(guess, hm, vmap, n);

    std::vector<QuadraticCost> costs;
    {
        AffineMap smooth{Eigen::MatrixXd::Zero(N, n), Eigen::VectorXd::Zero(N)};
        smooth.linear.leftCols(N).setIdentity();
        costs.push_back({std::move(smooth), Eigen::VectorXd::Zero(N), 1.0});
    }
    if (N >= 2) {
        AffineMap jerk{Eigen::MatrixXd::Zero(N - 1, n), Eigen::VectorXd::Zero(N - 1)};
        const double idt2 = 1.0 / (guess.dt * guess.dt);
        for (int i = 1; i <= N - 1; ++i) {
            const Eigen::Index r = i - 1;
            if (i - 1 == 0)
                jerk.offset(r) += guess.state0.v * idt2;
            else
                jerk.linear(r, N + i - 2) += idt2;
            jerk.linear(r, N + i - 1) -= 2.0 * idt2;
            jerk.linear(r, N + i) += idt2;
        }
        costs.push_back({std::move(jerk), Eigen::VectorXd::Zero(N - 1), 1.0});
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
    lin_cost.tail(set.n_slack).setConstant(w);

    std::vector<AffineRows> cons;
    const Eigen::VectorXd ones = Eigen::VectorXd::Ones(N);
    // heading-rate bounds
    cons.push_back({hm.theta_dot, cfg.theta_dot_max * ones});
    cons.push_back({{-hm.theta_dot.linear, -hm.theta_dot.offset}, -cfg.theta_dot_min * ones});
    {
        // curvature, coupled and exactly affine: |theta_dot(t_i)| <= kappa * v(t_i)
        AffineRows upper{{hm.theta_dot.linear - cfg.kappa_max * vmap.linear,
                          hm.theta_dot.offset - cfg.kappa_max * vmap.offset},
                         Eigen::VectorXd::Zero(N)};
        AffineRows lower{{-hm.theta_dot.linear - cfg.kappa_max * vmap.linear,
                          -hm.theta_dot.offset - cfg.kappa_max * vmap.offset},
                         Eigen::VectorXd::Zero(N)};
        cons.push_back(std::move(upper));
        cons.push_back(std::move(lower));
    }
    {
        // acceleration rows against the lagged body velocity
        AffineMap accel{Eigen::MatrixXd::Zero(N, n), Eigen::VectorXd::Zero(N)};
        const double idt = 1.0 / guess.dt;
        for (int i = 0; i < N; ++i) {
            accel.linear(i, N + i) += idt;
            if (i == 0)
                accel.offset(i) -= guess.state0.v * idt;
            else {
                accel.linear.row(i) -= idt * vmap.linear.row(i - 1);
                accel.offset(i) -= idt * vmap.offset(i - 1);
            }
        }
        cons.push_back({accel, Eigen::VectorXd::Constant(N, cfg.a_max)});
        cons.push_back({{-accel.linear, -accel.offset}, Eigen::VectorXd::Constant(N, -cfg.a_min)});
    }
    {
        // heading trust region
        Eigen::VectorXd th_hat(N);
        for (int k = 0; k < N; ++k) th_hat(k) = guess.theta[static_cast<std::size_t>(k)];
        cons.push_back({hm.theta, (th_hat.array() + trust_theta).matrix()});
        cons.push_back({{-hm.theta.linear, -hm.theta.offset},
                        ((-th_hat).array() + trust_theta).matrix()});
    }
    if (!set.rows.empty())
        cons.push_back(detail::collision_rows(set, guess, pm, &hm, cfg, n, 2 * N));

    Eigen::VectorXd lb = Eigen::VectorXd::Constant(n, -std::numeric_limits<double>::infinity());
    Eigen::VectorXd ub = Eigen::VectorXd::Constant(n, std::numeric_limits<double>::infinity());
    lb.head(N).setConstant(cfg.theta_ddot_min);
    ub.head(N).setConstant(cfg.theta_ddot_max);
    for (int i = 0; i < N; ++i) {
        // command box intersected with the v_c trust region
        lb(N + i) = std::max(0.0, guess.v_c[static_cast<std::size_t>(i)] - trust_v);
        ub(N + i) = std::min(cfg.v_max, guess.v_c[static_cast<std::size_t>(i)] + trust_v);
    }
    lb.tail(set.n_slack).setZero();

    QpProblem qp = condense(n, costs, lin_cost, cons, std::move(lb), std::move(ub));
    for (int s = 0; s < set.n_slack; ++s) qp.warm_lower_bounds.push_back(2 * N + s);
    const QpSolution sol = solve_qp(qp);
    if (sol.status == QpStatus::Infeasible)
        throw PlannerFailureError("joint step: QP infeasible");

    LayerResult out;
    out.controls.assign(sol.z.data(), sol.z.data() + 2 * N);
    out.slacks = sol.z.tail(set.n_slack);
    out.objective = sol.objective;
    out.status = sol.status;
    out.kkt_residual = sol.kkt_residual;
    out.qp_iterations = sol.iterations;
    return out;
}

/// Joint SQP loop. Matches plan() in every shared rule (cold start, penalty
/// escalation, feasible-incumbent guard, merit-driven trust adaptation,
/// epsilon stopping); the iteration budget is doubled because one alternation
/// of the layered planner costs two QP solves.
inline PlannerResult plan_joint(const VehicleState& state0, std::span<const Obstacle> obstacles,
                                const PlannerConfig& cfg,
                                const std::optional<GuessTrajectory>& warm = std::nullopt) {
    const auto t_start = std::chrono::steady_clock::now();
    cfg.validate();
    if (!state0.finite()) throw InvalidInputError("plan_joint: non-finite initial state");

    GuessTrajectory guess =
        warm ? detail::select_longitudinal_class(
                   roll_guess(state0, warm->v_c, warm->theta_ddot, cfg.dt, cfg.tau_schedule),
                   obstacles, cfg)
             : cold_start_guess(state0, cfg, obstacles);
    if (guess.N() != cfg.N) throw InvalidInputError("plan_joint: warm start horizon mismatch");

    double w = cfg.w_theta0;
    double trust_theta = cfg.theta_trust0;
    double trust_v = cfg.v_trust0;
    const double trust_theta_max = 4.0 * cfg.theta_trust0;
    const double trust_v_max = 4.0 * cfg.v_trust0;

    PlannerResult res;
    {
        const detail::CollisionSetup set0 = detail::collision_setup(guess, obstacles, cfg);
        const PlannerCosts c0 = evaluate_costs(guess, cfg.goal);
        res.iteration_log.push_back(
            {0, c0.j_theta, c0.j_v,
             rollout_violation(guess, obstacles, cfg.footprint, cfg.sensing).worst, w, w,
             trust_theta});
        res.iteration_log.front().j_theta = detail::joint_objective_at(guess, set0, cfg, w);
        res.iteration_log.front().j_v = res.iteration_log.front().j_theta;
    }
    double j_prev = res.iteration_log.front().j_theta;
    bool deltas_converged = false;

    const int budget = 2 * cfg.max_am_iters;
    for (int k = 1; k <= budget; ++k) {
        const ViolationStats before = rollout_violation(guess, obstacles, cfg.footprint,
                                                        cfg.sensing);
        const double merit_before =
            evaluate_costs(guess, cfg.goal).total() + w * before.per_step_total;

        const LayerResult step = joint_step(guess, w, trust_theta, trust_v, cfg, obstacles);
        ++res.qp_solves;
        res.worst_kkt = std::max(res.worst_kkt, step.kkt_residual);

        const int N = cfg.N;
        std::vector<double> theta_ddot(step.controls.begin(), step.controls.begin() + N);
        std::vector<double> v_c(step.controls.begin() + N, step.controls.begin() + 2 * N);
        GuessTrajectory cand =
            roll_guess(state0, std::move(v_c), std::move(theta_ddot), cfg.dt, cfg.tau_schedule);
        ViolationStats after = rollout_violation(cand, obstacles, cfg.footprint, cfg.sensing);

        if (before.worst <= 1e-6 && after.worst > 1e-6) {
            after = before;
            trust_theta = std::max(0.5 * trust_theta, 1e-4);
            trust_v = std::max(0.5 * trust_v, 1e-4);
            w = std::min(w * cfg.delta, cfg.w_cap);
        } else {
            const double merit_after =
                evaluate_costs(cand, cfg.goal).total() + w * after.per_step_total;
            if (merit_after > merit_before + 1e-12) {
                trust_theta = std::max(0.5 * trust_theta, 1e-4);
                trust_v = std::max(0.5 * trust_v, 1e-4);
            } else {
                trust_theta = std::min(1.5 * trust_theta, trust_theta_max);
                trust_v = std::min(1.5 * trust_v, trust_v_max);
            }
            if (after.worst > 1e-6) w = std::min(w * cfg.delta, cfg.w_cap);
            guess = std::move(cand);
        }

        res.iterations = k;
        const PlannerCosts ck = evaluate_costs(guess, cfg.goal);
        res.iteration_log.push_back({k, ck.j_theta, ck.j_v, after.worst, w, w, trust_theta});

        const double d = std::abs(step.objective - j_prev);
        j_prev = step.objective;
        if (d < cfg.epsilon) {
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

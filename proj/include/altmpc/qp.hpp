// Dense convex quadratic programs: problem container, condensing helper for
// affine-in-controls horizons, and a dual active-set solver (Goldfarb-Idnani)
// with an exact KKT refinement pass.
#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "altmpc/errors.hpp"

namespace altmpc {

enum class QpStatus { Optimal, MaxIter, Infeasible };

inline const char* to_string(QpStatus s) {
    switch (s) {
        case QpStatus::Optimal: return "Optimal";
        case QpStatus::MaxIter: return "MaxIter";
        case QpStatus::Infeasible: return "Infeasible";
    }
    return "Unknown";
}

/// minimize 0.5 z'Hz + g'z + c0  subject to  A_ineq z <= b_ineq, lb <= z <= ub.
struct QpProblem {
    Eigen::MatrixXd H;
    Eigen::VectorXd g;
    Eigen::MatrixXd A_ineq;
    Eigen::VectorXd b_ineq;
    Eigen::VectorXd lb;
    Eigen::VectorXd ub;
    /// Constant cost term so the reported objective matches the uncondensed
    /// problem the QP was derived from.
    double c0 = 0.0;
    /// Variable indices whose lower bound starts in the active set. Intended
    /// for slack variables: their linear-only cost puts the unconstrained
    /// minimizer at a huge negative excursion that would otherwise poison the
    /// first iterations numerically.
    std::vector<int> warm_lower_bounds;

    Eigen::Index n() const { return H.rows(); }
    Eigen::Index m() const { return A_ineq.rows(); }

    void validate() const {
        const Eigen::Index nn = n();
        if (H.cols() != nn) throw InvalidProblemError("QpProblem: H must be square");
        if (g.size() != nn) throw InvalidProblemError("QpProblem: g size mismatch");
        if (A_ineq.size() > 0 && A_ineq.cols() != nn)
            throw InvalidProblemError("QpProblem: A_ineq column count mismatch");
        if (b_ineq.size() != m()) throw InvalidProblemError("QpProblem: b_ineq size mismatch");
        if (lb.size() != nn || ub.size() != nn)
            throw InvalidProblemError("QpProblem: bound size mismatch");
        if (!H.allFinite() || !g.allFinite() || (A_ineq.size() > 0 && !A_ineq.allFinite()) ||
            (b_ineq.size() > 0 && !b_ineq.allFinite()) || !std::isfinite(c0))
            throw InvalidProblemError("QpProblem: non-finite entries");
        if ((H - H.transpose()).cwiseAbs().maxCoeff() > 1e-8 * (1.0 + H.cwiseAbs().maxCoeff()))
            throw InvalidProblemError("QpProblem: H must be symmetric");
        for (int idx : warm_lower_bounds) {
            if (idx < 0 || idx >= nn)
                throw InvalidProblemError("QpProblem: warm-start index out of range");
            if (!std::isfinite(lb(idx)))
                throw InvalidProblemError("QpProblem: warm-start index without finite lower bound");
        }
    }
};

struct QpSolution {
    Eigen::VectorXd z;
    double objective = std::numeric_limits<double>::quiet_NaN();
    QpStatus status = QpStatus::MaxIter;
    double kkt_residual = std::numeric_limits<double>::infinity();
    int iterations = 0;
    /// Multipliers of A_ineq rows, lower bounds, and upper bounds (all >= 0).
    Eigen::VectorXd mult_ineq;
    Eigen::VectorXd mult_lb;
    Eigen::VectorXd mult_ub;
};

namespace detail {

enum class RowKind { General, Lower, Upper };

/// One constraint in the solver's internal form  normal' z >= rhs.
struct RowRef {
    RowKind kind;
    int index;  // row of A_ineq or variable index
};

/// Worst first-order optimality violation: stationarity, primal and dual
/// feasibility, complementary slackness, all in infinity norm.
inline double kkt_residual(const QpProblem& p, const Eigen::VectorXd& z,
                           const Eigen::VectorXd& mult_ineq, const Eigen::VectorXd& mult_lb,
                           const Eigen::VectorXd& mult_ub) {
    const Eigen::Index n = p.n(), m = p.m();
    Eigen::VectorXd grad = p.H * z + p.g - mult_lb + mult_ub;
    if (m > 0) grad += p.A_ineq.transpose() * mult_ineq;
    double res = grad.cwiseAbs().maxCoeff();
    if (m > 0) {
        const Eigen::VectorXd s = p.A_ineq * z - p.b_ineq;
        res = std::max(res, s.maxCoeff());
        res = std::max(res, -mult_ineq.minCoeff());
        res = std::max(res, (mult_ineq.array() * s.array()).abs().maxCoeff());
    }
    for (Eigen::Index i = 0; i < n; ++i) {
        if (std::isfinite(p.lb(i))) {
            res = std::max(res, p.lb(i) - z(i));
            res = std::max(res, std::abs(mult_lb(i) * (p.lb(i) - z(i))));
        }
        if (std::isfinite(p.ub(i))) {
            res = std::max(res, z(i) - p.ub(i));
            res = std::max(res, std::abs(mult_ub(i) * (z(i) - p.ub(i))));
        }
        res = std::max(res, -mult_lb(i));
        res = std::max(res, -mult_ub(i));
    }
    return res;
}

class DualActiveSet {
  public:
    explicit DualActiveSet(const QpProblem& p) : p_(p), n_(p.n()) {
        // Collect every constraint as  normal' z >= rhs.
        lower_row_.assign(static_cast<std::size_t>(n_), -1);
        for (Eigen::Index i = 0; i < p.m(); ++i) refs_.push_back({RowKind::General, int(i)});
        for (Eigen::Index i = 0; i < n_; ++i) {
            if (std::isfinite(p.lb(i))) {
                lower_row_[static_cast<std::size_t>(i)] = static_cast<int>(refs_.size());
                refs_.push_back({RowKind::Lower, int(i)});
            }
            if (std::isfinite(p.ub(i))) refs_.push_back({RowKind::Upper, int(i)});
        }
        const Eigen::Index M = static_cast<Eigen::Index>(refs_.size());
        C_.setZero(M, n_);
        c0_.setZero(M);
        for (Eigen::Index j = 0; j < M; ++j) {
            const RowRef& r = refs_[static_cast<std::size_t>(j)];
            switch (r.kind) {
                case RowKind::General:
                    C_.row(j) = -p.A_ineq.row(r.index);
                    c0_(j) = -p.b_ineq(r.index);
                    break;
                case RowKind::Lower:
                    C_(j, r.index) = 1.0;
                    c0_(j) = p.lb(r.index);
                    break;
                case RowKind::Upper:
                    C_(j, r.index) = -1.0;
                    c0_(j) = -p.ub(r.index);
                    break;
            }
        }
        norms_ = C_.rowwise().norm().cwiseMax(1e-30);
        mask_.assign(static_cast<std::size_t>(M), 0);
    }

    QpSolution solve() {
        QpSolution sol;
        sol.mult_ineq.setZero(p_.m());
        sol.mult_lb.setZero(n_);
        sol.mult_ub.setZero(n_);

        if (n_ > 0 && (p_.lb.array() > p_.ub.array() + 1e-12).any()) {
            sol.status = QpStatus::Infeasible;
            sol.z.setZero(n_);
            return sol;
        }

        factorize_cost();
        if (!warm_start()) cold_start();

        const int iter_cap = 500;
        int iter = 0;
        bool hit_cap = false;
        while (true) {
            const int p_row = most_violated();
            if (p_row < 0) break;  // primal feasible => optimal in the dual method
            const Eigen::VectorXd np = C_.row(p_row).transpose();
            double s_p = np.dot(x_) - c0_(p_row);
            double u_p = 0.0;

            while (true) {
                if (++iter > iter_cap) { hit_cap = true; break; }
                const Eigen::VectorXd d = J_.transpose() * np;
                const Eigen::Index q = static_cast<Eigen::Index>(active_.size());
                const double z_norm2 = d.tail(n_ - q).squaredNorm();
                const bool has_z = z_norm2 > 1e-14 * std::max(1.0, np.squaredNorm());
                Eigen::VectorXd r;
                if (q > 0)
                    r = R_.topLeftCorner(q, q).triangularView<Eigen::Upper>().solve(d.head(q));

                // dual blocking step over active constraints with r_k > 0
                double t1 = std::numeric_limits<double>::infinity();
                int block = -1;
                for (Eigen::Index k = 0; k < q; ++k) {
                    if (r(k) > 1e-12) {
                        const double cand = u_(k) / r(k);
                        if (cand < t1 - 1e-15) { t1 = cand; block = int(k); }
                    }
                }
                // full step restoring feasibility of row p
                const double t2 =
                    has_z ? -s_p / z_norm2 : std::numeric_limits<double>::infinity();

                if (!std::isfinite(t1) && !std::isfinite(t2)) {
                    sol.status = QpStatus::Infeasible;
                    sol.z = x_;
                    sol.iterations = iter;
                    sol.objective = objective(x_);
                    return sol;
                }
                const double t = std::min(t1, t2);
                if (has_z) {
                    x_ += t * (J_.rightCols(n_ - q) * d.tail(n_ - q));
                    s_p += t * z_norm2;
                }
                if (q > 0) u_.head(q) -= t * r;
                u_p += t;

                if (t == t2 && has_z) {
                    add_constraint(p_row, d, u_p);
                    break;
                }
                drop_constraint(block);
            }
            if (hit_cap) break;
        }

        sol.z = x_;
        sol.iterations = iter;
        scatter_multipliers(sol);
        polish(sol);
        sol.objective = objective(sol.z);
        sol.kkt_residual = kkt_residual(p_, sol.z, sol.mult_ineq, sol.mult_lb, sol.mult_ub);
        // A cap-limited or numerically degraded run must not claim optimality.
        sol.status = (!hit_cap && sol.kkt_residual <= 1e-6) ? QpStatus::Optimal : QpStatus::MaxIter;
        return sol;
    }

  private:
    void factorize_cost() {
        llt_.compute(p_.H);
        reg_ = 0.0;
        if (llt_.info() != Eigen::Success) {
            // Smoothness costs have nullspaces (e.g. linear velocity ramps)
            // and slack variables carry no quadratic term at all.
            reg_ = 1e-8;
            Eigen::MatrixXd Hr = p_.H;
            Hr.diagonal().array() += reg_;
            llt_.compute(Hr);
            if (llt_.info() != Eigen::Success)
                throw InvalidProblemError("solve_qp: cost matrix is not positive semidefinite");
        }
    }

    void cold_start() {
        x_ = llt_.solve(-p_.g);
        J_ = Eigen::MatrixXd::Identity(n_, n_);
        llt_.matrixU().solveInPlace(J_);  // J = L^{-T}
        R_.setZero(n_, n_);
        u_.setZero(n_ + 1);
        active_.clear();
        std::fill(mask_.begin(), mask_.end(), 0);
    }

    /// Starts from the equality-constrained optimum with the requested lower
    /// bounds tight. Solved in block form so the free variables never see the
    /// warm coordinates' unconstrained excursion. Falls back to a cold start
    /// whenever the construction is invalid (dependent rows, negative duals).
    bool warm_start() {
        cold_start();
        if (p_.warm_lower_bounds.empty()) return true;

        std::vector<int> W = p_.warm_lower_bounds;
        std::sort(W.begin(), W.end());
        W.erase(std::unique(W.begin(), W.end()), W.end());
        std::vector<char> in_w(static_cast<std::size_t>(n_), 0);
        for (int w : W) in_w[static_cast<std::size_t>(w)] = 1;
        std::vector<int> F;
        F.reserve(static_cast<std::size_t>(n_) - W.size());
        for (Eigen::Index i = 0; i < n_; ++i)
            if (!in_w[static_cast<std::size_t>(i)]) F.push_back(int(i));

        const Eigen::Index nf = static_cast<Eigen::Index>(F.size());
        const Eigen::Index nw = static_cast<Eigen::Index>(W.size());
        Eigen::VectorXd x(n_);
        for (Eigen::Index k = 0; k < nw; ++k) x(W[static_cast<std::size_t>(k)]) = p_.lb(W[k]);
        if (nf > 0) {
            Eigen::MatrixXd Hff(nf, nf);
            Eigen::VectorXd geff(nf);
            for (Eigen::Index i = 0; i < nf; ++i) {
                geff(i) = p_.g(F[static_cast<std::size_t>(i)]);
                for (Eigen::Index j = 0; j < nf; ++j)
                    Hff(i, j) = p_.H(F[static_cast<std::size_t>(i)], F[static_cast<std::size_t>(j)]);
                Hff(i, i) += reg_;
                for (Eigen::Index k = 0; k < nw; ++k)
                    geff(i) += p_.H(F[static_cast<std::size_t>(i)], W[static_cast<std::size_t>(k)]) *
                               x(W[static_cast<std::size_t>(k)]);
            }
            const Eigen::LLT<Eigen::MatrixXd> llt_ff(Hff);
            if (llt_ff.info() != Eigen::Success) return false;
            const Eigen::VectorXd xf = llt_ff.solve(-geff);
            for (Eigen::Index i = 0; i < nf; ++i) x(F[static_cast<std::size_t>(i)]) = xf(i);
        }

        Eigen::VectorXd grad = p_.H * x + p_.g + reg_ * x;
        for (Eigen::Index k = 0; k < nw; ++k)
            if (grad(W[static_cast<std::size_t>(k)]) < -1e-9) return false;

        x_ = x;
        for (Eigen::Index k = 0; k < nw; ++k) {
            const int var = W[static_cast<std::size_t>(k)];
            const int row = lower_row_[static_cast<std::size_t>(var)];
            if (row < 0) return false;
            const Eigen::VectorXd np = C_.row(row).transpose();
            const Eigen::VectorXd d = J_.transpose() * np;
            const Eigen::Index q = static_cast<Eigen::Index>(active_.size());
            if (d.tail(n_ - q).squaredNorm() <= 1e-14 * std::max(1.0, np.squaredNorm()))
                return false;
            add_constraint(row, d, std::max(0.0, grad(var)));
        }
        return true;
    }

    double objective(const Eigen::VectorXd& z) const {
        return 0.5 * z.dot(p_.H * z) + p_.g.dot(z) + p_.c0;
    }

    /// Index of the most violated inactive row (violation scaled by the row
    /// norm), or -1 when primal feasible. Ties break on the lowest index so
    /// runs are reproducible.
    int most_violated() const {
        const Eigen::VectorXd s = C_ * x_ - c0_;
        double worst = -1e-10;
        int p_row = -1;
        for (Eigen::Index j = 0; j < s.size(); ++j) {
            if (mask_[static_cast<std::size_t>(j)]) continue;
            const double v = s(j) / norms_(j);
            if (v < worst) { worst = v; p_row = int(j); }
        }
        return p_row;
    }

    /// Rotates d so its tail vanishes, mirrors the rotations into J, then
    /// appends the new column to R. Maintains  J' * N_active = [R; 0].
    void add_constraint(int row, Eigen::VectorXd d, double u_new) {
        const Eigen::Index q = static_cast<Eigen::Index>(active_.size());
        for (Eigen::Index k = n_ - 1; k > q; --k) {
            const double a = d(k - 1), b = d(k);
            const double h = std::hypot(a, b);
            if (h <= 1e-300) { d(k - 1) = 0.0; d(k) = 0.0; continue; }
            const double cs = a / h, sn = b / h;
            d(k - 1) = h;
            d(k) = 0.0;
            const Eigen::VectorXd col = J_.col(k - 1);
            J_.col(k - 1) = cs * col + sn * J_.col(k);
            J_.col(k) = -sn * col + cs * J_.col(k);
        }
        R_.col(q).head(q + 1) = d.head(q + 1);
        u_(q) = u_new;
        active_.push_back(row);
        mask_[static_cast<std::size_t>(row)] = 1;
    }

    /// Removes the active constraint at position l and re-triangularizes R.
    void drop_constraint(int l) {
        const Eigen::Index q = static_cast<Eigen::Index>(active_.size());
        mask_[static_cast<std::size_t>(active_[static_cast<std::size_t>(l)])] = 0;
        active_.erase(active_.begin() + l);
        for (Eigen::Index j = l; j + 1 < q; ++j) u_(j) = u_(j + 1);
        for (Eigen::Index j = l; j + 1 < q; ++j) R_.col(j).head(q) = R_.col(j + 1).head(q);
        const Eigen::Index qn = q - 1;
        for (Eigen::Index j = l; j < qn; ++j) {
            const double a = R_(j, j), b = R_(j + 1, j);
            if (std::abs(b) <= 1e-300) continue;
            const double h = std::hypot(a, b);
            const double cs = a / h, sn = b / h;
            for (Eigen::Index c = j; c < qn; ++c) {
                const double r1 = R_(j, c), r2 = R_(j + 1, c);
                R_(j, c) = cs * r1 + sn * r2;
                R_(j + 1, c) = -sn * r1 + cs * r2;
            }
            const Eigen::VectorXd col = J_.col(j);
            J_.col(j) = cs * col + sn * J_.col(j + 1);
            J_.col(j + 1) = -sn * col + cs * J_.col(j + 1);
        }
    }

    void scatter_multipliers(QpSolution& sol) const {
        sol.mult_ineq.setZero(p_.m());
        sol.mult_lb.setZero(n_);
        sol.mult_ub.setZero(n_);
        for (std::size_t k = 0; k < active_.size(); ++k) {
            const RowRef& r = refs_[static_cast<std::size_t>(active_[k])];
            const double u = std::max(0.0, u_(static_cast<Eigen::Index>(k)));
            switch (r.kind) {
                case RowKind::General: sol.mult_ineq(r.index) = u; break;
                case RowKind::Lower: sol.mult_lb(r.index) = u; break;
                case RowKind::Upper: sol.mult_ub(r.index) = u; break;
            }
        }
    }

    /// Re-solves the equality-constrained problem on the identified active
    /// set with a null-space method, re-adding rows the refined point starts
    /// violating. The incremental Givens updates of the main loop drift over
    /// hundreds of pivots; this pass restores full precision. The refined
    /// iterate is kept only when it improves the KKT residual.
    void polish(QpSolution& sol) const {
        std::vector<int> set = active_;
        Eigen::VectorXd x_best = sol.z;
        Eigen::VectorXd mi = sol.mult_ineq, ml = sol.mult_lb, mu = sol.mult_ub;
        double best = kkt_residual(p_, x_best, mi, ml, mu);

        for (int round = 0; round < 5; ++round) {
            const Eigen::Index q = static_cast<Eigen::Index>(set.size());
            Eigen::VectorXd x_new;
            Eigen::VectorXd u_new;
            if (q == 0) {
                Eigen::MatrixXd Hr = p_.H;
                Hr.diagonal().array() += 1e-10;
                x_new = Hr.ldlt().solve(-p_.g);
            } else {
                Eigen::MatrixXd N(n_, q);
                Eigen::VectorXd rhs(q);
                for (Eigen::Index k = 0; k < q; ++k) {
                    N.col(k) = C_.row(set[static_cast<std::size_t>(k)]).transpose();
                    rhs(k) = c0_(set[static_cast<std::size_t>(k)]);
                }
                const Eigen::HouseholderQR<Eigen::MatrixXd> qr(N);
                const Eigen::MatrixXd Rq =
                    qr.matrixQR().topRows(q).triangularView<Eigen::Upper>();
                const double dmax = Rq.diagonal().cwiseAbs().maxCoeff();
                if (Rq.diagonal().cwiseAbs().minCoeff() < 1e-12 * std::max(1.0, dmax))
                    break;  // dependent active set; keep the solver iterate
                const Eigen::MatrixXd Q =
                    qr.householderQ() * Eigen::MatrixXd::Identity(n_, n_);
                const Eigen::MatrixXd Qthin = Q.leftCols(q);
                const Eigen::MatrixXd Z = Q.rightCols(n_ - q);
                const Eigen::VectorXd x0 =
                    Qthin * Rq.transpose().triangularView<Eigen::Lower>().solve(rhs);
                x_new = x0;
                if (Z.cols() > 0) {
                    Eigen::MatrixXd Hz = Z.transpose() * p_.H * Z;
                    Hz.diagonal().array() += 1e-10;
                    const Eigen::VectorXd y =
                        Hz.ldlt().solve(-Z.transpose() * (p_.H * x0 + p_.g));
                    x_new += Z * y;
                }
                u_new = Rq.triangularView<Eigen::Upper>().solve(
                    Qthin.transpose() * (-(p_.H * x_new + p_.g)));
            }

            Eigen::VectorXd pmi = Eigen::VectorXd::Zero(p_.m());
            Eigen::VectorXd pml = Eigen::VectorXd::Zero(n_);
            Eigen::VectorXd pmu = Eigen::VectorXd::Zero(n_);
            for (Eigen::Index k = 0; k < q; ++k) {
                const RowRef& r =
                    refs_[static_cast<std::size_t>(set[static_cast<std::size_t>(k)])];
                const double uv = u_new.size() > 0 ? u_new(k) : 0.0;
                switch (r.kind) {
                    case RowKind::General: pmi(r.index) = uv; break;
                    case RowKind::Lower: pml(r.index) = uv; break;
                    case RowKind::Upper: pmu(r.index) = uv; break;
                }
            }
            const double res = kkt_residual(p_, x_new, pmi, pml, pmu);
            if (res < best) {
                best = res;
                x_best = x_new;
                mi = pmi;
                ml = pml;
                mu = pmu;
            }

            // Re-add the worst row the refined point violates, if any.
            const Eigen::VectorXd s = C_ * x_new - c0_;
            double worst = -1e-9;
            int add = -1;
            for (Eigen::Index j = 0; j < s.size(); ++j) {
                if (std::find(set.begin(), set.end(), int(j)) != set.end()) continue;
                const double v = s(j) / norms_(j);
                if (v < worst) { worst = v; add = int(j); }
            }
            if (add < 0) break;
            set.push_back(add);
        }

        sol.z = x_best;
        sol.mult_ineq = mi.cwiseMax(0.0);
        sol.mult_lb = ml.cwiseMax(0.0);
        sol.mult_ub = mu.cwiseMax(0.0);
    }

    const QpProblem& p_;
    Eigen::Index n_;
    std::vector<RowRef> refs_;
    std::vector<int> lower_row_;  // variable index -> row of its lower bound
    Eigen::MatrixXd C_;
    Eigen::VectorXd c0_;
    Eigen::VectorXd norms_;
    std::vector<char> mask_;  // row currently active?
    Eigen::LLT<Eigen::MatrixXd> llt_;
    double reg_ = 0.0;
    Eigen::MatrixXd J_, R_;
    Eigen::VectorXd x_, u_;
    std::vector<int> active_;
};

}  // namespace detail

/// Solves the QP to first-order optimality within 1e-6 or reports a
/// definitive non-Optimal status. Deterministic for identical inputs.
inline QpSolution solve_qp(const QpProblem& p) {
    p.validate();
    detail::DualActiveSet solver(p);
    return solver.solve();
}

/// Affine expression  value(z) = linear * z + offset.
struct AffineMap {
    Eigen::MatrixXd linear;
    Eigen::VectorXd offset;

    Eigen::Index rows() const { return linear.rows(); }

    void validate(Eigen::Index n_dec) const {
        if (offset.size() != linear.rows())
            throw InvalidProblemError("AffineMap: offset/linear row mismatch");
        if (linear.size() > 0 && linear.cols() != n_dec)
            throw InvalidProblemError("AffineMap: column count does not match decision size");
        if (!linear.allFinite() || !offset.allFinite())
            throw InvalidProblemError("AffineMap: non-finite entries");
    }

    Eigen::VectorXd operator()(const Eigen::VectorXd& z) const { return linear * z + offset; }
};

/// weight * || expr(z) - target ||^2
struct QuadraticCost {
    AffineMap expr;
    Eigen::VectorXd target;
    double weight = 1.0;
};

/// expr(z) <= upper, rowwise.
struct AffineRows {
    AffineMap expr;
    Eigen::VectorXd upper;
};

/// Eliminates the affine state expressions, producing a decision-variable-only
/// QP whose objective and constraint values agree with direct evaluation at
/// every point (constant term included via c0).
inline QpProblem condense(Eigen::Index n_dec, std::span<const QuadraticCost> costs,
                          const Eigen::VectorXd& linear_cost,
                          std::span<const AffineRows> constraints, Eigen::VectorXd lb,
                          Eigen::VectorXd ub) {
    if (n_dec < 0) throw InvalidProblemError("condense: negative decision size");
    QpProblem qp;
    qp.H.setZero(n_dec, n_dec);
    qp.g.setZero(n_dec);
    if (linear_cost.size() > 0) {
        if (linear_cost.size() != n_dec)
            throw InvalidProblemError("condense: linear cost size mismatch");
        qp.g = linear_cost;
    }
    for (const QuadraticCost& c : costs) {
        c.expr.validate(n_dec);
        if (c.target.size() != c.expr.rows())
            throw InvalidProblemError("condense: quadratic target size mismatch");
        if (!(c.weight >= 0.0) || !std::isfinite(c.weight))
            throw InvalidProblemError("condense: quadratic weight must be finite and >= 0");
        const Eigen::VectorXd e = c.expr.offset - c.target;
        qp.H.selfadjointView<Eigen::Lower>().rankUpdate(c.expr.linear.transpose(), 2.0 * c.weight);
        qp.g.noalias() += 2.0 * c.weight * c.expr.linear.transpose() * e;
        qp.c0 += c.weight * e.squaredNorm();
    }
    qp.H = qp.H.selfadjointView<Eigen::Lower>();

    Eigen::Index m = 0;
    for (const AffineRows& r : constraints) {
        r.expr.validate(n_dec);
        if (r.upper.size() != r.expr.rows())
            throw InvalidProblemError("condense: constraint bound size mismatch");
        m += r.expr.rows();
    }
    qp.A_ineq.resize(m, n_dec);
    qp.b_ineq.resize(m);
    Eigen::Index at = 0;
    for (const AffineRows& r : constraints) {
        qp.A_ineq.middleRows(at, r.expr.rows()) = r.expr.linear;
        qp.b_ineq.segment(at, r.expr.rows()) = r.upper - r.expr.offset;
        at += r.expr.rows();
    }

    const double inf = std::numeric_limits<double>::infinity();
    qp.lb = lb.size() > 0 ? std::move(lb) : Eigen::VectorXd::Constant(n_dec, -inf).eval();
    qp.ub = ub.size() > 0 ? std::move(ub) : Eigen::VectorXd::Constant(n_dec, inf).eval();
    if (qp.lb.size() != n_dec || qp.ub.size() != n_dec)
        throw InvalidProblemError("condense: bound size mismatch");
    return qp;
}

/// Plain-text dump (dense row-major with a dimension header) for debugging.
inline std::string dump(const QpProblem& p) {
    std::ostringstream os;
    os.precision(17);
    os << "qp n=" << p.n() << " m=" << p.m() << "\n";
    const auto matrix = [&os](const char* name, const Eigen::MatrixXd& M) {
        os << name << " (" << M.rows() << " x " << M.cols() << "):\n";
        for (Eigen::Index i = 0; i < M.rows(); ++i) {
            for (Eigen::Index j = 0; j < M.cols(); ++j) os << (j ? " " : "") << M(i, j);
            os << "\n";
        }
    };
    const auto vector = [&os](const char* name, const Eigen::VectorXd& v) {
        os << name << " (" << v.size() << "):\n";
        for (Eigen::Index i = 0; i < v.size(); ++i) os << (i ? " " : "") << v(i);
        os << "\n";
    };
    matrix("H", p.H);
    vector("g", p.g);
    matrix("A_ineq", p.A_ineq);
    vector("b_ineq", p.b_ineq);
    vector("lb", p.lb);
    vector("ub", p.ub);
    os << "c0: " << p.c0 << "\n";
    return os.str();
}

}  // namespace altmpc

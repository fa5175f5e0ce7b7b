#include "shuttle/box_qp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include <Eigen/Cholesky>
#include <fmt/format.h>

#include "shuttle/errors.hpp"

namespace shuttle {

QpProblem make_box_problem(Eigen::MatrixXd P, Eigen::VectorXd q, double fsr) {
  if (!(fsr > 0.0) || !std::isfinite(fsr)) throw ValidationError("fsr must be positive");
  const Eigen::Index n = q.size();
  if (P.rows() != n || P.cols() != n) throw ValidationError("P and q dimensions disagree");
  QpProblem qp;
  qp.P = std::move(P);
  qp.q = std::move(q);
  qp.G = Eigen::MatrixXd::Zero(2 * n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    qp.G(2 * i, i) = 1.0;
    qp.G(2 * i + 1, i) = -1.0;
  }
  qp.h = Eigen::VectorXd::Constant(2 * n, 0.5 * fsr);
  return qp;
}

QpProblem assemble_qp(const BasisMatrix& basis, const Eigen::VectorXd& f, double fsr) {
  if (f.size() != basis.samples()) {
    throw ValidationError(fmt::format("target has {} samples but basis has {}", f.size(), basis.samples()));
  }
  const Eigen::MatrixXd v = basis.values;
  return make_box_problem(2.0 * v * v.transpose(), -2.0 * v * f, fsr);
}

void box_bounds(const QpProblem& qp, Eigen::VectorXd& lower, Eigen::VectorXd& upper) {
  const Eigen::Index n = qp.dimension();
  if (qp.G.cols() != n || qp.G.rows() != qp.h.size()) throw ValidationError("G/h dimensions disagree");
  lower = Eigen::VectorXd::Constant(n, -std::numeric_limits<double>::infinity());
  upper = Eigen::VectorXd::Constant(n, std::numeric_limits<double>::infinity());
  std::vector<int> seen_lower(n, 0), seen_upper(n, 0);
  for (Eigen::Index r = 0; r < qp.G.rows(); ++r) {
    Eigen::Index col = -1;
    for (Eigen::Index c = 0; c < n; ++c) {
      if (qp.G(r, c) == 0.0) continue;
      if (col >= 0 || std::abs(qp.G(r, c)) != 1.0) throw ValidationError("G is not a box constraint");
      col = c;
    }
    if (col < 0) throw ValidationError("G has an empty row");
    if (qp.G(r, col) > 0.0) {
      upper[col] = std::min(upper[col], qp.h[r]);
      ++seen_upper[col];
    } else {
      lower[col] = std::max(lower[col], -qp.h[r]);
      ++seen_lower[col];
    }
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!seen_lower[i] || !seen_upper[i]) throw ValidationError("G leaves a variable unbounded");
    if (lower[i] > upper[i]) throw ValidationError("box constraints are infeasible");
  }
}

double projected_gradient_norm(const Eigen::VectorXd& x, const Eigen::VectorXd& gradient,
                               const Eigen::VectorXd& lower, const Eigen::VectorXd& upper) {
  double sq = 0.0;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    double g = gradient[i];
    if (x[i] <= lower[i]) g = std::min(g, 0.0);
    if (x[i] >= upper[i]) g = std::max(g, 0.0);
    sq += g * g;
  }
  return std::sqrt(sq);
}

BoxQpResult solve_box_qp(const QpProblem& qp, const BoxQpOptions& options) {
  const Eigen::Index n = qp.dimension();
  if (qp.P.rows() != n || qp.P.cols() != n) throw ValidationError("P and q dimensions disagree");
  Eigen::VectorXd lower, upper;
  box_bounds(qp, lower, upper);

  Eigen::MatrixXd P = 0.5 * (qp.P + qp.P.transpose());
  if (n > 0) P.diagonal().array() += options.ridge_epsilon * P.trace() / static_cast<double>(n);
  const double tol = options.kkt_tolerance * (1.0 + qp.q.norm());

  Eigen::VectorXd x = Eigen::VectorXd::Zero(n).cwiseMax(lower).cwiseMin(upper);
  Eigen::VectorXi state = Eigen::VectorXi::Zero(n);  // -1 at lower, +1 at upper
  for (Eigen::Index i = 0; i < n; ++i) {
    if (x[i] == lower[i]) state[i] = -1;
    else if (x[i] == upper[i]) state[i] = 1;
  }

  auto gradient = [&](const Eigen::VectorXd& at) -> Eigen::VectorXd { return P * at + qp.q; };

  int it = 0;
  bool solved = false;
  for (; it < options.max_iterations; ++it) {
    std::vector<Eigen::Index> free;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (state[i] == 0) free.push_back(i);
    }
    const Eigen::VectorXd g = gradient(x);

    if (!free.empty()) {
      const auto m = static_cast<Eigen::Index>(free.size());
      Eigen::MatrixXd Pff(m, m);
      Eigen::VectorXd rhs(m);
      for (Eigen::Index r = 0; r < m; ++r) {
        rhs[r] = -g[free[r]];
        for (Eigen::Index c = 0; c < m; ++c) Pff(r, c) = P(free[r], free[c]);
      }
      const Eigen::LDLT<Eigen::MatrixXd> ldlt(Pff);
      Eigen::VectorXd p = ldlt.solve(rhs);
      p += ldlt.solve(rhs - Pff * p);  // one step of iterative refinement

      double alpha = 1.0;
      Eigen::Index blocking = -1;
      double blocking_dir = 0.0;
      for (Eigen::Index r = 0; r < m; ++r) {
        const Eigen::Index i = free[r];
        double t = std::numeric_limits<double>::infinity();
        if (p[r] < 0.0) t = (lower[i] - x[i]) / p[r];
        else if (p[r] > 0.0) t = (upper[i] - x[i]) / p[r];
        if (t < alpha) {
          alpha = t;
          blocking = i;
          blocking_dir = p[r];
        }
      }
      for (Eigen::Index r = 0; r < m; ++r) x[free[r]] += alpha * p[r];
      x = x.cwiseMax(lower).cwiseMin(upper);
      if (blocking >= 0) {
        state[blocking] = blocking_dir < 0.0 ? -1 : 1;
        x[blocking] = state[blocking] < 0 ? lower[blocking] : upper[blocking];
        continue;
      }
    }

    // x minimizes over the current face; release the worst wrong-signed bound.
    const Eigen::VectorXd gx = gradient(x);
    Eigen::Index release = -1;
    double worst = 1e-3 * tol;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double violation = state[i] < 0 ? -gx[i] : state[i] > 0 ? gx[i] : 0.0;
      if (violation > worst) {
        worst = violation;
        release = i;
      }
    }
    if (release < 0) {
      solved = true;
      break;
    }
    state[release] = 0;
  }

  BoxQpResult result;
  result.x = x;
  result.objective = qp.objective(x);
  result.kkt_residual = projected_gradient_norm(x, gradient(x), lower, upper);
  result.iterations = it;
  result.active = state;
  if (!solved) {
    throw SolverError(fmt::format("solver did not converge after {} iterations", it), x,
                      result.kkt_residual);
  }
  if (result.kkt_residual > tol) {
    throw SolverError(fmt::format("solver did not converge: KKT residual {:.3g} exceeds {:.3g}",
                                  result.kkt_residual, tol),
                      x, result.kkt_residual);
  }
  return result;
}

}  // namespace shuttle

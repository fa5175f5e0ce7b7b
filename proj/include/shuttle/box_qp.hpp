#pragma once

#include <Eigen/Core>

#include "shuttle/trap_model.hpp"

namespace shuttle {

/// minimize 1/2 x'Px + q'x  subject to  Gx <= h.
/// G carries one +e_i and one -e_i row per variable, so the feasible set is a box.
struct QpProblem {
  Eigen::MatrixXd P;
  Eigen::VectorXd q;
  Eigen::MatrixXd G;
  Eigen::VectorXd h;

  Eigen::Index dimension() const { return q.size(); }
  double objective(const Eigen::VectorXd& x) const { return 0.5 * x.dot(P * x) + q.dot(x); }
};

/// Rows +e_i, -e_i for every variable with h = fsr/2 throughout.
QpProblem make_box_problem(Eigen::MatrixXd P, Eigen::VectorXd q, double fsr);

/// P = 2 v v', q = -2 v f', plus the symmetric box |x_i| <= fsr/2.
/// Throws ValidationError on a grid mismatch or a non-positive fsr.
QpProblem assemble_qp(const BasisMatrix& basis, const Eigen::VectorXd& f, double fsr);

struct BoxQpOptions {
  int max_iterations = 100000;
  /// Ridge added to P as ridge_epsilon * trace(P) / n * I before solving.
  double ridge_epsilon = 1e-12;
  /// KKT acceptance: projected-gradient norm <= kkt_tolerance * (1 + |q|).
  double kkt_tolerance = 1e-8;
};

struct BoxQpResult {
  Eigen::VectorXd x;
  double objective = 0.0;          // of the unregularized problem
  double kkt_residual = 0.0;       // projected-gradient norm of the regularized problem
  int iterations = 0;
  Eigen::VectorXi active;          // -1 lower bound, +1 upper bound, 0 free
};

/// Bounds implied by a box-form G/h. Throws ValidationError for any other G.
void box_bounds(const QpProblem& qp, Eigen::VectorXd& lower, Eigen::VectorXd& upper);

/// Projected-gradient norm of x for the given gradient and bounds.
double projected_gradient_norm(const Eigen::VectorXd& x, const Eigen::VectorXd& gradient,
                               const Eigen::VectorXd& lower, const Eigen::VectorXd& upper);

/// Primal active-set solver for convex box-constrained QPs, started from the
/// projection of x = 0. Throws SolverError carrying the best iterate when the
/// iteration limit is hit or the KKT check fails.
BoxQpResult solve_box_qp(const QpProblem& qp, const BoxQpOptions& options = {});

}  // namespace shuttle

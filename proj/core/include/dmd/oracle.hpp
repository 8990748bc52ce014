#pragma once

#include <vector>

#include "dmd/instance.hpp"

namespace dmd {

struct SolveOptions {
  double kkt_tol = 1e-8;
  double theta_start = 1.0;
  double theta_end = 1e-10;
  double theta_factor = 0.1;
  int max_inner_iterations = 200;
};

// Primal/dual solution of the capacity-constrained welfare problem.
// b and mu are populated only for MMTP: b[l][k_pos] follows the order of
// groups_on_link[l]; mu[i][l_pos] follows links_of_agent[i].
struct CentralSolution {
  std::vector<double> x;
  std::vector<std::vector<double>> b;
  std::vector<double> lambda;
  std::vector<std::vector<double>> mu;
  double objective = 0.0;
  double kkt_residual = 0.0;
  double theta_final = 0.0;
};

struct KktReport {
  double primal_feasibility = 0.0;
  double dual_feasibility = 0.0;
  double complementary_slackness = 0.0;
  double stationarity = 0.0;
  double max_residual() const;
};

// Log-barrier interior-point solve with damped Newton inner iterations.
// Duals are recovered as theta/slack. Throws Error(Solver) when the inner
// iteration budget is exhausted before the gradient tolerance is met.
CentralSolution solve_utp(const IndexSets& sets, const SolveOptions& opts = {});
CentralSolution solve_mmtp(const IndexSets& sets, const SolveOptions& opts = {});

KktReport kkt_residual(const IndexSets& sets, const CentralSolution& sol);

// Exhaustive grid search over the feasible set, last coordinate closed-form
// (the objective is increasing, so it sits on the boundary). Primal only.
// Refuses instances with more than four rate variables.
CentralSolution brute_force_solve(const IndexSets& sets, double grid_step);

double objective_value(const IndexSets& sets, const std::vector<double>& x);

// Per-link load induced by x: sum of rates (UTP) or sum over groups of the
// per-group max (MMTP).
std::vector<double> link_loads(const IndexSets& sets, const std::vector<double>& x);

}  // namespace dmd

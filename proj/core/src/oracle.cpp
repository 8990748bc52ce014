#include "dmd/oracle.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>

#include "dmd/error.hpp"

namespace dmd {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double sum(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s;
}

}  // namespace

double KktReport::max_residual() const {
  return std::max(std::max(primal_feasibility, dual_feasibility),
                  std::max(complementary_slackness, stationarity));
}

double objective_value(const IndexSets& sets, const std::vector<double>& x) {
  double obj = 0.0;
  for (int i = 0; i < sets.num_agents; ++i) {
    obj += x[i] > 0.0 ? sets.valuation[i].value(x[i]) : sets.valuation[i].value_at_zero();
  }
  return obj;
}

std::vector<double> link_loads(const IndexSets& sets, const std::vector<double>& x) {
  std::vector<double> load(sets.num_links, 0.0);
  for (int l = 0; l < sets.num_links; ++l) {
    if (sets.protocol == Protocol::Utp) {
      for (int i : sets.agents_on_link[l]) load[l] += x[i];
    } else {
      for (int k : sets.groups_on_link[l]) {
        double m = 0.0;
        for (int i : sets.group_members_on_link[l][k]) m = std::max(m, x[i]);
        load[l] += m;
      }
    }
  }
  return load;
}

// ---------------------------------------------------------------------------
// Barrier solver
// ---------------------------------------------------------------------------

namespace {

// Dense variable layout for the barrier stage: x_0..x_{N-1}, then for MMTP
// one b variable per (link, group position in groups_on_link[l]).
struct BarrierLayout {
  const IndexSets* sets;
  bool mmtp;
  int num_vars;
  std::vector<int> b_offset;  // per link, index of its first b variable

  explicit BarrierLayout(const IndexSets& s) : sets(&s), mmtp(s.protocol == Protocol::Mmtp) {
    num_vars = s.num_agents;
    b_offset.assign(s.num_links, -1);
    if (mmtp) {
      for (int l = 0; l < s.num_links; ++l) {
        b_offset[l] = num_vars;
        num_vars += static_cast<int>(s.groups_on_link[l].size());
      }
    }
  }

  int b_index(int l, int k) const {
    const auto& ks = sets->groups_on_link[l];
    auto it = std::lower_bound(ks.begin(), ks.end(), k);
    return b_offset[l] + static_cast<int>(it - ks.begin());
  }
};

// Interior feasibility: x > 0, capacity slack > 0, and b - x > 0 (MMTP).
bool strictly_feasible(const BarrierLayout& lay, const Eigen::VectorXd& v) {
  const IndexSets& s = *lay.sets;
  for (int i = 0; i < s.num_agents; ++i)
    if (!(v[i] > 0.0)) return false;
  for (int l = 0; l < s.num_links; ++l) {
    double load = 0.0;
    if (lay.mmtp) {
      for (size_t kp = 0; kp < s.groups_on_link[l].size(); ++kp) load += v[lay.b_offset[l] + kp];
    } else {
      for (int i : s.agents_on_link[l]) load += v[i];
    }
    if (!(load < s.capacity[l])) return false;
  }
  if (lay.mmtp) {
    for (int i = 0; i < s.num_agents; ++i)
      for (int l : s.links_of_agent[i])
        if (!(v[i] < v[lay.b_index(l, s.group_of_agent[i])])) return false;
  }
  return true;
}

double barrier_value(const BarrierLayout& lay, const Eigen::VectorXd& v, double theta) {
  const IndexSets& s = *lay.sets;
  double val = 0.0;
  for (int i = 0; i < s.num_agents; ++i) val += s.valuation[i].value(v[i]) + theta * std::log(v[i]);
  for (int l = 0; l < s.num_links; ++l) {
    double load = 0.0;
    if (lay.mmtp) {
      for (size_t kp = 0; kp < s.groups_on_link[l].size(); ++kp) load += v[lay.b_offset[l] + kp];
    } else {
      for (int i : s.agents_on_link[l]) load += v[i];
    }
    val += theta * std::log(s.capacity[l] - load);
  }
  if (lay.mmtp) {
    for (int i = 0; i < s.num_agents; ++i)
      for (int l : s.links_of_agent[i])
        val += theta * std::log(v[lay.b_index(l, s.group_of_agent[i])] - v[i]);
  }
  return val;
}

void barrier_derivatives(const BarrierLayout& lay, const Eigen::VectorXd& v, double theta,
                         Eigen::VectorXd& g, Eigen::MatrixXd& h) {
  const IndexSets& s = *lay.sets;
  const int n = lay.num_vars;
  g.setZero(n);
  h.setZero(n, n);
  for (int i = 0; i < s.num_agents; ++i) {
    g[i] += s.valuation[i].grad(v[i]) + theta / v[i];
    h(i, i) += s.valuation[i].grad2(v[i]) - theta / (v[i] * v[i]);
  }
  for (int l = 0; l < s.num_links; ++l) {
    double load = 0.0;
    if (lay.mmtp) {
      for (size_t kp = 0; kp < s.groups_on_link[l].size(); ++kp) load += v[lay.b_offset[l] + kp];
    } else {
      for (int i : s.agents_on_link[l]) load += v[i];
    }
    const double slack = s.capacity[l] - load;
    const double d1 = theta / slack;
    const double d2 = theta / (slack * slack);
    if (lay.mmtp) {
      const int nk = static_cast<int>(s.groups_on_link[l].size());
      for (int a = 0; a < nk; ++a) {
        g[lay.b_offset[l] + a] -= d1;
        for (int bidx = 0; bidx < nk; ++bidx) h(lay.b_offset[l] + a, lay.b_offset[l] + bidx) -= d2;
      }
    } else {
      for (int a : s.agents_on_link[l]) {
        g[a] -= d1;
        for (int b : s.agents_on_link[l]) h(a, b) -= d2;
      }
    }
  }
  if (lay.mmtp) {
    for (int i = 0; i < s.num_agents; ++i) {
      for (int l : s.links_of_agent[i]) {
        const int bi = lay.b_index(l, s.group_of_agent[i]);
        const double gap = v[bi] - v[i];
        const double d1 = theta / gap;
        const double d2 = theta / (gap * gap);
        g[i] -= d1;
        g[bi] += d1;
        h(i, i) -= d2;
        h(bi, bi) -= d2;
        h(i, bi) += d2;
        h(bi, i) += d2;
      }
    }
  }
}

Eigen::VectorXd initial_point(const BarrierLayout& lay) {
  const IndexSets& s = *lay.sets;
  double c_min = kInf;
  for (double c : s.capacity) c_min = std::min(c_min, c);
  Eigen::VectorXd v(lay.num_vars);
  const double x0 = (lay.mmtp ? 0.25 : 0.5) * c_min / std::max(1, s.num_agents);
  for (int i = 0; i < s.num_agents; ++i) v[i] = x0;
  if (lay.mmtp) {
    for (int l = 0; l < s.num_links; ++l) {
      const int nk = static_cast<int>(s.groups_on_link[l].size());
      for (int kp = 0; kp < nk; ++kp) v[lay.b_offset[l] + kp] = 0.5 * s.capacity[l] / nk;
    }
  }
  return v;
}

void run_barrier(const BarrierLayout& lay, const SolveOptions& opts, Eigen::VectorXd& v,
                 double& theta_final) {
  double theta = opts.theta_start;
  Eigen::VectorXd g, step;
  Eigen::MatrixXd h;
  while (true) {
    const double grad_tol = std::max(1e-11, 1e-5 * theta);
    int it = 0;
    for (; it < opts.max_inner_iterations; ++it) {
      barrier_derivatives(lay, v, theta, g, h);
      if (g.lpNorm<Eigen::Infinity>() <= grad_tol) break;
      // Concave objective: solve (-H) step = g for an ascent direction.
      Eigen::LDLT<Eigen::MatrixXd> ldlt(-h);
      step = ldlt.solve(g);
      if (!step.allFinite() || g.dot(step) <= 0.0) step = g;  // fallback: gradient ascent
      const double f0 = barrier_value(lay, v, theta);
      const double slope = g.dot(step);
      // Newton decrement below the floating-point resolution of the
      // objective: no measurable progress is possible, accept the point.
      if (0.5 * slope <= 1e-14 * std::max(1.0, std::abs(f0))) break;
      double t = 1.0;
      bool moved = false;
      for (int bt = 0; bt < 70; ++bt) {
        Eigen::VectorXd cand = v + t * step;
        if (strictly_feasible(lay, cand) &&
            barrier_value(lay, cand, theta) >= f0 + 1e-4 * t * slope) {
          v = cand;
          moved = true;
          break;
        }
        t *= 0.5;
      }
      if (!moved) break;  // line search stalled at numerical precision
    }
    if (it == opts.max_inner_iterations) {
      barrier_derivatives(lay, v, theta, g, h);
      throw Error(ErrorKind::Solver,
                  "barrier stage did not converge (theta=" + std::to_string(theta) +
                      ", gradient norm=" + std::to_string(g.lpNorm<Eigen::Infinity>()) + ")");
    }
    theta_final = theta;
    if (theta <= opts.theta_end * (1.0 + 1e-12)) break;
    theta = std::max(theta * opts.theta_factor, opts.theta_end);
  }
}

CentralSolution extract_solution(const BarrierLayout& lay, const Eigen::VectorXd& v,
                                 double theta) {
  const IndexSets& s = *lay.sets;
  CentralSolution sol;
  sol.theta_final = theta;
  sol.x.assign(s.num_agents, 0.0);
  for (int i = 0; i < s.num_agents; ++i) sol.x[i] = v[i];
  sol.lambda.assign(s.num_links, 0.0);
  for (int l = 0; l < s.num_links; ++l) {
    double load = 0.0;
    if (lay.mmtp) {
      for (size_t kp = 0; kp < s.groups_on_link[l].size(); ++kp) load += v[lay.b_offset[l] + kp];
    } else {
      for (int i : s.agents_on_link[l]) load += v[i];
    }
    sol.lambda[l] = theta / (s.capacity[l] - load);
  }
  if (lay.mmtp) {
    sol.mu.assign(s.num_agents, {});
    for (int i = 0; i < s.num_agents; ++i) {
      for (int l : s.links_of_agent[i]) {
        const double gap = v[lay.b_index(l, s.group_of_agent[i])] - v[i];
        sol.mu[i].push_back(theta / gap);
      }
    }
    sol.b.assign(s.num_links, {});
    for (int l = 0; l < s.num_links; ++l) {
      for (size_t kp = 0; kp < s.groups_on_link[l].size(); ++kp)
        sol.b[l].push_back(v[lay.b_offset[l] + kp]);
    }
  }
  return sol;
}

// ---------------------------------------------------------------------------
// Active-set polish: Newton on the exact KKT equalities identified by the
// barrier output. Removes the O(theta) bias of the barrier duals.
// ---------------------------------------------------------------------------

bool polish_utp(const IndexSets& s, CentralSolution& sol) {
  const double theta = sol.theta_final;
  std::vector<char> active(s.num_agents, 1);
  std::vector<char> tight(s.num_links, 0);
  // an agent is at the x = 0 boundary when its barrier multiplier theta/x is
  // a significant fraction of its price sum
  for (int i = 0; i < s.num_agents; ++i) {
    double lam_sum = 0.0;
    for (int l : s.links_of_agent[i]) lam_sum += sol.lambda[l];
    if (theta / sol.x[i] > 1e-3 * std::max(1.0, lam_sum)) active[i] = 0;
  }
  int n_tight = 0;
  for (int l = 0; l < s.num_links; ++l)
    if (sol.lambda[l] > 1e-4) {
      tight[l] = 1;
      ++n_tight;
    }
  if (n_tight == 0) return false;

  std::vector<int> xpos(s.num_agents, -1), lpos(s.num_links, -1);
  int n = 0;
  for (int i = 0; i < s.num_agents; ++i)
    if (active[i]) xpos[i] = n++;
  const int nx = n;
  for (int l = 0; l < s.num_links; ++l)
    if (tight[l]) lpos[l] = n++;

  Eigen::VectorXd u(n);
  for (int i = 0; i < s.num_agents; ++i)
    if (active[i]) u[xpos[i]] = sol.x[i];
  for (int l = 0; l < s.num_links; ++l)
    if (tight[l]) u[lpos[l]] = sol.lambda[l];

  Eigen::VectorXd f(n);
  Eigen::MatrixXd jac(n, n);
  for (int iter = 0; iter < 60; ++iter) {
    f.setZero();
    jac.setZero();
    for (int i = 0; i < s.num_agents; ++i) {
      if (!active[i]) continue;
      if (u[xpos[i]] <= 0.0) return false;
      f[xpos[i]] = s.valuation[i].grad(u[xpos[i]]);
      jac(xpos[i], xpos[i]) = s.valuation[i].grad2(u[xpos[i]]);
      for (int l : s.links_of_agent[i]) {
        if (!tight[l]) continue;
        f[xpos[i]] -= u[lpos[l]];
        jac(xpos[i], lpos[l]) -= 1.0;
      }
    }
    for (int l = 0; l < s.num_links; ++l) {
      if (!tight[l]) continue;
      f[lpos[l]] = -s.capacity[l];
      for (int i : s.agents_on_link[l]) {
        if (!active[i]) continue;
        f[lpos[l]] += u[xpos[i]];
        jac(lpos[l], xpos[i]) += 1.0;
      }
    }
    if (f.lpNorm<Eigen::Infinity>() <= 1e-13) break;
    Eigen::VectorXd d = jac.fullPivLu().solve(-f);
    if (!d.allFinite()) return false;
    u += d;
  }
  if (f.lpNorm<Eigen::Infinity>() > 1e-10) return false;
  for (int i = 0; i < nx; ++i)
    if (!(u[i] > 0.0)) return false;
  for (int l = 0; l < s.num_links; ++l)
    if (tight[l] && u[lpos[l]] < -1e-12) return false;

  for (int i = 0; i < s.num_agents; ++i) sol.x[i] = active[i] ? u[xpos[i]] : 0.0;
  for (int l = 0; l < s.num_links; ++l) sol.lambda[l] = tight[l] ? std::max(0.0, u[lpos[l]]) : 0.0;
  sol.theta_final = 0.0;
  return true;
}

bool polish_mmtp(const IndexSets& s, CentralSolution& sol) {
  const double theta = sol.theta_final;
  std::vector<char> active(s.num_agents, 1);
  for (int i = 0; i < s.num_agents; ++i) {
    double mu_sum = sum(sol.mu[i]);
    if (theta / sol.x[i] > 1e-3 * std::max(1.0, mu_sum)) active[i] = 0;
  }
  std::vector<char> tight(s.num_links, 0);
  int n_tight = 0;
  for (int l = 0; l < s.num_links; ++l)
    if (sol.lambda[l] > 1e-4) {
      tight[l] = 1;
      ++n_tight;
    }
  if (n_tight == 0) return false;
  // coupling x_i = b_{k(i)}^l is active when its barrier dual is significant
  std::vector<std::vector<char>> coupled(s.num_agents);
  for (int i = 0; i < s.num_agents; ++i) {
    coupled[i].assign(s.links_of_agent[i].size(), 0);
    for (size_t lp = 0; lp < s.links_of_agent[i].size(); ++lp) {
      const int l = s.links_of_agent[i][lp];
      if (tight[l] && sol.mu[i][lp] > 1e-4 * std::max(1.0, sol.lambda[l])) coupled[i][lp] = 1;
    }
  }

  // variable layout: x (active agents), b (tight links), lambda (tight links),
  // mu (active couplings)
  std::vector<int> xpos(s.num_agents, -1), lpos(s.num_links, -1);
  std::vector<std::vector<int>> bpos(s.num_links), mpos(s.num_agents);
  int n = 0;
  for (int i = 0; i < s.num_agents; ++i)
    if (active[i]) xpos[i] = n++;
  for (int l = 0; l < s.num_links; ++l) {
    bpos[l].assign(s.groups_on_link[l].size(), -1);
    if (!tight[l]) continue;
    for (size_t kp = 0; kp < s.groups_on_link[l].size(); ++kp) bpos[l][kp] = n++;
    lpos[l] = n++;
  }
  for (int i = 0; i < s.num_agents; ++i) {
    mpos[i].assign(s.links_of_agent[i].size(), -1);
    for (size_t lp = 0; lp < s.links_of_agent[i].size(); ++lp)
      if (coupled[i][lp]) mpos[i][lp] = n++;
  }

  auto group_pos = [&](int l, int k) {
    const auto& ks = s.groups_on_link[l];
    return static_cast<int>(std::lower_bound(ks.begin(), ks.end(), k) - ks.begin());
  };

  Eigen::VectorXd u(n);
  for (int i = 0; i < s.num_agents; ++i)
    if (active[i]) u[xpos[i]] = sol.x[i];
  for (int l = 0; l < s.num_links; ++l) {
    if (!tight[l]) continue;
    for (size_t kp = 0; kp < s.groups_on_link[l].size(); ++kp) u[bpos[l][kp]] = sol.b[l][kp];
    u[lpos[l]] = sol.lambda[l];
  }
  for (int i = 0; i < s.num_agents; ++i)
    for (size_t lp = 0; lp < s.links_of_agent[i].size(); ++lp)
      if (coupled[i][lp]) u[mpos[i][lp]] = sol.mu[i][lp];

  // equations, in order: stationarity in x per active agent; group-price
  // identity lambda = sum(mu) per (tight link, group); capacity per tight
  // link; coupling x = b per active coupling
  Eigen::VectorXd f(n);
  Eigen::MatrixXd jac(n, n);
  for (int iter = 0; iter < 60; ++iter) {
    f.setZero();
    jac.setZero();
    int row = 0;
    for (int i = 0; i < s.num_agents; ++i) {
      if (!active[i]) continue;
      if (u[xpos[i]] <= 0.0) return false;
      f[row] = s.valuation[i].grad(u[xpos[i]]);
      jac(row, xpos[i]) = s.valuation[i].grad2(u[xpos[i]]);
      for (size_t lp = 0; lp < s.links_of_agent[i].size(); ++lp) {
        if (!coupled[i][lp]) continue;
        f[row] -= u[mpos[i][lp]];
        jac(row, mpos[i][lp]) -= 1.0;
      }
      ++row;
    }
    for (int l = 0; l < s.num_links; ++l) {
      if (!tight[l]) continue;
      for (int k : s.groups_on_link[l]) {
        f[row] = u[lpos[l]];
        jac(row, lpos[l]) = 1.0;
        for (int i : s.group_members_on_link[l][k]) {
          const auto& li = s.links_of_agent[i];
          const int lp = static_cast<int>(std::lower_bound(li.begin(), li.end(), l) - li.begin());
          if (!coupled[i][lp]) continue;
          f[row] -= u[mpos[i][lp]];
          jac(row, mpos[i][lp]) -= 1.0;
        }
        ++row;
      }
      f[row] = -s.capacity[l];
      for (size_t kp = 0; kp < s.groups_on_link[l].size(); ++kp) {
        f[row] += u[bpos[l][kp]];
        jac(row, bpos[l][kp]) = 1.0;
      }
      ++row;
    }
    for (int i = 0; i < s.num_agents; ++i) {
      for (size_t lp = 0; lp < s.links_of_agent[i].size(); ++lp) {
        if (!coupled[i][lp]) continue;
        const int l = s.links_of_agent[i][lp];
        const int bp = bpos[l][group_pos(l, s.group_of_agent[i])];
        f[row] = (active[i] ? u[xpos[i]] : 0.0) - u[bp];
        if (active[i]) jac(row, xpos[i]) = 1.0;
        jac(row, bp) = -1.0;
        ++row;
      }
    }
    if (row != n) return false;
    if (f.lpNorm<Eigen::Infinity>() <= 1e-13) break;
    Eigen::VectorXd d = jac.fullPivLu().solve(-f);
    if (!d.allFinite()) return false;
    u += d;
  }
  if (f.lpNorm<Eigen::Infinity>() > 1e-10) return false;

  CentralSolution out = sol;
  out.theta_final = 0.0;
  for (int i = 0; i < s.num_agents; ++i) out.x[i] = active[i] ? u[xpos[i]] : 0.0;
  for (int i = 0; i < s.num_agents; ++i)
    if (active[i] && !(out.x[i] > 0.0)) return false;
  for (int l = 0; l < s.num_links; ++l) {
    out.lambda[l] = tight[l] ? u[lpos[l]] : 0.0;
    if (out.lambda[l] < -1e-12) return false;
    out.lambda[l] = std::max(0.0, out.lambda[l]);
  }
  for (int i = 0; i < s.num_agents; ++i) {
    for (size_t lp = 0; lp < s.links_of_agent[i].size(); ++lp) {
      out.mu[i][lp] = coupled[i][lp] ? u[mpos[i][lp]] : 0.0;
      if (out.mu[i][lp] < -1e-12) return false;
      out.mu[i][lp] = std::max(0.0, out.mu[i][lp]);
    }
  }
  for (int l = 0; l < s.num_links; ++l) {
    for (size_t kp = 0; kp < s.groups_on_link[l].size(); ++kp) {
      const int k = s.groups_on_link[l][kp];
      double gmax = 0.0;
      for (int i : s.group_members_on_link[l][k]) gmax = std::max(gmax, out.x[i]);
      out.b[l][kp] = tight[l] ? u[bpos[l][kp]] : gmax;
      if (out.b[l][kp] < gmax - 1e-9) return false;
      out.b[l][kp] = std::max(out.b[l][kp], gmax);
    }
  }
  sol = std::move(out);
  return true;
}

CentralSolution solve_impl(const IndexSets& sets, const SolveOptions& opts) {
  BarrierLayout lay(sets);
  Eigen::VectorXd v = initial_point(lay);
  if (!strictly_feasible(lay, v)) {
    throw Error(ErrorKind::Solver, "no strictly feasible starting point");
  }
  double theta_final = opts.theta_start;
  run_barrier(lay, opts, v, theta_final);
  CentralSolution sol = extract_solution(lay, v, theta_final);
  if (lay.mmtp) {
    // group rates on slack links are under-determined; pin them to the
    // per-group max before reporting
    CentralSolution polished = sol;
    if (polish_mmtp(sets, polished)) {
      KktReport rep = kkt_residual(sets, polished);
      if (rep.max_residual() <= opts.kkt_tol) sol = std::move(polished);
    }
    for (int l = 0; l < sets.num_links; ++l) {
      for (size_t kp = 0; kp < sets.groups_on_link[l].size(); ++kp) {
        const int k = sets.groups_on_link[l][kp];
        double gmax = 0.0;
        for (int i : sets.group_members_on_link[l][k]) gmax = std::max(gmax, sol.x[i]);
        if (sol.lambda[l] <= opts.kkt_tol) sol.b[l][kp] = gmax;
      }
    }
  } else {
    CentralSolution polished = sol;
    if (polish_utp(sets, polished)) {
      KktReport rep = kkt_residual(sets, polished);
      if (rep.max_residual() <= opts.kkt_tol) sol = std::move(polished);
    }
  }
  sol.objective = objective_value(sets, sol.x);
  KktReport rep = kkt_residual(sets, sol);
  sol.kkt_residual = rep.max_residual();
  if (sol.kkt_residual > opts.kkt_tol) {
    throw Error(ErrorKind::Solver, "solution fails certification (kkt residual " +
                                       std::to_string(sol.kkt_residual) + ")");
  }
  return sol;
}

}  // namespace

CentralSolution solve_utp(const IndexSets& sets, const SolveOptions& opts) {
  if (sets.protocol != Protocol::Utp) throw Error(ErrorKind::Config, "solve_utp needs a utp instance");
  return solve_impl(sets, opts);
}

CentralSolution solve_mmtp(const IndexSets& sets, const SolveOptions& opts) {
  if (sets.protocol != Protocol::Mmtp) throw Error(ErrorKind::Config, "solve_mmtp needs an mmtp instance");
  return solve_impl(sets, opts);
}

KktReport kkt_residual(const IndexSets& sets, const CentralSolution& sol) {
  KktReport rep;
  double c_max = 0.0;
  for (double c : sets.capacity) c_max = std::max(c_max, c);
  const double zero_thr = 1e-9 * c_max;

  for (int i = 0; i < sets.num_agents; ++i)
    rep.primal_feasibility = std::max(rep.primal_feasibility, -sol.x[i]);
  for (int l = 0; l < sets.num_links; ++l)
    rep.dual_feasibility = std::max(rep.dual_feasibility, -sol.lambda[l]);

  if (sets.protocol == Protocol::Utp) {
    for (int l = 0; l < sets.num_links; ++l) {
      double load = 0.0;
      for (int i : sets.agents_on_link[l]) load += sol.x[i];
      rep.primal_feasibility = std::max(rep.primal_feasibility, load - sets.capacity[l]);
      rep.complementary_slackness = std::max(rep.complementary_slackness,
                                             std::abs(sol.lambda[l] * (sets.capacity[l] - load)));
    }
    for (int i = 0; i < sets.num_agents; ++i) {
      double lam_sum = 0.0;
      for (int l : sets.links_of_agent[i]) lam_sum += sol.lambda[l];
      const double grad = sets.valuation[i].grad(std::max(sol.x[i], 0.0));
      const double r = sol.x[i] > zero_thr ? std::abs(grad - lam_sum) : std::max(0.0, grad - lam_sum);
      rep.stationarity = std::max(rep.stationarity, r);
    }
    return rep;
  }

  for (int i = 0; i < sets.num_agents; ++i)
    for (double m : sol.mu[i]) rep.dual_feasibility = std::max(rep.dual_feasibility, -m);
  for (int l = 0; l < sets.num_links; ++l) {
    double bsum = 0.0;
    for (double b : sol.b[l]) bsum += b;
    rep.primal_feasibility = std::max(rep.primal_feasibility, bsum - sets.capacity[l]);
    rep.complementary_slackness = std::max(rep.complementary_slackness,
                                           std::abs(sol.lambda[l] * (sets.capacity[l] - bsum)));
    for (size_t kp = 0; kp < sets.groups_on_link[l].size(); ++kp) {
      const int k = sets.groups_on_link[l][kp];
      double mu_sum = 0.0;
      for (int i : sets.group_members_on_link[l][k]) {
        const auto& li = sets.links_of_agent[i];
        const int lp = static_cast<int>(std::lower_bound(li.begin(), li.end(), l) - li.begin());
        mu_sum += sol.mu[i][lp];
        rep.primal_feasibility = std::max(rep.primal_feasibility, sol.x[i] - sol.b[l][kp]);
        rep.complementary_slackness =
            std::max(rep.complementary_slackness,
                     std::abs(sol.mu[i][lp] * (sol.x[i] - sol.b[l][kp])));
      }
      rep.stationarity = std::max(rep.stationarity, std::abs(sol.lambda[l] - mu_sum));
    }
  }
  for (int i = 0; i < sets.num_agents; ++i) {
    double mu_sum = sum(sol.mu[i]);
    const double grad = sets.valuation[i].grad(std::max(sol.x[i], 0.0));
    const double r = sol.x[i] > zero_thr ? std::abs(grad - mu_sum) : std::max(0.0, grad - mu_sum);
    rep.stationarity = std::max(rep.stationarity, r);
  }
  return rep;
}

CentralSolution brute_force_solve(const IndexSets& sets, double grid_step) {
  const int n = sets.num_agents;
  if (n > 4) throw Error(ErrorKind::Config, "brute_force_solve refuses more than 4 rate variables");
  if (!(grid_step > 0.0)) throw Error(ErrorKind::Config, "grid step must be positive");

  // the last variable is closed-form: the objective is increasing, so it is
  // pushed to its largest feasible value given the others
  std::vector<double> ub(n, kInf);
  for (int i = 0; i < n; ++i)
    for (int l : sets.links_of_agent[i]) ub[i] = std::min(ub[i], sets.capacity[l]);

  std::vector<int> steps(n, 0);
  double work = 1.0;
  for (int i = 0; i + 1 < n; ++i) {
    steps[i] = static_cast<int>(std::floor(ub[i] / grid_step));
    work *= steps[i] + 1;
  }
  if (work > 5e8) throw Error(ErrorKind::Config, "grid too fine for this instance");

  const int last = n - 1;
  std::vector<double> x(n, 0.0), best_x(n, 0.0);
  double best_obj = -kInf;
  bool found = false;

  auto last_bound = [&]() -> double {
    double bound = ub[last];
    for (int l = 0; l < sets.num_links; ++l) {
      if (sets.protocol == Protocol::Utp) {
        double others = 0.0;
        bool uses = false;
        for (int i : sets.agents_on_link[l]) {
          if (i == last)
            uses = true;
          else
            others += x[i];
        }
        if (uses)
          bound = std::min(bound, sets.capacity[l] - others);
        else if (others > sets.capacity[l] + 1e-12)
          return -kInf;
      } else {
        double other_groups = 0.0, own_group = 0.0;
        bool uses = false;
        const int klast = sets.group_of_agent[last];
        for (int k : sets.groups_on_link[l]) {
          double m = 0.0;
          for (int i : sets.group_members_on_link[l][k]) {
            if (i == last) {
              uses = true;
              continue;
            }
            m = std::max(m, x[i]);
          }
          if (k == klast && uses)
            own_group = m;
          else
            other_groups += m;
        }
        if (uses) {
          if (own_group + other_groups > sets.capacity[l] + 1e-12) return -kInf;
          bound = std::min(bound, sets.capacity[l] - other_groups);
        } else if (other_groups + own_group > sets.capacity[l] + 1e-12) {
          return -kInf;
        }
      }
    }
    return bound;
  };

  std::vector<int> idx(std::max(0, n - 1), 0);
  while (true) {
    for (int i = 0; i + 1 < n; ++i) x[i] = idx[i] * grid_step;
    const double bound = last_bound();
    if (bound >= 0.0) {
      x[last] = bound;
      const double obj = objective_value(sets, x);
      if (obj > best_obj) {
        best_obj = obj;
        best_x = x;
        found = true;
      }
    }
    int d = 0;
    for (; d + 1 < n; ++d) {
      if (++idx[d] <= steps[d]) break;
      idx[d] = 0;
    }
    if (d + 1 >= n) break;
  }
  if (!found) throw Error(ErrorKind::Solver, "grid search found no feasible point");

  CentralSolution sol;
  sol.x = best_x;
  sol.objective = best_obj;
  sol.lambda.assign(sets.num_links, 0.0);
  if (sets.protocol == Protocol::Mmtp) {
    sol.b.assign(sets.num_links, {});
    for (int l = 0; l < sets.num_links; ++l) {
      for (int k : sets.groups_on_link[l]) {
        double m = 0.0;
        for (int i : sets.group_members_on_link[l][k]) m = std::max(m, best_x[i]);
        sol.b[l].push_back(m);
      }
    }
    sol.mu.assign(sets.num_agents, {});
    for (int i = 0; i < sets.num_agents; ++i)
      sol.mu[i].assign(sets.links_of_agent[i].size(), 0.0);
  }
  return sol;
}

}  // namespace dmd

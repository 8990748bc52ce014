#include "dmd/equilibrium.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include "dmd/error.hpp"
#include "json.hpp"

namespace dmd {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kCertifiedTol = 1e-6;
constexpr double kTinyPositive = 1e-12;

int index_of(const std::vector<int>& sorted, int v) {
  auto it = std::lower_bound(sorted.begin(), sorted.end(), v);
  if (it == sorted.end() || *it != v) return -1;
  return static_cast<int>(it - sorted.begin());
}

void require_certified(const CentralSolution& sol, double scale) {
  if (!(scale > 0.0)) throw Error(ErrorKind::Config, "demand scale must be positive");
  if (!(sol.kkt_residual <= kCertifiedTol)) {
    throw Error(ErrorKind::Solver,
                "central solution is not certified (KKT residual " +
                    std::to_string(sol.kkt_residual) + " > 1e-6); refusing to build a profile");
  }
}

// n_{i,j}^l at consensus: sum of per-link claims of every agent routed via j.
void fill_summaries(const NeighborDirectory& dir, const IndexSets& sets,
                    const std::vector<double>& claim_of_agent_on_link,  // [i*L + l]
                    std::vector<std::vector<std::vector<double>>>& n) {
  const int L = sets.num_links;
  for (int i = 0; i < sets.num_agents; ++i) {
    for (auto& row : n[i]) std::fill(row.begin(), row.end(), 0.0);
    for (int h = 0; h < sets.num_agents; ++h) {
      if (h == i) continue;
      const int jp = dir.neighbor_pos(i, dir.next_hop[i][h]);
      for (int l : sets.links_of_agent[h]) n[i][jp][l] += claim_of_agent_on_link[h * L + l];
    }
  }
}
}  // namespace

bool NeCertificate::all_pass() const {
  for (const auto& a : audits)
    if (!a.pass) return false;
  return true;
}

UtpProfile construct_ne(const UtpMechanism& mech, const CentralSolution& sol, double scale) {
  require_certified(sol, scale);
  const auto& sets = mech.sets();
  const auto& dir = mech.directory();
  UtpProfile m = mech.zero_profile();
  for (int i = 0; i < sets.num_agents; ++i) m.y[i] = scale * sol.x[i];
  std::vector<double> claims(sets.num_agents * sets.num_links, 0.0);
  for (int i = 0; i < sets.num_agents; ++i)
    for (int l : sets.links_of_agent[i]) claims[i * sets.num_links + l] = m.y[i];
  fill_summaries(dir, sets, claims, m.n);
  for (int i = 0; i < sets.num_agents; ++i) {
    for (size_t jp = 0; jp < dir.quoted_by[i].size(); ++jp)
      m.q[i][jp] = m.y[dir.quoted_by[i][jp]];
    const auto& pl = mech.price_links(i);
    for (size_t lp = 0; lp < pl.size(); ++lp) m.p[i][lp] = std::max(0.0, sol.lambda[pl[lp]]);
  }
  return m;
}

MmtpProfile construct_ne(const MmtpMechanism& mech, const CentralSolution& sol, double scale) {
  require_certified(sol, scale);
  const auto& sets = mech.sets();
  const auto& dir = mech.directory();
  const auto& leaders = mech.leaders();
  MmtpProfile m = mech.zero_profile();

  // Snap members attaining their group maximum to the exact common value so
  // that the attainment indicator is stable under the mechanism's tolerance.
  m.y.assign(sets.num_agents, 0.0);
  for (int i = 0; i < sets.num_agents; ++i) m.y[i] = scale * sol.x[i];
  for (int l = 0; l < sets.num_links; ++l) {
    for (const auto& members : sets.group_members_on_link[l]) {
      double gmax = 0.0;
      for (int j : members) gmax = std::max(gmax, scale * sol.x[j]);
      for (int j : members) {
        if (scale * sol.x[j] >= gmax - 1e-7 * std::max(1.0, gmax)) m.y[j] = gmax;
      }
    }
  }

  // group statistics and per-agent group-demand shares
  std::vector<double> claims(sets.num_agents * sets.num_links, 0.0);
  for (int l = 0; l < sets.num_links; ++l) {
    for (size_t kp = 0; kp < sets.groups_on_link[l].size(); ++kp) {
      const auto& members = sets.group_members_on_link[l][sets.groups_on_link[l][kp]];
      double gmax = 0.0;
      for (int j : members) gmax = std::max(gmax, m.y[j]);
      int count = 0;
      for (int j : members)
        if (m.y[j] == gmax) ++count;
      for (int j : members) {
        const int lp = index_of(sets.links_of_agent[j], l);
        m.s[j][lp] = (m.y[j] == gmax && count > 0) ? gmax / count : 0.0;
        claims[j * sets.num_links + l] = m.s[j][lp];
      }
      const int c = leaders.leader[l][sets.groups_on_link[l][kp]];
      if (c >= 0) {
        const int cl = index_of(leaders.leader_links[c], l);
        m.z1[c][cl] = gmax;
        m.z2[c][cl] = static_cast<double>(count);
      }
    }
  }
  fill_summaries(dir, sets, claims, m.n);

  for (int i = 0; i < sets.num_agents; ++i) {
    for (size_t jp = 0; jp < dir.quoted_by[i].size(); ++jp)
      m.q[i][jp] = m.y[dir.quoted_by[i][jp]];
    const auto& li = sets.links_of_agent[i];
    for (size_t lp = 0; lp < li.size(); ++lp) {
      m.p1[i][lp] = std::max(0.0, sol.mu[i][lp]);
      m.a1[i][lp] = 1.0;
    }
    const auto& wl = mech.w_links(i);
    for (size_t lp = 0; lp < wl.size(); ++lp) m.w[i][lp] = std::max(0.0, sol.lambda[wl[lp]]);
  }
  for (int i = 0; i < sets.num_agents; ++i) {
    int off = 0;
    for (int j : dir.quoted_by[i]) {
      const auto& lj = sets.links_of_agent[j];
      for (size_t lp = 0; lp < lj.size(); ++lp) {
        m.p2[i][off + lp] = m.p1[j][lp];
        m.a2[i][off + lp] = m.a1[j][lp];
      }
      off += static_cast<int>(lj.size());
    }
  }
  return m;
}

template <class Mech>
std::vector<double> stationarity_residuals(const Mech& mech, const typename Mech::Profile& m) {
  const int n = mech.sets().num_agents;
  std::vector<double> res(n, 0.0);
  typename Mech::Profile work = m;
  for (int i = 0; i < n; ++i) {
    const double u0 = mech.utility(work, i);
    if (std::isinf(u0)) {
      res[i] = kInf;
      continue;
    }
    const int d = mech.dim(i);
    double worst = 0.0;
    for (int k = 0; k < d; ++k) {
      const double v = mech.coord(work, i, k);
      double g;
      if (v < kTinyPositive) {
        const double h = 1e-6;
        mech.set_coord(work, i, k, v + h);
        const double up = mech.utility(work, i);
        mech.set_coord(work, i, k, v);
        g = std::max(0.0, (up - u0) / h);  // only an improving push off the boundary counts
      } else {
        // fourth-order central difference with a relative step: tax terms are
        // quadratic (exact at any step), while the valuation's curvature along
        // y blows up near zero rates and needs h proportional to the point
        const double h = std::min(std::max(0.005 * v, 1e-8), 0.5 * v);
        double u_fwd2, u_fwd1, u_bwd1, u_bwd2;
        mech.set_coord(work, i, k, v + 2.0 * h);
        u_fwd2 = mech.utility(work, i);
        mech.set_coord(work, i, k, v + h);
        u_fwd1 = mech.utility(work, i);
        mech.set_coord(work, i, k, v - h);
        u_bwd1 = mech.utility(work, i);
        mech.set_coord(work, i, k, v - 2.0 * h);
        u_bwd2 = mech.utility(work, i);
        mech.set_coord(work, i, k, v);
        g = std::abs((-u_fwd2 + 8.0 * u_fwd1 - 8.0 * u_bwd1 + u_bwd2) / (12.0 * h));
      }
      worst = std::max(worst, g);
    }
    res[i] = worst;
  }
  return res;
}

UtpProfile best_response(const UtpMechanism& mech, const UtpProfile& m, int i) {
  const auto& sets = mech.sets();
  const auto& dir = mech.directory();
  UtpProfile out = m;

  AgentOutcome base = mech.evaluate(m, i);

  for (int l = 0; l < sets.num_links; ++l) {
    for (size_t jp = 0; jp < dir.neighbors[i].size(); ++jp) {
      const int j = dir.neighbors[i][jp];
      double target = sets.agent_uses_link(j, l) ? m.y[j] : 0.0;
      for (size_t hp = 0; hp < dir.neighbors[j].size(); ++hp) {
        if (dir.neighbors[j][hp] == i) continue;
        target += m.n[j][hp][l];
      }
      out.n[i][jp][l] = target;
    }
  }
  for (size_t jp = 0; jp < dir.quoted_by[i].size(); ++jp)
    out.q[i][jp] = m.y[dir.quoted_by[i][jp]];

  const auto& pl = mech.price_links(i);
  double p_eff = 0.0;
  for (size_t lp = 0; lp < pl.size(); ++lp) {
    const int l = pl[lp];
    const auto& quoting = mech.price_neighbors(i, l);
    double pbar = 0.0;
    for (int j : quoting) pbar += m.p[j][index_of(mech.price_links(j), l)];
    pbar /= static_cast<double>(quoting.size());
    const double rf = base.f[l] > 0.0 ? base.r * base.f[l] : 0.0;
    const double slack = sets.capacity[l] - rf;
    out.p[i][lp] = std::max(0.0, pbar * (1.0 - slack * slack / 2.0));
    if (sets.agent_uses_link(i, l)) p_eff += pbar;
  }

  if (std::isinf(base.r)) {
    out.y[i] = 0.0;
  } else {
    if (!(p_eff > 0.0)) {
      throw Error(ErrorKind::Unbounded,
                  "agent " + sets.agent_ids[i] +
                      " faces a zero effective price; the demand best response is unbounded");
    }
    out.y[i] = std::max(0.0, sets.valuation[i].grad_inverse(p_eff)) / base.r;
  }

  // closed forms can only be off on degenerate corners; never move downhill
  const double u_old = mech.utility(m, i);
  const double u_new = mech.utility(out, i);
  if (std::isfinite(u_old) && u_new < u_old - kTinyPositive) return m;
  return out;
}

MmtpProfile best_response(const MmtpMechanism& mech, const MmtpProfile& m, int i) {
  const auto& sets = mech.sets();
  const auto& dir = mech.directory();
  const auto& leaders = mech.leaders();
  MmtpProfile out = m;

  const auto& li = sets.links_of_agent[i];
  std::vector<GroupStats> gs(li.size());
  for (size_t lp = 0; lp < li.size(); ++lp) gs[lp] = mech.group_stats(m, i, li[lp]);
  AgentOutcome base = mech.evaluate(m, i);

  for (int l = 0; l < sets.num_links; ++l) {
    for (size_t jp = 0; jp < dir.neighbors[i].size(); ++jp) {
      const int j = dir.neighbors[i][jp];
      double target =
          sets.agent_uses_link(j, l) ? m.s[j][index_of(sets.links_of_agent[j], l)] : 0.0;
      for (size_t hp = 0; hp < dir.neighbors[j].size(); ++hp) {
        if (dir.neighbors[j][hp] == i) continue;
        target += m.n[j][hp][l];
      }
      out.n[i][jp][l] = target;
    }
  }
  int off = 0;
  for (size_t jp = 0; jp < dir.quoted_by[i].size(); ++jp) {
    const int j = dir.quoted_by[i][jp];
    out.q[i][jp] = m.y[j];
    const auto& lj = sets.links_of_agent[j];
    for (size_t lp = 0; lp < lj.size(); ++lp) {
      out.p2[i][off + lp] = m.p1[j][lp];
      out.a2[i][off + lp] = m.a1[j][lp];
    }
    off += static_cast<int>(lj.size());
  }

  const int phi = dir.phi[i];
  const int posq = dir.pos_in_quoter[i];
  const double own_q = m.q[phi][posq];
  int phi_off = 0;
  for (int jj : dir.quoted_by[phi]) {
    if (jj == i) break;
    phi_off += static_cast<int>(sets.links_of_agent[jj].size());
  }

  double p_eff = 0.0;
  for (size_t lp = 0; lp < li.size(); ++lp) {
    const int l = li[lp];
    const int k = sets.group_of_agent[i];
    const int c = leaders.leader[l][k];
    const double p2phi = m.p2[phi][phi_off + static_cast<int>(lp)];
    const double a2phi = m.a2[phi][phi_off + static_cast<int>(lp)];
    p_eff += p2phi;

    // group-demand share: match the allocation's own term
    const double num = gs[lp].own_attains ? own_q : 0.0;
    out.s[i][lp] = (num > 0.0 && gs[lp].zbar2 > 0.0) ? num / gs[lp].zbar2 : 0.0;

    const auto& quoting = mech.w_neighbors(i, l);
    double wbar = 0.0;
    for (int j : quoting) wbar += m.w[j][index_of(mech.w_links(j), l)];
    wbar /= static_cast<double>(quoting.size());
    const double rf = base.f[l] > 0.0 ? base.r * base.f[l] : 0.0;
    const double slack = sets.capacity[l] - rf;
    const double K = slack * slack;

    const auto& members = sets.group_members_on_link[l][k];
    double C;  // what = C + p1 + a1 in both leader branches
    if (c == i) {
      double sum_others = 0.0;
      for (int j : members)
        if (j != i) sum_others += m.p1[j][index_of(sets.links_of_agent[j], l)];
      C = sum_others - a2phi;
      const int cl = index_of(leaders.leader_links[i], l);
      out.z1[i][cl] = gs[lp].zbar1;
      out.z2[i][cl] = gs[lp].zbar2;
      out.w[i][index_of(mech.w_links(i), l)] = p2phi + sum_others;
    } else {
      const double w_leader = m.w[c][index_of(mech.w_links(c), l)];
      C = w_leader - p2phi - a2phi;
      out.w[i][index_of(mech.w_links(i), l)] = w_leader;
    }

    const double t_star = wbar - wbar * K / 2.0 - C;
    const double dz = gs[lp].zbar1 - own_q;
    const double fr_coef = p2phi * dz * dz;
    if (fr_coef > 0.0) {
      out.p1[i][lp] = 0.0;
      out.a1[i][lp] = std::max(t_star, kTinyPositive);
    } else {
      double a1 = std::max(m.a1[i][lp], kTinyPositive);
      double p1 = t_star - a1;
      if (p1 < 0.0) {
        p1 = 0.0;
        a1 = std::max(t_star, kTinyPositive);
      }
      out.p1[i][lp] = p1;
      out.a1[i][lp] = a1;
    }
  }

  if (mech.extended()) {
    for (int l : mech.w_links(i)) {
      if (sets.agent_uses_link(i, l)) continue;
      const auto& quoting = mech.w_neighbors(i, l);
      double wbar = 0.0;
      for (int j : quoting) wbar += m.w[j][index_of(mech.w_links(j), l)];
      wbar /= static_cast<double>(quoting.size());
      const double rf = base.f[l] > 0.0 ? base.r * base.f[l] : 0.0;
      const double slack = sets.capacity[l] - rf;
      out.w[i][index_of(mech.w_links(i), l)] =
          std::max(0.0, wbar * (1.0 - slack * slack / 2.0));
    }
  }

  if (std::isinf(base.r)) {
    out.y[i] = 0.0;
  } else {
    if (!(p_eff > 0.0)) {
      throw Error(ErrorKind::Unbounded,
                  "agent " + sets.agent_ids[i] +
                      " faces a zero effective price; the demand best response is unbounded");
    }
    out.y[i] = std::max(0.0, sets.valuation[i].grad_inverse(p_eff)) / base.r;
  }

  const double u_old = mech.utility(m, i);
  const double u_new = mech.utility(out, i);
  if (std::isfinite(u_old) && u_new < u_old - kTinyPositive) return m;
  return out;
}

template <class Mech>
DynamicsTrace<Mech> run_dynamics(const Mech& mech, const typename Mech::Profile& start,
                                 int max_rounds, UpdateOrder order, unsigned long long seed,
                                 const CentralSolution* reference) {
  const int n = mech.sets().num_agents;
  DynamicsTrace<Mech> trace;
  trace.final_profile = start;
  std::mt19937_64 rng(seed);
  std::vector<int> agents(n);
  for (int i = 0; i < n; ++i) agents[i] = i;

  for (int round = 0; round < max_rounds; ++round) {
    if (order == UpdateOrder::Random) std::shuffle(agents.begin(), agents.end(), rng);
    double round_change = 0.0;
    for (int i : agents) {
      DynamicsStep step;
      step.round = round;
      step.agent = i;
      step.utility_before = mech.utility(trace.final_profile, i);
      // off-equilibrium profiles can price an agent at zero, leaving the
      // demand update without a maximizer; such agents sit the step out
      typename Mech::Profile next = trace.final_profile;
      try {
        next = best_response(mech, trace.final_profile, i);
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::Unbounded && e.kind() != ErrorKind::Domain) throw;
      }
      double change = 0.0;
      for (int k = 0; k < mech.dim(i); ++k) {
        change = std::max(change, std::abs(mech.coord(next, i, k) -
                                           mech.coord(trace.final_profile, i, k)));
      }
      trace.final_profile = std::move(next);
      step.utility_after = mech.utility(trace.final_profile, i);
      step.change = change;
      Outcome eval = mech.evaluate_all(trace.final_profile);
      step.load = std::move(eval.load);
      if (reference) {
        step.gap = 0.0;
        for (size_t a = 0; a < eval.agents.size(); ++a)
          step.gap = std::max(step.gap, std::abs(eval.agents[a].xhat - reference->x[a]));
      }
      trace.steps.push_back(std::move(step));
      round_change = std::max(round_change, change);
    }
    trace.rounds_run = round + 1;
    if (round_change < 1e-10) {
      trace.converged = true;
      break;
    }
  }
  return trace;
}

template <class Mech>
std::string dynamics_csv(const Mech& mech, const DynamicsTrace<Mech>& trace) {
  std::ostringstream os;
  os.precision(17);
  os << "round,agent,utility_before,utility_after,change,gap";
  for (const auto& id : mech.sets().link_ids) os << ",load_" << id;
  os << "\n";
  for (const auto& s : trace.steps) {
    os << s.round << "," << mech.sets().agent_ids[s.agent] << "," << s.utility_before << ","
       << s.utility_after << "," << s.change << "," << s.gap;
    for (double v : s.load) os << "," << v;
    os << "\n";
  }
  return os.str();
}

namespace {

struct CommonAuditInput {
  std::vector<double> xhat;
  std::vector<double> load;
  std::vector<double> tax;
};

void append_scalar_audits(std::vector<Audit>& audits, const IndexSets& sets,
                          const CommonAuditInput& in, const CentralSolution& sol,
                          const std::vector<double>& effective_price, double tol) {
  double infeas = 0.0;
  for (int l = 0; l < sets.num_links; ++l)
    infeas = std::max(infeas, in.load[l] - sets.capacity[l]);
  audits.push_back({"primal-feasibility", std::max(0.0, infeas), infeas <= 1e-9, false});

  double stat = 0.0;
  for (int i = 0; i < sets.num_agents; ++i) {
    if (in.xhat[i] > 0.0) {
      stat = std::max(stat, std::abs(sets.valuation[i].grad(in.xhat[i]) - effective_price[i]));
    } else if (!sets.valuation[i].domain_is_open_at_zero()) {
      const double g0 = sets.valuation[i].family == ValuationFamily::Power
                            ? kInf
                            : sets.valuation[i].grad(0.0);
      stat = std::max(stat, std::max(0.0, g0 - effective_price[i]));
    } else {
      stat = kInf;  // a zero rate is outside the valuation's domain
    }
  }
  audits.push_back({"stationarity", stat, stat <= tol, false});

  double total_tax = 0.0, identity = 0.0;
  for (int i = 0; i < sets.num_agents; ++i) {
    total_tax += in.tax[i];
    identity += in.xhat[i] * effective_price[i];
  }
  const double wbb = std::max(0.0, -total_tax);
  audits.push_back({"weak-budget-balance", wbb, wbb <= 1e-9, false});
  const double id_res = std::abs(total_tax - identity);
  audits.push_back({"budget-identity", id_res, id_res <= tol, false});

  bool all_openlog = true;
  double ir_violation = 0.0;
  for (int i = 0; i < sets.num_agents; ++i) {
    if (sets.valuation[i].value_at_zero_is_neg_inf()) continue;
    all_openlog = false;
    const double margin =
        sets.valuation[i].value(in.xhat[i]) - in.tax[i] - sets.valuation[i].value_at_zero();
    ir_violation = std::max(ir_violation, -margin);
  }
  audits.push_back({"individual-rationality", ir_violation, all_openlog || ir_violation <= tol,
                    all_openlog});
  (void)sol;
}

double allocation_gap(const std::vector<double>& xhat, const CentralSolution& sol) {
  double gap = 0.0;
  for (size_t i = 0; i < xhat.size(); ++i) gap = std::max(gap, std::abs(xhat[i] - sol.x[i]));
  return gap;
}

}  // namespace

NeCertificate audit_ne(const UtpMechanism& mech, const UtpProfile& m, const CentralSolution& sol,
                       double tol) {
  const auto& sets = mech.sets();
  const auto& dir = mech.directory();
  NeCertificate cert;
  cert.agent_residual = stationarity_residuals(mech, m);
  cert.max_residual = 0.0;
  for (double r : cert.agent_residual) cert.max_residual = std::max(cert.max_residual, r);
  cert.audits.push_back(
      {"best-response-stationarity", cert.max_residual, cert.max_residual <= tol, false});

  Outcome out = mech.evaluate_all(m);
  CommonAuditInput in;
  in.load = out.load;
  for (const auto& a : out.agents) {
    in.xhat.push_back(a.xhat);
    in.tax.push_back(a.tax);
  }

  double summary = 0.0, proxy = 0.0;
  for (int i = 0; i < sets.num_agents; ++i) {
    for (int l = 0; l < sets.num_links; ++l) {
      for (size_t jp = 0; jp < dir.neighbors[i].size(); ++jp) {
        const int j = dir.neighbors[i][jp];
        double target = sets.agent_uses_link(j, l) ? m.y[j] : 0.0;
        for (size_t hp = 0; hp < dir.neighbors[j].size(); ++hp) {
          if (dir.neighbors[j][hp] == i) continue;
          target += m.n[j][hp][l];
        }
        summary = std::max(summary, std::abs(m.n[i][jp][l] - target));
      }
    }
    for (size_t jp = 0; jp < dir.quoted_by[i].size(); ++jp)
      proxy = std::max(proxy, std::abs(m.q[i][jp] - m.y[dir.quoted_by[i][jp]]));
  }
  cert.audits.push_back({"summary-consensus", summary, summary <= tol, false});
  cert.audits.push_back({"proxy-consensus", proxy, proxy <= tol, false});

  std::vector<double> mean_price(sets.num_links, 0.0);
  std::vector<int> quote_count(sets.num_links, 0);
  double spread = 0.0;
  for (int l = 0; l < sets.num_links; ++l) {
    double lo = kInf, hi = -kInf;
    for (int i = 0; i < sets.num_agents; ++i) {
      const int lp = index_of(mech.price_links(i), l);
      if (lp < 0) continue;
      lo = std::min(lo, m.p[i][lp]);
      hi = std::max(hi, m.p[i][lp]);
      mean_price[l] += m.p[i][lp];
      ++quote_count[l];
    }
    if (quote_count[l] > 0) {
      mean_price[l] /= quote_count[l];
      spread = std::max(spread, hi - lo);
    }
  }
  cert.audits.push_back({"price-consensus", spread, spread <= tol, false});

  double comp = 0.0;
  for (int l = 0; l < sets.num_links; ++l)
    comp = std::max(comp, std::abs(mean_price[l] * (sets.capacity[l] - in.load[l])));
  cert.audits.push_back({"complementary-slackness", comp, comp <= tol, false});

  std::vector<double> effective_price(sets.num_agents, 0.0);
  for (int i = 0; i < sets.num_agents; ++i)
    for (int l : sets.links_of_agent[i]) effective_price[i] += mean_price[l];
  append_scalar_audits(cert.audits, sets, in, sol, effective_price, tol);

  cert.efficiency_gap = allocation_gap(in.xhat, sol);
  return cert;
}

NeCertificate audit_ne(const MmtpMechanism& mech, const MmtpProfile& m,
                       const CentralSolution& sol, double tol) {
  const auto& sets = mech.sets();
  const auto& dir = mech.directory();
  const auto& leaders = mech.leaders();
  NeCertificate cert;
  cert.agent_residual = stationarity_residuals(mech, m);
  cert.max_residual = 0.0;
  for (double r : cert.agent_residual) cert.max_residual = std::max(cert.max_residual, r);
  cert.audits.push_back(
      {"best-response-stationarity", cert.max_residual, cert.max_residual <= tol, false});

  Outcome out = mech.evaluate_all(m);
  CommonAuditInput in;
  in.load = out.load;
  for (const auto& a : out.agents) {
    in.xhat.push_back(a.xhat);
    in.tax.push_back(a.tax);
  }

  double summary = 0.0, proxy = 0.0, group_demand = 0.0, z_res = 0.0, fr_slack = 0.0;
  for (int i = 0; i < sets.num_agents; ++i) {
    for (int l = 0; l < sets.num_links; ++l) {
      for (size_t jp = 0; jp < dir.neighbors[i].size(); ++jp) {
        const int j = dir.neighbors[i][jp];
        double target =
            sets.agent_uses_link(j, l) ? m.s[j][index_of(sets.links_of_agent[j], l)] : 0.0;
        for (size_t hp = 0; hp < dir.neighbors[j].size(); ++hp) {
          if (dir.neighbors[j][hp] == i) continue;
          target += m.n[j][hp][l];
        }
        summary = std::max(summary, std::abs(m.n[i][jp][l] - target));
      }
    }
    int off = 0;
    for (size_t jp = 0; jp < dir.quoted_by[i].size(); ++jp) {
      const int j = dir.quoted_by[i][jp];
      proxy = std::max(proxy, std::abs(m.q[i][jp] - m.y[j]));
      const auto& lj = sets.links_of_agent[j];
      for (size_t lp = 0; lp < lj.size(); ++lp) {
        proxy = std::max(proxy, std::abs(m.p2[i][off + lp] - m.p1[j][lp]));
        proxy = std::max(proxy, std::abs(m.a2[i][off + lp] - m.a1[j][lp]));
      }
      off += static_cast<int>(lj.size());
    }
    const auto& li = sets.links_of_agent[i];
    for (size_t lp = 0; lp < li.size(); ++lp) {
      const GroupStats gs = mech.group_stats(m, i, li[lp]);
      const double num = gs.own_attains ? m.q[dir.phi[i]][dir.pos_in_quoter[i]] : 0.0;
      const double own = (num > 0.0 && gs.zbar2 > 0.0) ? num / gs.zbar2 : 0.0;
      group_demand = std::max(group_demand, std::abs(m.s[i][lp] - own));
      fr_slack = std::max(fr_slack, std::abs(m.p1[i][lp] * (m.y[i] - gs.zbar1)));
      const int k = sets.group_of_agent[i];
      const int c = leaders.leader[li[lp]][k];
      if (c == i) {
        const int cl = index_of(leaders.leader_links[i], li[lp]);
        z_res = std::max(z_res, std::abs(m.z1[i][cl] - gs.zbar1));
        z_res = std::max(z_res, std::abs(m.z2[i][cl] - gs.zbar2));
      }
    }
  }
  cert.audits.push_back({"summary-consensus", summary, summary <= tol, false});
  cert.audits.push_back({"proxy-consensus", proxy, proxy <= tol, false});
  cert.audits.push_back({"group-demand-consensus", group_demand, group_demand <= tol, false});
  cert.audits.push_back({"group-max-consensus", z_res, z_res <= tol, false});
  cert.audits.push_back({"free-ride-slackness", fr_slack, fr_slack <= tol, false});

  std::vector<double> mean_w(sets.num_links, 0.0);
  std::vector<int> quote_count(sets.num_links, 0);
  double spread = 0.0;
  for (int l = 0; l < sets.num_links; ++l) {
    double lo = kInf, hi = -kInf;
    for (int i = 0; i < sets.num_agents; ++i) {
      const int lp = index_of(mech.w_links(i), l);
      if (lp < 0) continue;
      lo = std::min(lo, m.w[i][lp]);
      hi = std::max(hi, m.w[i][lp]);
      mean_w[l] += m.w[i][lp];
      ++quote_count[l];
    }
    if (quote_count[l] > 0) {
      mean_w[l] /= quote_count[l];
      spread = std::max(spread, hi - lo);
    }
  }
  cert.audits.push_back({"group-price-consensus", spread, spread <= tol, false});

  double lambda_dec = 0.0;
  for (int l = 0; l < sets.num_links; ++l) {
    for (int k : sets.groups_on_link[l]) {
      double sum_p1 = 0.0;
      for (int j : sets.group_members_on_link[l][k])
        sum_p1 += m.p1[j][index_of(sets.links_of_agent[j], l)];
      lambda_dec = std::max(lambda_dec, std::abs(mean_w[l] - sum_p1));
    }
  }
  cert.audits.push_back({"price-decomposition", lambda_dec, lambda_dec <= tol, false});

  double comp = 0.0;
  for (int l = 0; l < sets.num_links; ++l)
    comp = std::max(comp, std::abs(mean_w[l] * (sets.capacity[l] - in.load[l])));
  cert.audits.push_back({"complementary-slackness", comp, comp <= tol, false});

  std::vector<double> effective_price(sets.num_agents, 0.0);
  for (int i = 0; i < sets.num_agents; ++i) {
    const auto& li = sets.links_of_agent[i];
    for (size_t lp = 0; lp < li.size(); ++lp) effective_price[i] += m.p1[i][lp];
  }
  append_scalar_audits(cert.audits, sets, in, sol, effective_price, tol);

  cert.efficiency_gap = allocation_gap(in.xhat, sol);
  return cert;
}

template <class Mech>
FuzzReport deviation_fuzz(const Mech& mech, const typename Mech::Profile& m, int trials,
                          double radius, unsigned long long seed) {
  const int n = mech.sets().num_agents;
  FuzzReport report;
  report.trials = trials;
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> pick_agent(0, n - 1);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_real_distribution<double> delta(-radius, radius);

  std::vector<double> base_utility(n);
  for (int i = 0; i < n; ++i) base_utility[i] = mech.utility(m, i);

  typename Mech::Profile work = m;
  report.max_gain = -kInf;
  for (int t = 0; t < trials; ++t) {
    const int i = pick_agent(rng);
    const int d = mech.dim(i);
    const double p_touch = std::min(1.0, 4.0 / d);
    std::vector<std::pair<int, double>> touched;
    for (int k = 0; k < d; ++k) {
      if (unit(rng) > p_touch) continue;
      const double v = mech.coord(work, i, k);
      double nv = v + delta(rng) * std::max(1.0, std::abs(v));
      nv = std::max(nv, mech.coord_strictly_positive(i, k) ? 1e-9 : 0.0);
      touched.push_back({k, v});
      mech.set_coord(work, i, k, nv);
    }
    if (touched.empty()) {
      const int k = std::uniform_int_distribution<int>(0, d - 1)(rng);
      const double v = mech.coord(work, i, k);
      double nv = v + delta(rng) * std::max(1.0, std::abs(v));
      nv = std::max(nv, mech.coord_strictly_positive(i, k) ? 1e-9 : 0.0);
      touched.push_back({k, v});
      mech.set_coord(work, i, k, nv);
    }
    double gain;
    bool valid = true;
    try {
      const double u = mech.utility(work, i);
      gain = u - base_utility[i];
      if (std::isnan(gain)) valid = false;
      if (std::isinf(base_utility[i]) && std::isinf(u)) valid = false;
    } catch (const Error&) {
      valid = false;
      gain = 0.0;
    }
    if (valid && gain > report.max_gain) {
      report.max_gain = gain;
      report.witness_agent = i;
      std::ostringstream os;
      os.precision(17);
      for (const auto& [k, old] : touched)
        os << mech.coord_name(i, k) << ": " << old << " -> " << mech.coord(work, i, k) << "; ";
      report.witness = os.str();
    }
    if (!valid) ++report.invalid;
    for (const auto& [k, old] : touched) mech.set_coord(work, i, k, old);
  }
  if (std::isinf(report.max_gain)) report.max_gain = 0.0;  // every trial invalid
  return report;
}

std::string certificate_to_json(const NeCertificate& cert) {
  nlohmann::json doc;
  doc["max_stationarity_residual"] = cert.max_residual;
  doc["agent_stationarity_residuals"] = cert.agent_residual;
  doc["efficiency_gap"] = cert.efficiency_gap;
  doc["all_pass"] = cert.all_pass();
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& a : cert.audits) {
    arr.push_back({{"name", a.name},
                   {"residual", a.residual},
                   {"pass", a.pass},
                   {"vacuous", a.vacuous}});
  }
  doc["audits"] = arr;
  return doc.dump(2);
}

template std::vector<double> stationarity_residuals<UtpMechanism>(const UtpMechanism&,
                                                                  const UtpProfile&);
template std::vector<double> stationarity_residuals<MmtpMechanism>(const MmtpMechanism&,
                                                                   const MmtpProfile&);
template DynamicsTrace<UtpMechanism> run_dynamics<UtpMechanism>(const UtpMechanism&,
                                                                const UtpProfile&, int,
                                                                UpdateOrder, unsigned long long,
                                                                const CentralSolution*);
template DynamicsTrace<MmtpMechanism> run_dynamics<MmtpMechanism>(const MmtpMechanism&,
                                                                  const MmtpProfile&, int,
                                                                  UpdateOrder,
                                                                  unsigned long long,
                                                                  const CentralSolution*);
template std::string dynamics_csv<UtpMechanism>(const UtpMechanism&,
                                                const DynamicsTrace<UtpMechanism>&);
template std::string dynamics_csv<MmtpMechanism>(const MmtpMechanism&,
                                                 const DynamicsTrace<MmtpMechanism>&);
template FuzzReport deviation_fuzz<UtpMechanism>(const UtpMechanism&, const UtpProfile&, int,
                                                 double, unsigned long long);
template FuzzReport deviation_fuzz<MmtpMechanism>(const MmtpMechanism&, const MmtpProfile&, int,
                                                  double, unsigned long long);

}  // namespace dmd

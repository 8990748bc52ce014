#include "dmd/mmtp.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

#include "dmd/error.hpp"
#include "json.hpp"

namespace dmd {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();

int index_of(const std::vector<int>& sorted, int v) {
  auto it = std::lower_bound(sorted.begin(), sorted.end(), v);
  if (it == sorted.end() || *it != v) return -1;
  return static_cast<int>(it - sorted.begin());
}

bool attains(double v, double zbar) {
  return std::abs(v - zbar) <= MmtpMechanism::kAttainTol * std::max(1.0, std::abs(zbar));
}
}  // namespace

MmtpMechanism::MmtpMechanism(const IndexSets& sets, const NeighborDirectory& dir,
                             const LeaderAssignment& leaders, const LinkCover* cover)
    : sets_(&sets), dir_(&dir), leaders_(&leaders), cover_(cover) {
  const int n = sets.num_agents;
  w_links_.resize(n);
  p2_offset_.resize(n);
  for (int i = 0; i < n; ++i) {
    w_links_[i] = sets.links_of_agent[i];
    if (cover_) {
      for (int l : cover_->extra_links[i]) w_links_[i].push_back(l);
      std::sort(w_links_[i].begin(), w_links_[i].end());
    }
    int off = 0;
    p2_offset_[i].reserve(dir.quoted_by[i].size());
    for (int j : dir.quoted_by[i]) {
      p2_offset_[i].push_back(off);
      off += static_cast<int>(sets.links_of_agent[j].size());
    }
  }
  w_neighbors_.assign(n, std::vector<std::vector<int>>(sets.num_links));
  for (int i = 0; i < n; ++i) {
    for (int l : w_links_[i]) {
      for (int j : dir.neighbors[i]) {
        const bool quotes = cover_ ? cover_->in_cover[l][j] != 0 : sets.agent_uses_link(j, l);
        if (quotes) w_neighbors_[i][l].push_back(j);
      }
    }
  }
}

MmtpProfile MmtpMechanism::zero_profile() const {
  const int n = sets_->num_agents;
  MmtpProfile m;
  m.y.assign(n, 0.0);
  m.n.resize(n);
  m.q.resize(n);
  m.p1.resize(n);
  m.p2.resize(n);
  m.s.resize(n);
  m.w.resize(n);
  m.z1.resize(n);
  m.z2.resize(n);
  m.a1.resize(n);
  m.a2.resize(n);
  for (int i = 0; i < n; ++i) {
    m.n[i].assign(dir_->degree(i), std::vector<double>(sets_->num_links, 0.0));
    m.q[i].assign(dir_->quoted_by[i].size(), 0.0);
    const size_t li = sets_->links_of_agent[i].size();
    size_t p2n = 0;
    for (int j : dir_->quoted_by[i]) p2n += sets_->links_of_agent[j].size();
    m.p1[i].assign(li, 0.0);
    m.p2[i].assign(p2n, 0.0);
    m.s[i].assign(li, 0.0);
    m.w[i].assign(w_links_[i].size(), 0.0);
    m.z1[i].assign(leaders_->leader_links[i].size(), 0.0);
    m.z2[i].assign(leaders_->leader_links[i].size(), 0.0);
    m.a1[i].assign(li, 1.0);
    m.a2[i].assign(p2n, 1.0);
  }
  return m;
}

// Per-agent coordinate blocks, in storage order.
static std::array<int, 11> block_sizes(const IndexSets& sets, const NeighborDirectory& dir,
                                       const std::vector<std::vector<int>>& w_links,
                                       const LeaderAssignment& leaders, int i) {
  const int li = static_cast<int>(sets.links_of_agent[i].size());
  int p2n = 0;
  for (int j : dir.quoted_by[i]) p2n += static_cast<int>(sets.links_of_agent[j].size());
  const int ci = static_cast<int>(leaders.leader_links[i].size());
  return {1,
          dir.degree(i) * sets.num_links,
          static_cast<int>(dir.quoted_by[i].size()),
          li,
          p2n,
          li,
          static_cast<int>(w_links[i].size()),
          ci,
          ci,
          li,
          p2n};
}

int MmtpMechanism::dim(int i) const {
  const auto sz = block_sizes(*sets_, *dir_, w_links_, *leaders_, i);
  int t = 0;
  for (int s : sz) t += s;
  return t;
}

int MmtpMechanism::total_dim() const {
  int t = 0;
  for (int i = 0; i < sets_->num_agents; ++i) t += dim(i);
  return t;
}

std::vector<int> MmtpMechanism::dimension_formula() const {
  // 1 + 4*L_i + N(i)*L + |I_i| + 2*sum_{j in I_i} L_j + 2*|C_i|,
  // plus one group-price slot per relay link in the extended variant
  std::vector<int> out(sets_->num_agents);
  for (int i = 0; i < sets_->num_agents; ++i) {
    const int li = static_cast<int>(sets_->links_of_agent[i].size());
    int sum_lj = 0;
    for (int j : dir_->quoted_by[i]) sum_lj += static_cast<int>(sets_->links_of_agent[j].size());
    const int extra = cover_ ? static_cast<int>(cover_->extra_links[i].size()) : 0;
    out[i] = 1 + 4 * li + dir_->degree(i) * sets_->num_links +
             static_cast<int>(dir_->quoted_by[i].size()) + 2 * sum_lj +
             2 * static_cast<int>(leaders_->leader_links[i].size()) + extra;
  }
  return out;
}

namespace {
struct Loc {
  int block;  // 0 y, 1 n, 2 q, 3 p1, 4 p2, 5 s, 6 w, 7 z1, 8 z2, 9 a1, 10 a2
  int idx;
};
}  // namespace

static Loc locate(const std::array<int, 11>& sz, int k) {
  for (int b = 0; b < 11; ++b) {
    if (k < sz[b]) return {b, k};
    k -= sz[b];
  }
  return {-1, -1};
}

double MmtpMechanism::coord(const MmtpProfile& m, int i, int k) const {
  const auto loc = locate(block_sizes(*sets_, *dir_, w_links_, *leaders_, i), k);
  switch (loc.block) {
    case 0: return m.y[i];
    case 1: return m.n[i][loc.idx / sets_->num_links][loc.idx % sets_->num_links];
    case 2: return m.q[i][loc.idx];
    case 3: return m.p1[i][loc.idx];
    case 4: return m.p2[i][loc.idx];
    case 5: return m.s[i][loc.idx];
    case 6: return m.w[i][loc.idx];
    case 7: return m.z1[i][loc.idx];
    case 8: return m.z2[i][loc.idx];
    case 9: return m.a1[i][loc.idx];
    default: return m.a2[i][loc.idx];
  }
}

void MmtpMechanism::set_coord(MmtpProfile& m, int i, int k, double v) const {
  const auto loc = locate(block_sizes(*sets_, *dir_, w_links_, *leaders_, i), k);
  switch (loc.block) {
    case 0: m.y[i] = v; break;
    case 1: m.n[i][loc.idx / sets_->num_links][loc.idx % sets_->num_links] = v; break;
    case 2: m.q[i][loc.idx] = v; break;
    case 3: m.p1[i][loc.idx] = v; break;
    case 4: m.p2[i][loc.idx] = v; break;
    case 5: m.s[i][loc.idx] = v; break;
    case 6: m.w[i][loc.idx] = v; break;
    case 7: m.z1[i][loc.idx] = v; break;
    case 8: m.z2[i][loc.idx] = v; break;
    case 9: m.a1[i][loc.idx] = v; break;
    default: m.a2[i][loc.idx] = v; break;
  }
}

int MmtpMechanism::coord_block(int i, int k) const {
  const auto loc = locate(block_sizes(*sets_, *dir_, w_links_, *leaders_, i), k);
  switch (loc.block) {
    case 0: return 0;
    case 1: return 1;
    case 2: return 2;
    case 3:
    case 4: return 3;
    case 5: return 4;
    case 6: return 5;
    case 7:
    case 8: return 6;
    default: return 7;
  }
}

bool MmtpMechanism::coord_strictly_positive(int i, int k) const {
  const auto loc = locate(block_sizes(*sets_, *dir_, w_links_, *leaders_, i), k);
  return loc.block >= 9;
}

std::string MmtpMechanism::coord_name(int i, int k) const {
  const auto loc = locate(block_sizes(*sets_, *dir_, w_links_, *leaders_, i), k);
  auto flat_name = [&](const char* tag, int idx) {
    for (size_t jp = 0; jp < dir_->quoted_by[i].size(); ++jp) {
      const int j = dir_->quoted_by[i][jp];
      const int lj = static_cast<int>(sets_->links_of_agent[j].size());
      if (idx < lj)
        return std::string(tag) + "[" + sets_->agent_ids[j] + "," +
               sets_->link_ids[sets_->links_of_agent[j][idx]] + "]";
      idx -= lj;
    }
    return std::string(tag) + "[?]";
  };
  switch (loc.block) {
    case 0: return "y";
    case 1: {
      const int j = dir_->neighbors[i][loc.idx / sets_->num_links];
      return "n[" + sets_->agent_ids[j] + "," + sets_->link_ids[loc.idx % sets_->num_links] + "]";
    }
    case 2: return "q[" + sets_->agent_ids[dir_->quoted_by[i][loc.idx]] + "]";
    case 3: return "p1[" + sets_->link_ids[sets_->links_of_agent[i][loc.idx]] + "]";
    case 4: return flat_name("p2", loc.idx);
    case 5: return "s[" + sets_->link_ids[sets_->links_of_agent[i][loc.idx]] + "]";
    case 6: return "w[" + sets_->link_ids[w_links_[i][loc.idx]] + "]";
    case 7: return "z1[" + sets_->link_ids[leaders_->leader_links[i][loc.idx]] + "]";
    case 8: return "z2[" + sets_->link_ids[leaders_->leader_links[i][loc.idx]] + "]";
    case 9: return "a1[" + sets_->link_ids[sets_->links_of_agent[i][loc.idx]] + "]";
    default: return flat_name("a2", loc.idx);
  }
}

GroupStats MmtpMechanism::group_stats(const MmtpProfile& m, int i, int l) const {
  const int k = sets_->group_of_agent[i];
  const int c = leaders_->leader[l][k];
  if (c < 0) {
    throw Error(ErrorKind::Config,
                "group " + sets_->group_ids[k] + " has no leader on link " + sets_->link_ids[l] +
                    " (no member is adjacent to every other member)");
  }
  const double own_q = m.q[dir_->phi[i]][dir_->pos_in_quoter[i]];
  GroupStats gs;
  if (c == i) {
    gs.zbar1 = own_q;
    for (int j : sets_->group_members_on_link[l][k]) {
      if (j != i) gs.zbar1 = std::max(gs.zbar1, m.y[j]);
    }
    gs.zbar2 = attains(own_q, gs.zbar1) ? 1.0 : 0.0;
    for (int j : sets_->group_members_on_link[l][k]) {
      if (j != i && attains(m.y[j], gs.zbar1)) gs.zbar2 += 1.0;
    }
  } else {
    const int cl = index_of(leaders_->leader_links[c], l);
    gs.zbar1 = m.z1[c][cl];
    gs.zbar2 = m.z2[c][cl];
  }
  gs.own_attains = attains(own_q, gs.zbar1);
  return gs;
}

double MmtpMechanism::own_term(const MmtpProfile& m, int i, const GroupStats& gs) const {
  const double own_q = m.q[dir_->phi[i]][dir_->pos_in_quoter[i]];
  const double num = gs.own_attains ? own_q : 0.0;
  if (num == 0.0) return 0.0;
  if (gs.zbar2 <= 0.0) {
    throw Error(ErrorKind::Domain,
                "quoted attainer count is zero on a link where agent " + sets_->agent_ids[i] +
                    "'s claim attains the quoted group maximum");
  }
  return num / gs.zbar2;
}

void MmtpMechanism::allocation(const MmtpProfile& m, int i, const std::vector<GroupStats>& gs,
                               AgentOutcome& out) const {
  const int L = sets_->num_links;
  out.f.assign(L, 0.0);
  for (int l = 0; l < L; ++l) {
    double f = 0.0;
    for (size_t jp = 0; jp < dir_->neighbors[i].size(); ++jp) {
      const int j = dir_->neighbors[i][jp];
      if (sets_->agent_uses_link(j, l)) f += m.s[j][index_of(sets_->links_of_agent[j], l)];
      for (size_t hp = 0; hp < dir_->neighbors[j].size(); ++hp) {
        if (dir_->neighbors[j][hp] == i) continue;
        f += m.n[j][hp][l];
      }
    }
    const int lp = index_of(sets_->links_of_agent[i], l);
    if (lp >= 0) f += own_term(m, i, gs[lp]);
    out.f[l] = f;
  }
  out.r = kInf;
  for (int l = 0; l < L; ++l) {
    if (out.f[l] > 0.0) out.r = std::min(out.r, sets_->capacity[l] / out.f[l]);
  }
  if (std::isinf(out.r)) {
    if (m.y[i] > 0.0) {
      throw Error(ErrorKind::Domain,
                  "unbounded radial factor for agent " + sets_->agent_ids[i] +
                      " (every link demand is zero while y > 0)");
    }
    out.xhat = 0.0;
  } else {
    out.xhat = out.r * m.y[i];
  }
}

AgentOutcome MmtpMechanism::evaluate(const MmtpProfile& m, int i) const {
  const auto& links_i = sets_->links_of_agent[i];
  std::vector<GroupStats> gs(links_i.size());
  for (size_t lp = 0; lp < links_i.size(); ++lp) gs[lp] = group_stats(m, i, links_i[lp]);

  AgentOutcome out;
  allocation(m, i, gs, out);

  const int phi = dir_->phi[i];
  const int posq = dir_->pos_in_quoter[i];
  const double own_q = m.q[phi][posq];

  double price_rate = 0.0, summary = 0.0, proxy = 0.0, group_demand = 0.0;
  double price_consensus = 0.0, comp_slack = 0.0, free_riding = 0.0, leader_consensus = 0.0;

  for (size_t jp = 0; jp < dir_->quoted_by[i].size(); ++jp) {
    const int j = dir_->quoted_by[i][jp];
    const double dq = m.q[i][jp] - m.y[j];
    proxy += dq * dq;
    const auto& lj = sets_->links_of_agent[j];
    for (size_t lp = 0; lp < lj.size(); ++lp) {
      const double dp = m.p2[i][p2_offset_[i][jp] + lp] - m.p1[j][lp];
      const double da = m.a2[i][p2_offset_[i][jp] + lp] - m.a1[j][lp];
      proxy += dp * dp + da * da;
    }
  }

  for (int l = 0; l < sets_->num_links; ++l) {
    for (size_t jp = 0; jp < dir_->neighbors[i].size(); ++jp) {
      const int j = dir_->neighbors[i][jp];
      double target = sets_->agent_uses_link(j, l)
                          ? m.s[j][index_of(sets_->links_of_agent[j], l)]
                          : 0.0;
      for (size_t hp = 0; hp < dir_->neighbors[j].size(); ++hp) {
        if (dir_->neighbors[j][hp] == i) continue;
        target += m.n[j][hp][l];
      }
      const double d = m.n[i][jp][l] - target;
      summary += d * d;
    }
  }

  auto wbar_for = [&](int l) {
    const auto& quoting = w_neighbors_[i][l];
    if (quoting.empty()) {
      throw Error(ErrorKind::Config,
                  "agent " + sets_->agent_ids[i] +
                      " has no neighbor quoting a group price for link " + sets_->link_ids[l] +
                      "; the link's users are not connected (use the extended mechanism)");
    }
    double wbar = 0.0;
    for (int j : quoting) wbar += m.w[j][index_of(w_links_[j], l)];
    return wbar / static_cast<double>(quoting.size());
  };

  for (size_t lp = 0; lp < links_i.size(); ++lp) {
    const int l = links_i[lp];
    const int k = sets_->group_of_agent[i];
    const int c = leaders_->leader[l][k];
    const double p2phi = m.p2[phi][p2_offset_[phi][posq] + static_cast<int>(lp)];
    const double a2phi = m.a2[phi][p2_offset_[phi][posq] + static_cast<int>(lp)];

    price_rate += p2phi * out.xhat;

    const double ds = m.s[i][lp] - own_term(m, i, gs[lp]);
    group_demand += ds * ds;

    const auto& members =
        sets_->group_members_on_link[l][k];
    double what;
    if (c == i) {
      double sum_p1 = 0.0;
      for (int j : members) sum_p1 += m.p1[j][index_of(sets_->links_of_agent[j], l)];
      what = sum_p1 + (m.a1[i][lp] - a2phi);
    } else {
      const double w_leader = m.w[c][index_of(w_links_[c], l)];
      what = w_leader - p2phi + m.p1[i][lp] + (m.a1[i][lp] - a2phi);
    }

    const double wbar = wbar_for(l);
    const double rf = out.f[l] > 0.0 ? out.r * out.f[l] : 0.0;
    const double slack = sets_->capacity[l] - rf;
    comp_slack += wbar * (what - wbar) * slack * slack;
    price_consensus += (what - wbar) * (what - wbar);

    const double dz = gs[lp].zbar1 - own_q;
    free_riding += p2phi * (m.p1[i][lp] - p2phi) * dz * dz;

    if (c == i) {
      const int cl = index_of(leaders_->leader_links[i], l);
      const double d1 = m.z1[i][cl] - gs[lp].zbar1;
      const double d2 = m.z2[i][cl] - gs[lp].zbar2;
      double sum_others = 0.0;
      for (int j : members) {
        if (j != i) sum_others += m.p1[j][index_of(sets_->links_of_agent[j], l)];
      }
      const double dw = m.w[i][index_of(w_links_[i], l)] - p2phi - sum_others;
      leader_consensus += d1 * d1 + d2 * d2 + dw * dw;
    } else {
      const double dw =
          m.w[i][index_of(w_links_[i], l)] - m.w[c][index_of(w_links_[c], l)];
      leader_consensus += dw * dw;
    }
  }

  if (cover_) {
    for (int l : cover_->extra_links[i]) {
      const double wbar = wbar_for(l);
      const double w = m.w[i][index_of(w_links_[i], l)];
      const double rf = out.f[l] > 0.0 ? out.r * out.f[l] : 0.0;
      const double slack = sets_->capacity[l] - rf;
      price_consensus += (w - wbar) * (w - wbar);
      comp_slack += wbar * (w - wbar) * slack * slack;
    }
  }

  out.tax_terms = {{"price_rate", price_rate},
                   {"summary", summary},
                   {"proxy", proxy},
                   {"group_demand", group_demand},
                   {"price_consensus", price_consensus},
                   {"comp_slack", comp_slack},
                   {"free_riding", free_riding},
                   {"leader_consensus", leader_consensus}};
  out.tax = price_rate + summary + proxy + group_demand + price_consensus + comp_slack +
            free_riding + leader_consensus;
  const auto& val = sets_->valuation[i];
  if (out.xhat <= 0.0 && val.value_at_zero_is_neg_inf()) {
    out.utility_defined = false;
    out.utility = -kInf;
  } else {
    out.utility = val.value(out.xhat) - out.tax;
  }
  return out;
}

Outcome MmtpMechanism::evaluate_all(const MmtpProfile& m) const {
  Outcome out;
  out.agents.reserve(sets_->num_agents);
  std::vector<double> x(sets_->num_agents);
  for (int i = 0; i < sets_->num_agents; ++i) {
    out.agents.push_back(evaluate(m, i));
    x[i] = out.agents.back().xhat;
  }
  // link load under max-rate sharing: each group loads its members' maximum
  out.load.assign(sets_->num_links, 0.0);
  for (int l = 0; l < sets_->num_links; ++l) {
    for (const auto& members : sets_->group_members_on_link[l]) {
      double gmax = 0.0;
      for (int j : members) gmax = std::max(gmax, x[j]);
      out.load[l] += gmax;
    }
  }
  return out;
}

double MmtpMechanism::utility(const MmtpProfile& m, int i) const { return evaluate(m, i).utility; }

std::string MmtpMechanism::profile_to_json(const MmtpProfile& m) const {
  nlohmann::json doc = nlohmann::json::object();
  for (int i = 0; i < sets_->num_agents; ++i) {
    nlohmann::json a;
    a["y"] = m.y[i];
    nlohmann::json nj = nlohmann::json::object();
    for (size_t jp = 0; jp < dir_->neighbors[i].size(); ++jp) {
      nlohmann::json per_link = nlohmann::json::object();
      for (int l = 0; l < sets_->num_links; ++l) per_link[sets_->link_ids[l]] = m.n[i][jp][l];
      nj[sets_->agent_ids[dir_->neighbors[i][jp]]] = per_link;
    }
    a["n"] = nj;
    nlohmann::json qj = nlohmann::json::object();
    for (size_t jp = 0; jp < dir_->quoted_by[i].size(); ++jp)
      qj[sets_->agent_ids[dir_->quoted_by[i][jp]]] = m.q[i][jp];
    a["q"] = qj;
    auto own_links = [&](const std::vector<double>& v) {
      nlohmann::json o = nlohmann::json::object();
      for (size_t lp = 0; lp < sets_->links_of_agent[i].size(); ++lp)
        o[sets_->link_ids[sets_->links_of_agent[i][lp]]] = v[lp];
      return o;
    };
    auto flat = [&](const std::vector<double>& v) {
      nlohmann::json o = nlohmann::json::object();
      for (size_t jp = 0; jp < dir_->quoted_by[i].size(); ++jp) {
        const int j = dir_->quoted_by[i][jp];
        nlohmann::json per_link = nlohmann::json::object();
        const auto& lj = sets_->links_of_agent[j];
        for (size_t lp = 0; lp < lj.size(); ++lp)
          per_link[sets_->link_ids[lj[lp]]] = v[p2_offset_[i][jp] + lp];
        o[sets_->agent_ids[j]] = per_link;
      }
      return o;
    };
    a["p1"] = own_links(m.p1[i]);
    a["p2"] = flat(m.p2[i]);
    a["s"] = own_links(m.s[i]);
    nlohmann::json wj = nlohmann::json::object();
    for (size_t lp = 0; lp < w_links_[i].size(); ++lp)
      wj[sets_->link_ids[w_links_[i][lp]]] = m.w[i][lp];
    a["w"] = wj;
    nlohmann::json z1j = nlohmann::json::object(), z2j = nlohmann::json::object();
    for (size_t lp = 0; lp < leaders_->leader_links[i].size(); ++lp) {
      z1j[sets_->link_ids[leaders_->leader_links[i][lp]]] = m.z1[i][lp];
      z2j[sets_->link_ids[leaders_->leader_links[i][lp]]] = m.z2[i][lp];
    }
    a["z1"] = z1j;
    a["z2"] = z2j;
    a["a1"] = own_links(m.a1[i]);
    a["a2"] = flat(m.a2[i]);
    doc[sets_->agent_ids[i]] = a;
  }
  return doc.dump(2);
}

MmtpProfile MmtpMechanism::profile_from_json(const std::string& text) const {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorKind::Parse, std::string("invalid profile JSON: ") + e.what());
  }
  MmtpProfile m = zero_profile();
  try {
    for (int i = 0; i < sets_->num_agents; ++i) {
      const auto& a = doc.at(sets_->agent_ids[i]);
      m.y[i] = a.at("y").get<double>();
      for (size_t jp = 0; jp < dir_->neighbors[i].size(); ++jp) {
        const auto& per_link = a.at("n").at(sets_->agent_ids[dir_->neighbors[i][jp]]);
        for (int l = 0; l < sets_->num_links; ++l)
          m.n[i][jp][l] = per_link.at(sets_->link_ids[l]).get<double>();
      }
      for (size_t jp = 0; jp < dir_->quoted_by[i].size(); ++jp)
        m.q[i][jp] = a.at("q").at(sets_->agent_ids[dir_->quoted_by[i][jp]]).get<double>();
      auto read_own = [&](const char* key, std::vector<double>& v) {
        for (size_t lp = 0; lp < sets_->links_of_agent[i].size(); ++lp)
          v[lp] = a.at(key).at(sets_->link_ids[sets_->links_of_agent[i][lp]]).get<double>();
      };
      auto read_flat = [&](const char* key, std::vector<double>& v) {
        for (size_t jp = 0; jp < dir_->quoted_by[i].size(); ++jp) {
          const int j = dir_->quoted_by[i][jp];
          const auto& lj = sets_->links_of_agent[j];
          for (size_t lp = 0; lp < lj.size(); ++lp)
            v[p2_offset_[i][jp] + lp] =
                a.at(key).at(sets_->agent_ids[j]).at(sets_->link_ids[lj[lp]]).get<double>();
        }
      };
      read_own("p1", m.p1[i]);
      read_flat("p2", m.p2[i]);
      read_own("s", m.s[i]);
      for (size_t lp = 0; lp < w_links_[i].size(); ++lp)
        m.w[i][lp] = a.at("w").at(sets_->link_ids[w_links_[i][lp]]).get<double>();
      for (size_t lp = 0; lp < leaders_->leader_links[i].size(); ++lp) {
        m.z1[i][lp] =
            a.at("z1").at(sets_->link_ids[leaders_->leader_links[i][lp]]).get<double>();
        m.z2[i][lp] =
            a.at("z2").at(sets_->link_ids[leaders_->leader_links[i][lp]]).get<double>();
      }
      read_own("a1", m.a1[i]);
      read_flat("a2", m.a2[i]);
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Shape, std::string("profile does not match the instance: ") + e.what());
  }
  return m;
}

}  // namespace dmd

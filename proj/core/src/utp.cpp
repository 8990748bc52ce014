#include "dmd/utp.hpp"

#include <algorithm>
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
}  // namespace

UtpMechanism::UtpMechanism(const IndexSets& sets, const NeighborDirectory& dir,
                           const LinkCover* cover)
    : sets_(&sets), dir_(&dir), cover_(cover) {
  const int n = sets.num_agents;
  price_links_.resize(n);
  for (int i = 0; i < n; ++i) {
    price_links_[i] = sets.links_of_agent[i];
    if (cover_) {
      for (int l : cover_->extra_links[i]) price_links_[i].push_back(l);
      std::sort(price_links_[i].begin(), price_links_[i].end());
    }
  }
  price_neighbors_.assign(n, std::vector<std::vector<int>>(sets.num_links));
  for (int i = 0; i < n; ++i) {
    for (int l : price_links_[i]) {
      for (int j : dir.neighbors[i]) {
        const bool quotes = cover_ ? cover_->in_cover[l][j] != 0 : sets.agent_uses_link(j, l);
        if (quotes) price_neighbors_[i][l].push_back(j);
      }
    }
  }
}

UtpProfile UtpMechanism::zero_profile() const {
  const int n = sets_->num_agents;
  UtpProfile m;
  m.y.assign(n, 0.0);
  m.n.resize(n);
  m.q.resize(n);
  m.p.resize(n);
  for (int i = 0; i < n; ++i) {
    m.n[i].assign(dir_->degree(i), std::vector<double>(sets_->num_links, 0.0));
    m.q[i].assign(dir_->quoted_by[i].size(), 0.0);
    m.p[i].assign(price_links_[i].size(), 0.0);
  }
  return m;
}

int UtpMechanism::dim(int i) const {
  return 1 + dir_->degree(i) * sets_->num_links +
         static_cast<int>(dir_->quoted_by[i].size()) +
         static_cast<int>(price_links_[i].size());
}

int UtpMechanism::total_dim() const {
  int t = 0;
  for (int i = 0; i < sets_->num_agents; ++i) t += dim(i);
  return t;
}

std::vector<int> UtpMechanism::dimension_formula() const {
  // 1 + N(i)*L + |I_i| + L_i, plus relay links in the extended variant
  std::vector<int> out(sets_->num_agents);
  for (int i = 0; i < sets_->num_agents; ++i) {
    int extra = cover_ ? static_cast<int>(cover_->extra_links[i].size()) : 0;
    out[i] = 1 + dir_->degree(i) * sets_->num_links +
             static_cast<int>(dir_->quoted_by[i].size()) +
             static_cast<int>(sets_->links_of_agent[i].size()) + extra;
  }
  return out;
}

double UtpMechanism::coord(const UtpProfile& m, int i, int k) const {
  if (k == 0) return m.y[i];
  k -= 1;
  const int nL = dir_->degree(i) * sets_->num_links;
  if (k < nL) return m.n[i][k / sets_->num_links][k % sets_->num_links];
  k -= nL;
  const int nq = static_cast<int>(dir_->quoted_by[i].size());
  if (k < nq) return m.q[i][k];
  return m.p[i][k - nq];
}

void UtpMechanism::set_coord(UtpProfile& m, int i, int k, double v) const {
  if (k == 0) {
    m.y[i] = v;
    return;
  }
  k -= 1;
  const int nL = dir_->degree(i) * sets_->num_links;
  if (k < nL) {
    m.n[i][k / sets_->num_links][k % sets_->num_links] = v;
    return;
  }
  k -= nL;
  const int nq = static_cast<int>(dir_->quoted_by[i].size());
  if (k < nq) {
    m.q[i][k] = v;
    return;
  }
  m.p[i][k - nq] = v;
}

std::string UtpMechanism::coord_name(int i, int k) const {
  if (k == 0) return "y";
  k -= 1;
  const int nL = dir_->degree(i) * sets_->num_links;
  if (k < nL) {
    const int j = dir_->neighbors[i][k / sets_->num_links];
    const int l = k % sets_->num_links;
    return "n[" + sets_->agent_ids[j] + "," + sets_->link_ids[l] + "]";
  }
  k -= nL;
  const int nq = static_cast<int>(dir_->quoted_by[i].size());
  if (k < nq) return "q[" + sets_->agent_ids[dir_->quoted_by[i][k]] + "]";
  return "p[" + sets_->link_ids[price_links_[i][k - nq]] + "]";
}

void UtpMechanism::allocation(const UtpProfile& m, int i, AgentOutcome& out) const {
  const int L = sets_->num_links;
  out.f.assign(L, 0.0);
  for (int l = 0; l < L; ++l) {
    double f = 0.0;
    for (size_t jp = 0; jp < dir_->neighbors[i].size(); ++jp) {
      const int j = dir_->neighbors[i][jp];
      if (sets_->agent_uses_link(j, l)) f += m.y[j];
      for (size_t hp = 0; hp < dir_->neighbors[j].size(); ++hp) {
        if (dir_->neighbors[j][hp] == i) continue;
        f += m.n[j][hp][l];
      }
    }
    if (sets_->agent_uses_link(i, l)) f += m.q[dir_->phi[i]][dir_->pos_in_quoter[i]];
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

AgentOutcome UtpMechanism::evaluate(const UtpProfile& m, int i) const {
  AgentOutcome out;
  allocation(m, i, out);

  double summary = 0.0, proxy = 0.0, price_rate = 0.0, consensus = 0.0, comp_slack = 0.0;
  double proxy_one = 0.0;
  for (size_t jp = 0; jp < dir_->quoted_by[i].size(); ++jp) {
    const double d = m.q[i][jp] - m.y[dir_->quoted_by[i][jp]];
    proxy_one += d * d;
  }
  for (int l = 0; l < sets_->num_links; ++l) {
    for (size_t jp = 0; jp < dir_->neighbors[i].size(); ++jp) {
      const int j = dir_->neighbors[i][jp];
      double target = sets_->agent_uses_link(j, l) ? m.y[j] : 0.0;
      for (size_t hp = 0; hp < dir_->neighbors[j].size(); ++hp) {
        if (dir_->neighbors[j][hp] == i) continue;
        target += m.n[j][hp][l];
      }
      const double d = m.n[i][jp][l] - target;
      summary += d * d;
    }
  }
  for (size_t lp = 0; lp < price_links_[i].size(); ++lp) {
    const int l = price_links_[i][lp];
    const auto& quoting = price_neighbors_[i][l];
    if (quoting.empty()) {
      throw Error(ErrorKind::Config,
                  "agent " + sets_->agent_ids[i] + " has no neighbor quoting a price for link " +
                      sets_->link_ids[l] + "; the link's users are not connected "
                      "(use the extended mechanism)");
    }
    double pbar = 0.0;
    for (int j : quoting) pbar += m.p[j][index_of(price_links_[j], l)];
    pbar /= static_cast<double>(quoting.size());
    const double p = m.p[i][lp];
    const double rf = out.f[l] > 0.0 ? out.r * out.f[l] : 0.0;
    const double slack = sets_->capacity[l] - rf;
    consensus += (p - pbar) * (p - pbar);
    comp_slack += (p - pbar) * pbar * slack * slack;
    if (sets_->agent_uses_link(i, l)) {
      price_rate += pbar * out.xhat;
      proxy += proxy_one;
    }
  }

  out.tax_terms = {{"price_rate", price_rate},
                   {"summary", summary},
                   {"proxy", proxy},
                   {"price_consensus", consensus},
                   {"comp_slack", comp_slack}};
  out.tax = price_rate + summary + proxy + consensus + comp_slack;
  const auto& val = sets_->valuation[i];
  if (out.xhat <= 0.0 && val.value_at_zero_is_neg_inf()) {
    out.utility_defined = false;
    out.utility = -kInf;
  } else {
    out.utility = val.value(out.xhat) - out.tax;
  }
  return out;
}

Outcome UtpMechanism::evaluate_all(const UtpProfile& m) const {
  Outcome out;
  out.agents.reserve(sets_->num_agents);
  std::vector<double> x(sets_->num_agents);
  for (int i = 0; i < sets_->num_agents; ++i) {
    out.agents.push_back(evaluate(m, i));
    x[i] = out.agents.back().xhat;
  }
  out.load.assign(sets_->num_links, 0.0);
  for (int l = 0; l < sets_->num_links; ++l)
    for (int i : sets_->agents_on_link[l]) out.load[l] += x[i];
  return out;
}

double UtpMechanism::utility(const UtpProfile& m, int i) const { return evaluate(m, i).utility; }

std::string UtpMechanism::profile_to_json(const UtpProfile& m) const {
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
    nlohmann::json pj = nlohmann::json::object();
    for (size_t lp = 0; lp < price_links_[i].size(); ++lp)
      pj[sets_->link_ids[price_links_[i][lp]]] = m.p[i][lp];
    a["p"] = pj;
    doc[sets_->agent_ids[i]] = a;
  }
  return doc.dump(2);
}

UtpProfile UtpMechanism::profile_from_json(const std::string& text) const {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorKind::Parse, std::string("invalid profile JSON: ") + e.what());
  }
  UtpProfile m = zero_profile();
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
      for (size_t lp = 0; lp < price_links_[i].size(); ++lp)
        m.p[i][lp] = a.at("p").at(sets_->link_ids[price_links_[i][lp]]).get<double>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Shape, std::string("profile does not match the instance: ") + e.what());
  }
  return m;
}

}  // namespace dmd

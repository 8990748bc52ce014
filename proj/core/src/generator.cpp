#include "dmd/generator.hpp"

#include <algorithm>
#include <cstdio>
#include <random>
#include <string>
#include <vector>

#include "dmd/error.hpp"

namespace dmd {

namespace {

std::string pad_id(const char* prefix, int k) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%s%03d", prefix, k);
  return buf;
}

Valuation random_valuation(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> a_dist(0.5, 3.0);
  std::uniform_real_distribution<double> alpha_dist(0.3, 0.7);
  Valuation v;
  switch (std::uniform_int_distribution<int>(0, 2)(rng)) {
    case 0: v.family = ValuationFamily::ScaledLog; break;
    case 1: v.family = ValuationFamily::ShiftedLog; break;
    default: v.family = ValuationFamily::Power; break;
  }
  v.a = a_dist(rng);
  v.alpha = alpha_dist(rng);
  return v;
}

// Random labeled tree: each node attaches to a uniformly chosen earlier node.
std::vector<std::pair<int, int>> random_tree(int n, std::mt19937_64& rng,
                                             std::vector<std::vector<int>>& adj) {
  std::vector<std::pair<int, int>> edges;
  adj.assign(n, {});
  for (int i = 1; i < n; ++i) {
    const int p = std::uniform_int_distribution<int>(0, i - 1)(rng);
    edges.push_back({p, i});
    adj[p].push_back(i);
    adj[i].push_back(p);
  }
  return edges;
}

// Random connected subtree of size target, grown from a random start node.
std::vector<int> random_subtree(const std::vector<std::vector<int>>& adj, int target,
                                std::mt19937_64& rng) {
  const int n = static_cast<int>(adj.size());
  std::vector<char> in(n, 0);
  std::vector<int> nodes, frontier;
  const int start = std::uniform_int_distribution<int>(0, n - 1)(rng);
  in[start] = 1;
  nodes.push_back(start);
  for (int j : adj[start]) frontier.push_back(j);
  while (static_cast<int>(nodes.size()) < target && !frontier.empty()) {
    const int pick = std::uniform_int_distribution<int>(
        0, static_cast<int>(frontier.size()) - 1)(rng);
    const int v = frontier[pick];
    frontier.erase(frontier.begin() + pick);
    if (in[v]) continue;
    in[v] = 1;
    nodes.push_back(v);
    for (int j : adj[v])
      if (!in[j]) frontier.push_back(j);
  }
  std::sort(nodes.begin(), nodes.end());
  return nodes;
}

std::pair<int, int> random_nonadjacent_pair(const std::vector<std::vector<int>>& adj,
                                            std::mt19937_64& rng) {
  const int n = static_cast<int>(adj.size());
  std::vector<std::pair<int, int>> candidates;
  for (int u = 0; u < n; ++u) {
    for (int v = u + 1; v < n; ++v) {
      if (std::find(adj[u].begin(), adj[u].end(), v) == adj[u].end())
        candidates.push_back({u, v});
    }
  }
  if (candidates.empty())
    throw Error(ErrorKind::Config, "no non-adjacent agent pair exists in this tree");
  return candidates[std::uniform_int_distribution<size_t>(0, candidates.size() - 1)(rng)];
}

}  // namespace

ProblemInstance random_utp_instance(int n_agents, int n_links, unsigned long long seed,
                                    bool violate_connectivity) {
  if (n_agents < 2 || n_links < 1)
    throw Error(ErrorKind::Config, "need at least 2 agents and 1 link");
  if (violate_connectivity && (n_agents < 3 || n_links < 2))
    throw Error(ErrorKind::Config,
                "a disconnected user set needs at least 3 agents and 2 links");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> cap(0.5, 2.0);

  ProblemInstance inst;
  inst.protocol = Protocol::Utp;
  std::vector<std::vector<int>> adj;
  const auto edges = random_tree(n_agents, rng, adj);
  for (const auto& [u, v] : edges)
    inst.message_graph.edges.push_back({pad_id("a", u), pad_id("a", v)});

  std::vector<std::vector<int>> users(n_links);
  for (int i = 0; i < n_agents; ++i) users[0].push_back(i);  // everyone is on link 0
  for (int l = 1; l < n_links; ++l) {
    if (violate_connectivity && l == n_links - 1) {
      const auto [u, v] = random_nonadjacent_pair(adj, rng);
      users[l] = {u, v};
    } else {
      const int target = std::uniform_int_distribution<int>(2, n_agents)(rng);
      users[l] = random_subtree(adj, target, rng);
      while (static_cast<int>(users[l].size()) < 2)
        users[l] = random_subtree(adj, 2, rng);
    }
  }

  for (int l = 0; l < n_links; ++l) inst.links.push_back({pad_id("l", l), cap(rng)});
  for (int i = 0; i < n_agents; ++i) {
    AgentSpec a;
    a.id = pad_id("a", i);
    for (int l = 0; l < n_links; ++l)
      if (std::binary_search(users[l].begin(), users[l].end(), i))
        a.links.push_back(pad_id("l", l));
    a.valuation = random_valuation(rng);
    inst.agents.push_back(std::move(a));
  }
  return inst;
}

ProblemInstance random_mmtp_instance(int n_groups, int n_links, unsigned long long seed,
                                     bool violate_connectivity) {
  if (n_groups < 2 || n_links < 1)
    throw Error(ErrorKind::Config, "need at least 2 groups and 1 link");
  if (violate_connectivity && (n_groups < 3 || n_links < 2))
    throw Error(ErrorKind::Config,
                "a disconnected group pair needs at least 3 groups and 2 links");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> cap(0.5, 2.0);

  ProblemInstance inst;
  inst.protocol = Protocol::Mmtp;

  // leaders form a chain; members star-attach to their leader
  std::vector<int> leader(n_groups);
  std::vector<std::vector<int>> members(n_groups);  // including the leader
  int next_agent = 0;
  for (int k = 0; k < n_groups; ++k) {
    leader[k] = next_agent++;
    members[k].push_back(leader[k]);
    const int extra = std::uniform_int_distribution<int>(0, 2)(rng);
    for (int e = 0; e < extra; ++e) {
      members[k].push_back(next_agent);
      inst.message_graph.edges.push_back({pad_id("a", leader[k]), pad_id("a", next_agent)});
      ++next_agent;
    }
    if (k > 0)
      inst.message_graph.edges.push_back({pad_id("a", leader[k - 1]), pad_id("a", leader[k])});
  }

  // link 0 covers every group; other links cover contiguous leader segments
  std::vector<std::vector<int>> groups_of_link(n_links);
  for (int k = 0; k < n_groups; ++k) groups_of_link[0].push_back(k);
  const int last_regular = violate_connectivity ? n_links - 1 : n_links;
  for (int l = 1; l < last_regular; ++l) {
    const int len = std::uniform_int_distribution<int>(2, n_groups)(rng);
    const int s = std::uniform_int_distribution<int>(0, n_groups - len)(rng);
    for (int k = s; k < s + len; ++k) groups_of_link[l].push_back(k);
  }
  if (violate_connectivity) {
    // two groups at chain distance >= 2: their users induce two components
    const int k1 = std::uniform_int_distribution<int>(0, n_groups - 3)(rng);
    const int k2 =
        std::uniform_int_distribution<int>(k1 + 2, n_groups - 1)(rng);
    groups_of_link[n_links - 1] = {k1, k2};
  }

  for (int l = 0; l < n_links; ++l) inst.links.push_back({pad_id("l", l), cap(rng)});
  for (int k = 0; k < n_groups; ++k) {
    std::vector<std::string> route;
    for (int l = 0; l < n_links; ++l) {
      if (std::find(groups_of_link[l].begin(), groups_of_link[l].end(), k) !=
          groups_of_link[l].end())
        route.push_back(pad_id("l", l));
    }
    for (int i : members[k]) {
      AgentSpec a;
      a.id = pad_id("a", i);
      a.group = pad_id("g", k);
      a.links = route;
      a.valuation = random_valuation(rng);
      inst.agents.push_back(std::move(a));
    }
  }
  std::sort(inst.agents.begin(), inst.agents.end(),
            [](const AgentSpec& x, const AgentSpec& y) { return x.id < y.id; });
  return inst;
}

ProblemInstance utp_path_family(int n_agents, int n_links) {
  ProblemInstance inst;
  inst.protocol = Protocol::Utp;
  for (int l = 0; l < n_links; ++l) inst.links.push_back({pad_id("l", l), 1.0 + 0.1 * l});
  for (int i = 0; i < n_agents; ++i) {
    AgentSpec a;
    a.id = pad_id("a", i);
    for (int l = 0; l < n_links; ++l) a.links.push_back(pad_id("l", l));
    a.valuation.family = ValuationFamily::ScaledLog;
    a.valuation.a = 1.0 + (i % 5);
    inst.agents.push_back(std::move(a));
    if (i > 0) inst.message_graph.edges.push_back({pad_id("a", i - 1), pad_id("a", i)});
  }
  return inst;
}

ProblemInstance mmtp_pair_family(int n_groups) {
  ProblemInstance inst;
  inst.protocol = Protocol::Mmtp;
  inst.links.push_back({pad_id("l", 0), 1.0});
  for (int k = 0; k < n_groups; ++k) {
    const int lead = 2 * k, memb = 2 * k + 1;
    for (int i : {lead, memb}) {
      AgentSpec a;
      a.id = pad_id("a", i);
      a.group = pad_id("g", k);
      a.links.push_back(pad_id("l", 0));
      a.valuation.family = ValuationFamily::ShiftedLog;
      a.valuation.a = 1.0 + 0.5 * (k % 3);
      inst.agents.push_back(std::move(a));
    }
    inst.message_graph.edges.push_back({pad_id("a", lead), pad_id("a", memb)});
    if (k > 0)
      inst.message_graph.edges.push_back({pad_id("a", 2 * (k - 1)), pad_id("a", lead)});
  }
  return inst;
}

}  // namespace dmd

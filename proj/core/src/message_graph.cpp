#include "dmd/message_graph.hpp"

#include <algorithm>
#include <queue>

#include "dmd/error.hpp"

namespace dmd {

MessageTree build_message_tree(const ProblemInstance& instance, const IndexSets& sets) {
  MessageTree tree;
  tree.num_nodes = sets.num_agents;
  tree.adjacency.assign(sets.num_agents, {});
  for (const auto& [ua, va] : instance.message_graph.edges) {
    int u = sets.agent_index(ua);
    int v = sets.agent_index(va);
    if (u < 0 || v < 0) {
      throw Error(ErrorKind::Structural,
                  "message graph edge references unknown agent '" + (u < 0 ? ua : va) + "'");
    }
    if (u == v) throw Error(ErrorKind::Structural, "message graph has a self loop at '" + ua + "'");
    tree.edges.emplace_back(std::min(u, v), std::max(u, v));
    tree.adjacency[u].push_back(v);
    tree.adjacency[v].push_back(u);
  }
  for (auto& adj : tree.adjacency) {
    std::sort(adj.begin(), adj.end());
    if (std::adjacent_find(adj.begin(), adj.end()) != adj.end()) {
      throw Error(ErrorKind::Structural, "message graph has a duplicate edge");
    }
  }
  if (static_cast<int>(tree.edges.size()) != tree.num_nodes - 1) {
    throw Error(ErrorKind::Structural, "message graph is not a tree (|E| != |N|-1)");
  }
  // |E| = |N|-1 plus connectivity implies acyclicity.
  std::vector<char> seen(tree.num_nodes, 0);
  std::queue<int> q;
  if (tree.num_nodes > 0) {
    q.push(0);
    seen[0] = 1;
  }
  int reached = 0;
  while (!q.empty()) {
    int u = q.front();
    q.pop();
    ++reached;
    for (int v : tree.adjacency[u]) {
      if (!seen[v]) {
        seen[v] = 1;
        q.push(v);
      }
    }
  }
  if (reached != tree.num_nodes) {
    throw Error(ErrorKind::Structural, "message graph is not connected");
  }
  return tree;
}

NeighborDirectory build_neighbor_directory(
    const MessageTree& tree, const IndexSets& sets,
    const std::optional<std::vector<int>>& phi_override) {
  const int n = tree.num_nodes;
  NeighborDirectory dir;
  dir.neighbors = tree.adjacency;

  // n(i,j): BFS from each node; the next hop toward j is the first edge on
  // the unique tree path.
  dir.next_hop.assign(n, std::vector<int>(n, -1));
  for (int src = 0; src < n; ++src) {
    std::vector<int> parent(n, -2);
    std::queue<int> q;
    q.push(src);
    parent[src] = -1;
    while (!q.empty()) {
      int u = q.front();
      q.pop();
      for (int v : tree.adjacency[u]) {
        if (parent[v] == -2) {
          parent[v] = u;
          q.push(v);
        }
      }
    }
    for (int j = 0; j < n; ++j) {
      if (j == src) continue;
      int hop = j;
      while (parent[hop] != src) hop = parent[hop];
      dir.next_hop[src][j] = hop;
    }
  }

  dir.phi.assign(n, -1);
  for (int i = 0; i < n; ++i) {
    if (dir.neighbors[i].empty()) {
      throw Error(ErrorKind::Structural, "agent '" + sets.agent_ids[i] + "' has no neighbors");
    }
    dir.phi[i] = dir.neighbors[i].front();  // smallest id by sorted order
  }
  if (phi_override) {
    for (int i = 0; i < n; ++i) {
      int target = (*phi_override)[i];
      if (target < 0) continue;
      if (!std::binary_search(dir.neighbors[i].begin(), dir.neighbors[i].end(), target)) {
        throw Error(ErrorKind::Config, "phi override for '" + sets.agent_ids[i] +
                                           "' points at a non-neighbor");
      }
      dir.phi[i] = target;
    }
  }

  dir.quoted_by.assign(n, {});
  for (int i = 0; i < n; ++i) dir.quoted_by[dir.phi[i]].push_back(i);
  for (auto& v : dir.quoted_by) std::sort(v.begin(), v.end());
  dir.pos_in_quoter.assign(n, -1);
  for (int i = 0; i < n; ++i) {
    const auto& iq = dir.quoted_by[dir.phi[i]];
    dir.pos_in_quoter[i] =
        static_cast<int>(std::lower_bound(iq.begin(), iq.end(), i) - iq.begin());
  }

  dir.link_neighbors.assign(n, std::vector<std::vector<int>>(sets.num_links));
  for (int i = 0; i < n; ++i) {
    for (int l = 0; l < sets.num_links; ++l) {
      for (int j : dir.neighbors[i]) {
        if (sets.agent_uses_link(j, l)) dir.link_neighbors[i][l].push_back(j);
      }
    }
  }
  return dir;
}

int NeighborDirectory::neighbor_pos(int i, int j) const {
  const auto& adj = neighbors[i];
  auto it = std::lower_bound(adj.begin(), adj.end(), j);
  if (it == adj.end() || *it != j) return -1;
  return static_cast<int>(it - adj.begin());
}

std::vector<bool> check_assumption1(const MessageTree& tree, const IndexSets& sets) {
  std::vector<bool> verdict(sets.num_links, true);
  for (int l = 0; l < sets.num_links; ++l) {
    const auto& users = sets.agents_on_link[l];
    if (users.size() <= 1) continue;
    std::vector<char> in_set(tree.num_nodes, 0);
    for (int i : users) in_set[i] = 1;
    std::vector<char> seen(tree.num_nodes, 0);
    std::queue<int> q;
    q.push(users.front());
    seen[users.front()] = 1;
    int reached = 0;
    while (!q.empty()) {
      int u = q.front();
      q.pop();
      ++reached;
      for (int v : tree.adjacency[u]) {
        if (in_set[v] && !seen[v]) {
          seen[v] = 1;
          q.push(v);
        }
      }
    }
    verdict[l] = reached == static_cast<int>(users.size());
  }
  return verdict;
}

LeaderAssignment assign_group_leaders(const MessageTree& tree, const IndexSets& sets) {
  LeaderAssignment out;
  out.leader.assign(sets.num_links, std::vector<int>(std::max(0, sets.num_groups), -1));
  out.leader_links.assign(sets.num_agents, {});
  for (int l = 0; l < sets.num_links; ++l) {
    for (int k : sets.groups_on_link[l]) {
      const auto& members = sets.group_members_on_link[l][k];
      int chosen = -1;
      for (int cand : members) {  // sorted, so the first hit is the smallest id
        bool adjacent_to_all = true;
        for (int other : members) {
          if (other == cand) continue;
          if (!std::binary_search(tree.adjacency[cand].begin(), tree.adjacency[cand].end(),
                                  other)) {
            adjacent_to_all = false;
            break;
          }
        }
        if (adjacent_to_all) {
          chosen = cand;
          break;
        }
      }
      if (chosen < 0) {
        out.violations.emplace_back(k, l);
      } else {
        out.leader[l][k] = chosen;
        out.leader_links[chosen].push_back(l);
      }
    }
  }
  for (auto& v : out.leader_links) std::sort(v.begin(), v.end());
  return out;
}

LinkCover build_link_covers(const MessageTree& tree, const IndexSets& sets) {
  LinkCover cover;
  cover.cover_nodes.assign(sets.num_links, {});
  cover.in_cover.assign(sets.num_links, std::vector<char>(tree.num_nodes, 0));
  cover.extra_links.assign(tree.num_nodes, {});

  // On a tree the minimal connected cover of a node set is the union of the
  // pairwise paths; marking the path from every member to one anchor member
  // is enough.
  std::vector<int> parent(tree.num_nodes, -2);
  for (int l = 0; l < sets.num_links; ++l) {
    const auto& users = sets.agents_on_link[l];
    if (users.empty()) continue;
    int anchor = users.front();
    std::fill(parent.begin(), parent.end(), -2);
    std::queue<int> q;
    q.push(anchor);
    parent[anchor] = -1;
    while (!q.empty()) {
      int u = q.front();
      q.pop();
      for (int v : tree.adjacency[u]) {
        if (parent[v] == -2) {
          parent[v] = u;
          q.push(v);
        }
      }
    }
    auto& flags = cover.in_cover[l];
    for (int member : users) {
      for (int node = member; node != -1; node = parent[node]) {
        if (flags[node]) break;
        flags[node] = 1;
      }
    }
    for (int i = 0; i < tree.num_nodes; ++i) {
      if (flags[i]) {
        cover.cover_nodes[l].push_back(i);
        if (!sets.agent_uses_link(i, l)) cover.extra_links[i].push_back(l);
      }
    }
  }
  return cover;
}

}  // namespace dmd

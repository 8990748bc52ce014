#pragma once

#include <optional>
#include <vector>

#include "dmd/instance.hpp"

namespace dmd {

// Undirected tree over the agents. Built from the instance's message_graph
// block; construction validates connectivity, acyclicity and the node set.
struct MessageTree {
  int num_nodes = 0;
  std::vector<std::pair<int, int>> edges;
  std::vector<std::vector<int>> adjacency;  // sorted neighbor lists
};

MessageTree build_message_tree(const ProblemInstance& instance, const IndexSets& sets);

// Routing table, phi-assignment and per-link neighbor sets.
struct NeighborDirectory {
  std::vector<std::vector<int>> neighbors;       // N(i), sorted
  std::vector<std::vector<int>> next_hop;        // n(i,j); -1 on the diagonal
  std::vector<int> phi;                          // phi(i) in N(i)
  std::vector<std::vector<int>> quoted_by;       // I_i = {h : phi(h) = i}, sorted
  std::vector<int> pos_in_quoter;                // position of i inside I_{phi(i)}
  std::vector<std::vector<std::vector<int>>> link_neighbors;  // [i][l] = N(i) cap N^l

  int degree(int i) const { return static_cast<int>(neighbors[i].size()); }
  int neighbor_pos(int i, int j) const;  // position of j in neighbors[i]; -1 if absent
};

// phi defaults to the smallest-id neighbor; the override may remap any subset
// of agents but must point at a neighbor.
NeighborDirectory build_neighbor_directory(
    const MessageTree& tree, const IndexSets& sets,
    const std::optional<std::vector<int>>& phi_override = std::nullopt);

// Per-link verdict: is the subgraph induced by N^l connected?
std::vector<bool> check_assumption1(const MessageTree& tree, const IndexSets& sets);

// Group leaders c(k,l): a member of G_k^l adjacent to every other member,
// smallest id on ties. Missing leaders are reported, not thrown.
struct LeaderAssignment {
  std::vector<std::vector<int>> leader;       // [l][k]; -1 = no members or violated
  std::vector<std::vector<int>> leader_links; // C_i, sorted
  std::vector<std::pair<int, int>> violations;  // (k, l) pairs with no valid leader

  bool ok() const { return violations.empty(); }
};

LeaderAssignment assign_group_leaders(const MessageTree& tree, const IndexSets& sets);

// Minimal connected subtree covering each link's users, and the extra links
// each agent relays for.
struct LinkCover {
  std::vector<std::vector<int>> cover_nodes;  // \hat N^l, sorted
  std::vector<std::vector<char>> in_cover;    // [l][i]
  std::vector<std::vector<int>> extra_links;  // \hat L_i = {l not in L_i : i in \hat N^l}
};

LinkCover build_link_covers(const MessageTree& tree, const IndexSets& sets);

}  // namespace dmd

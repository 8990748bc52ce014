#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <numeric>
#include <queue>
#include <random>

#include "dmd/error.hpp"
#include "dmd/message_graph.hpp"
#include "test_common.hpp"

using namespace dmd;

namespace {

// Path graph a1-a2-...-aN, every agent on the single link l0.
ProblemInstance path_instance(int n) {
  ProblemInstance inst;
  inst.protocol = Protocol::Utp;
  inst.links.push_back({"l0", 1.0});
  for (int i = 1; i <= n; ++i) {
    AgentSpec a;
    a.id = "a" + std::to_string(i);
    a.links = {"l0"};
    a.valuation.family = ValuationFamily::ShiftedLog;
    inst.agents.push_back(std::move(a));
    if (i > 1)
      inst.message_graph.edges.push_back({"a" + std::to_string(i - 1), "a" + std::to_string(i)});
  }
  return inst;
}

// Star with center a1 and n-1 leaves, one shared link.
ProblemInstance star_instance(int n) {
  ProblemInstance inst = path_instance(n);
  inst.message_graph.edges.clear();
  for (int i = 2; i <= n; ++i) inst.message_graph.edges.push_back({"a1", "a" + std::to_string(i)});
  return inst;
}

// Union-find connectivity oracle, independent of the tree BFS code.
struct UnionFind {
  std::vector<int> parent;
  explicit UnionFind(int n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  int find(int x) { return parent[x] == x ? x : parent[x] = find(parent[x]); }
  void unite(int a, int b) { parent[find(a)] = find(b); }
};

bool induced_connected_oracle(const MessageTree& tree, const std::vector<int>& nodes) {
  if (nodes.size() <= 1) return true;
  std::vector<char> in(tree.num_nodes, 0);
  for (int v : nodes) in[v] = 1;
  UnionFind uf(tree.num_nodes);
  for (const auto& [u, v] : tree.edges)
    if (in[u] && in[v]) uf.unite(u, v);
  for (size_t t = 1; t < nodes.size(); ++t)
    if (uf.find(nodes[t]) != uf.find(nodes[0])) return false;
  return true;
}

ProblemInstance random_tree_instance(int n, std::mt19937_64& rng) {
  ProblemInstance inst;
  inst.protocol = Protocol::Utp;
  inst.links.push_back({"l0", 1.0});
  char buf[16];
  auto id = [&](int i) {
    std::snprintf(buf, sizeof(buf), "a%03d", i);
    return std::string(buf);
  };
  for (int i = 0; i < n; ++i) {
    AgentSpec a;
    a.id = id(i);
    a.links = {"l0"};
    a.valuation.family = ValuationFamily::ShiftedLog;
    inst.agents.push_back(std::move(a));
    if (i > 0) {
      const int p = std::uniform_int_distribution<int>(0, i - 1)(rng);
      inst.message_graph.edges.push_back({id(p), id(i)});
    }
  }
  return inst;
}

}  // namespace

TEST_CASE("worked example directory with the phi override") {
  const auto ctx = testutil::make_context(testutil::golden_instance());
  const auto& sets = ctx.sets;
  const int a1 = sets.agent_index("a1"), a2 = sets.agent_index("a2"),
            a3 = sets.agent_index("a3");
  CHECK(ctx.dir.phi[a1] == a2);
  CHECK(ctx.dir.phi[a2] == a1);
  CHECK(ctx.dir.phi[a3] == a1);
  CHECK(ctx.dir.quoted_by[a1] == std::vector<int>{a2, a3});
  CHECK(ctx.dir.quoted_by[a2] == std::vector<int>{a1});
  CHECK(ctx.dir.quoted_by[a3].empty());
  // unique tree path 2-1-3
  CHECK(ctx.dir.next_hop[a2][a3] == a1);
  CHECK(ctx.dir.next_hop[a3][a2] == a1);
}

TEST_CASE("next hop on a path graph") {
  const auto ctx = testutil::make_context(path_instance(4));
  const auto& s = ctx.sets;
  CHECK(ctx.dir.next_hop[s.agent_index("a1")][s.agent_index("a4")] == s.agent_index("a2"));
  CHECK(ctx.dir.next_hop[s.agent_index("a4")][s.agent_index("a1")] == s.agent_index("a3"));
}

TEST_CASE("default phi is the smallest-id neighbor") {
  auto inst = testutil::golden_instance();
  inst.message_graph.phi.clear();
  const auto ctx = testutil::make_context(inst);
  const auto& s = ctx.sets;
  CHECK(ctx.dir.phi[s.agent_index("a1")] == s.agent_index("a2"));
  CHECK(ctx.dir.phi[s.agent_index("a2")] == s.agent_index("a1"));
  CHECK(ctx.dir.phi[s.agent_index("a3")] == s.agent_index("a1"));
}

TEST_CASE("phi override must point at a neighbor") {
  auto inst = testutil::golden_instance();
  inst.message_graph.phi = {{"a2", "a3"}};  // a3 is not adjacent to a2
  CHECK_THROWS_AS(testutil::make_context(inst), Error);
}

TEST_CASE("malformed trees are rejected") {
  auto cyclic = path_instance(3);
  cyclic.message_graph.edges.push_back({"a1", "a3"});
  CHECK_THROWS_AS(testutil::make_context(cyclic), Error);

  auto disconnected = path_instance(3);
  disconnected.message_graph.edges.pop_back();
  CHECK_THROWS_AS(testutil::make_context(disconnected), Error);

  auto stranger = path_instance(3);
  stranger.message_graph.edges.push_back({"a3", "zz"});
  CHECK_THROWS_AS(testutil::make_context(stranger), Error);
}

TEST_CASE("quoted-by sets partition the agents") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 30; ++trial) {
    const int n = std::uniform_int_distribution<int>(2, 30)(rng);
    const auto ctx = testutil::make_context(random_tree_instance(n, rng));
    size_t total = 0;
    for (const auto& iq : ctx.dir.quoted_by) total += iq.size();
    CHECK(total == static_cast<size_t>(n));  // every agent has exactly one quoter
    for (int i = 0; i < n; ++i) {
      const auto& iq = ctx.dir.quoted_by[ctx.dir.phi[i]];
      CHECK(std::binary_search(iq.begin(), iq.end(), i));
    }
  }
}

TEST_CASE("next hops agree with component membership on random trees") {
  std::mt19937_64 rng(23);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = std::uniform_int_distribution<int>(2, 30)(rng);
    const auto ctx = testutil::make_context(random_tree_instance(n, rng));
    const auto& adj = ctx.tree.adjacency;
    for (int i = 0; i < n; ++i) {
      // BFS from each neighbor j inside tree minus i marks j's component
      for (int j : adj[i]) {
        std::vector<char> comp(n, 0);
        std::queue<int> q;
        q.push(j);
        comp[j] = 1;
        while (!q.empty()) {
          const int u = q.front();
          q.pop();
          for (int v : adj[u]) {
            if (v == i || comp[v]) continue;
            comp[v] = 1;
            q.push(v);
          }
        }
        for (int h = 0; h < n; ++h) {
          if (h == i) continue;
          CHECK((ctx.dir.next_hop[i][h] == j) == static_cast<bool>(comp[h]));
        }
      }
    }
  }
}

TEST_CASE("per-link connectivity verdicts") {
  const auto golden = testutil::make_context(testutil::golden_instance());
  CHECK(check_assumption1(golden.tree, golden.sets) == std::vector<bool>{true});

  auto inst = path_instance(3);
  inst.links.push_back({"l1", 1.0});
  inst.agents[0].links.push_back("l1");
  inst.agents[2].links.push_back("l1");  // users {a1, a3} on the path 1-2-3
  const auto ctx = testutil::make_context(inst);
  const auto verdict = check_assumption1(ctx.tree, ctx.sets);
  CHECK(verdict[ctx.sets.link_index("l0")]);   // whole tree
  CHECK_FALSE(verdict[ctx.sets.link_index("l1")]);
}

TEST_CASE("connectivity agrees with a union-find oracle on random user sets") {
  std::mt19937_64 rng(31);
  int checked = 0;
  while (checked < 200) {
    const int n = std::uniform_int_distribution<int>(3, 20)(rng);
    auto inst = random_tree_instance(n, rng);
    inst.links.push_back({"l1", 1.0});
    std::vector<int> users;
    for (int i = 0; i < n; ++i)
      if (std::uniform_int_distribution<int>(0, 1)(rng)) users.push_back(i);
    if (users.size() < 2) continue;
    for (int i : users) inst.agents[i].links.push_back("l1");
    const auto ctx = testutil::make_context(inst);
    const auto verdict = check_assumption1(ctx.tree, ctx.sets);
    const int l1 = ctx.sets.link_index("l1");
    CHECK(verdict[l1] == induced_connected_oracle(ctx.tree, ctx.sets.agents_on_link[l1]));
    ++checked;
  }
}

TEST_CASE("group leaders on stars, singletons and broken pairs") {
  // star: the center is adjacent to every leaf, so it leads its group
  auto star = star_instance(4);
  star.protocol = Protocol::Mmtp;
  star.agents[0].group = "g1";
  star.agents[1].group = "g1";
  star.agents[2].group = "g1";
  star.agents[3].group = "g2";
  const auto ctx = testutil::make_context(star);
  const auto lead = assign_group_leaders(ctx.tree, ctx.sets);
  REQUIRE(lead.ok());
  const int l0 = ctx.sets.link_index("l0");
  CHECK(lead.leader[l0][0] == ctx.sets.agent_index("a1"));
  // singleton group: the only member leads itself
  CHECK(lead.leader[l0][1] == ctx.sets.agent_index("a4"));
  CHECK(lead.leader_links[ctx.sets.agent_index("a4")] == std::vector<int>{l0});

  // path 1-2-3 with a group {a1, a3}: no member is adjacent to the other
  auto path = path_instance(3);
  path.protocol = Protocol::Mmtp;
  path.agents[0].group = "g1";
  path.agents[2].group = "g1";
  path.agents[1].group = "g2";
  const auto pctx = testutil::make_context(path);
  const auto plead = assign_group_leaders(pctx.tree, pctx.sets);
  CHECK_FALSE(plead.ok());
  REQUIRE(plead.violations.size() == 1);
  CHECK(plead.violations[0].first == 0);  // group g1
}

TEST_CASE("leader ties break to the smallest id") {
  // both members of a two-agent group are adjacent; a1 < a2 wins
  const auto ctx = testutil::make_context(testutil::mmtp_symmetric_instance());
  const auto lead = assign_group_leaders(ctx.tree, ctx.sets);
  REQUIRE(lead.ok());
  CHECK(lead.leader[0][0] == ctx.sets.agent_index("a1"));
  CHECK(lead.leader[0][1] == ctx.sets.agent_index("a3"));
}

TEST_CASE("link cover of a split pair on a path") {
  auto inst = path_instance(3);
  inst.links.push_back({"l1", 1.0});
  inst.agents[0].links.push_back("l1");
  inst.agents[2].links.push_back("l1");
  const auto ctx = testutil::make_context(inst);
  const auto cover = build_link_covers(ctx.tree, ctx.sets);
  const int l1 = ctx.sets.link_index("l1");
  const int a2 = ctx.sets.agent_index("a2");
  CHECK(cover.cover_nodes[l1] == std::vector<int>{0, 1, 2});
  CHECK(cover.extra_links[a2] == std::vector<int>{l1});  // the relay
  // the connected link needs no relays
  const int l0 = ctx.sets.link_index("l0");
  CHECK(cover.cover_nodes[l0] == ctx.sets.agents_on_link[l0]);
}

TEST_CASE("covers equal the users when the user set is already connected") {
  const auto ctx = testutil::make_context(testutil::golden_instance());
  const auto cover = build_link_covers(ctx.tree, ctx.sets);
  CHECK(cover.cover_nodes[0] == ctx.sets.agents_on_link[0]);
  for (const auto& extra : cover.extra_links) CHECK(extra.empty());
}

TEST_CASE("cover is the minimal connected superset on a five-node star") {
  // brute-force oracle: smallest superset of the users that induces a
  // connected subgraph, over all 2^5 candidate node sets
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    auto inst = star_instance(5);
    inst.links.push_back({"l1", 1.0});
    std::vector<int> users;
    while (users.size() < 2) {
      users.clear();
      for (int i = 0; i < 5; ++i)
        if (std::uniform_int_distribution<int>(0, 1)(rng)) users.push_back(i);
    }
    const auto all_ids = std::vector<std::string>{"a1", "a2", "a3", "a4", "a5"};
    for (int i : users) inst.agents[i].links.push_back("l1");
    const auto ctx = testutil::make_context(inst);
    const int l1 = ctx.sets.link_index("l1");
    const auto& user_idx = ctx.sets.agents_on_link[l1];

    size_t best_size = 6;
    std::vector<int> best;
    for (int mask = 0; mask < 32; ++mask) {
      std::vector<int> cand;
      for (int i = 0; i < 5; ++i)
        if (mask & (1 << i)) cand.push_back(i);
      const bool superset = std::includes(cand.begin(), cand.end(), user_idx.begin(), user_idx.end());
      if (!superset || !induced_connected_oracle(ctx.tree, cand)) continue;
      if (cand.size() < best_size) {
        best_size = cand.size();
        best = cand;
      }
    }
    const auto cover = build_link_covers(ctx.tree, ctx.sets);
    CHECK(cover.cover_nodes[l1].size() == best_size);  // minimality
    // on a tree the minimal connected superset is unique
    CHECK(cover.cover_nodes[l1] == best);
  }
}

TEST_CASE("cover minimality: relay removal disconnects the users") {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 30; ++trial) {
    const int n = std::uniform_int_distribution<int>(4, 16)(rng);
    auto inst = random_tree_instance(n, rng);
    inst.links.push_back({"l1", 1.0});
    std::vector<int> users;
    while (users.size() < 2) {
      users.clear();
      for (int i = 0; i < n; ++i)
        if (std::uniform_int_distribution<int>(0, 2)(rng) == 0) users.push_back(i);
    }
    for (int i : users) inst.agents[i].links.push_back("l1");
    const auto ctx = testutil::make_context(inst);
    const auto cover = build_link_covers(ctx.tree, ctx.sets);
    const int l1 = ctx.sets.link_index("l1");
    const auto& nodes = cover.cover_nodes[l1];
    for (int drop : nodes) {
      if (std::binary_search(users.begin(), users.end(), drop)) continue;
      std::vector<int> reduced;
      for (int v : nodes)
        if (v != drop) reduced.push_back(v);
      CHECK_FALSE(induced_connected_oracle(ctx.tree, reduced));
    }
  }
}

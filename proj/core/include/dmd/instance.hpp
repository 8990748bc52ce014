#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "dmd/valuation.hpp"

namespace dmd {

enum class Protocol { Utp, Mmtp };

struct LinkSpec {
  std::string id;
  double capacity = 0.0;
};

struct AgentSpec {
  std::string id;
  std::string group;               // MMTP only; empty for UTP
  std::vector<std::string> links;  // the route L_i
  Valuation valuation;
};

struct MessageGraphSpec {
  std::vector<std::pair<std::string, std::string>> edges;
  std::map<std::string, std::string> phi;  // optional per-agent override
};

struct ProblemInstance {
  Protocol protocol = Protocol::Utp;
  std::vector<LinkSpec> links;
  std::vector<AgentSpec> agents;
  MessageGraphSpec message_graph;
};

struct Violation {
  std::string code;    // stable identifier, e.g. "N^l>=2"
  std::string detail;  // offending link/agent
  bool structural = false;
};

struct ValidationReport {
  std::vector<Violation> violations;
  bool admissible() const { return violations.empty(); }
  bool structurally_sound() const {
    for (const auto& v : violations)
      if (v.structural) return false;
    return true;
  }
};

// Dense integer indexing over sorted ids. Agents, links and groups are
// referred to by their position in the sorted id vectors everywhere else.
struct IndexSets {
  int num_agents = 0;
  int num_links = 0;
  int num_groups = 0;  // 0 for UTP
  Protocol protocol = Protocol::Utp;

  std::vector<std::string> agent_ids;  // sorted
  std::vector<std::string> link_ids;   // sorted
  std::vector<std::string> group_ids;  // sorted

  std::vector<double> capacity;                       // per link
  std::vector<Valuation> valuation;                   // per agent
  std::vector<std::vector<int>> links_of_agent;       // L_i, sorted
  std::vector<std::vector<int>> agents_on_link;       // N^l, sorted
  std::vector<std::vector<char>> uses;                // [i][l]
  std::vector<int> group_of_agent;                    // k(i); -1 for UTP
  std::vector<std::vector<int>> members_of_group;     // G_k, sorted
  std::vector<std::vector<int>> groups_on_link;       // K^l, sorted
  std::vector<std::vector<std::vector<int>>> group_members_on_link;  // [l][k] -> G_k^l

  int agent_index(const std::string& id) const;  // -1 when unknown
  int link_index(const std::string& id) const;
  bool agent_uses_link(int i, int l) const { return uses[i][l] != 0; }
};

// Checks the standing assumptions and structural invariants; pure.
ValidationReport validate_instance(const ProblemInstance& instance);

// Builds the dense index sets (N^l, K^l, G_k^l, k(i), ...). Throws
// Error(Structural) when the instance is not structurally sound; the
// N^l >= 2 / K^l >= 2 assumptions are reported by validate_instance but
// do not prevent indexing.
IndexSets derive_index_sets(const ProblemInstance& instance);

// JSON instance files; unknown fields are rejected.
ProblemInstance load_instance_json(const std::string& text);
ProblemInstance load_instance_file(const std::string& path);
std::string instance_to_json(const ProblemInstance& instance);

}  // namespace dmd

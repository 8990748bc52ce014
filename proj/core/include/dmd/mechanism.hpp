#pragma once

#include <map>
#include <string>
#include <vector>

#include "dmd/instance.hpp"
#include "dmd/message_graph.hpp"

namespace dmd {

// Message profiles are stored densely in the directory's canonical order:
// agents ascending, neighbors ascending, links ascending. n[i][jpos][l]
// covers every link; q[i] follows quoted_by order.
struct UtpProfile {
  std::vector<double> y;
  std::vector<std::vector<std::vector<double>>> n;
  std::vector<std::vector<double>> q;
  std::vector<std::vector<double>> p;  // over price_links(i)
};

struct MmtpProfile {
  std::vector<double> y;
  std::vector<std::vector<std::vector<double>>> n;
  std::vector<std::vector<double>> q;
  std::vector<std::vector<double>> p1;  // over L_i
  std::vector<std::vector<double>> p2;  // flat over (j in I_i, l in L_j)
  std::vector<std::vector<double>> s;   // over L_i
  std::vector<std::vector<double>> w;   // over w_links(i)
  std::vector<std::vector<double>> z1;  // over C_i
  std::vector<std::vector<double>> z2;  // over C_i
  std::vector<std::vector<double>> a1;  // over L_i
  std::vector<std::vector<double>> a2;  // flat over (j in I_i, l in L_j)
};

struct AgentOutcome {
  std::vector<double> f;  // per link, from this agent's viewpoint
  double r = 0.0;         // +inf when every f is zero
  double xhat = 0.0;
  double tax = 0.0;
  std::map<std::string, double> tax_terms;
  double utility = 0.0;  // -inf when the valuation is undefined at xhat
  bool utility_defined = true;
};

struct Outcome {
  std::vector<AgentOutcome> agents;
  std::vector<double> load;  // protocol-aware per-link load of xhat
};

}  // namespace dmd

#pragma once

#include "dmd/instance.hpp"

namespace dmd {

// Seeded random instance families used by experiments and the test suite.
// Generated instances satisfy the standing connectivity assumptions unless
// violate_connectivity is set, in which case the last link's users induce a
// disconnected subgraph of the message tree.
ProblemInstance random_utp_instance(int n_agents, int n_links, unsigned long long seed,
                                    bool violate_connectivity = false);

// Leader-chain family: group leaders form a chain, members attach to their
// leader, every agent of a selected group shares the leader's route. Link 0
// is used by everyone; other links cover contiguous leader segments.
ProblemInstance random_mmtp_instance(int n_groups, int n_links, unsigned long long seed,
                                     bool violate_connectivity = false);

// Deterministic families with per-agent dimension terms constant in N,
// so total message dimension is exactly affine in the number of agents.
ProblemInstance utp_path_family(int n_agents, int n_links);
ProblemInstance mmtp_pair_family(int n_groups);

}  // namespace dmd

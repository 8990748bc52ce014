#pragma once

#include <string>
#include <vector>

#include "dmd/mechanism.hpp"

namespace dmd {

// Group-rate statistics visible to agent i for one of her links: the group's
// maximum claimed rate and the number of members attaining it. Leaders compute
// them from raw claims; everyone else copies the leader's z quotes.
struct GroupStats {
  double zbar1 = 0.0;
  double zbar2 = 0.0;
  bool own_attains = false;  // does q_{phi(i),i} attain zbar1
};

// Radial-allocation mechanism for max-loaded (per-group) links. Needs a
// leader per (group, link) pair; a LinkCover enables the extended variant
// where relay agents also quote group prices.
class MmtpMechanism {
 public:
  using Profile = MmtpProfile;

  MmtpMechanism(const IndexSets& sets, const NeighborDirectory& dir,
                const LeaderAssignment& leaders, const LinkCover* cover = nullptr);

  const IndexSets& sets() const { return *sets_; }
  const NeighborDirectory& directory() const { return *dir_; }
  const LeaderAssignment& leaders() const { return *leaders_; }
  bool extended() const { return cover_ != nullptr; }

  // L_i, or sorted L_i union extra relay links in the extended variant
  const std::vector<int>& w_links(int i) const { return w_links_[i]; }
  // neighbors whose group-price quote for link l is averaged into w-bar
  const std::vector<int>& w_neighbors(int i, int l) const { return w_neighbors_[i][l]; }

  MmtpProfile zero_profile() const;  // a-messages sit at 1, everything else at 0

  int dim(int i) const;
  int total_dim() const;
  double coord(const MmtpProfile& m, int i, int k) const;
  void set_coord(MmtpProfile& m, int i, int k, double v) const;
  std::string coord_name(int i, int k) const;
  // own-utility Hessian block id: 0 y, 1 n, 2 q, 3 p, 4 s, 5 w, 6 z, 7 a
  int coord_block(int i, int k) const;
  // true for the a-messages, which live on the open positive half-line
  bool coord_strictly_positive(int i, int k) const;

  GroupStats group_stats(const MmtpProfile& m, int i, int l) const;

  // evaluation reads only agent i's and her neighbors' messages
  AgentOutcome evaluate(const MmtpProfile& m, int i) const;
  Outcome evaluate_all(const MmtpProfile& m) const;
  double utility(const MmtpProfile& m, int i) const;

  // closed-form per-agent message counts, derived independently of dim
  std::vector<int> dimension_formula() const;

  std::string profile_to_json(const MmtpProfile& m) const;
  MmtpProfile profile_from_json(const std::string& text) const;

  // relative tolerance for "attains the group maximum"
  static constexpr double kAttainTol = 1e-9;

 private:
  const IndexSets* sets_;
  const NeighborDirectory* dir_;
  const LeaderAssignment* leaders_;
  const LinkCover* cover_;
  std::vector<std::vector<int>> w_links_;
  std::vector<std::vector<std::vector<int>>> w_neighbors_;  // [i][l]
  std::vector<std::vector<int>> p2_offset_;  // [i][jpos] into the flat p2/a2 rows

  double own_term(const MmtpProfile& m, int i, const GroupStats& gs) const;
  void allocation(const MmtpProfile& m, int i, const std::vector<GroupStats>& gs,
                  AgentOutcome& out) const;
};

}  // namespace dmd

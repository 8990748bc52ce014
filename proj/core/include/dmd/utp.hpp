#pragma once

#include <string>
#include <vector>

#include "dmd/mechanism.hpp"

namespace dmd {

// Radial-allocation mechanism for sum-loaded links. Passing a LinkCover
// enables the extended variant where relay agents on each link's covering
// subtree also quote prices.
class UtpMechanism {
 public:
  using Profile = UtpProfile;

  UtpMechanism(const IndexSets& sets, const NeighborDirectory& dir,
               const LinkCover* cover = nullptr);

  const IndexSets& sets() const { return *sets_; }
  const NeighborDirectory& directory() const { return *dir_; }
  bool extended() const { return cover_ != nullptr; }

  // L_i, or sorted L_i union extra relay links in the extended variant
  const std::vector<int>& price_links(int i) const { return price_links_[i]; }
  // neighbors whose price quote for link l is averaged into p-bar
  const std::vector<int>& price_neighbors(int i, int l) const {
    return price_neighbors_[i][l];
  }

  UtpProfile zero_profile() const;

  int dim(int i) const;
  int total_dim() const;
  double coord(const UtpProfile& m, int i, int k) const;
  void set_coord(UtpProfile& m, int i, int k, double v) const;
  std::string coord_name(int i, int k) const;
  // every coordinate lives on the closed half-line
  bool coord_strictly_positive(int, int) const { return false; }

  // evaluation reads only agent i's and her neighbors' messages
  AgentOutcome evaluate(const UtpProfile& m, int i) const;
  Outcome evaluate_all(const UtpProfile& m) const;
  double utility(const UtpProfile& m, int i) const;

  // closed-form per-agent message counts (identical to dim, derived
  // independently from the directory for cross-checking)
  std::vector<int> dimension_formula() const;

  std::string profile_to_json(const UtpProfile& m) const;
  UtpProfile profile_from_json(const std::string& text) const;

 private:
  const IndexSets* sets_;
  const NeighborDirectory* dir_;
  const LinkCover* cover_;
  std::vector<std::vector<int>> price_links_;
  std::vector<std::vector<std::vector<int>>> price_neighbors_;  // [i][l]

  void allocation(const UtpProfile& m, int i, AgentOutcome& out) const;
};

}  // namespace dmd

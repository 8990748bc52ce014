#pragma once

#include <string>
#include <vector>

#include "dmd/mmtp.hpp"
#include "dmd/oracle.hpp"
#include "dmd/utp.hpp"

namespace dmd {

struct Audit {
  std::string name;
  double residual = 0.0;
  bool pass = false;
  bool vacuous = false;  // criterion holds trivially (e.g. v(0) = -inf)
};

struct NeCertificate {
  std::vector<double> agent_residual;  // sup-norm of the projected own-gradient
  double max_residual = 0.0;
  std::vector<Audit> audits;
  double efficiency_gap = 0.0;  // relative welfare gap vs the central optimum
  bool all_pass() const;
};

std::string certificate_to_json(const NeCertificate& cert);

// Equilibrium profile at demand scale k > 0: demands are k times the optimal
// rates, prices equal the central duals, all consensus messages agree.
// The solution must carry a certified KKT residual.
UtpProfile construct_ne(const UtpMechanism& mech, const CentralSolution& sol, double scale = 1.0);
MmtpProfile construct_ne(const MmtpMechanism& mech, const CentralSolution& sol,
                         double scale = 1.0);

// Per-agent sup-norm of the own-utility gradient, central differences with
// step 1e-6 * max(1, |coordinate|); coordinates pinned at zero only count
// improving (positive) one-sided derivatives.
template <class Mech>
std::vector<double> stationarity_residuals(const Mech& mech, const typename Mech::Profile& m);

// Single-agent best response, closed form per coordinate block. Throws
// Error(Unbounded) when the effective price on the agent is zero.
UtpProfile best_response(const UtpMechanism& mech, const UtpProfile& m, int i);
MmtpProfile best_response(const MmtpMechanism& mech, const MmtpProfile& m, int i);

enum class UpdateOrder { RoundRobin, Random };

struct DynamicsStep {
  int round = 0;
  int agent = 0;
  double utility_before = 0.0;
  double utility_after = 0.0;
  double change = 0.0;  // sup-norm change of the acting agent's messages
  double gap = -1.0;    // sup-norm distance of the allocation to the reference optimum
  std::vector<double> load;
};

template <class Mech>
struct DynamicsTrace {
  typename Mech::Profile final_profile;
  std::vector<DynamicsStep> steps;
  int rounds_run = 0;
  bool converged = false;
};

// Sequential best-response dynamics; stops early when a full round moves no
// coordinate by more than 1e-10. A reference solution, when given, is only
// used to report each step's allocation gap.
template <class Mech>
DynamicsTrace<Mech> run_dynamics(const Mech& mech, const typename Mech::Profile& start,
                                 int max_rounds, UpdateOrder order, unsigned long long seed,
                                 const CentralSolution* reference = nullptr);

template <class Mech>
std::string dynamics_csv(const Mech& mech, const DynamicsTrace<Mech>& trace);

// Full certificate: stationarity residuals, consensus/feasibility/price
// audits against the central solution, and the welfare gap.
NeCertificate audit_ne(const UtpMechanism& mech, const UtpProfile& m, const CentralSolution& sol,
                       double tol);
NeCertificate audit_ne(const MmtpMechanism& mech, const MmtpProfile& m,
                       const CentralSolution& sol, double tol);

struct FuzzReport {
  int trials = 0;
  int invalid = 0;         // deviations rejected by the mechanism's domain
  double max_gain = 0.0;   // best utility improvement found over the profile
  int witness_agent = -1;
  std::string witness;     // description of the most profitable deviation
};

// Random unilateral deviations of relative size <= radius around m.
template <class Mech>
FuzzReport deviation_fuzz(const Mech& mech, const typename Mech::Profile& m, int trials,
                          double radius, unsigned long long seed);

}  // namespace dmd

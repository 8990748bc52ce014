#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <string>

#include "dmd/equilibrium.hpp"
#include "dmd/error.hpp"
#include "dmd/oracle.hpp"
#include "test_common.hpp"

using namespace dmd;

namespace {

struct UtpRig {
  testutil::Context ctx;
  UtpMechanism mech;
  CentralSolution sol;

  explicit UtpRig(const ProblemInstance& inst)
      : ctx(testutil::make_context(inst)), mech(ctx.sets, ctx.dir), sol(solve_utp(ctx.sets)) {}
};

struct MmtpRig {
  testutil::Context ctx;
  MmtpMechanism mech;
  CentralSolution sol;

  explicit MmtpRig(const ProblemInstance& inst)
      : ctx(testutil::make_context(inst)),
        mech(ctx.sets, ctx.dir, ctx.leaders),
        sol(solve_mmtp(ctx.sets)) {}
};

const Audit* find_audit(const NeCertificate& cert, const std::string& name) {
  for (const auto& a : cert.audits)
    if (a.name == name) return &a;
  return nullptr;
}

}  // namespace

TEST_CASE("the constructed profile is stationary for every agent") {
  UtpRig rig(testutil::golden_instance());
  const auto m = construct_ne(rig.mech, rig.sol);
  for (double r : stationarity_residuals(rig.mech, m)) CHECK(r <= 1e-8);
}

TEST_CASE("demand scale changes the messages but not the outcome") {
  UtpRig rig(testutil::golden_instance());
  const auto m1 = construct_ne(rig.mech, rig.sol, 1.0);
  const auto m10 = construct_ne(rig.mech, rig.sol, 10.0);
  CHECK(m10.y[0] == doctest::Approx(10.0 * m1.y[0]).epsilon(1e-12));
  const auto o1 = rig.mech.evaluate_all(m1);
  const auto o10 = rig.mech.evaluate_all(m10);
  for (int i = 0; i < 3; ++i) {
    CHECK(o10.agents[i].xhat == doctest::Approx(o1.agents[i].xhat).epsilon(1e-10));
    CHECK(o10.agents[i].tax == doctest::Approx(o1.agents[i].tax).epsilon(1e-9));
  }
  for (double r : stationarity_residuals(rig.mech, m10)) CHECK(r <= 1e-8);
}

TEST_CASE("a bumped price quote shows up as its own gradient") {
  UtpRig rig(testutil::golden_instance());
  auto m = construct_ne(rig.mech, rig.sol);
  m.p[1][0] = 6.5;  // consensus sits at 6; d/dp (p - pbar)^2 = 2 * 0.5
  const auto res = stationarity_residuals(rig.mech, m);
  CHECK(res[1] == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("an off-optimum demand is not stationary") {
  UtpRig rig(testutil::golden_instance());
  auto m = construct_ne(rig.mech, rig.sol);
  m.y[0] += 0.1;
  CHECK(stationarity_residuals(rig.mech, m)[0] > 1e-2);
}

TEST_CASE("construction refuses an uncertified solution") {
  UtpRig rig(testutil::golden_instance());
  auto bad = rig.sol;
  bad.kkt_residual = 1e-3;
  CHECK_THROWS_AS(construct_ne(rig.mech, bad), Error);
}

TEST_CASE("best responses fix the constructed profile") {
  UtpRig rig(testutil::golden_instance());
  const auto m = construct_ne(rig.mech, rig.sol);
  for (int i = 0; i < 3; ++i) {
    const auto br = best_response(rig.mech, m, i);
    for (int k = 0; k < rig.mech.dim(i); ++k)
      CHECK(rig.mech.coord(br, i, k) == doctest::Approx(rig.mech.coord(m, i, k)).epsilon(1e-9));
  }
}

TEST_CASE("a best response zeroes the agent's own gradient") {
  UtpRig rig(testutil::golden_instance());
  auto m = construct_ne(rig.mech, rig.sol);
  m.p[0][0] = 5.0;
  m.y[0] *= 1.3;
  const auto br = best_response(rig.mech, m, 0);
  CHECK(rig.mech.utility(br, 0) >= rig.mech.utility(m, 0) - 1e-12);
  CHECK(stationarity_residuals(rig.mech, br)[0] <= 1e-6);
}

TEST_CASE("mmtp best responses fix the constructed profile") {
  MmtpRig rig(testutil::mmtp_symmetric_instance());
  const auto m = construct_ne(rig.mech, rig.sol);
  for (double r : stationarity_residuals(rig.mech, m)) CHECK(r <= 1e-7);
  for (int i = 0; i < 4; ++i) {
    const auto br = best_response(rig.mech, m, i);
    for (int k = 0; k < rig.mech.dim(i); ++k)
      CHECK(rig.mech.coord(br, i, k) == doctest::Approx(rig.mech.coord(m, i, k)).epsilon(1e-7));
  }
}

TEST_CASE("dynamics started at the equilibrium stop immediately") {
  UtpRig rig(testutil::golden_instance());
  const auto m = construct_ne(rig.mech, rig.sol);
  const auto trace = run_dynamics(rig.mech, m, 50, UpdateOrder::RoundRobin, 1, &rig.sol);
  CHECK(trace.converged);
  CHECK(trace.rounds_run == 1);
  for (const auto& s : trace.steps) {
    CHECK(s.change <= 1e-10);
    CHECK(s.gap <= 1e-6);
  }
}

TEST_CASE("a perturbed price spreads by averaging but dynamics stay sane") {
  // best-response dynamics carry no convergence guarantee: on a single link
  // the radial projection keeps r*f = c, so the price level is a free
  // consensus direction and the perturbation is averaged, not corrected.
  UtpRig rig(testutil::golden_instance());
  auto m = construct_ne(rig.mech, rig.sol);
  m.p[1][0] += 0.1;
  const auto trace = run_dynamics(rig.mech, m, 100, UpdateOrder::RoundRobin, 1, &rig.sol);
  for (const auto& s : trace.steps) {
    CHECK(s.utility_after >= s.utility_before - 1e-10);
    CHECK(s.gap <= 0.1);  // the allocation stays near the optimum
  }
  // prices settle inside the convex hull of the initial quotes
  for (int i = 0; i < 3; ++i) {
    CHECK(trace.final_profile.p[i][0] >= 6.0 - 1e-9);
    CHECK(trace.final_profile.p[i][0] <= 6.1 + 1e-9);
  }
}

TEST_CASE("each acting agent never loses utility, from any start") {
  UtpRig rig(testutil::golden_instance());
  auto m = construct_ne(rig.mech, rig.sol);
  // roughen the profile deterministically
  m.y[0] *= 1.7;
  m.y[2] *= 0.4;
  m.p[0][0] = 2.0;
  m.n[1][0][0] = 0.1;
  for (const auto order : {UpdateOrder::RoundRobin, UpdateOrder::Random}) {
    const auto trace = run_dynamics(rig.mech, m, 30, order, 99, &rig.sol);
    for (const auto& s : trace.steps) CHECK(s.utility_after >= s.utility_before - 1e-10);
  }
}

TEST_CASE("dynamics are deterministic for a fixed seed") {
  MmtpRig rig(testutil::mmtp_asymmetric_instance());
  auto m = construct_ne(rig.mech, rig.sol);
  m.y[0] *= 1.5;
  m.w[1][0] += 0.2;
  const auto t1 = run_dynamics(rig.mech, m, 20, UpdateOrder::Random, 7, &rig.sol);
  const auto t2 = run_dynamics(rig.mech, m, 20, UpdateOrder::Random, 7, &rig.sol);
  REQUIRE(t1.steps.size() == t2.steps.size());
  for (size_t s = 0; s < t1.steps.size(); ++s) {
    CHECK(t1.steps[s].agent == t2.steps[s].agent);
    CHECK(t1.steps[s].utility_after == t2.steps[s].utility_after);
  }
  const auto csv = dynamics_csv(rig.mech, t1);
  CHECK(csv.rfind("round,agent,utility_before,utility_after,change,gap", 0) == 0);
  CHECK(csv == dynamics_csv(rig.mech, t2));
}

TEST_CASE("the full certificate passes at the worked equilibrium") {
  UtpRig rig(testutil::golden_instance());
  const auto m = construct_ne(rig.mech, rig.sol);
  const auto cert = audit_ne(rig.mech, m, rig.sol, 1e-6);
  CHECK(cert.all_pass());
  CHECK(cert.max_residual <= 1e-6);
  CHECK(cert.efficiency_gap <= 1e-8);
  // taxes sum to the capacity payment 6 * 1
  const auto out = rig.mech.evaluate_all(m);
  double total_tax = 0.0;
  for (const auto& a : out.agents) total_tax += a.tax;
  CHECK(total_tax == doctest::Approx(6.0).epsilon(1e-8));
  // log valuations make participation unavoidable, so rationality is vacuous
  const auto* ir = find_audit(cert, "individual-rationality");
  REQUIRE(ir != nullptr);
  CHECK(ir->vacuous);
  const auto json = certificate_to_json(cert);
  CHECK(json.find("audits") != std::string::npos);
  CHECK(json.find("efficiency_gap") != std::string::npos);
}

TEST_CASE("a broken subtree sum trips exactly the consensus audit") {
  UtpRig rig(testutil::golden_instance());
  auto m = construct_ne(rig.mech, rig.sol);
  m.n[0][1][0] += 0.05;
  const auto cert = audit_ne(rig.mech, m, rig.sol, 1e-6);
  CHECK_FALSE(cert.all_pass());
  const auto* sc = find_audit(cert, "summary-consensus");
  REQUIRE(sc != nullptr);
  CHECK_FALSE(sc->pass);
}

TEST_CASE("the mmtp certificate passes with the group audits included") {
  MmtpRig rig(testutil::mmtp_asymmetric_instance());
  const auto m = construct_ne(rig.mech, rig.sol);
  const auto cert = audit_ne(rig.mech, m, rig.sol, 1e-6);
  CHECK(cert.all_pass());
  for (const char* name : {"group-demand-consensus", "group-max-consensus",
                           "free-ride-slackness", "group-price-consensus",
                           "price-decomposition"})
    CHECK(find_audit(cert, name) != nullptr);
}

TEST_CASE("random deviations never beat the equilibrium") {
  UtpRig rig(testutil::golden_instance());
  const auto m = construct_ne(rig.mech, rig.sol);
  const auto rep = deviation_fuzz(rig.mech, m, 1000, 0.5, 2024);
  CHECK(rep.trials == 1000);
  CHECK(rep.max_gain <= 1e-7);
  CHECK(deviation_fuzz(rig.mech, m, 100, 0.0, 1).max_gain == 0.0);
}

TEST_CASE("fuzzing a broken profile finds a profitable deviation and names it") {
  UtpRig rig(testutil::golden_instance());
  auto m = construct_ne(rig.mech, rig.sol);
  m.y[0] *= 0.5;  // a1 under-demands; raising y is profitable
  const auto rep = deviation_fuzz(rig.mech, m, 500, 0.5, 11);
  CHECK(rep.max_gain > 1e-6);
  CHECK(rep.witness_agent >= 0);
  CHECK_FALSE(rep.witness.empty());
}

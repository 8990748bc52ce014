// Command-line front end: loads instances, orchestrates the solve ->
// construction -> verification -> audit pipelines, and emits reports.
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "dmd/equilibrium.hpp"
#include "dmd/error.hpp"
#include "dmd/generator.hpp"
#include "dmd/instance.hpp"
#include "dmd/message_graph.hpp"
#include "dmd/mmtp.hpp"
#include "dmd/oracle.hpp"
#include "dmd/utp.hpp"

namespace {

using nlohmann::json;

constexpr const char* kToolVersion = "1.0.0";

// exit codes (documented in the README):
//   2 parse / malformed input, 3 violated standing assumption or bad
//   configuration, 4 numerical failure, 5 certificate failure
constexpr int kExitParse = 2;
constexpr int kExitAssumption = 3;
constexpr int kExitNumeric = 4;
constexpr int kExitCertificate = 5;

bool log_enabled() {
  const char* v = std::getenv("DMD_LOG");
  return v != nullptr && *v != '\0' && std::string(v) != "0";
}

void log_line(const std::string& msg) {
  if (log_enabled()) std::cerr << "[dmd] " << msg << "\n";
}

int exit_code_for(const dmd::Error& e) {
  switch (e.kind()) {
    case dmd::ErrorKind::Parse:
    case dmd::ErrorKind::Structural:
    case dmd::ErrorKind::Shape:
      return kExitParse;
    case dmd::ErrorKind::Assumption:
    case dmd::ErrorKind::Config:
      return kExitAssumption;
    default:
      return kExitNumeric;
  }
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw dmd::Error(dmd::ErrorKind::Parse, "cannot open file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw dmd::Error(dmd::ErrorKind::Config, "cannot write file: " + path);
  out << text;
}

std::string fnv1a_digest(const std::string& bytes) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

struct CommonFlags {
  std::string instance_path;
  std::string protocol_override;  // "", "utp" or "mmtp"
  double tol = 1e-6;
  bool extended = false;
  unsigned long long seed = 0;
  std::string out_path;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--instance", f.instance_path, "instance JSON file")->required();
  cmd->add_option("--protocol", f.protocol_override, "override the instance protocol")
      ->check(CLI::IsMember({"utp", "mmtp"}));
  cmd->add_option("--tol", f.tol, "audit tolerance");
  cmd->add_flag("--extended", f.extended, "enable the relay (link-cover) variant");
  cmd->add_option("--seed", f.seed, "random seed");
  cmd->add_option("--out", f.out_path, "output file (defaults to stdout)");
}

struct LoadedInstance {
  dmd::ProblemInstance instance;
  std::string digest;
  dmd::IndexSets sets;
  dmd::MessageTree tree;
  dmd::NeighborDirectory dir;
  dmd::LeaderAssignment leaders;           // MMTP only
  std::optional<dmd::LinkCover> cover;     // when --extended
};

// Loads, validates, indexes and wires up the message structures; throws
// dmd::Error on any violation (Assumption kind when --extended would help).
LoadedInstance load_pipeline(const CommonFlags& f) {
  LoadedInstance L;
  const std::string text = read_file(f.instance_path);
  L.digest = fnv1a_digest(text);
  L.instance = dmd::load_instance_json(text);
  if (f.protocol_override == "utp") L.instance.protocol = dmd::Protocol::Utp;
  if (f.protocol_override == "mmtp") L.instance.protocol = dmd::Protocol::Mmtp;

  const auto report = dmd::validate_instance(L.instance);
  if (!report.structurally_sound()) {
    for (const auto& v : report.violations)
      if (v.structural)
        throw dmd::Error(dmd::ErrorKind::Structural, v.code + ": " + v.detail);
  }
  if (!report.admissible()) {
    const auto& v = report.violations.front();
    throw dmd::Error(dmd::ErrorKind::Assumption, v.code + ": " + v.detail);
  }

  L.sets = dmd::derive_index_sets(L.instance);
  L.tree = dmd::build_message_tree(L.instance, L.sets);

  std::optional<std::vector<int>> phi_override;
  if (!L.instance.message_graph.phi.empty()) {
    // translated inside build_neighbor_directory from the spec map
    std::vector<int> phi(L.sets.num_agents, -1);
    for (const auto& [a, b] : L.instance.message_graph.phi) {
      const int i = L.sets.agent_index(a), j = L.sets.agent_index(b);
      if (i < 0 || j < 0)
        throw dmd::Error(dmd::ErrorKind::Structural, "phi names unknown agent: " + a);
      phi[i] = j;
    }
    phi_override = phi;
  }
  L.dir = dmd::build_neighbor_directory(L.tree, L.sets, phi_override);

  const auto connected = dmd::check_assumption1(L.tree, L.sets);
  bool all_connected = true;
  for (bool c : connected) all_connected = all_connected && c;
  if (!all_connected && !f.extended) {
    std::string bad;
    for (size_t l = 0; l < connected.size(); ++l)
      if (!connected[l]) bad += (bad.empty() ? "" : ", ") + L.sets.link_ids[l];
    throw dmd::Error(dmd::ErrorKind::Assumption,
                     "users of link(s) " + bad +
                         " do not induce a connected subtree; rerun with --extended");
  }
  if (f.extended) L.cover = dmd::build_link_covers(L.tree, L.sets);

  if (L.sets.protocol == dmd::Protocol::Mmtp) {
    L.leaders = dmd::assign_group_leaders(L.tree, L.sets);
    if (!L.leaders.ok()) {
      const auto [k, l] = L.leaders.violations.front();
      throw dmd::Error(dmd::ErrorKind::Assumption,
                       "no member of group " + L.sets.group_ids[k] + " on link " +
                           L.sets.link_ids[l] + " is adjacent to all other members");
    }
  }
  return L;
}

json solution_to_json(const dmd::IndexSets& sets, const dmd::CentralSolution& sol) {
  json j;
  json x = json::object(), lam = json::object();
  for (int i = 0; i < sets.num_agents; ++i) x[sets.agent_ids[i]] = sol.x[i];
  for (int l = 0; l < sets.num_links; ++l) lam[sets.link_ids[l]] = sol.lambda[l];
  j["x"] = x;
  j["lambda"] = lam;
  if (sets.protocol == dmd::Protocol::Mmtp) {
    json b = json::object(), mu = json::object();
    for (int l = 0; l < sets.num_links; ++l) {
      json row = json::object();
      for (size_t kp = 0; kp < sets.groups_on_link[l].size(); ++kp)
        row[sets.group_ids[sets.groups_on_link[l][kp]]] = sol.b[l][kp];
      b[sets.link_ids[l]] = row;
    }
    for (int i = 0; i < sets.num_agents; ++i) {
      json row = json::object();
      for (size_t lp = 0; lp < sets.links_of_agent[i].size(); ++lp)
        row[sets.link_ids[sets.links_of_agent[i][lp]]] = sol.mu[i][lp];
      mu[sets.agent_ids[i]] = row;
    }
    j["b"] = b;
    j["mu"] = mu;
  }
  j["objective"] = sol.objective;
  j["kkt_residual"] = sol.kkt_residual;
  return j;
}

json base_report(const std::string& command, const LoadedInstance& L,
                 const CommonFlags& f, double seconds) {
  json j;
  j["tool_version"] = kToolVersion;
  j["command"] = command;
  j["instance_digest"] = L.digest;
  j["protocol"] = L.sets.protocol == dmd::Protocol::Utp ? "utp" : "mmtp";
  j["extended"] = f.extended;
  j["seed"] = f.seed;
  j["timing_seconds"] = seconds;
  return j;
}

void emit(const std::string& out_path, const std::string& text) {
  if (out_path.empty())
    std::cout << text << "\n";
  else
    write_file(out_path, text + "\n");
}

dmd::CentralSolution solve_central(const LoadedInstance& L) {
  log_line("solving the capacity-constrained welfare problem");
  return L.sets.protocol == dmd::Protocol::Utp ? dmd::solve_utp(L.sets)
                                               : dmd::solve_mmtp(L.sets);
}

// ---------------------------------------------------------------- solve ----

int cmd_solve(const CommonFlags& f) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto L = load_pipeline(f);
  const auto sol = solve_central(L);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  json report = base_report("solve", L, f, secs);
  report["solution"] = solution_to_json(L.sets, sol);
  emit(f.out_path, report.dump(2));
  return 0;
}

// ------------------------------------------------------------------- ne ----

template <class Mech>
int run_ne(const Mech& mech, const LoadedInstance& L, const CommonFlags& f, double scale,
           int fuzz_trials, const std::chrono::steady_clock::time_point& t0) {
  const auto sol = solve_central(L);
  log_line("constructing the equilibrium profile");
  const auto profile = dmd::construct_ne(mech, sol, scale);
  log_line("auditing the profile");
  const auto cert = dmd::audit_ne(mech, profile, sol, f.tol);

  json report = base_report("ne", L, f, 0.0);
  report["scale"] = scale;
  report["solution"] = solution_to_json(L.sets, sol);
  report["certificate"] = json::parse(dmd::certificate_to_json(cert));

  const auto outcome = mech.evaluate_all(profile);
  json agents = json::object();
  for (int i = 0; i < L.sets.num_agents; ++i) {
    agents[L.sets.agent_ids[i]] = {{"allocation", outcome.agents[i].xhat},
                                   {"tax", outcome.agents[i].tax},
                                   {"utility", outcome.agents[i].utility}};
  }
  report["outcome"] = agents;

  if (fuzz_trials > 0) {
    log_line("fuzzing unilateral deviations");
    const auto fr = dmd::deviation_fuzz(mech, profile, fuzz_trials, 0.5, f.seed);
    report["fuzz"] = {{"trials", fr.trials},
                      {"invalid", fr.invalid},
                      {"max_gain", fr.max_gain},
                      {"witness_agent",
                       fr.witness_agent >= 0 ? L.sets.agent_ids[fr.witness_agent] : ""},
                      {"witness", fr.witness}};
  }
  report["timing_seconds"] =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  if (!f.out_path.empty()) {
    write_file(f.out_path, mech.profile_to_json(profile) + "\n");
    write_file(f.out_path + ".cert.json", dmd::certificate_to_json(cert) + "\n");
  }
  std::cout << report.dump(2) << "\n";

  for (const auto& a : cert.audits) {
    if (!a.pass) {
      std::cerr << "certificate failure: audit '" << a.name << "' has residual "
                << a.residual << " > tolerance " << f.tol << "\n";
      return kExitCertificate;
    }
  }
  if (cert.max_residual > f.tol) {
    std::cerr << "certificate failure: best-response stationarity residual "
              << cert.max_residual << " > tolerance " << f.tol << "\n";
    return kExitCertificate;
  }
  return 0;
}

int cmd_ne(const CommonFlags& f, double scale, int fuzz_trials) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto L = load_pipeline(f);
  const dmd::LinkCover* cover = L.cover ? &*L.cover : nullptr;
  if (L.sets.protocol == dmd::Protocol::Utp) {
    dmd::UtpMechanism mech(L.sets, L.dir, cover);
    return run_ne(mech, L, f, scale, fuzz_trials, t0);
  }
  dmd::MmtpMechanism mech(L.sets, L.dir, L.leaders, cover);
  return run_ne(mech, L, f, scale, fuzz_trials, t0);
}

// ------------------------------------------------------------- dynamics ----

template <class Mech>
typename Mech::Profile initial_profile(const Mech& mech, const std::string& init,
                                       const dmd::CentralSolution& sol, double scale,
                                       unsigned long long seed) {
  if (init == "ne") return dmd::construct_ne(mech, sol, scale);
  if (init == "zero") return mech.zero_profile();
  auto m = mech.zero_profile();
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ull);
  std::uniform_real_distribution<double> u(0.0, 1.0), upos(0.1, 1.0);
  const int n = mech.sets().num_agents;
  for (int i = 0; i < n; ++i)
    for (int k = 0; k < mech.dim(i); ++k)
      mech.set_coord(m, i, k, mech.coord_strictly_positive(i, k) ? upos(rng) : u(rng));
  return m;
}

template <class Mech>
int run_dynamics_cmd(const Mech& mech, const LoadedInstance& L, const CommonFlags& f,
                     int rounds, dmd::UpdateOrder order, const std::string& init,
                     double scale, const std::string& trace_path,
                     const std::chrono::steady_clock::time_point& t0) {
  const auto sol = solve_central(L);
  const auto start = initial_profile(mech, init, sol, scale, f.seed);
  log_line("running sequential best-response dynamics");
  const auto trace = dmd::run_dynamics(mech, start, rounds, order, f.seed, &sol);
  const std::string csv = dmd::dynamics_csv(mech, trace);

  if (trace_path.empty()) {
    std::cout << csv;
  } else {
    write_file(trace_path, csv);
    json report = base_report("dynamics", L, f, 0.0);
    report["rounds_run"] = trace.rounds_run;
    report["converged"] = trace.converged;
    report["steps"] = trace.steps.size();
    report["trace_csv"] = trace_path;
    report["timing_seconds"] =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::cout << report.dump(2) << "\n";
  }
  if (!f.out_path.empty())
    write_file(f.out_path, mech.profile_to_json(trace.final_profile) + "\n");
  return 0;
}

int cmd_dynamics(const CommonFlags& f, int rounds, const std::string& order_name,
                 const std::string& init, double scale, const std::string& trace_path) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto L = load_pipeline(f);
  const auto order =
      order_name == "random" ? dmd::UpdateOrder::Random : dmd::UpdateOrder::RoundRobin;
  const dmd::LinkCover* cover = L.cover ? &*L.cover : nullptr;
  if (L.sets.protocol == dmd::Protocol::Utp) {
    dmd::UtpMechanism mech(L.sets, L.dir, cover);
    return run_dynamics_cmd(mech, L, f, rounds, order, init, scale, trace_path, t0);
  }
  dmd::MmtpMechanism mech(L.sets, L.dir, L.leaders, cover);
  return run_dynamics_cmd(mech, L, f, rounds, order, init, scale, trace_path, t0);
}

// ----------------------------------------------------------------- dims ----

template <class Mech>
int run_dims(const Mech& mech, const LoadedInstance& L, const CommonFlags& f) {
  const auto formula = mech.dimension_formula();
  json per_agent = json::object();
  int total = 0, total_formula = 0;
  bool consistent = true;
  for (int i = 0; i < L.sets.num_agents; ++i) {
    const int d = mech.dim(i);
    per_agent[L.sets.agent_ids[i]] = {{"dim", d}, {"formula", formula[i]}};
    total += d;
    total_formula += formula[i];
    consistent = consistent && d == formula[i];
  }
  json report = base_report("dims", L, f, 0.0);
  report["per_agent"] = per_agent;
  report["total"] = total;
  report["total_formula"] = total_formula;
  report["formula_consistent"] = consistent;
  emit(f.out_path, report.dump(2));
  if (!consistent) {
    std::cerr << "dimension formula disagrees with the enumerated layout\n";
    return kExitNumeric;
  }
  return 0;
}

int cmd_dims(const CommonFlags& f) {
  const auto L = load_pipeline(f);
  const dmd::LinkCover* cover = L.cover ? &*L.cover : nullptr;
  if (L.sets.protocol == dmd::Protocol::Utp) {
    dmd::UtpMechanism mech(L.sets, L.dir, cover);
    return run_dims(mech, L, f);
  }
  dmd::MmtpMechanism mech(L.sets, L.dir, L.leaders, cover);
  return run_dims(mech, L, f);
}

// ------------------------------------------------------------- validate ----

int cmd_validate(const CommonFlags& f) {
  const std::string text = read_file(f.instance_path);
  auto inst = dmd::load_instance_json(text);
  if (f.protocol_override == "utp") inst.protocol = dmd::Protocol::Utp;
  if (f.protocol_override == "mmtp") inst.protocol = dmd::Protocol::Mmtp;
  const auto report = dmd::validate_instance(inst);

  json j;
  j["tool_version"] = kToolVersion;
  j["command"] = "validate";
  j["instance_digest"] = fnv1a_digest(text);
  j["admissible"] = report.admissible();
  json vs = json::array();
  for (const auto& v : report.violations)
    vs.push_back({{"code", v.code}, {"detail", v.detail}, {"structural", v.structural}});
  j["violations"] = vs;

  bool assumption1_ok = true;
  if (report.structurally_sound()) {
    const auto sets = dmd::derive_index_sets(inst);
    const auto tree = dmd::build_message_tree(inst, sets);
    const auto connected = dmd::check_assumption1(tree, sets);
    json per_link = json::object();
    for (size_t l = 0; l < connected.size(); ++l) {
      per_link[sets.link_ids[l]] = static_cast<bool>(connected[l]);
      assumption1_ok = assumption1_ok && connected[l];
    }
    j["link_connectivity"] = per_link;
  }
  emit(f.out_path, j.dump(2));

  if (!report.structurally_sound()) return kExitParse;
  if (!report.admissible() || !assumption1_ok) return kExitAssumption;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"network rate-allocation mechanisms: solver, equilibrium and audit tool"};
  app.require_subcommand(1);

  CommonFlags f_solve, f_ne, f_dyn, f_dims, f_val;
  double scale = 1.0, dyn_scale = 1.0;
  int fuzz_trials = 0, rounds = 50;
  std::string order_name = "roundrobin", init = "ne", trace_path;

  auto* solve = app.add_subcommand("solve", "solve the welfare problem");
  add_common(solve, f_solve);

  auto* ne = app.add_subcommand("ne", "construct and certify an equilibrium");
  add_common(ne, f_ne);
  ne->add_option("--scale", scale, "demand scale factor (> 0)");
  ne->add_option("--fuzz", fuzz_trials, "random unilateral deviations to try");

  auto* dyn = app.add_subcommand("dynamics", "sequential best-response dynamics");
  add_common(dyn, f_dyn);
  dyn->add_option("--rounds", rounds, "maximum rounds");
  dyn->add_option("--order", order_name, "agent update order")
      ->check(CLI::IsMember({"roundrobin", "random"}));
  dyn->add_option("--init", init, "starting profile")
      ->check(CLI::IsMember({"ne", "zero", "random"}));
  dyn->add_option("--scale", dyn_scale, "demand scale for --init ne");
  dyn->add_option("--trace-csv", trace_path, "write the CSV trace here");

  auto* dims = app.add_subcommand("dims", "per-agent message dimensions");
  add_common(dims, f_dims);

  auto* val = app.add_subcommand("validate", "check instance admissibility");
  add_common(val, f_val);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : kExitParse;
  }

  try {
    if (solve->parsed()) return cmd_solve(f_solve);
    if (ne->parsed()) return cmd_ne(f_ne, scale, fuzz_trials);
    if (dyn->parsed())
      return cmd_dynamics(f_dyn, rounds, order_name, init, dyn_scale, trace_path);
    if (dims->parsed()) return cmd_dims(f_dims);
    if (val->parsed()) return cmd_validate(f_val);
  } catch (const dmd::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumeric;
  }
  return 0;
}

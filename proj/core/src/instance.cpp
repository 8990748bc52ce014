#include "dmd/instance.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "dmd/error.hpp"
#include "json.hpp"

namespace dmd {

namespace {

using nlohmann::json;

void add(ValidationReport& r, std::string code, std::string detail, bool structural) {
  r.violations.push_back({std::move(code), std::move(detail), structural});
}

void reject_unknown_fields(const json& obj, const std::set<std::string>& allowed,
                           const std::string& where) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    if (!allowed.count(it.key())) {
      throw Error(ErrorKind::Parse, "unknown field '" + it.key() + "' in " + where);
    }
  }
}

}  // namespace

int IndexSets::agent_index(const std::string& id) const {
  auto it = std::lower_bound(agent_ids.begin(), agent_ids.end(), id);
  if (it == agent_ids.end() || *it != id) return -1;
  return static_cast<int>(it - agent_ids.begin());
}

int IndexSets::link_index(const std::string& id) const {
  auto it = std::lower_bound(link_ids.begin(), link_ids.end(), id);
  if (it == link_ids.end() || *it != id) return -1;
  return static_cast<int>(it - link_ids.begin());
}

ValidationReport validate_instance(const ProblemInstance& instance) {
  ValidationReport report;

  std::set<std::string> link_ids;
  for (const auto& l : instance.links) {
    if (!link_ids.insert(l.id).second) {
      add(report, "unique-link-id", "duplicate link id '" + l.id + "'", true);
    }
    if (!(l.capacity > 0.0)) {
      add(report, "capacity>0", "link '" + l.id + "' has non-positive capacity", true);
    }
  }

  std::set<std::string> agent_ids;
  for (const auto& a : instance.agents) {
    if (!agent_ids.insert(a.id).second) {
      add(report, "unique-agent-id", "duplicate agent id '" + a.id + "'", true);
    }
    if (a.links.empty()) {
      add(report, "route-nonempty", "agent '" + a.id + "' has an empty route", true);
    }
    std::set<std::string> seen;
    for (const auto& l : a.links) {
      if (!link_ids.count(l)) {
        add(report, "route-subset", "agent '" + a.id + "' routes over unknown link '" + l + "'", true);
      }
      if (!seen.insert(l).second) {
        add(report, "route-distinct", "agent '" + a.id + "' lists link '" + l + "' twice", true);
      }
    }
    if (instance.protocol == Protocol::Mmtp && a.group.empty()) {
      add(report, "group-required", "agent '" + a.id + "' has no group (mmtp)", true);
    }
    if (instance.protocol == Protocol::Utp && !a.group.empty()) {
      add(report, "group-forbidden", "agent '" + a.id + "' carries a group (utp)", true);
    }
    try {
      a.valuation.check_params();
    } catch (const Error& e) {
      add(report, "valuation-params", "agent '" + a.id + "': " + e.what(), true);
    }
  }

  if (!report.structurally_sound()) return report;

  // Competition assumptions: every link carries at least two agents (UTP)
  // or two groups (MMTP).
  for (const auto& l : instance.links) {
    int users = 0;
    std::set<std::string> groups;
    for (const auto& a : instance.agents) {
      if (std::find(a.links.begin(), a.links.end(), l.id) != a.links.end()) {
        ++users;
        if (instance.protocol == Protocol::Mmtp) groups.insert(a.group);
      }
    }
    if (instance.protocol == Protocol::Utp && users < 2) {
      add(report, "N^l>=2", "link '" + l.id + "' is used by fewer than two agents", false);
    }
    if (instance.protocol == Protocol::Mmtp && static_cast<int>(groups.size()) < 2) {
      add(report, "K^l>=2", "link '" + l.id + "' is used by fewer than two groups", false);
    }
  }

  return report;
}

IndexSets derive_index_sets(const ProblemInstance& instance) {
  ValidationReport report = validate_instance(instance);
  if (!report.structurally_sound()) {
    std::string msg = "instance is not structurally sound:";
    for (const auto& v : report.violations)
      if (v.structural) msg += " [" + v.code + "] " + v.detail + ";";
    throw Error(ErrorKind::Structural, msg);
  }

  IndexSets s;
  s.protocol = instance.protocol;
  for (const auto& l : instance.links) s.link_ids.push_back(l.id);
  for (const auto& a : instance.agents) s.agent_ids.push_back(a.id);
  std::sort(s.link_ids.begin(), s.link_ids.end());
  std::sort(s.agent_ids.begin(), s.agent_ids.end());
  s.num_links = static_cast<int>(s.link_ids.size());
  s.num_agents = static_cast<int>(s.agent_ids.size());

  s.capacity.resize(s.num_links);
  for (const auto& l : instance.links) s.capacity[s.link_index(l.id)] = l.capacity;

  s.valuation.resize(s.num_agents);
  s.links_of_agent.assign(s.num_agents, {});
  s.agents_on_link.assign(s.num_links, {});
  s.uses.assign(s.num_agents, std::vector<char>(s.num_links, 0));
  s.group_of_agent.assign(s.num_agents, -1);

  if (instance.protocol == Protocol::Mmtp) {
    std::set<std::string> groups;
    for (const auto& a : instance.agents) groups.insert(a.group);
    s.group_ids.assign(groups.begin(), groups.end());
    s.num_groups = static_cast<int>(s.group_ids.size());
  }
  s.members_of_group.assign(std::max(1, s.num_groups), {});
  if (s.num_groups == 0) s.members_of_group.clear();

  for (const auto& a : instance.agents) {
    int i = s.agent_index(a.id);
    s.valuation[i] = a.valuation;
    for (const auto& lid : a.links) {
      int l = s.link_index(lid);
      s.links_of_agent[i].push_back(l);
      s.agents_on_link[l].push_back(i);
      s.uses[i][l] = 1;
    }
    if (instance.protocol == Protocol::Mmtp) {
      int k = static_cast<int>(std::lower_bound(s.group_ids.begin(), s.group_ids.end(),
                                                a.group) -
                               s.group_ids.begin());
      s.group_of_agent[i] = k;
      s.members_of_group[k].push_back(i);
    }
  }
  for (auto& v : s.links_of_agent) std::sort(v.begin(), v.end());
  for (auto& v : s.agents_on_link) std::sort(v.begin(), v.end());
  for (auto& v : s.members_of_group) std::sort(v.begin(), v.end());

  s.groups_on_link.assign(s.num_links, {});
  s.group_members_on_link.assign(
      s.num_links, std::vector<std::vector<int>>(std::max(0, s.num_groups)));
  if (instance.protocol == Protocol::Mmtp) {
    for (int l = 0; l < s.num_links; ++l) {
      for (int i : s.agents_on_link[l]) {
        s.group_members_on_link[l][s.group_of_agent[i]].push_back(i);
      }
      for (int k = 0; k < s.num_groups; ++k) {
        if (!s.group_members_on_link[l][k].empty()) s.groups_on_link[l].push_back(k);
      }
    }
  }

  return s;
}

namespace {

Valuation parse_valuation(const json& v) {
  reject_unknown_fields(v, {"family", "a", "alpha"}, "valuation");
  Valuation out;
  if (!v.contains("family") || !v.contains("a")) {
    throw Error(ErrorKind::Parse, "valuation requires 'family' and 'a'");
  }
  out.family = valuation_family_from_string(v.at("family").get<std::string>());
  out.a = v.at("a").get<double>();
  if (v.contains("alpha")) out.alpha = v.at("alpha").get<double>();
  return out;
}

}  // namespace

ProblemInstance load_instance_json(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::Parse, std::string("invalid JSON: ") + e.what());
  }
  try {
    reject_unknown_fields(doc, {"protocol", "links", "agents", "message_graph"}, "instance");
    ProblemInstance inst;
    std::string proto = doc.at("protocol").get<std::string>();
    if (proto == "utp") {
      inst.protocol = Protocol::Utp;
    } else if (proto == "mmtp") {
      inst.protocol = Protocol::Mmtp;
    } else {
      throw Error(ErrorKind::Parse, "protocol must be 'utp' or 'mmtp'");
    }
    for (const auto& l : doc.at("links")) {
      reject_unknown_fields(l, {"id", "capacity"}, "link");
      inst.links.push_back({l.at("id").get<std::string>(), l.at("capacity").get<double>()});
    }
    for (const auto& a : doc.at("agents")) {
      reject_unknown_fields(a, {"id", "group", "links", "valuation"}, "agent");
      AgentSpec spec;
      spec.id = a.at("id").get<std::string>();
      if (a.contains("group")) spec.group = a.at("group").get<std::string>();
      for (const auto& lid : a.at("links")) spec.links.push_back(lid.get<std::string>());
      spec.valuation = parse_valuation(a.at("valuation"));
      inst.agents.push_back(std::move(spec));
    }
    if (doc.contains("message_graph")) {
      const auto& g = doc.at("message_graph");
      reject_unknown_fields(g, {"edges", "phi"}, "message_graph");
      for (const auto& e : g.at("edges")) {
        if (!e.is_array() || e.size() != 2) {
          throw Error(ErrorKind::Parse, "message_graph edges must be [id, id] pairs");
        }
        inst.message_graph.edges.emplace_back(e[0].get<std::string>(),
                                              e[1].get<std::string>());
      }
      if (g.contains("phi")) {
        for (auto it = g.at("phi").begin(); it != g.at("phi").end(); ++it) {
          inst.message_graph.phi[it.key()] = it.value().get<std::string>();
        }
      }
    }
    return inst;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Parse, std::string("malformed instance: ") + e.what());
  }
}

ProblemInstance load_instance_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Parse, "cannot open instance file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return load_instance_json(ss.str());
}

std::string instance_to_json(const ProblemInstance& instance) {
  json doc;
  doc["protocol"] = instance.protocol == Protocol::Utp ? "utp" : "mmtp";
  doc["links"] = json::array();
  for (const auto& l : instance.links) {
    doc["links"].push_back({{"id", l.id}, {"capacity", l.capacity}});
  }
  doc["agents"] = json::array();
  for (const auto& a : instance.agents) {
    json ja{{"id", a.id}, {"links", a.links}};
    if (!a.group.empty()) ja["group"] = a.group;
    json jv{{"family", to_string(a.valuation.family)}, {"a", a.valuation.a}};
    if (a.valuation.family == ValuationFamily::Power) jv["alpha"] = a.valuation.alpha;
    ja["valuation"] = jv;
    doc["agents"].push_back(ja);
  }
  json jg;
  jg["edges"] = json::array();
  for (const auto& [u, v] : instance.message_graph.edges) {
    jg["edges"].push_back({u, v});
  }
  if (!instance.message_graph.phi.empty()) {
    json jp = json::object();
    for (const auto& [k, v] : instance.message_graph.phi) jp[k] = v;
    jg["phi"] = jp;
  }
  doc["message_graph"] = jg;
  return doc.dump(2);
}

}  // namespace dmd

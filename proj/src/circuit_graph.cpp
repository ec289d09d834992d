#include "tricir/graph/circuit_graph.hpp"

#include <cmath>
#include <map>

namespace tricir::graph {

using spice::Device;
using spice::DeviceKind;

Relation port_relation(DeviceKind k, int terminal_index) {
  switch (k) {
    case DeviceKind::Nmos:
    case DeviceKind::Pmos:
      return static_cast<Relation>(static_cast<int>(Relation::MosDrain) + terminal_index);
    case DeviceKind::Npn:
    case DeviceKind::Pnp:
      return static_cast<Relation>(static_cast<int>(Relation::BjtCollector) + terminal_index);
    case DeviceKind::Diode:
      return terminal_index == 0 ? Relation::DiodeAnode : Relation::DiodeCathode;
    case DeviceKind::Resistor: return Relation::RTerminal;
    case DeviceKind::Capacitor: return Relation::CTerminal;
    case DeviceKind::Inductor: return Relation::LTerminal;
    case DeviceKind::VSource:
    case DeviceKind::ISource:
      return terminal_index == 0 ? Relation::SrcPlus : Relation::SrcMinus;
    case DeviceKind::Vcvs: return Relation::VcvsPort;
    case DeviceKind::Cccs: return Relation::CccsPort;
    case DeviceKind::Vccs: return Relation::VccsPort;
    case DeviceKind::Ccvs: return Relation::CcvsPort;
    case DeviceKind::SubcktInstance: return Relation::SubcktTerminal;
  }
  return Relation::SharedNet;
}

std::array<double, kNumContSlots> continuous_slots(const Device& dev) {
  std::array<double, kNumContSlots> s{};
  auto get = [&](const char* key) -> double {
    auto it = dev.params.find(key);
    return it == dev.params.end() ? 0.0 : it->second;
  };
  switch (dev.kind) {
    case DeviceKind::Nmos:
    case DeviceKind::Pmos:
      s[0] = get("w") * 1e6;  // um
      s[1] = get("l") * 1e6;
      break;
    case DeviceKind::Resistor:
      s[2] = get("r") * 1e-3;  // kOhm
      break;
    case DeviceKind::Capacitor:
      s[3] = get("c") * 1e12;  // pF
      break;
    case DeviceKind::Inductor:
      s[4] = get("l") * 1e6;  // uH
      break;
    case DeviceKind::VSource:
      s[5] = get("dc");  // V
      break;
    case DeviceKind::ISource:
      s[6] = get("dc") * 1e3;  // mA
      break;
    default:
      break;
  }
  s[7] = get("m");
  for (double v : s)
    if (!std::isfinite(v)) throw BuildError("NonFiniteParam in device " + dev.name);
  return s;
}

CircuitGraph build_graph(const spice::NetlistIR& ir, const BuildOptions& opt) {
  if (ir.devices.empty()) throw BuildError("EmptyNetlist: no devices");

  CircuitGraph g;
  const int n = static_cast<int>(ir.devices.size());
  g.node_kinds.reserve(n);
  g.node_cont.reserve(n);
  g.node_ids.reserve(n);
  for (const Device& d : ir.devices) {
    g.node_kinds.push_back(static_cast<int>(d.kind));
    g.node_cont.push_back(continuous_slots(d));
    g.node_ids.push_back(d.name);
  }

  // Incidences per net in first-appearance order; one incidence per device
  // per net (a device touching a net through several ports counts once, typed
  // by its first terminal on that net), which keeps per-net edge counts at
  // exactly k*(k-1).
  struct Incidence {
    int node;
    Relation rel;
  };
  std::vector<std::string> net_order;
  std::map<std::string, std::vector<Incidence>> by_net;
  for (int i = 0; i < n; ++i) {
    const Device& d = ir.devices[i];
    for (size_t t = 0; t < d.terminals.size(); ++t) {
      const std::string& net = d.terminals[t].second;
      auto [it, inserted] = by_net.try_emplace(net);
      if (inserted) net_order.push_back(net);
      auto& inc = it->second;
      // devices are scanned in order, so a repeat port of device i on this
      // net can only be the most recent incidence
      if (!inc.empty() && inc.back().node == i) continue;
      inc.push_back({i, port_relation(d.kind, static_cast<int>(t))});
    }
  }

  for (const std::string& net : net_order) {
    const auto& inc = by_net[net];
    const int k = static_cast<int>(inc.size());
    const bool shared = k <= opt.shared_net_fanout_cap;
    for (int a = 0; a < k; ++a) {
      for (int b = 0; b < k; ++b) {
        if (a == b) continue;
        g.edges.push_back({inc[a].node, inc[b].node, inc[b].rel});
        if (shared) g.edges.push_back({inc[a].node, inc[b].node, Relation::SharedNet});
      }
    }
  }
  return g;
}

nlohmann::json to_json(const CircuitGraph& g) {
  nlohmann::json j;
  j["nodes"] = nlohmann::json::array();
  for (int i = 0; i < g.num_nodes(); ++i) {
    nlohmann::json node;
    node["id"] = g.node_ids[i];
    node["kind"] = spice::kind_name(static_cast<spice::DeviceKind>(g.node_kinds[i]));
    node["kind_id"] = g.node_kinds[i];
    node["cont"] = g.node_cont[i];
    j["nodes"].push_back(std::move(node));
  }
  j["edges"] = nlohmann::json::array();
  for (const Edge& e : g.edges) {
    j["edges"].push_back({{"src", e.src},
                          {"dst", e.dst},
                          {"relation", std::string(kRelationNames[static_cast<int>(e.rel)])}});
  }
  std::vector<std::string> names;
  for (auto sv : kRelationNames) names.emplace_back(sv);
  j["relations"] = names;
  return j;
}

}  // namespace tricir::graph

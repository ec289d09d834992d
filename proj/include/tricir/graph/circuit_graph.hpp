#pragma once

#include <json.hpp>

#include <array>
#include <stdexcept>
#include <string>
#include <vector>

#include "tricir/graph/relations.hpp"
#include "tricir/spice/types.hpp"

namespace tricir::graph {

// Continuous node-feature slots, rescaled before log1p:
// [W um, L um, R kOhm, C pF, L uH, V volt, I mA, multiplier].
inline constexpr int kNumContSlots = 8;

struct Edge {
  int src = 0;
  int dst = 0;
  Relation rel = Relation::SharedNet;
};

struct CircuitGraph {
  std::vector<int> node_kinds;                          // DeviceKind as int
  std::vector<std::array<double, kNumContSlots>> node_cont;  // rescaled raw values
  std::vector<std::string> node_ids;                    // device names
  std::vector<Edge> edges;

  int num_nodes() const { return static_cast<int>(node_kinds.size()); }
};

class BuildError : public std::runtime_error {
 public:
  explicit BuildError(const std::string& msg) : std::runtime_error(msg) {}
};

struct BuildOptions {
  // On nets with more incident devices than this, shared_net pair edges are
  // skipped (port-typed edges are still emitted).
  int shared_net_fanout_cap = 32;
};

// Rescaled continuous slots for one device (before log1p).
std::array<double, kNumContSlots> continuous_slots(const spice::Device& dev);

// One node per device; for every net and ordered device pair on it, a
// port-typed edge (typed by the destination's port) plus a shared_net edge.
// Throws BuildError on an empty netlist or non-finite params.
CircuitGraph build_graph(const spice::NetlistIR& ir, const BuildOptions& opt = {});

nlohmann::json to_json(const CircuitGraph& g);

}  // namespace tricir::graph

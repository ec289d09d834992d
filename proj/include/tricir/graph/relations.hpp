#pragma once

#include <array>
#include <string_view>

#include "tricir/spice/types.hpp"

namespace tricir::graph {

// Closed 20-relation vocabulary over device ports plus shared_net and
// subckt_terminal. Ids are stable; serialization uses the names.
enum class Relation : int {
  MosDrain = 0,
  MosGate = 1,
  MosSource = 2,
  MosBulk = 3,
  BjtCollector = 4,
  BjtBase = 5,
  BjtEmitter = 6,
  SrcPlus = 7,
  SrcMinus = 8,
  DiodeAnode = 9,
  DiodeCathode = 10,
  RTerminal = 11,
  CTerminal = 12,
  LTerminal = 13,
  VcvsPort = 14,
  CccsPort = 15,
  VccsPort = 16,
  CcvsPort = 17,
  SharedNet = 18,
  SubcktTerminal = 19,
};

inline constexpr int kNumRelations = 20;

inline constexpr std::array<std::string_view, kNumRelations> kRelationNames = {
    "mos_drain",   "mos_gate",    "mos_source", "mos_bulk",  "bjt_collector",
    "bjt_base",    "bjt_emitter", "src_plus",   "src_minus", "diode_anode",
    "diode_cathode", "r_terminal", "c_terminal", "l_terminal", "vcvs_port",
    "cccs_port",   "vccs_port",   "ccvs_port",  "shared_net", "subckt_terminal",
};

// Relation for terminal `index` of a device of kind `k`.
Relation port_relation(spice::DeviceKind k, int terminal_index);

}  // namespace tricir::graph

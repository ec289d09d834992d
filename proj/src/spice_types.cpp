#include "tricir/spice/types.hpp"

#include <array>

namespace tricir::spice {

const char* kind_name(DeviceKind k) {
  switch (k) {
    case DeviceKind::Nmos: return "nmos";
    case DeviceKind::Pmos: return "pmos";
    case DeviceKind::Npn: return "npn";
    case DeviceKind::Pnp: return "pnp";
    case DeviceKind::Diode: return "diode";
    case DeviceKind::Resistor: return "resistor";
    case DeviceKind::Capacitor: return "capacitor";
    case DeviceKind::Inductor: return "inductor";
    case DeviceKind::VSource: return "vsource";
    case DeviceKind::ISource: return "isource";
    case DeviceKind::Vcvs: return "vcvs";
    case DeviceKind::Cccs: return "cccs";
    case DeviceKind::Vccs: return "vccs";
    case DeviceKind::Ccvs: return "ccvs";
    case DeviceKind::SubcktInstance: return "subckt_instance";
  }
  return "?";
}

const std::vector<std::string>& kind_ports(DeviceKind k) {
  static const std::vector<std::string> mos = {"d", "g", "s", "b"};
  static const std::vector<std::string> bjt = {"c", "b", "e"};
  static const std::vector<std::string> diode = {"a", "k"};
  static const std::vector<std::string> two = {"t1", "t2"};
  static const std::vector<std::string> src = {"p", "n"};
  static const std::vector<std::string> quad = {"p", "n", "cp", "cn"};
  static const std::vector<std::string> none = {};
  switch (k) {
    case DeviceKind::Nmos:
    case DeviceKind::Pmos: return mos;
    case DeviceKind::Npn:
    case DeviceKind::Pnp: return bjt;
    case DeviceKind::Diode: return diode;
    case DeviceKind::Resistor:
    case DeviceKind::Capacitor:
    case DeviceKind::Inductor: return two;
    case DeviceKind::VSource:
    case DeviceKind::ISource: return src;
    case DeviceKind::Vcvs:
    case DeviceKind::Vccs: return quad;
    case DeviceKind::Cccs:
    case DeviceKind::Ccvs: return src;
    case DeviceKind::SubcktInstance: return none;
  }
  return none;
}

int kind_terminal_count(DeviceKind k) {
  switch (k) {
    case DeviceKind::Nmos:
    case DeviceKind::Pmos: return 4;
    case DeviceKind::Npn:
    case DeviceKind::Pnp: return 3;
    case DeviceKind::Vcvs:
    case DeviceKind::Vccs: return 4;
    case DeviceKind::SubcktInstance: return 0;
    default: return 2;
  }
}

const char* parse_errc_name(ParseErrc c) {
  switch (c) {
    case ParseErrc::LexError: return "LexError";
    case ParseErrc::TooFewTerminals: return "TooFewTerminals";
    case ParseErrc::UnknownCardPrefix: return "UnknownCardPrefix";
    case ParseErrc::UnterminatedSubckt: return "UnterminatedSubckt";
    case ParseErrc::DuplicateDeviceName: return "DuplicateDeviceName";
    case ParseErrc::BadNumber: return "BadNumber";
  }
  return "ParseError";
}

bool NetlistIR::has_net(const std::string& n) const {
  for (const auto& x : nets)
    if (x == n) return true;
  return false;
}

const Device* NetlistIR::find_device(const std::string& name) const {
  for (const auto& d : devices)
    if (d.name == name) return &d;
  return nullptr;
}

}  // namespace tricir::spice

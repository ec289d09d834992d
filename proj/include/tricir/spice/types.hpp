#pragma once

#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace tricir::spice {

enum class DeviceKind {
  Nmos,
  Pmos,
  Npn,
  Pnp,
  Diode,
  Resistor,
  Capacitor,
  Inductor,
  VSource,
  ISource,
  Vcvs,  // E
  Cccs,  // F
  Vccs,  // G
  Ccvs,  // H
  SubcktInstance,  // X
};

inline constexpr int kNumDeviceKinds = 15;

const char* kind_name(DeviceKind k);

// Fixed terminal (port) names per kind; SubcktInstance ports come from the
// definition and are handled separately.
const std::vector<std::string>& kind_ports(DeviceKind k);

// Required terminal count; SubcktInstance returns 0 (meaning >= 1, variable).
int kind_terminal_count(DeviceKind k);

struct Device {
  std::string name;
  DeviceKind kind = DeviceKind::Resistor;
  // (port name, net name), in card order.
  std::vector<std::pair<std::string, std::string>> terminals;
  std::map<std::string, double> params;
  std::optional<std::string> model_ref;  // .model or .subckt reference
  std::optional<std::string> ctrl_ref;   // controlling V-source for F/H
};

struct ModelCard {
  std::string family;  // e.g. "nmos", "pmos", "npn", "d"
  std::map<std::string, double> params;
};

struct NetlistIR;

struct SubcktDef {
  std::vector<std::string> terminals;
  std::unique_ptr<NetlistIR> body;
};

struct NetlistIR {
  std::string title;
  std::vector<Device> devices;
  std::vector<std::string> nets;  // first-use order, no duplicates
  std::map<std::string, ModelCard> models;
  std::map<std::string, SubcktDef> subckts;
  // Directive cards (.op, .tran, ...) recorded verbatim, ignored downstream.
  std::vector<std::string> directives;

  bool has_net(const std::string& n) const;
  const Device* find_device(const std::string& name) const;
};

enum class ParseErrc {
  LexError,
  TooFewTerminals,
  UnknownCardPrefix,
  UnterminatedSubckt,
  DuplicateDeviceName,
  BadNumber,
};

const char* parse_errc_name(ParseErrc c);

class ParseError : public std::runtime_error {
 public:
  ParseError(ParseErrc code, int line, const std::string& msg)
      : std::runtime_error(msg), code(code), line(line) {}
  ParseErrc code;
  int line;
};

}  // namespace tricir::spice

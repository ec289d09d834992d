#include "tricir/spice/serialize.hpp"

#include <algorithm>

namespace tricir::spice {

using nlohmann::json;

namespace {

json device_json(const Device& d) {
  json j;
  j["name"] = d.name;
  j["kind"] = kind_name(d.kind);
  json terms = json::array();
  for (const auto& [port, net] : d.terminals) terms.push_back(json::array({port, net}));
  j["terminals"] = std::move(terms);
  j["params"] = json::object();
  for (const auto& [k, v] : d.params) j["params"][k] = v;
  if (d.model_ref) j["model_ref"] = *d.model_ref;
  if (d.ctrl_ref) j["ctrl_ref"] = *d.ctrl_ref;
  return j;
}

}  // namespace

json to_json(const NetlistIR& ir) {
  json j;
  j["title"] = ir.title;
  j["devices"] = json::array();
  for (const Device& d : ir.devices) j["devices"].push_back(device_json(d));
  std::vector<std::string> nets = ir.nets;
  std::sort(nets.begin(), nets.end());
  j["nets"] = nets;
  j["models"] = json::object();
  for (const auto& [name, mc] : ir.models) {
    json m;
    m["family"] = mc.family;
    m["params"] = json::object();
    for (const auto& [k, v] : mc.params) m["params"][k] = v;
    j["models"][name] = std::move(m);
  }
  j["subckts"] = json::object();
  for (const auto& [name, def] : ir.subckts) {
    json s;
    s["terminals"] = def.terminals;
    s["body"] = to_json(*def.body);
    j["subckts"][name] = std::move(s);
  }
  return j;
}

}  // namespace tricir::spice

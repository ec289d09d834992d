#include "tricir/corpus/manifest.hpp"

#include <json.hpp>

#include <fstream>

namespace tricir::corpus {

using nlohmann::json;

const std::vector<std::string>& default_label_vocab() {
  static const std::vector<std::string> vocab = {
      "common_source_amplifier", "common_gate_amplifier", "source_follower",
      "differential_pair",       "current_mirror",        "cascode_current_mirror",
      "two_stage_opamp",         "folded_cascode_opamp",  "ota",
      "bandgap_reference",       "vco",                   "ring_oscillator",
      "comparator",              "ldo_regulator",         "rc_lowpass_filter",
      "active_filter",           "wien_bridge_network",   "resistive_divider",
      "rlc_network"};
  return vocab;
}

std::vector<int> Manifest::split_indices(const std::string& split) const {
  std::vector<int> out;
  for (std::size_t i = 0; i < records.size(); ++i)
    if (records[i].split == split) out.push_back(static_cast<int>(i));
  return out;
}

Manifest load_manifest(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw SchemaError("cannot open manifest " + path, 0);
  Manifest m;
  std::string line;
  int line_no = 0;
  bool saw_header = false;
  std::vector<std::string> seen_ids;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw SchemaError(std::string("bad JSON: ") + e.what(), line_no);
    }
    if (!saw_header && line_no == 1 && j.contains("feature_dim")) {
      saw_header = true;
      m.feature_dim = j.at("feature_dim").get<int>();
      if (j.contains("label_vocab")) {
        m.label_vocab = j.at("label_vocab").get<std::vector<std::string>>();
        if (m.label_vocab.size() != kNumTypeLabels)
          throw SchemaError("label vocabulary must list 19 names", line_no);
      }
      continue;
    }
    TripletRecord r;
    try {
      r.id = j.at("id").get<std::string>();
      r.netlist_path = j.at("netlist_path").get<std::string>();
      r.caption = j.at("caption").get<std::string>();
      r.image_feature_path = j.at("image_feature_path").get<std::string>();
      if (j.contains("cluster_id") && !j["cluster_id"].is_null())
        r.cluster_id = j["cluster_id"].get<int>();
      if (j.contains("type_label") && !j["type_label"].is_null())
        r.type_label = j["type_label"].get<int>();
      if (j.contains("split")) r.split = j["split"].get<std::string>();
    } catch (const json::exception& e) {
      throw SchemaError(std::string("bad record: ") + e.what(), line_no);
    }
    if (r.type_label && (*r.type_label < 0 || *r.type_label >= kNumTypeLabels))
      throw SchemaError("type_label " + std::to_string(*r.type_label) + " outside [0,19)",
                        line_no);
    if (r.split != "train" && r.split != "test")
      throw SchemaError("split must be train or test", line_no);
    for (const auto& id : seen_ids)
      if (id == r.id) throw SchemaError("duplicate record id " + r.id, line_no);
    seen_ids.push_back(r.id);
    m.records.push_back(std::move(r));
  }
  return m;
}

void save_manifest(const Manifest& m, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw SchemaError("cannot write manifest " + path, 0);
  json header = {{"feature_dim", m.feature_dim}, {"label_vocab", m.label_vocab}};
  os << header.dump() << "\n";
  for (const TripletRecord& r : m.records) {
    json j = {{"id", r.id},
              {"netlist_path", r.netlist_path},
              {"caption", r.caption},
              {"image_feature_path", r.image_feature_path},
              {"split", r.split}};
    if (r.cluster_id) j["cluster_id"] = *r.cluster_id;
    if (r.type_label) j["type_label"] = *r.type_label;
    os << j.dump() << "\n";
  }
}

std::vector<float> read_f32_vector(const std::string& path) {
  std::ifstream is(path, std::ios::binary | std::ios::ate);
  if (!is) throw SchemaError("cannot read feature file " + path, 0);
  std::streamsize bytes = is.tellg();
  is.seekg(0);
  std::vector<float> v(static_cast<std::size_t>(bytes) / sizeof(float));
  is.read(reinterpret_cast<char*>(v.data()),
          static_cast<std::streamsize>(v.size() * sizeof(float)));
  return v;
}

void write_f32_vector(const std::string& path, const std::vector<float>& v) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw SchemaError("cannot write feature file " + path, 0);
  os.write(reinterpret_cast<const char*>(v.data()),
           static_cast<std::streamsize>(v.size() * sizeof(float)));
}

}  // namespace tricir::corpus

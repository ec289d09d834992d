#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace tricir::corpus {

class SchemaError : public std::runtime_error {
 public:
  SchemaError(const std::string& msg, int line) : std::runtime_error(msg), line(line) {}
  int line;
};

class UnknownFamily : public std::runtime_error {
 public:
  explicit UnknownFamily(const std::string& msg) : std::runtime_error(msg) {}
};

// One aligned (netlist, caption, image-feature) sample.
struct TripletRecord {
  std::string id;
  std::string netlist_path;        // relative to the manifest directory
  std::string caption;
  std::string image_feature_path;  // raw little-endian f32 vector
  std::optional<int> cluster_id;
  std::optional<int> type_label;   // in [0, 19)
  std::string split = "train";     // "train" or "test"
};

inline constexpr int kNumTypeLabels = 19;

// The 19 canonical topology labels the auxiliary classifier predicts.
const std::vector<std::string>& default_label_vocab();

struct Manifest {
  std::vector<TripletRecord> records;
  int feature_dim = 512;
  std::vector<std::string> label_vocab = default_label_vocab();

  std::vector<int> split_indices(const std::string& split) const;
};

// Line-delimited JSON: an optional header object (feature_dim, label_vocab)
// followed by one record per line. Round trips are lossless.
Manifest load_manifest(const std::string& path);
void save_manifest(const Manifest& m, const std::string& path);

// Raw little-endian f32 vectors.
std::vector<float> read_f32_vector(const std::string& path);
void write_f32_vector(const std::string& path, const std::vector<float>& v);

}  // namespace tricir::corpus

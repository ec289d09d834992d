#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tricir/corpus/manifest.hpp"

namespace tricir::corpus {

struct SynthesisOptions {
  int per_family = 40;
  std::uint64_t seed = 42;
  double train_frac = 0.8;
  double image_sigma = 0.05;  // perturbation scale around the family anchor
  int feature_dim = 512;
  std::vector<std::string> families;  // empty selects all eight templates
};

// The eight parametric circuit templates.
std::vector<std::string> synthetic_family_names();

// Writes netlists, image-feature vectors and manifest.jsonl under out_dir.
// Per sample: a SPICE netlist from the family template with values drawn from
// small per-slot choice sets (tuples unique within a family), a caption that
// names the family and the chosen values, and an image-feature vector built
// from the family anchor plus seeded value-keyed perturbations. Deterministic
// under the seed.
Manifest generate_synthetic_corpus(const std::string& out_dir,
                                   const SynthesisOptions& opt);

}  // namespace tricir::corpus

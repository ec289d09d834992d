#pragma once

#include <json.hpp>

#include <fstream>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "tricir/corpus/manifest.hpp"
#include "tricir/enc/model.hpp"
#include "tricir/index/recall.hpp"
#include "tricir/nn/optim.hpp"
#include "tricir/train/curriculum.hpp"

namespace tricir::train {

struct TrainConfig {
  std::uint64_t seed = 42;
  std::string manifest_path;
  std::string checkpoint_path = "checkpoint.artc";
  std::string log_path = "train_log.jsonl";
  enc::ModelConfig model;

  int batch_size = 256;
  int steps_per_epoch = 0;  // 0: ceil(train size / batch size)
  int epochs_phase1 = 6;
  int epochs_phase2 = 2;
  int epochs_phase3 = 12;

  double lr_graph = 5e-4;   // graph encoder
  double lr_other = 5e-5;   // text/image towers and objective head
  double weight_decay = 0.01;
  double warmup_frac = 0.05;  // fraction of each schedule regime

  double label_smoothing = 0.1;
  double aux_weight = 0.5;

  int kmeans_k = 30;
  double alpha0 = 0.05;
  double alpha_max = 0.3;

  // "tri" trains all three modalities; "ti" is the text-image-only ablation
  // (graph encoder left untouched, T<->I directions only, no aux loss).
  std::string mode = "tri";
  bool eval_each_epoch = true;

  int total_epochs() const { return epochs_phase1 + epochs_phase2 + epochs_phase3; }

  nlohmann::json to_json() const;
  static TrainConfig from_json(const nlohmann::json& j);
};

// Per-epoch observer payload (used by the acceptance phase-contract checks).
struct EpochSnapshot {
  int epoch = 0;
  PhaseConfig phase;
  double alpha = 0.0;
  long optimizer_steps_at_entry = 0;       // 0 right after a rebuild
  double moment_norm_at_entry = 0.0;       // sum |m1| over params at epoch entry
  double mean_total_loss = 0.0;
  double avg_r1 = 0.0;                     // held-out, when evaluated
};

class Trainer {
 public:
  explicit Trainer(const TrainConfig& cfg);

  // Runs the full three-phase schedule; writes the JSONL log and the final
  // checkpoint; returns the final held-out six-direction report.
  index::RetrievalReport run();

  // Held-out six-direction evaluation with the current parameters.
  index::RetrievalReport evaluate(const std::string& split = "test");

  enc::TriModalModel<float>& model() { return *model_; }
  const corpus::Manifest& manifest() const { return manifest_; }
  const TrainConfig& config() const { return cfg_; }

  std::function<void(const EpochSnapshot&)> on_epoch;

 private:
  struct Sample {
    graph::CircuitGraph graph;
    std::vector<int> tokens;
    std::vector<float> image;
    int label = 0;
  };

  void load_dataset();
  std::vector<int> uniform_batch(const std::vector<int>& pool, int batch);
  double train_step(const std::vector<int>& ids,
                    const std::vector<obj::Direction>& directions, double lr_factor,
                    nn::AdamW<float>& opt, int phase, double alpha, long global_step);
  std::vector<Embedding> encode_split_code(const std::vector<int>& ids);
  std::vector<Embedding> encode_split_text(const std::vector<int>& ids);
  std::vector<Embedding> encode_split_image(const std::vector<int>& ids);

  TrainConfig cfg_;
  corpus::Manifest manifest_;
  std::string base_dir_;
  std::vector<Sample> samples_;
  std::vector<int> train_ids_, test_ids_;
  std::unique_ptr<enc::TriModalModel<float>> model_;
  std::uint64_t sampler_state_ = 0;
  std::uint64_t dropout_state_ = 0;
  std::unique_ptr<std::ofstream> log_;
};

}  // namespace tricir::train

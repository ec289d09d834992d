#include "tricir/train/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "tricir/spice/parser.hpp"
#include "tricir/nn/checkpoint.hpp"
#include "tricir/train/kmeans.hpp"

namespace tricir::train {

namespace fs = std::filesystem;
using nlohmann::json;

json TrainConfig::to_json() const {
  return {{"seed", seed},
          {"manifest", manifest_path},
          {"checkpoint", checkpoint_path},
          {"log", log_path},
          {"model", model.to_json()},
          {"batch_size", batch_size},
          {"steps_per_epoch", steps_per_epoch},
          {"epochs_phase1", epochs_phase1},
          {"epochs_phase2", epochs_phase2},
          {"epochs_phase3", epochs_phase3},
          {"lr_graph", lr_graph},
          {"lr_other", lr_other},
          {"weight_decay", weight_decay},
          {"warmup_frac", warmup_frac},
          {"label_smoothing", label_smoothing},
          {"aux_weight", aux_weight},
          {"kmeans_k", kmeans_k},
          {"alpha0", alpha0},
          {"alpha_max", alpha_max},
          {"mode", mode},
          {"eval_each_epoch", eval_each_epoch}};
}

TrainConfig TrainConfig::from_json(const json& j) {
  TrainConfig c;
  auto get = [&](const char* k, auto& field) {
    if (j.contains(k)) field = j.at(k).get<std::decay_t<decltype(field)>>();
  };
  get("seed", c.seed);
  get("manifest", c.manifest_path);
  get("checkpoint", c.checkpoint_path);
  get("log", c.log_path);
  if (j.contains("model")) c.model = enc::ModelConfig::from_json(j.at("model"));
  get("batch_size", c.batch_size);
  get("steps_per_epoch", c.steps_per_epoch);
  get("epochs_phase1", c.epochs_phase1);
  get("epochs_phase2", c.epochs_phase2);
  get("epochs_phase3", c.epochs_phase3);
  get("lr_graph", c.lr_graph);
  get("lr_other", c.lr_other);
  get("weight_decay", c.weight_decay);
  get("warmup_frac", c.warmup_frac);
  get("label_smoothing", c.label_smoothing);
  get("aux_weight", c.aux_weight);
  get("kmeans_k", c.kmeans_k);
  get("alpha0", c.alpha0);
  get("alpha_max", c.alpha_max);
  get("mode", c.mode);
  get("eval_each_epoch", c.eval_each_epoch);
  return c;
}

Trainer::Trainer(const TrainConfig& cfg) : cfg_(cfg) {
  manifest_ = corpus::load_manifest(cfg_.manifest_path);
  base_dir_ = fs::path(cfg_.manifest_path).parent_path().string();
  load_dataset();
  model_ = std::make_unique<enc::TriModalModel<float>>(cfg_.model, cfg_.seed);
  sampler_state_ = cfg_.seed ^ 0x5eed5a31e5ull;
  dropout_state_ = cfg_.seed ^ 0xd20b0a7ull;
}

void Trainer::load_dataset() {
  samples_.reserve(manifest_.records.size());
  for (const corpus::TripletRecord& rec : manifest_.records) {
    Sample s;
    std::ifstream is(fs::path(base_dir_) / rec.netlist_path);
    if (!is)
      throw corpus::SchemaError("cannot read netlist " + rec.netlist_path, 0);
    std::string text((std::istreambuf_iterator<char>(is)),
                     std::istreambuf_iterator<char>());
    s.graph = graph::build_graph(spice::parse_netlist(text));
    s.tokens = enc::tokenize(rec.caption, cfg_.model.text_vocab);
    if (s.tokens.empty())
      throw corpus::SchemaError("caption of " + rec.id + " has no tokens", 0);
    s.image = corpus::read_f32_vector((fs::path(base_dir_) / rec.image_feature_path).string());
    if (static_cast<int>(s.image.size()) != manifest_.feature_dim)
      throw corpus::SchemaError("feature dim mismatch for " + rec.id, 0);
    s.label = rec.type_label.value_or(0);
    samples_.push_back(std::move(s));
  }
  train_ids_ = manifest_.split_indices("train");
  test_ids_ = manifest_.split_indices("test");
}

std::vector<int> Trainer::uniform_batch(const std::vector<int>& pool, int batch) {
  std::vector<int> ids = pool;
  const int n = static_cast<int>(ids.size());
  const int take = std::min(batch, n);
  for (int i = 0; i < take; ++i) {
    int j = i + static_cast<int>(splitmix64(sampler_state_) %
                                 static_cast<std::uint64_t>(n - i));
    std::swap(ids[static_cast<std::size_t>(i)], ids[static_cast<std::size_t>(j)]);
  }
  ids.resize(static_cast<std::size_t>(take));
  return ids;
}

double Trainer::train_step(const std::vector<int>& ids,
                           const std::vector<obj::Direction>& directions,
                           double lr_factor, nn::AdamW<float>& opt, int phase,
                           double alpha, long global_step) {
  std::vector<const graph::CircuitGraph*> graphs;
  std::vector<std::vector<int>> token_lists;
  std::vector<int> labels;
  MatF images(static_cast<Eigen::Index>(ids.size()), manifest_.feature_dim);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const Sample& s = samples_[static_cast<std::size_t>(ids[i])];
    graphs.push_back(&s.graph);
    token_lists.push_back(s.tokens);
    labels.push_back(s.label);
    for (int d = 0; d < manifest_.feature_dim; ++d)
      images(static_cast<Eigen::Index>(i), d) = s.image[static_cast<std::size_t>(d)];
  }

  const bool ti_only = cfg_.mode == "ti";
  nn::Tape<float> tape;
  obj::ObjectiveConfig ocfg;
  ocfg.label_smoothing = cfg_.label_smoothing;
  ocfg.aux_weight = ti_only ? 0.0 : cfg_.aux_weight;
  ocfg.directions = directions;

  nn::Var<float> v_text = model_->encode_text_batch(tape, enc::make_text_batch(token_lists));
  nn::Var<float> v_image = model_->encode_image_batch(tape, images);
  nn::Var<float> v_code;
  if (ti_only) {
    // ablation: the code tower stays untouched; reuse text rows so the
    // objective shapes line up (code-involved directions are not active)
    v_code = v_text;
  } else {
    v_code = model_->encode_circuit_batch(tape, enc::make_graph_batch(graphs), true,
                                          &dropout_state_);
  }

  nn::Var<float> align, cls;
  nn::Var<float> total;
  if (ti_only) {
    align = obj::tri_modal_loss(v_code, v_image, v_text, model_->logit_scale(tape), ocfg);
    total = align;
  } else {
    total = obj::total_loss(*model_, tape, v_code, v_image, v_text, labels, ocfg,
                            &align, &cls);
  }

  double loss = static_cast<double>(total.value()(0, 0));
  if (!std::isfinite(loss)) {
    if (log_ && *log_) {
      json diag = {{"event", "abort"},
                   {"step", global_step},
                   {"phase", phase},
                   {"loss", loss},
                   {"logit_scale",
                    model_->store().at("objective.logit_scale").value(0, 0)}};
      *log_ << diag.dump() << "\n";
      log_->flush();
    }
    throw nn::NonFiniteValue("training aborted: non-finite loss at step " +
                             std::to_string(global_step));
  }

  opt.zero_grad();
  tape.backward(total);
  opt.step(lr_factor);
  model_->clamp_logit_scale();

  if (log_ && *log_) {
    json line = {{"step", global_step},
                 {"phase", phase},
                 {"L_align", static_cast<double>(align.value()(0, 0))},
                 {"L_cls", ti_only ? 0.0 : static_cast<double>(cls.value()(0, 0))},
                 {"logit_scale",
                  static_cast<double>(
                      model_->store().at("objective.logit_scale").value(0, 0))},
                 {"alpha", alpha}};
    *log_ << line.dump() << "\n";
  }
  return loss;
}

std::vector<Embedding> Trainer::encode_split_code(const std::vector<int>& ids) {
  std::vector<const graph::CircuitGraph*> graphs;
  for (int i : ids) graphs.push_back(&samples_[static_cast<std::size_t>(i)].graph);
  nn::Tape<float> tape;
  nn::Var<float> v =
      model_->encode_circuit_batch(tape, enc::make_graph_batch(graphs), false, nullptr);
  std::vector<Embedding> out;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    Embedding e;
    e.id = manifest_.records[static_cast<std::size_t>(ids[i])].id;
    e.modality = Modality::Code;
    e.vec = v.value().row(static_cast<Eigen::Index>(i));
    out.push_back(std::move(e));
  }
  return out;
}

std::vector<Embedding> Trainer::encode_split_text(const std::vector<int>& ids) {
  std::vector<std::vector<int>> token_lists;
  for (int i : ids) token_lists.push_back(samples_[static_cast<std::size_t>(i)].tokens);
  nn::Tape<float> tape;
  nn::Var<float> v = model_->encode_text_batch(tape, enc::make_text_batch(token_lists));
  std::vector<Embedding> out;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    Embedding e;
    e.id = manifest_.records[static_cast<std::size_t>(ids[i])].id;
    e.modality = Modality::Text;
    e.vec = v.value().row(static_cast<Eigen::Index>(i));
    out.push_back(std::move(e));
  }
  return out;
}

std::vector<Embedding> Trainer::encode_split_image(const std::vector<int>& ids) {
  MatF images(static_cast<Eigen::Index>(ids.size()), manifest_.feature_dim);
  for (std::size_t i = 0; i < ids.size(); ++i)
    for (int d = 0; d < manifest_.feature_dim; ++d)
      images(static_cast<Eigen::Index>(i), d) =
          samples_[static_cast<std::size_t>(ids[i])].image[static_cast<std::size_t>(d)];
  nn::Tape<float> tape;
  nn::Var<float> v = model_->encode_image_batch(tape, images);
  std::vector<Embedding> out;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    Embedding e;
    e.id = manifest_.records[static_cast<std::size_t>(ids[i])].id;
    e.modality = Modality::Image;
    e.vec = v.value().row(static_cast<Eigen::Index>(i));
    out.push_back(std::move(e));
  }
  return out;
}

index::RetrievalReport Trainer::evaluate(const std::string& split) {
  const std::vector<int>& ids = split == "train" ? train_ids_ : test_ids_;
  return index::evaluate_six_directions(encode_split_code(ids), encode_split_image(ids),
                                        encode_split_text(ids));
}

index::RetrievalReport Trainer::run() {
  if (train_ids_.empty()) throw DatasetTooSmall("manifest has no train records");
  const bool ti_only = cfg_.mode == "ti";
  const int batch = std::min<int>(cfg_.batch_size, static_cast<int>(train_ids_.size()));
  const int steps_per_epoch =
      cfg_.steps_per_epoch > 0
          ? cfg_.steps_per_epoch
          : static_cast<int>((train_ids_.size() + batch - 1) / static_cast<std::size_t>(batch));
  const int p1 = cfg_.epochs_phase1, p2 = cfg_.epochs_phase2, p3 = cfg_.epochs_phase3;

  log_ = std::make_unique<std::ofstream>(cfg_.log_path);

  std::map<std::string, double> group_lr = {{"", cfg_.lr_other},
                                            {"graph", cfg_.lr_graph}};
  nn::AdamWConfig adam_cfg;
  adam_cfg.weight_decay = cfg_.weight_decay;

  auto apply_trainable = [&](const std::vector<std::string>& groups) {
    for (const char* g : {"graph", "text", "image", "objective"})
      model_->store().set_trainable(g, false);
    for (const std::string& g : groups) model_->store().set_trainable(g, true);
  };

  // Phase-1 regime schedule covers phase 1; the rebuilt schedule covers 2+3.
  long regime_total = static_cast<long>(p1) * steps_per_epoch;
  long regime_warmup =
      std::max<long>(1, static_cast<long>(std::floor(cfg_.warmup_frac * regime_total + 0.5)));
  long regime_step = 0;

  if (ti_only)
    apply_trainable({"text", "image", "objective"});
  else
    apply_trainable(resolve_phase(1, p1, p2, p3).trainable_groups);
  auto opt = std::make_unique<nn::AdamW<float>>(model_->store(), group_lr, adam_cfg);

  // curriculum clusters are computed over the train split on phase-3 entry
  std::vector<int> cluster_of_train;
  long global_step = 0;

  for (int epoch = 1; epoch <= cfg_.total_epochs(); ++epoch) {
    PhaseConfig phase = resolve_phase(epoch, p1, p2, p3);
    if (epoch == phase.first_epoch && phase.phase == 2) {
      // fresh Adam state and an independent warmup+cosine schedule
      if (!ti_only) apply_trainable(phase.trainable_groups);
      opt = std::make_unique<nn::AdamW<float>>(model_->store(), group_lr, adam_cfg);
      regime_total = static_cast<long>(p2 + p3) * steps_per_epoch;
      regime_warmup = std::max<long>(
          1, static_cast<long>(std::floor(cfg_.warmup_frac * regime_total + 0.5)));
      regime_step = 0;
    }
    if (epoch == phase.first_epoch && phase.phase == 3 && cluster_of_train.empty()) {
      std::vector<std::string> captions;
      for (int i : train_ids_)
        captions.push_back(manifest_.records[static_cast<std::size_t>(i)].caption);
      int k = std::min<int>(cfg_.kmeans_k, static_cast<int>(captions.size()));
      ClusterAssignment ca = cluster_captions(captions, k, cfg_.seed ^ 0xc105717ull);
      cluster_of_train = std::move(ca.cluster_of);
    }

    double alpha = 0.0;
    if (phase.phase == 3)
      alpha = hard_negative_ratio(epoch - (p1 + p2), p3, cfg_.alpha0, cfg_.alpha_max);

    EpochSnapshot snap;
    snap.epoch = epoch;
    snap.phase = phase;
    snap.alpha = alpha;
    snap.optimizer_steps_at_entry = opt->step_count();
    snap.moment_norm_at_entry = 0.0;
    for (const auto& p : model_->store())
      snap.moment_norm_at_entry +=
          static_cast<double>(opt->moment1(p.name).cwiseAbs().sum());

    double loss_sum = 0.0;
    for (int s = 0; s < steps_per_epoch; ++s) {
      std::vector<int> ids;
      if (phase.curriculum_sampling && !cluster_of_train.empty()) {
        int k = 1 + *std::max_element(cluster_of_train.begin(), cluster_of_train.end());
        ids = sample_batch(train_ids_, batch, alpha, cluster_of_train, k, sampler_state_);
      } else {
        ids = uniform_batch(train_ids_, batch);
      }
      ++regime_step;
      ++global_step;
      double lr_factor = nn::lr_schedule(regime_step, regime_total, regime_warmup, 1.0);
      std::vector<obj::Direction> dirs =
          ti_only ? std::vector<obj::Direction>{obj::Direction::T2I, obj::Direction::I2T}
                  : phase.directions;
      loss_sum += train_step(ids, dirs, lr_factor, *opt, phase.phase, alpha, global_step);
    }
    snap.mean_total_loss = loss_sum / steps_per_epoch;

    if (cfg_.eval_each_epoch && !test_ids_.empty()) {
      index::RetrievalReport rep = evaluate("test");
      snap.avg_r1 = rep.avg_r1;
      if (log_ && *log_) {
        json line = {{"epoch", epoch},
                     {"phase", phase.phase},
                     {"alpha", alpha},
                     {"mean_loss", snap.mean_total_loss},
                     {"recall", rep.to_json()}};
        *log_ << line.dump() << "\n";
      }
    }
    if (on_epoch) on_epoch(snap);
  }

  index::RetrievalReport final_report = evaluate("test");
  json meta = {{"model", cfg_.model.to_json()},
               {"feature_dim", manifest_.feature_dim},
               {"label_vocab", manifest_.label_vocab},
               {"train_config", cfg_.to_json()}};
  nn::save_checkpoint(cfg_.checkpoint_path, model_->store(), meta);
  if (log_) log_->flush();
  return final_report;
}

}  // namespace tricir::train

#pragma once

#include <array>
#include <stdexcept>
#include <string>
#include <vector>

#include "tricir/enc/model.hpp"
#include "tricir/nn/ops.hpp"

namespace tricir::obj {

class BatchMismatch : public std::runtime_error {
 public:
  explicit BatchMismatch(const std::string& msg) : std::runtime_error(msg) {}
};

class LabelOutOfRange : public std::runtime_error {
 public:
  explicit LabelOutOfRange(const std::string& msg) : std::runtime_error(msg) {}
};

// The six retrieval directions; C = code (netlist), I = image, T = text.
enum class Direction { C2I, I2C, T2I, I2T, C2T, T2C };

inline constexpr std::array<Direction, 6> kAllDirections = {
    Direction::C2I, Direction::I2C, Direction::T2I,
    Direction::I2T, Direction::C2T, Direction::T2C};

// Phase-1 set: only the code-involved directions.
inline constexpr std::array<Direction, 4> kCodeDirections = {
    Direction::C2I, Direction::I2C, Direction::C2T, Direction::T2C};

inline const char* direction_name(Direction d) {
  switch (d) {
    case Direction::C2I: return "C->I";
    case Direction::I2C: return "I->C";
    case Direction::T2I: return "T->I";
    case Direction::I2T: return "I->T";
    case Direction::C2T: return "C->T";
    case Direction::T2C: return "T->C";
  }
  return "?";
}

struct ObjectiveConfig {
  double label_smoothing = 0.1;
  double aux_weight = 0.5;
  std::vector<Direction> directions{kAllDirections.begin(), kAllDirections.end()};
};

// Smoothed targets q(i) = (1-eps) * onehot(i) + eps / B, uniform over the
// batch including the positive.
template <typename S>
MatR<S> smoothed_identity_targets(Eigen::Index batch, double eps) {
  MatR<S> q = MatR<S>::Constant(batch, batch, static_cast<S>(eps / static_cast<double>(batch)));
  for (Eigen::Index i = 0; i < batch; ++i)
    q(i, i) += static_cast<S>(1.0 - eps);
  return q;
}

// One InfoNCE direction over index-aligned unit-norm rows:
//   L = -(1/B) sum_i sum_j q_j(i) log softmax_j(logit_scale * a_i . t_j)
template <typename S>
nn::Var<S> info_nce_direction(nn::Var<S> anchors, nn::Var<S> targets,
                              nn::Var<S> logit_scale, double label_smoothing) {
  if (anchors.rows() != targets.rows() || anchors.cols() != targets.cols())
    throw BatchMismatch("info_nce: anchors and targets must be index-aligned");
  nn::Var<S> logits = nn::scale_by(nn::matmul_nt(anchors, targets), logit_scale);
  return nn::cross_entropy_rows(
      logits, smoothed_identity_targets<S>(anchors.rows(), label_smoothing));
}

// Sum of the configured direction losses over the three aligned batches.
template <typename S>
nn::Var<S> tri_modal_loss(nn::Var<S> v_code, nn::Var<S> v_image, nn::Var<S> v_text,
                          nn::Var<S> logit_scale, const ObjectiveConfig& cfg) {
  if (v_code.rows() != v_image.rows() || v_code.rows() != v_text.rows())
    throw BatchMismatch("tri_modal_loss: batch sizes differ");
  nn::Var<S> total;
  bool have = false;
  for (Direction d : cfg.directions) {
    nn::Var<S> a, b;
    switch (d) {
      case Direction::C2I: a = v_code; b = v_image; break;
      case Direction::I2C: a = v_image; b = v_code; break;
      case Direction::T2I: a = v_text; b = v_image; break;
      case Direction::I2T: a = v_image; b = v_text; break;
      case Direction::C2T: a = v_code; b = v_text; break;
      case Direction::T2C: a = v_text; b = v_code; break;
    }
    nn::Var<S> term = info_nce_direction(a, b, logit_scale, cfg.label_smoothing);
    total = have ? nn::add(total, term) : term;
    have = true;
  }
  if (!have) total = v_code.tape->constant(MatR<S>::Zero(1, 1));
  return total;
}

template <typename S>
MatR<S> one_hot_targets(const std::vector<int>& labels, int num_classes) {
  MatR<S> q = MatR<S>::Zero(static_cast<Eigen::Index>(labels.size()), num_classes);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= num_classes)
      throw LabelOutOfRange("label " + std::to_string(labels[i]) + " outside [0," +
                            std::to_string(num_classes) + ")");
    q(static_cast<Eigen::Index>(i), labels[i]) = S(1);
  }
  return q;
}

// Mean of the two topology-classification cross-entropies (text and code);
// no label smoothing here.
template <typename S>
nn::Var<S> aux_cls_loss(enc::TriModalModel<S>& model, nn::Tape<S>& t, nn::Var<S> v_text,
                        nn::Var<S> v_code, const std::vector<int>& labels) {
  if (v_text.rows() != v_code.rows() ||
      v_text.rows() != static_cast<Eigen::Index>(labels.size()))
    throw BatchMismatch("aux_cls_loss: batch sizes differ");
  MatR<S> q = one_hot_targets<S>(labels, model.config().num_classes);
  nn::Var<S> ce_t = nn::cross_entropy_rows(model.classify(t, v_text), q);
  nn::Var<S> ce_c = nn::cross_entropy_rows(model.classify(t, v_code), q);
  return nn::scale(nn::add(ce_t, ce_c), 0.5);
}

// L_total = L_align + aux_weight * L_cls.
template <typename S>
nn::Var<S> total_loss(enc::TriModalModel<S>& model, nn::Tape<S>& t, nn::Var<S> v_code,
                      nn::Var<S> v_image, nn::Var<S> v_text,
                      const std::vector<int>& labels, const ObjectiveConfig& cfg,
                      nn::Var<S>* align_out = nullptr, nn::Var<S>* cls_out = nullptr) {
  nn::Var<S> align =
      tri_modal_loss(v_code, v_image, v_text, model.logit_scale(t), cfg);
  nn::Var<S> cls = aux_cls_loss(model, t, v_text, v_code, labels);
  if (align_out) *align_out = align;
  if (cls_out) *cls_out = cls;
  return nn::add(align, nn::scale(cls, cfg.aux_weight));
}

}  // namespace tricir::obj

#pragma once

#include <cmath>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "tricir/nn/params.hpp"

namespace tricir::nn {

class StaleState : public std::runtime_error {
 public:
  explicit StaleState(const std::string& msg) : std::runtime_error(msg) {}
};

// Linear warmup from 0 to base_lr over `warmup` steps, then cosine decay to 0
// at `total`. Pure function of the step index.
inline double lr_schedule(long step, long total_steps, long warmup_steps, double base_lr) {
  if (warmup_steps < 1) warmup_steps = 1;
  if (step <= 0) return 0.0;
  if (step <= warmup_steps)
    return base_lr * static_cast<double>(step) / static_cast<double>(warmup_steps);
  if (step >= total_steps) return 0.0;
  double progress = static_cast<double>(step - warmup_steps) /
                    static_cast<double>(total_steps - warmup_steps);
  return base_lr * 0.5 * (1.0 + std::cos(3.14159265358979323846 * progress));
}

struct AdamWConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
};

// AdamW with decoupled weight decay and per-group learning rates. Moments are
// zero at (re)construction; rebuilding the optimizer is the only way to reset
// them. Learning-rate lookup picks the longest group prefix present in
// `group_lr`; the "" entry is the default.
template <typename S>
class AdamW {
 public:
  AdamW(ParamStore<S>& store, std::map<std::string, double> group_lr,
        AdamWConfig cfg = {})
      : store_(&store), group_lr_(std::move(group_lr)), cfg_(cfg),
        fingerprint_(store.fingerprint()) {
    for (Param<S>& p : store) {
      m_.push_back(MatR<S>::Zero(p.value.rows(), p.value.cols()));
      v_.push_back(MatR<S>::Zero(p.value.rows(), p.value.cols()));
    }
  }

  // One update over all trainable parameters; `lr_factor` (typically the
  // warmup/cosine schedule value in [0,1]) scales every group's base lr.
  void step(double lr_factor = 1.0) {
    if (store_->fingerprint() != fingerprint_)
      throw StaleState("parameter set changed since optimizer construction");
    ++step_count_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_count_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_count_));
    std::size_t i = 0;
    for (Param<S>& p : *store_) {
      const std::size_t k = i++;
      if (!p.trainable) continue;
      const double lr = lr_factor * base_lr(p.group);
      auto& m = m_[k];
      auto& v = v_[k];
      const S b1 = static_cast<S>(cfg_.beta1), b2 = static_cast<S>(cfg_.beta2);
      m = b1 * m + (S(1) - b1) * p.grad;
      v.array() = b2 * v.array() + (S(1) - b2) * p.grad.array().square();
      // decoupled weight decay, bias-corrected moments
      p.value.array() -=
          static_cast<S>(lr) *
          ((m.array() / static_cast<S>(bc1)) /
               ((v.array() / static_cast<S>(bc2)).sqrt() + static_cast<S>(cfg_.eps)) +
           static_cast<S>(cfg_.weight_decay) * p.value.array());
    }
  }

  void zero_grad() { store_->zero_grad(); }

  long step_count() const { return step_count_; }

  double base_lr(const std::string& group) const {
    const double* best = nullptr;
    std::size_t best_len = 0;
    for (const auto& [prefix, lr] : group_lr_) {
      if (prefix.empty() ||
          ParamStore<S>::group_matches(group, prefix)) {
        if (!best || prefix.size() >= best_len) {
          best = &lr;
          best_len = prefix.size();
        }
      }
    }
    if (!best) throw std::logic_error("no learning rate for group " + group);
    return *best;
  }

  // Introspection for tests and phase-contract checks.
  const MatR<S>& moment1(const std::string& name) const { return m_[param_index(name)]; }
  const MatR<S>& moment2(const std::string& name) const { return v_[param_index(name)]; }

 private:
  std::size_t param_index(const std::string& name) const {
    std::size_t i = 0;
    for (const Param<S>& p : *store_) {
      if (p.name == name) return i;
      ++i;
    }
    throw std::logic_error("unknown parameter " + name);
  }

  ParamStore<S>* store_;
  std::map<std::string, double> group_lr_;
  AdamWConfig cfg_;
  std::uint64_t fingerprint_;
  long step_count_ = 0;
  std::vector<MatR<S>> m_, v_;
};

}  // namespace tricir::nn

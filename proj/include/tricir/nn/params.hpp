#pragma once

#include <deque>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "tricir/core/common.hpp"
#include "tricir/nn/tensor.hpp"

namespace tricir::nn {

class UnknownGroup : public std::runtime_error {
 public:
  explicit UnknownGroup(const std::string& msg) : std::runtime_error(msg) {}
};

template <typename S>
struct Param {
  std::string name;
  std::string group;
  MatR<S> value;
  MatR<S> grad;  // persists across steps; zeroed by the optimizer
  bool trainable = true;

  Var<S> bind(Tape<S>& t) { return t.leaf(&value, &grad, trainable); }
  Var<S> bind_frozen(Tape<S>& t) const {
    return const_cast<Param*>(this)->bind_no_grad(t);
  }
  Var<S> bind_no_grad(Tape<S>& t) { return t.leaf(&value, &grad, false); }
};

// Named parameters with group tags. Group names are hierarchical with '.'
// separators; set_trainable matches whole groups or prefixes.
template <typename S>
class ParamStore {
 public:
  Param<S>& add(const std::string& name, const std::string& group, MatR<S> init) {
    if (index_.count(name)) throw std::logic_error("duplicate parameter " + name);
    params_.push_back(Param<S>{name, group, std::move(init), {}, true});
    Param<S>& p = params_.back();
    p.grad = MatR<S>::Zero(p.value.rows(), p.value.cols());
    index_[name] = params_.size() - 1;
    return p;
  }

  Param<S>& at(const std::string& name) {
    auto it = index_.find(name);
    if (it == index_.end()) throw std::logic_error("unknown parameter " + name);
    return params_[it->second];
  }
  const Param<S>& at(const std::string& name) const {
    return const_cast<ParamStore*>(this)->at(name);
  }
  bool has(const std::string& name) const { return index_.count(name) != 0; }

  std::size_t size() const { return params_.size(); }
  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

  void zero_grad() {
    for (Param<S>& p : params_) p.grad.setZero();
  }

  // Flip trainability for every param whose group equals `group` or lies
  // under it ("text" matches "text.embed"). Throws UnknownGroup on no match.
  void set_trainable(const std::string& group, bool flag) {
    bool hit = false;
    for (Param<S>& p : params_) {
      if (group_matches(p.group, group)) {
        p.trainable = flag;
        hit = true;
      }
    }
    if (!hit) throw UnknownGroup("no parameter group matches '" + group + "'");
  }

  std::vector<std::string> groups() const {
    std::vector<std::string> out;
    for (const Param<S>& p : params_) {
      bool seen = false;
      for (const auto& g : out) seen = seen || g == p.group;
      if (!seen) out.push_back(p.group);
    }
    return out;
  }

  // Stable digest of names and shapes; the optimizer uses it to detect a
  // parameter set changed without a rebuild.
  std::uint64_t fingerprint() const {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (const Param<S>& p : params_) {
      h = fnv1a(p.name, h);
      h = fnv1a(std::to_string(p.value.rows()) + "x" + std::to_string(p.value.cols()), h);
    }
    return h;
  }

  static bool group_matches(const std::string& group, const std::string& query) {
    if (group == query) return true;
    return group.size() > query.size() && group.compare(0, query.size(), query) == 0 &&
           group[query.size()] == '.';
  }

 private:
  std::deque<Param<S>> params_;  // deque: stable addresses for tape bindings
  std::unordered_map<std::string, std::size_t> index_;
};

// ---------------------------------------------------------------------------
// Seeded initializers. Seeds derive from (seed, name) so values do not depend
// on creation order.

template <typename S>
MatR<S> init_normal(Eigen::Index rows, Eigen::Index cols, double stddev,
                    std::uint64_t seed, const std::string& name) {
  std::uint64_t state = seed ^ fnv1a(name);
  MatR<S> m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j)
      m(i, j) = static_cast<S>(unit_normal(state) * stddev);
  return m;
}

template <typename S>
MatR<S> init_glorot(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed,
                    const std::string& name) {
  std::uint64_t state = seed ^ fnv1a(name);
  double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
  MatR<S> m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j)
      m(i, j) = static_cast<S>((unit_uniform(state) * 2.0 - 1.0) * limit);
  return m;
}

template <typename S>
MatR<S> init_constant(Eigen::Index rows, Eigen::Index cols, double v) {
  return MatR<S>::Constant(rows, cols, static_cast<S>(v));
}

}  // namespace tricir::nn

#pragma once

// Central finite-difference gradient oracle for the tape engine. Independent
// of the backward pass: it only re-runs a forward closure at perturbed
// inputs. Used with double-precision tapes (h = 1e-4).

#include <functional>
#include <string>
#include <vector>

#include "tricir/core/common.hpp"

namespace fdtest {

using tricir::MatD;

struct FdReport {
  double max_rel_err = 0.0;
  std::string worst;
};

// `inputs` are the leaves to differentiate; `forward` maps them to a scalar.
// `analytic[k]` must hold dLoss/dInputs[k] (same shape).
inline FdReport check_gradients(std::vector<MatD>& inputs,
                                const std::function<double()>& forward,
                                const std::vector<const MatD*>& analytic,
                                double h = 1e-4) {
  FdReport rep;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    MatD& x = inputs[k];
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      for (Eigen::Index j = 0; j < x.cols(); ++j) {
        const double keep = x(i, j);
        x(i, j) = keep + h;
        const double fp = forward();
        x(i, j) = keep - h;
        const double fm = forward();
        x(i, j) = keep;
        const double fd = (fp - fm) / (2.0 * h);
        const double an = (*analytic[k])(i, j);
        const double denom = std::max({std::abs(fd), std::abs(an), 1.0});
        const double rel = std::abs(fd - an) / denom;
        if (rel > rep.max_rel_err) {
          rep.max_rel_err = rel;
          rep.worst = "input " + std::to_string(k) + " at (" + std::to_string(i) + "," +
                      std::to_string(j) + "): fd=" + std::to_string(fd) +
                      " analytic=" + std::to_string(an);
        }
      }
    }
  }
  return rep;
}

inline MatD random_mat(Eigen::Index rows, Eigen::Index cols, std::uint64_t& state,
                       double scale = 1.0) {
  MatD m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = tricir::unit_normal(state) * scale;
  return m;
}

}  // namespace fdtest

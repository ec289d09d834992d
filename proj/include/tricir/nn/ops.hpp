#pragma once

#include <cmath>
#include <memory>
#include <vector>

#include "tricir/nn/tensor.hpp"

namespace tricir::nn {

namespace detail {

inline void require_same_tape(const void* a, const void* b) {
  if (a != b) throw std::logic_error("operands from different tapes");
}

template <typename S>
bool any_requires(std::initializer_list<Var<S>> vs) {
  for (const auto& v : vs)
    if (v.requires_grad()) return true;
  return false;
}

inline double std_normal_cdf(double x) { return 0.5 * std::erfc(-x * 0.70710678118654752); }
inline double std_normal_pdf(double x) {
  return 0.39894228040143268 * std::exp(-0.5 * x * x);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Linear algebra

template <typename S>
Var<S> matmul(Var<S> a, Var<S> b) {
  detail::require_same_tape(a.tape, b.tape);
  if (a.cols() != b.rows())
    throw ShapeMismatch("matmul: " + Tape<S>::shape_str(a.value()) + " * " +
                        Tape<S>::shape_str(b.value()));
  Tape<S>& t = *a.tape;
  bool req = detail::any_requires({a, b});
  Var<S> out = t.alloc(a.value() * b.value(), req);
  if (req) {
    t.set_backward(out, [a, b, out](Tape<S>& t) {
      const auto& g = t.grad(out.id);
      if (a.requires_grad()) t.grad(a.id).noalias() += g * b.value().transpose();
      if (b.requires_grad()) t.grad(b.id).noalias() += a.value().transpose() * g;
    });
  }
  return out;
}

// A * B^T
template <typename S>
Var<S> matmul_nt(Var<S> a, Var<S> b) {
  detail::require_same_tape(a.tape, b.tape);
  if (a.cols() != b.cols())
    throw ShapeMismatch("matmul_nt: " + Tape<S>::shape_str(a.value()) + " * " +
                        Tape<S>::shape_str(b.value()) + "^T");
  Tape<S>& t = *a.tape;
  bool req = detail::any_requires({a, b});
  Var<S> out = t.alloc(a.value() * b.value().transpose(), req);
  if (req) {
    t.set_backward(out, [a, b, out](Tape<S>& t) {
      const auto& g = t.grad(out.id);
      if (a.requires_grad()) t.grad(a.id).noalias() += g * b.value();
      if (b.requires_grad()) t.grad(b.id).noalias() += g.transpose() * a.value();
    });
  }
  return out;
}

// A^T * B
template <typename S>
Var<S> matmul_tn(Var<S> a, Var<S> b) {
  detail::require_same_tape(a.tape, b.tape);
  if (a.rows() != b.rows())
    throw ShapeMismatch("matmul_tn: " + Tape<S>::shape_str(a.value()) + "^T * " +
                        Tape<S>::shape_str(b.value()));
  Tape<S>& t = *a.tape;
  bool req = detail::any_requires({a, b});
  Var<S> out = t.alloc(a.value().transpose() * b.value(), req);
  if (req) {
    t.set_backward(out, [a, b, out](Tape<S>& t) {
      const auto& g = t.grad(out.id);
      if (a.requires_grad()) t.grad(a.id).noalias() += b.value() * g.transpose();
      if (b.requires_grad()) t.grad(b.id).noalias() += a.value() * g;
    });
  }
  return out;
}

// Same-shape addition, or row-broadcast when b is 1 x d (bias add).
template <typename S>
Var<S> add(Var<S> a, Var<S> b) {
  detail::require_same_tape(a.tape, b.tape);
  Tape<S>& t = *a.tape;
  bool broadcast = b.rows() == 1 && a.rows() != 1;
  if (a.cols() != b.cols() || (!broadcast && a.rows() != b.rows()))
    throw ShapeMismatch("add: " + Tape<S>::shape_str(a.value()) + " + " +
                        Tape<S>::shape_str(b.value()));
  bool req = detail::any_requires({a, b});
  MatR<S> v = broadcast ? MatR<S>(a.value().rowwise() + b.value().row(0)) :
                          MatR<S>(a.value() + b.value());
  Var<S> out = t.alloc(std::move(v), req);
  if (req) {
    t.set_backward(out, [a, b, out, broadcast](Tape<S>& t) {
      const auto& g = t.grad(out.id);
      if (a.requires_grad()) t.grad(a.id) += g;
      if (b.requires_grad()) {
        if (broadcast) {
          t.grad(b.id).row(0) +=
              g.template cast<double>().colwise().sum().template cast<S>();
        } else {
          t.grad(b.id) += g;
        }
      }
    });
  }
  return out;
}

template <typename S>
Var<S> scale(Var<S> a, double c) {
  Tape<S>& t = *a.tape;
  bool req = a.requires_grad();
  Var<S> out = t.alloc(MatR<S>(a.value() * S(c)), req);
  if (req) {
    t.set_backward(out, [a, c, out](Tape<S>& t) {
      t.grad(a.id) += t.grad(out.id) * S(c);
    });
  }
  return out;
}

// Multiply by a learnable 1x1 scalar.
template <typename S>
Var<S> scale_by(Var<S> a, Var<S> s) {
  detail::require_same_tape(a.tape, s.tape);
  if (s.rows() != 1 || s.cols() != 1) throw ShapeMismatch("scale_by: scalar must be 1x1");
  Tape<S>& t = *a.tape;
  bool req = detail::any_requires({a, s});
  Var<S> out = t.alloc(MatR<S>(a.value() * s.value()(0, 0)), req);
  if (req) {
    t.set_backward(out, [a, s, out](Tape<S>& t) {
      const auto& g = t.grad(out.id);
      if (a.requires_grad()) t.grad(a.id) += g * s.value()(0, 0);
      if (s.requires_grad())
        t.grad(s.id)(0, 0) +=
            static_cast<S>(g.template cast<double>().cwiseProduct(
                a.value().template cast<double>()).sum());
    });
  }
  return out;
}

// x [n x d] scaled per row by a [n x 1].
template <typename S>
Var<S> mul_colvec(Var<S> x, Var<S> a) {
  detail::require_same_tape(x.tape, a.tape);
  if (a.cols() != 1 || a.rows() != x.rows())
    throw ShapeMismatch("mul_colvec: weights must be n x 1 matching rows");
  Tape<S>& t = *x.tape;
  bool req = detail::any_requires({x, a});
  Var<S> out = t.alloc(MatR<S>((x.value().array().colwise() * a.value().col(0).array()).matrix()), req);
  if (req) {
    t.set_backward(out, [x, a, out](Tape<S>& t) {
      const auto& g = t.grad(out.id);
      if (x.requires_grad())
        t.grad(x.id).array() += g.array().colwise() * a.value().col(0).array();
      if (a.requires_grad()) {
        auto& ga = t.grad(a.id);
        for (Eigen::Index i = 0; i < g.rows(); ++i)
          ga(i, 0) += static_cast<S>(g.row(i).template cast<double>().cwiseProduct(
              x.value().row(i).template cast<double>()).sum());
      }
    });
  }
  return out;
}

// Elementwise product.
template <typename S>
Var<S> hadamard(Var<S> a, Var<S> b) {
  detail::require_same_tape(a.tape, b.tape);
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw ShapeMismatch("hadamard: " + Tape<S>::shape_str(a.value()) + " vs " +
                        Tape<S>::shape_str(b.value()));
  Tape<S>& t = *a.tape;
  bool req = detail::any_requires({a, b});
  Var<S> out = t.alloc(MatR<S>(a.value().cwiseProduct(b.value())), req);
  if (req) {
    t.set_backward(out, [a, b, out](Tape<S>& t) {
      const auto& g = t.grad(out.id);
      if (a.requires_grad()) t.grad(a.id) += g.cwiseProduct(b.value());
      if (b.requires_grad()) t.grad(b.id) += g.cwiseProduct(a.value());
    });
  }
  return out;
}

template <typename S>
Var<S> concat_cols(Var<S> a, Var<S> b) {
  detail::require_same_tape(a.tape, b.tape);
  if (a.rows() != b.rows()) throw ShapeMismatch("concat_cols: row mismatch");
  Tape<S>& t = *a.tape;
  bool req = detail::any_requires({a, b});
  MatR<S> v(a.rows(), a.cols() + b.cols());
  v.leftCols(a.cols()) = a.value();
  v.rightCols(b.cols()) = b.value();
  Var<S> out = t.alloc(std::move(v), req);
  if (req) {
    const Eigen::Index ac = a.cols(), bc = b.cols();
    t.set_backward(out, [a, b, out, ac, bc](Tape<S>& t) {
      const auto& g = t.grad(out.id);
      if (a.requires_grad()) t.grad(a.id) += g.leftCols(ac);
      if (b.requires_grad()) t.grad(b.id) += g.rightCols(bc);
    });
  }
  return out;
}

// Row gather; with a parameter table this is an embedding lookup.
template <typename S>
Var<S> gather_rows(Var<S> x, std::vector<int> idx) {
  Tape<S>& t = *x.tape;
  MatR<S> v(static_cast<Eigen::Index>(idx.size()), x.cols());
  for (size_t i = 0; i < idx.size(); ++i) {
    if (idx[i] < 0 || idx[i] >= x.rows())
      throw ShapeMismatch("gather_rows: index out of range");
    v.row(static_cast<Eigen::Index>(i)) = x.value().row(idx[i]);
  }
  bool req = x.requires_grad();
  Var<S> out = t.alloc(std::move(v), req);
  if (req) {
    auto ids = std::make_shared<std::vector<int>>(std::move(idx));
    t.set_backward(out, [x, out, ids](Tape<S>& t) {
      const auto& g = t.grad(out.id);
      auto& gx = t.grad(x.id);
      for (size_t i = 0; i < ids->size(); ++i)
        gx.row((*ids)[i]) += g.row(static_cast<Eigen::Index>(i));
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// Elementwise

// Odd-symmetric log1p: sign(x) * log(1 + |x|); equals log1p on x >= 0.
template <typename S>
Var<S> log1p_sym(Var<S> x) {
  Tape<S>& t = *x.tape;
  MatR<S> v = x.value().unaryExpr([](S a) {
    double d = static_cast<double>(a);
    return static_cast<S>(d >= 0 ? std::log1p(d) : -std::log1p(-d));
  });
  bool req = x.requires_grad();
  Var<S> out = t.alloc(std::move(v), req);
  if (req) {
    t.set_backward(out, [x, out](Tape<S>& t) {
      const auto& g = t.grad(out.id);
      t.grad(x.id).array() +=
          g.array() / (x.value().array().abs() + S(1));
    });
  }
  return out;
}

// Exact GELU: x * Phi(x).
template <typename S>
Var<S> gelu(Var<S> x) {
  Tape<S>& t = *x.tape;
  MatR<S> v = x.value().unaryExpr([](S a) {
    double d = static_cast<double>(a);
    return static_cast<S>(d * detail::std_normal_cdf(d));
  });
  bool req = x.requires_grad();
  Var<S> out = t.alloc(std::move(v), req);
  if (req) {
    t.set_backward(out, [x, out](Tape<S>& t) {
      const auto& g = t.grad(out.id);
      auto& gx = t.grad(x.id);
      const auto& xv = x.value();
      for (Eigen::Index i = 0; i < xv.rows(); ++i)
        for (Eigen::Index j = 0; j < xv.cols(); ++j) {
          double d = static_cast<double>(xv(i, j));
          gx(i, j) += g(i, j) * static_cast<S>(detail::std_normal_cdf(d) +
                                               d * detail::std_normal_pdf(d));
        }
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// Normalization and reductions

template <typename S>
Var<S> softmax_rows(Var<S> x) {
  Tape<S>& t = *x.tape;
  MatR<S> p(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    Eigen::Matrix<double, 1, Eigen::Dynamic> row =
        x.value().row(i).template cast<double>();
    double m = row.maxCoeff();
    Eigen::Matrix<double, 1, Eigen::Dynamic> e = (row.array() - m).exp().matrix();
    p.row(i) = (e / e.sum()).template cast<S>();
  }
  bool req = x.requires_grad();
  Var<S> out = t.alloc(std::move(p), req);
  if (req) {
    t.set_backward(out, [x, out](Tape<S>& t) {
      const auto& g = t.grad(out.id);
      const auto& pv = t.value(out.id);
      auto& gx = t.grad(x.id);
      for (Eigen::Index i = 0; i < pv.rows(); ++i) {
        double dot = g.row(i).template cast<double>().cwiseProduct(
            pv.row(i).template cast<double>()).sum();
        gx.row(i).array() +=
            pv.row(i).array() * (g.row(i).array() - static_cast<S>(dot));
      }
    });
  }
  return out;
}

template <typename S>
Var<S> layer_norm(Var<S> x, Var<S> gamma, Var<S> beta, double eps = 1e-5) {
  detail::require_same_tape(x.tape, gamma.tape);
  detail::require_same_tape(x.tape, beta.tape);
  if (gamma.rows() != 1 || gamma.cols() != x.cols() || beta.rows() != 1 ||
      beta.cols() != x.cols())
    throw ShapeMismatch("layer_norm: gamma/beta must be 1 x d");
  Tape<S>& t = *x.tape;
  const Eigen::Index n = x.rows(), d = x.cols();
  auto xhat = std::make_shared<MatD>(n, d);
  auto inv_std = std::make_shared<Eigen::VectorXd>(n);
  MatR<S> v(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    Eigen::Matrix<double, 1, Eigen::Dynamic> row =
        x.value().row(i).template cast<double>();
    double mu = row.mean();
    double var = (row.array() - mu).square().mean();
    double inv = 1.0 / std::sqrt(var + eps);
    (*inv_std)(i) = inv;
    xhat->row(i) = ((row.array() - mu) * inv).matrix();
    v.row(i) = (xhat->row(i).array() * gamma.value().row(0).template cast<double>().array() +
                beta.value().row(0).template cast<double>().array())
                   .matrix()
                   .template cast<S>();
  }
  bool req = detail::any_requires({x, gamma, beta});
  Var<S> out = t.alloc(std::move(v), req);
  if (req) {
    t.set_backward(out, [x, gamma, beta, out, xhat, inv_std](Tape<S>& t) {
      const auto& g = t.grad(out.id);
      const Eigen::Index n = g.rows(), d = g.cols();
      if (gamma.requires_grad() || beta.requires_grad()) {
        Eigen::Matrix<double, 1, Eigen::Dynamic> dg =
            Eigen::Matrix<double, 1, Eigen::Dynamic>::Zero(d);
        Eigen::Matrix<double, 1, Eigen::Dynamic> db = dg;
        for (Eigen::Index i = 0; i < n; ++i) {
          dg += g.row(i).template cast<double>().cwiseProduct(xhat->row(i));
          db += g.row(i).template cast<double>();
        }
        if (gamma.requires_grad())
          t.grad(gamma.id).row(0) += dg.template cast<S>();
        if (beta.requires_grad()) t.grad(beta.id).row(0) += db.template cast<S>();
      }
      if (x.requires_grad()) {
        auto& gx = t.grad(x.id);
        Eigen::Matrix<double, 1, Eigen::Dynamic> gr =
            gamma.value().row(0).template cast<double>();
        for (Eigen::Index i = 0; i < n; ++i) {
          Eigen::Matrix<double, 1, Eigen::Dynamic> dxhat =
              g.row(i).template cast<double>().cwiseProduct(gr);
          double m1 = dxhat.mean();
          double m2 = dxhat.cwiseProduct(xhat->row(i)).mean();
          gx.row(i) += (((dxhat.array() - m1) - xhat->row(i).array() * m2) * (*inv_std)(i))
                           .matrix()
                           .template cast<S>();
        }
      }
    });
  }
  return out;
}

// Per-segment feature normalization with learnable scale, shift and
// mean-scale: out = gamma * (x - alpha*mu_seg) / sigma_seg + beta, with
// sigma^2 the per-segment mean of (x - alpha*mu)^2.
template <typename S>
Var<S> graph_norm(Var<S> x, const std::vector<int>& segments, int num_segments,
                  Var<S> gamma, Var<S> beta, Var<S> alpha, double eps = 1e-5) {
  detail::require_same_tape(x.tape, gamma.tape);
  if (static_cast<Eigen::Index>(segments.size()) != x.rows())
    throw ShapeMismatch("graph_norm: segment ids must match rows");
  if (gamma.cols() != x.cols() || beta.cols() != x.cols() || alpha.cols() != x.cols())
    throw ShapeMismatch("graph_norm: gamma/beta/alpha must be 1 x d");
  Tape<S>& t = *x.tape;
  const Eigen::Index n = x.rows(), d = x.cols();

  auto seg = std::make_shared<std::vector<int>>(segments);
  auto counts = std::make_shared<Eigen::VectorXd>(Eigen::VectorXd::Zero(num_segments));
  for (int s : segments) {
    if (s < 0 || s >= num_segments) throw ShapeMismatch("graph_norm: segment id out of range");
    (*counts)(s) += 1.0;
  }
  auto mu = std::make_shared<MatD>(MatD::Zero(num_segments, d));
  for (Eigen::Index i = 0; i < n; ++i)
    mu->row(segments[i]) += x.value().row(i).template cast<double>();
  for (int s = 0; s < num_segments; ++s)
    if ((*counts)(s) > 0) mu->row(s) /= (*counts)(s);

  Eigen::Matrix<double, 1, Eigen::Dynamic> al =
      alpha.value().row(0).template cast<double>();
  auto centered = std::make_shared<MatD>(n, d);
  for (Eigen::Index i = 0; i < n; ++i)
    centered->row(i) = (x.value().row(i).template cast<double>().array() -
                        al.array() * mu->row(segments[i]).array())
                           .matrix();
  auto inv_std = std::make_shared<MatD>(MatD::Zero(num_segments, d));
  for (Eigen::Index i = 0; i < n; ++i)
    inv_std->row(segments[i]) += centered->row(i).array().square().matrix();
  for (int s = 0; s < num_segments; ++s) {
    if ((*counts)(s) > 0)
      inv_std->row(s) =
          ((inv_std->row(s).array() / (*counts)(s)) + eps).rsqrt().matrix();
  }

  MatR<S> v(n, d);
  Eigen::Matrix<double, 1, Eigen::Dynamic> ga =
      gamma.value().row(0).template cast<double>();
  Eigen::Matrix<double, 1, Eigen::Dynamic> be =
      beta.value().row(0).template cast<double>();
  for (Eigen::Index i = 0; i < n; ++i)
    v.row(i) = (centered->row(i).array() * inv_std->row(segments[i]).array() * ga.array() +
                be.array())
                   .matrix()
                   .template cast<S>();

  bool req = detail::any_requires({x, gamma, beta, alpha});
  Var<S> out = t.alloc(std::move(v), req);
  if (req) {
    t.set_backward(out, [x, gamma, beta, alpha, out, seg, counts, mu, centered,
                         inv_std](Tape<S>& t) {
      const auto& g = t.grad(out.id);
      const Eigen::Index n = g.rows(), d = g.cols();
      const int ns = static_cast<int>(counts->size());
      Eigen::Matrix<double, 1, Eigen::Dynamic> ga =
          gamma.value().row(0).template cast<double>();
      Eigen::Matrix<double, 1, Eigen::Dynamic> al =
          alpha.value().row(0).template cast<double>();

      // gamma/beta
      if (gamma.requires_grad() || beta.requires_grad()) {
        Eigen::Matrix<double, 1, Eigen::Dynamic> dg =
            Eigen::Matrix<double, 1, Eigen::Dynamic>::Zero(d);
        Eigen::Matrix<double, 1, Eigen::Dynamic> db = dg;
        for (Eigen::Index i = 0; i < n; ++i) {
          Eigen::Matrix<double, 1, Eigen::Dynamic> xhat =
              centered->row(i).cwiseProduct(inv_std->row((*seg)[i]));
          dg += g.row(i).template cast<double>().cwiseProduct(xhat);
          db += g.row(i).template cast<double>();
        }
        if (gamma.requires_grad())
          t.grad(gamma.id).row(0) += dg.template cast<S>();
        if (beta.requires_grad()) t.grad(beta.id).row(0) += db.template cast<S>();
      }

      if (!x.requires_grad() && !alpha.requires_grad()) return;

      // dxhat = g * gamma; per-segment sums for the variance and mean paths
      MatD dxhat(n, d);
      for (Eigen::Index i = 0; i < n; ++i)
        dxhat.row(i) = g.row(i).template cast<double>().cwiseProduct(ga);
      MatD sum_dxc = MatD::Zero(ns, d);  // sum dxhat * centered per segment
      for (Eigen::Index i = 0; i < n; ++i)
        sum_dxc.row((*seg)[i]) += dxhat.row(i).cwiseProduct(centered->row(i));

      // dc_i = dxhat_i * inv - centered_i * inv^3 * sum_dxc / n_s
      MatD dc(n, d);
      for (Eigen::Index i = 0; i < n; ++i) {
        int s = (*seg)[i];
        Eigen::Array<double, 1, Eigen::Dynamic> inv = inv_std->row(s).array();
        dc.row(i) = (dxhat.row(i).array() * inv -
                     centered->row(i).array() * inv.pow(3) *
                         (sum_dxc.row(s).array() / (*counts)(s)))
                        .matrix();
      }
      MatD sum_dc = MatD::Zero(ns, d);
      for (Eigen::Index i = 0; i < n; ++i) sum_dc.row((*seg)[i]) += dc.row(i);

      if (alpha.requires_grad()) {
        Eigen::Matrix<double, 1, Eigen::Dynamic> da =
            Eigen::Matrix<double, 1, Eigen::Dynamic>::Zero(d);
        for (int s = 0; s < ns; ++s)
          if ((*counts)(s) > 0) da -= sum_dc.row(s).cwiseProduct(mu->row(s));
        t.grad(alpha.id).row(0) += da.template cast<S>();
      }
      if (x.requires_grad()) {
        auto& gx = t.grad(x.id);
        for (Eigen::Index i = 0; i < n; ++i) {
          int s = (*seg)[i];
          gx.row(i) += (dc.row(i).array() -
                        al.array() * sum_dc.row(s).array() / (*counts)(s))
                           .matrix()
                           .template cast<S>();
        }
      }
    });
  }
  return out;
}

// Row-wise unit normalization; an all-zero row stays zero (optionally flagged).
template <typename S>
Var<S> l2_normalize_rows(Var<S> x, bool* zero_row_flag = nullptr) {
  Tape<S>& t = *x.tape;
  const Eigen::Index n = x.rows(), d = x.cols();
  auto inv_norm = std::make_shared<Eigen::VectorXd>(n);
  MatR<S> v(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    double nrm = std::sqrt(x.value().row(i).template cast<double>().squaredNorm());
    if (nrm < 1e-30) {
      if (zero_row_flag) *zero_row_flag = true;
      (*inv_norm)(i) = 0.0;
      v.row(i).setZero();
    } else {
      (*inv_norm)(i) = 1.0 / nrm;
      v.row(i) = (x.value().row(i).template cast<double>() / nrm).template cast<S>();
    }
  }
  bool req = x.requires_grad();
  Var<S> out = t.alloc(std::move(v), req);
  if (req) {
    t.set_backward(out, [x, out, inv_norm](Tape<S>& t) {
      const auto& g = t.grad(out.id);
      const auto& y = t.value(out.id);
      auto& gx = t.grad(x.id);
      for (Eigen::Index i = 0; i < g.rows(); ++i) {
        double inv = (*inv_norm)(i);
        if (inv == 0.0) continue;
        Eigen::Matrix<double, 1, Eigen::Dynamic> yi =
            y.row(i).template cast<double>();
        Eigen::Matrix<double, 1, Eigen::Dynamic> gi =
            g.row(i).template cast<double>();
        double dot = yi.cwiseProduct(gi).sum();
        gx.row(i) += ((gi - yi * dot) * inv).template cast<S>();
      }
    });
  }
  return out;
}

// Mean over rows of -sum_j targets(i,j) * log softmax(logits)(i,j).
// `targets` rows must sum to 1; label smoothing is the caller's business.
template <typename S>
Var<S> cross_entropy_rows(Var<S> logits, MatR<S> targets) {
  if (targets.rows() != logits.rows() || targets.cols() != logits.cols())
    throw ShapeMismatch("cross_entropy_rows: target shape mismatch");
  Tape<S>& t = *logits.tape;
  const Eigen::Index n = logits.rows(), c = logits.cols();
  auto probs = std::make_shared<MatD>(n, c);
  auto tgt = std::make_shared<MatR<S>>(std::move(targets));
  double loss = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    Eigen::Matrix<double, 1, Eigen::Dynamic> row =
        logits.value().row(i).template cast<double>();
    double m = row.maxCoeff();
    Eigen::Matrix<double, 1, Eigen::Dynamic> e = (row.array() - m).exp();
    double z = e.sum();
    probs->row(i) = e / z;
    double lse = m + std::log(z);
    loss += tgt->row(i).template cast<double>().cwiseProduct(
        (lse - row.array()).matrix()).sum();
  }
  MatR<S> v(1, 1);
  v(0, 0) = static_cast<S>(loss / static_cast<double>(n));
  bool req = logits.requires_grad();
  Var<S> out = t.alloc(std::move(v), req);
  if (req) {
    t.set_backward(out, [logits, out, probs, tgt](Tape<S>& t) {
      const S g = t.grad(out.id)(0, 0);
      auto& gx = t.grad(logits.id);
      const double inv_n = 1.0 / static_cast<double>(probs->rows());
      gx += ((*probs - tgt->template cast<double>()) * (static_cast<double>(g) * inv_n))
                .template cast<S>();
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// Segment ops (per-graph / per-destination aggregation)

template <typename S>
Var<S> segment_sum(Var<S> x, const std::vector<int>& segments, int num_segments) {
  if (static_cast<Eigen::Index>(segments.size()) != x.rows())
    throw ShapeMismatch("segment_sum: segment ids must match rows");
  Tape<S>& t = *x.tape;
  MatD acc = MatD::Zero(num_segments, x.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    if (segments[i] < 0 || segments[i] >= num_segments)
      throw ShapeMismatch("segment_sum: segment id out of range");
    acc.row(segments[i]) += x.value().row(i).template cast<double>();
  }
  bool req = x.requires_grad();
  Var<S> out = t.alloc(acc.template cast<S>(), req);
  if (req) {
    auto seg = std::make_shared<std::vector<int>>(segments);
    t.set_backward(out, [x, out, seg](Tape<S>& t) {
      const auto& g = t.grad(out.id);
      auto& gx = t.grad(x.id);
      for (Eigen::Index i = 0; i < gx.rows(); ++i) gx.row(i) += g.row((*seg)[i]);
    });
  }
  return out;
}

template <typename S>
Var<S> segment_mean(Var<S> x, const std::vector<int>& segments, int num_segments) {
  if (static_cast<Eigen::Index>(segments.size()) != x.rows())
    throw ShapeMismatch("segment_mean: segment ids must match rows");
  Tape<S>& t = *x.tape;
  auto counts = std::make_shared<Eigen::VectorXd>(Eigen::VectorXd::Zero(num_segments));
  for (int s : segments) {
    if (s < 0 || s >= num_segments)
      throw ShapeMismatch("segment_mean: segment id out of range");
    (*counts)(s) += 1.0;
  }
  MatD acc = MatD::Zero(num_segments, x.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i)
    acc.row(segments[i]) += x.value().row(i).template cast<double>();
  for (int s = 0; s < num_segments; ++s)
    if ((*counts)(s) > 0) acc.row(s) /= (*counts)(s);
  bool req = x.requires_grad();
  Var<S> out = t.alloc(acc.template cast<S>(), req);
  if (req) {
    auto seg = std::make_shared<std::vector<int>>(segments);
    t.set_backward(out, [x, out, seg, counts](Tape<S>& t) {
      const auto& g = t.grad(out.id);
      auto& gx = t.grad(x.id);
      for (Eigen::Index i = 0; i < gx.rows(); ++i) {
        int s = (*seg)[i];
        gx.row(i) += (g.row(s).template cast<double>() / (*counts)(s)).template cast<S>();
      }
    });
  }
  return out;
}

// Softmax of a column vector within each segment.
template <typename S>
Var<S> segment_softmax(Var<S> z, const std::vector<int>& segments, int num_segments) {
  if (z.cols() != 1) throw ShapeMismatch("segment_softmax: logits must be n x 1");
  if (static_cast<Eigen::Index>(segments.size()) != z.rows())
    throw ShapeMismatch("segment_softmax: segment ids must match rows");
  Tape<S>& t = *z.tape;
  const Eigen::Index n = z.rows();
  Eigen::VectorXd mx = Eigen::VectorXd::Constant(num_segments, -1e300);
  for (Eigen::Index i = 0; i < n; ++i) {
    int s = segments[i];
    if (s < 0 || s >= num_segments)
      throw ShapeMismatch("segment_softmax: segment id out of range");
    mx(s) = std::max(mx(s), static_cast<double>(z.value()(i, 0)));
  }
  Eigen::VectorXd denom = Eigen::VectorXd::Zero(num_segments);
  Eigen::VectorXd ex(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    ex(i) = std::exp(static_cast<double>(z.value()(i, 0)) - mx(segments[i]));
    denom(segments[i]) += ex(i);
  }
  MatR<S> v(n, 1);
  for (Eigen::Index i = 0; i < n; ++i)
    v(i, 0) = static_cast<S>(ex(i) / denom(segments[i]));
  bool req = z.requires_grad();
  Var<S> out = t.alloc(std::move(v), req);
  if (req) {
    auto seg = std::make_shared<std::vector<int>>(segments);
    const int ns = num_segments;
    t.set_backward(out, [z, out, seg, ns](Tape<S>& t) {
      const auto& g = t.grad(out.id);
      const auto& a = t.value(out.id);
      Eigen::VectorXd dot = Eigen::VectorXd::Zero(ns);
      for (Eigen::Index i = 0; i < a.rows(); ++i)
        dot((*seg)[i]) += static_cast<double>(a(i, 0)) * static_cast<double>(g(i, 0));
      auto& gz = t.grad(z.id);
      for (Eigen::Index i = 0; i < a.rows(); ++i)
        gz(i, 0) += static_cast<S>(static_cast<double>(a(i, 0)) *
                                   (static_cast<double>(g(i, 0)) - dot((*seg)[i])));
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// Scalar reductions

template <typename S>
Var<S> sum_all(Var<S> x) {
  Tape<S>& t = *x.tape;
  MatR<S> v(1, 1);
  v(0, 0) = static_cast<S>(x.value().template cast<double>().sum());
  bool req = x.requires_grad();
  Var<S> out = t.alloc(std::move(v), req);
  if (req) {
    t.set_backward(out, [x, out](Tape<S>& t) {
      t.grad(x.id).array() += t.grad(out.id)(0, 0);
    });
  }
  return out;
}

template <typename S>
Var<S> mean_all(Var<S> x) {
  Tape<S>& t = *x.tape;
  const double inv = 1.0 / static_cast<double>(x.rows() * x.cols());
  MatR<S> v(1, 1);
  v(0, 0) = static_cast<S>(x.value().template cast<double>().sum() * inv);
  bool req = x.requires_grad();
  Var<S> out = t.alloc(std::move(v), req);
  if (req) {
    t.set_backward(out, [x, out, inv](Tape<S>& t) {
      t.grad(x.id).array() += t.grad(out.id)(0, 0) * static_cast<S>(inv);
    });
  }
  return out;
}

// Inverted dropout; identity when not training.
template <typename S>
Var<S> dropout(Var<S> x, double p, std::uint64_t& rng_state, bool training) {
  if (!training || p <= 0.0) return x;
  Tape<S>& t = *x.tape;
  auto mask = std::make_shared<MatR<S>>(x.rows(), x.cols());
  const S keep_scale = static_cast<S>(1.0 / (1.0 - p));
  for (Eigen::Index i = 0; i < x.rows(); ++i)
    for (Eigen::Index j = 0; j < x.cols(); ++j)
      (*mask)(i, j) = unit_uniform(rng_state) < p ? S(0) : keep_scale;
  bool req = x.requires_grad();
  Var<S> out = t.alloc(MatR<S>(x.value().cwiseProduct(*mask)), req);
  if (req) {
    t.set_backward(out, [x, out, mask](Tape<S>& t) {
      t.grad(x.id) += t.grad(out.id).cwiseProduct(*mask);
    });
  }
  return out;
}

// Pairwise cosine similarity: rows of a vs rows of b.
template <typename S>
Var<S> cosine_similarity(Var<S> a, Var<S> b) {
  return matmul_nt(l2_normalize_rows(a), l2_normalize_rows(b));
}

}  // namespace tricir::nn

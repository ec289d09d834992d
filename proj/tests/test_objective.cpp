#include <doctest.h>

#include "fd_oracle.hpp"
#include "tricir/nn/optim.hpp"
#include "tricir/obj/objective.hpp"

using namespace tricir;
using namespace tricir::obj;
using nn::Tape;
using nn::Var;

namespace {

// Derived constants (2x2 softmax by hand and log of the class count).
constexpr double kTwoWayLoss = 0.31326168751822286;   // log(1 + e^-1)
constexpr double kSixWayLoss = 6.0 * kTwoWayLoss;     // 1.8795701...
constexpr double kLn19 = 2.9444389791664403;

// Two orthonormal rows e1, e2 in a d-dim space.
MatD orthonormal_pair(int d) {
  MatD m = MatD::Zero(2, d);
  m(0, 0) = 1.0;
  m(1, 1) = 1.0;
  return m;
}

enc::ModelConfig tiny_config() {
  enc::ModelConfig c;
  c.d_g = 8;
  c.d_type = 4;
  c.d_cont = 4;
  c.proj_hidden = 16;
  c.d_embed = 12;
  c.text_dim = 6;
  c.image_dim = 7;
  c.dropout = 0.0;
  return c;
}

}  // namespace

TEST_CASE("batch of one gives zero loss") {
  Tape<double> t;
  MatD a(1, 4);
  a << 1, 0, 0, 0;
  Var<double> scale = t.constant(MatD::Ones(1, 1));
  Var<double> loss = info_nce_direction(t.constant(a), t.constant(a), scale, 0.1);
  CHECK(loss.value()(0, 0) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("orthonormal pair at unit scale gives log(1+e^-1) per direction") {
  Tape<double> t;
  MatD e = orthonormal_pair(6);
  Var<double> scale = t.constant(MatD::Ones(1, 1));
  Var<double> loss = info_nce_direction(t.constant(e), t.constant(e), scale, 0.0);
  CHECK(loss.value()(0, 0) == doctest::Approx(kTwoWayLoss).epsilon(1e-10));
}

TEST_CASE("equal similarities give log B") {
  Tape<double> t;
  const int B = 7;
  MatD same = MatD::Zero(B, 5);
  for (int i = 0; i < B; ++i) same(i, 0) = 1.0;  // every pair has sim 1
  Var<double> scale = t.constant(MatD::Ones(1, 1));
  Var<double> loss = info_nce_direction(t.constant(same), t.constant(same), scale, 0.0);
  CHECK(loss.value()(0, 0) == doctest::Approx(std::log(double(B))).epsilon(1e-10));
}

TEST_CASE("six directions sum over the orthonormal configuration") {
  Tape<double> t;
  MatD e = orthonormal_pair(6);
  Var<double> vc = t.constant(e), vs = t.constant(e), vt = t.constant(e);
  Var<double> scale = t.constant(MatD::Ones(1, 1));
  ObjectiveConfig cfg;
  cfg.label_smoothing = 0.0;
  Var<double> loss = tri_modal_loss(vc, vs, vt, scale, cfg);
  CHECK(loss.value()(0, 0) == doctest::Approx(kSixWayLoss).epsilon(1e-8));
}

TEST_CASE("phase-1 set has exactly four directional terms") {
  Tape<double> t;
  MatD e = orthonormal_pair(6);
  Var<double> vc = t.constant(e), vs = t.constant(e), vt = t.constant(e);
  Var<double> scale = t.constant(MatD::Ones(1, 1));
  ObjectiveConfig cfg;
  cfg.label_smoothing = 0.0;
  cfg.directions.assign(kCodeDirections.begin(), kCodeDirections.end());
  Var<double> loss = tri_modal_loss(vc, vs, vt, scale, cfg);
  CHECK(loss.value()(0, 0) == doctest::Approx(4.0 * kTwoWayLoss).epsilon(1e-8));
}

TEST_CASE("consistent batch permutation leaves the loss unchanged") {
  std::uint64_t st = 21;
  Tape<double> t;
  const int B = 5, d = 8;
  Tape<double> tp;
  MatD c = fdtest::random_mat(B, d, st), s = fdtest::random_mat(B, d, st),
       x = fdtest::random_mat(B, d, st);
  auto normalize = [](MatD m) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) m.row(i) /= m.row(i).norm();
    return m;
  };
  c = normalize(c), s = normalize(s), x = normalize(x);
  std::vector<int> perm = {3, 1, 4, 0, 2};
  MatD cp(B, d), sp(B, d), xp(B, d);
  for (int i = 0; i < B; ++i) {
    cp.row(i) = c.row(perm[i]);
    sp.row(i) = s.row(perm[i]);
    xp.row(i) = x.row(perm[i]);
  }
  ObjectiveConfig cfg;
  Var<double> scale = t.constant(MatD::Constant(1, 1, 14.0));
  Var<double> scale_p = tp.constant(MatD::Constant(1, 1, 14.0));
  double a = tri_modal_loss(t.constant(c), t.constant(s), t.constant(x), scale, cfg)
                 .value()(0, 0);
  double b = tri_modal_loss(tp.constant(cp), tp.constant(sp), tp.constant(xp), scale_p, cfg)
                 .value()(0, 0);
  CHECK(a == doctest::Approx(b).epsilon(1e-12));
}

TEST_CASE("batch mismatch throws") {
  Tape<double> t;
  Var<double> a = t.constant(MatD::Zero(2, 4));
  Var<double> b = t.constant(MatD::Zero(3, 4));
  Var<double> scale = t.constant(MatD::Ones(1, 1));
  CHECK_THROWS_AS(info_nce_direction(a, b, scale, 0.0), BatchMismatch);
}

TEST_CASE("aux classifier: uniform logits give ln 19, labels range-checked") {
  enc::TriModalModel<double> m(tiny_config(), 17);
  // zero classifier weights -> all logits zero -> uniform over 19 classes
  m.store().at("objective.cls.w1").value.setZero();
  m.store().at("objective.cls.w2").value.setZero();
  Tape<double> t;
  std::uint64_t st = 4;
  MatD vt = fdtest::random_mat(3, tiny_config().d_embed, st);
  MatD vc = fdtest::random_mat(3, tiny_config().d_embed, st);
  std::vector<int> labels = {0, 7, 18};
  Var<double> loss =
      aux_cls_loss(m, t, t.constant(vt), t.constant(vc), labels);
  CHECK(loss.value()(0, 0) == doctest::Approx(kLn19).epsilon(1e-9));

  std::vector<int> bad = {0, 19, 3};
  CHECK_THROWS_AS(aux_cls_loss(m, t, t.constant(vt), t.constant(vc), bad),
                  LabelOutOfRange);
}

TEST_CASE("identical text and code embeddings average to either CE term") {
  enc::TriModalModel<double> m(tiny_config(), 17);
  Tape<double> t;
  std::uint64_t st = 8;
  MatD v = fdtest::random_mat(4, tiny_config().d_embed, st);
  std::vector<int> labels = {1, 2, 3, 4};
  Var<double> both = aux_cls_loss(m, t, t.constant(v), t.constant(v), labels);
  Var<double> logits = m.classify(t, t.constant(v));
  Var<double> one = nn::cross_entropy_rows(logits, one_hot_targets<double>(labels, 19));
  CHECK(both.value()(0, 0) == doctest::Approx(one.value()(0, 0)).epsilon(1e-12));
}

TEST_CASE("total loss arithmetic on the derived configuration") {
  enc::TriModalModel<double> m(tiny_config(), 17);
  m.store().at("objective.cls.w1").value.setZero();
  m.store().at("objective.cls.w2").value.setZero();
  m.store().at("objective.logit_scale").value(0, 0) = 1.0;
  Tape<double> t;
  MatD e = orthonormal_pair(tiny_config().d_embed);
  std::vector<int> labels = {0, 1};
  ObjectiveConfig cfg;
  cfg.label_smoothing = 0.0;
  cfg.aux_weight = 0.5;
  Var<double> align, cls;
  Var<double> total = total_loss(m, t, t.constant(e), t.constant(e), t.constant(e),
                                 labels, cfg, &align, &cls);
  CHECK(align.value()(0, 0) == doctest::Approx(kSixWayLoss).epsilon(1e-8));
  CHECK(cls.value()(0, 0) == doctest::Approx(kLn19).epsilon(1e-9));
  CHECK(total.value()(0, 0) ==
        doctest::Approx(kSixWayLoss + 0.5 * kLn19).epsilon(1e-8));
  CHECK(total.value()(0, 0) == doctest::Approx(3.35179).epsilon(1e-4));

  ObjectiveConfig no_aux = cfg;
  no_aux.aux_weight = 0.0;
  Var<double> only_align = total_loss(m, t, t.constant(e), t.constant(e),
                                      t.constant(e), labels, no_aux);
  CHECK(only_align.value()(0, 0) == doctest::Approx(kSixWayLoss).epsilon(1e-8));
}

TEST_CASE("total loss gradient matches finite differences end to end") {
  // Gradients through encoders + objective for every trainable parameter.
  enc::ModelConfig cfg = tiny_config();
  enc::TriModalModel<double> m(cfg, 23);
  using graph::CircuitGraph;
  using graph::Relation;
  CircuitGraph g1, g2;
  g1.node_kinds = {5, 6};
  g1.node_cont = {{0, 0, 10, 0, 0, 0, 0, 0}, {0, 0, 0, 22, 0, 0, 0, 0}};
  g1.node_ids = {"r1", "c1"};
  g1.edges = {{0, 1, Relation::CTerminal},
              {1, 0, Relation::RTerminal},
              {0, 1, Relation::SharedNet},
              {1, 0, Relation::SharedNet}};
  g2.node_kinds = {0, 5};
  g2.node_cont = {{2, 1, 0, 0, 0, 0, 0, 0}, {0, 0, 4.7, 0, 0, 0, 0, 0}};
  g2.node_ids = {"m1", "r9"};
  g2.edges = {{0, 1, Relation::RTerminal},
              {1, 0, Relation::MosGate},
              {0, 1, Relation::SharedNet},
              {1, 0, Relation::SharedNet}};
  enc::GraphBatch gb = enc::make_graph_batch({&g1, &g2});
  enc::TextBatch tb = enc::make_text_batch(
      {enc::tokenize("an rc low-pass filter", cfg.text_vocab),
       enc::tokenize("a common source amplifier with 4.7k load", cfg.text_vocab)});
  std::uint64_t st = 31;
  MatD img = fdtest::random_mat(2, cfg.image_dim, st, 0.5);
  std::vector<int> labels = {14, 0};
  ObjectiveConfig ocfg;

  auto forward = [&]() {
    nn::Tape<double> t;
    auto vc = m.encode_circuit_batch(t, gb, false, nullptr);
    auto vi = m.encode_image_batch(t, img);
    auto vt = m.encode_text_batch(t, tb);
    return total_loss(m, t, vc, vi, vt, labels, ocfg).value()(0, 0);
  };

  m.store().zero_grad();
  {
    nn::Tape<double> t;
    auto vc = m.encode_circuit_batch(t, gb, false, nullptr);
    auto vi = m.encode_image_batch(t, img);
    auto vt = m.encode_text_batch(t, tb);
    t.backward(total_loss(m, t, vc, vi, vt, labels, ocfg));
  }

  const double h = 1e-4;
  double worst = 0.0;
  std::string worst_param;
  for (auto& p : m.store()) {
    // probe a few entries per parameter to keep the runtime sane
    std::uint64_t probe = fnv1a(p.name);
    Eigen::Index count = p.value.size();
    for (int probe_i = 0; probe_i < std::min<Eigen::Index>(count, 4); ++probe_i) {
      Eigen::Index idx = static_cast<Eigen::Index>(splitmix64(probe) % count);
      double keep = p.value.data()[idx];
      p.value.data()[idx] = keep + h;
      double fp = forward();
      p.value.data()[idx] = keep - h;
      double fm = forward();
      p.value.data()[idx] = keep;
      double fd = (fp - fm) / (2 * h);
      double an = p.grad.data()[idx];
      double rel = std::abs(fd - an) / std::max({std::abs(fd), std::abs(an), 1.0});
      if (rel > worst) {
        worst = rel;
        worst_param = p.name;
      }
    }
  }
  INFO("worst parameter: ", worst_param);
  CHECK(worst < 1e-4);
}

TEST_CASE("logit scale stays in (0, 100] after steps") {
  enc::TriModalModel<float> m(tiny_config(), 29);
  auto& scale = m.store().at("objective.logit_scale");
  scale.value(0, 0) = 99.9f;
  scale.grad(0, 0) = -100.0f;  // pushes the value up
  nn::AdamW<float> opt(m.store(), {{"", 1.0}});
  opt.step();
  m.clamp_logit_scale();
  CHECK(scale.value(0, 0) <= 100.0f);
  CHECK(scale.value(0, 0) > 0.0f);

  scale.value(0, 0) = 1e-3f;
  scale.grad(0, 0) = 100.0f;  // pushes the value down
  nn::AdamW<float> opt2(m.store(), {{"", 1.0}});
  opt2.step();
  m.clamp_logit_scale();
  CHECK(scale.value(0, 0) > 0.0f);
}

TEST_CASE("default temperature initialization") {
  enc::TriModalModel<float> m(tiny_config(), 1);
  CHECK(m.store().at("objective.logit_scale").value(0, 0) ==
        doctest::Approx(1.0 / 0.07).epsilon(1e-6));
}

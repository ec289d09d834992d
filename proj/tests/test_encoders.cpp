#include <doctest.h>

#include <algorithm>
#include <cstring>

#include "tricir/enc/model.hpp"
#include "tricir/nn/optim.hpp"
#include "tricir/spice/parser.hpp"

using namespace tricir;
using namespace tricir::enc;
using graph::build_graph;
using spice::parse_netlist;

namespace {

ModelConfig tiny_config() {
  ModelConfig c;
  c.d_g = 2;
  c.d_type = 1;
  c.d_cont = 1;
  c.rgcn_layers = 1;
  c.graph_norm = false;
  c.proj_hidden = 8;
  c.d_embed = 6;
  c.text_dim = 4;
  c.image_dim = 5;
  c.dropout = 0.0;
  return c;
}

// Model surgery: node features become [emb(kind), 0] exactly.
void pin_featurizer(TriModalModel<double>& m) {
  auto& P = m.store();
  P.at("graph.featurizer.cont_w").value.setZero();
  P.at("graph.featurizer.cont_b").value.setZero();
  MatD fuse(2, 2);
  fuse << 1, 0, 0, 1;
  P.at("graph.featurizer.fuse").value = fuse;
  P.at("graph.featurizer.type_embed").value.setZero();
}

ModelConfig small_config() {
  ModelConfig c;
  c.d_g = 24;
  c.d_type = 8;
  c.d_cont = 8;
  c.proj_hidden = 32;
  c.d_embed = 16;
  c.text_dim = 12;
  c.image_dim = 10;
  return c;
}

const char* kAmpDeck =
    "M1 out in 0 0 NMOS W=20u L=1u\n"
    "RD vdd out 10k\n"
    "V1 vdd 0 3.3\n"
    "V2 in 0 1.2\n"
    "C1 out 0 1p\n"
    ".model NMOS NMOS (VTO=0.7)\n";

}  // namespace

TEST_CASE("node with zero in-edges passes through the rgcn layer") {
  TriModalModel<double> m(tiny_config(), 7);
  pin_featurizer(m);
  m.store().at("graph.featurizer.type_embed").value(
      static_cast<int>(spice::DeviceKind::Resistor), 0) = 0.7;
  graph::CircuitGraph g;
  g.node_kinds = {static_cast<int>(spice::DeviceKind::Resistor)};
  g.node_cont = {{}};
  g.node_ids = {"r1"};
  nn::Tape<double> t;
  GraphBatch b = make_graph_batch({&g});
  nn::Var<double> h = m.graph_node_states(t, b);
  CHECK(h.value()(0, 0) == doctest::Approx(0.7).epsilon(1e-12));
  CHECK(h.value()(0, 1) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("single neighbor with identity weights gives the gelu table") {
  TriModalModel<double> m(tiny_config(), 7);
  pin_featurizer(m);
  auto& P = m.store();
  // h_u = [1,0] (resistor), h_v = [0,0] (capacitor)
  P.at("graph.featurizer.type_embed").value(
      static_cast<int>(spice::DeviceKind::Resistor), 0) = 1.0;
  MatD eye(2, 2);
  eye << 1, 0, 0, 1;
  P.at(TriModalModel<double>::layer_rel_name(0,
      static_cast<int>(graph::Relation::CTerminal))).value = eye;

  graph::CircuitGraph g;
  g.node_kinds = {static_cast<int>(spice::DeviceKind::Resistor),
                  static_cast<int>(spice::DeviceKind::Capacitor)};
  g.node_cont = {{}, {}};
  g.node_ids = {"r1", "c1"};
  g.edges = {{0, 1, graph::Relation::CTerminal}};

  nn::Tape<double> t;
  GraphBatch b = make_graph_batch({&g});
  nn::Var<double> h = m.graph_node_states(t, b);
  CHECK(h.value()(1, 0) == doctest::Approx(0.8413447460685429).epsilon(1e-9));
  CHECK(h.value()(1, 1) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("two same-relation neighbors average before the weight matrix") {
  TriModalModel<double> m(tiny_config(), 7);
  pin_featurizer(m);
  auto& P = m.store();
  // u1 = [2,0], u2 = [0,0]; mean = [1,0]
  P.at("graph.featurizer.type_embed").value(
      static_cast<int>(spice::DeviceKind::Resistor), 0) = 2.0;
  MatD eye(2, 2);
  eye << 1, 0, 0, 1;
  P.at(TriModalModel<double>::layer_rel_name(0,
      static_cast<int>(graph::Relation::LTerminal))).value = eye;

  graph::CircuitGraph g;
  g.node_kinds = {static_cast<int>(spice::DeviceKind::Resistor),
                  static_cast<int>(spice::DeviceKind::Capacitor),
                  static_cast<int>(spice::DeviceKind::Inductor)};
  g.node_cont = {{}, {}, {}};
  g.node_ids = {"r1", "c1", "l1"};
  g.edges = {{0, 2, graph::Relation::LTerminal}, {1, 2, graph::Relation::LTerminal}};

  nn::Tape<double> t;
  GraphBatch b = make_graph_batch({&g});
  nn::Var<double> h = m.graph_node_states(t, b);
  // pre-activation [1,0] -> gelu -> [0.84134, 0]
  CHECK(h.value()(2, 0) == doctest::Approx(0.8413447460685429).epsilon(1e-9));
  CHECK(h.value()(2, 1) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("attention pool: identical nodes give the node vector back") {
  TriModalModel<double> m(tiny_config(), 7);
  pin_featurizer(m);
  m.store().at("graph.featurizer.type_embed").value(
      static_cast<int>(spice::DeviceKind::Resistor), 0) = 0.4;
  graph::CircuitGraph g;
  g.node_kinds = {static_cast<int>(spice::DeviceKind::Resistor),
                  static_cast<int>(spice::DeviceKind::Resistor)};
  g.node_cont = {{}, {}};
  g.node_ids = {"a", "b"};
  nn::Tape<double> t;
  GraphBatch b = make_graph_batch({&g});
  nn::Var<double> h = m.graph_node_states(t, b);
  nn::Var<double> pooled = m.attention_pool(t, h, b);
  CHECK(pooled.value()(0, 0) == doctest::Approx(0.4).epsilon(1e-12));
  CHECK(pooled.value()(0, 1) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("attention pool: zero vector is mean pooling, unit vector reweights") {
  // direct composition over the same ops the encoder uses
  nn::Tape<double> t;
  MatD h(2, 1);
  h << 1.0, 0.0;
  std::vector<int> seg = {0, 0};
  // w = 0 -> uniform weights
  nn::Var<double> z0 = nn::matmul(t.constant(h), t.constant(MatD::Zero(1, 1)));
  nn::Var<double> a0 = nn::segment_softmax(z0, seg, 1);
  CHECK(a0.value()(0, 0) == doctest::Approx(0.5));
  CHECK(a0.value()(1, 0) == doctest::Approx(0.5));
  // w = [1]: alpha = softmax([1,0]) = [0.7311, 0.2689], g = 0.7311
  nn::Var<double> z1 = nn::matmul(t.constant(h), t.constant(MatD::Ones(1, 1)));
  nn::Var<double> a1 = nn::segment_softmax(z1, seg, 1);
  CHECK(a1.value()(0, 0) == doctest::Approx(0.7310585786300049).epsilon(1e-9));
  CHECK(a1.value()(1, 0) == doctest::Approx(0.2689414213699951).epsilon(1e-9));
  nn::Var<double> pooled =
      nn::segment_sum(nn::mul_colvec(t.constant(h), a1), seg, 1);
  CHECK(pooled.value()(0, 0) == doctest::Approx(0.7310585786300049).epsilon(1e-9));
}

TEST_CASE("encode_circuit emits a unit 768-d vector by default") {
  ModelConfig cfg;  // paper-scale defaults
  cfg.d_g = 32;     // keep the test fast; embedding dim stays 768
  cfg.proj_hidden = 64;
  TriModalModel<float> m(cfg, 11);
  auto g = build_graph(parse_netlist(kAmpDeck));
  Embedding e = m.encode_circuit(g);
  CHECK(e.vec.size() == 768);
  CHECK(std::abs(e.vec.norm() - 1.0f) < 1e-6f);
  CHECK(e.modality == Modality::Code);
}

TEST_CASE("net renaming leaves the circuit embedding bit-identical") {
  TriModalModel<float> m(small_config(), 3);
  auto a = build_graph(parse_netlist(kAmpDeck));
  const char* renamed =
      "M1 q1 q2 q3 q3 NMOS W=20u L=1u\n"
      "RD q4 q1 10k\n"
      "V1 q4 q3 3.3\n"
      "V2 q2 q3 1.2\n"
      "C1 q1 q3 1p\n"
      ".model NMOS NMOS (VTO=0.7)\n";
  auto b = build_graph(parse_netlist(renamed));
  Embedding ea = m.encode_circuit(a);
  Embedding eb = m.encode_circuit(b);
  CHECK(std::memcmp(ea.vec.data(), eb.vec.data(),
                    sizeof(float) * static_cast<size_t>(ea.vec.size())) == 0);
}

TEST_CASE("node permutation changes the embedding by at most 1e-5") {
  TriModalModel<float> m(small_config(), 3);
  auto a = build_graph(parse_netlist(kAmpDeck));
  const char* permuted =
      "C1 out 0 1p\n"
      "V2 in 0 1.2\n"
      "RD vdd out 10k\n"
      "V1 vdd 0 3.3\n"
      "M1 out in 0 0 NMOS W=20u L=1u\n"
      ".model NMOS NMOS (VTO=0.7)\n";
  auto b = build_graph(parse_netlist(permuted));
  Embedding ea = m.encode_circuit(a);
  Embedding eb = m.encode_circuit(b);
  CHECK((ea.vec - eb.vec).cwiseAbs().maxCoeff() < 1e-5f);
}

TEST_CASE("two-hop locality of node states (norm disabled)") {
  ModelConfig cfg = small_config();
  cfg.graph_norm = false;
  TriModalModel<float> m(cfg, 5);
  // chain r1 - r2 - r3 - r4 - r5 - r6; modify r6's value
  auto chain = [](const char* last) {
    std::string d;
    d += "R1 n1 n2 1k\nR2 n2 n3 1k\nR3 n3 n4 1k\nR4 n4 n5 1k\nR5 n5 n6 1k\n";
    d += last;
    return d;
  };
  auto a = build_graph(parse_netlist(chain("R6 n6 n7 1k\n")));
  auto b = build_graph(parse_netlist(chain("R6 n6 n7 47k\n")));
  nn::Tape<float> ta, tb;
  GraphBatch ba = make_graph_batch({&a});
  GraphBatch bb = make_graph_batch({&b});
  auto ha = m.graph_node_states(ta, ba);
  auto hb = m.graph_node_states(tb, bb);
  // r1..r3 are >= 3 hops from r6: identical states
  for (int v = 0; v < 3; ++v)
    CHECK((ha.value().row(v) - hb.value().row(v)).cwiseAbs().maxCoeff() == 0.0f);
  // r5 and r6 must differ (1 and 0 hops away)
  CHECK((ha.value().row(5) - hb.value().row(5)).cwiseAbs().maxCoeff() > 0.0f);
}

TEST_CASE("text encoder: determinism, whitespace, unit norm, empty input") {
  TriModalModel<float> m(small_config(), 9);
  Embedding a = m.encode_text("a two-stage op-amp with miller compensation");
  Embedding b = m.encode_text("  a   two-stage op-amp   with miller compensation ");
  CHECK(std::memcmp(a.vec.data(), b.vec.data(), sizeof(float) * static_cast<size_t>(a.vec.size())) == 0);
  CHECK(std::abs(a.vec.norm() - 1.0f) < 1e-6f);
  CHECK(a.modality == Modality::Text);
  CHECK_THROWS_AS(m.encode_text(""), EmptyInput);
  CHECK_THROWS_AS(m.encode_text("   "), EmptyInput);
}

TEST_CASE("image encoder: zero feature vector still yields a unit vector") {
  TriModalModel<float> m(small_config(), 9);
  std::vector<float> zero(static_cast<size_t>(m.config().image_dim), 0.0f);
  Embedding e = m.encode_image_features(zero);
  CHECK(std::abs(e.vec.norm() - 1.0f) < 1e-6f);
  CHECK(e.modality == Modality::Image);
}

TEST_CASE("tokenize keeps value tokens together") {
  auto a = tokenize("A 10k resistor and 2.2u cap", 8192);
  auto b = tokenize("a 10K resistor and 2.2U cap", 8192);
  CHECK(a == b);
  CHECK(a.size() == 6);
}

TEST_CASE("frozen text group stays bit-identical through a training step") {
  TriModalModel<float> m(small_config(), 13);
  m.set_trainable("text", false);
  m.set_trainable("image", false);
  MatF text_before = m.store().at("text.embed.table").value;
  MatF img_before = m.store().at("image.proj.w").value;

  nn::AdamW<float> opt(m.store(), {{"", 1e-2}});
  auto g = build_graph(parse_netlist(kAmpDeck));
  nn::Tape<float> t;
  GraphBatch gb = make_graph_batch({&g});
  TextBatch tb = make_text_batch({tokenize("an amplifier", m.config().text_vocab)});
  MatF img = MatF::Ones(1, m.config().image_dim);

  auto vc = m.encode_circuit_batch(t, gb, false, nullptr);
  auto vt = m.encode_text_batch(t, tb);
  auto vi = m.encode_image_batch(t, img);
  auto loss = nn::sum_all(nn::add(nn::add(vc, vt), vi));
  t.backward(loss);
  opt.step();

  CHECK(std::memcmp(text_before.data(), m.store().at("text.embed.table").value.data(),
                    sizeof(float) * static_cast<size_t>(text_before.size())) == 0);
  CHECK(std::memcmp(img_before.data(), m.store().at("image.proj.w").value.data(),
                    sizeof(float) * static_cast<size_t>(img_before.size())) == 0);
  // graph parameters did move
  CHECK(m.store().at("graph.proj.w2").grad.cwiseAbs().sum() > 0.0f);

  // unfreezing makes them move again
  m.set_trainable("text", true);
  nn::AdamW<float> opt2(m.store(), {{"", 1e-2}});
  nn::Tape<float> t2;
  auto vt2 = m.encode_text_batch(t2, tb);
  t2.backward(nn::sum_all(vt2));
  opt2.step();
  CHECK(std::memcmp(text_before.data(), m.store().at("text.embed.table").value.data(),
                    sizeof(float) * static_cast<size_t>(text_before.size())) != 0);
}

TEST_CASE("model config json round trip") {
  ModelConfig c = small_config();
  ModelConfig d = ModelConfig::from_json(c.to_json());
  CHECK(d.d_g == c.d_g);
  CHECK(d.image_dim == c.image_dim);
  CHECK(d.dropout == c.dropout);
}

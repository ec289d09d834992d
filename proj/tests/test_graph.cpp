#include <doctest.h>

#include <map>
#include <set>

#include "tricir/graph/circuit_graph.hpp"
#include "tricir/spice/parser.hpp"

using namespace tricir;
using namespace tricir::graph;
using tricir::spice::parse_netlist;

namespace {

int count_edges(const CircuitGraph& g, int src, int dst, Relation rel) {
  int n = 0;
  for (const Edge& e : g.edges)
    if (e.src == src && e.dst == dst && e.rel == rel) ++n;
  return n;
}

}  // namespace

TEST_CASE("single resistor gives one node and no edges") {
  CircuitGraph g = build_graph(parse_netlist("R1 in out 10k"));
  CHECK(g.num_nodes() == 1);
  CHECK(g.edges.empty());
}

TEST_CASE("two resistors sharing one net") {
  CircuitGraph g = build_graph(parse_netlist("R1 in mid 1k\nR2 mid out 2k"));
  CHECK(g.num_nodes() == 2);
  CHECK(g.edges.size() == 4);
  CHECK(count_edges(g, 0, 1, Relation::RTerminal) == 1);
  CHECK(count_edges(g, 1, 0, Relation::RTerminal) == 1);
  CHECK(count_edges(g, 0, 1, Relation::SharedNet) == 1);
  CHECK(count_edges(g, 1, 0, Relation::SharedNet) == 1);
}

TEST_CASE("destination-port typing on a mos gate") {
  CircuitGraph g = build_graph(parse_netlist(
      "R1 a g 1k\nM1 d g s b NMOS W=1u L=1u\n.model NMOS NMOS ()"));
  CHECK(g.num_nodes() == 2);
  CHECK(g.edges.size() == 4);
  CHECK(count_edges(g, 0, 1, Relation::MosGate) == 1);
  CHECK(count_edges(g, 1, 0, Relation::RTerminal) == 1);
  CHECK(count_edges(g, 0, 1, Relation::SharedNet) == 1);
  CHECK(count_edges(g, 1, 0, Relation::SharedNet) == 1);
}

TEST_CASE("empty netlist is an error") {
  CHECK_THROWS_AS(build_graph(parse_netlist(".op\n.end")), BuildError);
}

TEST_CASE("no self edges for a device with both terminals on one net") {
  CircuitGraph g = build_graph(parse_netlist("R1 x x 1k"));
  CHECK(g.edges.empty());
}

TEST_CASE("diode-connected mosfet keeps the k(k-1) edge count") {
  // M1 touches net g through drain and gate; it still counts once per net.
  CircuitGraph g = build_graph(parse_netlist(
      "M1 g g 0 0 NMOS W=1u L=1u\nR1 g vdd 1k\n.model NMOS NMOS ()"));
  int port_typed = 0, shared = 0;
  for (const Edge& e : g.edges) (e.rel == Relation::SharedNet ? shared : port_typed)++;
  // net g: k=2, net 0: k=1, net vdd: k=1
  CHECK(port_typed == 2);
  CHECK(shared == 2);
  CHECK(count_edges(g, 1, 0, Relation::MosDrain) == 1);  // first terminal on g
}

TEST_CASE("subckt instance terminals type as subckt_terminal") {
  const char* deck =
      "X1 n1 n2 FLT\n"
      "R1 n1 0 1k\n"
      ".subckt FLT a b\n"
      "C1 a b 1n\n"
      ".ends\n";
  CircuitGraph g = build_graph(parse_netlist(deck));
  CHECK(g.num_nodes() == 2);
  CHECK(count_edges(g, 1, 0, Relation::SubcktTerminal) == 1);
  CHECK(count_edges(g, 0, 1, Relation::RTerminal) == 1);
}

TEST_CASE("all twenty relations are distinct and cover the port map") {
  std::set<std::string_view> names(kRelationNames.begin(), kRelationNames.end());
  CHECK(names.size() == 20);
  CHECK(kNumRelations == 20);
  using spice::DeviceKind;
  for (int k = 0; k < spice::kNumDeviceKinds; ++k) {
    auto kind = static_cast<DeviceKind>(k);
    int nt = spice::kind_terminal_count(kind);
    if (nt == 0) nt = 3;  // subckt instances: any index
    for (int i = 0; i < nt; ++i) {
      int rel = static_cast<int>(port_relation(kind, i));
      CHECK(rel >= 0);
      CHECK(rel < 20);
    }
  }
}

TEST_CASE("every relation family appears on a hand-built netlist") {
  const char* deck =
      "M1 d1 g1 s1 b1 NM\n"
      "M2 d1 g1 s1 b1 PM\n"
      "Q1 c1 b2 e1 QN\n"
      "Q2 c1 b2 e1 QP\n"
      "D1 c1 e1 DM\n"
      "R1 d1 c1 1k\n"
      "C1 g1 b2 1p\n"
      "L1 s1 e1 1u\n"
      "V1 d1 0 1\n"
      "I1 g1 0 1m\n"
      "E1 s1 0 d1 g1 2\n"
      "G1 b1 0 d1 g1 1m\n"
      "F1 b1 0 V1 2\n"
      "H1 c1 0 V1 1k\n"
      "X1 e1 b1 SUB\n"
      ".model NM NMOS()\n"
      ".model PM PMOS()\n"
      ".model QN NPN()\n"
      ".model QP PNP()\n"
      ".model DM D()\n"
      ".subckt SUB p q\n"
      "R9 p q 1\n"
      ".ends\n";
  CircuitGraph g = build_graph(parse_netlist(deck));
  std::set<int> seen;
  for (const Edge& e : g.edges) {
    int r = static_cast<int>(e.rel);
    CHECK(r >= 0);
    CHECK(r < 20);
    seen.insert(r);
  }
  CHECK(seen.size() == 20);
}

TEST_CASE("per-net edge formula below the fan-out cap") {
  for (int k : {2, 3, 5, 9}) {
    std::string deck;
    for (int i = 0; i < k; ++i)
      deck += "R" + std::to_string(i) + " shared n" + std::to_string(i) + " 1k\n";
    CircuitGraph g = build_graph(parse_netlist(deck));
    int port_typed = 0, shared = 0;
    for (const Edge& e : g.edges) (e.rel == Relation::SharedNet ? shared : port_typed)++;
    CHECK(port_typed == k * (k - 1));
    CHECK(shared == k * (k - 1));
  }
}

TEST_CASE("fan-out cap drops shared_net pairs only") {
  std::string deck;
  const int k = 40;
  for (int i = 0; i < k; ++i)
    deck += "R" + std::to_string(i) + " rail n" + std::to_string(i) + " 1k\n";
  CircuitGraph g = build_graph(parse_netlist(deck));
  int port_typed = 0, shared = 0;
  for (const Edge& e : g.edges) (e.rel == Relation::SharedNet ? shared : port_typed)++;
  CHECK(port_typed == k * (k - 1));
  CHECK(shared == 0);
}

TEST_CASE("net renaming leaves the graph identical") {
  const char* deck =
      "M1 out in 0 0 NMOS W=2u L=1u\n"
      "RD vdd out 10k\n"
      "V1 vdd 0 3.3\n"
      "V2 in 0 1.2\n"
      ".model NMOS NMOS (VTO=0.7)\n";
  const char* renamed =
      "M1 zz9 qq7 kk3 kk3 NMOS W=2u L=1u\n"
      "RD pp1 zz9 10k\n"
      "V1 pp1 kk3 3.3\n"
      "V2 qq7 kk3 1.2\n"
      ".model NMOS NMOS (VTO=0.7)\n";
  CircuitGraph a = build_graph(parse_netlist(deck));
  CircuitGraph b = build_graph(parse_netlist(renamed));
  REQUIRE(a.num_nodes() == b.num_nodes());
  REQUIRE(a.edges.size() == b.edges.size());
  CHECK(a.node_kinds == b.node_kinds);
  CHECK(a.node_cont == b.node_cont);
  for (size_t i = 0; i < a.edges.size(); ++i) {
    CHECK(a.edges[i].src == b.edges[i].src);
    CHECK(a.edges[i].dst == b.edges[i].dst);
    CHECK(a.edges[i].rel == b.edges[i].rel);
  }
}

TEST_CASE("continuous slots rescale to the documented units") {
  spice::NetlistIR ir = parse_netlist(
      "R1 a b 10k\n"
      "C1 a b 22p\n"
      "L1 a b 4.7u\n"
      "V1 a 0 3.3\n"
      "I1 a 0 2m\n"
      "M1 a b c d NMOS W=10u L=0.5u M=4\n"
      ".model NMOS NMOS()\n");
  auto r = continuous_slots(ir.devices[0]);
  CHECK(r[2] == doctest::Approx(10.0));  // kOhm
  auto c = continuous_slots(ir.devices[1]);
  CHECK(c[3] == doctest::Approx(22.0));  // pF
  auto l = continuous_slots(ir.devices[2]);
  CHECK(l[4] == doctest::Approx(4.7));  // uH
  auto v = continuous_slots(ir.devices[3]);
  CHECK(v[5] == doctest::Approx(3.3));
  auto i = continuous_slots(ir.devices[4]);
  CHECK(i[6] == doctest::Approx(2.0));  // mA
  auto m = continuous_slots(ir.devices[5]);
  CHECK(m[0] == doctest::Approx(10.0));  // um
  CHECK(m[1] == doctest::Approx(0.5));
  CHECK(m[7] == doctest::Approx(4.0));
}

TEST_CASE("graph json lists nodes, edges and the relation vocabulary") {
  CircuitGraph g = build_graph(parse_netlist("R1 a b 1k\nR2 b c 1k"));
  auto j = to_json(g);
  CHECK(j["nodes"].size() == 2);
  CHECK(j["edges"].size() == 4);
  CHECK(j["relations"].size() == 20);
  CHECK(j["nodes"][0]["id"] == "r1");
}

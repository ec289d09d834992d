#include "tricir/enc/model.hpp"

#include <cmath>

namespace tricir::enc {

std::vector<int> tokenize(const std::string& caption, int vocab_size) {
  std::string norm;
  norm.reserve(caption.size());
  for (char c : caption) {
    unsigned char u = static_cast<unsigned char>(c);
    if (std::isalnum(u) || c == '.' || c == '+' || c == '-')
      norm += static_cast<char>(std::tolower(u));
    else
      norm += ' ';
  }
  std::vector<int> ids;
  std::size_t i = 0;
  while (i < norm.size()) {
    while (i < norm.size() && norm[i] == ' ') ++i;
    std::size_t j = i;
    while (j < norm.size() && norm[j] != ' ') ++j;
    if (j > i) {
      std::string_view tok(norm.data() + i, j - i);
      ids.push_back(static_cast<int>(fnv1a(tok) % static_cast<std::uint64_t>(vocab_size)));
    }
    i = j;
  }
  return ids;
}

GraphBatch make_graph_batch(const std::vector<const graph::CircuitGraph*>& graphs) {
  GraphBatch b;
  b.num_graphs = static_cast<int>(graphs.size());
  b.src_by_rel.resize(graph::kNumRelations);
  b.dst_by_rel.resize(graph::kNumRelations);
  int total = 0;
  for (const auto* g : graphs) total += g->num_nodes();
  b.num_nodes = total;
  b.kinds.reserve(total);
  b.graph_of_node.reserve(total);
  b.cont_log.resize(total, graph::kNumContSlots);
  int offset = 0;
  for (int gi = 0; gi < b.num_graphs; ++gi) {
    const graph::CircuitGraph& g = *graphs[gi];
    for (int v = 0; v < g.num_nodes(); ++v) {
      b.kinds.push_back(g.node_kinds[v]);
      b.graph_of_node.push_back(gi);
      for (int s = 0; s < graph::kNumContSlots; ++s) {
        double x = g.node_cont[v][s];
        b.cont_log(offset + v, s) = x >= 0 ? std::log1p(x) : -std::log1p(-x);
      }
    }
    for (const graph::Edge& e : g.edges) {
      int r = static_cast<int>(e.rel);
      if (r < 0 || r >= graph::kNumRelations)
        throw RelationOutOfRange("relation id " + std::to_string(r));
      b.src_by_rel[r].push_back(offset + e.src);
      b.dst_by_rel[r].push_back(offset + e.dst);
    }
    offset += g.num_nodes();
  }
  return b;
}

TextBatch make_text_batch(const std::vector<std::vector<int>>& token_lists) {
  TextBatch b;
  b.num_texts = static_cast<int>(token_lists.size());
  for (int i = 0; i < b.num_texts; ++i) {
    if (token_lists[i].empty())
      throw EmptyInput("caption " + std::to_string(i) + " has no tokens");
    for (int id : token_lists[i]) {
      b.token_ids.push_back(id);
      b.text_of_token.push_back(i);
    }
  }
  return b;
}

}  // namespace tricir::enc

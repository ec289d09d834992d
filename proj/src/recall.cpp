#include "tricir/index/recall.hpp"

#include <cstdio>
#include <set>

namespace tricir::index {

double recall_at_k(const std::vector<Embedding>& queries, const EmbeddingIndex& target,
                   const std::map<std::string, std::string>& pairing, int k) {
  if (queries.empty()) throw IndexError("recall over an empty query set");
  std::set<std::string> known(target.ids().begin(), target.ids().end());
  int hits = 0;
  for (const Embedding& q : queries) {
    auto it = pairing.find(q.id);
    if (it == pairing.end() || !known.count(it->second))
      throw MissingPair("no ground-truth partner for query " + q.id);
    for (const ScoredId& s : target.top_k(q.vec, k)) {
      if (s.id == it->second) {
        ++hits;
        break;
      }
    }
  }
  return static_cast<double>(hits) / static_cast<double>(queries.size());
}

namespace {

DirectionScores score_direction(const char* name, const std::vector<Embedding>& queries,
                                const EmbeddingIndex& target,
                                const std::map<std::string, std::string>& identity) {
  DirectionScores d;
  d.name = name;
  d.r1 = recall_at_k(queries, target, identity, 1);
  d.r5 = recall_at_k(queries, target, identity, 5);
  d.r10 = recall_at_k(queries, target, identity, 10);
  return d;
}

}  // namespace

RetrievalReport evaluate_six_directions(const std::vector<Embedding>& code,
                                        const std::vector<Embedding>& image,
                                        const std::vector<Embedding>& text) {
  if (code.size() != image.size() || code.size() != text.size())
    throw IndexError("six-direction eval needs aligned triplets");
  if (code.empty()) throw IndexError("six-direction eval over an empty split");
  const int dim = static_cast<int>(code[0].vec.size());
  EmbeddingIndex ic = EmbeddingIndex::build(Modality::Code, code, dim);
  EmbeddingIndex ii = EmbeddingIndex::build(Modality::Image, image, dim);
  EmbeddingIndex it = EmbeddingIndex::build(Modality::Text, text, dim);
  std::map<std::string, std::string> identity;
  for (const Embedding& e : code) identity[e.id] = e.id;

  RetrievalReport r;
  r.directions[0] = score_direction("I->C", image, ic, identity);
  r.directions[1] = score_direction("T->I", text, ii, identity);
  r.directions[2] = score_direction("T->C", text, ic, identity);
  r.directions[3] = score_direction("C->I", code, ii, identity);
  r.directions[4] = score_direction("I->T", image, it, identity);
  r.directions[5] = score_direction("C->T", code, it, identity);
  double sum = 0.0;
  for (const auto& d : r.directions) sum += d.r1;
  r.avg_r1 = sum / 6.0;
  return r;
}

nlohmann::json RetrievalReport::to_json() const {
  nlohmann::json j;
  j["directions"] = nlohmann::json::array();
  for (const auto& d : directions)
    j["directions"].push_back(
        {{"direction", d.name}, {"r1", d.r1}, {"r5", d.r5}, {"r10", d.r10}});
  j["avg_r1"] = avg_r1;
  return j;
}

std::string RetrievalReport::table() const {
  char line[256];
  std::string out;
  out += "        ";
  for (const auto& d : directions) {
    std::snprintf(line, sizeof(line), "%8s", d.name.c_str());
    out += line;
  }
  out += "     Avg\n";
  auto row = [&](const char* label, double DirectionScores::*field, bool with_avg) {
    out += label;
    for (const auto& d : directions) {
      std::snprintf(line, sizeof(line), "%8.3f", d.*field);
      out += line;
    }
    if (with_avg) {
      std::snprintf(line, sizeof(line), "%8.3f", avg_r1);
      out += line;
    } else {
      out += "       -";
    }
    out += "\n";
  };
  row("R@1     ", &DirectionScores::r1, true);
  row("R@5     ", &DirectionScores::r5, false);
  row("R@10    ", &DirectionScores::r10, false);
  return out;
}

}  // namespace tricir::index

#pragma once

#include <json.hpp>

#include <array>
#include <map>
#include <string>
#include <vector>

#include "tricir/index/flat_index.hpp"

namespace tricir::index {

class MissingPair : public IndexError {
 public:
  using IndexError::IndexError;
};

// Fraction of queries whose ground-truth partner ranks within the top K.
// `pairing` maps query id -> target id and must cover every query.
double recall_at_k(const std::vector<Embedding>& queries, const EmbeddingIndex& target,
                   const std::map<std::string, std::string>& pairing, int k);

struct DirectionScores {
  std::string name;   // e.g. "I->C"
  double r1 = 0.0;
  double r5 = 0.0;
  double r10 = 0.0;
};

// Per-direction Recall@{1,5,10} in the fixed report order
// I->C, T->I, T->C, C->I, I->T, C->T, plus the mean R@1 over the six.
struct RetrievalReport {
  std::array<DirectionScores, 6> directions;
  double avg_r1 = 0.0;

  nlohmann::json to_json() const;
  std::string table() const;
};

// All six cross-modal evaluations over aligned embeddings; ids pair samples
// across modalities (identity ground truth).
RetrievalReport evaluate_six_directions(const std::vector<Embedding>& code,
                                        const std::vector<Embedding>& image,
                                        const std::vector<Embedding>& text);

}  // namespace tricir::index

#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "tricir/core/common.hpp"
#include "tricir/core/embedding.hpp"

namespace tricir::index {

class IndexError : public std::runtime_error {
 public:
  explicit IndexError(const std::string& msg) : std::runtime_error(msg) {}
};

class DimMismatch : public IndexError {
 public:
  using IndexError::IndexError;
};
class DuplicateId : public IndexError {
 public:
  using IndexError::IndexError;
};
class EmptyIndex : public IndexError {
 public:
  using IndexError::IndexError;
};

struct ScoredId {
  std::string id;
  double score;
};

// Exact flat cosine index over unit-norm vectors. Immutable after build;
// queries are safe concurrently.
class EmbeddingIndex {
 public:
  EmbeddingIndex() = default;
  EmbeddingIndex(Modality modality, int dim) : modality_(modality), dim_(dim) {}

  static EmbeddingIndex build(Modality modality, const std::vector<Embedding>& embs,
                              int dim = 768);

  // Exact brute-force cosine scores (64-bit accumulation over f32 rows);
  // ties break by ascending id.
  std::vector<ScoredId> top_k(const Eigen::RowVectorXf& query, int k) const;

  void save(const std::string& path) const;
  static EmbeddingIndex load(const std::string& path,
                             Modality modality = Modality::Code);

  int size() const { return static_cast<int>(ids_.size()); }
  int dim() const { return dim_; }
  Modality modality() const { return modality_; }
  const std::vector<std::string>& ids() const { return ids_; }
  const MatF& matrix() const { return rows_; }

 private:
  Modality modality_ = Modality::Code;
  int dim_ = 768;
  std::vector<std::string> ids_;
  MatF rows_;
};

}  // namespace tricir::index

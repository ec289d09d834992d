#include "tricir/index/flat_index.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <set>

namespace tricir::index {

namespace {

void put_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16),
                        static_cast<unsigned char>(v >> 24)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

void put_u64(std::ostream& os, std::uint64_t v) {
  put_u32(os, static_cast<std::uint32_t>(v));
  put_u32(os, static_cast<std::uint32_t>(v >> 32));
}

std::uint32_t get_u32(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

std::uint64_t get_u64(std::istream& is) {
  std::uint64_t lo = get_u32(is);
  std::uint64_t hi = get_u32(is);
  return lo | (hi << 32);
}

}  // namespace

EmbeddingIndex EmbeddingIndex::build(Modality modality, const std::vector<Embedding>& embs,
                                     int dim) {
  EmbeddingIndex ix(modality, dim);
  ix.rows_.resize(static_cast<Eigen::Index>(embs.size()), dim);
  std::set<std::string> seen;
  for (std::size_t i = 0; i < embs.size(); ++i) {
    const Embedding& e = embs[i];
    if (e.vec.size() != dim)
      throw DimMismatch("embedding " + e.id + " has dim " + std::to_string(e.vec.size()) +
                        ", index expects " + std::to_string(dim));
    if (!seen.insert(e.id).second) throw DuplicateId("duplicate id " + e.id);
    ix.ids_.push_back(e.id);
    ix.rows_.row(static_cast<Eigen::Index>(i)) = e.vec;
  }
  return ix;
}

std::vector<ScoredId> EmbeddingIndex::top_k(const Eigen::RowVectorXf& query, int k) const {
  if (ids_.empty()) throw EmptyIndex("query against an empty index");
  if (query.size() != dim_) throw DimMismatch("query dim mismatch");
  if (k < 1) throw IndexError("k must be >= 1");
  const int n = size();
  std::vector<int> order(static_cast<std::size_t>(n));
  std::vector<double> scores(static_cast<std::size_t>(n));
  Eigen::RowVectorXd q = query.cast<double>();
  for (int i = 0; i < n; ++i) {
    order[static_cast<std::size_t>(i)] = i;
    scores[static_cast<std::size_t>(i)] = rows_.row(i).cast<double>().dot(q);
  }
  auto cmp = [&](int a, int b) {
    if (scores[static_cast<std::size_t>(a)] != scores[static_cast<std::size_t>(b)])
      return scores[static_cast<std::size_t>(a)] > scores[static_cast<std::size_t>(b)];
    return ids_[static_cast<std::size_t>(a)] < ids_[static_cast<std::size_t>(b)];
  };
  const int kk = std::min(k, n);
  std::partial_sort(order.begin(), order.begin() + kk, order.end(), cmp);
  std::vector<ScoredId> out;
  out.reserve(static_cast<std::size_t>(kk));
  for (int i = 0; i < kk; ++i)
    out.push_back({ids_[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])],
                   scores[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])]});
  return out;
}

// Format: "ARIX", version u32, dim u32, count u64, length-prefixed UTF-8 ids,
// then the row-major little-endian f32 matrix.
void EmbeddingIndex::save(const std::string& path) const {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IndexError("cannot write " + path);
  os.write("ARIX", 4);
  put_u32(os, 1);
  put_u32(os, static_cast<std::uint32_t>(dim_));
  put_u64(os, static_cast<std::uint64_t>(ids_.size()));
  for (const std::string& id : ids_) {
    put_u32(os, static_cast<std::uint32_t>(id.size()));
    os.write(id.data(), static_cast<std::streamsize>(id.size()));
  }
  os.write(reinterpret_cast<const char*>(rows_.data()),
           static_cast<std::streamsize>(sizeof(float) * static_cast<std::size_t>(rows_.size())));
  if (!os) throw IndexError("write failed: " + path);
}

EmbeddingIndex EmbeddingIndex::load(const std::string& path, Modality modality) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IndexError("cannot read " + path);
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, "ARIX", 4) != 0)
    throw IndexError("bad index magic in " + path);
  std::uint32_t version = get_u32(is);
  if (version != 1) throw IndexError("unsupported index version");
  std::uint32_t dim = get_u32(is);
  std::uint64_t count = get_u64(is);
  EmbeddingIndex ix(modality, static_cast<int>(dim));
  ix.ids_.reserve(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    std::uint32_t len = get_u32(is);
    std::string id(len, '\0');
    is.read(id.data(), len);
    ix.ids_.push_back(std::move(id));
  }
  ix.rows_.resize(static_cast<Eigen::Index>(count), static_cast<Eigen::Index>(dim));
  is.read(reinterpret_cast<char*>(ix.rows_.data()),
          static_cast<std::streamsize>(sizeof(float) * count * dim));
  if (!is) throw IndexError("truncated index file " + path);
  return ix;
}

}  // namespace tricir::index

#pragma once

#include <json.hpp>

#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "tricir/nn/params.hpp"

namespace tricir::nn {

class CheckpointError : public std::runtime_error {
 public:
  explicit CheckpointError(const std::string& msg) : std::runtime_error(msg) {}
};

// Named-tensor archive: "ARTC" magic, u32 version, u64 header length, JSON
// header {meta, tensors:[{name,rows,cols,offset}]}, then the tensors as raw
// little-endian f32 in declaration order. Round-trips are bit-exact.
namespace detail {

inline void put_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16),
                        static_cast<unsigned char>(v >> 24)};
  os.write(reinterpret_cast<const char*>(b), 4);
}
inline void put_u64(std::ostream& os, std::uint64_t v) {
  put_u32(os, static_cast<std::uint32_t>(v));
  put_u32(os, static_cast<std::uint32_t>(v >> 32));
}
inline std::uint32_t get_u32(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}
inline std::uint64_t get_u64(std::istream& is) {
  std::uint64_t lo = get_u32(is);
  std::uint64_t hi = get_u32(is);
  return lo | (hi << 32);
}

}  // namespace detail

template <typename S>
void save_checkpoint(const std::string& path, const ParamStore<S>& store,
                     const nlohmann::json& meta = nlohmann::json::object()) {
  nlohmann::json header;
  header["meta"] = meta;
  header["tensors"] = nlohmann::json::array();
  std::uint64_t offset = 0;
  for (const Param<S>& p : store) {
    header["tensors"].push_back({{"name", p.name},
                                 {"group", p.group},
                                 {"rows", p.value.rows()},
                                 {"cols", p.value.cols()},
                                 {"offset", offset}});
    offset += static_cast<std::uint64_t>(p.value.size());
  }
  std::string hs = header.dump();
  std::ofstream os(path, std::ios::binary);
  if (!os) throw CheckpointError("cannot write " + path);
  os.write("ARTC", 4);
  detail::put_u32(os, 1);
  detail::put_u64(os, hs.size());
  os.write(hs.data(), static_cast<std::streamsize>(hs.size()));
  std::vector<float> buf;
  for (const Param<S>& p : store) {
    buf.resize(static_cast<std::size_t>(p.value.size()));
    for (Eigen::Index i = 0; i < p.value.size(); ++i)
      buf[static_cast<std::size_t>(i)] = static_cast<float>(p.value.data()[i]);
    os.write(reinterpret_cast<const char*>(buf.data()),
             static_cast<std::streamsize>(buf.size() * sizeof(float)));
  }
  if (!os) throw CheckpointError("write failed: " + path);
}

inline nlohmann::json read_checkpoint_header(std::istream& is, const std::string& path) {
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, "ARTC", 4) != 0)
    throw CheckpointError("bad checkpoint magic in " + path);
  std::uint32_t version = detail::get_u32(is);
  if (version != 1) throw CheckpointError("unsupported checkpoint version");
  std::uint64_t hlen = detail::get_u64(is);
  std::string hs(hlen, '\0');
  is.read(hs.data(), static_cast<std::streamsize>(hlen));
  if (!is) throw CheckpointError("truncated checkpoint header in " + path);
  return nlohmann::json::parse(hs);
}

inline nlohmann::json read_checkpoint_meta(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw CheckpointError("cannot read " + path);
  return read_checkpoint_header(is, path)["meta"];
}

// Loads values into matching parameter names; every stored tensor must exist
// in the store with the same shape. Returns the meta block.
template <typename S>
nlohmann::json load_checkpoint(const std::string& path, ParamStore<S>& store) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw CheckpointError("cannot read " + path);
  nlohmann::json header = read_checkpoint_header(is, path);
  std::streampos payload = is.tellg();
  for (const auto& t : header["tensors"]) {
    const std::string name = t["name"];
    if (!store.has(name)) throw CheckpointError("checkpoint tensor missing in model: " + name);
    Param<S>& p = store.at(name);
    Eigen::Index rows = t["rows"], cols = t["cols"];
    if (p.value.rows() != rows || p.value.cols() != cols)
      throw CheckpointError("shape mismatch for " + name);
    std::uint64_t offset = t["offset"];
    is.seekg(payload + static_cast<std::streamoff>(offset * sizeof(float)));
    std::vector<float> buf(static_cast<std::size_t>(rows * cols));
    is.read(reinterpret_cast<char*>(buf.data()),
            static_cast<std::streamsize>(buf.size() * sizeof(float)));
    if (!is) throw CheckpointError("truncated tensor " + name);
    for (Eigen::Index i = 0; i < p.value.size(); ++i)
      p.value.data()[i] = static_cast<S>(buf[static_cast<std::size_t>(i)]);
  }
  return header["meta"];
}

}  // namespace tricir::nn

#pragma once

#include <cstring>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "growthgr/tensor.hpp"

namespace growthgr {

// Checkpoint container shared by all modules:
//   magic "GGR1" | u32 LE header length | JSON header | raw LE f64 payloads
// The header is a JSON array of {name, shape, dtype:"f64", offset}; offset is
// the byte position of the tensor inside the payload section, in header order.

inline void save_checkpoint(const std::string& path, const ParamSet& tensors) {
  nlohmann::json header = nlohmann::json::array();
  uint64_t offset = 0;
  for (const auto& [name, t] : tensors) {
    header.push_back({{"name", name}, {"shape", t.shape}, {"dtype", "f64"}, {"offset", offset}});
    offset += static_cast<uint64_t>(t.numel()) * sizeof(double);
  }
  std::string hs = header.dump();
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  GGR_CHECK(out.good(), data_error("cannot open checkpoint for writing: " + path));
  out.write("GGR1", 4);
  uint32_t hlen = static_cast<uint32_t>(hs.size());
  out.write(reinterpret_cast<const char*>(&hlen), 4);
  out.write(hs.data(), static_cast<std::streamsize>(hs.size()));
  for (const auto& [name, t] : tensors)
    out.write(reinterpret_cast<const char*>(t.v.data()),
              static_cast<std::streamsize>(t.v.size() * sizeof(double)));
  GGR_CHECK(out.good(), data_error("short write on checkpoint: " + path));
}

inline ParamSet load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  GGR_CHECK(in.good(), dependency_error("missing checkpoint: " + path));
  char magic[4];
  in.read(magic, 4);
  GGR_CHECK(in.gcount() == 4 && std::memcmp(magic, "GGR1", 4) == 0,
            format_error("bad checkpoint magic: " + path));
  uint32_t hlen = 0;
  in.read(reinterpret_cast<char*>(&hlen), 4);
  GGR_CHECK(in.gcount() == 4, format_error("truncated checkpoint header length: " + path));
  std::string hs(hlen, '\0');
  in.read(hs.data(), hlen);
  GGR_CHECK(static_cast<uint32_t>(in.gcount()) == hlen,
            format_error("truncated checkpoint header: " + path));
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(hs);
  } catch (const std::exception& e) {
    throw format_error("unparseable checkpoint header: " + std::string(e.what()));
  }
  GGR_CHECK(header.is_array(), format_error("checkpoint header must be an array"));
  ParamSet out;
  uint64_t expect_offset = 0;
  for (const auto& entry : header) {
    GGR_CHECK(entry.value("dtype", "") == "f64", format_error("unsupported dtype in checkpoint"));
    std::string name = entry.at("name").get<std::string>();
    std::vector<int> shape = entry.at("shape").get<std::vector<int>>();
    uint64_t offset = entry.at("offset").get<uint64_t>();
    GGR_CHECK(offset == expect_offset, format_error("non-contiguous checkpoint payload"));
    Tensor t = Tensor::zeros(shape);
    in.read(reinterpret_cast<char*>(t.v.data()),
            static_cast<std::streamsize>(t.v.size() * sizeof(double)));
    GGR_CHECK(static_cast<size_t>(in.gcount()) == t.v.size() * sizeof(double),
              format_error("truncated checkpoint payload: " + path));
    expect_offset += static_cast<uint64_t>(t.numel()) * sizeof(double);
    out[name] = std::move(t);
  }
  return out;
}

inline uint64_t file_hash(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  GGR_CHECK(in.good(), dependency_error("missing artifact: " + path));
  uint64_t h = 0xcbf29ce484222325ULL;
  char buf[1 << 16];
  while (in.read(buf, sizeof(buf)) || in.gcount() > 0)
    h = fnv1a64(buf, static_cast<size_t>(in.gcount()), h);
  return h;
}

}  // namespace growthgr

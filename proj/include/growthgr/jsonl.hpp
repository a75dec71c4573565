#pragma once

#include <charconv>
#include <cstdint>
#include <fstream>
#include <functional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "growthgr/common.hpp"

namespace growthgr {

// Line-delimited JSON helpers. Writing is hand-rolled so float formatting is
// deterministic (shortest round-trip via to_chars) and fast on large logs;
// reading goes through nlohmann.

inline void json_append_double(std::string& out, double v) {
  char buf[32];
  auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  GGR_CHECK(ec == std::errc(), data_error("unformattable double"));
  out.append(buf, p);
}

inline void json_append_u64(std::string& out, uint64_t v) {
  char buf[24];
  auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  (void)ec;
  out.append(buf, p);
}

inline void json_append_vec(std::string& out, const std::vector<double>& v) {
  out.push_back('[');
  for (size_t i = 0; i < v.size(); ++i) {
    if (i) out.push_back(',');
    json_append_double(out, v[i]);
  }
  out.push_back(']');
}

template <typename Int>
inline void json_append_ints(std::string& out, const std::vector<Int>& v) {
  out.push_back('[');
  for (size_t i = 0; i < v.size(); ++i) {
    if (i) out.push_back(',');
    json_append_u64(out, static_cast<uint64_t>(v[i]));
  }
  out.push_back(']');
}

class JsonlWriter {
 public:
  explicit JsonlWriter(const std::string& path) : out_(path, std::ios::binary | std::ios::trunc) {
    GGR_CHECK(out_.good(), data_error("cannot open for writing: " + path));
  }

  void line(const std::string& s) {
    out_.write(s.data(), static_cast<std::streamsize>(s.size()));
    out_.put('\n');
  }

  void close() { out_.close(); }

 private:
  std::ofstream out_;
};

inline void for_each_jsonl(const std::string& path,
                           const std::function<void(const nlohmann::json&)>& fn) {
  std::ifstream in(path);
  GGR_CHECK(in.good(), dependency_error("missing file: " + path));
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      fn(nlohmann::json::parse(line));
    } catch (const nlohmann::json::exception& e) {
      throw data_error(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
}

}  // namespace growthgr

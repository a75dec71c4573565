#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace growthgr {

// Error taxonomy shared by every module. The CLI maps kinds to exit codes
// (config -> 2, data -> 3, dependency -> 4, everything else -> 1).
enum class Errc {
  kConfig,
  kData,
  kDependency,
  kContract,
  kDimension,
  kIndex,
  kFormat,
  kTraining,
  kDeterminism,
  kState,
  kLookup,
  kVersion,
};

class Error : public std::runtime_error {
 public:
  Error(Errc kind, const std::string& msg) : std::runtime_error(msg), kind_(kind) {}
  Errc kind() const { return kind_; }

 private:
  Errc kind_;
};

inline Error config_error(const std::string& m) { return Error(Errc::kConfig, m); }
inline Error data_error(const std::string& m) { return Error(Errc::kData, m); }
inline Error dependency_error(const std::string& m) { return Error(Errc::kDependency, m); }
inline Error contract_error(const std::string& m) { return Error(Errc::kContract, m); }
inline Error dimension_error(const std::string& m) { return Error(Errc::kDimension, m); }
inline Error index_error(const std::string& m) { return Error(Errc::kIndex, m); }
inline Error format_error(const std::string& m) { return Error(Errc::kFormat, m); }
inline Error training_error(const std::string& m) { return Error(Errc::kTraining, m); }
inline Error determinism_error(const std::string& m) { return Error(Errc::kDeterminism, m); }
inline Error state_error(const std::string& m) { return Error(Errc::kState, m); }
inline Error lookup_error(const std::string& m) { return Error(Errc::kLookup, m); }
inline Error version_error(const std::string& m) { return Error(Errc::kVersion, m); }

#define GGR_CHECK(cond, err)     \
  do {                           \
    if (!(cond)) throw (err);    \
  } while (false)

// FNV-1a, used for content-addressing artifacts and world hashes.
inline uint64_t fnv1a64(const void* data, size_t n, uint64_t h = 0xcbf29ce484222325ULL) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline uint64_t fnv1a64(const std::string& s, uint64_t h = 0xcbf29ce484222325ULL) {
  return fnv1a64(s.data(), s.size(), h);
}

inline std::string hex64(uint64_t v) {
  static const char* kDigits = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[i] = kDigits[v & 0xf];
    v >>= 4;
  }
  return out;
}

}  // namespace growthgr

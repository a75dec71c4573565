#include <catch2/catch_amalgamated.hpp>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "growthgr/checkpoint.hpp"

using namespace growthgr;

namespace {
std::string tmp_path(const char* name) {
  return (std::filesystem::temp_directory_path() / name).string();
}
}  // namespace

TEST_CASE("checkpoint round-trip is bit identical") {
  ParamSet ps;
  Rng rng(4);
  ps["a"] = Tensor::zeros({3, 5});
  ps["z.bias"] = Tensor::zeros({7});
  ps["m.cube"] = Tensor::zeros({2, 3, 4});
  for (auto& [k, t] : ps)
    for (double& x : t.v) x = rng.normal();

  std::string path = tmp_path("ggr_ckpt_test.ggr");
  save_checkpoint(path, ps);
  ParamSet back = load_checkpoint(path);
  REQUIRE(back.size() == ps.size());
  for (const auto& [k, t] : ps) {
    REQUIRE(back.at(k).shape == t.shape);
    REQUIRE(back.at(k).v == t.v);
  }
  std::remove(path.c_str());
}

TEST_CASE("checkpoint container layout starts with magic") {
  ParamSet ps;
  ps["w"] = Tensor::vec({1.5, -2.5});
  std::string path = tmp_path("ggr_ckpt_magic.ggr");
  save_checkpoint(path, ps);
  std::ifstream in(path, std::ios::binary);
  char head[8];
  in.read(head, 8);
  REQUIRE(std::string(head, 4) == "GGR1");
  uint32_t hlen;
  std::memcpy(&hlen, head + 4, 4);
  std::string header(hlen, '\0');
  in.read(header.data(), hlen);
  auto j = nlohmann::json::parse(header);
  REQUIRE(j.is_array());
  REQUIRE(j[0]["name"] == "w");
  REQUIRE(j[0]["dtype"] == "f64");
  REQUIRE(j[0]["offset"] == 0);
  std::remove(path.c_str());
}

TEST_CASE("corrupt or truncated checkpoints are rejected") {
  std::string path = tmp_path("ggr_ckpt_bad.ggr");
  {
    std::ofstream out(path, std::ios::binary);
    out << "NOPE";
  }
  CHECK_THROWS_AS(load_checkpoint(path), Error);

  ParamSet ps;
  ps["w"] = Tensor::zeros({64});
  save_checkpoint(path, ps);
  std::filesystem::resize_file(path, std::filesystem::file_size(path) - 16);
  try {
    load_checkpoint(path);
    FAIL("expected format error");
  } catch (const Error& e) {
    CHECK(e.kind() == Errc::kFormat);
  }
  std::remove(path.c_str());

  CHECK_THROWS_AS(load_checkpoint(tmp_path("ggr_does_not_exist.ggr")), Error);
}

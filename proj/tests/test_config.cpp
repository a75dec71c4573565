#include <catch2/catch_amalgamated.hpp>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "growthgr/config.hpp"

using namespace growthgr;

TEST_CASE("config parses key=value with comments and precedence") {
  auto path = (std::filesystem::temp_directory_path() / "ggr_cfg_test.cfg").string();
  {
    std::ofstream out(path);
    out << "# a comment\n"
        << "sim.users = 500\n"
        << "sim.gamma = 0.25  # trailing comment\n"
        << "run.name = alpha\n"
        << "flag.on = true\n";
  }
  Config c = Config::from_file(path);
  CHECK(c.get_int("sim.users", 0) == 500);
  CHECK(c.get_double("sim.gamma", 0) == 0.25);
  CHECK(c.get("run.name", "") == "alpha");
  CHECK(c.get_bool("flag.on", false));
  CHECK(c.get_int("missing", 17) == 17);

  c.apply_overrides({"sim.users=900", "extra.k = 3"});
  CHECK(c.get_int("sim.users", 0) == 900);
  CHECK(c.get_int("extra.k", 0) == 3);

  CHECK_THROWS_AS(c.get_int("run.name", 0), Error);
  CHECK_THROWS_AS(c.apply_overrides({"no-equals-sign"}), Error);

  std::string snap1 = c.snapshot();
  CHECK(snap1 == c.snapshot());
  CHECK(snap1.find("sim.users = 900") != std::string::npos);
  std::remove(path.c_str());
}

TEST_CASE("malformed config lines raise config errors") {
  auto path = (std::filesystem::temp_directory_path() / "ggr_cfg_bad.cfg").string();
  {
    std::ofstream out(path);
    out << "this line has no equals\n";
  }
  try {
    Config::from_file(path);
    FAIL("expected config error");
  } catch (const Error& e) {
    CHECK(e.kind() == Errc::kConfig);
  }
  std::remove(path.c_str());
  CHECK_THROWS_AS(Config::from_file("/nonexistent/ggr.cfg"), Error);
}

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "qlroe/cli.hpp"

using namespace qlroe;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out, err;
};

Run run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / ("qlroe_cli_" + std::to_string(::getpid()));
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }
  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  fs::path dir_;
};

}  // namespace

TEST_F(CliTest, UsageErrors) {
  EXPECT_EQ(run({"frobnicate"}).code, 2);
  EXPECT_EQ(run({}).code, 2);
  EXPECT_EQ(run({"norm", "--op", path("missing.json")}).code, 2);
  EXPECT_EQ(run({"approx", "--op", path("missing.json"), "--eps", "1"}).code, 2);
  EXPECT_EQ(run({"--help"}).code, 0);
}

TEST_F(CliTest, SpaceGenNormProfile) {
  auto r = run({"space", "--grid", "4,3", "--metric", "linf", "--out", path("s.json")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("\"diameter\": 3"), std::string::npos);
  r = run({"gen", "--kind", "exp_decay", "--space", path("s.json"), "--seed", "3", "--out", path("a.json")});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j1 = io::read_json(path("a.json"));
  run({"gen", "--kind", "exp_decay", "--space", path("s.json"), "--seed", "3", "--out", path("b.json")});
  EXPECT_EQ(j1.dump(), io::read_json(path("b.json")).dump());
  r = run({"norm", "--op", path("a.json"), "--p", "1"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto n = io::json::parse(r.out);
  EXPECT_EQ(n["bracket"][0], n["bracket"][1]);
  r = run({"profile", "--op", path("a.json"), "--radii", "0,1,2"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(io::json::parse(r.out)["classification"]["class"], "quasi_local");
}

TEST_F(CliTest, ApproxVerifyAndTamper) {
  ASSERT_EQ(run({"gen", "--kind", "exp_decay", "--grid", "32", "--out", path("b.json")}).code, 0);
  auto r = run({"approx", "--op", path("b.json"), "--eps", "16", "--chain", "grid", "--out", path("cert.json")});
  ASSERT_EQ(r.code, 0) << r.err;
  auto bundle = io::read_json(path("cert.json"));
  EXPECT_FALSE(bundle["certificate"]["degenerate"].get<bool>());
  EXPECT_LE(bundle["certificate"]["total_error"][0].get<double>(), 16.0);
  r = run({"verify", "--cert", path("cert.json")});
  EXPECT_EQ(r.code, 0) << r.out << r.err;

  bundle["certificate"]["schedule"][0]["R_n"] = 19.0;
  io::write_json(path("bad.json"), bundle);
  r = run({"verify", "--cert", path("bad.json")});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("radius schedule"), std::string::npos);

  bundle = io::read_json(path("cert.json"));
  bundle["certificate"]["total_error"] = {40.0, 41.0};
  io::write_json(path("bad2.json"), bundle);
  r = run({"verify", "--cert", path("bad2.json")});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("approximation error bound"), std::string::npos);
}

TEST_F(CliTest, ApproxDegenerateInstance) {
  ASSERT_EQ(run({"gen", "--kind", "exp_decay", "--grid", "32", "--out", path("b.json")}).code, 0);
  const auto r = run({"approx", "--op", path("b.json"), "--eps", "0.5", "--chain", "grid"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = io::json::parse(r.out);
  EXPECT_LE(j["certificate"]["total_error"][0].get<double>(), 0.5);
}

TEST_F(CliTest, ApproxRefusesAveraging) {
  ASSERT_EQ(run({"gen", "--kind", "averaging", "--grid", "32", "--p", "1", "--out", path("t.json")}).code, 0);
  const auto r = run({"approx", "--op", path("t.json"), "--eps", "0.5"});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.out.find("not quasi-local"), std::string::npos);
  const auto j = io::json::parse(r.out);
  EXPECT_EQ(j["witness"]["U"], io::json::array({0}));
  EXPECT_GE(j["witness"]["lower_bound"].get<double>(), 1.0 - 1e-9);
}

TEST_F(CliTest, CutdownExpectChainCommut) {
  ASSERT_EQ(run({"gen", "--kind", "exp_decay", "--grid", "16", "--out", path("a.json")}).code, 0);
  {
    std::ofstream f(path("fam.json"));
    f << R"({"sets": [[0, 1, 2], [9, 10]], "values": [[0.5, 1, 0.5], [1, 1]]})";
  }
  auto r = run({"cutdown", "--op", path("a.json"), "--family", path("fam.json"), "--L", "0.5"});
  EXPECT_EQ(r.code, 0) << r.out << r.err;
  {
    std::ofstream f(path("part.json"));
    f << R"({"blocks": [[0, 1], [4, 5, 6], [12]]})";
  }
  r = run({"expect", "--op", path("a.json"), "--partition", path("part.json")});
  EXPECT_EQ(r.code, 0) << r.err;
  r = run({"chain", "--grid", "8,8", "--radii", "2,2", "--out", path("chain.json")});
  EXPECT_EQ(r.code, 0) << r.err;
  r = run({"chain", "--grid", "8,8", "--radii", "5,5", "--chain", path("chain.json")});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("chain validity"), std::string::npos);
  r = run({"commut", "--op", path("a.json"), "--eps", "1"});
  EXPECT_EQ(r.code, 0) << r.err;
  r = run({"commut", "--op", path("a.json"), "--L", "0.25"});
  EXPECT_EQ(r.code, 0) << r.err;
}

#ifdef QLROE_CLI_PATH
TEST_F(CliTest, BinaryExitCodes) {
  const std::string bin = QLROE_CLI_PATH;
  EXPECT_EQ(WEXITSTATUS(std::system((bin + " nosuchverb > /dev/null 2>&1").c_str())), 2);
  EXPECT_EQ(WEXITSTATUS(std::system((bin + " space --grid 5 > /dev/null 2>&1").c_str())), 0);
}
#endif

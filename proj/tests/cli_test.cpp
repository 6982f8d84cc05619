#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "commands.hpp"

using namespace memoplan;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run_cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(std::move(args), out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path &p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

class CliTest : public ::testing::Test {
protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("memoplan_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string &name) const { return (dir_ / name).string(); }

  void write(const std::string &name, const std::string &text) const {
    std::ofstream(path(name), std::ios::binary) << text;
  }

  fs::path dir_;
};

const char *kThreeRecords = "{\"id\":0,\"size\":4,\"start\":0,\"end\":2,\"op\":\"a\"}\n"
                            "{\"id\":1,\"size\":2,\"start\":1,\"end\":3,\"op\":\"b\"}\n"
                            "{\"id\":2,\"size\":4,\"start\":2,\"end\":4,\"op\":\"c\"}\n";

} // namespace

TEST_F(CliTest, GenPlanCheckRender) {
  ASSERT_EQ(run_cli({"gen", "--n", "300", "--seed", "5", "--out", path("t.jsonl")}).code, 0);
  const auto planned = run_cli({"plan", "--in", path("t.jsonl"), "--out", path("p.json")});
  ASSERT_EQ(planned.code, 0) << planned.err;
  EXPECT_NE(planned.out.find("strategy=greedy_by_size"), std::string::npos);
  const auto checked = run_cli({"check", "--trace", path("t.jsonl"), "--plan", path("p.json")});
  EXPECT_EQ(checked.code, 0);
  EXPECT_NE(checked.out.find("\"valid\": true"), std::string::npos);
  ASSERT_EQ(run_cli({"render", "--trace", path("t.jsonl"), "--plan", path("p.json"), "--out", path("h.svg")}).code, 0);
  EXPECT_NE(slurp(path("h.svg")).find("<svg"), std::string::npos);
}

TEST_F(CliTest, GenToStdoutIsDeterministic) {
  const auto a = run_cli({"gen", "--n", "50", "--seed", "9"});
  const auto b = run_cli({"gen", "--n", "50", "--seed", "9"});
  EXPECT_EQ(a.code, 0);
  EXPECT_EQ(a.out, b.out);
  EXPECT_EQ(std::count(a.out.begin(), a.out.end(), '\n'), 50);
}

TEST_F(CliTest, CheckFlagsInvalidPlan) {
  write("t.jsonl", kThreeRecords);
  write("p.json", "{\"strategy\":\"manual\",\"alignment\":1,\"total_size\":6,"
                  "\"offsets\":{\"0\":0,\"1\":2,\"2\":0}}");
  const auto r = run_cli({"check", "--trace", path("t.jsonl"), "--plan", path("p.json")});
  EXPECT_EQ(r.code, 4);
  EXPECT_NE(r.out.find("\"overlap_bytes\": 2"), std::string::npos);
  EXPECT_EQ(run_cli({"render", "--trace", path("t.jsonl"), "--plan", path("p.json")}).code, 4);
}

TEST_F(CliTest, InputErrorsExitTwo) {
  write("bad.jsonl", "{\"id\":0,\"size\":4}\n");
  EXPECT_EQ(run_cli({"plan", "--in", path("bad.jsonl")}).code, 2);
  EXPECT_EQ(run_cli({"plan", "--in", path("missing.jsonl")}).code, 2);
  write("t.jsonl", kThreeRecords);
  EXPECT_EQ(run_cli({"plan", "--in", path("t.jsonl"), "--strategy", "nope"}).code, 2);
  EXPECT_EQ(run_cli({"plan", "--in", path("t.jsonl"), "--alignment", "3"}).code, 2);
  EXPECT_EQ(run_cli({"plan"}).code, 2);
  EXPECT_EQ(run_cli({}).code, 2);
  EXPECT_EQ(run_cli({"frobnicate"}).code, 2);
  const auto parse = run_cli({"plan", "--in", path("bad.jsonl")});
  EXPECT_NE(parse.err.find("line 1"), std::string::npos);
}

TEST_F(CliTest, HelpExitsZero) {
  const auto r = run_cli({"--help"});
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("compare"), std::string::npos);
}

TEST_F(CliTest, TimeoutExitsThree) {
  ASSERT_EQ(run_cli({"gen", "--n", "200", "--out", path("t.jsonl")}).code, 0);
  EXPECT_EQ(run_cli({"plan", "--in", path("t.jsonl"), "--strategy", "mip", "--timeout-ms", "0"}).code, 3);
}

TEST_F(CliTest, CompareWritesTableJsonAndCsv) {
  write("t.jsonl", kThreeRecords);
  const auto r = run_cli({"compare", "--in", path("t.jsonl"), "--alignment", "1", "--json",
                          path("c.json"), "--csv", path("c.csv")});
  ASSERT_EQ(r.code, 0) << r.err;
  for (auto s : kAllStrategies)
    EXPECT_NE(r.out.find(std::string(strategy_name(s))), std::string::npos);
  const auto rows = nlohmann::json::parse(slurp(path("c.json")));
  ASSERT_EQ(rows.size(), 5u);
  EXPECT_EQ(rows[0]["total_size"], 10);
  EXPECT_EQ(rows[4]["total_size"], 6);
  const auto csv = slurp(path("c.csv"));
  EXPECT_EQ(csv.rfind("strategy,status,total_size", 0), 0u);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 6);
}

TEST_F(CliTest, CompareReportsTimeoutsAsRows) {
  ASSERT_EQ(run_cli({"gen", "--n", "200", "--out", path("t.jsonl")}).code, 0);
  const auto r = run_cli({"compare", "--in", path("t.jsonl"), "--strategies", "greedy_by_size,mip",
                          "--timeout-ms", "0"});
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("timeout"), std::string::npos);
}

TEST_F(CliTest, BracketRebuildsTrace) {
  write("e.jsonl", "{\"kind\":\"malloc\",\"addr\":\"0x00007f0000001000\",\"size\":4,\"op\":\"a\",\"time\":0}\n"
                   "{\"kind\":\"free\",\"addr\":\"0x00007f0000001000\",\"time\":1}\n"
                   "{\"kind\":\"malloc\",\"addr\":\"0x00017f0000001000\",\"size\":8,\"op\":\"b\",\"time\":1}\n"
                   "{\"kind\":\"free\",\"addr\":\"0x00017f0000001000\",\"time\":3}\n");
  const auto r = run_cli({"bracket", "--in", path("e.jsonl")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out, "{\"id\":0,\"size\":4,\"start\":0,\"end\":1,\"op\":\"a\"}\n"
                   "{\"id\":1,\"size\":8,\"start\":1,\"end\":3,\"op\":\"b\"}\n");

  write("dbl.jsonl", "{\"kind\":\"malloc\",\"addr\":\"0x1000\",\"size\":4,\"op\":\"a\",\"time\":0}\n"
                     "{\"kind\":\"free\",\"addr\":\"0x1000\",\"time\":1}\n"
                     "{\"kind\":\"free\",\"addr\":\"0x1000\",\"time\":2}\n");
  EXPECT_EQ(run_cli({"bracket", "--in", path("dbl.jsonl")}).code, 5);
}

TEST_F(CliTest, SimulateShowsReorderHazard) {
  const std::string graph = MEMOPLAN_TEST_DATA "/resblock.json";
  const std::vector<std::string> base = {"simulate", "--graph", graph, "--schedule", "0,4,5,1,2,3,6",
                                         "--alignment", "1"};
  EXPECT_EQ(run_cli(base).code, 0);
  auto replay = base;
  replay.push_back("--order-based");
  const auto r = run_cli(replay);
  EXPECT_EQ(r.code, 4);
  EXPECT_EQ(run_cli({"simulate", "--graph", graph, "--schedule", "1,0,2,3,4,5,6"}).code, 2);
}

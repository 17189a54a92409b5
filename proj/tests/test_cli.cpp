#include <gtest/gtest.h>

#include <fcntl.h>
#include <signal.h>
#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

#include "httplib.h"
#include "levloop/scenario.hpp"

using namespace levloop;
namespace fs = std::filesystem;

extern char** environ;

namespace {

const std::string kCli = LEVLOOP_CLI_PATH;
const fs::path kScenarios = LEVLOOP_SCENARIO_DIR;

std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::vector<std::string> fields;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
      const char c = line[i];
      if (quoted) {
        if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
          cur += '"';
          ++i;
        } else if (c == '"') {
          quoted = false;
        } else {
          cur += c;
        }
      } else if (c == '"') {
        quoted = true;
      } else if (c == ',') {
        fields.push_back(cur);
        cur.clear();
      } else {
        cur += c;
      }
    }
    fields.push_back(cur);
    rows.push_back(fields);
  }
  return rows;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

int exit_code(const std::string& cmd) {
  const int status = std::system((cmd + " >/dev/null 2>&1").c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

fs::path temp_path(const std::string& name) {
  return fs::temp_directory_path() / ("levloop_test_" + std::to_string(::getpid()) + "_" + name);
}

std::string detail_value(const std::string& detail, const std::string& key) {
  const auto at = detail.find(key + "=");
  if (at == std::string::npos) return {};
  const auto start = at + key.size() + 1;
  return detail.substr(start, detail.find(';', start) - start);
}

}  // namespace

TEST(Csv, QuotesPerRfc4180) {
  EXPECT_EQ(scenario::csv_field("plain"), "plain");
  EXPECT_EQ(scenario::csv_field("a,b"), "\"a,b\"");
  EXPECT_EQ(scenario::csv_field("say \"hi\""), "\"say \"\"hi\"\"\"");
  std::ostringstream out;
  scenario::csv_row(out, {"x", "y,z"});
  EXPECT_EQ(out.str(), "x,\"y,z\"\r\n");
}

TEST(Scenario, EmptyScriptReportsPricesOnly) {
  const auto sc = scenario::load_scenario((kScenarios / "quiet.json").string());
  const auto rows = parse_csv(scenario::run_to_string(sc));
  ASSERT_EQ(rows.front(), scenario::kReportHeader);
  int blocks = 0;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (rows[i][0] == "block") {
      ++blocks;
      EXPECT_EQ(rows[i][2], "150");
      EXPECT_EQ(rows[i][3], "");
    } else {
      EXPECT_EQ(rows[i][0], "digest");
    }
  }
  EXPECT_EQ(blocks, 6);
}

TEST(Scenario, CrashLiquidatesAtTheFirstBlockBelowTheTrigger) {
  const auto sc = scenario::load_scenario((kScenarios / "crash.json").string());
  const auto rows = parse_csv(scenario::run_to_string(sc));
  std::optional<Wad> lp;
  std::optional<BlockHeight> liquidated_at;
  std::optional<BlockHeight> first_below;
  for (const auto& r : rows) {
    if (r[0] == "open" && r[3] == "1") lp = Wad::parse(detail_value(r[9], "liquidation_price"));
    if (r[0] == "liquidation") {
      EXPECT_EQ(r[3], "1");
      EXPECT_FALSE(liquidated_at);
      liquidated_at = std::stoull(r[1]);
    }
    if (r[0] == "block" && r[3] == "1" && lp) {
      const BlockHeight h = std::stoull(r[1]);
      const bool below = Wad::parse(r[2]) < *lp;
      if (below && !first_below) first_below = h;
      EXPECT_EQ(r[8] == "Liquidated", below || (first_below && h >= *first_below)) << "block " << h;
    }
    if (r[0] == "summary") {
      EXPECT_EQ(r[8], r[3] == "1" ? "Liquidated" : "Healthy");
    }
  }
  ASSERT_TRUE(lp);
  ASSERT_TRUE(liquidated_at);
  EXPECT_EQ(liquidated_at, first_below);
}

TEST(Scenario, RejectsInvalidFiles) {
  auto expect_invalid = [](const char* text) {
    try {
      scenario::scenario_from_json(nlohmann::json::parse(text), kScenarios);
      ADD_FAILURE() << text;
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), Errc::InvalidConfig) << e.what();
    }
  };
  expect_invalid(R"({"genesis_file": "genesis.json", "blocks": 3, "actions": [{"block": 1, "type": "open", "owner": "mallory", "collateral": "1", "target_leverage": "2"}]})");
  expect_invalid(R"({"genesis_file": "genesis.json", "blocks": 9, "actions": [{"block": 5, "type": "close", "position": 1}, {"block": 2, "type": "close", "position": 1}]})");
  expect_invalid(R"({"genesis_file": "genesis.json", "blocks": 3, "surprise": 1})");
  expect_invalid(R"({"genesis_file": "genesis.json", "genesis": {}})");
  expect_invalid(R"({"genesis": {"gas_price": 0.1}})");
}

TEST(Figure3, Rows) {
  const auto rows = scenario::figure3_rows(Wad::parse("1.05"), Wad::parse("3"), Wad::parse("0.05"), Wad::zero());
  ASSERT_EQ(rows.size(), 40u);
  for (std::size_t i = 1; i < rows.size(); ++i) EXPECT_LT(rows[i].theoretical, rows[i - 1].theoretical);
  auto at = [&](const char* r) {
    for (const auto& row : rows) {
      if (row.r == Wad::parse(r)) return row.theoretical;
    }
    ADD_FAILURE() << r;
    return 0.0;
  };
  EXPECT_EQ(at("1.5"), 3.0);
  EXPECT_EQ(at("2"), 2.0);
  EXPECT_NEAR(at("1.1"), 11.0, 1e-9);
  EXPECT_NEAR(at("3"), 1.5, 1e-9);
  try {
    scenario::figure3_rows(Wad::one(), Wad::parse("3"), Wad::parse("0.05"), Wad::zero());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::CollateralRatioAtOrBelowOne);
  }
}

TEST(Figure3, TailApproachesOneFromAbove) {
  const auto rows = scenario::figure3_rows(Wad::parse("10"), Wad::parse("10000"), Wad::parse("10"), Wad::parse("0.003"));
  double prev = 1e9;
  for (const auto& row : rows) {
    EXPECT_GT(row.theoretical, 1.0);
    EXPECT_LT(row.theoretical, prev);
    EXPECT_LE(row.effective, row.theoretical);
    prev = row.theoretical;
  }
  EXPECT_LT(rows.back().theoretical - 1.0, 1e-3);
}

TEST(Cli, RunIsByteDeterministic) {
  const auto a = temp_path("a.csv");
  const auto b = temp_path("b.csv");
  const auto scenario = (kScenarios / "crash.json").string();
  ASSERT_EQ(exit_code(kCli + " run --scenario " + scenario + " --out " + a.string()), 0);
  ASSERT_EQ(exit_code(kCli + " run --scenario " + scenario + " --out " + b.string()), 0);
  const auto text = slurp(a);
  EXPECT_FALSE(text.empty());
  EXPECT_EQ(text, slurp(b));
  EXPECT_EQ(text, scenario::run_to_string(scenario::load_scenario(scenario)));
  fs::remove(a);
  fs::remove(b);
}

TEST(Cli, Figure3Output) {
  const auto out = temp_path("fig3.csv");
  ASSERT_EQ(exit_code(kCli + " figure3 --r-min 1.05 --r-max 3 --step 0.05 --out " + out.string()), 0);
  const auto rows = parse_csv(slurp(out));
  ASSERT_EQ(rows.size(), 41u);
  EXPECT_EQ(rows[0], (std::vector<std::string>{"r", "theoretical_leverage", "effective_leverage"}));
  bool seen = false;
  for (const auto& r : rows) {
    if (r[0] == "1.5") {
      EXPECT_EQ(r[1], "3.000000000000");
      seen = true;
    }
  }
  EXPECT_TRUE(seen);
  fs::remove(out);
  EXPECT_EQ(exit_code(kCli + " figure3 --r-min 1 --r-max 3"), 2);
}

TEST(Cli, ExitCodes) {
  const auto bad = temp_path("bad.json");
  std::ofstream(bad) << "{ not json";
  EXPECT_EQ(exit_code(kCli + " run --scenario " + bad.string()), 2);
  EXPECT_EQ(exit_code(kCli + " serve --genesis " + bad.string() + " --port 0"), 2);
  EXPECT_EQ(exit_code(kCli + " run --scenario /nonexistent/scenario.json"), 2);
  EXPECT_EQ(exit_code(kCli + " bogus"), 2);
  const auto wrong = temp_path("wrong.json");
  std::ofstream(wrong) << R"({"accounts": [{"name": "a", "eth": "-1"}]})";
  EXPECT_EQ(exit_code(kCli + " serve --genesis " + wrong.string() + " --port 0"), 2);
  fs::remove(bad);
  fs::remove(wrong);
}

TEST(Cli, ServeAnswersOverHttp) {
  int pipefd[2];
  ASSERT_EQ(::pipe(pipefd), 0);
  posix_spawn_file_actions_t actions;
  posix_spawn_file_actions_init(&actions);
  posix_spawn_file_actions_adddup2(&actions, pipefd[1], STDERR_FILENO);
  posix_spawn_file_actions_addclose(&actions, pipefd[0]);
  const std::string scenario = (kScenarios / "crash.json").string();
  std::vector<std::string> args = {kCli, "serve", "--scenario", scenario, "--port", "0"};
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  argv.push_back(nullptr);
  pid_t pid = 0;
  ASSERT_EQ(posix_spawn(&pid, kCli.c_str(), &actions, nullptr, argv.data(), environ), 0);
  posix_spawn_file_actions_destroy(&actions);
  ::close(pipefd[1]);

  // "levloop: listening on 127.0.0.1:<port>"
  std::string line;
  char c = 0;
  while (::read(pipefd[0], &c, 1) == 1 && c != '\n') line += c;
  const auto colon = line.rfind(':');
  ASSERT_NE(colon, std::string::npos) << line;
  const int port = std::stoi(line.substr(colon + 1));

  httplib::Client cli("127.0.0.1", port);
  auto missing = cli.Get("/positions/99");
  ASSERT_TRUE(missing);
  EXPECT_EQ(missing->status, 404);
  auto preloaded = cli.Get("/positions/1");
  ASSERT_TRUE(preloaded);
  EXPECT_EQ(preloaded->status, 200);

  ::kill(pid, SIGTERM);
  int status = 0;
  ::waitpid(pid, &status, 0);
  ::close(pipefd[0]);
  EXPECT_TRUE(WIFEXITED(status));
  EXPECT_EQ(WEXITSTATUS(status), 0);
}

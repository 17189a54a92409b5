// levloop: scenario runner, leverage-ceiling table and HTTP service.

#include <csignal>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "levloop/config.hpp"
#include "levloop/engine.hpp"
#include "levloop/scenario.hpp"
#include "levloop/service.hpp"

namespace {

constexpr int kOk = 0;
constexpr int kRuntimeError = 1;
constexpr int kConfigError = 2;

levloop::service::HttpServer* g_server = nullptr;

void on_signal(int) {
  if (g_server) g_server->stop();
}

int write_output(const std::string& text, const std::string& path) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return kOk;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    std::cerr << "levloop: cannot write " << path << '\n';
    return kRuntimeError;
  }
  out << text;
  return out ? kOk : kRuntimeError;
}

int exit_code_for(const levloop::Error& e) {
  switch (e.code()) {
    case levloop::Errc::InvalidConfig:
    case levloop::Errc::InvalidAmount:
    case levloop::Errc::NonMonotonePath:
    case levloop::Errc::NonPositivePrice:
    case levloop::Errc::CollateralRatioAtOrBelowOne:
    case levloop::Errc::InvalidFee:
      return kConfigError;
    default:
      return kRuntimeError;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Leveraged vault looping simulator"};
  app.require_subcommand(1);

  std::string scenario_path;
  std::string out_path;
  auto* run = app.add_subcommand("run", "Run a scenario file and write a CSV report");
  run->add_option("--scenario", scenario_path, "Scenario JSON")->required();
  run->add_option("--out", out_path, "Output CSV (stdout when omitted)");

  std::string r_min = "1.05", r_max = "3", step = "0.05", fee = "0";
  std::string fig_out;
  auto* fig = app.add_subcommand("figure3", "Maximum leverage over collateral requirement, as CSV");
  fig->add_option("--r-min", r_min, "Smallest collateral requirement")->capture_default_str();
  fig->add_option("--r-max", r_max, "Largest collateral requirement")->capture_default_str();
  fig->add_option("--step", step, "Increment")->capture_default_str();
  fig->add_option("--fee", fee, "Swap fee ratio for the effective column")->capture_default_str();
  fig->add_option("--out", fig_out, "Output CSV (stdout when omitted)");

  std::string genesis_path;
  std::string serve_scenario;
  std::string host = "127.0.0.1";
  int port = 8080;
  auto* serve = app.add_subcommand("serve", "Serve the HTTP/JSON API");
  serve->add_option("--genesis", genesis_path, "Genesis config JSON")->envname("LEVLOOP_GENESIS");
  serve->add_option("--scenario", serve_scenario, "Scenario whose genesis and block-0 actions are preloaded");
  serve->add_option("--port", port, "TCP port")->envname("LEVLOOP_PORT")->capture_default_str();
  serve->add_option("--host", host, "Bind address")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kConfigError;
  }

  try {
    if (*run) {
      levloop::scenario::Scenario sc;
      try {
        sc = levloop::scenario::load_scenario(scenario_path);
      } catch (const levloop::Error& e) {
        std::cerr << "levloop: invalid scenario: " << e.what() << '\n';
        return kConfigError;
      }
      return write_output(levloop::scenario::run_to_string(sc), out_path);
    }

    if (*fig) {
      const auto rows = levloop::scenario::figure3_rows(levloop::Wad::parse(r_min), levloop::Wad::parse(r_max),
                                                        levloop::Wad::parse(step), levloop::Wad::parse(fee));
      std::ostringstream out;
      levloop::scenario::write_figure3(rows, out);
      return write_output(out.str(), fig_out);
    }

    if (*serve) {
      std::optional<levloop::scenario::Scenario> sc;
      levloop::EngineConfig cfg;
      try {
        if (!serve_scenario.empty()) {
          sc = levloop::scenario::load_scenario(serve_scenario);
          cfg = sc->engine;
        } else if (!genesis_path.empty()) {
          cfg = levloop::config::engine_config_from_json(levloop::config::read_json_file(genesis_path));
        } else {
          std::cerr << "levloop: serve needs --genesis, LEVLOOP_GENESIS or --scenario\n";
          return kConfigError;
        }
      } catch (const levloop::Error& e) {
        std::cerr << "levloop: invalid config: " << e.what() << '\n';
        return kConfigError;
      }
      levloop::Engine engine(cfg);
      if (sc) {
        for (const auto& a : sc->actions) {
          if (a.block != 0 || a.kind != levloop::scenario::ActionKind::Open) continue;
          engine.open_position(a.owner, a.collateral, a.target_leverage, a.slippage_tolerance);
        }
      }
      levloop::service::HttpServer server(engine);
      const int bound = server.bind(host, port);
      if (bound < 0) {
        std::cerr << "levloop: cannot bind " << host << ':' << port << '\n';
        return kRuntimeError;
      }
      g_server = &server;
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      std::cerr << "levloop: listening on " << host << ':' << bound << '\n';
      server.listen();
      g_server = nullptr;
      return kOk;
    }
  } catch (const levloop::Error& e) {
    std::cerr << "levloop: " << e.what() << '\n';
    return exit_code_for(e);
  } catch (const std::exception& e) {
    std::cerr << "levloop: " << e.what() << '\n';
    return kRuntimeError;
  }
  return kOk;
}

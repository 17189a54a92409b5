#pragma once

// Headless scenario runner and the CSV reports the CLI writes.

#include <cstdio>
#include <filesystem>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "levloop/config.hpp"
#include "levloop/engine.hpp"
#include "levloop/leverage.hpp"
#include "levloop/monitor.hpp"

namespace levloop::scenario {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// CSV

inline std::string csv_field(std::string_view v) {
  if (v.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(v);
  std::string out = "\"";
  for (char c : v) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

inline void csv_row(std::ostream& out, const std::vector<std::string>& fields) {
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out << ',';
    out << csv_field(fields[i]);
  }
  out << "\r\n";
}

// ---------------------------------------------------------------------------
// Scenario model

enum class ActionKind { Open, OpenCycles, Collateralize, Close };

struct Action {
  BlockHeight block = 0;
  ActionKind kind = ActionKind::Open;
  std::string owner;
  Wad collateral;
  Wad target_leverage = Wad::one();
  std::optional<Wad> slippage_tolerance;
  std::size_t cycles = 0;
  leverage::PositionId position = 0;
  Wad amount;
};

struct Scenario {
  EngineConfig engine;
  BlockHeight blocks = 0;
  std::vector<Action> actions;
};

inline Scenario scenario_from_json(const json& j, const std::filesystem::path& base_dir = {}) {
  using config::bad;
  try {
    config::only_keys(j, "scenario", {"genesis", "genesis_file", "price_path", "blocks", "actions"});
    Scenario sc;
    if (j.contains("genesis") == j.contains("genesis_file")) throw bad("give exactly one of genesis / genesis_file");
    if (j.contains("genesis")) {
      sc.engine = config::engine_config_from_json(j.at("genesis"));
    } else {
      const auto path = base_dir / j.at("genesis_file").get<std::string>();
      sc.engine = config::engine_config_from_json(config::read_json_file(path.string()));
    }
    if (j.contains("price_path")) {
      sc.engine.genesis.price_path = config::price_steps_from_json(j.at("price_path"));
      PricePath::validate(sc.engine.genesis.price_path);
    }
    sc.blocks = j.value("blocks", BlockHeight{0});

    auto known_account = [&](const std::string& name) {
      for (const auto& a : sc.engine.resolved_genesis().accounts) {
        if (a.name == name) return true;
      }
      return false;
    };

    BlockHeight last = 0;
    for (const auto& a : j.value("actions", json::array())) {
      config::only_keys(a, "action",
                        {"block", "type", "owner", "collateral", "target_leverage", "slippage_tolerance", "cycles",
                         "position", "amount"});
      Action act;
      act.block = a.at("block").get<BlockHeight>();
      if (act.block < last) throw bad("action blocks must be non-decreasing");
      if (act.block > sc.blocks) throw bad("action at block " + std::to_string(act.block) + " is past the end");
      last = act.block;
      const auto type = a.at("type").get<std::string>();
      if (type == "open" || type == "open_cycles") {
        act.kind = type == "open" ? ActionKind::Open : ActionKind::OpenCycles;
        act.owner = a.at("owner").get<std::string>();
        if (!known_account(act.owner)) throw bad("unknown account '" + act.owner + "'");
        act.collateral = config::wad_field(a.at("collateral"), "collateral");
        if (act.kind == ActionKind::Open) {
          act.target_leverage = config::wad_field(a.at("target_leverage"), "target_leverage");
        } else {
          act.cycles = a.at("cycles").get<std::size_t>();
        }
        if (a.contains("slippage_tolerance")) {
          act.slippage_tolerance = config::wad_field(a.at("slippage_tolerance"), "slippage_tolerance");
        }
      } else if (type == "collateralize") {
        act.kind = ActionKind::Collateralize;
        act.position = a.at("position").get<leverage::PositionId>();
        act.amount = config::wad_field(a.at("amount"), "amount");
      } else if (type == "close") {
        act.kind = ActionKind::Close;
        act.position = a.at("position").get<leverage::PositionId>();
      } else {
        throw bad("unknown action type '" + type + "'");
      }
      sc.actions.push_back(act);
    }
    return sc;
  } catch (const json::exception& e) {
    throw bad(e.what());
  }
}

inline Scenario load_scenario(const std::string& path) {
  return scenario_from_json(config::read_json_file(path), std::filesystem::path(path).parent_path());
}

// ---------------------------------------------------------------------------
// Runner

inline const std::vector<std::string> kReportHeader = {"record", "height", "price", "position", "collateral",
                                                       "debt",   "equity", "pnl",   "status",   "detail"};

namespace detail {

inline std::vector<std::string> report_row(const char* record, const monitor::PositionReport& r, std::string detail = {}) {
  return {record,         std::to_string(r.height), r.price.str(),
          std::to_string(r.position), r.collateral.str(), r.debt.str(),
          r.equity.str(), r.pnl.str(), std::string(monitor::to_string(r.status)),
          std::move(detail)};
}

inline std::vector<std::string> event_row(const char* record, BlockHeight h, const std::optional<Wad>& price,
                                          std::optional<leverage::PositionId> pos, std::string detail) {
  return {record, std::to_string(h), price ? price->str() : "", pos ? std::to_string(*pos) : "", "", "", "", "", "",
          std::move(detail)};
}

}  // namespace detail

/// Steps through blocks 0..blocks. At each block the engine first advances
/// (realigning the pool and running the monitor), then that block's actions
/// execute, then one row per position is written.
inline void run(const Scenario& sc, std::ostream& out) {
  Engine engine(sc.engine);
  csv_row(out, kReportHeader);
  std::size_t next_action = 0;

  auto settlement_rows = [&](const std::vector<Settlement>& settled, BlockHeight h) {
    for (const auto& st : settled) {
      std::optional<leverage::PositionId> pos;
      for (const auto& p : engine.positions()) {
        if (p.vault == st.vault) pos = p.id;
      }
      csv_row(out, detail::event_row("liquidation", h, st.price, pos,
                                     "seized=" + st.seized.str() + ";returned=" + st.returned.str() +
                                         ";paid=" + st.paid.str() + ";bad_debt=" + st.bad_debt.str()));
    }
  };

  for (BlockHeight h = 0; h <= sc.blocks; ++h) {
    if (h > 0) settlement_rows(engine.advance(1).settlements, h);
    const auto price = engine.snapshot().state.price_if_any();

    for (; next_action < sc.actions.size() && sc.actions[next_action].block == h; ++next_action) {
      const Action& a = sc.actions[next_action];
      try {
        switch (a.kind) {
          case ActionKind::Open:
          case ActionKind::OpenCycles: {
            const auto res = a.kind == ActionKind::Open
                                 ? engine.open_position(a.owner, a.collateral, a.target_leverage, a.slippage_tolerance)
                                 : engine.open_position_cycles(a.owner, a.collateral, a.cycles);
            csv_row(out, detail::event_row("open", h, price, res.position.id,
                                           "cycles=" + std::to_string(res.plan.cycles.size()) +
                                               ";achieved_leverage=" + res.position.achieved_leverage.str() +
                                               ";liquidation_price=" + res.liquidation_price.str() +
                                               ";gas_paid=" + res.receipt.gas_paid.str()));
            break;
          }
          case ActionKind::Collateralize: {
            const Wad lp = engine.recollateralize(a.position, a.amount);
            csv_row(out, detail::event_row("collateralize", h, price, a.position,
                                           "amount=" + a.amount.str() + ";liquidation_price=" + lp.str()));
            break;
          }
          case ActionKind::Close: {
            const auto res = engine.close_position(a.position);
            csv_row(out, detail::event_row("close", h, price, a.position,
                                           "realized_equity=" + res.realized_equity.str() +
                                               ";gas_paid=" + res.receipt.gas_paid.str()));
            break;
          }
        }
      } catch (const Error& e) {
        csv_row(out, detail::event_row("error", h, price, a.kind == ActionKind::Open || a.kind == ActionKind::OpenCycles
                                                              ? std::nullopt
                                                              : std::optional(a.position),
                                       e.what()));
      }
    }

    const auto reports = engine.reports();
    if (reports.empty()) {
      csv_row(out, detail::event_row("block", h, price, std::nullopt, ""));
    } else {
      for (const auto& r : reports) csv_row(out, detail::report_row("block", r));
    }
  }

  for (const auto& r : engine.reports()) csv_row(out, detail::report_row("summary", r));
  csv_row(out, detail::event_row("digest", sc.blocks, std::nullopt, std::nullopt, engine.digest()));
}

inline std::string run_to_string(const Scenario& sc) {
  std::ostringstream out;
  run(sc, out);
  return out.str();
}

// ---------------------------------------------------------------------------
// Leverage ceiling table

struct Figure3Row {
  Wad r;
  double theoretical;
  double effective;
};

/// Rows for r = r_min, r_min + step, ... up to r_max inclusive.
inline std::vector<Figure3Row> figure3_rows(Wad r_min, Wad r_max, Wad step, Wad fee) {
  if (r_min <= Wad::one()) throw Error(Errc::CollateralRatioAtOrBelowOne, "r_min must exceed 1");
  if (r_max <= r_min) throw Error(Errc::InvalidConfig, "r_max must exceed r_min");
  if (!step.is_positive()) throw Error(Errc::InvalidConfig, "step must be positive");
  std::vector<Figure3Row> rows;
  for (std::int64_t i = 0;; ++i) {
    const Wad r = r_min + step * i;
    if (r > r_max) break;
    rows.push_back(Figure3Row{r, leverage::theoretical_max_leverage(r.to_double()),
                              leverage::effective_max_leverage(r.to_double(), fee.to_double())});
  }
  return rows;
}

inline void write_figure3(const std::vector<Figure3Row>& rows, std::ostream& out) {
  csv_row(out, {"r", "theoretical_leverage", "effective_leverage"});
  char a[64];
  char b[64];
  for (const auto& row : rows) {
    std::snprintf(a, sizeof a, "%.12f", row.theoretical);
    std::snprintf(b, sizeof b, "%.12f", row.effective);
    csv_row(out, {row.r.str(), a, b});
  }
}

}  // namespace levloop::scenario

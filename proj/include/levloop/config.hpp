#pragma once

// JSON encodings for configuration files and API payloads. Amounts travel
// as decimal strings so no precision is lost on the way in or out.

#include <fstream>
#include <initializer_list>
#include <sstream>
#include <string>
#include <string_view>

#include "json.hpp"
#include "levloop/engine.hpp"
#include "levloop/error.hpp"
#include "levloop/leverage.hpp"
#include "levloop/monitor.hpp"
#include "levloop/oracle.hpp"
#include "levloop/state.hpp"
#include "levloop/wad.hpp"

namespace levloop::config {

using json = nlohmann::json;

inline Error bad(const std::string& what) { return Error(Errc::InvalidConfig, what); }

/// Decimal string, or an integer literal for convenience in hand-written
/// files. Floating-point literals are rejected.
inline Wad wad_field(const json& j, std::string_view key) {
  if (j.is_string()) {
    try {
      return Wad::parse(j.get<std::string>());
    } catch (const Error& e) {
      throw bad(std::string(key) + ": " + e.what());
    }
  }
  if (j.is_number_integer()) return Wad::from_int(j.get<std::int64_t>());
  throw bad(std::string(key) + ": expected a decimal string");
}

inline Wad wad_at(const json& obj, std::string_view key, Wad fallback) {
  auto it = obj.find(key);
  return it == obj.end() ? fallback : wad_field(*it, key);
}

inline void only_keys(const json& obj, std::string_view where, std::initializer_list<std::string_view> keys) {
  if (!obj.is_object()) throw bad(std::string(where) + " must be an object");
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool known = false;
    for (auto k : keys) known = known || it.key() == k;
    if (!known) throw bad("unknown key '" + it.key() + "' in " + std::string(where));
  }
}

inline std::vector<PriceStep> price_steps_from_json(const json& j) {
  if (!j.is_array()) throw bad("price path must be an array of steps");
  std::vector<PriceStep> steps;
  for (const auto& e : j) {
    // [height, "price"] or {"height": h, "price": "p"}
    if (e.is_array() && e.size() == 2 && e[0].is_number_unsigned()) {
      steps.push_back(PriceStep{e[0].get<BlockHeight>(), wad_field(e[1], "price")});
    } else if (e.is_object() && e.size() == 2 && e.contains("height") && e.contains("price") &&
               e["height"].is_number_unsigned()) {
      steps.push_back(PriceStep{e["height"].get<BlockHeight>(), wad_field(e["price"], "price")});
    } else {
      throw bad("price path entries must be [height, \"price\"] or {\"height\", \"price\"}");
    }
  }
  return steps;
}

/// Validated path; errors carry the oracle's own codes.
inline PricePath price_path_from_json(const json& j) { return PricePath(price_steps_from_json(j)); }

inline json price_path_to_json(const PricePath& p) {
  json out = json::array();
  for (const auto& s : p.steps()) out.push_back(json::array({s.height, s.price.str()}));
  return out;
}

inline FundedAccount funded_from_json(const json& j, FundedAccount base, std::string_view where) {
  only_keys(j, where, {"name", "eth", "dai"});
  if (j.contains("name")) base.name = j.at("name").get<std::string>();
  base.eth = wad_at(j, "eth", base.eth);
  base.dai = wad_at(j, "dai", base.dai);
  return base;
}

inline EngineConfig engine_config_from_json(const json& j) {
  try {
    only_keys(j, "genesis",
              {"gas_price", "gas_schedule", "collateral", "accounts", "pool", "price_path", "backing_ratio", "monitor",
               "arbitrage", "leverage"});
    EngineConfig cfg;
    GenesisConfig& g = cfg.genesis;
    g.gas_price = wad_at(j, "gas_price", g.gas_price);
    g.backing_ratio = wad_at(j, "backing_ratio", g.backing_ratio);

    if (auto it = j.find("gas_schedule"); it != j.end()) {
      auto& s = g.gas_schedule;
      only_keys(*it, "gas_schedule",
                {"base_batch", "transfer", "open_vault", "deposit", "withdraw_collateral", "withdraw_dai", "repay",
                 "swap", "close_vault", "liquidate"});
      auto set = [&](const char* key, std::uint64_t& field) {
        if (it->contains(key)) field = it->at(key).get<std::uint64_t>();
      };
      set("base_batch", s.base_batch);
      set("transfer", s.transfer);
      set("open_vault", s.open_vault);
      set("deposit", s.deposit);
      set("withdraw_collateral", s.withdraw_collateral);
      set("withdraw_dai", s.withdraw_dai);
      set("repay", s.repay);
      set("swap", s.swap);
      set("close_vault", s.close_vault);
      set("liquidate", s.liquidate);
    }

    if (auto it = j.find("collateral"); it != j.end()) {
      only_keys(*it, "collateral",
                {"collateral_requirement", "liquidation_ratio", "liquidation_penalty", "auction_discount", "dust_limit"});
      auto& c = g.collateral;
      c.collateral_requirement = wad_at(*it, "collateral_requirement", c.collateral_requirement);
      // The liquidation ratio follows r unless given.
      c.liquidation_ratio = wad_at(*it, "liquidation_ratio", c.collateral_requirement);
      c.liquidation_penalty = wad_at(*it, "liquidation_penalty", c.liquidation_penalty);
      c.auction_discount = wad_at(*it, "auction_discount", c.auction_discount);
      c.dust_limit = wad_at(*it, "dust_limit", c.dust_limit);
    }

    if (auto it = j.find("accounts"); it != j.end()) {
      if (!it->is_array()) throw bad("accounts must be an array");
      for (const auto& a : *it) {
        only_keys(a, "account", {"name", "eth", "dai"});
        g.accounts.push_back(AccountSpec{a.at("name").get<std::string>(), wad_at(a, "eth", Wad::zero()),
                                         wad_at(a, "dai", Wad::zero())});
      }
    }

    if (auto it = j.find("pool"); it != j.end()) {
      only_keys(*it, "pool", {"reserve_eth", "reserve_dai", "fee_bps"});
      PoolSpec p;
      p.reserve_eth = wad_field(it->at("reserve_eth"), "reserve_eth");
      p.reserve_dai = wad_field(it->at("reserve_dai"), "reserve_dai");
      p.fee_bps = it->value("fee_bps", p.fee_bps);
      g.pool = p;
    }

    if (auto it = j.find("price_path"); it != j.end()) g.price_path = price_steps_from_json(*it);

    if (auto it = j.find("monitor"); it != j.end()) {
      only_keys(*it, "monitor", {"margin_call_buffer", "auto_liquidate", "keeper"});
      cfg.policy.margin_call_buffer = wad_at(*it, "margin_call_buffer", cfg.policy.margin_call_buffer);
      if (cfg.policy.margin_call_buffer.is_negative()) throw bad("margin_call_buffer must be >= 0");
      cfg.auto_liquidate = it->value("auto_liquidate", cfg.auto_liquidate);
      if (it->contains("keeper")) cfg.keeper = funded_from_json(it->at("keeper"), cfg.keeper, "keeper");
    }

    if (auto it = j.find("arbitrage"); it != j.end()) {
      only_keys(*it, "arbitrage", {"enabled", "account"});
      cfg.pool_tracks_oracle = it->value("enabled", cfg.pool_tracks_oracle);
      if (it->contains("account")) cfg.arbitrageur = funded_from_json(it->at("account"), cfg.arbitrageur, "arbitrage");
    }

    if (auto it = j.find("leverage"); it != j.end()) {
      only_keys(*it, "leverage", {"slippage_tolerance", "safety_margin", "max_cycles"});
      cfg.plan.slippage_tolerance = wad_at(*it, "slippage_tolerance", cfg.plan.slippage_tolerance);
      if (it->contains("safety_margin")) cfg.plan.safety_margin = wad_field(it->at("safety_margin"), "safety_margin").to_double();
      cfg.plan.max_cycles = it->value("max_cycles", cfg.plan.max_cycles);
    }
    PricePath::validate(g.price_path);
    g.collateral.validate();
    return cfg;
  } catch (const json::exception& e) {
    throw bad(e.what());
  } catch (const Error& e) {
    if (e.code() == Errc::InvalidConfig) throw;
    throw bad(e.what());
  }
}

inline json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw bad("cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw bad(path + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Encoders

inline json opt_wad(const std::optional<Wad>& w) { return w ? json(w->str()) : json(nullptr); }

inline json to_json(const Settlement& s) {
  return json{{"vault", s.vault},         {"keeper", s.keeper},
              {"price", s.price.str()},   {"principal", s.principal.str()},
              {"owed", s.owed.str()},     {"auction_price", s.auction_price.str()},
              {"seized", s.seized.str()}, {"returned", s.returned.str()},
              {"paid", s.paid.str()},     {"bad_debt", s.bad_debt.str()}};
}

inline json to_json(const Receipt& r) {
  json j{{"success", r.success},
         {"gas_used", r.gas_used},
         {"gas_paid", r.gas_paid.str()},
         {"height", r.height},
         {"error", r.error ? json(std::string(to_string(*r.error))) : json(nullptr)}};
  if (!r.message.empty()) j["message"] = r.message;
  return j;
}

inline json to_json(const leverage::LeveragePlan& p) {
  json cycles = json::array();
  for (const auto& c : p.cycles) {
    cycles.push_back(json{{"dai_withdrawn", c.dai_withdrawn.str()},
                          {"eth_bought", c.eth_bought.str()},
                          {"eth_redeposited", c.eth_redeposited.str()},
                          {"min_out", c.min_out.str()}});
  }
  return json{{"owner", p.owner},
              {"initial_collateral", p.initial_collateral.str()},
              {"target_leverage", p.target_leverage.str()},
              {"price", p.price.str()},
              {"slippage_tolerance", p.slippage_tolerance.str()},
              {"cycles", cycles},
              {"cycle_count", p.cycles.size()},
              {"expected_exposure", p.expected_exposure.str()},
              {"expected_debt", p.expected_debt.str()},
              {"gas_units", p.gas_units},
              {"expected_gas", p.expected_gas.str()}};
}

inline json to_json(const leverage::Position& p) {
  return json{{"id", p.id},
              {"vault", p.vault},
              {"owner", p.owner},
              {"entry_price", p.entry_price.str()},
              {"initial_collateral", p.initial_collateral.str()},
              {"initial_equity", p.initial_equity.str()},
              {"achieved_leverage", p.achieved_leverage.str()},
              {"cumulative_costs", p.cumulative_costs.str()},
              {"status", std::string(to_string(p.status))},
              {"realized_equity", opt_wad(p.realized_equity)},
              {"opened_at", p.opened_at}};
}

inline json to_json(const monitor::PositionReport& r) {
  return json{{"position", r.position},
              {"vault", r.vault},
              {"height", r.height},
              {"price", r.price.str()},
              {"collateral", r.collateral.str()},
              {"debt", r.debt.str()},
              {"equity", r.equity.str()},
              {"pnl", r.pnl.str()},
              {"collateralization", opt_wad(r.collateralization)},
              {"liquidation_price", opt_wad(r.liquidation_price)},
              {"status", std::string(monitor::to_string(r.status))}};
}

}  // namespace levloop::config

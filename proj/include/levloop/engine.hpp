#pragma once

// The engine owns one ledger plus the position book and serializes every
// mutation behind a single writer lock. Reads take a shared lock.

#include <map>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include <boost/multiprecision/integer.hpp>

#include "levloop/error.hpp"
#include "levloop/leverage.hpp"
#include "levloop/ledger.hpp"
#include "levloop/monitor.hpp"
#include "levloop/state.hpp"
#include "levloop/wad.hpp"

namespace levloop {

struct FundedAccount {
  std::string name;
  Wad eth;
  Wad dai;
};

struct EngineConfig {
  GenesisConfig genesis;
  monitor::MarginPolicy policy;
  bool auto_liquidate = true;
  FundedAccount keeper{"@keeper", Wad::from_int(1'000), Wad::from_int(1'000'000)};
  // An arbitrageur re-centres the pool on the oracle price at every block.
  bool pool_tracks_oracle = true;
  FundedAccount arbitrageur{"@arbitrageur", Wad::from_int(10'000), Wad::from_int(10'000'000)};
  leverage::PlanOptions plan;

  /// Genesis with the keeper and arbitrageur funded unless already listed.
  GenesisConfig resolved_genesis() const {
    GenesisConfig g = genesis;
    auto ensure = [&](const FundedAccount& a) {
      for (const auto& existing : g.accounts) {
        if (existing.name == a.name) return;
      }
      g.accounts.push_back(AccountSpec{a.name, a.eth, a.dai});
    };
    if (auto_liquidate) ensure(keeper);
    if (pool_tracks_oracle && g.pool) ensure(arbitrageur);
    return g;
  }
};

struct OpenResult {
  leverage::Position position;
  leverage::LeveragePlan plan;
  Receipt receipt;
  Wad liquidation_price;
};

struct CloseResult {
  Wad realized_equity;
  Receipt receipt;
};

struct StepResult {
  BlockHeight height = 0;
  std::string digest;
  std::vector<monitor::PositionReport> reports;
  std::vector<Settlement> settlements;
};

class Engine {
 public:
  explicit Engine(EngineConfig cfg) : cfg_(std::move(cfg)), ledger_(cfg_.resolved_genesis()) { refresh_locked(); }

  const EngineConfig& config() const { return cfg_; }

  // -- positions -----------------------------------------------------------

  OpenResult open_position(const std::string& owner, Wad collateral, Wad target_leverage,
                           std::optional<Wad> slippage_tolerance = std::nullopt) {
    std::unique_lock lock(mu_);
    leverage::PlanOptions opt = cfg_.plan;
    if (slippage_tolerance) opt.slippage_tolerance = *slippage_tolerance;
    const auto plan = leverage::plan_open(ledger_.state(), owner, collateral, target_leverage, opt);
    return execute_locked(plan);
  }

  OpenResult open_position_cycles(const std::string& owner, Wad collateral, std::size_t cycles) {
    std::unique_lock lock(mu_);
    const auto plan = leverage::plan_open_cycles(ledger_.state(), owner, collateral, cycles, cfg_.plan.slippage_tolerance);
    return execute_locked(plan);
  }

  /// Executes a plan computed earlier; the state may have moved since.
  OpenResult execute_plan(const leverage::LeveragePlan& plan) {
    std::unique_lock lock(mu_);
    return execute_locked(plan);
  }

  /// Starts tracking an existing vault as a position valued at the current price.
  leverage::PositionId track_vault(VaultId vault) {
    std::unique_lock lock(mu_);
    const Vault& v = ledger_.state().vault(vault);
    const Wad price = ledger_.state().price();
    leverage::Position p;
    p.id = next_position_++;
    p.vault = vault;
    p.owner = v.owner;
    p.entry_price = price;
    p.initial_collateral = v.collateral;
    p.initial_equity = v.collateral * price - v.debt;
    p.achieved_leverage = v.collateral.is_zero() || p.initial_equity <= Wad::zero()
                              ? Wad::one()
                              : Wad::mul_div(v.collateral, price, p.initial_equity);
    p.opened_at = ledger_.state().height;
    positions_.emplace(p.id, p);
    return p.id;
  }

  Wad recollateralize(leverage::PositionId id, Wad amount) {
    std::unique_lock lock(mu_);
    return leverage::recollateralize(ledger_, position_locked(id), amount).liquidation_price;
  }

  CloseResult close_position(leverage::PositionId id) {
    std::unique_lock lock(mu_);
    auto& p = position_locked(id);
    auto outcome = leverage::execute_close(ledger_, p);
    if (!outcome.receipt.success) {
      throw Error(outcome.receipt.error.value_or(Errc::UnwindInfeasible), outcome.receipt.message);
    }
    return CloseResult{outcome.realized_equity, outcome.receipt};
  }

  /// Keeper-driven liquidation of any vault.
  Receipt liquidate(VaultId vault, const std::string& keeper) {
    std::unique_lock lock(mu_);
    Receipt rc = ledger_.execute_batch(ledger_.make_batch(keeper, {op::Liquidate{vault}}));
    if (rc.success) {
      for (auto& [_, p] : positions_) {
        if (p.vault == vault) monitor::mark_liquidated(p, rc.settlements.front());
      }
      settlements_.insert(settlements_.end(), rc.settlements.begin(), rc.settlements.end());
    }
    return rc;
  }

  Receipt submit(const TxBatch& batch) {
    std::unique_lock lock(mu_);
    return ledger_.execute_batch(batch);
  }

  // -- scenario control ----------------------------------------------------

  /// Advances block by block; each new block realigns the pool and runs the
  /// monitor scan.
  StepResult advance(std::uint64_t blocks) {
    std::unique_lock lock(mu_);
    StepResult out;
    for (std::uint64_t i = 0; i < blocks; ++i) {
      ledger_.advance_block(1);
      auto scan = refresh_locked();
      out.reports = std::move(scan.reports);
      out.settlements.insert(out.settlements.end(), scan.settlements.begin(), scan.settlements.end());
    }
    out.height = ledger_.state().height;
    out.digest = ledger_.state_digest();
    return out;
  }

  StepResult set_path(PricePath path) {
    std::unique_lock lock(mu_);
    ledger_.set_path(std::move(path));
    auto scan = refresh_locked();
    return StepResult{ledger_.state().height, ledger_.state_digest(), std::move(scan.reports),
                      std::move(scan.settlements)};
  }

  // -- reads ---------------------------------------------------------------

  monitor::PositionReport report(leverage::PositionId id) const {
    std::shared_lock lock(mu_);
    const auto& p = position_locked(id);
    return monitor::report(p, ledger_.state(), ledger_.state().price(), cfg_.policy);
  }

  std::vector<monitor::PositionReport> reports() const {
    std::shared_lock lock(mu_);
    std::vector<monitor::PositionReport> out;
    const auto price = ledger_.state().price_if_any();
    if (!price) return out;
    for (const auto& [_, p] : positions_) out.push_back(monitor::report(p, ledger_.state(), *price, cfg_.policy));
    return out;
  }

  leverage::Position position(leverage::PositionId id) const {
    std::shared_lock lock(mu_);
    return position_locked(id);
  }

  std::vector<leverage::Position> positions() const {
    std::shared_lock lock(mu_);
    std::vector<leverage::Position> out;
    for (const auto& [_, p] : positions_) out.push_back(p);
    return out;
  }

  std::vector<Settlement> settlements() const {
    std::shared_lock lock(mu_);
    return settlements_;
  }

  Snapshot snapshot() const {
    std::shared_lock lock(mu_);
    return ledger_.read_state();
  }

  std::string digest() const {
    std::shared_lock lock(mu_);
    return ledger_.state_digest();
  }

  Wad liquidation_price(leverage::PositionId id) const {
    std::shared_lock lock(mu_);
    const auto& s = ledger_.state();
    return vault_math::liquidation_price(s.vault(position_locked(id).vault), s.collateral.liquidation_ratio);
  }

  /// Direct access for tests and tools that inspect the ledger.
  const Ledger& ledger() const { return ledger_; }

 private:
  OpenResult execute_locked(const leverage::LeveragePlan& plan) {
    auto outcome = leverage::execute_open(ledger_, plan);
    if (!outcome.receipt.success) {
      throw Error(outcome.receipt.error.value_or(Errc::InjectedFault), outcome.receipt.message);
    }
    auto p = *outcome.position;
    p.id = next_position_++;
    positions_.emplace(p.id, p);
    const auto& s = ledger_.state();
    return OpenResult{p, plan, outcome.receipt,
                      vault_math::liquidation_price(s.vault(p.vault), s.collateral.liquidation_ratio)};
  }

  leverage::Position& position_locked(leverage::PositionId id) {
    auto it = positions_.find(id);
    if (it == positions_.end()) throw Error(Errc::UnknownPosition, "position " + std::to_string(id));
    return it->second;
  }
  const leverage::Position& position_locked(leverage::PositionId id) const {
    auto it = positions_.find(id);
    if (it == positions_.end()) throw Error(Errc::UnknownPosition, "position " + std::to_string(id));
    return it->second;
  }

  monitor::ScanResult refresh_locked() {
    if (cfg_.pool_tracks_oracle) rebalance_pool_locked();
    monitor::ScanOptions opt{cfg_.policy, cfg_.auto_liquidate, cfg_.keeper.name};
    auto scan = monitor::scan_and_report(ledger_, positions_, opt);
    settlements_.insert(settlements_.end(), scan.settlements.begin(), scan.settlements.end());
    return scan;
  }

  /// Trades against the pool from the arbitrageur account until its mid price
  /// matches the oracle (ignoring the fee), limited by the arbitrageur's
  /// inventory.
  void rebalance_pool_locked() {
    const auto& s = ledger_.state();
    if (!s.pool.initialized() || !s.has_account(cfg_.arbitrageur.name)) return;
    const auto price = s.price_if_any();
    if (!price) return;

    using wide = Wad::wide;
    const wide k = Wad::widen(s.pool.reserve_eth.raw()) * Wad::widen(s.pool.reserve_dai.raw());
    const wide target_eth_sq = k * Wad::widen(Wad::kScale) / Wad::widen(price->raw());
    const Wad target_eth = Wad::from_raw(Wad::narrow(boost::multiprecision::sqrt(target_eth_sq)));
    const Wallet& arb = s.wallet(cfg_.arbitrageur.name);

    std::optional<op::Swap> trade;
    if (target_eth < s.pool.reserve_eth) {
      // Pool price below oracle: buy ETH with DAI.
      const Wad want = s.pool.reserve_eth - target_eth;
      if (auto in = s.pool.quote_in(want, SwapDirection::DaiToEth)) {
        const Wad spend = min(*in, arb.dai);
        if (spend.is_positive()) trade = op::Swap{SwapDirection::DaiToEth, spend, Wad::zero()};
      }
    } else if (target_eth > s.pool.reserve_eth) {
      const wide target_dai_sq = k * Wad::widen(price->raw()) / Wad::widen(Wad::kScale);
      const Wad target_dai = Wad::from_raw(Wad::narrow(boost::multiprecision::sqrt(target_dai_sq)));
      if (target_dai < s.pool.reserve_dai) {
        const Wad want = s.pool.reserve_dai - target_dai;
        if (auto in = s.pool.quote_in(want, SwapDirection::EthToDai)) {
          const Wad gas_reserve = s.gas_price * static_cast<std::int64_t>(s.gas.swap + s.gas.base_batch);
          const Wad spendable = arb.eth > gas_reserve ? arb.eth - gas_reserve : Wad::zero();
          const Wad spend = min(*in, spendable);
          if (spend.is_positive()) trade = op::Swap{SwapDirection::EthToDai, spend, Wad::zero()};
        }
      }
    }
    if (trade) ledger_.execute_batch(ledger_.make_batch(cfg_.arbitrageur.name, {*trade}));
  }

  EngineConfig cfg_;
  Ledger ledger_;
  std::map<leverage::PositionId, leverage::Position> positions_;
  std::vector<Settlement> settlements_;
  leverage::PositionId next_position_ = 1;
  mutable std::shared_mutex mu_;
};

}  // namespace levloop

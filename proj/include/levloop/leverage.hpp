#pragma once

// Recursive re-collateralization: deposit ETH, draw DAI against it, buy ETH
// with the DAI, deposit that too, and repeat. With collateral requirement r
// and swap fee phi every cycle adds q = (1 - phi) / r times the previous
// cycle's ETH, so exposure is a geometric series in q.

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "levloop/amm.hpp"
#include "levloop/error.hpp"
#include "levloop/ledger.hpp"
#include "levloop/state.hpp"
#include "levloop/vault.hpp"
#include "levloop/wad.hpp"

namespace levloop {
namespace leverage {

// ---------------------------------------------------------------------------
// Closed forms

inline void check_domain(double r, double fee) {
  if (!(r > 1.0)) throw Error(Errc::CollateralRatioAtOrBelowOne, "collateral requirement must exceed 1");
  if (!(fee >= 0.0 && fee < 1.0)) throw Error(Errc::InvalidFee, "fee must be in [0, 1)");
}

/// 1 / (1 - 1/r), written as r / (r - 1) so that r = 1.5 gives exactly 3.
inline double theoretical_max_leverage(double r) {
  check_domain(r, 0.0);
  return r / (r - 1.0);
}

/// Sum of q^k for k = 0..n with q = (1 - fee) / r.
inline double leverage_after_n_cycles(double r, double fee, int n) {
  check_domain(r, fee);
  if (n < 0) throw Error(Errc::InvalidLeverageTarget, "cycle count must be non-negative");
  const double q = (1.0 - fee) / r;
  return (1.0 - std::pow(q, n + 1)) / (1.0 - q);
}

/// Limit of leverage_after_n_cycles as n grows: 1 / (1 - q), written as
/// r / (r - (1 - fee)) so a zero fee reproduces theoretical_max_leverage.
inline double effective_max_leverage(double r, double fee) {
  check_domain(r, fee);
  return r / (r - (1.0 - fee));
}

// ---------------------------------------------------------------------------
// Planning

struct CycleStep {
  Wad dai_withdrawn;
  Wad eth_bought;
  Wad eth_redeposited;
  Wad min_out;
};

struct PlanOptions {
  Wad slippage_tolerance = Wad::parse("0.005");
  // Targets must stay this fraction below the asymptotic cap.
  double safety_margin = 0.01;
  std::size_t max_cycles = 256;
};

struct LeveragePlan {
  std::string owner;
  Wad initial_collateral;
  Wad target_leverage;
  Wad price;
  Wad slippage_tolerance;
  std::vector<CycleStep> cycles;
  Wad expected_exposure;
  Wad expected_debt;
  std::uint64_t gas_units = 0;
  Wad expected_gas;

  std::size_t cycle_count() const { return cycles.size(); }
};

enum class PositionStatus { Open, Liquidated, Closed };

constexpr std::string_view to_string(PositionStatus s) {
  switch (s) {
    case PositionStatus::Open: return "Open";
    case PositionStatus::Liquidated: return "Liquidated";
    case PositionStatus::Closed: return "Closed";
  }
  return "?";
}

using PositionId = std::uint64_t;

struct Position {
  PositionId id = 0;
  VaultId vault = 0;
  std::string owner;
  Wad entry_price;
  Wad initial_collateral;
  // Equity at entry plus any collateral added later, valued when added.
  Wad initial_equity;
  Wad achieved_leverage;
  // Gas and swap losses, in DAI at the price when incurred.
  Wad cumulative_costs;
  PositionStatus status = PositionStatus::Open;
  std::optional<Wad> realized_equity;
  BlockHeight opened_at = 0;

  bool operator==(const Position&) const = default;
};

inline std::vector<Op> open_ops(const LeveragePlan& plan) {
  std::vector<Op> ops;
  ops.reserve(2 + 3 * plan.cycles.size());
  ops.emplace_back(op::OpenVault{});
  ops.emplace_back(op::Deposit{kOpenedInBatch, plan.initial_collateral});
  for (const auto& c : plan.cycles) {
    ops.emplace_back(op::WithdrawDai{kOpenedInBatch, c.dai_withdrawn});
    ops.emplace_back(op::Swap{SwapDirection::DaiToEth, c.dai_withdrawn, c.min_out});
    ops.emplace_back(op::Deposit{kOpenedInBatch, std::nullopt});
  }
  return ops;
}

namespace detail {

inline Wad apply_tolerance(Wad quoted, Wad tolerance) { return quoted * (Wad::one() - tolerance); }

inline void finish_plan(const LedgerState& s, LeveragePlan& plan) {
  plan.gas_units = gas_for(s.gas, open_ops(plan));
  plan.expected_gas = s.gas_price * static_cast<std::int64_t>(plan.gas_units);
  const Wallet& w = s.wallet(plan.owner);
  if (w.eth < plan.initial_collateral + plan.expected_gas) {
    throw Error(Errc::InsufficientInitialCollateral, plan.owner + " holds " + w.eth.str() + " ETH, needs " +
                                                         plan.initial_collateral.str() + " plus gas " +
                                                         plan.expected_gas.str());
  }
}

inline void check_inputs(const LedgerState& s, const std::string& owner, Wad c0, Wad tolerance) {
  s.wallet(owner);
  if (!c0.is_positive()) throw Error(Errc::InvalidAmount, "initial collateral must be positive");
  if (tolerance.is_negative() || tolerance >= Wad::one()) {
    throw Error(Errc::InvalidAmount, "slippage tolerance must be in [0, 1)");
  }
}

/// Draws `dai`, swaps it on `pool` and records the cycle.
inline void run_cycle(LeveragePlan& plan, Pool& pool, Wad dai, Wad& collateral, Wad& debt) {
  const Wad out = pool.apply(dai, SwapDirection::DaiToEth);
  collateral += out;
  debt += dai;
  plan.cycles.push_back(CycleStep{dai, out, out, apply_tolerance(out, plan.slippage_tolerance)});
}

}  // namespace detail

/// Plans the cycles needed to reach `target` times the initial collateral.
/// Each cycle draws the maximum DAI except the last, which is sized so the
/// exposure lands on the target.
inline LeveragePlan plan_open(const LedgerState& s, const std::string& owner, Wad c0, Wad target,
                              const PlanOptions& opt = {}) {
  detail::check_inputs(s, owner, c0, opt.slippage_tolerance);
  if (target < Wad::one()) throw Error(Errc::InvalidLeverageTarget, "target leverage below 1");

  const Wad r = s.collateral.collateral_requirement;
  const double fee = s.pool.fee().to_double();
  if (target > Wad::one()) {
    const double cap = effective_max_leverage(r.to_double(), fee) * (1.0 - opt.safety_margin);
    if (target.to_double() > cap) {
      throw Error(Errc::TargetExceedsMax,
                  "target " + target.str() + "x exceeds the reachable maximum of " + std::to_string(cap) + "x");
    }
  }

  LeveragePlan plan;
  plan.owner = owner;
  plan.initial_collateral = c0;
  plan.target_leverage = target;
  plan.price = s.price();
  plan.slippage_tolerance = opt.slippage_tolerance;

  Pool pool = s.pool;
  Wad collateral = c0;
  Wad debt;
  const Wad goal = c0 * target;
  while (collateral < goal) {
    if (plan.cycles.size() >= opt.max_cycles) {
      throw Error(Errc::TargetExceedsMax, "target not reached within " + std::to_string(opt.max_cycles) + " cycles");
    }
    const Vault probe{0, owner, collateral, debt, VaultStatus::Open};
    const Wad cap = vault_math::max_withdrawable_dai(probe, plan.price, r);
    const Wad need = goal - collateral;
    Wad dai = cap;
    if (pool.quote_out(cap, SwapDirection::DaiToEth) >= need) {
      if (auto exact = pool.quote_in(need, SwapDirection::DaiToEth)) dai = min(*exact, cap);
    }
    if (dai.is_zero()) throw Error(Errc::TargetExceedsMax, "pool liquidity exhausted before the target");
    detail::run_cycle(plan, pool, dai, collateral, debt);
  }
  plan.expected_exposure = collateral;
  plan.expected_debt = debt;
  detail::finish_plan(s, plan);
  return plan;
}

/// Plans exactly `cycles` full-draw cycles regardless of the resulting leverage.
inline LeveragePlan plan_open_cycles(const LedgerState& s, const std::string& owner, Wad c0, std::size_t cycles,
                                     Wad slippage_tolerance = Wad::parse("0.005")) {
  detail::check_inputs(s, owner, c0, slippage_tolerance);
  LeveragePlan plan;
  plan.owner = owner;
  plan.initial_collateral = c0;
  plan.price = s.price();
  plan.slippage_tolerance = slippage_tolerance;

  Pool pool = s.pool;
  Wad collateral = c0;
  Wad debt;
  for (std::size_t k = 0; k < cycles; ++k) {
    const Vault probe{0, owner, collateral, debt, VaultStatus::Open};
    const Wad cap = vault_math::max_withdrawable_dai(probe, plan.price, s.collateral.collateral_requirement);
    if (cap.is_zero()) break;
    detail::run_cycle(plan, pool, cap, collateral, debt);
  }
  plan.expected_exposure = collateral;
  plan.expected_debt = debt;
  plan.target_leverage = collateral / c0;
  detail::finish_plan(s, plan);
  return plan;
}

inline TxBatch open_batch(const LeveragePlan& plan) { return TxBatch{plan.owner, open_ops(plan), plan.gas_units}; }

// ---------------------------------------------------------------------------
// Execution

struct OpenOutcome {
  Receipt receipt;
  std::optional<Position> position;  // set on success
};

/// Submits the plan as one batch. Nothing of the position exists unless every
/// step succeeds.
inline OpenOutcome execute_open(Ledger& ledger, const LeveragePlan& plan) {
  const LedgerState& before = ledger.state();
  if (before.wallet(plan.owner).eth < plan.initial_collateral + plan.expected_gas) {
    throw Error(Errc::InsufficientInitialCollateral, plan.owner + " cannot fund the initial collateral");
  }
  OpenOutcome out;
  out.receipt = ledger.execute_batch(open_batch(plan));
  if (!out.receipt.success) return out;

  const LedgerState& s = ledger.state();
  const Vault& v = s.vault(out.receipt.opened_vaults.front());
  const Wad price = s.price();
  Position p;
  p.vault = v.id;
  p.owner = plan.owner;
  p.entry_price = price;
  p.initial_collateral = plan.initial_collateral;
  p.initial_equity = v.collateral * price - v.debt;
  p.achieved_leverage = v.collateral / plan.initial_collateral;
  p.cumulative_costs = out.receipt.gas_paid * price + (plan.initial_collateral * price - p.initial_equity);
  p.opened_at = s.height;
  out.position = p;
  return out;
}

struct UnwindPlan {
  VaultId vault = 0;
  std::string owner;
  std::vector<Op> ops;
  std::uint64_t gas_units = 0;
  std::size_t iterations = 0;
  Wad eth_returned;
  // Wallet ETH parked in the vault to start the unwind; part of eth_returned.
  Wad eth_contributed;
  Wad dai_surplus;
  Wad price;

  /// Net ETH received valued at the unwind price plus the change in DAI.
  Wad realized_equity() const { return (eth_returned - eth_contributed) * price + dai_surplus; }
};

/// Geometric unwind: each round withdraws only the collateral above the
/// safety bound, sells it for DAI and repays, which frees more collateral for
/// the next round. Ends with close_vault.
inline UnwindPlan plan_close(const LedgerState& state, VaultId vault_id, Wad slippage_tolerance = Wad::parse("0.005"),
                             std::size_t max_rounds = 512) {
  LedgerState s = state;
  const Vault& v0 = s.vault(vault_id);
  if (v0.status != VaultStatus::Open) throw Error(Errc::VaultNotOpen, "vault " + std::to_string(vault_id));

  UnwindPlan plan;
  plan.vault = vault_id;
  plan.owner = v0.owner;
  plan.price = s.price();
  const Wad r = s.collateral.collateral_requirement;
  const Wad start_dai = s.wallet(plan.owner).dai;

  if (v0.debt.is_positive()) {
    s.pool.require_initialized();
    if (v0.debt >= s.pool.reserve_dai) {
      throw Error(Errc::UnwindInfeasible, "pool holds " + s.pool.reserve_dai.str() + " DAI against debt " + v0.debt.str());
    }
  }

  BatchContext ctx{plan.owner, std::nullopt, std::nullopt, nullptr};
  auto push = [&](Op o) {
    apply(s, ctx, o);
    plan.ops.push_back(std::move(o));
  };

  while (s.vault(vault_id).debt.is_positive()) {
    if (plan.iterations++ >= max_rounds) {
      throw Error(Errc::UnwindInfeasible, "debt not cleared within " + std::to_string(max_rounds) + " rounds");
    }
    const Vault& v = s.vault(vault_id);
    const Wad locked = Wad::mul_div(r, v.debt, plan.price, Rounding::Up);
    const Wad free = v.collateral > locked ? v.collateral - locked : Wad::zero();

    Wad sell = free;
    if (auto need = s.pool.quote_in(v.debt, SwapDirection::EthToDai)) sell = min(free, *need);
    const Wad quoted = s.pool.quote_out(sell, SwapDirection::EthToDai);

    // A vault drawn to its cap has no headroom to start from. Seed it from
    // the owner's wallet: DAI repays directly, ETH is parked in the vault and
    // comes back at close.
    if (quoted.is_zero() || free < v.collateral / Wad::from_int(1'000'000)) {
      const Wallet& w = s.wallet(plan.owner);
      if (w.dai.is_positive()) {
        push(op::Repay{vault_id, min(w.dai, v.debt)});
        continue;
      }
      const Wad seed = min(w.eth / Wad::from_int(2), v.collateral / Wad::from_int(100));
      if (seed.is_positive() && plan.eth_contributed.is_zero()) {
        push(op::Deposit{vault_id, seed});
        plan.eth_contributed += seed;
        continue;
      }
      if (quoted.is_zero()) throw Error(Errc::UnwindInfeasible, "no collateral above the safety bound");
    }

    push(op::WithdrawCollateral{vault_id, sell});
    push(op::Swap{SwapDirection::EthToDai, sell, detail::apply_tolerance(quoted, slippage_tolerance)});
    push(op::Repay{vault_id, std::nullopt});
  }

  plan.eth_returned = s.vault(vault_id).collateral;
  push(op::CloseVault{vault_id});
  plan.dai_surplus = s.wallet(plan.owner).dai - start_dai;
  plan.gas_units = gas_for(s.gas, plan.ops);
  return plan;
}

struct CloseOutcome {
  Receipt receipt;
  UnwindPlan plan;
  Wad realized_equity;
};

inline CloseOutcome execute_close(Ledger& ledger, Position& position) {
  if (position.status != PositionStatus::Open) throw Error(Errc::PositionNotOpen, "position " + std::to_string(position.id));
  CloseOutcome out;
  out.plan = plan_close(ledger.state(), position.vault);
  out.receipt = ledger.execute_batch(TxBatch{out.plan.owner, out.plan.ops, out.plan.gas_units});
  if (!out.receipt.success) return out;
  out.realized_equity = out.plan.realized_equity();
  position.status = PositionStatus::Closed;
  position.realized_equity = out.realized_equity;
  position.cumulative_costs += out.receipt.gas_paid * out.plan.price;
  return out;
}

struct RecollateralizeOutcome {
  Receipt receipt;
  Wad liquidation_price;
};

inline RecollateralizeOutcome recollateralize(Ledger& ledger, Position& position, Wad amount) {
  if (position.status != PositionStatus::Open) throw Error(Errc::PositionNotOpen, "position " + std::to_string(position.id));
  if (amount.is_negative()) throw Error(Errc::InvalidAmount, "negative collateral amount");
  const Vault& before = ledger.state().vault(position.vault);
  if (before.status != VaultStatus::Open) throw Error(Errc::PositionNotOpen, "vault is no longer open");
  if (ledger.state().wallet(position.owner).eth < amount) {
    throw Error(Errc::InsufficientFunds, position.owner + " cannot fund " + amount.str() + " ETH");
  }

  RecollateralizeOutcome out;
  out.receipt = ledger.execute_batch(ledger.make_batch(position.owner, {op::Deposit{position.vault, amount}}));
  if (!out.receipt.success) {
    throw Error(out.receipt.error.value_or(Errc::InsufficientFunds), out.receipt.message);
  }
  const LedgerState& s = ledger.state();
  const Wad price = s.price();
  position.initial_equity += amount * price;
  position.cumulative_costs += out.receipt.gas_paid * price;
  out.liquidation_price = vault_math::liquidation_price(s.vault(position.vault), s.collateral.liquidation_ratio);
  return out;
}

// ---------------------------------------------------------------------------
// Friction-aware ceiling

/// Runs full-draw cycles while a cycle's exposure gain (ETH bought, valued at
/// `price`) exceeds its cost: gas for the cycle plus the DAI lost to fee and
/// price impact. Returns exposure / c0 after the last economic cycle. With no
/// pool the venue is infinitely deep at `price`.
inline double practical_max_leverage(Wad c0, Wad r, Wad fee, Wad gas_price, std::optional<Pool> pool, Wad price,
                                     const GasSchedule& gas = {}, std::size_t max_cycles = 10'000) {
  check_domain(r.to_double(), fee.to_double());
  if (!c0.is_positive() || !price.is_positive()) throw Error(Errc::InvalidAmount, "collateral and price must be positive");
  const std::uint64_t cycle_gas = gas.withdraw_dai + gas.swap + gas.deposit;
  const Wad gas_cost = gas_price * static_cast<std::int64_t>(cycle_gas) * price;

  Wad collateral = c0;
  Wad debt;
  for (std::size_t k = 0; k < max_cycles; ++k) {
    const Vault probe{0, "", collateral, debt, VaultStatus::Open};
    const Wad dai = vault_math::max_withdrawable_dai(probe, price, r);
    if (dai.is_zero()) break;
    Wad eth;
    if (pool) {
      pool->require_initialized();
      eth = amm::constant_product_out(pool->reserve_dai, pool->reserve_eth, dai, fee);
    } else {
      eth = Wad::mul_div(dai, Wad::one() - fee, price);
    }
    const Wad gain = eth * price;
    const Wad cost = gas_cost + (dai - gain);
    if (gain <= cost) break;
    if (pool) {
      pool->reserve_dai += dai;
      pool->reserve_eth -= eth;
    }
    collateral += eth;
    debt += dai;
  }
  return (collateral / c0).to_double();
}

}  // namespace leverage
}  // namespace levloop

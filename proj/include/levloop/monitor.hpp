#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "levloop/error.hpp"
#include "levloop/leverage.hpp"
#include "levloop/ledger.hpp"
#include "levloop/vault.hpp"
#include "levloop/wad.hpp"

namespace levloop {
namespace monitor {

using leverage::Position;
using leverage::PositionId;
using leverage::PositionStatus;

struct MarginPolicy {
  // Margin calls start below liquidation_ratio + buffer.
  Wad margin_call_buffer = Wad::parse("0.1");
};

// Declaration order is rank: later is worse.
enum class MarginStatus { Healthy, MarginCall, Liquidatable, Liquidated, Closed };

constexpr std::string_view to_string(MarginStatus s) {
  switch (s) {
    case MarginStatus::Healthy: return "Healthy";
    case MarginStatus::MarginCall: return "MarginCall";
    case MarginStatus::Liquidatable: return "Liquidatable";
    case MarginStatus::Liquidated: return "Liquidated";
    case MarginStatus::Closed: return "Closed";
  }
  return "?";
}

struct PositionReport {
  PositionId position = 0;
  VaultId vault = 0;
  BlockHeight height = 0;
  Wad price;
  Wad collateral;
  Wad debt;
  Wad equity;
  Wad pnl;
  std::optional<Wad> collateralization;  // none when debt is zero
  std::optional<Wad> liquidation_price;  // none when the vault is empty
  MarginStatus status = MarginStatus::Healthy;

  bool operator==(const PositionReport&) const = default;
};

/// Classification of a live vault at `price`; comparisons are exact.
inline MarginStatus margin_status(Wad collateral, Wad debt, Wad price, Wad liquidation_ratio, const MarginPolicy& policy) {
  if (!debt.is_positive()) return MarginStatus::Healthy;
  if (vault_math::is_below(collateral, debt, price, liquidation_ratio)) return MarginStatus::Liquidatable;
  if (vault_math::is_below(collateral, debt, price, liquidation_ratio + policy.margin_call_buffer)) {
    return MarginStatus::MarginCall;
  }
  return MarginStatus::Healthy;
}

/// Equity delta net of costs: (collateral * price - debt) - initial_equity -
/// cumulative_costs. Settled positions use their realized equity.
inline Wad position_pnl(const Position& p, const LedgerState& s, Wad price) {
  Wad equity;
  if (p.status == PositionStatus::Open) {
    const Vault& v = s.vault(p.vault);
    equity = v.collateral * price - v.debt;
  } else {
    equity = p.realized_equity.value_or(Wad::zero());
  }
  return equity - p.initial_equity - p.cumulative_costs;
}

inline PositionReport report(const Position& p, const LedgerState& s, Wad price, const MarginPolicy& policy) {
  PositionReport r;
  r.position = p.id;
  r.vault = p.vault;
  r.height = s.height;
  r.price = price;
  const Vault& v = s.vault(p.vault);
  r.collateral = v.collateral;
  r.debt = v.debt;
  if (p.status == PositionStatus::Open && v.status == VaultStatus::Open) {
    r.equity = v.collateral * price - v.debt;
    if (v.debt.is_positive()) r.collateralization = Wad::mul_div(v.collateral, price, v.debt);
    if (v.collateral.is_positive()) {
      r.liquidation_price = vault_math::liquidation_price(v, s.collateral.liquidation_ratio);
    }
    r.status = margin_status(v.collateral, v.debt, price, s.collateral.liquidation_ratio, policy);
  } else {
    r.equity = p.realized_equity.value_or(Wad::zero());
    r.status = p.status == PositionStatus::Closed ? MarginStatus::Closed : MarginStatus::Liquidated;
  }
  r.pnl = position_pnl(p, s, price);
  return r;
}

struct ScanOptions {
  MarginPolicy policy;
  bool auto_liquidate = true;
  std::string keeper = "@keeper";
};

struct ScanResult {
  std::vector<PositionReport> reports;
  std::vector<Settlement> settlements;
};

/// Marks a position settled after its vault was liquidated.
inline void mark_liquidated(Position& p, const Settlement& st) {
  p.status = PositionStatus::Liquidated;
  p.realized_equity = st.returned * st.price;
}

/// One report per position that was open when the scan started. With
/// auto-liquidation every liquidatable vault is settled by the keeper first,
/// in the same block, and reported as Liquidated.
inline ScanResult scan_and_report(Ledger& ledger, std::map<PositionId, Position>& book, const ScanOptions& opt) {
  ScanResult out;
  const auto maybe_price = ledger.state().price_if_any();
  if (!maybe_price) return out;
  const Wad price = *maybe_price;

  for (auto& [id, p] : book) {
    if (p.status != PositionStatus::Open) continue;
    const Vault& v = ledger.state().vault(p.vault);
    if (v.status == VaultStatus::Closed) {
      p.status = PositionStatus::Closed;
    } else if (v.status == VaultStatus::Liquidated) {
      p.status = PositionStatus::Liquidated;
    } else if (opt.auto_liquidate && ledger.state().has_account(opt.keeper) &&
               vault_math::is_liquidatable(v, price, ledger.state().collateral.liquidation_ratio)) {
      const Receipt rc = ledger.execute_batch(ledger.make_batch(opt.keeper, {op::Liquidate{p.vault}}));
      if (rc.success) {
        mark_liquidated(p, rc.settlements.front());
        out.settlements.push_back(rc.settlements.front());
      }
    }
    out.reports.push_back(report(p, ledger.state(), price, opt.policy));
  }
  return out;
}

}  // namespace monitor
}  // namespace levloop

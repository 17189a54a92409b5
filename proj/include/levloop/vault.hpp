#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include "levloop/error.hpp"
#include "levloop/wad.hpp"

namespace levloop {

using VaultId = std::uint64_t;

/// Risk parameters of the single collateral class (ETH).
struct CollateralType {
  Wad collateral_requirement = Wad::parse("1.5");  // r
  Wad liquidation_ratio = Wad::parse("1.5");
  Wad liquidation_penalty = Wad::parse("0.13");
  Wad auction_discount = Wad::parse("0.03");
  Wad dust_limit = Wad::zero();

  void validate() const {
    if (collateral_requirement < Wad::one()) {
      throw Error(Errc::InvalidConfig, "collateral requirement must be >= 1");
    }
    if (liquidation_ratio > collateral_requirement || !liquidation_ratio.is_positive()) {
      throw Error(Errc::InvalidConfig, "liquidation ratio must be in (0, r]");
    }
    if (liquidation_penalty.is_negative()) throw Error(Errc::InvalidConfig, "negative liquidation penalty");
    if (auction_discount.is_negative() || auction_discount >= Wad::one()) {
      throw Error(Errc::InvalidConfig, "auction discount must be in [0, 1)");
    }
    if (dust_limit.is_negative()) throw Error(Errc::InvalidConfig, "negative dust limit");
  }

  bool operator==(const CollateralType&) const = default;
};

enum class VaultStatus { Open, Liquidated, Closed };

constexpr std::string_view to_string(VaultStatus s) {
  switch (s) {
    case VaultStatus::Open: return "Open";
    case VaultStatus::Liquidated: return "Liquidated";
    case VaultStatus::Closed: return "Closed";
  }
  return "?";
}

struct Vault {
  VaultId id = 0;
  std::string owner;
  Wad collateral;  // ETH
  Wad debt;        // DAI
  VaultStatus status = VaultStatus::Open;

  bool operator==(const Vault&) const = default;
};

/// Result of a discounted collateral sale.
struct Settlement {
  VaultId vault = 0;
  std::string keeper;
  Wad price;          // oracle price at settlement
  Wad principal;      // vault debt before settlement
  Wad owed;           // principal * (1 + penalty)
  Wad auction_price;  // price * (1 - discount)
  Wad seized;         // ETH to keeper
  Wad returned;       // ETH back to the owner
  Wad paid;           // DAI burned
  Wad bad_debt;       // owed - paid

  bool operator==(const Settlement&) const = default;
};

namespace vault_math {

/// collateral * price compared against ratio * debt with no rounding.
inline int compare_backing(Wad collateral, Wad price, Wad ratio, Wad debt) {
  const auto lhs = Wad::widen(collateral.raw()) * Wad::widen(price.raw());
  const auto rhs = Wad::widen(ratio.raw()) * Wad::widen(debt.raw());
  return lhs < rhs ? -1 : (lhs > rhs ? 1 : 0);
}

inline bool is_safe(Wad collateral, Wad debt, Wad price, Wad ratio) {
  return compare_backing(collateral, price, ratio, debt) >= 0;
}

inline bool is_below(Wad collateral, Wad debt, Wad price, Wad ratio) {
  return compare_backing(collateral, price, ratio, debt) < 0;
}

/// max(0, collateral * price / r - debt), rounded down.
inline Wad max_withdrawable_dai(const Vault& v, Wad price, Wad requirement) {
  if (v.status != VaultStatus::Open) throw Error(Errc::VaultNotOpen, "vault " + std::to_string(v.id));
  const Wad cap = Wad::mul_div(v.collateral, price, requirement);
  return cap > v.debt ? cap - v.debt : Wad::zero();
}

/// liquidation_ratio * debt / collateral, rounded up so that
/// `price < liquidation_price` holds exactly when the vault is below the ratio.
inline Wad liquidation_price(const Vault& v, Wad liquidation_ratio) {
  if (!v.collateral.is_positive()) throw Error(Errc::EmptyVault, "vault " + std::to_string(v.id) + " holds no collateral");
  return Wad::mul_div(liquidation_ratio, v.debt, v.collateral, Rounding::Up);
}

inline bool is_liquidatable(const Vault& v, Wad price, Wad liquidation_ratio) {
  return v.status == VaultStatus::Open && v.debt.is_positive() &&
         is_below(v.collateral, v.debt, price, liquidation_ratio);
}

/// Prices a liquidation without touching any state.
inline Settlement settle(const Vault& v, Wad price, const CollateralType& type, std::string keeper) {
  if (!is_liquidatable(v, price, type.liquidation_ratio)) {
    throw Error(Errc::NotLiquidatable, "vault " + std::to_string(v.id) + " is above its liquidation ratio");
  }
  Settlement s;
  s.vault = v.id;
  s.keeper = std::move(keeper);
  s.price = price;
  s.principal = v.debt;
  s.owed = v.debt * (Wad::one() + type.liquidation_penalty);
  s.auction_price = price * (Wad::one() - type.auction_discount);
  // Round the seized amount up so a fully covered debt is paid to the wei.
  // Compared in wide arithmetic first: at a near-zero auction price the
  // quotient would not fit.
  const bool takes_all = Wad::widen(s.owed.raw()) * Wad::kScale >=
                         Wad::widen(v.collateral.raw()) * Wad::widen(s.auction_price.raw());
  s.seized = takes_all ? v.collateral : Wad::mul_div(s.owed, Wad::one(), s.auction_price, Rounding::Up);
  s.returned = v.collateral - s.seized;
  s.paid = min(s.owed, s.seized * s.auction_price);
  s.bad_debt = s.owed - s.paid;
  return s;
}

}  // namespace vault_math
}  // namespace levloop

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace levloop {

enum class Errc {
  // ledger
  InsufficientFunds,
  GasLimitExceeded,
  OutOfGasFunds,
  UnknownAccount,
  Overflow,
  InvalidAmount,
  InjectedFault,
  // oracle
  NonMonotonePath,
  NonPositivePrice,
  NoPriceYet,
  // amm
  PoolUninitialized,
  SlippageExceeded,
  // vault
  UnknownVault,
  NotVaultOwner,
  VaultNotOpen,
  WouldUndercollateralize,
  ExceedsCollateralCapacity,
  BelowDustLimit,
  RepayExceedsDebt,
  EmptyVault,
  NotLiquidatable,
  KeeperInsufficientDai,
  OutstandingDebt,
  // leverage
  CollateralRatioAtOrBelowOne,
  InvalidFee,
  InvalidLeverageTarget,
  TargetExceedsMax,
  InsufficientInitialCollateral,
  UnwindInfeasible,
  // positions
  UnknownPosition,
  PositionNotOpen,
  // configuration
  InvalidConfig,
};

constexpr std::string_view to_string(Errc code) {
  switch (code) {
    case Errc::InsufficientFunds: return "InsufficientFunds";
    case Errc::GasLimitExceeded: return "GasLimitExceeded";
    case Errc::OutOfGasFunds: return "OutOfGasFunds";
    case Errc::UnknownAccount: return "UnknownAccount";
    case Errc::Overflow: return "Overflow";
    case Errc::InvalidAmount: return "InvalidAmount";
    case Errc::InjectedFault: return "InjectedFault";
    case Errc::NonMonotonePath: return "NonMonotonePath";
    case Errc::NonPositivePrice: return "NonPositivePrice";
    case Errc::NoPriceYet: return "NoPriceYet";
    case Errc::PoolUninitialized: return "PoolUninitialized";
    case Errc::SlippageExceeded: return "SlippageExceeded";
    case Errc::UnknownVault: return "UnknownVault";
    case Errc::NotVaultOwner: return "NotVaultOwner";
    case Errc::VaultNotOpen: return "VaultNotOpen";
    case Errc::WouldUndercollateralize: return "WouldUndercollateralize";
    case Errc::ExceedsCollateralCapacity: return "ExceedsCollateralCapacity";
    case Errc::BelowDustLimit: return "BelowDustLimit";
    case Errc::RepayExceedsDebt: return "RepayExceedsDebt";
    case Errc::EmptyVault: return "EmptyVault";
    case Errc::NotLiquidatable: return "NotLiquidatable";
    case Errc::KeeperInsufficientDai: return "KeeperInsufficientDai";
    case Errc::OutstandingDebt: return "OutstandingDebt";
    case Errc::CollateralRatioAtOrBelowOne: return "CollateralRatioAtOrBelowOne";
    case Errc::InvalidFee: return "InvalidFee";
    case Errc::InvalidLeverageTarget: return "InvalidLeverageTarget";
    case Errc::TargetExceedsMax: return "TargetExceedsMax";
    case Errc::InsufficientInitialCollateral: return "InsufficientInitialCollateral";
    case Errc::UnwindInfeasible: return "UnwindInfeasible";
    case Errc::UnknownPosition: return "UnknownPosition";
    case Errc::PositionNotOpen: return "PositionNotOpen";
    case Errc::InvalidConfig: return "InvalidConfig";
  }
  return "Unknown";
}

/// Every engine failure surfaces as this exception. The code is stable and
/// machine-readable; the message is for humans.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}
  explicit Error(Errc code) : std::runtime_error(std::string(to_string(code))), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace levloop

#pragma once

#include <optional>
#include <string_view>

#include "levloop/error.hpp"
#include "levloop/wad.hpp"

namespace levloop {

enum class SwapDirection { DaiToEth, EthToDai };

constexpr std::string_view to_string(SwapDirection d) {
  return d == SwapDirection::DaiToEth ? "dai-to-eth" : "eth-to-dai";
}

namespace amm {

/// Output of a constant-product trade where `fee` (a ratio in [0,1)) is
/// skimmed off the input and left in the pool:
///   out = reserve_out * in * (1 - fee) / (reserve_in + in * (1 - fee))
/// evaluated exactly and rounded down once.
inline Wad constant_product_out(Wad reserve_in, Wad reserve_out, Wad amount_in, Wad fee) {
  using wide = Wad::wide;
  const wide keep = Wad::widen((Wad::one() - fee).raw());
  const wide in = Wad::widen(amount_in.raw());
  const wide num = Wad::widen(reserve_out.raw()) * in * keep;
  const wide den = Wad::widen(reserve_in.raw()) * Wad::widen(Wad::kScale) + in * keep;
  if (den == 0) return Wad::zero();
  return Wad::from_raw(Wad::narrow(num / den));
}

/// Smallest input whose output is at least `amount_out`; nullopt when the
/// pool cannot supply it.
inline std::optional<Wad> constant_product_in(Wad reserve_in, Wad reserve_out, Wad amount_out, Wad fee) {
  if (amount_out.is_zero()) return Wad::zero();
  if (amount_out >= reserve_out) return std::nullopt;
  using wide = Wad::wide;
  const wide keep = Wad::widen((Wad::one() - fee).raw());
  const wide num = Wad::widen(reserve_in.raw()) * Wad::widen(amount_out.raw()) * Wad::widen(Wad::kScale);
  const wide den = Wad::widen((reserve_out - amount_out).raw()) * keep;
  wide in = num / den;
  if (in * den != num) in += 1;
  Wad guess = Wad::from_raw(Wad::narrow(in));
  // The closed-form inverse can land one ulp short after the forward rounding.
  while (constant_product_out(reserve_in, reserve_out, guess, fee) < amount_out) guess += Wad::ulp();
  return guess;
}

}  // namespace amm

/// Constant-product ETH/DAI pool. Fees accrue to the reserves.
struct Pool {
  Wad reserve_eth;
  Wad reserve_dai;
  int fee_bps = 0;

  bool initialized() const { return reserve_eth.is_positive() && reserve_dai.is_positive(); }
  Wad fee() const { return Wad::from_bps(fee_bps); }

  /// Marginal DAI/ETH price.
  Wad mid_price() const {
    require_initialized();
    return reserve_dai / reserve_eth;
  }

  Wad quote_out(Wad amount_in, SwapDirection dir) const {
    require_initialized();
    if (amount_in.is_negative()) throw Error(Errc::InvalidAmount, "negative swap input");
    return dir == SwapDirection::DaiToEth ? amm::constant_product_out(reserve_dai, reserve_eth, amount_in, fee())
                                          : amm::constant_product_out(reserve_eth, reserve_dai, amount_in, fee());
  }

  std::optional<Wad> quote_in(Wad amount_out, SwapDirection dir) const {
    require_initialized();
    return dir == SwapDirection::DaiToEth ? amm::constant_product_in(reserve_dai, reserve_eth, amount_out, fee())
                                          : amm::constant_product_in(reserve_eth, reserve_dai, amount_out, fee());
  }

  /// Moves the reserves by a trade of `amount_in`; returns the output. Does
  /// not touch any balances.
  Wad apply(Wad amount_in, SwapDirection dir) {
    const Wad out = quote_out(amount_in, dir);
    if (dir == SwapDirection::DaiToEth) {
      reserve_dai += amount_in;
      reserve_eth -= out;
    } else {
      reserve_eth += amount_in;
      reserve_dai -= out;
    }
    return out;
  }

  void require_initialized() const {
    if (!initialized()) throw Error(Errc::PoolUninitialized, "pool has no liquidity");
  }

  bool operator==(const Pool&) const = default;
};

}  // namespace levloop

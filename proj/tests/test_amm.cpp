#include <gtest/gtest.h>

#include <optional>
#include <random>

#include "levloop/amm.hpp"
#include "levloop/ledger.hpp"
#include "test_support.hpp"

using namespace levloop;
using levloop::testing::W;

namespace {

Pool reference_pool(int fee_bps) { return Pool{W("1000"), W("1000000"), fee_bps}; }

// Independent long-double evaluation of the constant-product formula.
long double oracle_out(long double rin, long double rout, long double in, long double fee) {
  const long double eff = in * (1.0L - fee);
  return rout - (rin * rout) / (rin + eff);
}

}  // namespace

TEST(Amm, ZeroInputQuotesZero) {
  const Pool p = reference_pool(30);
  EXPECT_EQ(p.quote_out(Wad::zero(), SwapDirection::EthToDai), Wad::zero());
  EXPECT_EQ(p.quote_out(Wad::zero(), SwapDirection::DaiToEth), Wad::zero());
}

TEST(Amm, FeeFreeQuote) {
  // (1000 + 10) * y' = 1e9  =>  out = 1e6 - 1e9 / 1010
  const Wad out = reference_pool(0).quote_out(W("10"), SwapDirection::EthToDai);
  EXPECT_EQ(out.str(), "9900.990099009900990099");
  EXPECT_NEAR(out.to_double(), static_cast<double>(oracle_out(1000, 1e6, 10, 0)), 1e-9);
}

TEST(Amm, ThirtyBasisPointQuote) {
  // Effective input 9.97 ETH.
  const Wad out = reference_pool(30).quote_out(W("10"), SwapDirection::EthToDai);
  EXPECT_EQ(out.str(), "9871.580343970612988504");
  EXPECT_NEAR(out.to_double(), static_cast<double>(oracle_out(1000, 1e6, 10, 0.003L)), 1e-9);
}

TEST(Amm, UninitializedPoolRejectsQuotes) {
  Pool empty;
  try {
    empty.quote_out(W("1"), SwapDirection::EthToDai);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::PoolUninitialized);
  }
}

TEST(Amm, SwapMovesReservesAlongTheCurve) {
  GenesisConfig g;
  g.accounts = {{"alice", W("100"), W("0")}};
  g.pool = PoolSpec{W("1000"), W("1000000"), 0};
  g.price_path = {{0, W("1000")}};
  Ledger ledger(g);
  auto rc = ledger.execute_batch(ledger.make_batch("alice", {op::Swap{SwapDirection::EthToDai, W("10"), Wad::zero()}}));
  ASSERT_TRUE(rc.success) << rc.message;
  const Pool& p = ledger.state().pool;
  EXPECT_EQ(p.reserve_eth, W("1010"));
  EXPECT_EQ(p.reserve_dai.str(), "990099.009900990099009901");
  EXPECT_EQ(ledger.state().wallet("alice").dai.str(), "9900.990099009900990099");
  // Product is preserved up to the rounding of the output.
  const auto k0 = Wad::widen(W("1000").raw()) * Wad::widen(W("1000000").raw());
  const auto k1 = Wad::widen(p.reserve_eth.raw()) * Wad::widen(p.reserve_dai.raw());
  EXPECT_GE(k1, k0);
  EXPECT_LT(k1 - k0, Wad::widen(p.reserve_eth.raw()));
}

TEST(Amm, SlippageGuardRollsBackTheBatch) {
  Ledger ledger(levloop::testing::simple_genesis());
  const auto before = ledger.state_digest();
  const Wad quoted = ledger.state().pool.quote_out(W("1"), SwapDirection::EthToDai);
  auto rc = ledger.execute_batch(
      ledger.make_batch("alice", {op::Swap{SwapDirection::EthToDai, W("1"), quoted + Wad::ulp()}}));
  EXPECT_FALSE(rc.success);
  EXPECT_EQ(rc.error, Errc::SlippageExceeded);
  EXPECT_EQ(ledger.state_digest(), before);  // gas price is zero
}

TEST(Amm, SwapOnEmptyPool) {
  GenesisConfig g;
  g.accounts = {{"alice", W("10"), W("0")}};
  Ledger ledger(g);
  auto rc = ledger.execute_batch(ledger.make_batch("alice", {op::Swap{SwapDirection::EthToDai, W("1"), Wad::zero()}}));
  EXPECT_EQ(rc.error, Errc::PoolUninitialized);
}

TEST(Amm, QuoteIsMonotoneAndConcave) {
  const Pool p = reference_pool(30);
  Wad prev_out;
  std::optional<Wad> prev_gain;
  for (int i = 1; i <= 200; ++i) {
    const Wad out = p.quote_out(Wad::from_int(i), SwapDirection::EthToDai);
    const Wad gain = out - prev_out;
    EXPECT_GT(out, prev_out);
    // Concavity up to one ulp of output rounding.
    if (prev_gain) {
      EXPECT_LE(gain, *prev_gain + Wad::from_raw(2));
    }
    prev_out = out;
    prev_gain = gain;
  }
}

TEST(Amm, InverseQuoteIsTight) {
  std::mt19937_64 rng(11);
  for (int i = 0; i < 2000; ++i) {
    Pool p{Wad::from_raw(static_cast<__int128>(rng() % 1'000'000 + 1) * Wad::kScale),
           Wad::from_raw(static_cast<__int128>(rng() % 100'000'000 + 1) * Wad::kScale), static_cast<int>(rng() % 100)};
    const Wad want = Wad::mul_div(p.reserve_dai, Wad::from_raw(static_cast<__int128>(rng() % 900) + 1), Wad::from_int(1000));
    auto in = p.quote_in(want, SwapDirection::EthToDai);
    ASSERT_TRUE(in);
    EXPECT_GE(p.quote_out(*in, SwapDirection::EthToDai), want);
    EXPECT_LT(p.quote_out(*in - Wad::ulp(), SwapDirection::EthToDai), want);
  }
  EXPECT_FALSE(reference_pool(0).quote_in(W("1000"), SwapDirection::DaiToEth));
}

TEST(Amm, RoundTripProperty) {
  std::mt19937_64 rng(3);
  for (int fee : {0, 30}) {
    for (int i = 0; i < 1000; ++i) {
      Pool p = reference_pool(fee);
      const Wad x = Wad::from_raw(static_cast<__int128>(rng() % 50'000) * (Wad::kScale / 1000) + 1);
      const auto k0 = Wad::widen(p.reserve_eth.raw()) * Wad::widen(p.reserve_dai.raw());
      const Wad dai = p.apply(x, SwapDirection::EthToDai);
      const auto k1 = Wad::widen(p.reserve_eth.raw()) * Wad::widen(p.reserve_dai.raw());
      const Wad back = p.apply(dai, SwapDirection::DaiToEth);
      ASSERT_GE(k1, k0);
      if (fee == 0) {
        ASSERT_LE(x - back, Wad::from_raw(2)) << x.str();
        ASSERT_FALSE(back > x);
        // Equality up to one ulp of the output reserve.
        ASSERT_LE(k1 - k0, Wad::widen(p.reserve_eth.raw()) + Wad::widen(p.reserve_dai.raw()));
      } else {
        ASSERT_LT(back, x);
        ASSERT_GT(k1 - k0, Wad::widen(p.reserve_eth.raw()) + Wad::widen(p.reserve_dai.raw()));
      }
    }
  }
}

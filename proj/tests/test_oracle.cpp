#include <gtest/gtest.h>

#include "levloop/ledger.hpp"
#include "levloop/oracle.hpp"
#include "test_support.hpp"

using namespace levloop;
using levloop::testing::W;

namespace {

Errc code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return Errc::InvalidConfig;
}

}  // namespace

TEST(PricePath, SingleStep) {
  PricePath p({{0, W("150")}});
  EXPECT_EQ(p.price_at(0), W("150"));
}

TEST(PricePath, RejectsRepeatedHeights) {
  EXPECT_EQ(code_of([] { PricePath({{0, W("150")}, {0, W("160")}}); }), Errc::NonMonotonePath);
  EXPECT_EQ(code_of([] { PricePath({{5, W("150")}, {3, W("160")}}); }), Errc::NonMonotonePath);
}

TEST(PricePath, RejectsNonPositivePrices) {
  EXPECT_EQ(code_of([] { PricePath({{0, W("0")}}); }), Errc::NonPositivePrice);
  EXPECT_EQ(code_of([] { PricePath({{0, W("-1")}}); }), Errc::NonPositivePrice);
}

TEST(PricePath, PiecewiseConstant) {
  PricePath p({{0, W("150")}, {10, W("90")}});
  EXPECT_EQ(p.price_at(9), W("150"));
  EXPECT_EQ(p.price_at(10), W("90"));

  PricePath q({{0, W("150")}, {10, W("90")}, {20, W("120")}});
  EXPECT_EQ(q.price_at(15), W("90"));
  // Brute-force oracle: the last step whose height is <= h.
  for (BlockHeight h = 0; h < 40; ++h) {
    Wad expected;
    for (const auto& s : q.steps()) {
      if (s.height <= h) expected = s.price;
    }
    EXPECT_EQ(q.price_at(h), expected) << h;
  }
}

TEST(PricePath, NoPriceBeforeFirstStep) {
  PricePath p({{5, W("100")}});
  EXPECT_EQ(code_of([&] { p.price_at(3); }), Errc::NoPriceYet);
  EXPECT_FALSE(p.has_price_at(4));
  EXPECT_TRUE(p.has_price_at(5));
}

TEST(PricePath, LedgerReEvaluatesOnAdvance) {
  auto g = levloop::testing::simple_genesis();
  g.price_path = {{0, W("150")}, {12, W("90")}};
  Ledger ledger(g);
  ledger.advance_block(10);
  EXPECT_EQ(ledger.current_price(), W("150"));
  EXPECT_EQ(ledger.advance_block(5), 15u);
  EXPECT_EQ(ledger.current_price(), W("90"));
}

TEST(PricePath, ReplayGivesSamePriceSequence) {
  PricePath p({{0, W("150")}, {3, W("140.5")}, {7, W("99")}});
  std::vector<Wad> a, b;
  for (BlockHeight h = 0; h < 12; ++h) a.push_back(p.price_at(h));
  PricePath copy(p.steps());
  for (BlockHeight h = 0; h < 12; ++h) b.push_back(copy.price_at(h));
  EXPECT_EQ(a, b);
}

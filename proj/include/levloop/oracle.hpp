#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "levloop/error.hpp"
#include "levloop/wad.hpp"

namespace levloop {

using BlockHeight = std::uint64_t;

struct PriceStep {
  BlockHeight height = 0;
  Wad price;  // DAI per ETH

  bool operator==(const PriceStep&) const = default;
};

/// Scripted DAI/ETH price feed. The price at a height is the price of the
/// latest step at or below it; nothing is interpolated between steps.
class PricePath {
 public:
  PricePath() = default;
  explicit PricePath(std::vector<PriceStep> steps) : steps_(std::move(steps)) { validate(steps_); }

  static void validate(const std::vector<PriceStep>& steps) {
    for (std::size_t i = 0; i < steps.size(); ++i) {
      if (!steps[i].price.is_positive()) {
        throw Error(Errc::NonPositivePrice, "price at height " + std::to_string(steps[i].height) + " is " +
                                                steps[i].price.str());
      }
      if (i > 0 && steps[i].height <= steps[i - 1].height) {
        throw Error(Errc::NonMonotonePath, "heights must be strictly increasing at step " + std::to_string(i));
      }
    }
  }

  const std::vector<PriceStep>& steps() const { return steps_; }
  bool empty() const { return steps_.empty(); }

  /// Throws NoPriceYet when the height precedes the first step.
  Wad price_at(BlockHeight height) const {
    const PriceStep* found = nullptr;
    for (const auto& step : steps_) {
      if (step.height > height) break;
      found = &step;
    }
    if (found == nullptr) throw Error(Errc::NoPriceYet, "no price at height " + std::to_string(height));
    return found->price;
  }

  bool has_price_at(BlockHeight height) const { return !steps_.empty() && steps_.front().height <= height; }

  bool operator==(const PricePath&) const = default;

 private:
  std::vector<PriceStep> steps_;
};

}  // namespace levloop

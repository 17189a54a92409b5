#pragma once

// Deterministic single-writer ledger. Operations are grouped into batches
// that apply atomically against a copy of the state; gas is charged to the
// sender whether or not the batch succeeds.

#include <openssl/evp.h>

#include <algorithm>
#include <cstdint>
#include <optional>
#include <sstream>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

#include "levloop/amm.hpp"
#include "levloop/error.hpp"
#include "levloop/state.hpp"
#include "levloop/vault.hpp"
#include "levloop/wad.hpp"

namespace levloop {

/// Refers to the vault opened earlier in the same batch.
inline constexpr VaultId kOpenedInBatch = 0;

namespace op {

struct Transfer {
  std::string to;
  Token token = Token::ETH;
  Wad amount;
};
struct OpenVault {};
struct Deposit {
  VaultId vault = kOpenedInBatch;
  std::optional<Wad> amount;  // nullopt: output of the preceding swap
};
struct WithdrawCollateral {
  VaultId vault = kOpenedInBatch;
  Wad amount;
};
struct WithdrawDai {
  VaultId vault = kOpenedInBatch;
  Wad amount;
};
struct Repay {
  VaultId vault = kOpenedInBatch;
  std::optional<Wad> amount;  // nullopt: min(preceding swap output, debt)
};
struct Swap {
  SwapDirection direction = SwapDirection::DaiToEth;
  Wad amount_in;
  Wad min_out;
};
struct CloseVault {
  VaultId vault = kOpenedInBatch;
};
struct Liquidate {
  VaultId vault = 0;
};
/// Always fails. Used to probe batch atomicity.
struct Fault {};

}  // namespace op

using Op = std::variant<op::Transfer, op::OpenVault, op::Deposit, op::WithdrawCollateral, op::WithdrawDai, op::Repay,
                        op::Swap, op::CloseVault, op::Liquidate, op::Fault>;

inline std::uint64_t gas_cost(const GasSchedule& g, const Op& o) {
  return std::visit(
      [&](const auto& x) -> std::uint64_t {
        using T = std::decay_t<decltype(x)>;
        if constexpr (std::is_same_v<T, op::Transfer>) return g.transfer;
        else if constexpr (std::is_same_v<T, op::OpenVault>) return g.open_vault;
        else if constexpr (std::is_same_v<T, op::Deposit>) return g.deposit;
        else if constexpr (std::is_same_v<T, op::WithdrawCollateral>) return g.withdraw_collateral;
        else if constexpr (std::is_same_v<T, op::WithdrawDai>) return g.withdraw_dai;
        else if constexpr (std::is_same_v<T, op::Repay>) return g.repay;
        else if constexpr (std::is_same_v<T, op::Swap>) return g.swap;
        else if constexpr (std::is_same_v<T, op::CloseVault>) return g.close_vault;
        else if constexpr (std::is_same_v<T, op::Liquidate>) return g.liquidate;
        else return 0;
      },
      o);
}

inline std::uint64_t gas_for(const GasSchedule& g, const std::vector<Op>& ops) {
  std::uint64_t sum = 0;
  for (const auto& o : ops) sum += gas_cost(g, o);
  return std::max(sum, g.base_batch);
}

struct TxBatch {
  std::string sender;
  std::vector<Op> ops;
  std::uint64_t gas_limit = 0;
};

struct Receipt {
  bool success = false;
  std::uint64_t gas_used = 0;
  Wad gas_paid;
  std::optional<Errc> error;
  std::string message;
  std::optional<std::size_t> failed_op;
  BlockHeight height = 0;
  std::vector<VaultId> opened_vaults;
  std::vector<Wad> swap_outputs;
  std::vector<Settlement> settlements;
};

// ---------------------------------------------------------------------------
// Operation semantics

struct BatchContext {
  std::string sender;
  std::optional<VaultId> last_opened;
  std::optional<Wad> last_swap_out;
  Receipt* receipt = nullptr;
};

namespace detail {

inline void require_non_negative(Wad amount, const char* what) {
  if (amount.is_negative()) throw Error(Errc::InvalidAmount, std::string("negative ") + what);
}

inline void debit(Wallet& w, Token t, Wad amount, std::string_view who) {
  if (w.of(t) < amount) {
    throw Error(Errc::InsufficientFunds, std::string(who) + " holds " + w.of(t).str() + " " +
                                             std::string(to_string(t)) + ", needs " + amount.str());
  }
  w.of(t) -= amount;
}

inline VaultId resolve(const BatchContext& ctx, VaultId id) {
  if (id != kOpenedInBatch) return id;
  if (!ctx.last_opened) throw Error(Errc::UnknownVault, "no vault opened earlier in this batch");
  return *ctx.last_opened;
}

inline Vault& owned_open_vault(LedgerState& s, const BatchContext& ctx, VaultId ref) {
  Vault& v = s.vault(resolve(ctx, ref));
  if (v.owner != ctx.sender) throw Error(Errc::NotVaultOwner, ctx.sender + " does not own vault " + std::to_string(v.id));
  if (v.status != VaultStatus::Open) throw Error(Errc::VaultNotOpen, "vault " + std::to_string(v.id));
  return v;
}

inline void check_dust(const LedgerState& s, Wad debt) {
  if (debt.is_positive() && debt < s.collateral.dust_limit) {
    throw Error(Errc::BelowDustLimit, "debt " + debt.str() + " below dust limit " + s.collateral.dust_limit.str());
  }
}

}  // namespace detail

inline void apply(LedgerState& s, BatchContext& ctx, const op::Transfer& o) {
  detail::require_non_negative(o.amount, "transfer");
  Wallet& from = s.wallet(ctx.sender);
  Wallet& to = s.wallet(o.to);
  detail::debit(from, o.token, o.amount, ctx.sender);
  to.of(o.token) += o.amount;
}

inline void apply(LedgerState& s, BatchContext& ctx, const op::OpenVault&) {
  s.wallet(ctx.sender);
  Vault v;
  v.id = s.next_vault_id++;
  v.owner = ctx.sender;
  s.vaults.emplace(v.id, v);
  ctx.last_opened = v.id;
  if (ctx.receipt) ctx.receipt->opened_vaults.push_back(v.id);
}

inline void apply(LedgerState& s, BatchContext& ctx, const op::Deposit& o) {
  Vault& v = detail::owned_open_vault(s, ctx, o.vault);
  Wad amount;
  if (o.amount) {
    amount = *o.amount;
  } else {
    if (!ctx.last_swap_out) throw Error(Errc::InvalidAmount, "deposit refers to a swap that has not happened");
    amount = *ctx.last_swap_out;
  }
  detail::require_non_negative(amount, "deposit");
  detail::debit(s.wallet(ctx.sender), Token::ETH, amount, ctx.sender);
  v.collateral += amount;
}

inline void apply(LedgerState& s, BatchContext& ctx, const op::WithdrawCollateral& o) {
  detail::require_non_negative(o.amount, "withdrawal");
  Vault& v = detail::owned_open_vault(s, ctx, o.vault);
  if (o.amount > v.collateral) {
    throw Error(Errc::InsufficientFunds, "vault " + std::to_string(v.id) + " holds " + v.collateral.str() + " ETH");
  }
  const Wad remaining = v.collateral - o.amount;
  if (v.debt.is_positive() &&
      !vault_math::is_safe(remaining, v.debt, s.price(), s.collateral.collateral_requirement)) {
    throw Error(Errc::WouldUndercollateralize,
                "withdrawing " + o.amount.str() + " ETH leaves vault " + std::to_string(v.id) + " below r");
  }
  v.collateral = remaining;
  s.wallet(ctx.sender).eth += o.amount;
}

inline void apply(LedgerState& s, BatchContext& ctx, const op::WithdrawDai& o) {
  detail::require_non_negative(o.amount, "DAI withdrawal");
  Vault& v = detail::owned_open_vault(s, ctx, o.vault);
  if (o.amount.is_zero()) return;
  const Wad cap = vault_math::max_withdrawable_dai(v, s.price(), s.collateral.collateral_requirement);
  if (o.amount > cap) {
    throw Error(Errc::ExceedsCollateralCapacity, "requested " + o.amount.str() + " DAI, capacity " + cap.str());
  }
  detail::check_dust(s, v.debt + o.amount);
  v.debt += o.amount;
  s.wallet(ctx.sender).dai += o.amount;
}

inline void apply(LedgerState& s, BatchContext& ctx, const op::Repay& o) {
  Vault& v = detail::owned_open_vault(s, ctx, o.vault);
  Wad amount;
  if (o.amount) {
    amount = *o.amount;
  } else {
    if (!ctx.last_swap_out) throw Error(Errc::InvalidAmount, "repay refers to a swap that has not happened");
    amount = min(*ctx.last_swap_out, v.debt);
  }
  detail::require_non_negative(amount, "repayment");
  if (amount > v.debt) {
    throw Error(Errc::RepayExceedsDebt, "repaying " + amount.str() + " against debt " + v.debt.str());
  }
  detail::check_dust(s, v.debt - amount);
  detail::debit(s.wallet(ctx.sender), Token::DAI, amount, ctx.sender);
  v.debt -= amount;
}

inline void apply(LedgerState& s, BatchContext& ctx, const op::Swap& o) {
  detail::require_non_negative(o.amount_in, "swap input");
  s.pool.require_initialized();
  Wallet& w = s.wallet(ctx.sender);
  const Token in = o.direction == SwapDirection::DaiToEth ? Token::DAI : Token::ETH;
  const Token out = o.direction == SwapDirection::DaiToEth ? Token::ETH : Token::DAI;
  detail::debit(w, in, o.amount_in, ctx.sender);
  const Wad got = s.pool.apply(o.amount_in, o.direction);
  if (got < o.min_out) {
    throw Error(Errc::SlippageExceeded, "swap returned " + got.str() + ", minimum " + o.min_out.str());
  }
  w.of(out) += got;
  ctx.last_swap_out = got;
  if (ctx.receipt) ctx.receipt->swap_outputs.push_back(got);
}

inline void apply(LedgerState& s, BatchContext& ctx, const op::CloseVault& o) {
  Vault& v = detail::owned_open_vault(s, ctx, o.vault);
  if (v.debt.is_positive()) throw Error(Errc::OutstandingDebt, "vault " + std::to_string(v.id) + " owes " + v.debt.str());
  s.wallet(ctx.sender).eth += v.collateral;
  v.collateral = Wad::zero();
  v.status = VaultStatus::Closed;
}

inline void apply(LedgerState& s, BatchContext& ctx, const op::Liquidate& o) {
  Vault& v = s.vault(o.vault);
  if (v.status != VaultStatus::Open) throw Error(Errc::NotLiquidatable, "vault " + std::to_string(v.id) + " is not open");
  const Settlement st = vault_math::settle(v, s.price(), s.collateral, ctx.sender);
  Wallet& keeper = s.wallet(ctx.sender);
  if (keeper.dai < st.paid) {
    throw Error(Errc::KeeperInsufficientDai, ctx.sender + " holds " + keeper.dai.str() + " DAI, needs " + st.paid.str());
  }
  keeper.dai -= st.paid;
  keeper.eth += st.seized;
  s.wallet(v.owner).eth += st.returned;
  v.collateral = Wad::zero();
  v.debt = Wad::zero();
  v.status = VaultStatus::Liquidated;
  s.bad_debt += st.bad_debt;
  s.net_liquidation_burn += st.paid - st.principal;
  if (ctx.receipt) ctx.receipt->settlements.push_back(st);
}

inline void apply(LedgerState&, BatchContext&, const op::Fault&) {
  throw Error(Errc::InjectedFault, "injected failure");
}

inline void apply(LedgerState& s, BatchContext& ctx, const Op& o) {
  std::visit([&](const auto& x) { apply(s, ctx, x); }, o);
}

// ---------------------------------------------------------------------------
// Digest

/// Sorted, line-oriented rendering of all consensus-relevant state. Receipts
/// are not part of it.
inline std::string canonical_text(const LedgerState& s) {
  std::ostringstream out;
  out << "height " << s.height << '\n';
  out << "gas_price " << s.gas_price.str() << '\n';
  for (const auto& [name, w] : s.accounts) out << "account " << name << ' ' << w.eth.str() << ' ' << w.dai.str() << '\n';
  for (const auto& [id, v] : s.vaults) {
    out << "vault " << id << ' ' << v.owner << ' ' << v.collateral.str() << ' ' << v.debt.str() << ' '
        << to_string(v.status) << '\n';
  }
  out << "next_vault " << s.next_vault_id << '\n';
  out << "pool " << s.pool.reserve_eth.str() << ' ' << s.pool.reserve_dai.str() << ' ' << s.pool.fee_bps << '\n';
  for (const auto& step : s.path.steps()) out << "price " << step.height << ' ' << step.price.str() << '\n';
  out << "genesis_eth " << s.genesis_eth.str() << '\n';
  out << "bad_debt " << s.bad_debt.str() << '\n';
  out << "net_burn " << s.net_liquidation_burn.str() << '\n';
  return out.str();
}

inline std::string sha256_hex(std::string_view data) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr);
  static constexpr char kHex[] = "0123456789abcdef";
  std::string hex;
  hex.reserve(len * 2);
  for (unsigned i = 0; i < len; ++i) {
    hex.push_back(kHex[md[i] >> 4]);
    hex.push_back(kHex[md[i] & 0xf]);
  }
  return hex;
}

inline std::string digest(const LedgerState& s) { return sha256_hex(canonical_text(s)); }

// ---------------------------------------------------------------------------

struct Snapshot {
  LedgerState state;
  std::string digest;
};

class Ledger {
 public:
  Ledger() : state_(make_genesis(GenesisConfig{})) {}
  explicit Ledger(LedgerState genesis) : state_(std::move(genesis)) {}
  explicit Ledger(const GenesisConfig& cfg) : state_(make_genesis(cfg)) {}

  const LedgerState& state() const { return state_; }
  const std::vector<Receipt>& tx_log() const { return tx_log_; }

  std::uint64_t estimate_gas(const std::vector<Op>& ops) const { return gas_for(state_.gas, ops); }

  TxBatch make_batch(std::string sender, std::vector<Op> ops) const {
    TxBatch b{std::move(sender), std::move(ops), 0};
    b.gas_limit = estimate_gas(b.ops);
    return b;
  }

  /// All ops apply in order or none do. Gas for the ops attempted (floored at
  /// the base cost) moves from the sender to the coinbase either way.
  Receipt execute_batch(const TxBatch& batch) {
    Receipt r;
    r.height = state_.height;
    if (!state_.has_account(batch.sender)) {
      r.error = Errc::UnknownAccount;
      r.message = "unknown sender " + batch.sender;
      tx_log_.push_back(r);
      return r;
    }
    const Wad max_fee = state_.gas_price * static_cast<std::int64_t>(batch.gas_limit);
    if (state_.wallet(batch.sender).eth < max_fee) {
      r.error = Errc::OutOfGasFunds;
      r.message = batch.sender + " cannot cover gas limit " + std::to_string(batch.gas_limit);
      tx_log_.push_back(r);
      return r;
    }

    LedgerState work = state_;
    work.wallet(batch.sender).eth -= max_fee;
    BatchContext ctx{batch.sender, std::nullopt, std::nullopt, &r};
    std::uint64_t op_gas = 0;
    try {
      for (std::size_t i = 0; i < batch.ops.size(); ++i) {
        op_gas += gas_cost(state_.gas, batch.ops[i]);
        if (std::max(op_gas, state_.gas.base_batch) > batch.gas_limit) {
          r.failed_op = i;
          throw Error(Errc::GasLimitExceeded, "gas limit " + std::to_string(batch.gas_limit) + " exhausted at op " +
                                                  std::to_string(i));
        }
        try {
          apply(work, ctx, batch.ops[i]);
        } catch (const Error&) {
          r.failed_op = i;
          throw;
        }
      }
      r.gas_used = std::max(op_gas, state_.gas.base_batch);
      r.gas_paid = state_.gas_price * static_cast<std::int64_t>(r.gas_used);
      work.wallet(batch.sender).eth += max_fee - r.gas_paid;
      work.wallet(state_.coinbase).eth += r.gas_paid;
      r.success = true;
      state_ = std::move(work);
    } catch (const Error& e) {
      r.success = false;
      r.error = e.code();
      r.message = e.what();
      r.gas_used = e.code() == Errc::GasLimitExceeded ? batch.gas_limit : std::max(op_gas, state_.gas.base_batch);
      r.gas_used = std::min(r.gas_used, batch.gas_limit);
      r.gas_paid = state_.gas_price * static_cast<std::int64_t>(r.gas_used);
      r.opened_vaults.clear();
      r.swap_outputs.clear();
      r.settlements.clear();
      state_.wallet(batch.sender).eth -= r.gas_paid;
      state_.wallet(state_.coinbase).eth += r.gas_paid;
    }
    tx_log_.push_back(r);
    return r;
  }

  /// Single-transfer convenience wrapper.
  Receipt transfer(const std::string& from, const std::string& to, Token token, Wad amount) {
    return execute_batch(make_batch(from, {op::Transfer{to, token, amount}}));
  }

  BlockHeight advance_block(std::uint64_t n) {
    state_.height += n;
    return state_.height;
  }

  void set_path(PricePath path) { state_.path = std::move(path); }
  Wad current_price() const { return state_.price(); }

  Snapshot read_state() const { return Snapshot{state_, digest(state_)}; }
  std::string state_digest() const { return digest(state_); }

 private:
  LedgerState state_;
  std::vector<Receipt> tx_log_;
};

}  // namespace levloop

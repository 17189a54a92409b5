#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "levloop/amm.hpp"
#include "levloop/error.hpp"
#include "levloop/oracle.hpp"
#include "levloop/vault.hpp"
#include "levloop/wad.hpp"

namespace levloop {

enum class Token { ETH, DAI };

constexpr std::string_view to_string(Token t) { return t == Token::ETH ? "ETH" : "DAI"; }

struct Wallet {
  Wad eth;
  Wad dai;

  Wad& of(Token t) { return t == Token::ETH ? eth : dai; }
  Wad of(Token t) const { return t == Token::ETH ? eth : dai; }
  bool operator==(const Wallet&) const = default;
};

/// Gas units charged per operation kind. A batch costs the sum of its
/// operations, but never less than `base_batch`.
struct GasSchedule {
  std::uint64_t base_batch = 21'000;
  std::uint64_t transfer = 21'000;
  std::uint64_t open_vault = 200'000;
  std::uint64_t deposit = 100'000;
  std::uint64_t withdraw_collateral = 100'000;
  std::uint64_t withdraw_dai = 100'000;
  std::uint64_t repay = 80'000;
  std::uint64_t swap = 120'000;
  std::uint64_t close_vault = 60'000;
  std::uint64_t liquidate = 150'000;

  bool operator==(const GasSchedule&) const = default;
};

/// Everything the simulated chain knows. Plain value: copying it is how
/// batches get their all-or-nothing semantics.
struct LedgerState {
  std::map<std::string, Wallet, std::less<>> accounts;
  std::map<VaultId, Vault> vaults;
  VaultId next_vault_id = 1;
  Pool pool;
  PricePath path;
  BlockHeight height = 0;
  CollateralType collateral;
  Wad gas_price;
  GasSchedule gas;
  std::string coinbase = "@coinbase";

  Wad genesis_eth;
  // Sum over settlements of (owed - paid).
  Wad bad_debt;
  // Sum over settlements of (paid - principal); circulating DAI equals
  // total vault debt minus this figure.
  Wad net_liquidation_burn;

  bool has_account(std::string_view name) const { return accounts.find(name) != accounts.end(); }

  Wallet& wallet(std::string_view name) {
    auto it = accounts.find(name);
    if (it == accounts.end()) throw Error(Errc::UnknownAccount, std::string(name));
    return it->second;
  }
  const Wallet& wallet(std::string_view name) const {
    auto it = accounts.find(name);
    if (it == accounts.end()) throw Error(Errc::UnknownAccount, std::string(name));
    return it->second;
  }

  Vault& vault(VaultId id) {
    auto it = vaults.find(id);
    if (it == vaults.end()) throw Error(Errc::UnknownVault, "vault " + std::to_string(id));
    return it->second;
  }
  const Vault& vault(VaultId id) const {
    auto it = vaults.find(id);
    if (it == vaults.end()) throw Error(Errc::UnknownVault, "vault " + std::to_string(id));
    return it->second;
  }

  Wad price() const { return path.price_at(height); }
  std::optional<Wad> price_if_any() const {
    if (!path.has_price_at(height)) return std::nullopt;
    return path.price_at(height);
  }

  Wad total_eth() const {
    Wad sum = pool.reserve_eth;
    for (const auto& [_, w] : accounts) sum += w.eth;
    for (const auto& [_, v] : vaults) sum += v.collateral;
    return sum;
  }
  Wad total_dai() const {
    Wad sum = pool.reserve_dai;
    for (const auto& [_, w] : accounts) sum += w.dai;
    return sum;
  }
  Wad total_debt() const {
    Wad sum;
    for (const auto& [_, v] : vaults) sum += v.debt;
    return sum;
  }

  /// Empty when the ledger-level conservation laws hold.
  std::optional<std::string> invariant_violation() const {
    if (total_eth() != genesis_eth) {
      return "ETH supply " + total_eth().str() + " != genesis " + genesis_eth.str();
    }
    if (total_dai() != total_debt() - net_liquidation_burn) {
      return "DAI supply " + total_dai().str() + " != debt " + total_debt().str() + " - net burn " +
             net_liquidation_burn.str();
    }
    for (const auto& [name, w] : accounts) {
      if (w.eth.is_negative() || w.dai.is_negative()) return "negative balance for " + name;
    }
    for (const auto& [id, v] : vaults) {
      if (v.collateral.is_negative() || v.debt.is_negative()) return "negative vault " + std::to_string(id);
      if (v.status != VaultStatus::Open && (!v.debt.is_zero() || !v.collateral.is_zero())) {
        return "settled vault " + std::to_string(id) + " still holds value";
      }
    }
    return std::nullopt;
  }
};

// ---------------------------------------------------------------------------
// Genesis

struct AccountSpec {
  std::string name;
  Wad eth;
  Wad dai;
};

struct PoolSpec {
  Wad reserve_eth;
  Wad reserve_dai;
  int fee_bps = 30;
};

struct GenesisConfig {
  std::vector<AccountSpec> accounts;
  Wad gas_price;
  GasSchedule gas_schedule;
  CollateralType collateral;
  std::optional<PoolSpec> pool;
  std::vector<PriceStep> price_path;
  // Collateralization of the vault that backs all genesis DAI (pool reserve
  // and account balances), so DAI only ever exists as vault debt.
  Wad backing_ratio = Wad::from_int(10);
  std::string backing_owner = "@genesis";
};

inline LedgerState make_genesis(const GenesisConfig& cfg) {
  cfg.collateral.validate();
  LedgerState s;
  s.collateral = cfg.collateral;
  s.gas_price = cfg.gas_price;
  s.gas = cfg.gas_schedule;
  s.path = PricePath(cfg.price_path);
  if (cfg.gas_price.is_negative()) throw Error(Errc::InvalidConfig, "negative gas price");

  Wad genesis_dai;
  for (const auto& a : cfg.accounts) {
    if (a.name.empty()) throw Error(Errc::InvalidConfig, "empty account name");
    if (a.eth.is_negative() || a.dai.is_negative()) throw Error(Errc::InvalidConfig, "negative balance for " + a.name);
    if (!s.accounts.emplace(a.name, Wallet{a.eth, a.dai}).second) {
      throw Error(Errc::InvalidConfig, "duplicate account " + a.name);
    }
    genesis_dai += a.dai;
  }
  s.accounts.try_emplace(s.coinbase);

  if (cfg.pool) {
    if (cfg.pool->fee_bps < 0 || cfg.pool->fee_bps >= 10'000) throw Error(Errc::InvalidConfig, "fee_bps out of range");
    if (cfg.pool->reserve_eth.is_negative() || cfg.pool->reserve_dai.is_negative()) {
      throw Error(Errc::InvalidConfig, "negative pool reserve");
    }
    s.pool = Pool{cfg.pool->reserve_eth, cfg.pool->reserve_dai, cfg.pool->fee_bps};
    genesis_dai += cfg.pool->reserve_dai;
  }

  if (genesis_dai.is_positive()) {
    if (!s.path.has_price_at(0)) throw Error(Errc::InvalidConfig, "genesis DAI requires a price at height 0");
    if (cfg.backing_ratio < s.collateral.collateral_requirement) {
      throw Error(Errc::InvalidConfig, "backing ratio below the collateral requirement");
    }
    Vault backing;
    backing.id = s.next_vault_id++;
    backing.owner = cfg.backing_owner;
    backing.debt = genesis_dai;
    backing.collateral = Wad::mul_div(genesis_dai, cfg.backing_ratio, s.path.price_at(0), Rounding::Up);
    s.accounts.try_emplace(cfg.backing_owner);
    s.vaults.emplace(backing.id, backing);
  }

  s.genesis_eth = s.total_eth();
  return s;
}

}  // namespace levloop

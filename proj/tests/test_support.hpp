#pragma once

#include <string>
#include <vector>

#include "levloop/engine.hpp"
#include "levloop/ledger.hpp"
#include "levloop/state.hpp"
#include "levloop/wad.hpp"

namespace levloop::testing {

inline Wad W(const char* s) { return Wad::parse(s); }

inline GenesisConfig simple_genesis() {
  GenesisConfig g;
  g.accounts = {{"alice", W("10"), W("0")}, {"bob", W("5"), W("0")}, {"carol", W("100"), W("10000")}};
  g.pool = PoolSpec{W("1000"), W("150000"), 30};
  g.price_path = {{0, W("150")}};
  return g;
}

/// Zero gas, zero fee and a pool a million times deeper than the trades the
/// tests make, with the arbitrageur funded to keep it on the oracle price.
inline EngineConfig frictionless_config(const char* price = "150") {
  EngineConfig cfg;
  auto& g = cfg.genesis;
  const Wad p = W(price);
  g.accounts = {{"alice", W("100"), W("0")}, {"bob", W("100"), W("0")}};
  g.pool = PoolSpec{W("3000000"), W("3000000") * p, 0};
  g.price_path = {{0, p}};
  cfg.arbitrageur = FundedAccount{"@arbitrageur", W("1000000"), W("200000000")};
  cfg.keeper = FundedAccount{"@keeper", W("1000"), W("10000000")};
  return cfg;
}

inline Vault make_vault(const char* collateral, const char* debt) {
  Vault v;
  v.id = 1;
  v.owner = "alice";
  v.collateral = W(collateral);
  v.debt = W(debt);
  return v;
}

/// Opens a vault for `owner` holding `collateral` ETH with `debt` DAI drawn.
inline VaultId open_vault(Ledger& ledger, const std::string& owner, const char* collateral, const char* debt) {
  auto rc = ledger.execute_batch(ledger.make_batch(
      owner, {op::OpenVault{}, op::Deposit{kOpenedInBatch, W(collateral)}, op::WithdrawDai{kOpenedInBatch, W(debt)}}));
  if (!rc.success) throw Error(rc.error.value_or(Errc::InjectedFault), rc.message);
  return rc.opened_vaults.front();
}

/// Expected state after a failed batch: the pre-state with only gas moved.
inline std::string digest_after_gas(LedgerState pre, const std::string& sender, Wad gas_paid) {
  pre.wallet(sender).eth -= gas_paid;
  pre.wallet(pre.coinbase).eth += gas_paid;
  return digest(pre);
}

}  // namespace levloop::testing

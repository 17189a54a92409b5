#pragma once

// HTTP/JSON front end. `Api` is transport-free (method, path, body in;
// status and body out) so it can be exercised directly; `HttpServer` binds it
// to cpp-httplib.

#include <charconv>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "httplib.h"
#include "json.hpp"
#include "levloop/config.hpp"
#include "levloop/engine.hpp"
#include "levloop/error.hpp"
#include "levloop/leverage.hpp"

namespace levloop::service {

using json = nlohmann::json;

struct ApiResponse {
  int status = 200;
  std::string body;
};

/// HTTP status for each engine error code. 4xx are caller faults, 5xx engine faults.
constexpr int http_status(Errc code) {
  switch (code) {
    case Errc::InvalidAmount:
    case Errc::NonMonotonePath:
    case Errc::NonPositivePrice:
    case Errc::InvalidConfig:
      return 400;
    case Errc::NotVaultOwner:
      return 403;
    case Errc::UnknownPosition:
    case Errc::UnknownVault:
      return 404;
    case Errc::SlippageExceeded:
    case Errc::PositionNotOpen:
    case Errc::UnwindInfeasible:
    case Errc::VaultNotOpen:
    case Errc::NotLiquidatable:
    case Errc::OutstandingDebt:
    case Errc::EmptyVault:
    case Errc::NoPriceYet:
    case Errc::PoolUninitialized:
      return 409;
    case Errc::InsufficientFunds:
    case Errc::UnknownAccount:
    case Errc::GasLimitExceeded:
    case Errc::OutOfGasFunds:
    case Errc::WouldUndercollateralize:
    case Errc::ExceedsCollateralCapacity:
    case Errc::BelowDustLimit:
    case Errc::RepayExceedsDebt:
    case Errc::CollateralRatioAtOrBelowOne:
    case Errc::InvalidFee:
    case Errc::InvalidLeverageTarget:
    case Errc::TargetExceedsMax:
    case Errc::InsufficientInitialCollateral:
      return 422;
    case Errc::KeeperInsufficientDai:
    case Errc::Overflow:
    case Errc::InjectedFault:
      return 500;
  }
  return 500;
}

class Api {
 public:
  explicit Api(Engine& engine) : engine_(engine) {}

  ApiResponse handle(std::string_view method, std::string_view path, std::string_view body) {
    try {
      return route(method, path, body);
    } catch (const Error& e) {
      return error(http_status(e.code()), std::string(to_string(e.code())), e.what());
    } catch (const BadRequest& e) {
      return error(400, "BadRequest", e.what());
    } catch (const std::exception& e) {
      return error(500, "Internal", e.what());
    }
  }

 private:
  struct BadRequest : std::runtime_error {
    using std::runtime_error::runtime_error;
  };

  static ApiResponse ok(int status, const json& j) { return ApiResponse{status, j.dump()}; }
  static ApiResponse error(int status, const std::string& code, const std::string& message) {
    return ApiResponse{status, json{{"code", code}, {"message", message}}.dump()};
  }

  static std::vector<std::string_view> split(std::string_view path) {
    std::vector<std::string_view> parts;
    std::size_t i = 0;
    while (i < path.size()) {
      if (path[i] == '/') {
        ++i;
        continue;
      }
      const std::size_t j = path.find('/', i);
      const std::size_t end = j == std::string_view::npos ? path.size() : j;
      parts.push_back(path.substr(i, end - i));
      i = end;
    }
    return parts;
  }

  static json parse_body(std::string_view body) {
    if (body.empty()) return json::object();
    json j = json::parse(body, nullptr, false);
    if (j.is_discarded() || !j.is_object()) throw BadRequest("body must be a JSON object");
    return j;
  }

  static Wad amount(const json& j, const char* key, std::optional<Wad> fallback = std::nullopt) {
    auto it = j.find(key);
    if (it == j.end()) {
      if (fallback) return *fallback;
      throw BadRequest(std::string("missing field '") + key + "'");
    }
    if (!it->is_string()) throw BadRequest(std::string("field '") + key + "' must be a decimal string");
    return Wad::parse(it->get<std::string>());
  }

  static std::string text(const json& j, const char* key) {
    auto it = j.find(key);
    if (it == j.end() || !it->is_string()) throw BadRequest(std::string("field '") + key + "' must be a string");
    return it->get<std::string>();
  }

  static leverage::PositionId position_id(std::string_view s) {
    leverage::PositionId id = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), id);
    if (ec != std::errc() || ptr != s.data() + s.size()) {
      throw Error(Errc::UnknownPosition, "no position '" + std::string(s) + "'");
    }
    return id;
  }

  ApiResponse route(std::string_view method, std::string_view path, std::string_view body) {
    const auto q = path.find('?');
    const auto parts = split(q == std::string_view::npos ? path : path.substr(0, q));
    const bool get = method == "GET";
    const bool post = method == "POST";

    if (parts.size() == 1 && parts[0] == "health" && get) return ok(200, json{{"status", "ok"}});
    if (parts.size() == 1 && parts[0] == "market" && get) return market();
    if (parts.size() == 1 && parts[0] == "state" && get) return state();
    if (parts.size() == 1 && parts[0] == "settlements" && get) {
      json out = json::array();
      for (const auto& s : engine_.settlements()) out.push_back(config::to_json(s));
      return ok(200, out);
    }
    if (!parts.empty() && parts[0] == "positions") {
      if (parts.size() == 1 && post) return open(parse_body(body));
      if (parts.size() == 1 && get) {
        json out = json::array();
        for (const auto& r : engine_.reports()) out.push_back(config::to_json(r));
        return ok(200, out);
      }
      if (parts.size() == 2 && get) return ok(200, config::to_json(engine_.report(position_id(parts[1]))));
      if (parts.size() == 3 && parts[2] == "collateral" && post) {
        const json j = parse_body(body);
        const auto id = position_id(parts[1]);
        const Wad price = engine_.recollateralize(id, amount(j, "amount"));
        return ok(200, json{{"new_liquidation_price", price.str()}});
      }
      if (parts.size() == 3 && parts[2] == "close" && post) {
        const auto res = engine_.close_position(position_id(parts[1]));
        return ok(200, json{{"realized_equity", res.realized_equity.str()}, {"receipt", config::to_json(res.receipt)}});
      }
    }
    if (parts.size() == 2 && parts[0] == "scenario" && post) {
      const json j = parse_body(body);
      if (parts[1] == "advance") {
        auto it = j.find("blocks");
        if (it == j.end() || !it->is_number_unsigned()) throw BadRequest("'blocks' must be a non-negative integer");
        const auto step = engine_.advance(it->get<std::uint64_t>());
        return ok(200, json{{"digest", step.digest}, {"height", step.height}});
      }
      if (parts[1] == "price") {
        auto it = j.find("path");
        if (it == j.end()) throw BadRequest("missing field 'path'");
        PricePath path;
        try {
          path = config::price_path_from_json(*it);
        } catch (const Error& e) {
          if (e.code() == Errc::InvalidConfig) throw BadRequest(e.what());
          throw;
        }
        const auto step = engine_.set_path(std::move(path));
        return ok(200, json{{"digest", step.digest}, {"height", step.height}});
      }
    }
    return error(404, "NotFound", std::string(method) + " " + std::string(path));
  }

  ApiResponse open(const json& j) {
    const std::string owner = text(j, "owner");
    const Wad collateral = amount(j, "collateral");
    const Wad target = amount(j, "target_leverage");
    std::optional<Wad> tolerance;
    if (j.contains("slippage_tolerance")) tolerance = amount(j, "slippage_tolerance");
    const auto res = engine_.open_position(owner, collateral, target, tolerance);
    return ok(201, json{{"position", config::to_json(res.position)},
                        {"plan", config::to_json(res.plan)},
                        {"receipt", config::to_json(res.receipt)},
                        {"achieved_leverage", res.position.achieved_leverage.str()},
                        {"liquidation_price", res.liquidation_price.str()},
                        {"gas_paid", res.receipt.gas_paid.str()}});
  }

  ApiResponse market() {
    const auto snap = engine_.snapshot();
    const auto& s = snap.state;
    const Wad r = s.collateral.collateral_requirement;
    const Wad fee = s.pool.fee();
    json j{{"collateral_requirement", r.str()},
           {"liquidation_ratio", s.collateral.liquidation_ratio.str()},
           {"fee", fee.str()},
           {"safety_margin", engine_.config().plan.safety_margin},
           {"margin_call_buffer", engine_.config().policy.margin_call_buffer.str()},
           {"height", s.height},
           {"price", config::opt_wad(s.price_if_any())},
           {"digest", snap.digest}};
    if (r > Wad::one()) {
      // r / (r - 1) and 1 / (1 - (1 - fee) / r) = r / (r - 1 + fee)
      j["theoretical_max_leverage"] = Wad::mul_div(r, Wad::one(), r - Wad::one()).str();
      j["effective_max_leverage"] = Wad::mul_div(r, Wad::one(), r - Wad::one() + fee).str();
    } else {
      j["theoretical_max_leverage"] = nullptr;
      j["effective_max_leverage"] = nullptr;
    }
    return ok(200, j);
  }

  ApiResponse state() {
    const auto snap = engine_.snapshot();
    const auto& s = snap.state;
    json accounts = json::object();
    for (const auto& [name, w] : s.accounts) accounts[name] = json{{"eth", w.eth.str()}, {"dai", w.dai.str()}};
    json vaults = json::array();
    for (const auto& [id, v] : s.vaults) {
      vaults.push_back(json{{"id", id},
                            {"owner", v.owner},
                            {"collateral", v.collateral.str()},
                            {"debt", v.debt.str()},
                            {"status", std::string(to_string(v.status))}});
    }
    return ok(200, json{{"height", s.height},
                        {"price", config::opt_wad(s.price_if_any())},
                        {"digest", snap.digest},
                        {"accounts", accounts},
                        {"vaults", vaults},
                        {"pool", json{{"reserve_eth", s.pool.reserve_eth.str()},
                                      {"reserve_dai", s.pool.reserve_dai.str()},
                                      {"fee_bps", s.pool.fee_bps}}},
                        {"price_path", config::price_path_to_json(s.path)},
                        {"bad_debt", s.bad_debt.str()}});
  }

  Engine& engine_;
};

/// Serves `Api` over HTTP/1.1. Mutations serialize inside the engine.
class HttpServer {
 public:
  explicit HttpServer(Engine& engine) : api_(engine) {
    auto bridge = [this](const httplib::Request& req, httplib::Response& res) {
      const auto out = api_.handle(req.method, req.path, req.body);
      res.status = out.status;
      res.set_content(out.body, "application/json");
    };
    server_.Get(".*", bridge);
    server_.Post(".*", bridge);
    server_.Options(".*", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });
    server_.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                                 {"Access-Control-Allow-Headers", "Content-Type"},
                                 {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"}});
  }

  /// Binds; returns the bound port or -1.
  int bind(const std::string& host, int port) {
    if (port == 0) return server_.bind_to_any_port(host);
    return server_.bind_to_port(host, port) ? port : -1;
  }

  bool listen() { return server_.listen_after_bind(); }
  void stop() { server_.stop(); }
  bool running() const { return server_.is_running(); }
  void wait_until_ready() const { server_.wait_until_ready(); }

 private:
  Api api_;
  httplib::Server server_;
};

}  // namespace levloop::service

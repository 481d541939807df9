#include "stiefsteer/session.hpp"

#include <chrono>
#include <cmath>
#include <unordered_set>

#include <json.hpp>

#include "stiefsteer/error.hpp"
#include "stiefsteer/matrix_io.hpp"

namespace stiefsteer {

namespace {

using nlohmann::json;

std::string number(double v) {
  return std::isfinite(v) ? format_double17(v) : "null";
}

std::string number(const std::optional<double>& v) {
  return v ? number(*v) : "null";
}

}  // namespace

std::string to_string(StepFlag f) {
  switch (f) {
    case StepFlag::ZeroRank: return "ZeroRank";
    case StepFlag::InsufficientDimension: return "InsufficientDimension";
    case StepFlag::Degraded: return "Degraded";
  }
  return "Unknown";
}

bool StepResponse::has(StepFlag f) const {
  for (auto x : flags) {
    if (x == f) return true;
  }
  return false;
}

void SessionConfig::validate() const {
  if (dim < 1) throw ConfigError("dim", "must be a positive integer");
  if (const auto* rgd = std::get_if<RgdSolver>(&solver)) rgd->params.validate();
  if (const auto* fixed = std::get_if<FixedAlpha>(&alpha_policy)) {
    if (!(fixed->value > 0.0) || !std::isfinite(fixed->value)) {
      throw ConfigError("alpha", "must be a positive finite number");
    }
  } else {
    const double c = std::get<SpectralScaledAlpha>(alpha_policy).c;
    if (!(c > 0.0) || !std::isfinite(c)) throw ConfigError("C", "must be positive");
  }
}

SteeringSession::SteeringSession(SessionConfig config) : config_(std::move(config)) {
  config_.validate();
}

void SteeringSession::check_request(const StepRequest& req) const {
  if (req.token_index < 0) throw ProtocolError("token_index must be non-negative");
  if (req.token_index <= last_token_) {
    throw ProtocolError("token_index " + std::to_string(req.token_index) +
                        " does not increase past " + std::to_string(last_token_));
  }
  if (req.active_ids.empty()) throw ProtocolError("active_ids is empty");
  if (static_cast<Eigen::Index>(req.active_ids.size()) != req.h.cols()) {
    throw ProtocolError("active_ids has " + std::to_string(req.active_ids.size()) +
                        " entries but H has " + std::to_string(req.h.cols()) +
                        " columns");
  }
  if (req.h.rows() != config_.dim) {
    throw ProtocolError("activation length " + std::to_string(req.h.rows()) +
                        " != session dim " + std::to_string(config_.dim));
  }
  if (!req.h.allFinite()) throw ProtocolError("H contains non-finite values");

  std::unordered_set<std::string> ids;
  const bool first = last_token_ < 0;
  const std::unordered_set<std::string> active(active_.begin(), active_.end());
  for (const auto& id : req.active_ids) {
    if (!ids.insert(id).second) throw ProtocolError("duplicate path id '" + id + "'");
    if (first) continue;
    if (!active.count(id)) {
      if (seen_.count(id)) throw ProtocolError("path '" + id + "' was dropped earlier");
      throw ProtocolError("unknown path id '" + id + "'");
    }
  }
}

StepResponse SteeringSession::step(const StepRequest& req) {
  check_request(req);
  const auto start = std::chrono::steady_clock::now();

  StepResponse resp;
  resp.token_index = req.token_index;
  const Eigen::Index n = req.h.cols();
  auto degrade = [&](std::initializer_list<StepFlag> why) {
    resp.v = Matrix::Zero(req.h.rows(), n);
    resp.eta_star = 0.0;
    resp.alpha_used = 0.0;
    resp.loss_before.reset();
    resp.loss_after.reset();
    resp.flags.assign(why);
  };

  std::optional<double> alpha;
  if (const auto* fixed = std::get_if<FixedAlpha>(&config_.alpha_policy)) {
    alpha = fixed->value;
  } else {
    try {
      alpha = compute_alpha(req.h, std::get<SpectralScaledAlpha>(config_.alpha_policy).c);
    } catch (const DegenerateInput&) {
      degrade({StepFlag::Degraded});
    }
  }

  if (alpha) {
    const std::uint64_t seed =
        std::holds_alternative<FixedSeed>(config_.seed_policy)
            ? std::get<FixedSeed>(config_.seed_policy).seed
            : std::get<PerTokenSeed>(config_.seed_policy).base +
                  static_cast<std::uint64_t>(req.token_index);
    try {
      if (req.h.rows() < n) {
        throw InsufficientDimension(req.h.rows(), 0, n);
      }
      const SteerProblem problem(req.h, *alpha);
      resp.alpha_used = *alpha;
      if (const auto* rgd = std::get_if<RgdSolver>(&config_.solver)) {
        SolveTrace trace = rgd_solve(problem, rgd->params, seed);
        resp.v = trace.final_v->value();
        resp.loss_before = trace.initial_loss();
        resp.loss_after = trace.final_loss();
        // Last accepted stepsize; the final record never carries a step.
        resp.eta_star = trace.records.size() >= 2
                            ? trace.records[trace.records.size() - 2].eta
                            : 0.0;
      } else {
        OneStepResult one = onestep_solve(problem, seed);
        resp.v = one.v1.value();
        resp.eta_star = one.coeffs.eta_star;
        resp.loss_before = one.loss_before;
        resp.loss_after = one.loss_after;
        if (one.coeffs.zero_rank) resp.flags.push_back(StepFlag::ZeroRank);
      }
    } catch (const InsufficientDimension&) {
      degrade({StepFlag::InsufficientDimension, StepFlag::Degraded});
    }
  }

  latencies_.push_back(
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());
  last_token_ = req.token_index;
  active_ = req.active_ids;
  seen_.insert(req.active_ids.begin(), req.active_ids.end());
  ++counts_.tokens;
  if (resp.has(StepFlag::ZeroRank)) ++counts_.zero_rank;
  if (resp.has(StepFlag::InsufficientDimension)) ++counts_.insufficient_dimension;
  if (resp.has(StepFlag::Degraded)) ++counts_.degraded;
  return resp;
}

SessionSummary SteeringSession::close() const {
  SessionSummary s = counts_;
  if (!latencies_.empty()) {
    double acc = 0.0;
    for (double t : latencies_) acc += t;
    s.mean_latency_s = acc / static_cast<double>(latencies_.size());
  }
  return s;
}

std::string SteeringSession::handle_line(std::string_view line) {
  std::optional<long> token;
  try {
    StepRequest req = parse_step_request(line);
    token = req.token_index;
    return format_step_response(step(req));
  } catch (const Error& e) {
    ++counts_.errors;
    if (!token) {
      // Best effort: echo the token index if the line is at least JSON.
      const json j = json::parse(line, nullptr, false);
      if (j.is_object() && j.contains("token_index") && j["token_index"].is_number_integer()) {
        token = j["token_index"].get<long>();
      }
    }
    return format_error_response(e.what(), token);
  }
}

StepRequest parse_step_request(std::string_view line) {
  const json j = json::parse(line, nullptr, false);
  if (j.is_discarded()) throw ParseError("request is not valid JSON");
  if (!j.is_object()) throw ParseError("request must be a JSON object");
  for (const char* key : {"token_index", "active_ids", "H"}) {
    if (!j.contains(key)) throw ParseError(std::string("missing field '") + key + "'");
  }
  if (!j["token_index"].is_number_integer()) {
    throw ParseError("token_index must be an integer");
  }
  StepRequest req;
  req.token_index = j["token_index"].get<long>();

  const json& ids = j["active_ids"];
  if (!ids.is_array()) throw ParseError("active_ids must be an array");
  for (const auto& id : ids) {
    if (!id.is_string()) throw ParseError("active_ids entries must be strings");
    req.active_ids.push_back(id.get<std::string>());
  }

  const json& cols = j["H"];
  if (!cols.is_array() || cols.empty()) throw ParseError("H must be a non-empty array");
  const std::size_t d = cols[0].is_array() ? cols[0].size() : 0;
  if (d == 0) throw ParseError("H columns must be non-empty arrays");
  req.h.resize(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t c = 0; c < cols.size(); ++c) {
    const json& col = cols[c];
    if (!col.is_array() || col.size() != d) {
      throw ParseError("H column " + std::to_string(c) + " has inconsistent length");
    }
    for (std::size_t i = 0; i < d; ++i) {
      if (!col[i].is_number()) throw ParseError("H entries must be numbers");
      req.h(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = col[i].get<double>();
    }
  }
  return req;
}

std::string format_step_response(const StepResponse& r) {
  std::string out = "{\"token_index\":" + std::to_string(r.token_index) + ",\"V\":[";
  for (Eigen::Index c = 0; c < r.v.cols(); ++c) {
    if (c) out += ',';
    out += '[';
    for (Eigen::Index i = 0; i < r.v.rows(); ++i) {
      if (i) out += ',';
      out += number(r.v(i, c));
    }
    out += ']';
  }
  out += "],\"eta_star\":" + number(r.eta_star);
  out += ",\"alpha_used\":" + number(r.alpha_used);
  out += ",\"loss_before\":" + number(r.loss_before);
  out += ",\"loss_after\":" + number(r.loss_after);
  out += ",\"flags\":[";
  for (std::size_t i = 0; i < r.flags.size(); ++i) {
    if (i) out += ',';
    out += '"' + to_string(r.flags[i]) + '"';
  }
  out += "]}";
  return out;
}

std::string format_error_response(const std::string& message,
                                  std::optional<long> token_index) {
  json j;
  j["error"] = message;
  if (token_index) j["token_index"] = *token_index;
  return j.dump(-1, ' ', false, json::error_handler_t::replace);
}

std::string format_session_summary(const SessionSummary& s) {
  json j = {{"tokens", s.tokens},
            {"flags",
             {{"ZeroRank", s.zero_rank},
              {"InsufficientDimension", s.insufficient_dimension},
              {"Degraded", s.degraded}}},
            {"errors", s.errors},
            {"mean_latency_s", s.mean_latency_s}};
  return json{{"summary", j}}.dump();
}

}  // namespace stiefsteer

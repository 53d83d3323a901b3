#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "hyperctl/controller.hpp"
#include "hyperctl/csv.hpp"
#include "hyperctl/hyperspace.hpp"

namespace hyperctl {

// ---------------------------------------------------------------------------
// Wire messages: exactly one JSON object per newline-terminated line.
// The tuner writes suggest/init/error/stop messages, the trainer answers each
// suggest with a reward carrying the same iteration number (or a stop).
// ---------------------------------------------------------------------------

struct WireMessage {
  enum class Type { init, suggest, reward, stop, error };

  Type type = Type::error;
  long iteration = -1;       // suggest and reward only
  nlohmann::json config;     // suggest only: {name: value, ...}
  double value = 0.0;        // reward only
  nlohmann::json payload;    // control messages
};

inline std::string wire_type_name(WireMessage::Type type) {
  switch (type) {
    case WireMessage::Type::init: return "init";
    case WireMessage::Type::suggest: return "suggest";
    case WireMessage::Type::reward: return "reward";
    case WireMessage::Type::stop: return "stop";
    case WireMessage::Type::error: return "error";
  }
  throw std::logic_error("unknown wire message type");
}

inline WireMessage parse_wire_message(const std::string& line) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(line);
  } catch (const nlohmann::json::out_of_range& e) {
    // valid JSON syntax carrying a number no double can hold
    throw std::domain_error(std::string("non-finite number in message: ") + e.what());
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("malformed JSON line: ") + e.what());
  }
  if (!doc.is_object() || !doc.contains("type") || !doc.at("type").is_string()) {
    throw std::invalid_argument("wire message needs a string 'type' field");
  }
  const std::string type = doc.at("type").get<std::string>();
  WireMessage msg;
  if (type == "reward") {
    msg.type = WireMessage::Type::reward;
    if (!doc.contains("iteration") || !doc.at("iteration").is_number_integer()) {
      throw std::invalid_argument("reward message needs an integer 'iteration'");
    }
    if (!doc.contains("value") || !doc.at("value").is_number()) {
      throw std::invalid_argument("reward message needs a numeric 'value'");
    }
    msg.iteration = doc.at("iteration").get<long>();
    msg.value = doc.at("value").get<double>();
  } else if (type == "suggest") {
    msg.type = WireMessage::Type::suggest;
    msg.iteration = doc.value("iteration", -1L);
    msg.config = doc.value("config", nlohmann::json::object());
  } else if (type == "init") {
    msg.type = WireMessage::Type::init;
    msg.payload = doc.value("payload", nlohmann::json());
  } else if (type == "stop") {
    msg.type = WireMessage::Type::stop;
    msg.payload = doc.value("payload", nlohmann::json());
  } else if (type == "error") {
    msg.type = WireMessage::Type::error;
    msg.payload = doc.value("payload", nlohmann::json());
  } else {
    throw std::invalid_argument("unknown wire message type '" + type + "'");
  }
  return msg;
}

inline std::string suggest_line(long iteration, const HyperSpace& space,
                                const std::vector<double>& values) {
  nlohmann::json config = nlohmann::json::object();
  for (int i = 0; i < space.size(); ++i) config[space.dims[i].name] = values[i];
  nlohmann::json doc = {{"type", "suggest"}, {"iteration", iteration}, {"config", config}};
  return doc.dump();
}

inline std::string control_line(const std::string& type, nlohmann::json payload = {}) {
  nlohmann::json doc = {{"type", type}};
  if (!payload.is_null()) doc["payload"] = std::move(payload);
  return doc.dump();
}

inline std::string reward_line(long iteration, double value) {
  return nlohmann::json{{"type", "reward"}, {"iteration", iteration}, {"value", value}}.dump();
}

// ---------------------------------------------------------------------------
// Run configuration
// ---------------------------------------------------------------------------

struct RunConfig {
  HyperSpace space;
  int window = 1;
  int grid_points = 10;
  double lambda = 1.0;
  std::uint64_t seed = 0;
  long horizon = 1000;
  std::string snapshot_path;   // optional
  long snapshot_every = 25;

  ControllerConfig controller_config() const {
    return ControllerConfig{space, window, grid_points, lambda, seed};
  }

  static RunConfig from_json(const nlohmann::json& doc) {
    if (!doc.is_object()) throw std::invalid_argument("run config must be a JSON object");
    if (doc.value("version", -1) != 1) {
      throw std::invalid_argument("run config: unsupported version (expected 1)");
    }
    RunConfig cfg;
    if (!doc.contains("space") || !doc.at("space").is_array()) {
      throw std::invalid_argument("run config: missing 'space' array");
    }
    for (const auto& j : doc.at("space")) {
      cfg.space.dims.push_back({j.at("name").get<std::string>(), j.at("lo").get<double>(),
                                j.at("hi").get<double>(),
                                scale_from_string(j.value("scale", "linear"))});
    }
    if (doc.contains("controller")) {
      const auto& ctl = doc.at("controller");
      cfg.window = ctl.value("window", cfg.window);
      cfg.grid_points = ctl.value("grid_points", cfg.grid_points);
      cfg.lambda = ctl.value("lambda", cfg.lambda);
      cfg.seed = ctl.value("seed", cfg.seed);
    }
    cfg.horizon = doc.value("horizon", cfg.horizon);
    cfg.snapshot_path = doc.value("snapshot_path", std::string());
    cfg.snapshot_every = doc.value("snapshot_every", cfg.snapshot_every);
    if (cfg.horizon < 1) throw std::invalid_argument("run config: horizon must be >= 1");
    if (cfg.snapshot_every < 1) {
      throw std::invalid_argument("run config: snapshot_every must be >= 1");
    }
    cfg.controller_config().validate();
    return cfg;
  }
};

// ---------------------------------------------------------------------------
// Tune loop
// ---------------------------------------------------------------------------

/// Line-oriented byte transport. The iostream adapter serves production; a
/// loopback implementation stands in for a trainer in tests.
class LineTransport {
 public:
  virtual ~LineTransport() = default;
  virtual bool read_line(std::string& line) = 0;
  virtual void write_line(const std::string& line) = 0;
};

class IoStreamTransport : public LineTransport {
 public:
  IoStreamTransport(std::istream& in, std::ostream& out) : in_(in), out_(out) {}

  bool read_line(std::string& line) override {
    if (!std::getline(in_, line)) return false;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return true;
  }

  void write_line(const std::string& line) override {
    out_ << line << '\n';
    out_.flush();
  }

 private:
  std::istream& in_;
  std::ostream& out_;
};

struct TuneOptions {
  std::string resume_path;                     // restore a snapshot before starting
  std::optional<std::uint64_t> seed_override;  // replaces the run config seed
  std::optional<long> snapshot_every_override;
  std::optional<std::string> snapshot_path_override;
  std::function<void(const std::string&)> log = [](const std::string&) {};
};

namespace detail {

inline void write_snapshot_atomically(const std::string& path, const nlohmann::json& doc) {
  const std::filesystem::path target(path);
  const std::filesystem::path tmp = target.string() + ".tmp";
  write_text_file(tmp, doc.dump());
  std::filesystem::rename(tmp, target);
}

inline bool configs_match(const ControllerConfig& a, const ControllerConfig& b) {
  if (a.window != b.window || a.grid_points != b.grid_points || a.lambda != b.lambda ||
      a.seed != b.seed || a.space.size() != b.space.size()) {
    return false;
  }
  for (int i = 0; i < a.space.size(); ++i) {
    const auto& da = a.space.dims[i];
    const auto& db = b.space.dims[i];
    if (da.name != db.name || da.lo != db.lo || da.hi != db.hi || da.scale != db.scale) {
      return false;
    }
  }
  return true;
}

}  // namespace detail

/// Drives an external trainer through the suggest/observe protocol: emit a
/// suggestion, block for the matching reward, feed it to the controller,
/// repeat until the horizon or a stop message. Returns the process exit
/// status. State is snapshotted every snapshot_every completed iterations and
/// on exit, so a later run with resume_path continues bit-identically.
inline int tune_loop(const RunConfig& run, LineTransport& transport, const TuneOptions& opts = {}) {
  RunConfig cfg = run;
  if (opts.seed_override) cfg.seed = *opts.seed_override;
  if (opts.snapshot_path_override) cfg.snapshot_path = *opts.snapshot_path_override;
  const long snapshot_every =
      opts.snapshot_every_override ? *opts.snapshot_every_override : cfg.snapshot_every;

  std::optional<Controller> controller;
  if (!opts.resume_path.empty()) {
    std::ifstream in(opts.resume_path);
    if (!in) {
      opts.log("cannot open snapshot '" + opts.resume_path + "'");
      return 2;
    }
    nlohmann::json doc;
    try {
      in >> doc;
      controller.emplace(Controller::restore(doc));
    } catch (const std::exception& e) {
      opts.log(std::string("snapshot rejected: ") + e.what());
      return 2;
    }
    if (!detail::configs_match(controller->config(), cfg.controller_config())) {
      opts.log("snapshot does not match the run configuration");
      return 2;
    }
  } else {
    controller.emplace(cfg.controller_config());
  }

  const auto maybe_snapshot = [&](bool force) {
    if (cfg.snapshot_path.empty()) return;
    if (!force && controller->iteration() % snapshot_every != 0) return;
    detail::write_snapshot_atomically(cfg.snapshot_path, controller->snapshot());
  };

  transport.write_line(control_line(
      "init", {{"iteration", controller->iteration()}, {"horizon", cfg.horizon}}));

  while (controller->iteration() < cfg.horizon) {
    const Suggestion suggestion = controller->suggest();
    transport.write_line(suggest_line(suggestion.iteration, cfg.space, suggestion.values));

    bool observed = false;
    while (!observed) {
      std::string line;
      if (!transport.read_line(line)) {
        opts.log("input closed before reward for iteration " +
                 std::to_string(suggestion.iteration));
        return 1;
      }
      WireMessage msg;
      try {
        msg = parse_wire_message(line);
      } catch (const std::domain_error& e) {
        // overflowing reward value: reject the line, keep the iteration open
        transport.write_line(control_line(
            "error", std::string(e.what()) + "; iteration " +
                         std::to_string(suggestion.iteration) + " not consumed"));
        continue;
      } catch (const std::exception& e) {
        transport.write_line(control_line("error", e.what()));
        opts.log(e.what());
        return 1;
      }
      switch (msg.type) {
        case WireMessage::Type::stop:
          maybe_snapshot(/*force=*/true);
          return 0;
        case WireMessage::Type::reward: {
          if (msg.iteration != suggestion.iteration) {
            const std::string what = "protocol error: reward for iteration " +
                                     std::to_string(msg.iteration) + ", expected " +
                                     std::to_string(suggestion.iteration);
            transport.write_line(control_line("error", what));
            opts.log(what);
            return 1;
          }
          if (!std::isfinite(msg.value)) {
            transport.write_line(control_line(
                "error", "non-finite reward for iteration " + std::to_string(msg.iteration) +
                             "; iteration not consumed"));
            continue;  // keep waiting for a valid reward
          }
          controller->observe(msg.value);
          observed = true;
          break;
        }
        default: {
          const std::string what =
              "protocol error: unexpected '" + wire_type_name(msg.type) + "' message";
          transport.write_line(control_line("error", what));
          opts.log(what);
          return 1;
        }
      }
    }
    maybe_snapshot(/*force=*/false);
  }

  maybe_snapshot(/*force=*/true);
  transport.write_line(control_line("stop", {{"iteration", controller->iteration()}}));
  return 0;
}

}  // namespace hyperctl

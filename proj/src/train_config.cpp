#include "spad/train_config.hpp"

#include <cmath>
#include <string>

#include "spad/errors.hpp"

namespace spad {

void TrainConfig::validate() const {
  auto fail = [](const std::string& field, const std::string& why) {
    throw ConfigError("train." + field + ": " + why);
  };
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) fail("learning_rate", "must be positive");
  if (!(momentum >= 0.0 && momentum < 1.0)) fail("momentum", "must be in [0,1)");
  if (!(weight_decay >= 0.0) || !std::isfinite(weight_decay)) fail("weight_decay", "must be >= 0");
  if (!(lr_gamma > 0.0) || !std::isfinite(lr_gamma)) fail("lr_gamma", "must be positive");
  if (batch_size < 2) fail("batch_size", "must be >= 2");
  if (epochs < 1) fail("epochs", "must be >= 1");
  if (warmup_epochs < 0) fail("warmup_epochs", "must be >= 0");
  if (warmup_epochs >= epochs) fail("warmup_epochs", "must be smaller than epochs");
  if (!(m >= 1.0)) fail("m", "must be >= 1");
  if (!(r > 0.0)) fail("r", "must be positive");
  if (!(running_momentum >= 0.0 && running_momentum < 1.0)) fail("running_momentum", "must be in [0,1)");
}

double TrainConfig::learning_rate_at(std::int64_t epoch) const {
  return learning_rate * std::pow(lr_gamma, static_cast<double>(epoch));
}

nlohmann::json TrainConfig::to_json() const {
  return {{"learning_rate", learning_rate},
          {"momentum", momentum},
          {"weight_decay", weight_decay},
          {"lr_gamma", lr_gamma},
          {"batch_size", batch_size},
          {"epochs", epochs},
          {"warmup_epochs", warmup_epochs},
          {"m", m},
          {"r", r},
          {"seed", seed},
          {"spl_enabled", spl_enabled},
          {"running_statistics", running_statistics},
          {"running_momentum", running_momentum}};
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
  TrainConfig c;
  try {
    c.learning_rate = j.at("learning_rate").get<double>();
    c.momentum = j.at("momentum").get<double>();
    c.weight_decay = j.at("weight_decay").get<double>();
    c.lr_gamma = j.at("lr_gamma").get<double>();
    c.batch_size = j.at("batch_size").get<std::int64_t>();
    c.epochs = j.at("epochs").get<std::int64_t>();
    c.warmup_epochs = j.at("warmup_epochs").get<std::int64_t>();
    c.m = j.at("m").get<double>();
    c.r = j.at("r").get<double>();
    c.seed = j.at("seed").get<std::uint64_t>();
    c.spl_enabled = j.at("spl_enabled").get<bool>();
    c.running_statistics = j.at("running_statistics").get<bool>();
    c.running_momentum = j.at("running_momentum").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed train config: ") + e.what());
  }
  return c;
}

}  // namespace spad

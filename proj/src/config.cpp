#include "reem/errors.hpp"
#include "reem/pipeline.hpp"
#include "text_util.hpp"

#include <boost/algorithm/string/trim.hpp>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <cmath>
#include <functional>
#include <sstream>

namespace reem::pipeline {

namespace {

using Setter = std::function<void(ExperimentConfig&, const std::string&)>;

std::uint64_t to_count(const std::string& s) {
  std::size_t used = 0;
  unsigned long long v = 0;
  try {
    v = std::stoull(s, &used);
  } catch (const std::logic_error&) {
    used = 0;
  }
  if (s.empty() || s.front() == '-' || used != s.size()) throw std::invalid_argument("expected a nonnegative integer");
  return v;
}

int to_int(const std::string& s) {
  std::size_t used = 0;
  int v = 0;
  try {
    v = std::stoi(s, &used);
  } catch (const std::logic_error&) {
    used = 0;
  }
  if (s.empty() || used != s.size()) throw std::invalid_argument("expected an integer");
  return v;
}

double to_double(const std::string& s) {
  const double v = detail::parse_double(s, "value");
  if (!std::isfinite(v)) throw std::invalid_argument("expected a finite number");
  return v;
}

bool to_bool(const std::string& s) {
  if (s == "true" || s == "1" || s == "yes") return true;
  if (s == "false" || s == "0" || s == "no") return false;
  throw std::invalid_argument("expected true or false");
}

/// Accepts a date (YYYY-MM-DD) or a full YYYY-MM-DDTHH:MM timestamp.
Timestamp to_time(const std::string& s) {
  return parse_iso8601(s.size() == 10 ? s + "T00:00" : s);
}

std::vector<std::string> to_list(const std::string& s) {
  std::vector<std::string> out;
  for (auto part : detail::split(s, ',')) {
    std::string item(part);
    boost::algorithm::trim(item);
    if (item.empty()) throw std::invalid_argument("empty list item");
    out.push_back(std::move(item));
  }
  return out;
}

template <class T>
std::vector<T> map_list(const std::string& s, T (*f)(const std::string&)) {
  std::vector<T> out;
  for (const auto& item : to_list(s)) out.push_back(f(item));
  return out;
}

std::size_t to_size(const std::string& s) { return static_cast<std::size_t>(to_count(s)); }

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"experiment.seed", [](auto& c, auto& v) { c.seed = to_count(v); }},
      {"experiment.out_dir", [](auto& c, auto& v) { c.out_dir = v; }},
      {"experiment.rooms", [](auto& c, auto& v) { c.rooms = to_size(v); }},
      {"experiment.train_fraction", [](auto& c, auto& v) { c.train_fraction = to_double(v); }},
      {"experiment.sampling_minutes", [](auto& c, auto& v) { c.sampling_minutes = to_int(v); }},
      {"experiment.start", [](auto& c, auto& v) { c.start = to_time(v); }},
      {"experiment.days", [](auto& c, auto& v) { c.days = to_int(v); }},
      {"experiment.temporal_split", [](auto& c, auto& v) { c.temporal_split = to_double(v); }},

      {"models.methods",
       [](auto& c, auto& v) {
         c.methods.clear();
         for (const auto& m : to_list(v)) c.methods.push_back(models::method_from_string(m));
       }},
      {"models.lookback", [](auto& c, auto& v) { c.lookback = to_size(v); }},
      {"models.ridge", [](auto& c, auto& v) { c.ridge = to_double(v); }},
      {"models.dict_max_terms", [](auto& c, auto& v) { c.dict_max_terms = to_size(v); }},

      {"train.alpha", [](auto& c, auto& v) { c.train.alpha = to_double(v); }},
      {"train.beta", [](auto& c, auto& v) { c.train.beta = to_double(v); }},
      {"train.lambda", [](auto& c, auto& v) { c.train.lambda = to_double(v); }},
      {"train.gamma", [](auto& c, auto& v) { c.train.gamma = to_double(v); }},
      {"train.lr_stage1", [](auto& c, auto& v) { c.train.lr_stage1 = to_double(v); }},
      {"train.lr_stage2", [](auto& c, auto& v) { c.train.lr_stage2 = to_double(v); }},
      {"train.batch_size", [](auto& c, auto& v) { c.train.batch_size = to_size(v); }},
      {"train.stage1_epochs", [](auto& c, auto& v) { c.train.stage1_epochs = to_size(v); }},
      {"train.stage2_epochs", [](auto& c, auto& v) { c.train.stage2_epochs = to_size(v); }},
      {"train.steps_per_epoch", [](auto& c, auto& v) { c.train.steps_per_epoch = to_size(v); }},
      {"train.c_min", [](auto& c, auto& v) { c.train.c_min = to_double(v); }},
      {"train.c_max", [](auto& c, auto& v) { c.train.c_max = to_double(v); }},
      {"train.max_random_selection", [](auto& c, auto& v) { c.train.max_random_selection = to_size(v); }},
      {"train.mean_reward_baseline", [](auto& c, auto& v) { c.train.mean_reward_baseline = to_bool(v); }},
      {"train.policy_hidden", [](auto& c, auto& v) { c.train.policy_hidden = to_size(v); }},
      {"train.variable_count_mode",
       [](auto& c, auto& v) {
         if (v == "distinct") c.train.variable_count_mode = models::VariableCountMode::DistinctVariables;
         else if (v == "terms") c.train.variable_count_mode = models::VariableCountMode::TermCount;
         else throw std::invalid_argument("expected distinct or terms");
       }},

      {"encoder.hidden", [](auto& c, auto& v) { c.encoder.hidden = to_size(v); }},
      {"encoder.kernel", [](auto& c, auto& v) { c.encoder.kernel = to_size(v); }},
      {"encoder.dilations", [](auto& c, auto& v) { c.encoder.dilations = map_list<std::size_t>(v, to_size); }},
      {"encoder.rank_errors", [](auto& c, auto& v) { c.encoder.rank_errors = to_bool(v); }},

      {"baselines.top_n", [](auto& c, auto& v) { c.top_n = to_size(v); }},
      {"baselines.search_budget", [](auto& c, auto& v) { c.search_budget = to_size(v); }},

      {"mpc.setpoint", [](auto& c, auto& v) { c.mpc.setpoint = to_double(v); }},
      {"mpc.band", [](auto& c, auto& v) { c.mpc.band = to_double(v); }},
      {"mpc.comfort_start_hour", [](auto& c, auto& v) { c.mpc.comfort_start_hour = to_double(v); }},
      {"mpc.comfort_end_hour", [](auto& c, auto& v) { c.mpc.comfort_end_hour = to_double(v); }},
      {"mpc.comfort_weight", [](auto& c, auto& v) { c.mpc.comfort_weight = to_double(v); }},
      {"mpc.energy_weight", [](auto& c, auto& v) { c.mpc.energy_weight = to_double(v); }},
      {"mpc.penalty_weight", [](auto& c, auto& v) { c.mpc.penalty_weight = to_double(v); }},
      {"mpc.t_min", [](auto& c, auto& v) { c.mpc.t_min = to_double(v); }},
      {"mpc.t_max", [](auto& c, auto& v) { c.mpc.t_max = to_double(v); }},
      {"mpc.u_max", [](auto& c, auto& v) { c.mpc.u_max = to_double(v); }},
      {"mpc.horizon", [](auto& c, auto& v) { c.mpc.horizon = to_size(v); }},
      {"mpc.candidates", [](auto& c, auto& v) { c.mpc.candidates = map_list<double>(v, to_double); }},
      {"mpc.tracking_margin", [](auto& c, auto& v) { c.mpc.tracking_margin = to_double(v); }},
      {"mpc.lead_hours", [](auto& c, auto& v) { c.mpc.lead_hours = to_double(v); }},
      {"mpc.start", [](auto& c, auto& v) { c.closed_loop.start = to_time(v); }},
      {"mpc.days", [](auto& c, auto& v) { c.closed_loop.days = to_int(v); }},
      {"mpc.warmup_days", [](auto& c, auto& v) { c.closed_loop.warmup_days = to_int(v); }},
      {"mpc.sensor_noise_sd", [](auto& c, auto& v) { c.closed_loop.sensor_noise_sd = to_double(v); }},
      {"mpc.rooms", [](auto& c, auto& v) { c.mpc_rooms = to_size(v); }},
  };
  return table;
}

std::string join(const std::vector<std::string>& items) {
  std::string out;
  for (const auto& s : items) out += (out.empty() ? "" : ", ") + s;
  return out;
}

}  // namespace

agents::TrainConfig ExperimentConfig::train_config() const {
  auto c = train;
  c.seed = seed;
  return c;
}

enc::EncoderConfig ExperimentConfig::encoder_config(std::size_t n_models) const {
  auto c = encoder;
  c.lookback = lookback;
  c.n_models = n_models;
  return c;
}

mpc::MpcConfig ExperimentConfig::mpc_config() const {
  auto c = mpc;
  c.sampling_minutes = sampling_minutes;
  return c;
}

mpc::ClosedLoopConfig ExperimentConfig::closed_loop_config() const {
  auto c = closed_loop;
  c.lookback = lookback;
  c.seed = seed;
  return c;
}

std::size_t ExperimentConfig::train_rooms() const {
  return static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(rooms)));
}

void ExperimentConfig::validate() const {
  if (rooms < 2) throw ConfigError("experiment.rooms must be at least 2");
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw ConfigError("experiment.train_fraction must be in (0, 1)");
  if (train_rooms() < 1 || test_rooms() < 1) {
    throw ConfigError("experiment.train_fraction leaves no train or no test rooms");
  }
  if (sampling_minutes <= 0 || 1440 % sampling_minutes != 0) {
    throw ConfigError("experiment.sampling_minutes must divide a day");
  }
  if (days < 2) throw ConfigError("experiment.days must be at least 2");
  if (!(temporal_split > 0.0 && temporal_split < 1.0)) throw ConfigError("experiment.temporal_split must be in (0, 1)");
  if (methods.empty()) throw ConfigError("models.methods is empty");
  if (lookback < 2) throw ConfigError("models.lookback must be at least 2");
  if (!(ridge >= 0.0)) throw ConfigError("models.ridge must be nonnegative");
  if (dict_max_terms < 1) throw ConfigError("models.dict_max_terms must be positive");
  if (top_n < 1) throw ConfigError("baselines.top_n must be positive");
  if (mpc_rooms > test_rooms()) throw ConfigError("mpc.rooms exceeds the number of test rooms");
  train_config().validate();
  encoder_config(methods.size() * train_rooms()).validate();
  mpc_config().validate();
  closed_loop_config().validate();
}

ExperimentConfig ExperimentConfig::parse(const std::string& text) {
  boost::property_tree::ptree tree;
  std::istringstream in(text);
  try {
    boost::property_tree::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError(std::string("malformed INI: ") + e.message() + " (line " + std::to_string(e.line()) + ")");
  }
  ExperimentConfig cfg;
  std::vector<std::string> unknown, invalid;
  for (const auto& [section, body] : tree) {
    if (body.empty()) {
      unknown.push_back(section);  // a key outside any section
      continue;
    }
    for (const auto& [key, value] : body) {
      const std::string name = section + "." + key;
      const auto it = setters().find(name);
      if (it == setters().end()) {
        unknown.push_back(name);
        continue;
      }
      std::string raw = value.get_value<std::string>();
      boost::algorithm::trim(raw);
      try {
        it->second(cfg, raw);
      } catch (const std::exception& e) {
        invalid.push_back(name + " = '" + raw + "' (" + e.what() + ")");
      }
    }
  }
  std::string message;
  if (!unknown.empty()) message += "unknown keys: " + join(unknown);
  if (!invalid.empty()) message += (message.empty() ? "" : "; ") + std::string("invalid values: ") + join(invalid);
  if (!message.empty()) throw ConfigError(message);
  cfg.validate();
  return cfg;
}

ExperimentConfig ExperimentConfig::load(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw ConfigError("config file not found: " + path.string());
  auto in = detail::open_for_read(path);
  std::ostringstream text;
  text << in.rdbuf();
  return parse(text.str());
}

}  // namespace reem::pipeline

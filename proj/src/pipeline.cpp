#include "reem/pipeline.hpp"

#include "reem/errors.hpp"
#include "text_util.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace reem::pipeline {

using json = nlohmann::ordered_json;

Rooms simulate_rooms(const ExperimentConfig& cfg) {
  cfg.validate();
  Rooms out;
  const std::size_t n_train = cfg.train_rooms();
  for (std::size_t i = 0; i < cfg.rooms; ++i) {
    char id[32];
    std::snprintf(id, sizeof id, "room%02zu", i);
    auto profile = sim::sample_room_profile(id, cfg.seed * 1000 + i, cfg.start);
    auto data = sim::generate_room_dataset(profile, {cfg.start, cfg.days}, cfg.sampling_minutes);
    RoomSet& set = i < n_train ? out.train : out.test;
    set.profiles.push_back(std::move(profile));
    set.data.push_back(std::move(data));
  }
  return out;
}

std::pair<sim::RoomDataset, sim::RoomDataset> temporal_split(const sim::RoomDataset& data, double fraction) {
  if (!(fraction > 0.0 && fraction < 1.0)) throw ContractViolation("temporal split fraction must be in (0, 1)");
  const auto cut = static_cast<std::size_t>(fraction * static_cast<double>(data.size()));
  return {data.slice(0, cut), data.slice(cut, data.size())};
}

models::ModelLibrary fit_library(const RoomSet& train, const ExperimentConfig& cfg) {
  models::ModelLibrary library;
  for (const auto& data : train.data) {
    const auto early = temporal_split(data, cfg.temporal_split).first;
    for (const auto method : cfg.methods) {
      if (method == models::FitMethod::Mlr) {
        library.add(models::fit_least_squares(early, models::default_mlr_spec(cfg.lookback), cfg.ridge));
      } else {
        models::DictionaryFitOptions options;
        options.max_terms = cfg.dict_max_terms;
        options.forced = {"u@0"};
        options.ridge = cfg.ridge;
        library.add(models::fit_dictionary_regression(early, models::default_dictionary_spec(cfg.lookback), options));
      }
    }
  }
  return library;
}

Streams prepare_streams(const Rooms& rooms, const models::ModelLibrary& library, const ExperimentConfig& cfg) {
  Streams s;
  for (const auto& data : rooms.train.data) {
    s.train.push_back(streams::prepare_stream(temporal_split(data, cfg.temporal_split).second, library, cfg.lookback));
  }
  for (const auto& data : rooms.test.data) {
    auto [early, late] = temporal_split(data, cfg.temporal_split);
    s.validation.push_back(streams::prepare_stream(early, library, cfg.lookback));
    s.test.push_back(streams::prepare_stream(late, library, cfg.lookback));
  }
  return s;
}

TrainedAgents train_agents(const Streams& s, const models::ModelLibrary& library, const ExperimentConfig& cfg) {
  const auto ecfg = cfg.encoder_config(library.size());
  const auto tcfg = cfg.train_config();
  return {agents::train_two_stage(s.train, library, ecfg, tcfg), agents::train_single_tier(s.train, library, ecfg, tcfg)};
}

std::map<std::string, ensemble::EvaluationResult> evaluate_methods(const Streams& s,
                                                                   const models::ModelLibrary& library,
                                                                   const agents::AgentSet& hierarchical,
                                                                   const agents::AgentSet& single_tier,
                                                                   const ExperimentConfig& cfg) {
  if (hierarchical.kind != agents::AgentKind::Hierarchical || single_tier.kind != agents::AgentKind::SingleTier) {
    throw ContractViolation("evaluate_methods: agent kinds swapped");
  }
  ensemble::RewardSettings rewards{cfg.train.alpha, cfg.train.beta,
                                   library.variable_counts(cfg.train.variable_count_mode)};
  std::map<std::string, ensemble::Strategy> strategies;
  strategies["reem"] = ensemble::agent_strategy(std::make_shared<const agents::AgentSet>(hierarchical));
  strategies["single_tier_rl"] = ensemble::agent_strategy(std::make_shared<const agents::AgentSet>(single_tier));
  strategies["heuristic_top_n"] = baselines::heuristic_strategy(cfg.top_n);
  strategies["equal_weight_all"] = baselines::fixed_strategy(baselines::equal_weights(library.size()));
  strategies["static_search"] =
      baselines::fixed_strategy(baselines::static_search_weights(s.validation, cfg.search_budget, cfg.seed));
  strategies["best_single_oracle"] = baselines::best_single_oracle_strategy();

  std::map<std::string, ensemble::EvaluationResult> out;
  for (const auto& name : kMethods) out[name] = ensemble::run_evaluation(s.test, strategies.at(name), name, rewards);
  return out;
}

ErrorMetrics compute_metrics(std::span<const double> predictions, std::span<const double> truths) {
  if (predictions.empty() || predictions.size() != truths.size()) {
    throw ContractViolation("compute_metrics needs equal, nonzero lengths");
  }
  ErrorMetrics m;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const double e = predictions[i] - truths[i];
    m.mae += std::abs(e);
    m.mse += e * e;
  }
  m.mae /= static_cast<double>(predictions.size());
  m.mse /= static_cast<double>(predictions.size());
  return m;
}

MetricsReport build_report(const std::map<std::string, ensemble::EvaluationResult>& results, std::uint64_t seed) {
  MetricsReport report;
  report.seed = seed;
  for (const auto& [name, r] : results) {
    auto copy = r;
    copy.records.clear();
    report.methods[name] = std::move(copy);
  }
  return report;
}

namespace {

/// Known methods first in their canonical order, then any others by name.
std::vector<std::string> report_order(const MetricsReport& report) {
  std::vector<std::string> order;
  for (const auto& m : kMethods) {
    if (report.methods.count(m)) order.push_back(m);
  }
  for (const auto& [m, r] : report.methods) {
    if (std::find(order.begin(), order.end(), m) == order.end()) order.push_back(m);
  }
  return order;
}

}  // namespace

std::string MetricsReport::to_json_string() const {
  json j;
  j["seed"] = seed;
  j["version"] = kVersion;
  const auto order = report_order(*this);
  json methods_json = json::object();
  for (const auto& name : order) {
    const auto& r = methods.at(name);
    json m;
    m["mae"] = r.mae;
    m["mse"] = r.mse;
    m["mean_models"] = r.mean_models;
    json rooms = json::array();
    for (const auto& room : r.rooms) {
      rooms.push_back({{"room", room.room}, {"steps", room.steps}, {"mae", room.mae}, {"mse", room.mse}});
    }
    m["rooms"] = std::move(rooms);
    methods_json[name] = std::move(m);
  }
  j["methods"] = std::move(methods_json);
  // Relative MAE improvement of each method over each other one.
  json imp = json::object();
  for (const auto& name : order) {
    json row = json::object();
    for (const auto& ref : order) {
      if (ref == name) continue;
      const double ref_mae = methods.at(ref).mae;
      row[ref] = ref_mae > 0.0 ? json(ensemble::improvement_percent(ref_mae, methods.at(name).mae)) : json(nullptr);
    }
    imp[name] = std::move(row);
  }
  j["mae_improvement_percent"] = std::move(imp);
  return j.dump(2);
}

MetricsReport MetricsReport::from_json_string(const std::string& text) {
  MetricsReport report;
  try {
    const json j = json::parse(text);
    report.seed = j.at("seed").get<std::uint64_t>();
    for (const auto& [name, m] : j.at("methods").items()) {
      ensemble::EvaluationResult r;
      r.method = name;
      r.mae = m.at("mae").get<double>();
      r.mse = m.at("mse").get<double>();
      r.mean_models = m.at("mean_models").get<double>();
      for (const auto& room : m.at("rooms")) {
        r.rooms.push_back({room.at("room").get<std::string>(), room.at("steps").get<std::size_t>(),
                           room.at("mae").get<double>(), room.at("mse").get<double>()});
      }
      report.methods[name] = std::move(r);
    }
  } catch (const json::exception& e) {
    throw ContractViolation(std::string("malformed metrics report: ") + e.what());
  }
  return report;
}

std::string format_report_csv(const MetricsReport& report) {
  std::ostringstream out;
  out << "method,mae,mse,mean_models\n";
  for (const auto& name : report_order(report)) {
    const auto& r = report.methods.at(name);
    out << name << ',' << detail::format_double(r.mae) << ',' << detail::format_double(r.mse) << ','
        << detail::format_double(r.mean_models) << '\n';
  }
  return out.str();
}

std::string format_report_text(const MetricsReport& report) {
  std::ostringstream out;
  char line[160];
  std::snprintf(line, sizeof line, "%-20s %10s %10s %8s %12s\n", "method", "MAE", "MSE", "models", "Imp% vs best");
  out << "seed " << report.seed << "\n" << line;
  // Improvement is reported against the best of the deployable baselines.
  double best = 0.0;
  for (const auto& b : kReferenceBaselines) {
    const auto it = report.methods.find(b);
    if (it != report.methods.end() && (best == 0.0 || it->second.mae < best)) best = it->second.mae;
  }
  for (const auto& name : report_order(report)) {
    const auto& r = report.methods.at(name);
    const double imp = best > 0.0 ? ensemble::improvement_percent(best, r.mae) : 0.0;
    std::snprintf(line, sizeof line, "%-20s %10.5f %10.5f %8.2f %12.2f\n", name.c_str(), r.mae, r.mse, r.mean_models,
                  imp);
    out << line;
  }
  return out.str();
}

OfflineBenchmark run_offline_benchmark(const ExperimentConfig& cfg) {
  OfflineBenchmark b;
  b.rooms = simulate_rooms(cfg);
  b.library = fit_library(b.rooms.train, cfg);
  b.streams = prepare_streams(b.rooms, b.library, cfg);
  b.agents = train_agents(b.streams, b.library, cfg);
  b.results = evaluate_methods(b.streams, b.library, b.agents.hierarchical.agents, b.agents.single_tier.agents, cfg);
  return b;
}

std::vector<MpcComparison> run_mpc_study(const Rooms& rooms, const models::ModelLibrary& library,
                                         const agents::AgentSet& hierarchical, const ExperimentConfig& cfg) {
  const auto mcfg = cfg.mpc_config();
  const auto lcfg = cfg.closed_loop_config();
  auto shared_agents = std::make_shared<const agents::AgentSet>(hierarchical);
  auto shared_library = std::make_shared<const models::ModelLibrary>(library);
  std::vector<MpcComparison> out;
  for (std::size_t i = 0; i < cfg.mpc_rooms; ++i) {
    const auto& profile = rooms.test.profiles.at(i);
    MpcComparison c;
    c.room = profile.id;

    mpc::MpcController ens(std::make_unique<mpc::EnsemblePredictor>(shared_agents, shared_library), mcfg);
    c.ensemble = mpc::closed_loop_simulate(profile, ens, mcfg, lcfg, "reem_mpc");

    models::DictionaryFitOptions options;
    options.max_terms = cfg.dict_max_terms;
    options.forced = {"u@0"};
    options.ridge = cfg.ridge;
    auto own = models::fit_dictionary_regression(rooms.test.data.at(i), models::default_dictionary_spec(cfg.lookback),
                                                 options);
    mpc::MpcController custom(std::make_unique<mpc::BaseModelPredictor>(std::move(own)), mcfg);
    c.customized = mpc::closed_loop_simulate(profile, custom, mcfg, lcfg, "customized_mpc");

    mpc::MpcController phys(std::make_unique<mpc::PhysicsPredictor>(profile.params), mcfg);
    c.physics = mpc::closed_loop_simulate(profile, phys, mcfg, lcfg, "physics_mpc");

    mpc::ThermostatController thermo(mcfg);
    c.thermostat = mpc::closed_loop_simulate(profile, thermo, mcfg, lcfg, "thermostat");
    out.push_back(std::move(c));
  }
  return out;
}

}  // namespace reem::pipeline

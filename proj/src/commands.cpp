#include "reem/commands.hpp"

#include "reem/errors.hpp"
#include "text_util.hpp"

#include <json.hpp>

#include <chrono>
#include <sstream>

namespace reem::cli {

using json = nlohmann::ordered_json;
namespace fs = std::filesystem;

namespace {

void require(const Layout& layout, const fs::path& path, const std::string& producer) {
  if (!fs::exists(path)) {
    throw PrerequisiteError("missing artifact '" + fs::relative(path, layout.root).generic_string() + "' in " +
                            layout.root.string() + "; run the '" + producer + "' command first");
  }
}

std::string read_text(const fs::path& path) {
  auto in = detail::open_for_read(path);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void write_text(const fs::path& path, const std::string& text) {
  auto out = detail::open_for_write(path);
  out << text;
}

std::vector<std::string> room_ids(const json& list) {
  std::vector<std::string> ids;
  for (const auto& v : list) ids.push_back(v.get<std::string>());
  return ids;
}

models::ModelLibrary load_library(const Layout& layout) {
  require(layout, layout.library(), "fit");
  return models::ModelLibrary::load(layout.library());
}

agents::AgentSet load_agents(const Layout& layout, const fs::path& path) {
  require(layout, path, "train");
  return agents::AgentSet::load(path);
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

pipeline::Rooms load_rooms(const Layout& layout) {
  require(layout, layout.rooms_index(), "simulate");
  json index;
  try {
    index = json::parse(read_text(layout.rooms_index()));
  } catch (const json::exception& e) {
    throw ContractViolation(std::string("malformed rooms index: ") + e.what());
  }
  pipeline::Rooms rooms;
  for (const auto& [key, set] : {std::pair{"train", &rooms.train}, std::pair{"test", &rooms.test}}) {
    for (const auto& id : room_ids(index.at(key))) {
      require(layout, layout.dataset(id), "simulate");
      require(layout, layout.profile(id), "simulate");
      set->profiles.push_back(sim::read_profile_json(layout.profile(id)));
      set->data.push_back(sim::read_dataset_csv(layout.dataset(id), id));
    }
  }
  return rooms;
}

void simulate(const pipeline::ExperimentConfig& cfg) {
  const Layout layout{cfg.out_dir};
  const auto rooms = pipeline::simulate_rooms(cfg);
  json index;
  index["seed"] = cfg.seed;
  index["start"] = format_iso8601(cfg.start);
  index["days"] = cfg.days;
  index["sampling_minutes"] = cfg.sampling_minutes;
  index["train"] = json::array();
  index["test"] = json::array();
  for (const auto& [key, set] : {std::pair{"train", &rooms.train}, std::pair{"test", &rooms.test}}) {
    for (std::size_t i = 0; i < set->profiles.size(); ++i) {
      const auto& id = set->profiles[i].id;
      sim::write_dataset_csv(set->data[i], layout.dataset(id));
      sim::write_profile_json(set->profiles[i], layout.profile(id));
      index[key].push_back(id);
    }
  }
  write_text(layout.rooms_index(), index.dump(2) + "\n");
}

void fit(const pipeline::ExperimentConfig& cfg) {
  const Layout layout{cfg.out_dir};
  const auto rooms = load_rooms(layout);
  pipeline::fit_library(rooms.train, cfg).save(layout.library());
}

void train(const pipeline::ExperimentConfig& cfg) {
  const Layout layout{cfg.out_dir};
  const auto rooms = load_rooms(layout);
  const auto library = load_library(layout);
  const auto s = pipeline::prepare_streams(rooms, library, cfg);
  const auto trained = pipeline::train_agents(s, library, cfg);
  trained.hierarchical.agents.save(layout.hierarchical());
  trained.single_tier.agents.save(layout.single_tier());
  agents::write_training_log_csv(trained.hierarchical.log, layout.training_log());
  agents::write_training_log_csv(trained.single_tier.log, layout.single_tier_log());
}

void evaluate(const pipeline::ExperimentConfig& cfg) {
  const Layout layout{cfg.out_dir};
  const auto t0 = std::chrono::steady_clock::now();
  const auto rooms = load_rooms(layout);
  const auto library = load_library(layout);
  const auto hierarchical = load_agents(layout, layout.hierarchical());
  const auto single_tier = load_agents(layout, layout.single_tier());
  const auto s = pipeline::prepare_streams(rooms, library, cfg);
  const auto results = pipeline::evaluate_methods(s, library, hierarchical, single_tier, cfg);
  for (const auto& [name, r] : results) ensemble::write_records_csv(r.records, layout.records(name));
  write_text(layout.metrics(), pipeline::build_report(results, cfg.seed).to_json_string() + "\n");
  // Timings live apart from the metrics so that reruns compare byte for byte.
  json info;
  info["seed"] = cfg.seed;
  info["version"] = pipeline::kVersion;
  info["evaluate_seconds"] = seconds_since(t0);
  write_text(layout.run_info(), info.dump(2) + "\n");
}

void mpc_run(const pipeline::ExperimentConfig& cfg) {
  const Layout layout{cfg.out_dir};
  const auto rooms = load_rooms(layout);
  const auto library = load_library(layout);
  const auto hierarchical = load_agents(layout, layout.hierarchical());
  const auto study = pipeline::run_mpc_study(rooms, library, hierarchical, cfg);
  std::ostringstream summary;
  summary << "room,controller,compliance,energy_kwh,comfort_steps,fallbacks\n";
  for (const auto& c : study) {
    for (const auto* r : {&c.ensemble, &c.customized, &c.physics, &c.thermostat}) {
      mpc::write_closed_loop_csv(*r, layout.closed_loop(c.room, r->controller));
      summary << c.room << ',' << r->controller << ',' << detail::format_double(r->compliance) << ','
              << detail::format_double(r->energy_kwh) << ',' << r->comfort_steps << ',' << r->fallbacks << '\n';
    }
  }
  write_text(layout.mpc_summary(), summary.str());
}

void report(const pipeline::ExperimentConfig& cfg) {
  const Layout layout{cfg.out_dir};
  std::map<std::string, ensemble::EvaluationResult> results;
  for (const auto& method : pipeline::kMethods) {
    require(layout, layout.records(method), "evaluate");
    results[method] = ensemble::metrics_from_records(ensemble::read_records_csv(layout.records(method)), method);
  }
  const auto rep = pipeline::build_report(results, cfg.seed);
  write_text(layout.report_csv(), pipeline::format_report_csv(rep));
  std::string text = pipeline::format_report_text(rep);
  if (fs::exists(layout.mpc_summary())) text += "\nclosed-loop control\n" + read_text(layout.mpc_summary());
  write_text(layout.report_text(), text);
}

void run_command(const pipeline::ExperimentConfig& cfg, const std::string& command) {
  if (command == "simulate") simulate(cfg);
  else if (command == "fit") fit(cfg);
  else if (command == "train") train(cfg);
  else if (command == "evaluate") evaluate(cfg);
  else if (command == "mpc-run") mpc_run(cfg);
  else if (command == "report") report(cfg);
  else throw ConfigError("unknown command '" + command + "'");
}

}  // namespace reem::cli

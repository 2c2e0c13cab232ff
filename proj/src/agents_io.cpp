#include "reem/agents.hpp"
#include "reem/errors.hpp"

#include "text_util.hpp"

#include <json.hpp>

#include <sstream>

namespace reem::agents {

void AgentSet::save(const std::filesystem::path& path) const {
  nlohmann::ordered_json doc;
  doc["kind"] = kind == AgentKind::Hierarchical ? "hierarchical" : "single_tier";
  doc["encoder"] = {{"hidden", encoder.hidden},         {"kernel", encoder.kernel},
                    {"dilations", encoder.dilations},   {"lookback", encoder.lookback},
                    {"n_models", encoder.n_models},     {"rank_errors", encoder.rank_errors}};
  doc["policy_hidden"] = shape.hidden;
  doc["c_min"] = c_min;
  doc["c_max"] = c_max;
  doc["params"] = nlohmann::ordered_json::parse(params.to_json_string());
  auto out = detail::open_for_write(path);
  out << doc.dump() << '\n';
}

AgentSet AgentSet::load(const std::filesystem::path& path) {
  auto in = detail::open_for_read(path);
  std::stringstream ss;
  ss << in.rdbuf();
  nlohmann::ordered_json doc;
  try {
    doc = nlohmann::ordered_json::parse(ss.str());
  } catch (const nlohmann::json::exception& e) {
    throw ContractViolation("agent file " + path.string() + ": " + e.what());
  }
  AgentSet a;
  const auto kind = doc.at("kind").get<std::string>();
  if (kind == "hierarchical") {
    a.kind = AgentKind::Hierarchical;
  } else if (kind == "single_tier") {
    a.kind = AgentKind::SingleTier;
  } else {
    throw ContractViolation("agent file: unknown kind '" + kind + "'");
  }
  const auto& e = doc.at("encoder");
  a.encoder.hidden = e.at("hidden").get<std::size_t>();
  a.encoder.kernel = e.at("kernel").get<std::size_t>();
  a.encoder.dilations = e.at("dilations").get<std::vector<std::size_t>>();
  a.encoder.lookback = e.at("lookback").get<std::size_t>();
  a.encoder.n_models = e.at("n_models").get<std::size_t>();
  a.encoder.rank_errors = e.at("rank_errors").get<bool>();
  a.encoder.validate();
  a.shape = {a.encoder.state_dim(), a.encoder.n_models, doc.at("policy_hidden").get<std::size_t>()};
  a.c_min = doc.at("c_min").get<double>();
  a.c_max = doc.at("c_max").get<double>();
  a.params = diff::ParameterSet::from_json_string(doc.at("params").dump());
  return a;
}

void write_training_log_csv(const std::vector<TrainingLogRow>& log, const std::filesystem::path& path) {
  using detail::format_double;
  auto out = detail::open_for_write(path);
  out << kTrainingLogHeader << '\n';
  for (const auto& row : log) {
    const auto& m = row.mean;
    out << row.epoch << ',' << row.stage << ',' << format_double(m.r_loss) << ',' << format_double(m.r_mod) << ','
        << format_double(m.r_var) << ',' << format_double(m.r_base) << ',' << format_double(m.r_h) << ','
        << format_double(m.r_l) << '\n';
  }
}

}  // namespace reem::agents

#include "reem/errors.hpp"
#include "reem/models.hpp"

#include "text_util.hpp"

#include <json.hpp>

#include <sstream>

namespace reem::models {

std::string ModelLibrary::to_json_string() const {
  nlohmann::ordered_json doc = nlohmann::ordered_json::array();
  for (std::size_t id = 0; id < models_.size(); ++id) {
    const BaseModel& m = models_[id];
    nlohmann::ordered_json j;
    j["id"] = id;
    j["method"] = method_name(m.method);
    j["source_room"] = m.source_room;
    j["training_period"] = m.training_period;
    j["spec"] = {{"lookback", m.spec.lookback}, {"features", m.spec.texts()}};
    j["coefficients"] = m.coefficients;
    j["intercept"] = m.intercept;
    j["variable_count"] = m.variable_count;
    doc.push_back(std::move(j));
  }
  return doc.dump(2);
}

ModelLibrary ModelLibrary::from_json_string(std::string_view text) {
  const auto doc = nlohmann::json::parse(text);
  if (!doc.is_array()) throw ContractViolation("model library: expected a JSON array");
  ModelLibrary lib;
  for (std::size_t i = 0; i < doc.size(); ++i) {
    const auto& j = doc[i];
    if (j.at("id").get<std::size_t>() != i) {
      throw ContractViolation("model library: ids must be dense and ordered (entry " + std::to_string(i) + ")");
    }
    BaseModel m;
    m.method = method_from_string(j.at("method").get<std::string>());
    m.source_room = j.at("source_room").get<std::string>();
    m.training_period = j.value("training_period", std::string{});
    m.spec = FeatureSpec::parse(j.at("spec").at("lookback").get<std::size_t>(),
                                j.at("spec").at("features").get<std::vector<std::string>>());
    m.coefficients = j.at("coefficients").get<std::vector<double>>();
    m.intercept = j.at("intercept").get<double>();
    m.variable_count = j.at("variable_count").get<int>();
    m.validate();
    lib.add(std::move(m));
  }
  return lib;
}

void ModelLibrary::save(const std::filesystem::path& path) const {
  auto out = detail::open_for_write(path);
  out << to_json_string() << '\n';
}

ModelLibrary ModelLibrary::load(const std::filesystem::path& path) {
  auto in = detail::open_for_read(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json_string(ss.str());
}

}  // namespace reem::models

#include "reem/simulator.hpp"

#include "text_util.hpp"

#include <json.hpp>

namespace reem::sim {

using detail::format_double;

void write_dataset_csv(const RoomDataset& data, const std::filesystem::path& path) {
  data.validate();
  auto out = detail::open_for_write(path);
  out << kDatasetCsvHeader << '\n';
  for (std::size_t i = 0; i < data.size(); ++i) {
    out << format_iso8601(data.timestamps[i]) << ',' << format_double(data.t_room[i]) << ','
        << format_double(data.u_hvac[i]) << ',' << format_double(data.t_amb[i]) << ','
        << format_double(data.occupancy[i]) << ',' << format_double(data.solar[i]) << ',' << data.day_type[i]
        << '\n';
  }
}

RoomDataset read_dataset_csv(const std::filesystem::path& path, const std::string& room_id) {
  auto in = detail::open_for_read(path);
  const std::string where = path.string();
  std::string line;
  if (!std::getline(in, line) || line != kDatasetCsvHeader) {
    throw ContractViolation(where + ": header must be '" + std::string(kDatasetCsvHeader) + "'");
  }
  RoomDataset data;
  data.room_id = room_id;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    const auto f = detail::split(line, ',');
    const std::string ctx = where + ":" + std::to_string(row);
    if (f.size() != 7) throw ContractViolation(ctx + ": expected 7 fields");
    data.timestamps.push_back(parse_iso8601(f[0]));
    data.t_room.push_back(detail::parse_double(f[1], ctx));
    data.u_hvac.push_back(detail::parse_double(f[2], ctx));
    data.t_amb.push_back(detail::parse_double(f[3], ctx));
    data.occupancy.push_back(detail::parse_double(f[4], ctx));
    data.solar.push_back(detail::parse_double(f[5], ctx));
    data.day_type.push_back(static_cast<int>(detail::parse_double(f[6], ctx)));
  }
  if (data.size() >= 2) {
    data.sampling_minutes = static_cast<int>((data.timestamps[1] - data.timestamps[0]) / 60);
  }
  data.validate();
  return data;
}

void write_profile_json(const RoomProfile& p, const std::filesystem::path& path) {
  nlohmann::ordered_json j;
  j["id"] = p.id;
  j["seed"] = p.seed;
  j["params"] = {{"c_room", p.params.c_room},
                 {"c_wall", p.params.c_wall},
                 {"r_room_wall", p.params.r_room_wall},
                 {"r_room_ambient", p.params.r_room_ambient},
                 {"hvac_efficiency", p.params.hvac_efficiency},
                 {"solar_gain_peak", p.params.solar_gain_peak},
                 {"occupant_gain", p.params.occupant_gain},
                 {"orientation", to_string(p.params.orientation)},
                 {"mode", to_string(p.params.mode)}};
  const auto& th = p.thermostat;
  j["thermostat"] = {{"setpoint_occupied", th.setpoint_occupied},
                     {"setback", th.setback},
                     {"deadband", th.deadband},
                     {"preheat_hours", th.preheat_hours},
                     {"rated_power", th.rated_power},
                     {"levels", th.levels},
                     {"level_change_prob", th.level_change_prob},
                     {"off_day_prob", th.off_day_prob},
                     {"off_window_prob", th.off_window_prob},
                     {"off_window_max_hours", th.off_window_max_hours},
                     {"sensor_noise_sd", th.sensor_noise_sd},
                     {"control_period_minutes", th.control_period_minutes}};
  const auto& c = p.climate;
  j["climate"] = {{"start", format_iso8601(c.start)},
                  {"interval_s", c.interval_s},
                  {"ambient_mean", c.ambient_mean},
                  {"ambient_amplitude", c.ambient_amplitude},
                  {"ambient_peak_hour", c.ambient_peak_hour},
                  {"ambient_trend_per_day", c.ambient_trend_per_day},
                  {"ambient_noise_sd", c.ambient_noise_sd},
                  {"ambient_noise_hours", c.ambient_noise_hours},
                  {"occupancy_start_hour", c.occupancy_start_hour},
                  {"occupancy_end_hour", c.occupancy_end_hour},
                  {"max_occupants", c.max_occupants},
                  {"solar_peak", c.solar_peak},
                  {"sunrise_hour", c.sunrise_hour},
                  {"sunset_hour", c.sunset_hour},
                  {"min_clearness", c.min_clearness},
                  {"orientation", to_string(c.orientation)}};
  auto out = detail::open_for_write(path);
  out << j.dump(2) << '\n';
}

RoomProfile read_profile_json(const std::filesystem::path& path) {
  auto in = detail::open_for_read(path);
  const auto j = nlohmann::json::parse(in);
  RoomProfile p;
  p.id = j.at("id").get<std::string>();
  p.seed = j.at("seed").get<std::uint64_t>();
  const auto& pa = j.at("params");
  p.params.c_room = pa.at("c_room");
  p.params.c_wall = pa.at("c_wall");
  p.params.r_room_wall = pa.at("r_room_wall");
  p.params.r_room_ambient = pa.at("r_room_ambient");
  p.params.hvac_efficiency = pa.at("hvac_efficiency");
  p.params.solar_gain_peak = pa.at("solar_gain_peak");
  p.params.occupant_gain = pa.at("occupant_gain");
  p.params.orientation = orientation_from_string(pa.at("orientation"));
  p.params.mode = mode_from_string(pa.at("mode"));
  const auto& th = j.at("thermostat");
  p.thermostat.setpoint_occupied = th.at("setpoint_occupied");
  p.thermostat.setback = th.at("setback");
  p.thermostat.deadband = th.at("deadband");
  p.thermostat.preheat_hours = th.at("preheat_hours");
  p.thermostat.rated_power = th.at("rated_power");
  p.thermostat.levels = th.at("levels").get<std::vector<double>>();
  p.thermostat.level_change_prob = th.at("level_change_prob");
  p.thermostat.off_day_prob = th.at("off_day_prob");
  p.thermostat.off_window_prob = th.at("off_window_prob");
  p.thermostat.off_window_max_hours = th.at("off_window_max_hours");
  p.thermostat.sensor_noise_sd = th.at("sensor_noise_sd");
  p.thermostat.control_period_minutes = th.at("control_period_minutes");
  const auto& c = j.at("climate");
  p.climate.start = parse_iso8601(c.at("start").get<std::string>());
  p.climate.interval_s = c.at("interval_s");
  p.climate.ambient_mean = c.at("ambient_mean");
  p.climate.ambient_amplitude = c.at("ambient_amplitude");
  p.climate.ambient_peak_hour = c.at("ambient_peak_hour");
  p.climate.ambient_trend_per_day = c.at("ambient_trend_per_day");
  p.climate.ambient_noise_sd = c.at("ambient_noise_sd");
  p.climate.ambient_noise_hours = c.at("ambient_noise_hours");
  p.climate.occupancy_start_hour = c.at("occupancy_start_hour");
  p.climate.occupancy_end_hour = c.at("occupancy_end_hour");
  p.climate.max_occupants = c.at("max_occupants");
  p.climate.solar_peak = c.at("solar_peak");
  p.climate.sunrise_hour = c.at("sunrise_hour");
  p.climate.sunset_hour = c.at("sunset_hour");
  p.climate.min_clearness = c.at("min_clearness");
  p.climate.orientation = orientation_from_string(c.at("orientation"));
  p.params.validate();
  p.thermostat.validate();
  p.climate.validate();
  return p;
}

}  // namespace reem::sim

#include "reem/simulator.hpp"

#include "reem/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

namespace reem::sim {

namespace {

void check(bool ok, const std::string& what) {
  if (!ok) throw ContractViolation(what);
}

double facade_factor(Orientation o, double daylight_fraction) {
  switch (o) {
    case Orientation::South: return 1.0;
    case Orientation::East: return 1.6 * (1.0 - daylight_fraction);
    case Orientation::West: return 1.6 * daylight_fraction;
    case Orientation::North: return 0.3;
  }
  return 1.0;
}

std::string describe(const RoomParams& p, double dt) {
  std::ostringstream os;
  os << "dt=" << dt << "s C_room=" << p.c_room << " C_wall=" << p.c_wall << " R_room_wall=" << p.r_room_wall
     << " R_room_ambient=" << p.r_room_ambient << " eta=" << p.hvac_efficiency;
  return os.str();
}

}  // namespace

std::string to_string(Orientation o) {
  switch (o) {
    case Orientation::North: return "N";
    case Orientation::East: return "E";
    case Orientation::South: return "S";
    case Orientation::West: return "W";
  }
  return "S";
}

std::string to_string(HvacMode m) { return m == HvacMode::Heating ? "heating" : "cooling"; }

Orientation orientation_from_string(const std::string& s) {
  if (s == "N") return Orientation::North;
  if (s == "E") return Orientation::East;
  if (s == "S") return Orientation::South;
  if (s == "W") return Orientation::West;
  throw ContractViolation("unknown orientation '" + s + "'");
}

HvacMode mode_from_string(const std::string& s) {
  if (s == "heating") return HvacMode::Heating;
  if (s == "cooling") return HvacMode::Cooling;
  throw ContractViolation("unknown HVAC mode '" + s + "'");
}

void RoomParams::validate() const {
  check(c_room > 0 && c_wall > 0, "RoomParams: capacitances must be positive");
  check(r_room_wall > 0 && r_room_ambient > 0, "RoomParams: resistances must be positive");
  check(hvac_efficiency > 0 && hvac_efficiency <= 5, "RoomParams: hvac_efficiency must lie in (0, 5]");
  check(solar_gain_peak >= 0 && occupant_gain >= 0, "RoomParams: gains must be nonnegative");
}

void ExogenousConfig::validate() const {
  check(interval_s > 0, "ExogenousConfig: interval_s must be positive");
  check(ambient_noise_sd >= 0 && ambient_noise_hours > 0, "ExogenousConfig: bad ambient noise settings");
  check(occupancy_start_hour >= 0 && occupancy_end_hour <= 24 && occupancy_start_hour < occupancy_end_hour,
        "ExogenousConfig: occupancy window must satisfy 0 <= start < end <= 24");
  check(max_occupants >= 0, "ExogenousConfig: max_occupants must be nonnegative");
  check(solar_peak >= 0 && sunrise_hour < sunset_hour, "ExogenousConfig: bad solar settings");
  check(min_clearness >= 0 && min_clearness <= 1, "ExogenousConfig: min_clearness must lie in [0, 1]");
}

ExogenousSeries synthesize_exogenous(const ExogenousConfig& config, std::size_t horizon, std::uint64_t seed) {
  config.validate();
  check(horizon > 0, "synthesize_exogenous: horizon must be positive");

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  ExogenousSeries out;
  out.start = config.start;
  out.interval_s = config.interval_s;
  out.t_ambient.resize(horizon);
  out.occupancy.resize(horizon);
  out.solar.resize(horizon);
  out.day_type.resize(horizon);

  const double phi = std::exp(-static_cast<double>(config.interval_s) / (config.ambient_noise_hours * 3600.0));
  const double innovation = config.ambient_noise_sd * std::sqrt(1.0 - phi * phi);
  double noise = config.ambient_noise_sd * gauss(rng);

  long current_day = -1;
  double clearness = 1.0;
  double presence = 0.0;
  std::vector<double> hourly_headcount(24, 0.0);

  for (std::size_t i = 0; i < horizon; ++i) {
    const Timestamp t = out.timestamp(i);
    const double elapsed_days = static_cast<double>(t - config.start) / kSecondsPerDay;
    const long day = static_cast<long>(std::floor(elapsed_days));
    const double hour = hour_of_day(t);
    const bool weekend = is_weekend(t);

    if (day != current_day) {
      current_day = day;
      clearness = config.min_clearness + (1.0 - config.min_clearness) * unit(rng);
      presence = 0.4 + 0.5 * unit(rng);
      for (int h = 0; h < 24; ++h) {
        const double p = (h == 12) ? 0.5 * presence : presence;
        std::binomial_distribution<int> heads(config.max_occupants, p);
        hourly_headcount[static_cast<std::size_t>(h)] = heads(rng);
      }
    }

    if (i > 0) noise = phi * noise + innovation * gauss(rng);
    out.t_ambient[i] = config.ambient_mean + config.ambient_trend_per_day * elapsed_days +
                       config.ambient_amplitude *
                           std::cos(2.0 * std::numbers::pi * (hour - config.ambient_peak_hour) / 24.0) +
                       noise;

    const bool scheduled = !weekend && hour >= config.occupancy_start_hour && hour < config.occupancy_end_hour;
    out.occupancy[i] = scheduled ? hourly_headcount[static_cast<std::size_t>(hour)] : 0.0;

    double solar = 0.0;
    if (hour > config.sunrise_hour && hour < config.sunset_hour) {
      const double frac = (hour - config.sunrise_hour) / (config.sunset_hour - config.sunrise_hour);
      solar = config.solar_peak * clearness * std::sin(std::numbers::pi * frac) *
              facade_factor(config.orientation, frac);
    }
    out.solar[i] = std::max(0.0, solar);
    out.day_type[i] = weekend ? 1 : 0;
  }
  return out;
}

RoomState step_room(const RoomState& state, double u, const ExogenousSample& exo, const RoomParams& params,
                    double dt) {
  check(dt > 0 && dt <= kMaxSubstepSeconds, "step_room: dt must lie in (0, 120] s");
  check(u >= 0, "step_room: HVAC power must be nonnegative");

  const double sign = params.mode == HvacMode::Heating ? 1.0 : -1.0;
  const double q_wall = (state.t_wall - state.t_room) / params.r_room_wall;
  const double q_ambient = (exo.t_ambient - state.t_room) / params.r_room_ambient;
  const double q_hvac = sign * params.hvac_efficiency * u;
  const double q_internal = exo.occupancy * params.occupant_gain;
  const double q_solar = params.solar_gain_peak * exo.solar / kReferenceIrradiance;

  RoomState next;
  next.t_room = state.t_room + dt * (q_wall + q_ambient + q_hvac + q_internal + q_solar) / params.c_room;
  next.t_wall = state.t_wall + dt * (-q_wall) / params.c_wall;

  const auto plausible = [](double v) { return std::isfinite(v) && v >= kPlausibleMin && v <= kPlausibleMax; };
  if (!plausible(next.t_room) || !plausible(next.t_wall)) {
    throw SimulationBlowUp("room state left [-20, 50] degC (T_room=" + std::to_string(next.t_room) +
                           ", T_wall=" + std::to_string(next.t_wall) + ") with " + describe(params, dt));
  }
  return next;
}

void ThermostatConfig::validate() const {
  check(deadband > 0, "ThermostatConfig: deadband must be positive");
  check(rated_power > 0, "ThermostatConfig: rated_power must be positive");
  check(!levels.empty(), "ThermostatConfig: need at least one power level");
  for (double l : levels) check(l > 0 && l <= 1, "ThermostatConfig: levels must lie in (0, 1]");
  check(sensor_noise_sd >= 0, "ThermostatConfig: sensor_noise_sd must be nonnegative");
  check(control_period_minutes > 0, "ThermostatConfig: control period must be positive");
}

RoomProfile sample_room_profile(const std::string& id, std::uint64_t seed, Timestamp start) {
  std::mt19937_64 rng(seed * 0x9E3779B97F4A7C15ULL + 17);
  auto uniform = [&](double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); };

  RoomProfile p;
  p.id = id;
  p.seed = seed;

  enum Archetype { Office, Lab, Meeting, Sunny };
  const auto archetype = static_cast<Archetype>(std::uniform_int_distribution<int>(0, 3)(rng));

  double area = 0.0, occupant_gain = 0.0, solar_per_area = 0.0, people_per_area = 0.0;
  Orientation orientation = static_cast<Orientation>(std::uniform_int_distribution<int>(0, 3)(rng));
  switch (archetype) {
    case Office:
      area = uniform(27, 80), occupant_gain = uniform(100, 150), solar_per_area = uniform(8, 18);
      people_per_area = 1.0 / 8.0;
      break;
    case Lab:
      area = uniform(60, 179), occupant_gain = uniform(150, 220), solar_per_area = uniform(5, 12);
      people_per_area = 1.0 / 10.0;
      break;
    case Meeting:
      area = uniform(30, 100), occupant_gain = uniform(100, 120), solar_per_area = uniform(8, 15);
      people_per_area = 1.0 / 5.0;
      break;
    case Sunny:
      area = uniform(40, 120), occupant_gain = uniform(100, 150), solar_per_area = uniform(15, 25);
      orientation = static_cast<Orientation>(std::uniform_int_distribution<int>(1, 3)(rng));
      people_per_area = 1.0 / 8.0;
      break;
  }

  RoomParams& rp = p.params;
  rp.c_room = std::clamp(area * uniform(40e3, 70e3), 1e6, 8e6);
  rp.c_wall = rp.c_room * uniform(3.0, 6.0);
  const double ua = area * uniform(1.5, 3.0);
  rp.r_room_ambient = 1.0 / ua;
  rp.r_room_wall = 1.0 / (area * uniform(5.0, 10.0));
  rp.hvac_efficiency = uniform(2.5, 3.5);
  rp.solar_gain_peak = area * solar_per_area;
  rp.occupant_gain = occupant_gain;
  rp.orientation = orientation;
  rp.mode = HvacMode::Heating;

  ThermostatConfig& th = p.thermostat;
  th.setpoint_occupied = uniform(20.5, 22.5);
  th.setback = uniform(15.0, 17.0);
  th.deadband = uniform(0.5, 1.5);
  th.preheat_hours = uniform(1.5, 3.0);
  const double design_power = 1.4 * 25.0 * ua / rp.hvac_efficiency;
  th.rated_power = std::clamp(std::ceil(design_power / 250.0) * 250.0, 500.0, 8000.0);

  ExogenousConfig& cl = p.climate;
  cl.start = start;
  cl.ambient_mean = 8.0;
  cl.ambient_amplitude = 5.0;
  cl.ambient_trend_per_day = -0.03;
  cl.ambient_noise_sd = 1.0;
  cl.occupancy_start_hour = std::round(uniform(8.0, 9.5) * 4.0) / 4.0;
  cl.occupancy_end_hour = std::round(uniform(17.0, 20.0) * 4.0) / 4.0;
  cl.max_occupants = std::max(1, static_cast<int>(std::round(area * people_per_area)));
  cl.orientation = orientation;

  rp.validate();
  th.validate();
  cl.validate();
  return p;
}

void RoomDataset::validate() const {
  const std::size_t n = timestamps.size();
  check(t_room.size() == n && u_hvac.size() == n && t_amb.size() == n && occupancy.size() == n &&
            solar.size() == n && day_type.size() == n,
        "RoomDataset '" + room_id + "': column lengths differ");
  const Timestamp step = static_cast<Timestamp>(sampling_minutes) * 60;
  for (std::size_t i = 1; i < n; ++i) {
    check(timestamps[i] - timestamps[i - 1] == step,
          "RoomDataset '" + room_id + "': gap or non-increasing timestamp at row " + std::to_string(i));
  }
  for (double u : u_hvac) check(u >= 0, "RoomDataset '" + room_id + "': negative HVAC power");
}

RoomDataset RoomDataset::slice(std::size_t begin, std::size_t end) const {
  check(begin <= end && end <= size(), "RoomDataset::slice: bad range");
  RoomDataset out;
  out.room_id = room_id;
  out.sampling_minutes = sampling_minutes;
  auto cut = [&](const auto& v) { return std::decay_t<decltype(v)>(v.begin() + begin, v.begin() + end); };
  out.timestamps = cut(timestamps);
  out.t_room = cut(t_room);
  out.u_hvac = cut(u_hvac);
  out.t_amb = cut(t_amb);
  out.occupancy = cut(occupancy);
  out.solar = cut(solar);
  out.day_type = cut(day_type);
  return out;
}

bool in_occupied_schedule(const RoomProfile& profile, Timestamp t) {
  const double h = hour_of_day(t);
  return !is_weekend(t) && h >= profile.climate.occupancy_start_hour && h < profile.climate.occupancy_end_hour;
}

double scheduled_setpoint(const RoomProfile& profile, Timestamp t) {
  const double h = hour_of_day(t);
  const bool on = !is_weekend(t) && h >= profile.climate.occupancy_start_hour - profile.thermostat.preheat_hours &&
                  h < profile.climate.occupancy_end_hour;
  return on ? profile.thermostat.setpoint_occupied : profile.thermostat.setback;
}

RoomDataset generate_room_dataset(const RoomProfile& profile, const Period& period, int sampling_minutes) {
  check(sampling_minutes == 15 || sampling_minutes == 60, "generate_room_dataset: sampling must be 15 or 60 min");
  check(period.days > 0, "generate_room_dataset: period must span at least one day");
  const ThermostatConfig& th = profile.thermostat;
  th.validate();
  profile.params.validate();
  const int substeps_per_minute = 60 / static_cast<int>(kSubstepSeconds);
  check(substeps_per_minute == 1, "generate_room_dataset: substep must be 60 s");
  check(sampling_minutes % th.control_period_minutes == 0,
        "generate_room_dataset: control period must divide the sampling interval");

  ExogenousConfig climate = profile.climate;
  climate.start = period.start - kBurnInDays * kSecondsPerDay;
  climate.interval_s = static_cast<int>(kSubstepSeconds);
  const auto total_minutes = static_cast<std::size_t>(kBurnInDays + period.days) * 1440;
  const ExogenousSeries exo = synthesize_exogenous(climate, total_minutes, profile.seed);

  std::mt19937_64 rng(profile.seed ^ 0xA5A5A5A5DEADBEEFULL);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::mt19937_64 sensor_rng(profile.seed ^ 0x5EC5EC5EC5EC5EC5ULL);
  std::normal_distribution<double> sensor(0.0, th.sensor_noise_sd), recorded_noise(0.0, th.sensor_noise_sd);

  const std::size_t n_days = static_cast<std::size_t>(kBurnInDays + period.days);
  std::vector<bool> off_day(n_days);
  std::vector<std::pair<double, double>> off_window(n_days, {-1.0, -1.0});
  for (std::size_t d = 0; d < n_days; ++d) {
    off_day[d] = unit(rng) < th.off_day_prob;
    if (unit(rng) < th.off_window_prob) {
      const double begin = 24.0 * unit(rng);
      off_window[d] = {begin, begin + 1.0 + (th.off_window_max_hours - 1.0) * unit(rng)};
    }
  }

  const std::size_t burn_in_minutes = static_cast<std::size_t>(kBurnInDays) * 1440;
  const auto sampling = static_cast<std::size_t>(sampling_minutes);
  const auto control = static_cast<std::size_t>(th.control_period_minutes);

  RoomDataset out;
  out.room_id = profile.id;
  out.sampling_minutes = sampling_minutes;
  const std::size_t rows = static_cast<std::size_t>(period.days) * 1440 / sampling;
  out.timestamps.reserve(rows);

  RoomState state{th.setback + 1.0, th.setback + 1.0};
  bool heating_on = false;
  double level = th.levels.back();
  double u = 0.0;
  double power_sum = 0.0;
  const bool heating = profile.params.mode == HvacMode::Heating;

  for (std::size_t m = 0; m < total_minutes; ++m) {
    const Timestamp t = exo.timestamp(m);
    if (m % control == 0) {
      const std::size_t day = m / 1440;
      const double h = hour_of_day(t);
      const bool forced_off = off_day[day] || (h >= off_window[day].first && h < off_window[day].second);
      const double reading = state.t_room + sensor(rng);
      const double sp = scheduled_setpoint(profile, t);
      const double half = th.deadband / 2.0;
      if (forced_off) {
        heating_on = false;
      } else {
        const bool too_far = heating ? reading < sp - half : reading > sp + half;
        const bool satisfied = heating ? reading > sp + half : reading < sp - half;
        if (too_far && !heating_on) {
          heating_on = true;
          level = th.levels[std::uniform_int_distribution<std::size_t>(0, th.levels.size() - 1)(rng)];
        } else if (satisfied) {
          heating_on = false;
        } else if (heating_on && unit(rng) < th.level_change_prob) {
          level = th.levels[std::uniform_int_distribution<std::size_t>(0, th.levels.size() - 1)(rng)];
        }
      }
      // Second stage: full power while far from the setpoint.
      const double shortfall = heating ? (sp - half) - reading : reading - (sp + half);
      const double stage = shortfall > 1.0 ? 1.0 : level;
      u = heating_on ? stage * th.rated_power : 0.0;
    }

    if (m >= burn_in_minutes && (m - burn_in_minutes) % sampling == 0) {
      if (!out.timestamps.empty()) out.u_hvac.push_back(power_sum / static_cast<double>(sampling));
      power_sum = 0.0;
      out.timestamps.push_back(t);
      out.t_room.push_back(state.t_room + recorded_noise(sensor_rng));
      out.t_amb.push_back(exo.t_ambient[m]);
      out.occupancy.push_back(exo.occupancy[m]);
      out.solar.push_back(exo.solar[m]);
      out.day_type.push_back(exo.day_type[m]);
    }
    power_sum += u;
    state = step_room(state, u, exo.sample(m), profile.params, kSubstepSeconds);
  }
  out.u_hvac.push_back(power_sum / static_cast<double>(sampling));
  out.validate();
  return out;
}

double deadband_compliance(const RoomDataset& data, const RoomProfile& profile, double margin) {
  std::size_t occupied = 0, inside = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (!in_occupied_schedule(profile, data.timestamps[i])) continue;
    ++occupied;
    const double sp = scheduled_setpoint(profile, data.timestamps[i]);
    if (std::abs(data.t_room[i] - sp) <= profile.thermostat.deadband / 2.0 + margin) ++inside;
  }
  return occupied ? static_cast<double>(inside) / static_cast<double>(occupied) : 1.0;
}

}  // namespace reem::sim

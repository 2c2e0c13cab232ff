#pragma once

// 2R2C room simulator: a room air node coupled to ambient and to an internal
// wall/furniture mass node. Used to generate heterogeneous per-room logs and
// as the plant in closed-loop control runs.

#include "reem/timeutil.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace reem::sim {

enum class Orientation { North, East, South, West };
enum class HvacMode { Heating, Cooling };

std::string to_string(Orientation o);
std::string to_string(HvacMode m);
Orientation orientation_from_string(const std::string& s);
HvacMode mode_from_string(const std::string& s);

struct RoomParams {
  double c_room = 3e6;           // J/K
  double c_wall = 1.2e7;         // J/K
  double r_room_wall = 2e-3;     // K/W
  double r_room_ambient = 1e-2;  // K/W
  double hvac_efficiency = 3.0;  // heat delivered per W of electrical power
  double solar_gain_peak = 1000; // W at reference irradiance
  double occupant_gain = 120;    // W per occupant
  Orientation orientation = Orientation::South;
  HvacMode mode = HvacMode::Heating;

  void validate() const;
};

struct RoomState {
  double t_room = 20.0;
  double t_wall = 20.0;
};

/// Irradiance that produces `solar_gain_peak`.
inline constexpr double kReferenceIrradiance = 1000.0;
inline constexpr double kMaxSubstepSeconds = 120.0;
inline constexpr double kPlausibleMin = -20.0;
inline constexpr double kPlausibleMax = 50.0;

struct ExogenousSample {
  double t_ambient = 0.0;  // degC
  double occupancy = 0.0;  // headcount
  double solar = 0.0;      // W/m^2 on the room facade
};

struct ExogenousConfig {
  Timestamp start = make_timestamp(2023, 11, 2);
  int interval_s = 60;

  double ambient_mean = 8.0;
  double ambient_amplitude = 5.0;
  double ambient_peak_hour = 15.0;
  double ambient_trend_per_day = 0.0;
  double ambient_noise_sd = 0.0;
  double ambient_noise_hours = 6.0;  // AR(1) correlation time

  double occupancy_start_hour = 9.0;
  double occupancy_end_hour = 18.0;
  int max_occupants = 4;

  double solar_peak = 600.0;  // clear-sky W/m^2 on a south facade
  double sunrise_hour = 7.0;
  double sunset_hour = 17.0;
  double min_clearness = 0.3;  // daily clearness index drawn from [min, 1]
  Orientation orientation = Orientation::South;

  void validate() const;
};

struct ExogenousSeries {
  Timestamp start = 0;
  int interval_s = 60;
  std::vector<double> t_ambient;
  std::vector<double> occupancy;
  std::vector<double> solar;
  std::vector<int> day_type;  // 1 on weekends

  std::size_t size() const noexcept { return t_ambient.size(); }
  Timestamp timestamp(std::size_t i) const { return start + static_cast<Timestamp>(i) * interval_s; }
  ExogenousSample sample(std::size_t i) const { return {t_ambient[i], occupancy[i], solar[i]}; }
};

/// Deterministic given the seed. Ambient is a daily sinusoid plus a linear
/// trend plus AR(1) Gaussian noise; occupancy is nonzero only inside the
/// schedule on workdays; solar is a clipped half-sine shaped by orientation.
ExogenousSeries synthesize_exogenous(const ExogenousConfig& config, std::size_t horizon, std::uint64_t seed);

/// One explicit-Euler step of the 2R2C network.
RoomState step_room(const RoomState& state, double u, const ExogenousSample& exo, const RoomParams& params,
                    double dt);

struct ThermostatConfig {
  double setpoint_occupied = 21.0;
  double setback = 16.0;
  double deadband = 1.0;        // full width; switches at setpoint -/+ deadband/2
  double preheat_hours = 1.0;   // occupied setpoint starts this long before occupancy
  double rated_power = 3000.0;  // W electrical
  std::vector<double> levels{0.5, 0.75, 1.0};
  double level_change_prob = 0.1;
  double off_day_prob = 0.03;
  double off_window_prob = 0.1;
  double off_window_max_hours = 3.0;
  double sensor_noise_sd = 0.05;
  int control_period_minutes = 15;

  void validate() const;
};

struct RoomProfile {
  std::string id;
  std::uint64_t seed = 0;
  RoomParams params;
  ThermostatConfig thermostat;
  ExogenousConfig climate;
};

/// Draws a heterogeneous room (floor area 27-179 m^2, archetype-dependent
/// gains, orientation) with a thermostat sized to its design heat loss.
RoomProfile sample_room_profile(const std::string& id, std::uint64_t seed, Timestamp start);

struct Period {
  Timestamp start = make_timestamp(2023, 11, 2);
  int days = 90;
};

inline constexpr int kBurnInDays = 2;
inline constexpr double kSubstepSeconds = 60.0;

struct RoomDataset {
  std::string room_id;
  int sampling_minutes = 15;
  std::vector<Timestamp> timestamps;
  std::vector<double> t_room;
  std::vector<double> u_hvac;  // mean electrical power over [t, t + interval)
  std::vector<double> t_amb;
  std::vector<double> occupancy;
  std::vector<double> solar;
  std::vector<int> day_type;

  std::size_t size() const noexcept { return timestamps.size(); }
  void validate() const;
  /// Rows [begin, end) as a new dataset.
  RoomDataset slice(std::size_t begin, std::size_t end) const;
};

/// Simulates the room under a bang-bang thermostat (randomized deadband,
/// power levels and off periods) and records rows every `sampling_minutes`.
RoomDataset generate_room_dataset(const RoomProfile& profile, const Period& period, int sampling_minutes);

/// Thermostat setpoint in force at time t.
double scheduled_setpoint(const RoomProfile& profile, Timestamp t);
bool in_occupied_schedule(const RoomProfile& profile, Timestamp t);

/// Fraction of occupied-schedule rows whose temperature lies within
/// setpoint +/- (deadband/2 + margin).
double deadband_compliance(const RoomDataset& data, const RoomProfile& profile, double margin);

// ---- files ----

inline constexpr const char* kDatasetCsvHeader = "timestamp,t_room,u_hvac,t_amb,occupancy,solar,day_type";

void write_dataset_csv(const RoomDataset& data, const std::filesystem::path& path);
RoomDataset read_dataset_csv(const std::filesystem::path& path, const std::string& room_id);

void write_profile_json(const RoomProfile& profile, const std::filesystem::path& path);
RoomProfile read_profile_json(const std::filesystem::path& path);

}  // namespace reem::sim

#pragma once

// Experiment configuration and the stages of the offline benchmark:
// simulate rooms, fit the base model library, train agents, evaluate all
// methods, run closed-loop control and build reports.

#include "reem/agents.hpp"
#include "reem/baselines.hpp"
#include "reem/ensemble.hpp"
#include "reem/models.hpp"
#include "reem/mpc.hpp"
#include "reem/simulator.hpp"
#include "reem/streams.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace reem::pipeline {

inline constexpr const char* kVersion = "0.1.0";

struct ExperimentConfig {
  // [experiment]
  std::uint64_t seed = 1;
  std::filesystem::path out_dir = "out";
  std::size_t rooms = 25;
  double train_fraction = 0.8;
  int sampling_minutes = 15;
  Timestamp start = make_timestamp(2023, 11, 2);
  int days = 90;
  /// Share of each room's period used for fitting (train rooms) or
  /// validation (test rooms); the remainder trains agents or is evaluated.
  double temporal_split = 0.5;

  // [models]
  std::vector<models::FitMethod> methods{models::FitMethod::Mlr, models::FitMethod::Dictionary};
  std::size_t lookback = 8;
  double ridge = models::kDefaultRidge;
  std::size_t dict_max_terms = 8;

  // [train] and [encoder]
  agents::TrainConfig train;
  enc::EncoderConfig encoder;

  // [baselines]
  std::size_t top_n = 3;
  std::size_t search_budget = 2000;

  // [mpc]
  mpc::MpcConfig mpc;
  mpc::ClosedLoopConfig closed_loop;
  std::size_t mpc_rooms = 3;

  /// Module configs with the shared settings (seed, look-back, sampling)
  /// filled in from the experiment section.
  agents::TrainConfig train_config() const;
  enc::EncoderConfig encoder_config(std::size_t n_models) const;
  mpc::MpcConfig mpc_config() const;
  mpc::ClosedLoopConfig closed_loop_config() const;

  std::size_t train_rooms() const;
  std::size_t test_rooms() const { return rooms - train_rooms(); }
  void validate() const;

  /// Reads an INI file; every unknown or malformed key is reported at once.
  static ExperimentConfig load(const std::filesystem::path& path);
  static ExperimentConfig parse(const std::string& text);
};

struct RoomSet {
  std::vector<sim::RoomProfile> profiles;
  std::vector<sim::RoomDataset> data;
};

struct Rooms {
  RoomSet train;
  RoomSet test;
};

Rooms simulate_rooms(const ExperimentConfig& cfg);

/// Splits a dataset at `fraction` of its rows.
std::pair<sim::RoomDataset, sim::RoomDataset> temporal_split(const sim::RoomDataset& data, double fraction);

/// One model per (train room, method), fitted on the early part.
models::ModelLibrary fit_library(const RoomSet& train, const ExperimentConfig& cfg);

struct Streams {
  std::vector<streams::PreparedStream> train;       // later part of train rooms
  std::vector<streams::PreparedStream> validation;  // early part of test rooms
  std::vector<streams::PreparedStream> test;        // later part of test rooms
};

Streams prepare_streams(const Rooms& rooms, const models::ModelLibrary& library, const ExperimentConfig& cfg);

struct TrainedAgents {
  agents::TrainResult hierarchical;
  agents::TrainResult single_tier;
};

TrainedAgents train_agents(const Streams& s, const models::ModelLibrary& library, const ExperimentConfig& cfg);

/// Method names in report order; the first is the proposed method.
inline const std::vector<std::string> kMethods{"reem",          "single_tier_rl",    "heuristic_top_n",
                                               "equal_weight_all", "static_search", "best_single_oracle"};
/// Methods that the proposed one is compared against in the headline check.
inline const std::vector<std::string> kReferenceBaselines{"heuristic_top_n", "equal_weight_all", "static_search"};

std::map<std::string, ensemble::EvaluationResult> evaluate_methods(const Streams& s,
                                                                   const models::ModelLibrary& library,
                                                                   const agents::AgentSet& hierarchical,
                                                                   const agents::AgentSet& single_tier,
                                                                   const ExperimentConfig& cfg);

struct ErrorMetrics {
  double mae = 0.0;
  double mse = 0.0;
};

/// Throws ContractViolation on empty or mismatched input.
ErrorMetrics compute_metrics(std::span<const double> predictions, std::span<const double> truths);

struct MetricsReport {
  std::uint64_t seed = 0;
  std::map<std::string, ensemble::EvaluationResult> methods;  // records not serialized

  std::string to_json_string() const;
  static MetricsReport from_json_string(const std::string& text);
};

/// Per-method metrics plus improvement of every method over every other.
MetricsReport build_report(const std::map<std::string, ensemble::EvaluationResult>& results, std::uint64_t seed);
/// Human-readable table.
std::string format_report_text(const MetricsReport& report);
std::string format_report_csv(const MetricsReport& report);

struct OfflineBenchmark {
  Rooms rooms;
  models::ModelLibrary library;
  Streams streams;
  TrainedAgents agents;
  std::map<std::string, ensemble::EvaluationResult> results;
};

/// Everything up to evaluation, in memory.
OfflineBenchmark run_offline_benchmark(const ExperimentConfig& cfg);

struct MpcComparison {
  std::string room;
  mpc::ClosedLoopResult ensemble;
  mpc::ClosedLoopResult customized;  // SR-style model fitted on the room's own history
  mpc::ClosedLoopResult physics;
  mpc::ClosedLoopResult thermostat;
};

/// Closed-loop runs on the first `cfg.mpc_rooms` test rooms.
std::vector<MpcComparison> run_mpc_study(const Rooms& rooms, const models::ModelLibrary& library,
                                         const agents::AgentSet& hierarchical, const ExperimentConfig& cfg);

}  // namespace reem::pipeline

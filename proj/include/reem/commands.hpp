#pragma once

// File-backed pipeline commands. Each command reads the artifacts of the
// previous ones from the output directory and writes its own.

#include "reem/pipeline.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace reem::cli {

/// Artifact locations below the output directory.
struct Layout {
  std::filesystem::path root;

  std::filesystem::path rooms_index() const { return root / "data" / "rooms.json"; }
  std::filesystem::path dataset(const std::string& room) const { return root / "data" / (room + ".csv"); }
  std::filesystem::path profile(const std::string& room) const { return root / "data" / (room + ".profile.json"); }
  std::filesystem::path library() const { return root / "models" / "library.json"; }
  std::filesystem::path hierarchical() const { return root / "agents" / "hierarchical.json"; }
  std::filesystem::path single_tier() const { return root / "agents" / "single_tier.json"; }
  std::filesystem::path training_log() const { return root / "agents" / "training_log.csv"; }
  std::filesystem::path single_tier_log() const { return root / "agents" / "single_tier_log.csv"; }
  std::filesystem::path records(const std::string& method) const { return root / "eval" / (method + ".records.csv"); }
  std::filesystem::path metrics() const { return root / "eval" / "metrics.json"; }
  std::filesystem::path run_info() const { return root / "eval" / "run_info.json"; }
  std::filesystem::path closed_loop(const std::string& room, const std::string& label) const {
    return root / "mpc" / (room + "." + label + ".csv");
  }
  std::filesystem::path mpc_summary() const { return root / "mpc" / "summary.csv"; }
  std::filesystem::path report_csv() const { return root / "report" / "report.csv"; }
  std::filesystem::path report_text() const { return root / "report" / "report.txt"; }
};

inline const std::vector<std::string> kCommands{"simulate", "fit", "train", "evaluate", "mpc-run", "report"};

void simulate(const pipeline::ExperimentConfig& cfg);
void fit(const pipeline::ExperimentConfig& cfg);
void train(const pipeline::ExperimentConfig& cfg);
void evaluate(const pipeline::ExperimentConfig& cfg);
void mpc_run(const pipeline::ExperimentConfig& cfg);
void report(const pipeline::ExperimentConfig& cfg);

/// Dispatches by name; unknown names raise ConfigError.
void run_command(const pipeline::ExperimentConfig& cfg, const std::string& command);

/// Rooms written by `simulate`.
pipeline::Rooms load_rooms(const Layout& layout);

}  // namespace reem::cli

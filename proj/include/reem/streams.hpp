#pragma once

// A logged room stream with every base model's one-step prediction cached.
// Because actions never influence the logged data or the per-model errors,
// predictions and the error tracker's history can be computed up front.

#include "reem/models.hpp"
#include "reem/simulator.hpp"

#include <Eigen/Core>

#include <memory>
#include <string>
#include <vector>

namespace reem::streams {

/// Squared error assumed for every model before any observation.
inline constexpr double kTrackerPrior = 1.0;

struct PreparedStream {
  std::string room;
  std::shared_ptr<const sim::RoomDataset> data;
  std::size_t lookback = 8;
  std::vector<std::size_t> rows;  // dataset row t of each step
  Eigen::MatrixXd predictions;    // steps x N: f_i(window_t, u_t)
  std::vector<double> truth;      // x_{t+1}

  std::size_t steps() const noexcept { return rows.size(); }
  std::size_t n_models() const noexcept { return static_cast<std::size_t>(predictions.cols()); }
  models::TimeSeriesWindow window(std::size_t step) const;
  double control(std::size_t step) const { return data->u_hvac[rows[step]]; }
  Timestamp timestamp(std::size_t step) const { return data->timestamps[rows[step]]; }
  /// Tracker contents when step k is encoded: squared errors from step k-1,
  /// or the prior at the first step.
  std::vector<double> tracker_errors(std::size_t step) const;
};

/// Steps run from the first row with a full look-back to the second-last row.
PreparedStream prepare_stream(const sim::RoomDataset& data, const models::ModelLibrary& library,
                              std::size_t lookback);

}  // namespace reem::streams

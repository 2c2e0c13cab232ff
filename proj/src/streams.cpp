#include "reem/streams.hpp"

#include "reem/errors.hpp"

namespace reem::streams {

models::TimeSeriesWindow PreparedStream::window(std::size_t step) const {
  return models::window_at(*data, rows.at(step), lookback);
}

std::vector<double> PreparedStream::tracker_errors(std::size_t step) const {
  const std::size_t N = n_models();
  if (step == 0) return std::vector<double>(N, kTrackerPrior);
  std::vector<double> out(N);
  const auto prev = static_cast<Eigen::Index>(step - 1);
  for (std::size_t i = 0; i < N; ++i) {
    const double e = predictions(prev, static_cast<Eigen::Index>(i)) - truth[step - 1];
    out[i] = e * e;
  }
  return out;
}

PreparedStream prepare_stream(const sim::RoomDataset& data, const models::ModelLibrary& library,
                              std::size_t lookback) {
  if (library.empty()) throw ContractViolation("prepare_stream: empty model library");
  if (library.lookback() > lookback) {
    throw ContractViolation("prepare_stream: a base model needs a longer look-back than " + std::to_string(lookback));
  }
  data.validate();
  PreparedStream s;
  s.room = data.room_id;
  s.data = std::make_shared<const sim::RoomDataset>(data);
  s.lookback = lookback;
  if (data.size() < lookback + 1) return s;
  const std::size_t steps = data.size() - lookback;
  s.predictions.resize(static_cast<Eigen::Index>(steps), static_cast<Eigen::Index>(library.size()));
  s.rows.reserve(steps);
  s.truth.reserve(steps);
  for (std::size_t k = 0; k < steps; ++k) {
    const std::size_t t = lookback - 1 + k;
    const auto w = models::window_at(data, t, lookback);
    for (std::size_t i = 0; i < library.size(); ++i) {
      s.predictions(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(i)) =
          models::model_predict(library[i], w, data.u_hvac[t]);
    }
    s.rows.push_back(t);
    s.truth.push_back(data.t_room[t + 1]);
  }
  return s;
}

}  // namespace reem::streams

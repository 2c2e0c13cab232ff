#pragma once

// Affine-in-control base models of the next indoor temperature, their
// feature specs, least-squares and stepwise dictionary fitting, and the
// ordered model library.

#include "reem/simulator.hpp"
#include "reem/timeutil.hpp"

#include <Eigen/Core>

#include <array>
#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace reem::models {

/// Disturbance channels carried in a window, in column order.
inline constexpr std::size_t kDisturbanceChannels = 4;
enum class Variable { X, U, TAmbient, Occupancy, Solar, DayType };
inline constexpr std::size_t kVariableCount = 6;

std::string_view variable_name(Variable v);

/// Look-back slice ending at time t. x and d hold rows t-L+1..t; u holds the
/// applied powers at t-L+1..t-1. The control at t is passed separately.
struct TimeSeriesWindow {
  std::vector<double> x;
  std::vector<double> u;
  std::vector<std::array<double, kDisturbanceChannels>> d;  // t_amb, occupancy, solar, day_type
  Timestamp end_time = 0;
  int sampling_minutes = 15;

  std::size_t lookback() const noexcept { return x.size(); }
  void validate() const;
};

/// Window of length `lookback` ending at row t.
TimeSeriesWindow window_at(const sim::RoomDataset& data, std::size_t t, std::size_t lookback);

enum class Role { State, PastControl, Disturbance, CurrentControl };
std::string_view role_name(Role r);

/// One variable at one lag, or the difference of two such reads.
struct Factor {
  Variable var = Variable::X;
  int lag = 0;
  bool difference = false;
  Variable var2 = Variable::X;
  int lag2 = 0;
};

/// Product of factors, e.g. "u@0*(t_amb@0-x@0)". `var@k` reads the value k
/// steps before t.
struct Feature {
  std::vector<Factor> factors;
  Role role = Role::State;

  static Feature parse(std::string_view text);
  std::string to_string() const;
  /// Distinct raw variables read by this feature.
  std::vector<Variable> variables() const;
  int max_lag(Variable v) const;
};

struct FeatureSpec {
  std::size_t lookback = 8;
  std::vector<Feature> features;

  static FeatureSpec parse(std::size_t lookback, const std::vector<std::string>& texts);
  std::vector<std::string> texts() const;
  std::size_t size() const noexcept { return features.size(); }
  /// Throws unless every feature fits the look-back and one feature is a
  /// current-control term.
  void validate() const;
  bool has_current_control() const;
};

/// Sensors plus day type, with the current control.
FeatureSpec default_mlr_spec(std::size_t lookback = 8);
/// Raw features plus documented products and squares.
FeatureSpec default_dictionary_spec(std::size_t lookback = 8);

std::vector<double> build_feature_vector(const TimeSeriesWindow& window, double u_t, const FeatureSpec& spec);

enum class FitMethod { Mlr, Dictionary };
std::string_view method_name(FitMethod m);
FitMethod method_from_string(std::string_view s);

enum class VariableCountMode { DistinctVariables, TermCount };

struct BaseModel {
  FeatureSpec spec;
  std::vector<double> coefficients;
  double intercept = 0.0;
  std::string source_room;
  FitMethod method = FitMethod::Mlr;
  std::string training_period;
  int variable_count = 0;

  void validate() const;
};

/// Nonzero coefficients (|c| > 1e-12) only; intercept excluded.
int variable_count(const BaseModel& model, VariableCountMode mode = VariableCountMode::DistinctVariables);

double model_predict(const BaseModel& model, const TimeSeriesWindow& window, double u_t);

/// prediction(u) = offset + gain * u.
struct AffineResponse {
  double offset = 0.0;
  double gain = 0.0;
};
AffineResponse affine_response(const BaseModel& model, const TimeSeriesWindow& window);

/// Regression rows: one per t with a full window and a next-step target.
struct DesignMatrix {
  Eigen::MatrixXd features;  // rows x F
  Eigen::VectorXd target;    // x_{t+1}
  std::vector<std::size_t> rows;
};
DesignMatrix build_design_matrix(const sim::RoomDataset& data, const FeatureSpec& spec);

struct LeastSquaresResult {
  Eigen::VectorXd coefficients;
  double intercept = 0.0;
  double rss = 0.0;
};

/// Ridge least squares with an unpenalized intercept. Columns are centered
/// and scaled to unit RMS before the ridge term is applied.
LeastSquaresResult solve_least_squares(const Eigen::MatrixXd& features, const Eigen::VectorXd& target,
                                       double ridge = 1e-8);

inline constexpr double kDefaultRidge = 1e-8;

BaseModel fit_least_squares(const sim::RoomDataset& data, const FeatureSpec& spec, double ridge = kDefaultRidge);

struct DictionaryFitOptions {
  std::size_t max_terms = 8;
  /// Feature texts always kept (e.g. "u@0" so the model stays controllable).
  std::vector<std::string> forced;
  double ridge = kDefaultRidge;
};

/// Bayesian information criterion for k fitted parameters on n rows.
double bic(double rss, std::size_t n, std::size_t k);

struct StepwiseResult {
  std::vector<std::size_t> selected;  // column indices, in order of entry
  LeastSquaresResult fit;
};

/// Greedy forward selection by BIC over design columns.
StepwiseResult stepwise_select(const Eigen::MatrixXd& dictionary, const Eigen::VectorXd& target,
                               const std::vector<std::size_t>& forced, std::size_t max_terms, double ridge);

BaseModel fit_dictionary_regression(const sim::RoomDataset& data, const FeatureSpec& dictionary,
                                    const DictionaryFitOptions& options);

class ModelLibrary {
 public:
  ModelLibrary() = default;
  explicit ModelLibrary(std::vector<BaseModel> models) : models_(std::move(models)) {}

  std::size_t size() const noexcept { return models_.size(); }
  bool empty() const noexcept { return models_.empty(); }
  const BaseModel& operator[](std::size_t id) const { return models_.at(id); }
  void add(BaseModel model) { models_.push_back(std::move(model)); }
  std::vector<int> variable_counts(VariableCountMode mode = VariableCountMode::DistinctVariables) const;
  /// Largest look-back over all models.
  std::size_t lookback() const;

  auto begin() const noexcept { return models_.begin(); }
  auto end() const noexcept { return models_.end(); }

  std::string to_json_string() const;
  static ModelLibrary from_json_string(std::string_view text);
  void save(const std::filesystem::path& path) const;
  static ModelLibrary load(const std::filesystem::path& path);

 private:
  std::vector<BaseModel> models_;
};

}  // namespace reem::models

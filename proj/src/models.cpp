#include "reem/models.hpp"

#include "reem/errors.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <numeric>

namespace reem::models {

namespace {

constexpr std::array<std::string_view, kVariableCount> kVariableNames{"x", "u", "t_amb", "occ", "solar", "day"};

Variable parse_variable(std::string_view name, std::string_view context) {
  for (std::size_t i = 0; i < kVariableNames.size(); ++i) {
    if (kVariableNames[i] == name) return static_cast<Variable>(i);
  }
  throw ContractViolation("unknown variable '" + std::string(name) + "' in feature '" + std::string(context) + "'");
}

// "name@lag"
std::pair<Variable, int> parse_read(std::string_view text, std::string_view context) {
  const auto at = text.find('@');
  if (at == std::string_view::npos) {
    throw ContractViolation("expected var@lag in feature '" + std::string(context) + "'");
  }
  int lag = -1;
  const auto lag_text = text.substr(at + 1);
  const auto res = std::from_chars(lag_text.data(), lag_text.data() + lag_text.size(), lag);
  if (res.ec != std::errc() || res.ptr != lag_text.data() + lag_text.size() || lag < 0) {
    throw ContractViolation("bad lag in feature '" + std::string(context) + "'");
  }
  return {parse_variable(text.substr(0, at), context), lag};
}

std::string read_text(Variable v, int lag) { return std::string(variable_name(v)) + "@" + std::to_string(lag); }

bool reads_current_control(const Factor& f) {
  return (f.var == Variable::U && f.lag == 0) || (f.difference && f.var2 == Variable::U && f.lag2 == 0);
}

Role derive_role(const std::vector<Factor>& factors) {
  bool past_control = false, only_state = true;
  auto visit = [&](Variable v) {
    if (v == Variable::U) past_control = true;
    if (v != Variable::X) only_state = false;
  };
  for (const auto& f : factors) {
    if (reads_current_control(f)) return Role::CurrentControl;
    visit(f.var);
    if (f.difference) visit(f.var2);
  }
  if (past_control) return Role::PastControl;
  return only_state ? Role::State : Role::Disturbance;
}

// `spec_lookback` is the model's own window length, which may be shorter
// than the window handed in.
double read_value(const TimeSeriesWindow& w, Variable v, int lag, double u_t, std::size_t spec_lookback) {
  const std::size_t L = w.x.size();
  auto k = static_cast<std::size_t>(lag);
  if (v == Variable::U) {
    if (k == 0) return u_t;
    // u holds lags L-1 .. 1; lag L repeats the earliest value of the model's window.
    k = std::min(k, spec_lookback - 1);
    return w.u[L - 1 - k];
  }
  const std::size_t i = L - 1 - k;
  switch (v) {
    case Variable::X: return w.x[i];
    case Variable::TAmbient: return w.d[i][0];
    case Variable::Occupancy: return w.d[i][1];
    case Variable::Solar: return w.d[i][2];
    case Variable::DayType: return w.d[i][3];
    case Variable::U: break;
  }
  return 0.0;
}

double evaluate(const Feature& f, const TimeSeriesWindow& w, double u_t, std::size_t spec_lookback) {
  double value = 1.0;
  for (const auto& fac : f.factors) {
    double v = read_value(w, fac.var, fac.lag, u_t, spec_lookback);
    if (fac.difference) v -= read_value(w, fac.var2, fac.lag2, u_t, spec_lookback);
    value *= v;
  }
  return value;
}

void check_window(const FeatureSpec& spec, const TimeSeriesWindow& w) {
  if (w.lookback() < spec.lookback) {
    throw ContractViolation("window look-back " + std::to_string(w.lookback()) + " is shorter than the spec's " +
                            std::to_string(spec.lookback));
  }
}

}  // namespace

std::string_view variable_name(Variable v) { return kVariableNames[static_cast<std::size_t>(v)]; }

std::string_view role_name(Role r) {
  switch (r) {
    case Role::State: return "state";
    case Role::PastControl: return "past_control";
    case Role::Disturbance: return "disturbance";
    case Role::CurrentControl: return "current_control";
  }
  return "state";
}

void TimeSeriesWindow::validate() const {
  const std::size_t L = x.size();
  if (L == 0) throw ContractViolation("window: empty look-back");
  if (u.size() + 1 != L || d.size() != L) {
    throw ContractViolation("window: expected |u| = L-1 and |d| = L for L = " + std::to_string(L));
  }
  auto finite = [](double v) { return std::isfinite(v); };
  bool ok = std::all_of(x.begin(), x.end(), finite) && std::all_of(u.begin(), u.end(), finite);
  for (const auto& row : d) ok = ok && std::all_of(row.begin(), row.end(), finite);
  if (!ok) throw ContractViolation("window: missing or non-finite values");
}

TimeSeriesWindow window_at(const sim::RoomDataset& data, std::size_t t, std::size_t lookback) {
  if (lookback == 0 || t + 1 < lookback || t >= data.size()) {
    throw ContractViolation("window_at: row " + std::to_string(t) + " lacks " + std::to_string(lookback) +
                            " rows of history");
  }
  TimeSeriesWindow w;
  w.end_time = data.timestamps[t];
  w.sampling_minutes = data.sampling_minutes;
  const std::size_t first = t + 1 - lookback;
  w.x.assign(data.t_room.begin() + static_cast<std::ptrdiff_t>(first),
             data.t_room.begin() + static_cast<std::ptrdiff_t>(t + 1));
  w.u.assign(data.u_hvac.begin() + static_cast<std::ptrdiff_t>(first),
             data.u_hvac.begin() + static_cast<std::ptrdiff_t>(t));
  w.d.resize(lookback);
  for (std::size_t i = 0; i < lookback; ++i) {
    const std::size_t r = first + i;
    w.d[i] = {data.t_amb[r], data.occupancy[r], data.solar[r], static_cast<double>(data.day_type[r])};
  }
  return w;
}

Feature Feature::parse(std::string_view text) {
  Feature f;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t end = text.find('*', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view part = text.substr(pos, end - pos);
    if (part.empty()) throw ContractViolation("empty factor in feature '" + std::string(text) + "'");
    Factor fac;
    if (part.front() == '(') {
      if (part.back() != ')') throw ContractViolation("unbalanced parenthesis in '" + std::string(text) + "'");
      const std::string_view inner = part.substr(1, part.size() - 2);
      const auto minus = inner.find('-');
      if (minus == std::string_view::npos) {
        throw ContractViolation("expected (a@i-b@j) in feature '" + std::string(text) + "'");
      }
      std::tie(fac.var, fac.lag) = parse_read(inner.substr(0, minus), text);
      std::tie(fac.var2, fac.lag2) = parse_read(inner.substr(minus + 1), text);
      fac.difference = true;
    } else {
      std::tie(fac.var, fac.lag) = parse_read(part, text);
    }
    f.factors.push_back(fac);
    pos = end + 1;
  }

  int control_reads = 0;
  for (const auto& fac : f.factors) {
    control_reads += (fac.var == Variable::U && fac.lag == 0);
    control_reads += (fac.difference && fac.var2 == Variable::U && fac.lag2 == 0);
  }
  if (control_reads > 1) {
    throw ContractViolation("feature '" + std::string(text) + "' is not linear in the current control");
  }
  f.role = derive_role(f.factors);
  return f;
}

std::string Feature::to_string() const {
  std::string out;
  for (std::size_t i = 0; i < factors.size(); ++i) {
    if (i) out += '*';
    const auto& f = factors[i];
    if (f.difference) {
      out += "(" + read_text(f.var, f.lag) + "-" + read_text(f.var2, f.lag2) + ")";
    } else {
      out += read_text(f.var, f.lag);
    }
  }
  return out;
}

std::vector<Variable> Feature::variables() const {
  std::vector<Variable> out;
  auto put = [&](Variable v) {
    if (std::find(out.begin(), out.end(), v) == out.end()) out.push_back(v);
  };
  for (const auto& f : factors) {
    put(f.var);
    if (f.difference) put(f.var2);
  }
  return out;
}

int Feature::max_lag(Variable v) const {
  int lag = -1;
  for (const auto& f : factors) {
    if (f.var == v) lag = std::max(lag, f.lag);
    if (f.difference && f.var2 == v) lag = std::max(lag, f.lag2);
  }
  return lag;
}

FeatureSpec FeatureSpec::parse(std::size_t lookback, const std::vector<std::string>& texts) {
  FeatureSpec spec;
  spec.lookback = lookback;
  for (const auto& t : texts) spec.features.push_back(Feature::parse(t));
  spec.validate();
  return spec;
}

std::vector<std::string> FeatureSpec::texts() const {
  std::vector<std::string> out;
  for (const auto& f : features) out.push_back(f.to_string());
  return out;
}

void FeatureSpec::validate() const {
  if (lookback == 0) throw ContractViolation("feature spec: look-back must be positive");
  const int L = static_cast<int>(lookback);
  for (const auto& f : features) {
    for (Variable v : f.variables()) {
      const int lag = f.max_lag(v);
      const int limit = v == Variable::U ? (L >= 2 ? L : 0) : L - 1;
      if (lag > limit) {
        throw ContractViolation("feature '" + f.to_string() + "' reads lag " + std::to_string(lag) +
                                " beyond look-back " + std::to_string(L));
      }
    }
  }
}

bool FeatureSpec::has_current_control() const {
  return std::any_of(features.begin(), features.end(), [](const Feature& f) { return f.role == Role::CurrentControl; });
}

FeatureSpec default_mlr_spec(std::size_t lookback) {
  return FeatureSpec::parse(lookback, {"x@0", "x@1", "x@2", "x@3", "u@1", "u@2", "t_amb@0", "t_amb@1", "occ@0",
                                       "solar@0", "day@0", "u@0"});
}

FeatureSpec default_dictionary_spec(std::size_t lookback) {
  return FeatureSpec::parse(
      lookback, {"x@0",           "x@1",           "x@2",           "x@3",
                 "x@5",           "x@7",           "u@1",           "u@2",
                 "u@3",           "u@4",           "t_amb@0",       "t_amb@1",
                 "t_amb@3",       "occ@0",         "occ@1",         "solar@0",
                 "solar@2",       "day@0",         "u@0",           "u@0*(t_amb@0-x@0)",
                 "u@0*x@0",       "u@0*day@0",     "u@1*(t_amb@1-x@1)",
                 "x@0*x@0",       "x@0*t_amb@0",
                 "t_amb@0*t_amb@0", "occ@0*x@0",   "occ@0*occ@0",   "solar@0*x@0",
                 "solar@0*solar@0", "day@0*x@0",   "(x@0-x@1)*(x@0-x@1)"});
}

std::vector<double> build_feature_vector(const TimeSeriesWindow& window, double u_t, const FeatureSpec& spec) {
  check_window(spec, window);
  spec.validate();
  std::vector<double> out;
  out.reserve(spec.size());
  for (const auto& f : spec.features) out.push_back(evaluate(f, window, u_t, spec.lookback));
  return out;
}

std::string_view method_name(FitMethod m) { return m == FitMethod::Mlr ? "mlr" : "dict"; }

FitMethod method_from_string(std::string_view s) {
  if (s == "mlr") return FitMethod::Mlr;
  if (s == "dict") return FitMethod::Dictionary;
  throw ContractViolation("unknown fitting method '" + std::string(s) + "'");
}

void BaseModel::validate() const {
  spec.validate();
  if (coefficients.size() != spec.size()) {
    throw ContractViolation("base model: " + std::to_string(coefficients.size()) + " coefficients for " +
                            std::to_string(spec.size()) + " features");
  }
}

int variable_count(const BaseModel& model, VariableCountMode mode) {
  std::array<bool, kVariableCount> seen{};
  int terms = 0;
  for (std::size_t i = 0; i < model.spec.size() && i < model.coefficients.size(); ++i) {
    if (std::abs(model.coefficients[i]) <= 1e-12) continue;
    ++terms;
    for (Variable v : model.spec.features[i].variables()) seen[static_cast<std::size_t>(v)] = true;
  }
  if (mode == VariableCountMode::TermCount) return terms;
  return static_cast<int>(std::count(seen.begin(), seen.end(), true));
}

double model_predict(const BaseModel& model, const TimeSeriesWindow& window, double u_t) {
  check_window(model.spec, window);
  if (model.coefficients.size() != model.spec.size()) model.validate();
  double y = model.intercept;
  for (std::size_t i = 0; i < model.spec.size(); ++i) {
    const double c = model.coefficients[i];
    if (c != 0.0) y += c * evaluate(model.spec.features[i], window, u_t, model.spec.lookback);
  }
  return y;
}

AffineResponse affine_response(const BaseModel& model, const TimeSeriesWindow& window) {
  check_window(model.spec, window);
  AffineResponse r{model.intercept, 0.0};
  for (std::size_t i = 0; i < model.spec.size(); ++i) {
    const double c = model.coefficients[i];
    if (c == 0.0) continue;
    const Feature& f = model.spec.features[i];
    if (f.role == Role::CurrentControl) {
      const double at0 = evaluate(f, window, 0.0, model.spec.lookback);
      r.offset += c * at0;
      r.gain += c * (evaluate(f, window, 1.0, model.spec.lookback) - at0);
    } else {
      r.offset += c * evaluate(f, window, 0.0, model.spec.lookback);
    }
  }
  return r;
}

DesignMatrix build_design_matrix(const sim::RoomDataset& data, const FeatureSpec& spec) {
  spec.validate();
  data.validate();
  const std::size_t L = spec.lookback;
  DesignMatrix dm;
  if (data.size() < L + 1) return dm;
  const std::size_t n = data.size() - L;
  dm.features.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(spec.size()));
  dm.target.resize(static_cast<Eigen::Index>(n));
  dm.rows.reserve(n);
  for (std::size_t r = 0; r < n; ++r) {
    const std::size_t t = L - 1 + r;
    const TimeSeriesWindow w = window_at(data, t, L);
    for (std::size_t j = 0; j < spec.size(); ++j) {
      dm.features(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j)) =
          evaluate(spec.features[j], w, data.u_hvac[t], L);
    }
    dm.target(static_cast<Eigen::Index>(r)) = data.t_room[t + 1];
    dm.rows.push_back(t);
  }
  return dm;
}

LeastSquaresResult solve_least_squares(const Eigen::MatrixXd& features, const Eigen::VectorXd& target,
                                       double ridge) {
  const Eigen::Index n = features.rows();
  const Eigen::Index F = features.cols();
  if (n == 0 || target.size() != n) throw FittingError("least squares: empty or mismatched design");
  if (ridge < 0) throw ContractViolation("least squares: ridge must be nonnegative");

  LeastSquaresResult out;
  const double y_mean = target.mean();
  out.coefficients = Eigen::VectorXd::Zero(F);
  if (F > 0) {
    const Eigen::RowVectorXd mu = features.colwise().mean();
    Eigen::MatrixXd z = features.rowwise() - mu;
    Eigen::VectorXd scale(F);
    for (Eigen::Index j = 0; j < F; ++j) {
      const double rms = std::sqrt(z.col(j).squaredNorm() / static_cast<double>(n));
      scale(j) = rms > 1e-300 ? rms : 1.0;
      z.col(j) /= scale(j);
    }
    Eigen::MatrixXd gram = z.transpose() * z;
    gram.diagonal().array() += ridge;
    const Eigen::VectorXd rhs = z.transpose() * (target.array() - y_mean).matrix();
    const Eigen::LDLT<Eigen::MatrixXd> ldlt(gram);
    if (ldlt.info() != Eigen::Success) throw FittingError("least squares: normal equations failed to factor");
    const Eigen::VectorXd beta = ldlt.solve(rhs);
    out.coefficients = beta.cwiseQuotient(scale);
    if (!out.coefficients.allFinite()) throw FittingError("least squares: non-finite coefficients");
    out.intercept = y_mean - mu.dot(out.coefficients);
  } else {
    out.intercept = y_mean;
  }
  const Eigen::VectorXd resid = target - (features * out.coefficients).array().matrix() -
                                Eigen::VectorXd::Constant(n, out.intercept);
  out.rss = resid.squaredNorm();
  return out;
}

namespace {

void require_rows(std::size_t rows, std::size_t features, const std::string& room) {
  if (rows < std::max<std::size_t>(1, 10 * features)) {
    throw FittingError("room '" + room + "': " + std::to_string(rows) + " regression rows, need at least " +
                       std::to_string(10 * features) + " for " + std::to_string(features) + " features");
  }
}

std::string period_of(const sim::RoomDataset& data) {
  if (data.size() == 0) return "";
  return format_iso8601(data.timestamps.front()) + "/" + format_iso8601(data.timestamps.back());
}

}  // namespace

BaseModel fit_least_squares(const sim::RoomDataset& data, const FeatureSpec& spec, double ridge) {
  const DesignMatrix dm = build_design_matrix(data, spec);
  require_rows(dm.rows.size(), spec.size(), data.room_id);
  const LeastSquaresResult fit = solve_least_squares(dm.features, dm.target, ridge);

  BaseModel m;
  m.spec = spec;
  m.coefficients.assign(fit.coefficients.data(), fit.coefficients.data() + fit.coefficients.size());
  m.intercept = fit.intercept;
  m.source_room = data.room_id;
  m.method = FitMethod::Mlr;
  m.training_period = period_of(data);
  m.variable_count = variable_count(m);
  return m;
}

double bic(double rss, std::size_t n, std::size_t k) {
  const double nd = static_cast<double>(n);
  return nd * std::log(std::max(rss / nd, 1e-300)) + static_cast<double>(k) * std::log(nd);
}

StepwiseResult stepwise_select(const Eigen::MatrixXd& dictionary, const Eigen::VectorXd& target,
                               const std::vector<std::size_t>& forced, std::size_t max_terms, double ridge) {
  const auto n = static_cast<std::size_t>(dictionary.rows());
  const auto F = static_cast<std::size_t>(dictionary.cols());
  for (std::size_t j : forced) {
    if (j >= F) throw ContractViolation("stepwise: forced column out of range");
  }

  auto fit_subset = [&](const std::vector<std::size_t>& cols) {
    Eigen::MatrixXd sub(dictionary.rows(), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t i = 0; i < cols.size(); ++i) {
      sub.col(static_cast<Eigen::Index>(i)) = dictionary.col(static_cast<Eigen::Index>(cols[i]));
    }
    return solve_least_squares(sub, target, ridge);
  };

  StepwiseResult result;
  result.selected = forced;
  result.fit = fit_subset(result.selected);
  double current_bic = bic(result.fit.rss, n, result.selected.size() + 1);

  while (result.selected.size() < max_terms) {
    std::size_t best = F;
    LeastSquaresResult best_fit;
    for (std::size_t j = 0; j < F; ++j) {
      if (std::find(result.selected.begin(), result.selected.end(), j) != result.selected.end()) continue;
      auto cols = result.selected;
      cols.push_back(j);
      LeastSquaresResult fit = fit_subset(cols);
      if (best == F || fit.rss < best_fit.rss) {
        best = j;
        best_fit = std::move(fit);
      }
    }
    if (best == F) break;
    const double candidate_bic = bic(best_fit.rss, n, result.selected.size() + 2);
    if (!(candidate_bic < current_bic)) break;
    result.selected.push_back(best);
    result.fit = std::move(best_fit);
    current_bic = candidate_bic;
  }
  return result;
}

BaseModel fit_dictionary_regression(const sim::RoomDataset& data, const FeatureSpec& dictionary,
                                    const DictionaryFitOptions& options) {
  const DesignMatrix dm = build_design_matrix(data, dictionary);
  require_rows(dm.rows.size(), dictionary.size(), data.room_id);

  std::vector<std::size_t> forced;
  const auto texts = dictionary.texts();
  for (const auto& name : options.forced) {
    const std::string canonical = Feature::parse(name).to_string();
    const auto it = std::find(texts.begin(), texts.end(), canonical);
    if (it == texts.end()) throw ContractViolation("forced term '" + name + "' is not in the dictionary");
    forced.push_back(static_cast<std::size_t>(it - texts.begin()));
  }
  if (forced.size() > options.max_terms) throw ContractViolation("more forced terms than max_terms");

  const StepwiseResult sel = stepwise_select(dm.features, dm.target, forced, options.max_terms, options.ridge);

  // Keep dictionary order in the stored spec so the model reads naturally.
  std::vector<std::size_t> order = sel.selected;
  std::vector<std::size_t> perm(order.size());
  std::iota(perm.begin(), perm.end(), 0);
  std::sort(perm.begin(), perm.end(), [&](std::size_t a, std::size_t b) { return order[a] < order[b]; });

  BaseModel m;
  m.spec.lookback = dictionary.lookback;
  for (std::size_t p : perm) {
    m.spec.features.push_back(dictionary.features[order[p]]);
    m.coefficients.push_back(sel.fit.coefficients(static_cast<Eigen::Index>(p)));
  }
  m.intercept = sel.fit.intercept;
  m.source_room = data.room_id;
  m.method = FitMethod::Dictionary;
  m.training_period = period_of(data);
  m.variable_count = variable_count(m);
  return m;
}

std::vector<int> ModelLibrary::variable_counts(VariableCountMode mode) const {
  std::vector<int> out;
  out.reserve(models_.size());
  for (const auto& m : models_) out.push_back(variable_count(m, mode));
  return out;
}

std::size_t ModelLibrary::lookback() const {
  std::size_t L = 1;
  for (const auto& m : models_) L = std::max(L, m.spec.lookback);
  return L;
}

}  // namespace reem::models

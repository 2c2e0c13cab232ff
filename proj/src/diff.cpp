#include "reem/diff.hpp"

#include "reem/errors.hpp"

#include <boost/math/special_functions/digamma.hpp>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <memory>
#include <numeric>
#include <sstream>

namespace reem::diff {

namespace {

std::size_t product(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

void require(bool condition, const std::string& message) {
  if (!condition) throw ContractViolation(message);
}

void require_same_shape(const Var& a, const Var& b, std::string_view op) {
  if (!a.value().same_shape(b.value())) {
    throw ContractViolation(std::string(op) + ": shape mismatch " + shape_string(a.value().shape()) +
                            " vs " + shape_string(b.value().shape()));
  }
}

template <typename F>
Tensor map_values(const Tensor& in, F f) {
  Tensor out(in.shape());
  auto src = in.values();
  auto dst = out.values();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = f(src[i]);
  return out;
}

// Elementwise op whose derivative is a function of (input, output).
template <typename F, typename D>
Var unary(std::string_view op, Var a, F f, D df) {
  Tape& tape = a.tape();
  Tensor out = map_values(a.value(), f);
  const int ia = a.id();
  return tape.record(op, std::move(out), {a}, [ia, df](Tape& t, const Tensor& g) {
    if (!t.requires_grad(ia)) return;
    const auto x = t.value(ia).values();
    auto dx = t.grad_buffer(ia).values();
    const auto gv = g.values();
    for (std::size_t i = 0; i < x.size(); ++i) dx[i] += gv[i] * df(x[i]);
  });
}

double stable_log_sigmoid(double x) {
  return x >= 0.0 ? -std::log1p(std::exp(-x)) : x - std::log1p(std::exp(x));
}

double stable_sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

// ---- Tensor ---------------------------------------------------------------

Tensor::Tensor(Shape shape) : shape_(std::move(shape)), values_(product(shape_), 0.0) {}

Tensor::Tensor(Shape shape, std::vector<double> values)
    : shape_(std::move(shape)), values_(std::move(values)) {
  require(values_.size() == product(shape_), "Tensor: " + std::to_string(values_.size()) +
                                                 " values do not fit shape " + shape_string(shape_));
}

Tensor Tensor::scalar(double value) { return Tensor({}, {value}); }

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::vector<double> values) {
  return Tensor({rows, cols}, std::move(values));
}

std::size_t Tensor::rows() const noexcept {
  if (shape_.empty()) return 1;
  return shape_.back() == 0 ? 0 : values_.size() / shape_.back();
}

std::size_t Tensor::cols() const noexcept { return shape_.empty() ? 1 : shape_.back(); }

double Tensor::item() const {
  require(values_.size() == 1, "Tensor::item on non-scalar of shape " + shape_string(shape_));
  return values_[0];
}

Eigen::Map<RowMatrix> Tensor::mat() {
  return {values_.data(), static_cast<Eigen::Index>(rows()), static_cast<Eigen::Index>(cols())};
}

Eigen::Map<const RowMatrix> Tensor::mat() const {
  return {values_.data(), static_cast<Eigen::Index>(rows()), static_cast<Eigen::Index>(cols())};
}

bool Tensor::all_finite() const noexcept {
  return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ']';
  return os.str();
}

// ---- ParameterSet -----------------------------------------------------------

Tensor& ParameterSet::add(std::string name, Tensor init) {
  require(!index_.contains(name), "ParameterSet: duplicate name '" + name + "'");
  index_.emplace(name, entries_.size());
  entries_.emplace_back(std::move(name), std::move(init));
  return entries_.back().second;
}

Tensor& ParameterSet::add_glorot(std::string name, Shape shape, std::size_t fan_in,
                                 std::size_t fan_out, std::mt19937_64& rng) {
  const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> dist(-a, a);
  Tensor t(std::move(shape));
  for (double& v : t.values()) v = dist(rng);
  return add(std::move(name), std::move(t));
}

Tensor& ParameterSet::add_zeros(std::string name, Shape shape) {
  return add(std::move(name), Tensor(std::move(shape)));
}

bool ParameterSet::contains(std::string_view name) const { return index_.contains(std::string(name)); }

Tensor& ParameterSet::at(std::string_view name) {
  auto it = index_.find(std::string(name));
  require(it != index_.end(), "ParameterSet: no parameter named '" + std::string(name) + "'");
  return entries_[it->second].second;
}

const Tensor& ParameterSet::at(std::string_view name) const {
  return const_cast<ParameterSet*>(this)->at(name);
}

std::size_t ParameterSet::scalar_count() const noexcept {
  std::size_t n = 0;
  for (const auto& [name, t] : entries_) n += t.size();
  return n;
}

bool ParameterSet::same_layout(const ParameterSet& other) const {
  if (entries_.size() != other.entries_.size()) return false;
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    if (entries_[i].first != other.entries_[i].first) return false;
    if (!entries_[i].second.same_shape(other.entries_[i].second)) return false;
  }
  return true;
}

ParameterSet ParameterSet::subset(std::string_view prefix) const {
  ParameterSet out;
  for (const auto& [name, t] : entries_) {
    if (name.starts_with(prefix)) out.add(name, t);
  }
  return out;
}

void ParameterSet::assign_from(const ParameterSet& other) {
  for (const auto& [name, t] : other) {
    Tensor& mine = at(name);
    require(mine.same_shape(t), "ParameterSet::assign_from: shape mismatch for '" + name + "'");
    mine = t;
  }
}

void ParameterSet::merge(const ParameterSet& other) {
  for (const auto& [name, t] : other) add(name, t);
}

std::string ParameterSet::to_json_string() const {
  nlohmann::ordered_json doc = nlohmann::ordered_json::object();
  for (const auto& [name, t] : entries_) {
    doc[name] = {{"shape", t.shape()},
                 {"values", std::vector<double>(t.values().begin(), t.values().end())}};
  }
  return doc.dump();
}

ParameterSet ParameterSet::from_json_string(std::string_view text) {
  const auto doc = nlohmann::ordered_json::parse(text);
  require(doc.is_object(), "ParameterSet JSON: top level must be an object");
  ParameterSet out;
  for (const auto& [name, entry] : doc.items()) {
    auto shape = entry.at("shape").get<Shape>();
    auto values = entry.at("values").get<std::vector<double>>();
    out.add(name, Tensor(std::move(shape), std::move(values)));
  }
  return out;
}

void ParameterSet::save(const std::filesystem::path& path) const {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << to_json_string() << '\n';
}

ParameterSet ParameterSet::load(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw PrerequisiteError("missing parameter file " + path.string());
  std::stringstream ss;
  ss << is.rdbuf();
  return from_json_string(ss.str());
}

bool operator==(const ParameterSet& a, const ParameterSet& b) {
  if (!a.same_layout(b)) return false;
  for (std::size_t i = 0; i < a.entries_.size(); ++i) {
    const auto x = a.entries_[i].second.values();
    const auto y = b.entries_[i].second.values();
    if (!std::equal(x.begin(), x.end(), y.begin())) return false;
  }
  return true;
}

// ---- Tape -------------------------------------------------------------------

const Tensor& Var::value() const { return tape_->value(id_); }

Var Tape::constant(Tensor value) { return record("constant", std::move(value), {}, nullptr); }

Var Tape::variable(const std::string& name, Tensor value) {
  if (auto it = named_.find(name); it != named_.end()) return Var(this, it->second);
  if (!value.all_finite()) throw NumericError("non-finite value in variable '" + name + "'");
  Node node;
  node.op = "variable";
  node.value = std::move(value);
  node.requires_grad = true;
  node.name = name;
  nodes_.push_back(std::move(node));
  const int id = static_cast<int>(nodes_.size()) - 1;
  named_.emplace(name, id);
  return Var(this, id);
}

Var Tape::parameter(const ParameterSet& params, const std::string& name) {
  if (auto it = named_.find(name); it != named_.end()) return Var(this, it->second);
  return variable(name, params.at(name));
}

Var Tape::record(std::string_view op, Tensor value, std::initializer_list<Var> parents,
                 BackwardFn fn) {
  return record(op, std::move(value), std::vector<Var>(parents), std::move(fn));
}

Var Tape::record(std::string_view op, Tensor value, const std::vector<Var>& parents,
                 BackwardFn fn) {
  if (!value.all_finite()) {
    throw NumericError("non-finite value produced by op '" + std::string(op) + "' at node " +
                       std::to_string(nodes_.size()));
  }
  Node node;
  node.op = std::string(op);
  node.value = std::move(value);
  for (const Var& p : parents) {
    if (p.tape_ != this) throw ContractViolation("op '" + node.op + "' mixes tapes");
    node.requires_grad = node.requires_grad || nodes_[static_cast<std::size_t>(p.id_)].requires_grad;
  }
  if (node.requires_grad) node.backward = std::move(fn);
  nodes_.push_back(std::move(node));
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Tensor& Tape::grad_buffer(int id) {
  Node& node = nodes_[static_cast<std::size_t>(id)];
  if (node.grad.size() != node.value.size() || !node.grad.same_shape(node.value)) {
    node.grad = Tensor::zeros_like(node.value);
  }
  return node.grad;
}

GradientMap Tape::backward(Var output) {
  if (output.tape_ != this) throw ContractViolation("backward: output belongs to another tape");
  const auto out_id = static_cast<std::size_t>(output.id_);
  if (nodes_[out_id].value.size() != 1) {
    throw ContractViolation("backward: output must be scalar, got shape " +
                            shape_string(nodes_[out_id].value.shape()));
  }
  for (Node& n : nodes_) n.grad = Tensor();
  grad_buffer(output.id_)[0] = 1.0;

  for (std::size_t i = out_id + 1; i-- > 0;) {
    Node& node = nodes_[i];
    if (!node.requires_grad || !node.backward || node.grad.size() == 0) continue;
    if (!node.grad.all_finite()) {
      throw NumericError("non-finite gradient at node " + std::to_string(i) + " (op '" + node.op +
                         "')");
    }
    // Callbacks only touch gradient buffers of earlier nodes.
    node.backward(*this, node.grad);
  }

  GradientMap grads;
  for (const auto& [name, id] : named_) {
    Node& node = nodes_[static_cast<std::size_t>(id)];
    Tensor g = node.grad.size() ? node.grad : Tensor::zeros_like(node.value);
    if (!g.all_finite()) throw NumericError("non-finite gradient for variable '" + name + "'");
    grads.emplace(name, std::move(g));
  }
  return grads;
}

std::vector<char> Tape::branch_signature() const {
  std::vector<char> out;
  for (const Node& n : nodes_) out.insert(out.end(), n.branch.begin(), n.branch.end());
  return out;
}

// ---- ops --------------------------------------------------------------------

Var matmul(Var a, Var b) {
  require(a.cols() == b.rows(), "matmul: inner dimensions differ (" + std::to_string(a.cols()) +
                                    " vs " + std::to_string(b.rows()) + ")");
  Tensor out({a.rows(), b.cols()});
  out.mat().noalias() = a.value().mat() * b.value().mat();
  const int ia = a.id(), ib = b.id();
  return a.tape().record("matmul", std::move(out), {a, b}, [ia, ib](Tape& t, const Tensor& g) {
    if (t.requires_grad(ia)) t.grad_buffer(ia).mat().noalias() += g.mat() * t.value(ib).mat().transpose();
    if (t.requires_grad(ib)) t.grad_buffer(ib).mat().noalias() += t.value(ia).mat().transpose() * g.mat();
  });
}

Var batched_matmul(Var a, Var b, std::size_t batch, bool transpose_b) {
  require(batch > 0 && a.rows() % batch == 0 && b.rows() % batch == 0,
          "batched_matmul: rows not divisible by batch");
  const auto m = static_cast<Eigen::Index>(a.rows() / batch);
  const auto k = static_cast<Eigen::Index>(a.cols());
  const auto brows = static_cast<Eigen::Index>(b.rows() / batch);
  const auto bcols = static_cast<Eigen::Index>(b.cols());
  require(transpose_b ? bcols == k : brows == k, "batched_matmul: inner dimensions differ");
  const Eigen::Index n = transpose_b ? brows : bcols;

  Tensor out({batch * static_cast<std::size_t>(m), static_cast<std::size_t>(n)});
  {
    auto A = a.value().mat();
    auto B = b.value().mat();
    auto O = out.mat();
    for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(batch); ++i) {
      auto Bi = B.middleRows(i * brows, brows);
      if (transpose_b) {
        O.middleRows(i * m, m).noalias() = A.middleRows(i * m, m) * Bi.transpose();
      } else {
        O.middleRows(i * m, m).noalias() = A.middleRows(i * m, m) * Bi;
      }
    }
  }
  const int ia = a.id(), ib = b.id();
  return a.tape().record(
      "batched_matmul", std::move(out), {a, b},
      [=](Tape& t, const Tensor& g) {
        auto A = t.value(ia).mat();
        auto B = t.value(ib).mat();
        auto G = g.mat();
        for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(batch); ++i) {
          auto Gi = G.middleRows(i * m, m);
          auto Ai = A.middleRows(i * m, m);
          auto Bi = B.middleRows(i * brows, brows);
          if (t.requires_grad(ia)) {
            auto dA = t.grad_buffer(ia).mat().middleRows(i * m, m);
            if (transpose_b) dA.noalias() += Gi * Bi;
            else dA.noalias() += Gi * Bi.transpose();
          }
          if (t.requires_grad(ib)) {
            auto dB = t.grad_buffer(ib).mat().middleRows(i * brows, brows);
            if (transpose_b) dB.noalias() += Gi.transpose() * Ai;
            else dB.noalias() += Ai.transpose() * Gi;
          }
        }
      });
}

Var add(Var a, Var b) {
  require_same_shape(a, b, "add");
  Tensor out = a.value();
  out.mat() += b.value().mat();
  const int ia = a.id(), ib = b.id();
  return a.tape().record("add", std::move(out), {a, b}, [ia, ib](Tape& t, const Tensor& g) {
    if (t.requires_grad(ia)) t.grad_buffer(ia).mat() += g.mat();
    if (t.requires_grad(ib)) t.grad_buffer(ib).mat() += g.mat();
  });
}

Var sub(Var a, Var b) {
  require_same_shape(a, b, "sub");
  Tensor out = a.value();
  out.mat() -= b.value().mat();
  const int ia = a.id(), ib = b.id();
  return a.tape().record("sub", std::move(out), {a, b}, [ia, ib](Tape& t, const Tensor& g) {
    if (t.requires_grad(ia)) t.grad_buffer(ia).mat() += g.mat();
    if (t.requires_grad(ib)) t.grad_buffer(ib).mat() -= g.mat();
  });
}

Var mul(Var a, Var b) {
  require_same_shape(a, b, "mul");
  Tensor out = a.value();
  out.mat().array() *= b.value().mat().array();
  const int ia = a.id(), ib = b.id();
  return a.tape().record("mul", std::move(out), {a, b}, [ia, ib](Tape& t, const Tensor& g) {
    if (t.requires_grad(ia)) t.grad_buffer(ia).mat().array() += g.mat().array() * t.value(ib).mat().array();
    if (t.requires_grad(ib)) t.grad_buffer(ib).mat().array() += g.mat().array() * t.value(ia).mat().array();
  });
}

Var add_bias(Var a, Var bias) {
  require(bias.value().size() == a.cols(), "add_bias: bias has " +
                                               std::to_string(bias.value().size()) + " entries, need " +
                                               std::to_string(a.cols()));
  Tensor out = a.value();
  const Eigen::Map<const Eigen::RowVectorXd> bv(bias.value().values().data(),
                                                static_cast<Eigen::Index>(a.cols()));
  out.mat().rowwise() += bv;
  const int ia = a.id(), ib = bias.id();
  return a.tape().record("add_bias", std::move(out), {a, bias}, [ia, ib](Tape& t, const Tensor& g) {
    if (t.requires_grad(ia)) t.grad_buffer(ia).mat() += g.mat();
    if (t.requires_grad(ib)) {
      Tensor& db = t.grad_buffer(ib);
      Eigen::Map<Eigen::RowVectorXd> dbv(db.values().data(), static_cast<Eigen::Index>(db.size()));
      dbv += g.mat().colwise().sum();
    }
  });
}

Var scale(Var a, double factor) {
  Tensor out = a.value();
  out.mat() *= factor;
  const int ia = a.id();
  return a.tape().record("scale", std::move(out), {a}, [ia, factor](Tape& t, const Tensor& g) {
    if (t.requires_grad(ia)) t.grad_buffer(ia).mat() += factor * g.mat();
  });
}

Var add_scalar(Var a, double offset) {
  Tensor out = a.value();
  out.mat().array() += offset;
  const int ia = a.id();
  return a.tape().record("add_scalar", std::move(out), {a}, [ia](Tape& t, const Tensor& g) {
    if (t.requires_grad(ia)) t.grad_buffer(ia).mat() += g.mat();
  });
}

Var mul_const(Var a, const Tensor& c) {
  require(a.value().same_shape(c), "mul_const: shape mismatch");
  Tensor out = a.value();
  out.mat().array() *= c.mat().array();
  const int ia = a.id();
  return a.tape().record("mul_const", std::move(out), {a}, [ia, c](Tape& t, const Tensor& g) {
    if (t.requires_grad(ia)) t.grad_buffer(ia).mat().array() += g.mat().array() * c.mat().array();
  });
}

Var scale_rows(Var a, std::span<const double> c) {
  require(c.size() == a.rows(), "scale_rows: need one factor per row");
  const Eigen::VectorXd factors = Eigen::Map<const Eigen::VectorXd>(c.data(), static_cast<Eigen::Index>(c.size()));
  Tensor out = a.value();
  out.mat().array().colwise() *= factors.array();
  const int ia = a.id();
  return a.tape().record("scale_rows", std::move(out), {a}, [ia, factors](Tape& t, const Tensor& g) {
    if (t.requires_grad(ia)) t.grad_buffer(ia).mat().array() += g.mat().array().colwise() * factors.array();
  });
}

Var relu(Var a) {
  Var out = unary("relu", a, [](double x) { return x > 0.0 ? x : 0.0; },
                  [](double x) { return x > 0.0 ? 1.0 : 0.0; });
  std::vector<char> flags;
  for (double x : a.value().values()) flags.push_back(x > 0.0);
  a.tape().set_branch(out.id(), std::move(flags));
  return out;
}

Var tanh(Var a) {
  return unary("tanh", a, [](double x) { return std::tanh(x); },
               [](double x) {
                 const double y = std::tanh(x);
                 return 1.0 - y * y;
               });
}

Var sigmoid(Var a) {
  return unary("sigmoid", a, stable_sigmoid, [](double x) {
    const double s = stable_sigmoid(x);
    return s * (1.0 - s);
  });
}

Var log_sigmoid(Var a) {
  return unary("log_sigmoid", a, stable_log_sigmoid, [](double x) { return stable_sigmoid(-x); });
}

Var exp(Var a) {
  return unary("exp", a, [](double x) { return std::exp(x); }, [](double x) { return std::exp(x); });
}

Var log(Var a) {
  for (double v : a.value().values()) {
    if (!(v > 0.0)) throw NumericError("log: non-positive input " + std::to_string(v));
  }
  return unary("log", a, [](double x) { return std::log(x); }, [](double x) { return 1.0 / x; });
}

Var lgamma(Var a) {
  return unary("lgamma", a, [](double x) { return std::lgamma(x); },
               [](double x) { return boost::math::digamma(x); });
}

Var square(Var a) {
  return unary("square", a, [](double x) { return x * x; }, [](double x) { return 2.0 * x; });
}

Var clamp(Var a, double lo, double hi) {
  require(lo <= hi, "clamp: lo > hi");
  Var out = unary("clamp", a, [lo, hi](double x) { return std::clamp(x, lo, hi); },
                  [lo, hi](double x) { return (x > lo && x < hi) ? 1.0 : 0.0; });
  std::vector<char> flags;
  for (double x : a.value().values()) flags.push_back(static_cast<char>((x > lo) + (x < hi)));
  a.tape().set_branch(out.id(), std::move(flags));
  return out;
}

Var sum(Var a) {
  const double s = a.value().mat().sum();
  const int ia = a.id();
  return a.tape().record("sum", Tensor::scalar(s), {a}, [ia](Tape& t, const Tensor& g) {
    if (t.requires_grad(ia)) t.grad_buffer(ia).mat().array() += g[0];
  });
}

Var mean(Var a) {
  require(a.value().size() > 0, "mean: empty tensor");
  const auto n = static_cast<double>(a.value().size());
  const double s = a.value().mat().sum() / n;
  const int ia = a.id();
  return a.tape().record("mean", Tensor::scalar(s), {a}, [ia, n](Tape& t, const Tensor& g) {
    if (t.requires_grad(ia)) t.grad_buffer(ia).mat().array() += g[0] / n;
  });
}

Var row_sum(Var a) {
  Tensor out({a.rows(), 1});
  out.mat() = a.value().mat().rowwise().sum();
  const int ia = a.id();
  return a.tape().record("row_sum", std::move(out), {a}, [ia](Tape& t, const Tensor& g) {
    if (!t.requires_grad(ia)) return;
    auto da = t.grad_buffer(ia).mat();
    da.colwise() += Eigen::Map<const Eigen::VectorXd>(g.values().data(), da.rows());
  });
}

Var concat_cols(const std::vector<Var>& parts) {
  require(!parts.empty(), "concat_cols: no inputs");
  const std::size_t rows = parts.front().rows();
  std::size_t cols = 0;
  for (const Var& p : parts) {
    require(p.rows() == rows, "concat_cols: row counts differ");
    cols += p.cols();
  }
  Tensor out({rows, cols});
  std::vector<std::pair<int, Eigen::Index>> layout;
  Eigen::Index offset = 0;
  for (const Var& p : parts) {
    const auto c = static_cast<Eigen::Index>(p.cols());
    out.mat().middleCols(offset, c) = p.value().mat();
    layout.emplace_back(p.id(), offset);
    offset += c;
  }
  return parts.front().tape().record("concat_cols", std::move(out), parts,
                                     [layout](Tape& t, const Tensor& g) {
                                       for (const auto& [id, off] : layout) {
                                         if (!t.requires_grad(id)) continue;
                                         Tensor& d = t.grad_buffer(id);
                                         d.mat() += g.mat().middleCols(off, static_cast<Eigen::Index>(d.cols()));
                                       }
                                     });
}

Var select_rows(Var a, std::vector<std::size_t> rows) {
  const std::size_t cols = a.cols();
  Tensor out({rows.size(), cols});
  for (std::size_t r = 0; r < rows.size(); ++r) {
    require(rows[r] < a.rows(), "select_rows: index out of range");
    out.mat().row(static_cast<Eigen::Index>(r)) = a.value().mat().row(static_cast<Eigen::Index>(rows[r]));
  }
  const int ia = a.id();
  return a.tape().record("select_rows", std::move(out), {a},
                         [ia, rows = std::move(rows)](Tape& t, const Tensor& g) {
                           if (!t.requires_grad(ia)) return;
                           auto da = t.grad_buffer(ia).mat();
                           for (std::size_t r = 0; r < rows.size(); ++r) {
                             da.row(static_cast<Eigen::Index>(rows[r])) += g.mat().row(static_cast<Eigen::Index>(r));
                           }
                         });
}

Tensor masked_softmax_values(const Tensor& logits, const Tensor& mask) {
  require(logits.same_shape(mask), "masked_softmax: mask shape " + shape_string(mask.shape()) +
                                       " differs from logits " + shape_string(logits.shape()));
  Tensor out(logits.shape());
  const std::size_t rows = logits.rows(), cols = logits.cols();
  for (std::size_t r = 0; r < rows; ++r) {
    double max_logit = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < cols; ++c) {
      if (mask.at(r, c) != 0.0) max_logit = std::max(max_logit, logits.at(r, c));
    }
    if (!std::isfinite(max_logit)) {
      throw ContractViolation("masked_softmax: row " + std::to_string(r) + " has no unmasked entry");
    }
    double total = 0.0;
    for (std::size_t c = 0; c < cols; ++c) {
      const double e = mask.at(r, c) != 0.0 ? std::exp(logits.at(r, c) - max_logit) : 0.0;
      out.at(r, c) = e;
      total += e;
    }
    for (std::size_t c = 0; c < cols; ++c) out.at(r, c) /= total;
  }
  return out;
}

Var masked_softmax(Var logits, const Tensor& mask) {
  Tensor out = masked_softmax_values(logits.value(), mask);
  const int il = logits.id();
  Tape& tape = logits.tape();
  const int self = static_cast<int>(tape.size());
  return tape.record("masked_softmax", std::move(out), {logits}, [il, self](Tape& t, const Tensor& g) {
    if (!t.requires_grad(il)) return;
    auto y = t.value(self).mat().array();
    auto G = g.mat().array();
    const Eigen::VectorXd dot = (y * G).rowwise().sum();
    t.grad_buffer(il).mat().array() += y * (G.colwise() - dot.array());
  });
}

Var softmax_rows(Var logits) {
  Tensor mask(logits.value().shape());
  std::fill(mask.values().begin(), mask.values().end(), 1.0);
  return masked_softmax(logits, mask);
}

Var causal_conv1d(Var input, Var weight, Var bias, std::size_t dilation, std::size_t seq_len) {
  const Shape& ws = weight.value().shape();
  require(ws.size() == 3, "causal_conv1d: weight must be {K, c_in, c_out}, got " + shape_string(ws));
  const std::size_t K = ws[0], c_in = ws[1], c_out = ws[2];
  require(K >= 1 && dilation >= 1 && seq_len >= 1, "causal_conv1d: K, dilation, seq_len must be >= 1");
  require(input.cols() == c_in, "causal_conv1d: input has " + std::to_string(input.cols()) +
                                    " channels, weight expects " + std::to_string(c_in));
  require(input.rows() % seq_len == 0, "causal_conv1d: rows not a multiple of seq_len");
  require(bias.value().size() == c_out, "causal_conv1d: bias size differs from c_out");

  const std::size_t rows = input.rows();
  const std::size_t batch = rows / seq_len;
  auto col = std::make_shared<RowMatrix>(RowMatrix::Zero(static_cast<Eigen::Index>(rows),
                                                         static_cast<Eigen::Index>(K * c_in)));
  const auto X = input.value().mat();
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t t = 0; t < seq_len; ++t) {
      const auto r = static_cast<Eigen::Index>(b * seq_len + t);
      for (std::size_t k = 0; k < K; ++k) {
        const std::size_t lag = (K - 1 - k) * dilation;
        if (lag > t) continue;
        col->block(r, static_cast<Eigen::Index>(k * c_in), 1, static_cast<Eigen::Index>(c_in)) =
            X.row(r - static_cast<Eigen::Index>(lag));
      }
    }
  }
  const Eigen::Map<const RowMatrix> W(weight.value().values().data(), static_cast<Eigen::Index>(K * c_in),
                                      static_cast<Eigen::Index>(c_out));
  Tensor out({rows, c_out});
  out.mat().noalias() = (*col) * W;
  out.mat().rowwise() += Eigen::Map<const Eigen::RowVectorXd>(bias.value().values().data(),
                                                              static_cast<Eigen::Index>(c_out));

  const int ii = input.id(), iw = weight.id(), ib = bias.id();
  return input.tape().record(
      "causal_conv1d", std::move(out), {input, weight, bias},
      [=](Tape& t, const Tensor& g) {
        const auto G = g.mat();
        if (t.requires_grad(iw)) {
          Tensor& dw = t.grad_buffer(iw);
          Eigen::Map<RowMatrix> dW(dw.values().data(), static_cast<Eigen::Index>(K * c_in),
                                   static_cast<Eigen::Index>(c_out));
          dW.noalias() += col->transpose() * G;
        }
        if (t.requires_grad(ib)) {
          Tensor& db = t.grad_buffer(ib);
          Eigen::Map<Eigen::RowVectorXd>(db.values().data(), static_cast<Eigen::Index>(c_out)) +=
              G.colwise().sum();
        }
        if (t.requires_grad(ii)) {
          const Eigen::Map<const RowMatrix> Wt(t.value(iw).values().data(),
                                               static_cast<Eigen::Index>(K * c_in),
                                               static_cast<Eigen::Index>(c_out));
          const RowMatrix dcol = G * Wt.transpose();
          auto dX = t.grad_buffer(ii).mat();
          for (std::size_t b = 0; b < batch; ++b) {
            for (std::size_t s = 0; s < seq_len; ++s) {
              const auto r = static_cast<Eigen::Index>(b * seq_len + s);
              for (std::size_t k = 0; k < K; ++k) {
                const std::size_t lag = (K - 1 - k) * dilation;
                if (lag > s) continue;
                dX.row(r - static_cast<Eigen::Index>(lag)) +=
                    dcol.block(r, static_cast<Eigen::Index>(k * c_in), 1, static_cast<Eigen::Index>(c_in));
              }
            }
          }
        }
      });
}

// ---- Adam -------------------------------------------------------------------

void Adam::ascend(ParameterSet& params, const GradientMap& grads) {
  ++steps_;
  const double bc1 = 1.0 - std::pow(config_.beta1, static_cast<double>(steps_));
  const double bc2 = 1.0 - std::pow(config_.beta2, static_cast<double>(steps_));
  for (auto& [name, value] : params) {
    auto it = grads.find(name);
    if (it == grads.end()) continue;
    const Tensor& g = it->second;
    require(g.same_shape(value), "Adam: gradient shape mismatch for '" + name + "'");
    auto [m_it, m_new] = first_.try_emplace(name, Tensor::zeros_like(value));
    auto [v_it, v_new] = second_.try_emplace(name, Tensor::zeros_like(value));
    auto m = m_it->second.values();
    auto v = v_it->second.values();
    auto theta = value.values();
    const auto gv = g.values();
    for (std::size_t i = 0; i < theta.size(); ++i) {
      m[i] = config_.beta1 * m[i] + (1.0 - config_.beta1) * gv[i];
      v[i] = config_.beta2 * v[i] + (1.0 - config_.beta2) * gv[i] * gv[i];
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      theta[i] += config_.lr * mhat / (std::sqrt(vhat) + config_.eps);
    }
  }
}

}  // namespace reem::diff

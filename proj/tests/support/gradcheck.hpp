#pragma once

// Central finite-difference oracle for tape gradients. Test-only.

#include "reem/diff.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <string>
#include <vector>

namespace reem::testing {

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t probes = 0;
  std::size_t kink_redraws = 0;
  std::string worst;
};

using ScalarFn = std::function<diff::Var(diff::Tape&, const diff::ParameterSet&)>;

inline double relative_error(double analytic, double numeric) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-6});
  return std::abs(analytic - numeric) / denom;
}

inline double evaluate(const ScalarFn& f, const diff::ParameterSet& params, std::vector<char>* pattern) {
  diff::Tape tape;
  const double v = f(tape, params).value().item();
  if (pattern) *pattern = tape.branch_signature();
  return v;
}

/// Compare analytic gradients with central differences on `probes` random
/// parameter coordinates.
inline GradCheckResult finite_difference_check(const diff::ParameterSet& params, const ScalarFn& f,
                                               std::size_t probes, std::mt19937_64& rng,
                                               double step = 1e-4) {
  diff::Tape tape;
  const diff::GradientMap grads = tape.backward(f(tape, params));

  std::vector<std::pair<std::string, std::size_t>> coords;
  for (const auto& [name, t] : params) {
    for (std::size_t i = 0; i < t.size(); ++i) coords.emplace_back(name, i);
  }
  std::uniform_int_distribution<std::size_t> pick(0, coords.size() - 1);

  GradCheckResult result;
  std::size_t attempts = 0;
  while (result.probes < probes && attempts < probes * 20) {
    ++attempts;
    const auto& [name, index] = coords[pick(rng)];
    diff::ParameterSet plus = params, minus = params;
    plus.at(name)[index] += step;
    minus.at(name)[index] -= step;
    std::vector<char> pp, pm;
    const double fp = evaluate(f, plus, &pp);
    const double fm = evaluate(f, minus, &pm);
    if (pp != pm) {
      ++result.kink_redraws;
      continue;
    }
    const double numeric = (fp - fm) / (2.0 * step);
    // Parameters the function never reads have no gradient entry.
    const auto g = grads.find(name);
    const double analytic = g == grads.end() ? 0.0 : g->second[index];
    const double err = relative_error(analytic, numeric);
    if (err > result.max_rel_error) {
      result.max_rel_error = err;
      result.worst = name + "[" + std::to_string(index) + "] analytic=" + std::to_string(analytic) +
                     " numeric=" + std::to_string(numeric);
    }
    ++result.probes;
  }
  return result;
}

}  // namespace reem::testing

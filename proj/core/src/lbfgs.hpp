#pragma once

#include <deque>
#include <functional>

#include "able/common.hpp"

namespace able::detail {

struct MinimizeResult {
  Vector x;
  double value = 0.0;
  double gradient_norm = 0.0;
  int iterations = 0;
  bool converged = false;
};

/// Objective returning f(x) and writing its gradient.
using Objective = std::function<double(const Vector& x, Vector& grad)>;

/// Limited-memory BFGS with Armijo backtracking. Deterministic for a given
/// starting point.
inline MinimizeResult minimize_lbfgs(const Objective& f, Vector x, double gradient_tolerance,
                                     int max_iterations, int memory = 10) {
  MinimizeResult out;
  Vector g(x.size());
  double value = f(x, g);
  std::deque<Vector> s_hist, y_hist;
  std::deque<double> rho_hist;

  int it = 0;
  for (; it < max_iterations; ++it) {
    if (g.norm() <= gradient_tolerance) break;

    // Two-loop recursion.
    Vector q = g;
    std::vector<double> alpha(s_hist.size());
    for (std::size_t i = s_hist.size(); i-- > 0;) {
      alpha[i] = rho_hist[i] * s_hist[i].dot(q);
      q -= alpha[i] * y_hist[i];
    }
    if (!s_hist.empty()) q *= s_hist.back().dot(y_hist.back()) / y_hist.back().squaredNorm();
    for (std::size_t i = 0; i < s_hist.size(); ++i) {
      const double beta = rho_hist[i] * y_hist[i].dot(q);
      q += (alpha[i] - beta) * s_hist[i];
    }
    Vector direction = -q;
    double slope = g.dot(direction);
    if (!(slope < 0.0)) {
      s_hist.clear();
      y_hist.clear();
      rho_hist.clear();
      direction = -g;
      slope = -g.squaredNorm();
    }

    double step = s_hist.empty() ? std::min(1.0, 1.0 / g.norm()) : 1.0;
    Vector x_new, g_new(x.size());
    double value_new = 0.0;
    bool accepted = false;
    for (int tries = 0; tries < 60; ++tries) {
      x_new = x + step * direction;
      value_new = f(x_new, g_new);
      if (std::isfinite(value_new) && value_new <= value + 1e-4 * step * slope) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;

    Vector s = x_new - x;
    Vector y = g_new - g;
    const double sy = s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm()) {
      s_hist.push_back(std::move(s));
      y_hist.push_back(std::move(y));
      rho_hist.push_back(1.0 / sy);
      if (static_cast<int>(s_hist.size()) > memory) {
        s_hist.pop_front();
        y_hist.pop_front();
        rho_hist.pop_front();
      }
    }
    x = std::move(x_new);
    g = g_new;
    value = value_new;
  }

  out.gradient_norm = g.norm();
  out.converged = out.gradient_norm <= gradient_tolerance;
  out.iterations = it;
  out.value = value;
  out.x = std::move(x);
  return out;
}

}  // namespace able::detail

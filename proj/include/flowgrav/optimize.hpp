#pragma once

#include <cmath>
#include <cstdlib>
#include <utility>

namespace flowgrav {

struct ScalarOptResult {
  double x = 0.0;
  double fx = 0.0;
  int evaluations = 0;
};

// Derivative-free minimization on [a, b]: golden-section steps refined by
// parabolic interpolation, absolute tolerance in x.
template <typename F>
ScalarOptResult minimize_scalar(F&& f, double a, double b, double tol, int max_iter = 200) {
  const double gold = 0.3819660112501051;  // 2 - golden ratio
  int evals = 0;
  double x = a + gold * (b - a);
  double w = x, v = x;
  double fx = f(x);
  ++evals;
  double fw = fx, fv = fx;
  double d = 0.0, e = 0.0;

  for (int it = 0; it < max_iter; ++it) {
    const double mid = 0.5 * (a + b);
    const double tol1 = tol;
    const double tol2 = 2.0 * tol1;
    if (std::abs(x - mid) <= tol2 - 0.5 * (b - a)) break;

    bool golden = true;
    if (std::abs(e) > tol1) {
      // Trial parabolic fit through (v, fv), (w, fw), (x, fx).
      double r = (x - w) * (fx - fv);
      double q = (x - v) * (fx - fw);
      double p = (x - v) * q - (x - w) * r;
      q = 2.0 * (q - r);
      if (q > 0.0) p = -p;
      q = std::abs(q);
      const double e_prev = e;
      e = d;
      if (std::abs(p) < std::abs(0.5 * q * e_prev) && p > q * (a - x) && p < q * (b - x)) {
        d = p / q;
        const double u = x + d;
        if (u - a < tol2 || b - u < tol2) d = (mid > x) ? tol1 : -tol1;
        golden = false;
      }
    }
    if (golden) {
      e = (x < mid) ? b - x : a - x;
      d = gold * e;
    }

    const double u = (std::abs(d) >= tol1) ? x + d : x + (d > 0.0 ? tol1 : -tol1);
    const double fu = f(u);
    ++evals;
    if (fu <= fx) {
      if (u >= x) a = x; else b = x;
      v = w; fv = fw;
      w = x; fw = fx;
      x = u; fx = fu;
    } else {
      if (u < x) a = u; else b = u;
      if (fu <= fw || w == x) {
        v = w; fv = fw;
        w = u; fw = fu;
      } else if (fu <= fv || v == x || v == w) {
        v = u; fv = fu;
      }
    }
  }
  return {x, fx, evals};
}

// Maximization wrapper with a coarse bracketing scan first, guarding against
// a locally flat or mildly multimodal profile.
template <typename F>
ScalarOptResult maximize_scalar(F&& f, double a, double b, double tol, int coarse_points = 33) {
  int evals = 0;
  double best_x = a, best_f = -HUGE_VAL;
  int best_i = 0;
  const int np = coarse_points < 3 ? 3 : coarse_points;
  for (int i = 0; i < np; ++i) {
    const double x = a + (b - a) * static_cast<double>(i) / (np - 1);
    const double fx = f(x);
    ++evals;
    if (fx > best_f) {
      best_f = fx;
      best_x = x;
      best_i = i;
    }
  }
  const double step = (b - a) / (np - 1);
  const double lo = (best_i == 0) ? a : best_x - step;
  const double hi = (best_i == np - 1) ? b : best_x + step;
  auto neg = [&](double x) { return -f(x); };
  ScalarOptResult r = minimize_scalar(neg, lo, hi, tol);
  r.fx = -r.fx;
  r.evaluations += evals;
  if (best_f > r.fx) {
    r.x = best_x;
    r.fx = best_f;
  }
  return r;
}

}  // namespace flowgrav

#ifndef FCS_BFGS_HPP
#define FCS_BFGS_HPP

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>

#include "fcs/linalg.hpp"

namespace fcs {

struct BfgsOptions {
  int max_iter = 500;
  double grad_tol = 1e-9;  // sup-norm of the gradient
  double c1 = 1e-4;
  double c2 = 0.9;
  int max_line_search = 60;
};

struct BfgsResult {
  Vector x;
  double value = 0.0;
  Vector gradient;
  int iterations = 0;
  bool converged = false;
};

namespace detail {

// Minimizer of the cubic interpolating (a, fa, ga) and (b, fb, gb), clamped
// into the safeguarded interior of [a, b].
inline double cubic_step(double a, double fa, double ga, double b, double fb, double gb) {
  const double lo = std::min(a, b), hi = std::max(a, b);
  const double d1 = ga + gb - 3.0 * (fa - fb) / (a - b);
  const double disc = d1 * d1 - ga * gb;
  double t = 0.5 * (a + b);
  if (disc >= 0.0 && std::isfinite(disc)) {
    const double d2 = std::copysign(std::sqrt(disc), b - a);
    const double denom = gb - ga + 2.0 * d2;
    if (denom != 0.0) t = b - (b - a) * (gb + d2 - d1) / denom;
  }
  const double margin = 0.1 * (hi - lo);
  if (!std::isfinite(t) || t < lo + margin || t > hi - margin) t = 0.5 * (a + b);
  return t;
}

}  // namespace detail

/// Quasi-Newton minimization with inverse-Hessian BFGS updates and a
/// strong-Wolfe line search. `fg(x, grad)` returns f(x) and writes the
/// gradient; it may return +inf outside the domain.
template <class FunGrad>
BfgsResult minimize_bfgs(FunGrad&& fg, Vector x0, const BfgsOptions& opt = {}) {
  const Index dim = x0.size();
  BfgsResult res;
  res.x = std::move(x0);
  res.gradient.resize(dim);
  res.value = fg(res.x, res.gradient);
  if (!std::isfinite(res.value)) return res;
  Matrix h = Matrix::Identity(dim, dim);
  bool scaled = false;

  Vector g_new(dim);
  for (int it = 0; it < opt.max_iter; ++it) {
    if (res.gradient.cwiseAbs().maxCoeff() <= opt.grad_tol) {
      res.converged = true;
      return res;
    }
    res.iterations = it + 1;
    Vector dir = -h * res.gradient;
    double slope = dir.dot(res.gradient);
    if (!(slope < 0.0)) {
      h.setIdentity();
      dir = -res.gradient;
      slope = dir.dot(res.gradient);
    }
    const double f0 = res.value;

    auto eval = [&](double t, double& f, double& d) {
      Vector x = res.x + t * dir;
      f = fg(x, g_new);
      d = std::isfinite(f) ? g_new.dot(dir) : std::numeric_limits<double>::quiet_NaN();
      return x;
    };

    // Bracketing phase followed by zoom (Nocedal & Wright, Alg. 3.5/3.6).
    double t_prev = 0.0, f_prev = f0, d_prev = slope;
    double t = 1.0;
    double t_lo = 0, f_lo = 0, d_lo = 0, t_hi = 0, f_hi = 0, d_hi = 0;
    bool found = false, zoom = false;
    Vector x_acc;
    double f_acc = 0.0;
    Vector g_acc;
    for (int ls = 0; ls < opt.max_line_search; ++ls) {
      double f, d;
      Vector x = eval(t, f, d);
      if (!std::isfinite(f)) {
        t = 0.5 * (t_prev + t);
        continue;
      }
      if (f > f0 + opt.c1 * t * slope || (ls > 0 && f >= f_prev)) {
        t_lo = t_prev; f_lo = f_prev; d_lo = d_prev;
        t_hi = t; f_hi = f; d_hi = d;
        zoom = true;
        break;
      }
      if (std::abs(d) <= -opt.c2 * slope) {
        x_acc = std::move(x); f_acc = f; g_acc = g_new;
        found = true;
        break;
      }
      if (d >= 0.0) {
        t_lo = t; f_lo = f; d_lo = d;
        t_hi = t_prev; f_hi = f_prev; d_hi = d_prev;
        zoom = true;
        break;
      }
      t_prev = t; f_prev = f; d_prev = d;
      t *= 2.0;
    }
    if (zoom) {
      for (int ls = 0; ls < opt.max_line_search; ++ls) {
        const double tj = detail::cubic_step(t_lo, f_lo, d_lo, t_hi, f_hi, d_hi);
        double f, d;
        Vector x = eval(tj, f, d);
        if (!std::isfinite(f) || f > f0 + opt.c1 * tj * slope || f >= f_lo) {
          t_hi = tj; f_hi = std::isfinite(f) ? f : f_hi; d_hi = std::isfinite(d) ? d : d_hi;
        } else {
          if (std::abs(d) <= -opt.c2 * slope) {
            x_acc = std::move(x); f_acc = f; g_acc = g_new;
            found = true;
            break;
          }
          if (d * (t_hi - t_lo) >= 0.0) {
            t_hi = t_lo; f_hi = f_lo; d_hi = d_lo;
          }
          t_lo = tj; f_lo = f; d_lo = d;
        }
        if (std::abs(t_hi - t_lo) < 1e-16 * std::max(1.0, std::abs(t_lo))) break;
      }
      if (!found && t_lo > 0.0 && f_lo < f0) {
        // Sufficient decrease without the curvature condition; accept.
        double f, d;
        x_acc = eval(t_lo, f, d);
        f_acc = f;
        g_acc = g_new;
        found = std::isfinite(f);
      }
    }
    if (!found) {
      if (h.isIdentity()) return res;  // no progress along steepest descent
      h.setIdentity();
      continue;
    }
    const Vector s = x_acc - res.x;
    const Vector y = g_acc - res.gradient;
    res.x = std::move(x_acc);
    res.value = f_acc;
    res.gradient = g_acc;
    const double sy = s.dot(y);
    if (sy > 1e-300) {
      if (!scaled) {
        h *= sy / y.squaredNorm();
        scaled = true;
      }
      const double rho = 1.0 / sy;
      const Vector hy = h * y;
      h += ((sy + y.dot(hy)) * rho * rho) * (s * s.transpose()) -
           rho * (hy * s.transpose() + s * hy.transpose());
    }
  }
  res.converged = res.gradient.cwiseAbs().maxCoeff() <= opt.grad_tol;
  return res;
}

}  // namespace fcs

#endif  // FCS_BFGS_HPP

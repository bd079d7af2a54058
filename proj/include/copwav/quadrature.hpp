#pragma once

#include <array>
#include <cmath>
#include <functional>
#include <stdexcept>

namespace copwav {

namespace detail {

//! 7-point Gauss-Legendre nodes and weights on [-1, 1].
inline constexpr std::array<double, 7> kGlNodes = {
    -0.9491079123427585, -0.7415311855993945, -0.4058451513773972, 0.0,
    0.4058451513773972,  0.7415311855993945,  0.9491079123427585};
inline constexpr std::array<double, 7> kGlWeights = {
    0.1294849661688697, 0.2797053914892766, 0.3818300505051189, 0.4179591836734694,
    0.3818300505051189, 0.2797053914892766, 0.1294849661688697};

inline double gl_panel_2d(const std::function<double(double, double)>& f, double ax, double bx,
                          double ay, double by) {
  const double cx = 0.5 * (ax + bx), hx = 0.5 * (bx - ax);
  const double cy = 0.5 * (ay + by), hy = 0.5 * (by - ay);
  double acc = 0.0;
  for (int i = 0; i < 7; ++i) {
    const double x = cx + hx * kGlNodes[i];
    double row = 0.0;
    for (int k = 0; k < 7; ++k) row += kGlWeights[k] * f(x, cy + hy * kGlNodes[k]);
    acc += kGlWeights[i] * row;
  }
  return acc * hx * hy;
}

inline double integrate_rect_impl(const std::function<double(double, double)>& f, double ax,
                                  double bx, double ay, double by, double tol, double coarse,
                                  int depth) {
  const double mx = 0.5 * (ax + bx), my = 0.5 * (ay + by);
  const double q11 = gl_panel_2d(f, ax, mx, ay, my);
  const double q12 = gl_panel_2d(f, ax, mx, my, by);
  const double q21 = gl_panel_2d(f, mx, bx, ay, my);
  const double q22 = gl_panel_2d(f, mx, bx, my, by);
  const double fine = q11 + q12 + q21 + q22;
  if (std::abs(fine - coarse) <= tol || depth >= 12) return fine;
  const double t = 0.25 * tol;
  return integrate_rect_impl(f, ax, mx, ay, my, t, q11, depth + 1) +
         integrate_rect_impl(f, ax, mx, my, by, t, q12, depth + 1) +
         integrate_rect_impl(f, mx, bx, ay, my, t, q21, depth + 1) +
         integrate_rect_impl(f, mx, bx, my, by, t, q22, depth + 1);
}

}  // namespace detail

//! Adaptive tensor Gauss-Legendre integral of f over [ax,bx] x [ay,by].
//! The tolerance is absolute for the whole rectangle; panels split until
//! coarse and 2x2-refined estimates agree, up to a fixed depth cap.
inline double integrate_rect(const std::function<double(double, double)>& f, double ax, double bx,
                             double ay, double by, double tol = 1e-10) {
  if (!(bx > ax) || !(by > ay)) throw std::invalid_argument("integrate_rect: empty rectangle");
  return detail::integrate_rect_impl(f, ax, bx, ay, by, tol,
                                     detail::gl_panel_2d(f, ax, bx, ay, by), 0);
}

}  // namespace copwav

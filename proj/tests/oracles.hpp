#pragma once

// Independent reference computations for the test suite. Everything here is
// written directly from the defining formulas, without reusing the library's
// evaluation paths, so disagreements point at the implementation.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

#include "copwav/wavelet.hpp"

namespace oracles {

//! Brute-force 2^j-periodization: direct sum of phi(x + m 2^j) over shifts.
inline double brute_phi_per(const copwav::FatherWavelet& w, double x, int j) {
  const double period = std::ldexp(1.0, j);
  double acc = 0.0;
  for (int m = -64; m <= 64; ++m) acc += w(x + m * period);
  return acc;
}

//! Brute-force periodized kernel sum over the 1-based translate range.
inline double brute_ktilde(const copwav::FatherWavelet& w, int j, double x, double y) {
  double acc = 0.0;
  for (long long l = 1; l <= (1LL << j); ++l)
    acc += brute_phi_per(w, x - double(l), j) * brute_phi_per(w, y - double(l), j);
  return acc;
}

//! Adaptive Simpson in one dimension (independent of the library quadrature).
inline double simpson(const std::function<double(double)>& f, double a, double b, double tol,
                      int depth = 0) {
  const double m = 0.5 * (a + b);
  const double fa = f(a), fm = f(m), fb = f(b);
  const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  const double left = (m - a) / 6.0 * (fa + 4.0 * f(lm) + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * f(rm) + fb);
  if (depth > 48) throw std::runtime_error("oracle simpson: depth exceeded");
  if (std::abs(left + right - whole) < 15.0 * tol || depth > 24) {
    return left + right + (left + right - whole) / 15.0;
  }
  return simpson(f, a, m, 0.5 * tol, depth + 1) + simpson(f, m, b, 0.5 * tol, depth + 1);
}

//! 2-d integral over a rectangle via nested adaptive Simpson.
inline double simpson2d(const std::function<double(double, double)>& f, double a1, double b1,
                        double a2, double b2, double tol) {
  return simpson(
      [&](double x) {
        return simpson([&, x](double y) { return f(x, y); }, a2, b2, tol * 0.25);
      },
      a1, b1, tol);
}

//! Two-sided KS distance of a sorted sample against Uniform(0,1).
inline double ks_uniform(std::vector<double> xs) {
  std::sort(xs.begin(), xs.end());
  const auto n = xs.size();
  double d = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double hi = double(i + 1) / double(n) - xs[i];
    const double lo = xs[i] - double(i) / double(n);
    d = std::max({d, hi, lo});
  }
  return d;
}

//! Empirical Spearman rho of paired data.
inline double spearman_rho(std::span<const double> x, std::span<const double> y) {
  const auto n = x.size();
  auto ranks = [n](std::span<const double> v) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto b) { return v[a] < v[b]; });
    std::vector<double> r(n);
    for (std::size_t p = 0; p < n; ++p) r[idx[p]] = double(p + 1);
    return r;
  };
  const auto rx = ranks(x), ry = ranks(y);
  const double mean = double(n + 1) / 2.0;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxy += (rx[i] - mean) * (ry[i] - mean);
    sxx += (rx[i] - mean) * (rx[i] - mean);
  }
  return sxy / sxx;
}

//! d=2 dyadic cell counts with the estimator's wrap convention (u=1 falls in
//! cell 0), written as a plain histogram for cross-checking Haar estimates.
inline std::vector<long> cell_counts_2d(std::span<const double> pts, int j) {
  const long m = 1L << j;
  std::vector<long> counts(m * m, 0);
  const std::size_t n = pts.size() / 2;
  for (std::size_t i = 0; i < n; ++i) {
    long a = long(std::floor(std::ldexp(pts[2 * i], j))) % m;
    long b = long(std::floor(std::ldexp(pts[2 * i + 1], j))) % m;
    if (a < 0) a += m;
    if (b < 0) b += m;
    ++counts[a * m + b];
  }
  return counts;
}

}  // namespace oracles

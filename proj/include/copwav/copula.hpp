#pragma once

#include <algorithm>
#include <cmath>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "copwav/quadrature.hpp"
#include "copwav/rng.hpp"

namespace copwav {

//! Raised when a caller asks for the sup of a density that has none.
class UnboundedDensityError : public std::domain_error {
 public:
  explicit UnboundedDensityError(const std::string& model)
      : std::domain_error("copula density is unbounded for model '" + model + "'") {}
};

namespace detail {

inline constexpr double kInvSqrt2 = 0.7071067811865476;
inline constexpr double kSqrt2Pi = 2.5066282746310002;

inline double norm_cdf(double x) { return 0.5 * std::erfc(-x * kInvSqrt2); }

//! Standard normal quantile: Acklam's rational approximation polished by
//! one Halley step, accurate to a few ulp across (0, 1).
inline double norm_quantile(double p) {
  if (!(p > 0.0) || !(p < 1.0)) throw std::invalid_argument("norm_quantile: p must be in (0,1)");
  static constexpr double a[6] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                  -2.759285104469687e+02, 1.383577518672690e+02,
                                  -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[5] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                  -1.556989798598866e+02, 6.680131188771972e+01,
                                  -1.328068155288572e+01};
  static constexpr double c[6] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                  -2.400758277161838e+00, -2.549732539343734e+00,
                                  4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[4] = {7.784695709041462e-03, 3.224671290700398e-01,
                                  2.445134137142996e+00, 3.754408661907416e+00};
  static constexpr double p_low = 0.02425;
  double x;
  if (p < p_low) {
    const double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p <= 1.0 - p_low) {
    const double q = p - 0.5, r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    const double q = std::sqrt(-2.0 * std::log1p(-p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  const double e = norm_cdf(x) - p;
  const double u = e * kSqrt2Pi * std::exp(0.5 * x * x);
  return x - u / (1.0 + 0.5 * x * u);
}

}  // namespace detail

//! A copula model on [0,1]^d: density evaluation, exact sampling, and the
//! cell means the Haar projection path consumes.
class Copula {
 public:
  virtual ~Copula() = default;

  const std::string& name() const { return name_; }
  int dim() const { return dim_; }

  virtual double density(std::span<const double> u) const = 0;
  virtual void sample(Rng& rng, std::span<double> out) const = 0;
  virtual bool bounded_density() const = 0;

  //! Interior smoothness order; every bundled model is analytic inside the
  //! cube, so this saturates and the basis order decides the effective t.
  virtual int regularity() const { return 99; }

  //! Sup of the density over the closed cube. Models without a closed form
  //! fall back to a grid scan with local refinement (d = 2 only).
  virtual double sup_density() const {
    if (!bounded_density()) throw UnboundedDensityError(name_);
    if (dim_ != 2) throw std::logic_error("sup_density: grid fallback is bivariate");
    auto eval = [&](double x, double y) {
      const double pt[2] = {x, y};
      return density(pt);
    };
    double best = 0.0, bx = 0.0, by = 0.0;
    const int n = 200;
    for (int i = 0; i <= n; ++i)
      for (int k = 0; k <= n; ++k) {
        const double v = eval(double(i) / n, double(k) / n);
        if (v > best) {
          best = v;
          bx = double(i) / n;
          by = double(k) / n;
        }
      }
    double h = 1.0 / n;
    for (int round = 0; round < 3; ++round) {
      const double x0 = std::max(0.0, bx - h), x1 = std::min(1.0, bx + h);
      const double y0 = std::max(0.0, by - h), y1 = std::min(1.0, by + h);
      for (int i = 0; i <= 20; ++i)
        for (int k = 0; k <= 20; ++k) {
          const double x = x0 + (x1 - x0) * i / 20.0;
          const double y = y0 + (y1 - y0) * k / 20.0;
          const double v = eval(x, y);
          if (v > best) {
            best = v;
            bx = x;
            by = y;
          }
        }
      h /= 10.0;
    }
    return best;
  }

  //! Mean of the density over the rectangle [lo, hi]; the default
  //! integrates numerically (d = 2 only), models with closed CDFs override.
  virtual double cell_average(std::span<const double> lo, std::span<const double> hi) const {
    check_rect(lo, hi);
    if (dim_ != 2) throw std::logic_error("cell_average: numeric fallback is bivariate");
    const double area = (hi[0] - lo[0]) * (hi[1] - lo[1]);
    auto f = [&](double x, double y) {
      const double pt[2] = {x, y};
      return density(pt);
    };
    return integrate_rect(f, lo[0], hi[0], lo[1], hi[1], 1e-11) / area;
  }

 protected:
  Copula(std::string name, int dim) : name_(std::move(name)), dim_(dim) {}

  void check_point(std::span<const double> u) const {
    if (static_cast<int>(u.size()) != dim_)
      throw std::invalid_argument("copula: point dimension mismatch");
  }
  void check_rect(std::span<const double> lo, std::span<const double> hi) const {
    if (static_cast<int>(lo.size()) != dim_ || static_cast<int>(hi.size()) != dim_)
      throw std::invalid_argument("copula: rectangle dimension mismatch");
    for (int i = 0; i < dim_; ++i)
      if (!(hi[i] > lo[i])) throw std::invalid_argument("copula: empty rectangle");
  }

 private:
  std::string name_;
  int dim_;
};

//! Product copula in any dimension: the flat density.
class IndependenceCopula final : public Copula {
 public:
  explicit IndependenceCopula(int dim = 2) : Copula("independence", dim) {
    if (dim < 1 || dim > 16) throw std::invalid_argument("independence: dim out of range [1,16]");
  }
  double density(std::span<const double> u) const override {
    check_point(u);
    return 1.0;
  }
  void sample(Rng& rng, std::span<double> out) const override {
    if (static_cast<int>(out.size()) != dim())
      throw std::invalid_argument("copula: sample dimension mismatch");
    for (auto& v : out) v = rng.uniform();
  }
  bool bounded_density() const override { return true; }
  double sup_density() const override { return 1.0; }
  double cell_average(std::span<const double> lo, std::span<const double> hi) const override {
    check_rect(lo, hi);
    return 1.0;
  }
};

//! Farlie-Gumbel-Morgenstern family, |theta| <= 1: the bilinear density
//! 1 + theta (1-2u)(1-2v).
class FgmCopula final : public Copula {
 public:
  explicit FgmCopula(double theta) : Copula("fgm", 2), theta_(theta) {
    if (!(std::abs(theta) <= 1.0)) throw std::invalid_argument("fgm: |theta| must be <= 1");
  }
  double theta() const { return theta_; }
  double density(std::span<const double> u) const override {
    check_point(u);
    return 1.0 + theta_ * (1.0 - 2.0 * u[0]) * (1.0 - 2.0 * u[1]);
  }
  double cdf(double u, double v) const {
    return u * v * (1.0 + theta_ * (1.0 - u) * (1.0 - v));
  }
  void sample(Rng& rng, std::span<double> out) const override {
    if (out.size() != 2) throw std::invalid_argument("copula: sample dimension mismatch");
    const double u = rng.uniform();
    const double w = rng.uniform();
    const double A = theta_ * (1.0 - 2.0 * u);
    // smaller root of A v^2 - (1+A) v + w = 0 in the cancellation-free form
    const double disc = (1.0 + A) * (1.0 + A) - 4.0 * A * w;
    out[0] = u;
    out[1] = 2.0 * w / ((1.0 + A) + std::sqrt(disc));
  }
  bool bounded_density() const override { return true; }
  double sup_density() const override { return 1.0 + std::abs(theta_); }
  double cell_average(std::span<const double> lo, std::span<const double> hi) const override {
    check_rect(lo, hi);
    return 1.0 + theta_ * (1.0 - lo[0] - hi[0]) * (1.0 - lo[1] - hi[1]);
  }

 private:
  double theta_;
};

//! Frank family, theta != 0: analytic bounded density with closed CDF,
//! conditional-inverse sampling.
class FrankCopula final : public Copula {
 public:
  explicit FrankCopula(double theta) : Copula("frank", 2), theta_(theta) {
    if (theta == 0.0 || !(std::abs(theta) <= 100.0))
      throw std::invalid_argument("frank: theta must be nonzero with |theta| <= 100");
  }
  double theta() const { return theta_; }
  double density(std::span<const double> u) const override {
    check_point(u);
    const double gu = std::expm1(-theta_ * u[0]);
    const double gv = std::expm1(-theta_ * u[1]);
    const double den = big_d() + gu * gv;
    return -theta_ * big_d() * std::exp(-theta_ * (u[0] + u[1])) / (den * den);
  }
  double cdf(double u, double v) const {
    const double gu = std::expm1(-theta_ * u);
    const double gv = std::expm1(-theta_ * v);
    return -std::log1p(gu * gv / big_d()) / theta_;
  }
  void sample(Rng& rng, std::span<double> out) const override {
    if (out.size() != 2) throw std::invalid_argument("copula: sample dimension mismatch");
    const double u = rng.uniform();
    const double w = rng.uniform();
    const double a = std::exp(-theta_ * u);
    const double gv = w * big_d() / (a - w * (a - 1.0));
    out[0] = u;
    out[1] = -std::log1p(gv) / theta_;
  }
  bool bounded_density() const override { return true; }
  double cell_average(std::span<const double> lo, std::span<const double> hi) const override {
    check_rect(lo, hi);
    const double mass =
        cdf(hi[0], hi[1]) - cdf(lo[0], hi[1]) - cdf(hi[0], lo[1]) + cdf(lo[0], lo[1]);
    return mass / ((hi[0] - lo[0]) * (hi[1] - lo[1]));
  }

 private:
  double big_d() const { return std::expm1(-theta_); }
  double theta_;
};

//! Clayton family, theta > 0: unbounded density at the lower corner,
//! gamma-frailty sampling, closed CDF.
class ClaytonCopula final : public Copula {
 public:
  explicit ClaytonCopula(double theta) : Copula("clayton", 2), theta_(theta) {
    if (!(theta > 0.0) || !(theta <= 100.0))
      throw std::invalid_argument("clayton: theta must be in (0, 100]");
  }
  double theta() const { return theta_; }
  double density(std::span<const double> u) const override {
    check_point(u);
    const double s = std::pow(u[0], -theta_) + std::pow(u[1], -theta_) - 1.0;
    return (1.0 + theta_) * std::pow(u[0] * u[1], -theta_ - 1.0) *
           std::pow(s, -1.0 / theta_ - 2.0);
  }
  double cdf(double u, double v) const {
    if (u <= 0.0 || v <= 0.0) return 0.0;
    const double s = std::pow(u, -theta_) + std::pow(v, -theta_) - 1.0;
    return std::pow(s, -1.0 / theta_);
  }
  void sample(Rng& rng, std::span<double> out) const override {
    if (out.size() != 2) throw std::invalid_argument("copula: sample dimension mismatch");
    const double w = rng.gamma(1.0 / theta_);
    for (int i = 0; i < 2; ++i) {
      const double e = -std::log(rng.uniform());
      out[static_cast<std::size_t>(i)] = std::exp(-std::log1p(e / w) / theta_);
    }
  }
  bool bounded_density() const override { return false; }
  double cell_average(std::span<const double> lo, std::span<const double> hi) const override {
    check_rect(lo, hi);
    const double mass =
        cdf(hi[0], hi[1]) - cdf(lo[0], hi[1]) - cdf(hi[0], lo[1]) + cdf(lo[0], lo[1]);
    return mass / ((hi[0] - lo[0]) * (hi[1] - lo[1]));
  }

 private:
  double theta_;
};

//! Gaussian copula, |rho| < 1: bounded only in the independence case,
//! sampled through a correlated normal pair.
class GaussianCopula final : public Copula {
 public:
  explicit GaussianCopula(double rho) : Copula("gauss", 2), rho_(rho) {
    if (!(std::abs(rho) < 1.0)) throw std::invalid_argument("gauss: |rho| must be < 1");
  }
  double rho() const { return rho_; }
  double density(std::span<const double> u) const override {
    check_point(u);
    const double x = detail::norm_quantile(u[0]);
    const double y = detail::norm_quantile(u[1]);
    const double r2 = 1.0 - rho_ * rho_;
    const double q = rho_ * rho_ * (x * x + y * y) - 2.0 * rho_ * x * y;
    return std::exp(-0.5 * q / r2) / std::sqrt(r2);
  }
  void sample(Rng& rng, std::span<double> out) const override {
    if (out.size() != 2) throw std::invalid_argument("copula: sample dimension mismatch");
    const double z1 = rng.normal();
    const double z2 = rng.normal();
    out[0] = detail::norm_cdf(z1);
    out[1] = detail::norm_cdf(rho_ * z1 + std::sqrt(1.0 - rho_ * rho_) * z2);
  }
  bool bounded_density() const override { return rho_ == 0.0; }
  double sup_density() const override {
    if (rho_ != 0.0) throw UnboundedDensityError(name());
    return 1.0;
  }

 private:
  double rho_;
};

//! Factory over the bundled model ids: independence, fgm, frank, clayton,
//! gauss. The parameter is ignored for independence, which alone accepts
//! a dimension other than 2.
inline std::unique_ptr<Copula> make_copula(const std::string& model, double theta = 0.0,
                                           int dim = 2) {
  if (model == "independence") return std::make_unique<IndependenceCopula>(dim);
  if (dim != 2) throw std::invalid_argument("make_copula: model '" + model + "' is bivariate");
  if (model == "fgm") return std::make_unique<FgmCopula>(theta);
  if (model == "frank") return std::make_unique<FrankCopula>(theta);
  if (model == "clayton") return std::make_unique<ClaytonCopula>(theta);
  if (model == "gauss" || model == "gaussian") return std::make_unique<GaussianCopula>(theta);
  throw std::invalid_argument("make_copula: unknown model '" + model + "'");
}

}  // namespace copwav

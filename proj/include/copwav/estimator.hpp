#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <memory>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

#include "copwav/kernel.hpp"
#include "copwav/wavelet.hpp"

namespace copwav {

//! How ranks are scaled into pseudo-observations.
enum class RankScaling { divide_n, divide_n_plus_1 };

//! What to do when a margin contains tied values. Ranks cannot be formed
//! canonically under ties; the default breaks them by input order, which
//! keeps the map deterministic.
enum class TiePolicy { stable_break, reject };

//! Raw observations, one row per case, row-major.
struct Sample {
  int dim = 0;
  std::vector<double> data;

  std::size_t size() const { return dim > 0 ? data.size() / static_cast<std::size_t>(dim) : 0; }
  std::span<const double> row(std::size_t i) const {
    return {data.data() + i * static_cast<std::size_t>(dim), static_cast<std::size_t>(dim)};
  }
};

//! Rank-transformed observations with values in (0, 1].
struct PseudoSample {
  int dim = 0;
  std::vector<double> data;

  std::size_t size() const { return dim > 0 ? data.size() / static_cast<std::size_t>(dim) : 0; }
  std::span<const double> row(std::size_t i) const {
    return {data.data() + i * static_cast<std::size_t>(dim), static_cast<std::size_t>(dim)};
  }
};

inline void validate_sample(const Sample& s) {
  if (s.dim < 1 || s.dim > 16) throw std::invalid_argument("sample: dim out of range [1,16]");
  if (s.data.size() % static_cast<std::size_t>(s.dim) != 0)
    throw std::invalid_argument("sample: data length is not a multiple of dim");
  if (s.size() < 2) throw std::invalid_argument("sample: need at least 2 observations");
  for (double v : s.data)
    if (!std::isfinite(v)) throw std::invalid_argument("sample: non-finite value");
}

//! Margin-wise rank transform. Only the ordering of each margin matters,
//! so the output is invariant under strictly increasing per-margin maps.
inline PseudoSample pseudo_observations(const Sample& s, RankScaling scaling = RankScaling::divide_n,
                                        TiePolicy ties = TiePolicy::stable_break) {
  validate_sample(s);
  const std::size_t n = s.size();
  const int d = s.dim;
  PseudoSample out;
  out.dim = d;
  out.data.resize(s.data.size());
  const double denom = scaling == RankScaling::divide_n ? double(n) : double(n + 1);
  std::vector<std::size_t> idx(n);
  for (int m = 0; m < d; ++m) {
    auto at = [&](std::size_t i) { return s.data[i * static_cast<std::size_t>(d) + m]; };
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::stable_sort(idx.begin(), idx.end(),
                     [&](std::size_t a, std::size_t b) { return at(a) < at(b); });
    if (ties == TiePolicy::reject) {
      for (std::size_t r = 1; r < n; ++r)
        if (at(idx[r]) == at(idx[r - 1]))
          throw std::invalid_argument("pseudo_observations: tied values in margin " +
                                      std::to_string(m));
    }
    for (std::size_t r = 0; r < n; ++r)
      out.data[idx[r] * static_cast<std::size_t>(d) + m] = double(r + 1) / denom;
  }
  return out;
}

struct EstimatorConfig {
  int level = 1;
  RankScaling scaling = RankScaling::divide_n;
  TiePolicy ties = TiePolicy::stable_break;
};

namespace detail {

inline void check_level_dim(int level, int dim) {
  if (level < 0 || dim < 1) throw std::invalid_argument("estimator: bad level or dim");
  if (level * dim > 26)
    throw std::invalid_argument("estimator: 2^(level*dim) coefficients exceed the 2^26 cap");
}

}  // namespace detail

//! Fitted linear wavelet coefficients at one resolution: a dense row-major
//! array over the internal translate indices, one slot per tensor basis
//! function, evaluable as the linear-form estimate.
class CoefficientField {
 public:
  CoefficientField(std::shared_ptr<const FatherWavelet> wavelet, int level, int dim,
                   std::vector<double> alpha)
      : wavelet_(std::move(wavelet)), level_(level), dim_(dim), alpha_(std::move(alpha)) {
    detail::check_level_dim(level, dim);
    if (!wavelet_) throw std::invalid_argument("CoefficientField: null wavelet");
    const std::size_t want = std::size_t{1} << static_cast<std::size_t>(level * dim);
    if (alpha_.size() != want)
      throw std::invalid_argument("CoefficientField: coefficient count mismatch");
  }

  int level() const { return level_; }
  int dim() const { return dim_; }
  const FatherWavelet& wavelet() const { return *wavelet_; }
  std::span<const double> alpha() const { return alpha_; }

  //! Linear-form estimate c(u) = sum_k alpha_k prod_m phi_jk(u_m).
  double operator()(std::span<const double> u) const {
    if (static_cast<int>(u.size()) != dim_)
      throw std::invalid_argument("CoefficientField: point dimension mismatch");
    std::array<detail::ActiveTranslates, 16> act;
    for (int m = 0; m < dim_; ++m)
      act[static_cast<std::size_t>(m)] =
          detail::active_translates(*wavelet_, level_, std::ldexp(u[static_cast<std::size_t>(m)], level_));
    double acc = 0.0;
    accumulate_eval(act, 0, 0, 1.0, acc);
    return acc * pow2_half(level_ * dim_);
  }

  //! Total mass sum_k alpha_k 2^{-jd/2}, exactly 1 for dyadic sample sizes.
  double mass() const {
    double acc = 0.0;
    for (double a : alpha_) acc += a;
    return acc * pow2_half(-level_ * dim_);
  }

 private:
  void accumulate_eval(const std::array<detail::ActiveTranslates, 16>& act, int m,
                       std::size_t base, double w, double& acc) const {
    const auto& a = act[static_cast<std::size_t>(m)];
    const std::size_t stride = std::size_t{1}
                               << static_cast<std::size_t>(level_ * (dim_ - 1 - m));
    for (int i = 0; i < a.count; ++i) {
      const std::size_t flat = base + static_cast<std::size_t>(a.index[i]) * stride;
      const double wm = w * a.weight[i];
      if (m + 1 == dim_)
        acc += alpha_[flat] * wm;
      else
        accumulate_eval(act, m + 1, flat, wm, acc);
    }
  }

  std::shared_ptr<const FatherWavelet> wavelet_;
  int level_;
  int dim_;
  std::vector<double> alpha_;
};

//! Rank-based linear coefficient fit: alpha_k = (1/n) sum_i prod_m
//! phi_jk(U_im). Accumulates raw basis products and applies the
//! 2^{jd/2}/n normalization once at the end, so Haar coefficients are
//! exactly scaled cell counts.
inline CoefficientField fit_coefficients(const PseudoSample& ps,
                                         std::shared_ptr<const FatherWavelet> wavelet,
                                         const EstimatorConfig& cfg) {
  if (!wavelet) throw std::invalid_argument("fit_coefficients: null wavelet");
  detail::check_level_dim(cfg.level, ps.dim);
  if (ps.size() < 1) throw std::invalid_argument("fit_coefficients: empty sample");
  const int d = ps.dim;
  const int j = cfg.level;
  const std::size_t n_alpha = std::size_t{1} << static_cast<std::size_t>(j * d);
  std::vector<double> alpha(n_alpha, 0.0);
  std::array<detail::ActiveTranslates, 16> act;
  const std::size_t n = ps.size();
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = ps.row(i);
    for (int m = 0; m < d; ++m)
      act[static_cast<std::size_t>(m)] =
          detail::active_translates(*wavelet, j, std::ldexp(row[static_cast<std::size_t>(m)], j));
    auto scatter = [&](auto&& self, int m, std::size_t base, double w) -> void {
      const auto& a = act[static_cast<std::size_t>(m)];
      const std::size_t stride = std::size_t{1} << static_cast<std::size_t>(j * (d - 1 - m));
      for (int t = 0; t < a.count; ++t) {
        const std::size_t flat = base + static_cast<std::size_t>(a.index[t]) * stride;
        const double wm = w * a.weight[t];
        if (m + 1 == d)
          alpha[flat] += wm;
        else
          self(self, m + 1, flat, wm);
      }
    };
    scatter(scatter, 0, 0, 1.0);
  }
  const double scale = pow2_half(j * d);
  for (auto& a : alpha) a = a * scale / double(n);
  return CoefficientField(std::move(wavelet), j, d, std::move(alpha));
}

//! Kernel-form estimate (1/n) sum_i K_j(U_i, u); algebraically identical to
//! evaluating the fitted linear form.
inline double estimate_kernel_form(const PseudoSample& ps, const FatherWavelet& wavelet, int level,
                                   std::span<const double> u) {
  detail::check_level_dim(level, ps.dim);
  ProjectionKernel pk(wavelet, level, ps.dim);
  double acc = 0.0;
  const std::size_t n = ps.size();
  for (std::size_t i = 0; i < n; ++i) acc += kernel_tensor_j(pk, ps.row(i), u);
  return acc / double(n);
}

//! Reference resolution rule j(n) = round(log2((n / ln n)^{1/(2t+d)})),
//! floored at 1.
inline int resolution_rule(std::size_t n, int t, int d) {
  if (n < 2) throw std::invalid_argument("resolution_rule: need n >= 2");
  if (t < 1 || d < 1) throw std::invalid_argument("resolution_rule: need t >= 1 and d >= 1");
  const double x = std::log2(double(n) / std::log(double(n))) / double(2 * t + d);
  return std::max(1, static_cast<int>(std::lround(x)));
}

//! Slow resolution schedule j(n) = ceil(log2(n) / (d + 2)), floored at 1.
inline int h4_level(std::size_t n, int d) {
  if (n < 2) throw std::invalid_argument("h4_level: need n >= 2");
  if (d < 1) throw std::invalid_argument("h4_level: need d >= 1");
  return std::max(1, static_cast<int>(std::ceil(std::log2(double(n)) / double(d + 2))));
}

//! Evaluation grid, row-major points.
struct EvalGrid {
  int dim = 0;
  std::vector<double> points;

  std::size_t size() const { return dim > 0 ? points.size() / static_cast<std::size_t>(dim) : 0; }
  std::span<const double> row(std::size_t i) const {
    return {points.data() + i * static_cast<std::size_t>(dim), static_cast<std::size_t>(dim)};
  }
};

namespace detail {

inline EvalGrid product_grid(int d, std::span<const double> axis) {
  EvalGrid g;
  g.dim = d;
  const std::size_t per = axis.size();
  std::size_t total = 1;
  for (int m = 0; m < d; ++m) {
    if (total > (std::size_t{1} << 24) / per)
      throw std::invalid_argument("grid: too many evaluation points");
    total *= per;
  }
  g.points.resize(total * static_cast<std::size_t>(d));
  std::vector<std::size_t> ctr(static_cast<std::size_t>(d), 0);
  for (std::size_t p = 0; p < total; ++p) {
    for (int m = 0; m < d; ++m)
      g.points[p * static_cast<std::size_t>(d) + static_cast<std::size_t>(m)] =
          axis[ctr[static_cast<std::size_t>(m)]];
    for (int m = d - 1; m >= 0; --m) {
      if (++ctr[static_cast<std::size_t>(m)] < per) break;
      ctr[static_cast<std::size_t>(m)] = 0;
    }
  }
  return g;
}

}  // namespace detail

//! G points per axis at i/(G+1), i = 1..G: interior, boundary-free.
inline EvalGrid uniform_interior_grid(int d, int g = 101) {
  if (d < 1 || d > 8 || g < 1) throw std::invalid_argument("uniform_interior_grid: bad shape");
  std::vector<double> axis(static_cast<std::size_t>(g));
  for (int i = 1; i <= g; ++i) axis[static_cast<std::size_t>(i - 1)] = double(i) / double(g + 1);
  return detail::product_grid(d, axis);
}

//! Centers of the 2^{jd} dyadic cells at level j.
inline EvalGrid dyadic_cell_centers(int d, int j) {
  detail::check_level_dim(j, d);
  if (j * d > 24) throw std::invalid_argument("dyadic_cell_centers: too many cells");
  const std::size_t per = std::size_t{1} << static_cast<std::size_t>(j);
  std::vector<double> axis(per);
  for (std::size_t i = 0; i < per; ++i)
    axis[i] = std::ldexp(double(i) + 0.5, -j);
  return detail::product_grid(d, axis);
}

}  // namespace copwav

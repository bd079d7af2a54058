#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <memory>
#include <numeric>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace copwav {

inline constexpr double kSqrt2 = 1.4142135623730951;

//! Exact 2^{j/2}; ldexp keeps the even-j case a pure power of two.
inline double pow2_half(int j) {
  return (j % 2 == 0) ? std::ldexp(1.0, j / 2) : std::ldexp(kSqrt2, (j - 1) / 2);
}

//! Scaling-function values on the dyadic lattice i/2^L, i = 0 .. B*2^L.
struct DyadicTable {
  int level = 0;    // refinement depth L
  int support = 0;  // support endpoint B, phi lives on [0, B]
  std::vector<double> values;

  double spacing() const { return std::ldexp(1.0, -level); }
};

namespace detail {

// Integer-point values phi(0..B) form the eigenvector of the refinement
// matrix T_{k,k'} = sqrt(2) h_{2k-k'} at eigenvalue 1; the normalization
// sum_k phi(k) = 1 (forced by partition of unity) fixes the scale.
inline std::vector<double> integer_point_values(const std::vector<double>& h) {
  const int B = static_cast<int>(h.size()) - 1;
  if (B == 1 && std::abs(h[0] - 1.0 / kSqrt2) < 1e-9 && std::abs(h[1] - 1.0 / kSqrt2) < 1e-9) {
    // Haar: T is the identity, so the eigenproblem is degenerate; the
    // right-open convention 1_{[0,1)} picks phi(0)=1, phi(1)=0.
    return {1.0, 0.0};
  }
  Eigen::MatrixXd T = Eigen::MatrixXd::Zero(B + 1, B + 1);
  for (int k = 0; k <= B; ++k)
    for (int kp = 0; kp <= B; ++kp) {
      const int idx = 2 * k - kp;
      if (idx >= 0 && idx <= B) T(k, kp) = kSqrt2 * h[idx];
    }
  const Eigen::EigenSolver<Eigen::MatrixXd> es(T);
  int best = -1;
  double best_dist = 1e300;
  for (int i = 0; i <= B; ++i) {
    const double dist = std::abs(es.eigenvalues()(i) - std::complex<double>(1.0, 0.0));
    if (dist < best_dist) {
      best_dist = dist;
      best = i;
    }
  }
  if (best < 0 || best_dist > 1e-8)
    throw std::invalid_argument("cascade_refine: refinement matrix has no unit eigenvalue (invalid filter)");
  Eigen::VectorXd v = es.eigenvectors().col(best).real();
  const double s = v.sum();
  if (std::abs(s) < 1e-10)
    throw std::invalid_argument("cascade_refine: unit eigenvector has zero mass (invalid filter)");
  v /= s;
  // The support endpoints carry exact zeros (first and last eigenvector
  // components vanish analytically); snap solver noise away.
  for (int i = 0; i <= B; ++i)
    if (std::abs(v(i)) < 1e-12) v(i) = 0.0;
  v /= v.sum();
  return std::vector<double>(v.data(), v.data() + v.size());
}

}  // namespace detail

//! Cascade algorithm: exact integer-point values from the refinement
//! eigenproblem, then `levels` two-scale refinements filling the dyadic
//! lattice. Values at lattice points are exact up to roundoff.
inline DyadicTable cascade_refine(const std::vector<double>& h, int levels) {
  if (h.size() < 2) throw std::invalid_argument("cascade_refine: filter needs at least two taps");
  if (levels < 1 || levels > 24) throw std::invalid_argument("cascade_refine: level out of range [1,24]");
  const double s = std::accumulate(h.begin(), h.end(), 0.0);
  if (std::abs(s - kSqrt2) > 1e-9)
    throw std::invalid_argument("cascade_refine: filter taps must sum to sqrt(2)");

  const int B = static_cast<int>(h.size()) - 1;
  std::vector<double> cur = detail::integer_point_values(h);
  for (int l = 1; l <= levels; ++l) {
    const int half = B << (l - 1);
    std::vector<double> next(static_cast<std::size_t>(B << l) + 1, 0.0);
    for (int i = 0; i <= (B << l); i += 2) next[i] = cur[i >> 1];
    // phi(i/2^l) = sqrt(2) sum_k h_k phi(i/2^{l-1} - k), odd lattice points
    for (int i = 1; i < (B << l); i += 2) {
      double acc = 0.0;
      for (int k = 0; k <= B; ++k) {
        const int idx = i - (k << (l - 1));
        if (idx >= 0 && idx <= half) acc += h[k] * cur[idx];
      }
      next[i] = kSqrt2 * acc;
    }
    cur = std::move(next);
  }
  return DyadicTable{levels, B, std::move(cur)};
}

//! Compactly supported father wavelet (scaling function) with closed-form
//! evaluation for Haar and cascade-table evaluation otherwise.
class FatherWavelet {
 public:
  FatherWavelet(std::string name, std::vector<double> filter, int order, int table_level)
      : name_(std::move(name)),
        filter_(std::move(filter)),
        order_(order),
        haar_(name_ == "haar"),
        table_(build_table(name_, filter_, table_level)) {
    sup_ = 0.0;
    for (const double v : table_.values) sup_ = std::max(sup_, std::abs(v));
  }

  const std::string& name() const { return name_; }
  const std::vector<double>& filter() const { return filter_; }
  //! Support endpoint B; phi vanishes outside [0, B].
  int support() const { return static_cast<int>(filter_.size()) - 1; }
  //! Polynomial accuracy p: degrees < p are reproduced by integer translates.
  int order() const { return order_; }
  bool is_haar() const { return haar_; }
  double sup_norm() const { return sup_; }
  const DyadicTable& table() const { return table_; }

  //! phi(x); linear interpolation between dyadic nodes, exact for Haar.
  double operator()(double x) const {
    if (haar_) return (x >= 0.0 && x < 1.0) ? 1.0 : 0.0;
    const int B = support();
    if (x < 0.0 || x > static_cast<double>(B)) return 0.0;
    const double t = std::ldexp(x, table_.level);
    const auto i = static_cast<std::size_t>(t);
    if (i + 1 >= table_.values.size()) return table_.values.back();
    const double w = t - static_cast<double>(i);
    return table_.values[i] + w * (table_.values[i + 1] - table_.values[i]);
  }

  //! Periodization with period 2^j, defined for any real x.
  double periodized(double x, int j) const {
    const double period = std::ldexp(1.0, j);
    double r = std::fmod(x, period);
    if (r < 0.0) r += period;
    if (r >= period) r -= period;
    double acc = 0.0;
    const double B = static_cast<double>(support());
    for (double t = r; t <= B; t += period) acc += (*this)(t);
    return acc;
  }

 private:
  static DyadicTable build_table(const std::string& name, const std::vector<double>& filter,
                                 int table_level) {
    if (table_level < 1 || table_level > 24)
      throw std::invalid_argument("FatherWavelet: table level out of range [1,24]");
    if (name == "haar") {
      // Right-open indicator: 1 on [0,1), 0 at 1; all dyadic nodes are exact.
      DyadicTable t;
      t.level = table_level;
      t.support = 1;
      t.values.assign((std::size_t{1} << table_level) + 1, 1.0);
      t.values.back() = 0.0;
      return t;
    }
    return cascade_refine(filter, table_level);
  }

  std::string name_;
  std::vector<double> filter_;
  int order_;
  bool haar_;
  DyadicTable table_;
  double sup_ = 0.0;
};

//! Haar father wavelet, filter {1/sqrt2, 1/sqrt2}, right-open convention.
inline FatherWavelet haar_father(int table_level = 12) {
  return FatherWavelet("haar", {1.0 / kSqrt2, 1.0 / kSqrt2}, 1, table_level);
}

//! Daubechies extremal-phase scaling function of order p (2p taps, support
//! [0, 2p-1]); taps normalized to sum sqrt(2).
inline FatherWavelet daubechies_father(int order, int table_level = 12) {
  switch (order) {
    case 2: {
      const double s3 = std::sqrt(3.0);
      const double den = 4.0 * kSqrt2;
      return FatherWavelet("db2",
                           {(1.0 + s3) / den, (3.0 + s3) / den, (3.0 - s3) / den, (1.0 - s3) / den},
                           2, table_level);
    }
    case 3:
      return FatherWavelet("db3",
                           {0.3326705529509569, 0.8068915093133388, 0.4598775021193313,
                            -0.13501102001039084, -0.08544127388224149, 0.035226291882100656},
                           3, table_level);
    case 4:
      return FatherWavelet("db4",
                           {0.23037781330885523, 0.7148465705525415, 0.6308807679295904,
                            -0.02798376941698385, -0.18703481171888114, 0.030841381835986965,
                            0.032883011666982945, -0.010597401784997278},
                           4, table_level);
    default:
      throw std::invalid_argument("daubechies_father: supported orders are 2, 3, 4");
  }
}

inline FatherWavelet make_father(const std::string& name, int table_level = 12) {
  if (name == "haar") return haar_father(table_level);
  if (name == "db2") return daubechies_father(2, table_level);
  if (name == "db3") return daubechies_father(3, table_level);
  if (name == "db4") return daubechies_father(4, table_level);
  throw std::invalid_argument("make_father: unknown wavelet '" + name + "'");
}

//! Periodized basis function phi_{j,k}(u) = 2^{j/2} phi_per(2^j u - k),
//! translates on the 1-based range k = 1 .. 2^j.
inline double phi_jk(const FatherWavelet& w, int j, int k, double u) {
  if (j < 0 || j > 30) throw std::invalid_argument("phi_jk: level out of range");
  if (k < 1 || static_cast<long long>(k) > (1LL << j))
    throw std::invalid_argument("phi_jk: translate out of range 1..2^j");
  return pow2_half(j) * w.periodized(std::ldexp(u, j) - static_cast<double>(k), j);
}

//! theta_phi(x) = sum_k |phi(x - k)| over all integer shifts (H.2 envelope).
inline double theta_phi(const FatherWavelet& w, double x) {
  const int B = w.support();
  const int klo = static_cast<int>(std::ceil(x)) - B;
  const int khi = static_cast<int>(std::floor(x));
  double acc = 0.0;
  for (int k = klo; k <= khi; ++k) acc += std::abs(w(x - static_cast<double>(k)));
  return acc;
}

//! Max of theta_phi over a uniform grid on [0,1) (theta is 1-periodic).
inline double theta_phi_max(const FatherWavelet& w, int grid_points = 10000) {
  double best = 0.0;
  for (int i = 0; i < grid_points; ++i)
    best = std::max(best, theta_phi(w, static_cast<double>(i) / grid_points));
  return best;
}

//! Max of |sum_k phi(x-k) - 1| over a uniform grid (partition of unity).
inline double partition_of_unity_error(const FatherWavelet& w, int grid_points = 1000) {
  const int B = w.support();
  double worst = 0.0;
  for (int i = 0; i < grid_points; ++i) {
    const double x = static_cast<double>(i) / grid_points;
    double acc = 0.0;
    for (int k = -B; k <= 0; ++k) acc += w(x - static_cast<double>(k));
    worst = std::max(worst, std::abs(acc - 1.0));
  }
  return worst;
}

//! Max residual of the two-scale relation phi(x) = sqrt2 sum_k h_k phi(2x-k)
//! over the half-resolution lattice; a construction self-check.
inline double two_scale_residual(const FatherWavelet& w) {
  const auto& t = w.table();
  const int B = t.support;
  const int L = t.level;
  const std::size_t n_half = static_cast<std::size_t>(B) << (L - 1);
  double worst = 0.0;
  for (std::size_t i = 0; i <= n_half; ++i) {
    // x = i/2^{L-1} has level-L index 2i, and 2x - k has level-L index 4i - k 2^L
    double acc = 0.0;
    for (int k = 0; k <= B; ++k) {
      const long long idx = (static_cast<long long>(i) << 2) - (static_cast<long long>(k) << L);
      if (idx >= 0 && idx <= static_cast<long long>(t.values.size()) - 1)
        acc += w.filter()[static_cast<std::size_t>(k)] * t.values[static_cast<std::size_t>(idx)];
    }
    worst = std::max(worst, std::abs(t.values[i << 1] - kSqrt2 * acc));
  }
  return worst;
}

//! Gram matrix G_{k,l} = int_0^1 phi_{j,k} phi_{j,l} du on the aligned dyadic
//! lattice (spacing 2^{-(L+j)}); returns a dense 2^j x 2^j row-major matrix.
//!
//! The 2^{j/2} normalizations of the two factors and the lattice spacing are
//! folded into one exact power-of-two scale 2^{-L}, so the Haar Gram comes
//! out bitwise equal to the identity at every level.
inline std::vector<double> gram_matrix(const FatherWavelet& w, int j) {
  if (j < 0 || j > 5) throw std::invalid_argument("gram_matrix: level out of range [0,5]");
  const int L = w.table().level;
  const std::size_t m = std::size_t{1} << j;
  const std::size_t nodes = std::size_t{1} << (L + j);
  const double du = std::ldexp(1.0, -(L + j));
  // Tabulate the unscaled phi_per(2^j u - k) on the lattice; the integrand is
  // 1-periodic, so the rectangle rule over one period is the trapezoid rule.
  std::vector<double> tab(m * nodes);
  for (std::size_t k = 0; k < m; ++k)
    for (std::size_t i = 0; i < nodes; ++i)
      tab[k * nodes + i] =
          w.periodized(std::ldexp(static_cast<double>(i) * du, j) - static_cast<double>(k + 1), j);
  std::vector<double> g(m * m);
  for (std::size_t k = 0; k < m; ++k)
    for (std::size_t l = k; l < m; ++l) {
      double acc = 0.0;
      const double* a = tab.data() + k * nodes;
      const double* b = tab.data() + l * nodes;
      for (std::size_t i = 0; i < nodes; ++i) acc += a[i] * b[i];
      g[k * m + l] = g[l * m + k] = std::ldexp(acc, -L);
    }
  return g;
}

}  // namespace copwav

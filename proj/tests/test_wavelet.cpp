#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "copwav/wavelet.hpp"
#include "oracles.hpp"

using namespace copwav;

namespace {
const double kPhi1 = (1.0 + std::sqrt(3.0)) / 2.0;  // db2 phi(1)
const double kPhi2 = (1.0 - std::sqrt(3.0)) / 2.0;  // db2 phi(2)
}  // namespace

TEST_CASE("filters sum to sqrt(2)", "[wavelet]") {
  for (const char* name : {"haar", "db2", "db3", "db4"}) {
    const auto w = make_father(name);
    double s = 0.0;
    for (double h : w.filter()) s += h;
    CHECK(std::abs(s - kSqrt2) < 1e-12);
    CHECK(w.support() == int(w.filter().size()) - 1);
  }
}

TEST_CASE("haar closed form and table", "[wavelet]") {
  const auto w = haar_father();
  CHECK(w(0.0) == 1.0);
  CHECK(w(0.999) == 1.0);
  CHECK(w(1.0) == 0.0);  // right-open convention
  CHECK(w(-0.001) == 0.0);
  CHECK(w.sup_norm() == 1.0);
  CHECK(w.order() == 1);

  // cascade_refine on the Haar filter gives the same right-open table
  const auto t = cascade_refine({1.0 / kSqrt2, 1.0 / kSqrt2}, 3);
  REQUIRE(t.values.size() == 9);
  for (std::size_t i = 0; i < 8; ++i) CHECK(t.values[i] == 1.0);
  CHECK(t.values[8] == 0.0);
}

TEST_CASE("db2 integer-point values from the eigenproblem", "[wavelet]") {
  const auto w = daubechies_father(2);
  // phi(1) = (1+sqrt3)/2, phi(2) = (1-sqrt3)/2, phi(0) = phi(3) = 0
  CHECK(std::abs(w(1.0) - kPhi1) < 1e-12);
  CHECK(std::abs(w(2.0) - kPhi2) < 1e-12);
  CHECK(w(0.0) == 0.0);
  CHECK(w(3.0) == 0.0);
  CHECK(std::abs(w.sup_norm() - kPhi1) < 1e-12);
}

TEST_CASE("support is exact", "[wavelet]") {
  for (const char* name : {"haar", "db2", "db3", "db4"}) {
    const auto w = make_father(name);
    const double B = w.support();
    CHECK(w(-0.25) == 0.0);
    CHECK(w(B + 0.25) == 0.0);
    CHECK(w(B + 10.0) == 0.0);
  }
}

TEST_CASE("two-scale residual on the table", "[wavelet]") {
  for (const char* name : {"haar", "db2", "db3", "db4"}) {
    const auto w = make_father(name);
    CHECK(two_scale_residual(w) < 1e-8);
  }
}

TEST_CASE("dyadic sums reproduce the unit integral at every level", "[wavelet]") {
  // 2^{-q} sum_i phi(i 2^{-q}) telescopes through the two-scale relation,
  // so the full-weight lattice sum equals int phi = 1 at every level.
  for (const char* name : {"haar", "db2", "db3", "db4"}) {
    const auto w = make_father(name);
    const auto& t = w.table();
    for (int q = 1; q <= t.level; q += 3) {
      const int stride = 1 << (t.level - q);
      double s = 0.0;
      for (std::size_t i = 0; i < t.values.size(); i += stride) s += t.values[i];
      CHECK(std::abs(std::ldexp(s, -q) - 1.0) < 1e-10);
    }
  }
}

TEST_CASE("partition of unity", "[wavelet]") {
  // hand-check one point first: db2 translates summed at x = 0.37
  const auto db2 = daubechies_father(2);
  double s = 0.0;
  for (int k = -db2.support(); k <= 0; ++k) s += db2(0.37 - k);
  CHECK(std::abs(s - 1.0) < 1e-6);

  for (const char* name : {"haar", "db2", "db3", "db4"}) {
    const auto w = make_father(name);
    CHECK(partition_of_unity_error(w, 997) < 1e-6);
  }
  CHECK(partition_of_unity_error(haar_father(), 997) == 0.0);
}

TEST_CASE("periodized evaluation matches the brute-force shift sum", "[wavelet]") {
  for (const char* name : {"haar", "db2", "db3"}) {
    const auto w = make_father(name);
    for (int j : {0, 1, 2, 4}) {
      for (double x : {-7.3, -0.8, 0.0, 0.41, 1.9, 3.2, 17.77}) {
        CHECK(std::abs(w.periodized(x, j) - oracles::brute_phi_per(w, x, j)) < 1e-12);
      }
    }
  }
}

TEST_CASE("phi_jk frozen values", "[wavelet]") {
  const auto haar = haar_father();
  // Periodized formula: at u=0.3, j=2 the only active translate is k=1
  // (4*0.3-1 = 0.2 lands in [0,1)); k=2 wraps to 3.2, outside the support.
  CHECK(phi_jk(haar, 2, 1, 0.3) == 2.0);
  CHECK(phi_jk(haar, 2, 2, 0.3) == 0.0);
  CHECK(phi_jk(haar, 2, 3, 0.3) == 0.0);
  CHECK(phi_jk(haar, 2, 4, 0.3) == 0.0);
  // j=0 keeps a single translate k=1
  CHECK(phi_jk(haar, 0, 1, 0.5) == 1.0);
  // u=1.0 wraps into the last translate k=2^j
  CHECK(phi_jk(haar, 2, 4, 1.0) == 2.0);
  CHECK(phi_jk(haar, 2, 1, 1.0) == 0.0);

  // db2: u=0.25, j=2, k=1 hits phi(0)=0 and its wrap phi(4) is outside
  const auto db2 = daubechies_father(2);
  CHECK(phi_jk(db2, 2, 1, 0.25) == 0.0);

  // out-of-range translates are rejected
  CHECK_THROWS_AS(phi_jk(haar, 2, 0, 0.3), std::invalid_argument);
  CHECK_THROWS_AS(phi_jk(haar, 2, 5, 0.3), std::invalid_argument);

  // normalization: 2^{j/2} scale against the brute-force periodization
  for (int j : {1, 3}) {
    for (int k : {1, 2}) {
      const double u = 0.317;
      const double expect =
          pow2_half(j) * oracles::brute_phi_per(db2, std::ldexp(u, j) - k, j);
      CHECK(std::abs(phi_jk(db2, j, k, u) - expect) < 1e-12);
    }
  }
}

TEST_CASE("theta_phi", "[wavelet]") {
  const auto haar = haar_father();
  CHECK(theta_phi(haar, 0.5) == 1.0);
  CHECK(theta_phi(haar, -3.21) == 1.0);
  CHECK(theta_phi(haar, 100.75) == 1.0);

  const auto db2 = daubechies_father(2);
  const double t = theta_phi(db2, 0.25);
  CHECK(t > 0.0);
  CHECK(t <= db2.support() * db2.sup_norm());

  // bounded and stable under grid refinement
  for (const char* name : {"db2", "db3", "db4"}) {
    const auto w = make_father(name);
    const double coarse = theta_phi_max(w, 10000);
    const double fine = theta_phi_max(w, 40000);
    CHECK(std::isfinite(fine));
    CHECK(std::abs(fine - coarse) / fine < 1e-3);
  }
}

TEST_CASE("gram matrices", "[wavelet]") {
  // Haar: bitwise identity at j=3 (acceptance criterion 1 path)
  {
    const auto g = gram_matrix(haar_father(), 3);
    const std::size_t m = 8;
    for (std::size_t k = 0; k < m; ++k)
      for (std::size_t l = 0; l < m; ++l)
        CHECK(g[k * m + l] == (k == l ? 1.0 : 0.0));
  }
  // Daubechies: identity within 5e-4 entrywise at j in {2,3}
  for (const char* name : {"db2", "db3", "db4"}) {
    const auto w = make_father(name);
    for (int j : {2, 3}) {
      const auto g = gram_matrix(w, j);
      const std::size_t m = std::size_t{1} << j;
      double worst = 0.0;
      for (std::size_t k = 0; k < m; ++k)
        for (std::size_t l = 0; l < m; ++l)
          worst = std::max(worst, std::abs(g[k * m + l] - (k == l ? 1.0 : 0.0)));
      CHECK(worst < 5e-4);
    }
  }
}

TEST_CASE("cascade_refine rejects invalid filters", "[wavelet]") {
  CHECK_THROWS_AS(cascade_refine({0.0, 0.0, 0.0, 0.0}, 4), std::invalid_argument);
  CHECK_THROWS_AS(cascade_refine({1.0, 1.0}, 4), std::invalid_argument);  // sum != sqrt2
  // sum is sqrt2 but the refinement matrix has no unit eigenvalue
  CHECK_THROWS_AS(cascade_refine({kSqrt2, 0.0}, 4), std::invalid_argument);
  CHECK_THROWS_AS(cascade_refine({1.0 / kSqrt2, 1.0 / kSqrt2}, 0), std::invalid_argument);
  CHECK_THROWS_AS(cascade_refine({kSqrt2}, 4), std::invalid_argument);
  CHECK_THROWS_AS(make_father("db9"), std::invalid_argument);
  CHECK_THROWS_AS(daubechies_father(5), std::invalid_argument);
}

TEST_CASE("pow2_half is exact", "[wavelet]") {
  CHECK(pow2_half(0) == 1.0);
  CHECK(pow2_half(4) == 4.0);
  CHECK(pow2_half(10) == 32.0);
  CHECK(std::abs(pow2_half(3) - 2.0 * kSqrt2) < 1e-15);
}

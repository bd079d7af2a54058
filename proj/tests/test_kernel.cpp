#include <array>
#include <cmath>
#include <vector>

#include <catch2/catch_amalgamated.hpp>

#include "copwav/kernel.hpp"
#include "copwav/rng.hpp"
#include "copwav/wavelet.hpp"
#include "oracles.hpp"

using copwav::FatherWavelet;
using copwav::ProjectionKernel;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

std::vector<const FatherWavelet*> all_wavelets() {
  static const FatherWavelet haar = copwav::haar_father();
  static const FatherWavelet db2 = copwav::daubechies_father(2);
  static const FatherWavelet db3 = copwav::daubechies_father(3);
  static const FatherWavelet db4 = copwav::daubechies_father(4);
  return {&haar, &db2, &db3, &db4};
}

}  // namespace

TEST_CASE("ktilde matches the brute-force periodized sum") {
  for (const auto* w : all_wavelets()) {
    for (int j : {0, 1, 2, 3}) {
      ProjectionKernel pk(*w, j, 1);
      for (double x : {-0.8, 0.0, 1.2, 3.2}) {
        for (double y : {-0.3, 0.41, 1.7, 2.9}) {
          INFO(w->name() << " j=" << j << " x=" << x << " y=" << y);
          CHECK_THAT(copwav::ktilde(pk, x, y),
                     WithinAbs(oracles::brute_ktilde(*w, j, x, y), 1e-12));
        }
      }
    }
  }
}

TEST_CASE("ktilde is symmetric") {
  const FatherWavelet db2 = copwav::daubechies_father(2);
  ProjectionKernel pk(db2, 3, 1);
  copwav::Rng rng(2025);
  for (int i = 0; i < 100; ++i) {
    const double x = 8.0 * rng.uniform();
    const double y = 8.0 * rng.uniform();
    CHECK_THAT(copwav::ktilde(pk, x, y), WithinAbs(copwav::ktilde(pk, y, x), 1e-12));
  }
}

TEST_CASE("ktilde is bounded by the squared overlap bound") {
  for (const auto* w : all_wavelets()) {
    const double theta = copwav::theta_phi_max(*w);
    const double bound = theta * theta;
    ProjectionKernel pk(*w, 2, 1);
    copwav::Rng rng(7);
    for (int i = 0; i < 200; ++i) {
      const double x = 4.0 * rng.uniform();
      const double y = 4.0 * rng.uniform();
      CHECK(std::abs(copwav::ktilde(pk, x, y)) <= bound + 1e-9);
    }
  }
}

TEST_CASE("Haar tensor kernel takes the closed cell values") {
  const FatherWavelet haar = copwav::haar_father();
  ProjectionKernel pk(haar, 3, 2);
  // both coordinates of x and y share a dyadic cell at j=3
  const std::array<double, 2> x{0.30, 0.70};
  const std::array<double, 2> y{0.3125 - 1e-9, 0.74};
  CHECK(copwav::kernel_tensor_j(pk, x, y) == 64.0);
  // second coordinate straddles a cell boundary
  const std::array<double, 2> z{0.31, 0.76};
  CHECK(copwav::kernel_tensor_j(pk, x, z) == 0.0);
  // unit-scale univariate kernel at matching cell is exactly 2^j; the j=3
  // cell containing 0.30 is [3/8 - 1/8, 3/8) = [0.25, 0.375)
  ProjectionKernel pk1(haar, 3, 1);
  CHECK(copwav::ktilde_j(pk1, 0.30, 0.3744) == 8.0);
  CHECK(copwav::ktilde_j(pk1, 0.30, 0.3756) == 0.0);
  // u = 1.0 wraps onto cell [0, 1/8) by periodization
  CHECK(copwav::ktilde_j(pk1, 1.0, 0.0001) == 8.0);
  CHECK(copwav::ktilde_j(pk1, 1.0, 0.9999) == 0.0);
}

TEST_CASE("tensor kernel at dim 1 reduces to the scaled kernel") {
  const FatherWavelet db3 = copwav::daubechies_father(3);
  ProjectionKernel pk(db3, 2, 1);
  copwav::Rng rng(11);
  for (int i = 0; i < 50; ++i) {
    const std::array<double, 1> x{rng.uniform()};
    const std::array<double, 1> y{rng.uniform()};
    CHECK(copwav::kernel_tensor_j(pk, x, y) == copwav::ktilde_j(pk, x[0], y[0]));
  }
}

TEST_CASE("kernel argument validation") {
  const FatherWavelet haar = copwav::haar_father();
  CHECK_THROWS_AS(ProjectionKernel(haar, -1, 1), std::invalid_argument);
  CHECK_THROWS_AS(ProjectionKernel(haar, 27, 1), std::invalid_argument);
  CHECK_THROWS_AS(ProjectionKernel(haar, 3, 0), std::invalid_argument);
  ProjectionKernel pk(haar, 2, 2);
  const std::array<double, 1> one{0.5};
  const std::array<double, 2> two{0.5, 0.5};
  CHECK_THROWS_AS(copwav::kernel_tensor_j(pk, one, two), std::invalid_argument);
  CHECK_THROWS_AS(copwav::kernel_l2(pk, one), std::invalid_argument);
  CHECK_THROWS_AS(copwav::project_density(pk, copwav::constant_density(), one),
                  std::invalid_argument);
}

TEST_CASE("one-period kernel integral is 1 for every wavelet") {
  copwav::Rng rng(31);
  for (const auto* w : all_wavelets()) {
    const int j = 3;
    ProjectionKernel pk(*w, j, 1);
    for (int i = 0; i < 25; ++i) {
      const double y = std::ldexp(rng.uniform(), j);
      INFO(w->name() << " y=" << y);
      CHECK_THAT(copwav::kernel_l1(pk, y), WithinAbs(1.0, 1e-6));
    }
  }
  const FatherWavelet db3 = copwav::daubechies_father(3);
  ProjectionKernel pk(db3, 2, 1);
  CHECK_THAT(copwav::kernel_l1(pk, 0.1), WithinAbs(1.0, 1e-6));
}

TEST_CASE("squared-kernel integral: Haar is exactly 1") {
  const FatherWavelet haar = copwav::haar_father();
  for (int j : {0, 2, 5}) {
    ProjectionKernel pk1(haar, j, 1);
    for (double u : {0.0, 0.37, 0.5, 1.0}) {
      const std::array<double, 1> pt{u};
      CHECK(copwav::kernel_l2(pk1, pt) == 1.0);
    }
    ProjectionKernel pk2(haar, j, 2);
    const std::array<double, 2> pt2{0.37, 0.91};
    CHECK(copwav::kernel_l2(pk2, pt2) == 1.0);
  }
}

TEST_CASE("squared-kernel integral matches the reproducing identity") {
  // orthonormal translates give int Ktilde(x,y)^2 dx = Ktilde(y,y); the
  // discrete table breaks orthonormality only at the Gram-error level
  for (const auto* w : all_wavelets()) {
    const int j = 3;
    ProjectionKernel pk(*w, j, 1);
    for (double u : {0.12, 0.5, 0.83}) {
      const double y = std::ldexp(u, j);
      const std::array<double, 1> pt{u};
      INFO(w->name() << " u=" << u);
      CHECK_THAT(copwav::kernel_l2(pk, pt), WithinAbs(copwav::ktilde(pk, y, y), 5e-4));
    }
  }
}

TEST_CASE("squared-kernel integral factorizes over dimensions") {
  const FatherWavelet db2 = copwav::daubechies_father(2);
  ProjectionKernel pk1(db2, 2, 1);
  ProjectionKernel pk2(db2, 2, 2);
  const std::array<double, 1> a{0.41};
  const std::array<double, 2> aa{0.41, 0.41};
  const double i1 = copwav::kernel_l2(pk1, a);
  CHECK(copwav::kernel_l2(pk2, aa) == i1 * i1);
  const std::array<double, 1> b{0.77};
  const std::array<double, 2> ab{0.41, 0.77};
  CHECK_THAT(copwav::kernel_l2(pk2, ab), WithinRel(i1 * copwav::kernel_l2(pk1, b), 1e-13));
}

TEST_CASE("projection reproduces constants") {
  const auto one = copwav::constant_density();
  copwav::Rng rng(101);
  for (const auto* w : all_wavelets()) {
    for (int j : {1, 3}) {
      for (int d : {1, 2}) {
        ProjectionKernel pk(*w, j, d);
        for (int i = 0; i < 5; ++i) {
          std::vector<double> u(static_cast<std::size_t>(d));
          for (auto& c : u) c = rng.uniform();
          INFO(w->name() << " j=" << j << " d=" << d);
          CHECK_THAT(copwav::project_density(pk, one, u), WithinAbs(1.0, 1e-9));
        }
      }
    }
  }
}

TEST_CASE("projection reproduces linear profiles away from the wrap seam") {
  // a two-tap Daubechies kernel reproduces degree-1 polynomials; the
  // periodization only disturbs a band of width B 2^-j at the seam
  const FatherWavelet db2 = copwav::daubechies_father(2);
  ProjectionKernel pk(db2, 4, 1);
  copwav::TargetDensity lin;
  lin.value = [](std::span<const double> v) { return v[0]; };
  for (double u : {0.30, 0.50, 0.65}) {
    const std::array<double, 1> pt{u};
    CHECK_THAT(copwav::project_density(pk, lin, pt), WithinAbs(u, 1e-4));
  }
}

TEST_CASE("projection satisfies the reproducing property") {
  const FatherWavelet db2 = copwav::daubechies_father(2);
  ProjectionKernel pk(db2, 3, 1);
  const double z = 0.55;
  copwav::TargetDensity target;
  target.value = [&](std::span<const double> v) { return copwav::ktilde_j(pk, v[0], z); };
  for (double u : {0.40, 0.52}) {
    const std::array<double, 1> pt{u};
    // rel_tol matched to the target's kink density at the table resolution
    CHECK_THAT(copwav::project_density(pk, target, pt, 1e-5),
               WithinAbs(copwav::ktilde_j(pk, u, z), 1e-3));
  }
}

namespace {

//! Bivariate density 1 + th (1-2x)(1-2y) with its exact rectangle mean.
copwav::TargetDensity bilinear_density(double th) {
  copwav::TargetDensity t;
  t.value = [th](std::span<const double> v) {
    return 1.0 + th * (1.0 - 2.0 * v[0]) * (1.0 - 2.0 * v[1]);
  };
  t.rect_average = [th](std::span<const double> lo, std::span<const double> hi) {
    return 1.0 + th * (1.0 - lo[0] - hi[0]) * (1.0 - lo[1] - hi[1]);
  };
  return t;
}

}  // namespace

TEST_CASE("Haar projection of a bilinear density is the exact cell average") {
  const FatherWavelet haar = copwav::haar_father();
  ProjectionKernel pk(haar, 2, 2);
  const auto c = bilinear_density(0.75);
  const std::array<double, 2> u{0.3, 0.7};
  // cells [0.25,0.5] x [0.5,0.75]: 1 + 0.75 (1-0.75)(1-1.25) = 1 - 3/64
  CHECK(copwav::project_density(pk, c, u) == 1.0 - 3.0 / 64.0);
  const std::array<double, 2> corner{1.0, 0.0};
  // u = 1 wraps onto cell [0, 0.25], so both coordinates average over it
  CHECK(copwav::project_density(pk, c, corner) ==
        1.0 + 0.75 * (1.0 - 0.0 - 0.25) * (1.0 - 0.0 - 0.25));
}

TEST_CASE("Haar lattice path agrees with the closed cell average") {
  const FatherWavelet haar = copwav::haar_father();
  ProjectionKernel pk(haar, 2, 2);
  const auto full = bilinear_density(0.75);
  copwav::TargetDensity no_rect;
  no_rect.value = full.value;  // forces the lattice path
  for (const auto& u : std::vector<std::array<double, 2>>{{0.3, 0.7}, {0.05, 0.95}}) {
    CHECK_THAT(copwav::project_density(pk, no_rect, u),
               WithinAbs(copwav::project_density(pk, full, u), 1e-9));
  }
}

#include <cstdio>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "copwav/copula.hpp"
#include "copwav/csv.hpp"
#include "copwav/estimator.hpp"
#include "copwav/experiment.hpp"
#include "copwav/kernel.hpp"
#include "copwav/rng.hpp"
#include "copwav/wavelet.hpp"

namespace {

struct SimulateArgs {
  std::string model;
  double theta = 0.0;
  int dim = 2;
  long long n = 0;
  long long seed = 1;
  std::string out = "sample.csv";
};

int cmd_simulate(const SimulateArgs& a) {
  if (a.n < 1) throw std::invalid_argument("simulate: need --n >= 1");
  if (a.seed < 0) throw std::invalid_argument("simulate: seed must be nonnegative");
  const auto copula = copwav::make_copula(a.model, a.theta, a.dim);
  copwav::Rng rng(std::uint64_t(a.seed));
  copwav::csv::Table t;
  t.cols = std::size_t(a.dim);
  t.data.resize(std::size_t(a.n) * t.cols);
  for (long long i = 0; i < a.n; ++i)
    copula->sample(rng, std::span<double>(t.data.data() + std::size_t(i) * t.cols, t.cols));
  copwav::csv::write(a.out, t);
  std::printf("wrote %lld observations of %s (dim %d) to %s\n", a.n, a.model.c_str(), a.dim,
              a.out.c_str());
  return 0;
}

struct EstimateArgs {
  std::string input;
  std::string wavelet = "haar";
  int level = -1;
  int auto_t = 0;
  int dim = 0;
  std::string grid = "auto";
  int grid_points = 101;
  std::string scaling = "n";
  bool raw = false;
  std::string out = "estimate.csv";
};

int cmd_estimate(const EstimateArgs& a) {
  const auto table = copwav::csv::load(a.input);
  const int d = int(table.cols);
  if (a.dim > 0 && a.dim != d)
    throw std::invalid_argument("estimate: input has " + std::to_string(d) +
                                " columns but --dim says " + std::to_string(a.dim));
  copwav::Sample s;
  s.dim = d;
  s.data = table.data;
  const std::size_t n = s.size();

  int j = a.level;
  if (a.auto_t > 0) {
    j = copwav::resolution_rule(n, a.auto_t, d);
    std::printf("auto level: j=%d (round(log2((n/ln n)^(1/(2t+d)))) with n=%zu, t=%d, d=%d)\n", j,
                n, a.auto_t, d);
  } else if (j < 0) {
    throw std::invalid_argument("estimate: pass --level or --auto-level");
  }

  copwav::EstimatorConfig ecfg;
  ecfg.level = j;
  if (a.scaling == "n")
    ecfg.scaling = copwav::RankScaling::divide_n;
  else if (a.scaling == "n_plus_1")
    ecfg.scaling = copwav::RankScaling::divide_n_plus_1;
  else
    throw std::invalid_argument("estimate: --scaling must be 'n' or 'n_plus_1'");

  const auto w = std::make_shared<const copwav::FatherWavelet>(copwav::make_father(a.wavelet));
  copwav::PseudoSample ps;
  if (a.raw) {
    for (double v : s.data)
      if (!(v >= 0.0 && v <= 1.0))
        throw std::invalid_argument("estimate: --raw expects values in [0,1]");
    ps.dim = d;
    ps.data = s.data;
  } else {
    ps = copwav::pseudo_observations(s, ecfg.scaling);
  }
  const auto field = copwav::fit_coefficients(ps, w, ecfg);

  copwav::EvalGrid grid;
  if (a.grid == "cells" || (a.grid == "auto" && w->is_haar()))
    grid = copwav::dyadic_cell_centers(d, j);
  else if (a.grid == "uniform" || a.grid == "auto")
    grid = copwav::uniform_interior_grid(d, a.grid_points);
  else
    throw std::invalid_argument("estimate: --grid must be auto, cells, or uniform");

  copwav::csv::Table out;
  out.cols = std::size_t(d) + 1;
  out.data.reserve(grid.size() * out.cols);
  for (std::size_t p = 0; p < grid.size(); ++p) {
    const auto u = grid.row(p);
    out.data.insert(out.data.end(), u.begin(), u.end());
    out.data.push_back(field(u));
  }
  copwav::csv::write(a.out, out);
  std::printf("wrote %zu density values at level j=%d to %s\n", grid.size(), j, a.out.c_str());
  return 0;
}

int cmd_check_basis(const std::string& wavelet, int level) {
  const auto w = copwav::make_father(wavelet);
  const double pu = copwav::partition_of_unity_error(w, 997);
  const double ts = copwav::two_scale_residual(w);
  const auto g = copwav::gram_matrix(w, level);
  const std::size_t m = std::size_t{1} << level;
  double gram_dev = 0.0;
  for (std::size_t k = 0; k < m; ++k)
    for (std::size_t l = 0; l < m; ++l)
      gram_dev = std::max(gram_dev, std::abs(g[k * m + l] - (k == l ? 1.0 : 0.0)));
  const double pu_tol = w.is_haar() ? 0.0 : 1e-6;
  const double ts_tol = 1e-8;
  const double gram_tol = w.is_haar() ? 0.0 : 5e-4;
  const bool ok = pu <= pu_tol && ts <= ts_tol && gram_dev <= gram_tol;
  std::printf("wavelet %s: support [0,%d], order %d\n", w.name().c_str(), w.support(), w.order());
  std::printf("  partition of unity error  %.3e  (tol %.1e)\n", pu, pu_tol);
  std::printf("  two-scale residual        %.3e  (tol %.1e)\n", ts, ts_tol);
  std::printf("  gram deviation at j=%d     %.3e  (tol %.1e)\n", level, gram_dev, gram_tol);
  std::printf("%s\n", ok ? "PASS" : "FAIL");
  return ok ? 0 : 2;
}

int cmd_check_kernel(const std::string& wavelet, int level, int dim, long long seed) {
  if (seed < 0) throw std::invalid_argument("check-kernel: seed must be nonnegative");
  const auto w = copwav::make_father(wavelet);
  const copwav::ProjectionKernel pk1(w, level, 1);
  copwav::Rng rng{std::uint64_t(seed)};
  double l1_dev = 0.0;
  for (int i = 0; i < 25; ++i)
    l1_dev = std::max(l1_dev, std::abs(copwav::kernel_l1(pk1, rng.uniform()) - 1.0));

  const copwav::ProjectionKernel pkd(w, level, dim);
  const auto one = copwav::constant_density(1.0);
  const auto grid = copwav::uniform_interior_grid(dim, 9);
  double const_dev = 0.0;
  for (std::size_t p = 0; p < grid.size(); ++p)
    const_dev = std::max(const_dev, std::abs(copwav::project_density(pkd, one, grid.row(p)) - 1.0));

  const bool ok = l1_dev <= 1e-6 && const_dev <= 1e-9;
  std::printf("kernel %s at j=%d, dim %d\n", w.name().c_str(), level, dim);
  std::printf("  normalization |int K - 1| over 25 draws  %.3e  (tol 1.0e-06)\n", l1_dev);
  std::printf("  constant reproduction on 9^%d grid        %.3e  (tol 1.0e-09)\n", dim, const_dev);
  std::printf("%s\n", ok ? "PASS" : "FAIL");
  return ok ? 0 : 2;
}

struct ExperimentArgs {
  std::string kind;
  std::string config;
  std::string out_dir = ".";
  int workers = 0;
  long long seed = -1;
  bool force = false;
};

int cmd_experiment(const ExperimentArgs& a) {
  auto cfg = copwav::load_experiment_config_file(a.config);
  if (!a.kind.empty()) {
    const std::string k = a.kind == "decompose" ? "decomposition" : a.kind;
    if (copwav::parse_kind(k) != cfg.kind)
      throw std::invalid_argument("experiment: config declares kind '" + to_string(cfg.kind) +
                                  "' but the command line says '" + a.kind + "'");
  }
  if (a.workers > 0) cfg.workers = a.workers;
  if (a.seed >= 0) cfg.seed = std::uint64_t(a.seed);
  if (a.force) cfg.force = true;

  const auto res = copwav::run_and_write(cfg, a.out_dir);
  for (const auto& warning : res.h4_warnings) std::printf("warning: %s\n", warning.c_str());
  for (const auto& [name, ok] : res.criteria)
    std::printf("criterion %s: %s\n", name.c_str(), ok ? "PASS" : "FAIL");
  std::printf("%s experiment finished in %.2f s; report %s, summary %s\n",
              to_string(cfg.kind).c_str(), res.wall_time_seconds,
              res.config.report_path.c_str(), res.config.summary_path.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"rank-based linear wavelet estimation of copula densities"};
  app.require_subcommand(1);

  SimulateArgs sim;
  auto* sim_cmd = app.add_subcommand("simulate", "draw a seeded sample from a copula model");
  sim_cmd->add_option("--model", sim.model, "model: independence, fgm, frank, clayton, gaussian")
      ->required();
  sim_cmd->add_option("--theta", sim.theta, "dependence parameter (default 0)");
  sim_cmd->add_option("--dim", sim.dim, "dimension (default 2; only independence departs from 2)");
  sim_cmd->add_option("--n", sim.n, "number of observations")->required();
  sim_cmd->add_option("--seed", sim.seed, "RNG seed (default 1)");
  sim_cmd->add_option("--out", sim.out, "output CSV path (default sample.csv)");

  EstimateArgs est;
  auto* est_cmd = app.add_subcommand("estimate", "fit the rank-based wavelet density estimate");
  est_cmd->add_option("input", est.input, "headerless CSV of observations, one row per point")
      ->required();
  est_cmd->add_option("--wavelet", est.wavelet, "basis: haar, db2, db3, db4 (default haar)");
  auto* lvl = est_cmd->add_option("--level", est.level, "resolution level j");
  auto* alv = est_cmd->add_option("--auto-level", est.auto_t,
                                  "pick j by the resolution rule for smoothness t");
  lvl->excludes(alv);
  alv->excludes(lvl);
  est_cmd->add_option("--dim", est.dim, "expected dimension; must match the input columns");
  est_cmd->add_option("--grid", est.grid, "evaluation grid: auto, cells, uniform (default auto)");
  est_cmd->add_option("--grid-points", est.grid_points,
                      "per-axis points for the uniform grid (default 101)");
  est_cmd->add_option("--scaling", est.scaling, "rank scaling: n or n_plus_1 (default n)");
  est_cmd->add_flag("--raw", est.raw, "skip the rank transform; input must lie in [0,1]");
  est_cmd->add_option("--out", est.out, "output CSV path (default estimate.csv)");

  std::string basis_wavelet = "haar";
  int basis_level = 3;
  auto* basis_cmd = app.add_subcommand("check-basis", "verify partition of unity, refinement, "
                                                      "and orthonormality of a basis");
  basis_cmd->add_option("--wavelet", basis_wavelet, "basis: haar, db2, db3, db4 (default haar)");
  basis_cmd->add_option("--level", basis_level, "gram matrix level (default 3)");

  std::string kernel_wavelet = "haar";
  int kernel_level = 3;
  int kernel_dim = 2;
  long long kernel_seed = 1;
  auto* kernel_cmd = app.add_subcommand("check-kernel", "verify projection kernel normalization "
                                                        "and constant reproduction");
  kernel_cmd->add_option("--wavelet", kernel_wavelet, "basis: haar, db2, db3, db4 (default haar)");
  kernel_cmd->add_option("--level", kernel_level, "kernel level j (default 3)");
  kernel_cmd->add_option("--dim", kernel_dim, "dimension (default 2)");
  kernel_cmd->add_option("--seed", kernel_seed, "RNG seed for the probe points (default 1)");

  ExperimentArgs exp;
  auto* exp_cmd = app.add_subcommand("experiment", "run a Monte Carlo experiment from a TOML config");
  exp_cmd->add_option("kind", exp.kind,
                      "prop1, rate, or decompose; must match the config when given");
  exp_cmd->add_option("--config", exp.config, "TOML config path")->required();
  exp_cmd->add_option("--workers", exp.workers, "worker threads (overrides the config)");
  exp_cmd->add_option("--seed", exp.seed, "RNG seed (overrides the config)");
  exp_cmd->add_flag("--force", exp.force, "allow unbounded models in prop1/rate runs");
  exp_cmd->add_option("--out-dir", exp.out_dir, "directory for report files (default .)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    if (sim_cmd->parsed()) return cmd_simulate(sim);
    if (est_cmd->parsed()) return cmd_estimate(est);
    if (basis_cmd->parsed()) return cmd_check_basis(basis_wavelet, basis_level);
    if (kernel_cmd->parsed()) return cmd_check_kernel(kernel_wavelet, kernel_level, kernel_dim,
                                                      kernel_seed);
    if (exp_cmd->parsed()) return cmd_experiment(exp);
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 1;
}

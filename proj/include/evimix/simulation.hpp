#ifndef EVIMIX_SIMULATION_HPP
#define EVIMIX_SIMULATION_HPP

// Monte Carlo study: exact-Pareto areas with a smooth EVI profile over the
// area labels, fitted by the mixed model under three correlation cases and
// compared with area-wise Hill estimates.

#include <Eigen/Core>
#include <cstddef>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "evimix/correlation.hpp"
#include "evimix/estimator.hpp"

namespace evimix {

enum class CorrelationCase { Kernel500, Kernel1000, Identity };

std::string to_string(CorrelationCase c);
/// Accepts "kernel500", "kernel1000", "identity".
CorrelationCase parse_case(const std::string& name);

struct SimulationSpec {
  std::size_t J = 1000;
  std::size_t n = 50;
  std::size_t M = 100;
  CorrelationCase corr_case = CorrelationCase::Kernel500;
  std::uint64_t seed = 1;
  /// Scale the kernel length (500 or 1000 labels) by J / 1000.
  bool rescale_kernels = true;
  /// Worker threads; 0 means hardware concurrency.
  unsigned workers = 0;
  ModelConfig model;

  void validate() const;
};

struct SimulationReport {
  SimulationSpec spec;
  std::vector<double> truth;
  double mse_proposed = 0.0;
  double mse_hill = 0.0;
  std::vector<double> mean_proposed, p05_proposed, p95_proposed;
  std::vector<double> mean_hill, p05_hill, p95_hill;
  std::vector<std::uint64_t> replicate_seeds;
  std::size_t failed_replicates = 0;
  std::size_t unconverged_replicates = 0;
  /// Not part of the reproducible content.
  double wall_time_seconds = 0.0;
};

/// gamma_j = 2((j-1)/(J-1) - 1/2)^2 + 1/5, j = 1..J.
std::vector<double> true_evi_grid(std::size_t J);

/// Seed of replicate m's private generator (splitmix64 mixing of seed, m).
std::uint64_t replicate_seed(std::uint64_t seed, std::uint64_t m);

/// Uniform on the open interval (0, 1) from the top 53 bits of one draw.
double open_uniform(std::mt19937_64& rng);

/// Inverse-transform draw Y = U^{-gamma}.
inline double pareto_from_uniform(double u, double gamma) { return std::pow(u, -gamma); }

std::vector<double> sample_pareto(double gamma, std::size_t n, std::mt19937_64& rng);

/// Kernel length scale used for a case at dimension J (0 for Identity).
double case_length_scale(CorrelationCase c, std::size_t J, bool rescale);
CorrelationMatrix case_correlation(CorrelationCase c, std::size_t J, bool rescale = true);

/// (1 / (J M)) sum over replicates and areas of squared errors. Rows of
/// `estimates` are replicates.
double mse(const Eigen::MatrixXd& estimates, const std::vector<double>& truth);

/// Type-7 (linear interpolation) sample quantile.
double sample_quantile(std::vector<double> values, double prob);

SimulationReport run_study(const SimulationSpec& spec);

/// Columns area,truth,mean_proposed,p05_proposed,p95_proposed,mean_hill,p05_hill,p95_hill.
void write_curves_csv(std::ostream& os, const SimulationReport& report);
/// Table-style text summary; deterministic (no timings).
void write_summary(std::ostream& os, const std::vector<SimulationReport>& reports);

}  // namespace evimix

#endif  // EVIMIX_SIMULATION_HPP

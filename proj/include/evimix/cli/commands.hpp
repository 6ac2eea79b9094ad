#ifndef EVIMIX_CLI_COMMANDS_HPP
#define EVIMIX_CLI_COMMANDS_HPP

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "evimix/correlation.hpp"
#include "evimix/estimator.hpp"
#include "evimix/simulation.hpp"

namespace evimix::cli {

/// Exit statuses shared by every command.
inline constexpr int kExitOk = 0;
inline constexpr int kExitInputError = 1;
inline constexpr int kExitNotConverged = 2;

enum class CorrSource { Identity, Distance, TailDependence, File };

CorrSource parse_corr_source(const std::string& name);

struct CorrOptions {
  CorrSource source = CorrSource::Identity;
  double c = 1.0;         // distance kernel scale
  double p = 0.95;        // tail-dependence level
  double cutoff = 0.0;    // sparsification threshold
  double eps = 1e-6;      // PD repair floor
  std::string matrix_path;
};

struct RunConfig {
  std::string command;
  std::string data_path;
  std::string stations_path;
  std::string output_path = "-";  // single-file outputs; "-" is stdout
  std::string out_dir = ".";      // fit / simulate
  std::string input_table;        // return-levels input
  std::string gamma_column = "gamma_tilde";
  double tail_fraction = 0.10;
  CorrOptions corr;
  ModelConfig model;
  std::vector<double> return_R;
  unsigned periods_per_year = 365;
  bool require_positive_evi = false;
  double evi_floor = 0.0;
  // simulate
  std::size_t sim_J = 1000;
  std::size_t sim_n = 50;
  std::size_t sim_M = 100;
  std::string sim_case = "kernel500";  // or "all"
  std::uint64_t seed = 1;
  unsigned workers = 0;
  bool rescale_kernels = true;
};

/// Raw (possibly not positive definite) matrix for the dataset's areas,
/// before sparsification and repair.
Eigen::MatrixXd raw_correlation(const RunConfig& cfg);
/// raw -> sparsify -> repair, or the file contents for CorrSource::File.
CorrelationMatrix build_correlation(const RunConfig& cfg);

int cmd_hill(const RunConfig& cfg);
int cmd_build_corr(const RunConfig& cfg);
int cmd_fit(const RunConfig& cfg);
int cmd_return_levels(const RunConfig& cfg);
int cmd_simulate(const RunConfig& cfg);

/// Dispatches on cfg.command, mapping library errors to kExitInputError
/// with a message on `err`.
int run(const RunConfig& cfg, std::ostream& err);

}  // namespace evimix::cli

#endif  // EVIMIX_CLI_COMMANDS_HPP

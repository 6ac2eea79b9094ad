#ifndef EVIMIX_CORRELATION_HPP
#define EVIMIX_CORRELATION_HPP

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "evimix/tail.hpp"

namespace evimix {

/// Symmetric positive definite matrix with unit diagonal, held together with
/// its Cholesky factor. Immutable once built; construction certifies
/// positive definiteness.
class CorrelationMatrix {
 public:
  /// Validates symmetry (1e-12), unit diagonal and off-diagonal range, then
  /// factorizes. Throws NotPositiveDefinite when the factorization fails.
  explicit CorrelationMatrix(const Eigen::MatrixXd& entries);

  static CorrelationMatrix identity(std::size_t dim);

  std::size_t dim() const noexcept { return static_cast<std::size_t>(entries_.rows()); }
  const Eigen::MatrixXd& entries() const noexcept { return entries_; }
  /// Lower-triangular L with L L^T = D.
  Eigen::MatrixXd chol() const { return llt_.matrixL(); }
  double log_det() const noexcept { return log_det_; }
  /// D^{-1}, formed once from the factor.
  const Eigen::MatrixXd& precision() const noexcept { return precision_; }
  bool is_identity() const noexcept { return identity_; }

  /// v^T D^{-1} v via a triangular solve.
  double quad_form(const Eigen::VectorXd& v) const;
  Eigen::VectorXd solve(const Eigen::VectorXd& v) const;
  /// 1^T D^{-1} 1.
  double ones_precision_sum() const;

  CorrelationMatrix principal_submatrix(std::span<const std::size_t> indices) const;

 private:
  Eigen::MatrixXd entries_;
  Eigen::LLT<Eigen::MatrixXd> llt_;
  Eigen::MatrixXd precision_;
  double log_det_ = 0.0;
  bool identity_ = false;
};

struct Coordinate {
  double lon = 0.0;
  double lat = 0.0;
};

/// Coordinates of every area in the dataset; MissingCoordinates lists the
/// areas lacking lon/lat.
std::vector<Coordinate> coordinates_of(const Dataset& data);

/// Raw exponential kernel exp(-dist / c) on Euclidean (lon, lat) distance.
Eigen::MatrixXd distance_kernel(std::span<const Coordinate> coords, double c);
CorrelationMatrix build_distance_corr(std::span<const Coordinate> coords, double c);

/// Empirical tail dependence at level p. Requires equal-length series (row i
/// is a common date); RaggedPanel otherwise.
Eigen::MatrixXd build_tail_dependence_corr(const Dataset& data, double p);
/// Panel flavour: NaN entries are dropped pairwise and each pair uses its
/// retained rows for the quantiles and the denominator.
Eigen::MatrixXd build_tail_dependence_corr(const Panel& panel, double p);

/// Number of rows where both columns are present.
std::size_t common_rows(const Panel& panel, std::size_t j1, std::size_t j2);

/// Zeroes off-diagonal entries with |x| < cutoff.
Eigen::MatrixXd sparsify(const Eigen::MatrixXd& raw, double cutoff);

/// Eigenvalue clipping at eps * lambda_max followed by unit-diagonal
/// rescaling, repeated until the factorization succeeds (at most 100 passes).
/// Inputs that already factorize are returned unchanged.
CorrelationMatrix repair_pd(const Eigen::MatrixXd& raw, double eps = 1e-6);

/// Log density of N_J(0, sigma2 * D) at v.
double gaussian_logpdf(const Eigen::VectorXd& v, double sigma2,
                       const CorrelationMatrix& D);

/// Header-less dense CSV, one row per line. Written with 17 significant
/// digits so a read back reproduces the matrix exactly.
void write_matrix_csv(std::ostream& os, const Eigen::MatrixXd& m);
void write_matrix_csv(const std::string& path, const Eigen::MatrixXd& m);
Eigen::MatrixXd read_matrix_csv(const std::string& path);

}  // namespace evimix

#endif  // EVIMIX_CORRELATION_HPP

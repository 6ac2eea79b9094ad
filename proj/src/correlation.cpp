#include "evimix/correlation.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>

#include "evimix/error.hpp"

namespace evimix {

namespace {

constexpr double kSymmetryTol = 1e-12;

bool factorizes(const Eigen::MatrixXd& m) {
  Eigen::LLT<Eigen::MatrixXd> llt(m);
  return llt.info() == Eigen::Success;
}

double max_diag_deviation(const Eigen::MatrixXd& m) {
  return (m.diagonal().array() - 1.0).abs().maxCoeff();
}

}  // namespace

CorrelationMatrix::CorrelationMatrix(const Eigen::MatrixXd& entries) {
  if (entries.rows() != entries.cols() || entries.rows() == 0)
    throw Error(ErrorKind::DimensionMismatch, "correlation matrix must be square and nonempty");
  const Eigen::Index J = entries.rows();
  for (Eigen::Index i = 0; i < J; ++i) {
    if (entries(i, i) != 1.0)
      throw Error(ErrorKind::InvalidParameter,
                  "diagonal entry " + std::to_string(i) + " is not 1");
    for (Eigen::Index j = 0; j < i; ++j) {
      const double a = entries(i, j), b = entries(j, i);
      if (!std::isfinite(a) || !std::isfinite(b) || std::abs(a - b) > kSymmetryTol)
        throw Error(ErrorKind::InvalidParameter, "correlation matrix is not symmetric");
      if (a < -1.0 || a > 1.0)
        throw Error(ErrorKind::InvalidParameter, "correlation entry outside [-1, 1]");
    }
  }
  // Exact symmetry from here on.
  entries_ = 0.5 * (entries + entries.transpose());
  entries_.diagonal().setOnes();
  llt_.compute(entries_);
  if (llt_.info() != Eigen::Success)
    throw Error(ErrorKind::NotPositiveDefinite, "Cholesky factorization failed");
  const Eigen::MatrixXd L = llt_.matrixL();
  log_det_ = 2.0 * L.diagonal().array().log().sum();
  identity_ = entries_.isIdentity(0.0);
  precision_ = llt_.solve(Eigen::MatrixXd::Identity(J, J));
  precision_ = 0.5 * (precision_ + precision_.transpose()).eval();
}

CorrelationMatrix CorrelationMatrix::identity(std::size_t dim) {
  const auto J = static_cast<Eigen::Index>(dim);
  return CorrelationMatrix(Eigen::MatrixXd::Identity(J, J));
}

double CorrelationMatrix::quad_form(const Eigen::VectorXd& v) const {
  if (static_cast<std::size_t>(v.size()) != dim())
    throw Error(ErrorKind::DimensionMismatch, "vector length differs from matrix dimension");
  const Eigen::VectorXd z = llt_.matrixL().solve(v);
  return z.squaredNorm();
}

Eigen::VectorXd CorrelationMatrix::solve(const Eigen::VectorXd& v) const {
  if (static_cast<std::size_t>(v.size()) != dim())
    throw Error(ErrorKind::DimensionMismatch, "vector length differs from matrix dimension");
  return llt_.solve(v);
}

double CorrelationMatrix::ones_precision_sum() const { return precision_.sum(); }

CorrelationMatrix CorrelationMatrix::principal_submatrix(
    std::span<const std::size_t> indices) const {
  const auto m = static_cast<Eigen::Index>(indices.size());
  Eigen::MatrixXd sub(m, m);
  for (Eigen::Index a = 0; a < m; ++a)
    for (Eigen::Index b = 0; b < m; ++b)
      sub(a, b) = entries_(static_cast<Eigen::Index>(indices[a]),
                           static_cast<Eigen::Index>(indices[b]));
  return CorrelationMatrix(sub);
}

std::vector<Coordinate> coordinates_of(const Dataset& data) {
  std::vector<Coordinate> out;
  std::string missing;
  for (const auto& a : data.areas()) {
    if (!a.lon || !a.lat || !std::isfinite(*a.lon) || !std::isfinite(*a.lat)) {
      missing += (missing.empty() ? "" : ", ") + a.area_id;
      continue;
    }
    out.push_back({*a.lon, *a.lat});
  }
  if (!missing.empty())
    throw Error(ErrorKind::MissingCoordinates, "no coordinates for area(s): " + missing);
  return out;
}

Eigen::MatrixXd distance_kernel(std::span<const Coordinate> coords, double c) {
  if (!(c > 0.0) || !std::isfinite(c))
    throw Error(ErrorKind::InvalidParameter, "kernel scale c must be positive");
  const auto J = static_cast<Eigen::Index>(coords.size());
  Eigen::MatrixXd D(J, J);
  for (Eigen::Index i = 0; i < J; ++i) {
    D(i, i) = 1.0;
    const auto& a = coords[static_cast<std::size_t>(i)];
    if (!std::isfinite(a.lon) || !std::isfinite(a.lat))
      throw Error(ErrorKind::MissingCoordinates,
                  "non-finite coordinate at position " + std::to_string(i));
    for (Eigen::Index j = 0; j < i; ++j) {
      const auto& b = coords[static_cast<std::size_t>(j)];
      const double dist = std::hypot(a.lon - b.lon, a.lat - b.lat);
      D(i, j) = D(j, i) = std::exp(-dist / c);
    }
  }
  return D;
}

CorrelationMatrix build_distance_corr(std::span<const Coordinate> coords, double c) {
  return CorrelationMatrix(distance_kernel(coords, c));
}

std::size_t common_rows(const Panel& panel, std::size_t j1, std::size_t j2) {
  const auto& a = panel.columns.at(j1);
  const auto& b = panel.columns.at(j2);
  std::size_t count = 0;
  for (std::size_t i = 0; i < panel.rows(); ++i)
    if (!std::isnan(a[i]) && !std::isnan(b[i])) ++count;
  return count;
}

Eigen::MatrixXd build_tail_dependence_corr(const Panel& panel, double p) {
  if (!(p > 0.0 && p < 1.0))
    throw Error(ErrorKind::InvalidParameter, "tail-dependence level p must lie in (0, 1)");
  const std::size_t J = panel.cols(), n = panel.rows();
  for (const auto& col : panel.columns)
    if (col.size() != n)
      throw Error(ErrorKind::RaggedPanel, "panel columns differ in length");
  // Same relative slack as empirical_quantile, so n = 10, p = 0.9 counts
  // as one tail row.
  auto tail_rows = [p](std::size_t rows) { return static_cast<double>(rows) * (1.0 - p); };
  auto too_few = [](double rows) { return rows < 1.0 - 1e-12; };
  if (too_few(tail_rows(n)))
    throw Error(ErrorKind::DegenerateQuantile,
                "n(1-p) < 1: too few rows for the requested tail level");

  // Per-column exceedance indicators of the marginal p-quantile; -1 marks a
  // missing entry.
  std::vector<std::vector<signed char>> state(J, std::vector<signed char>(n, -1));
  for (std::size_t j = 0; j < J; ++j) {
    std::vector<double> present;
    for (double y : panel.columns[j])
      if (!std::isnan(y)) present.push_back(y);
    if (present.empty()) continue;
    const double q = empirical_quantile(present, p);
    for (std::size_t i = 0; i < n; ++i) {
      const double y = panel.columns[j][i];
      if (!std::isnan(y)) state[j][i] = y > q ? 1 : 0;
    }
  }

  Eigen::MatrixXd D = Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(J),
                                                static_cast<Eigen::Index>(J));
  for (std::size_t j1 = 0; j1 < J; ++j1) {
    for (std::size_t j2 = 0; j2 < j1; ++j2) {
      std::size_t retained = 0, joint = 0;
      const auto& s1 = state[j1];
      const auto& s2 = state[j2];
      for (std::size_t i = 0; i < n; ++i) {
        if (s1[i] < 0 || s2[i] < 0) continue;
        ++retained;
        joint += static_cast<std::size_t>(s1[i] & s2[i]);
      }
      const double denom = tail_rows(retained);
      // Pairs without enough common dates carry no tail evidence.
      const double td = too_few(denom) ? 0.0
                                    : std::clamp(static_cast<double>(joint) / denom, 0.0, 1.0);
      D(static_cast<Eigen::Index>(j1), static_cast<Eigen::Index>(j2)) = td;
      D(static_cast<Eigen::Index>(j2), static_cast<Eigen::Index>(j1)) = td;
    }
  }
  return D;
}

Eigen::MatrixXd build_tail_dependence_corr(const Dataset& data, double p) {
  Panel panel;
  const std::size_t n = data.size() ? data[0].values.size() : 0;
  for (const auto& a : data.areas()) {
    if (a.values.size() != n)
      throw Error(ErrorKind::RaggedPanel,
                  "area '" + a.area_id + "' has " + std::to_string(a.values.size()) +
                      " observations, expected " + std::to_string(n));
    panel.area_ids.push_back(a.area_id);
    panel.columns.push_back(a.values);
  }
  panel.dates.resize(n);
  return build_tail_dependence_corr(panel, p);
}

Eigen::MatrixXd sparsify(const Eigen::MatrixXd& raw, double cutoff) {
  if (!(cutoff >= 0.0 && cutoff < 1.0))
    throw Error(ErrorKind::InvalidParameter, "sparsification cutoff must lie in [0, 1)");
  Eigen::MatrixXd out = raw;
  for (Eigen::Index i = 0; i < out.rows(); ++i)
    for (Eigen::Index j = 0; j < out.cols(); ++j)
      if (i != j && std::abs(out(i, j)) < cutoff) out(i, j) = 0.0;
  return out;
}

CorrelationMatrix repair_pd(const Eigen::MatrixXd& raw, double eps) {
  if (!(eps > 0.0))
    throw Error(ErrorKind::InvalidParameter, "repair eps must be positive");
  if (raw.rows() != raw.cols() || raw.rows() == 0)
    throw Error(ErrorKind::DimensionMismatch, "correlation matrix must be square and nonempty");

  Eigen::MatrixXd A = 0.5 * (raw + raw.transpose());
  if (max_diag_deviation(A) == 0.0 && factorizes(A)) return CorrelationMatrix(A);

  for (int pass = 0; pass < 100; ++pass) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(A);
    if (eig.info() != Eigen::Success) break;
    Eigen::VectorXd lambda = eig.eigenvalues();
    const double floor = eps * lambda.maxCoeff();
    lambda = lambda.cwiseMax(floor);
    const Eigen::MatrixXd& Q = eig.eigenvectors();
    A = Q * lambda.asDiagonal() * Q.transpose();

    const Eigen::VectorXd scale = A.diagonal().cwiseSqrt().cwiseInverse();
    A = scale.asDiagonal() * A * scale.asDiagonal();
    A = (0.5 * (A + A.transpose())).cwiseMax(-1.0).cwiseMin(1.0);
    A.diagonal().setOnes();

    if (max_diag_deviation(A) < 1e-12 && factorizes(A)) return CorrelationMatrix(A);
  }
  throw Error(ErrorKind::RepairFailed, "matrix not positive definite after 100 repair passes");
}

double gaussian_logpdf(const Eigen::VectorXd& v, double sigma2,
                       const CorrelationMatrix& D) {
  if (static_cast<std::size_t>(v.size()) != D.dim())
    throw Error(ErrorKind::DimensionMismatch, "vector length differs from matrix dimension");
  if (!(sigma2 > 0.0))
    throw Error(ErrorKind::InvalidParameter, "sigma2 must be positive");
  const double J = static_cast<double>(D.dim());
  return -0.5 * J * std::log(2.0 * std::numbers::pi * sigma2) - 0.5 * D.log_det() -
         D.quad_form(v) / (2.0 * sigma2);
}

void write_matrix_csv(std::ostream& os, const Eigen::MatrixXd& m) {
  char buf[40];
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      std::snprintf(buf, sizeof buf, "%.17g", m(i, j));
      if (j) os << ',';
      os << buf;
    }
    os << '\n';
  }
}

void write_matrix_csv(const std::string& path, const Eigen::MatrixXd& m) {
  std::ofstream os(path);
  if (!os) throw Error(ErrorKind::UsageError, "cannot write '" + path + "'");
  write_matrix_csv(os, m);
}

Eigen::MatrixXd read_matrix_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ParseError(path, 0, "cannot open file");
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      char* end = nullptr;
      const double x = std::strtod(cell.c_str(), &end);
      if (cell.empty() || end == cell.c_str() || *end != '\0')
        throw ParseError(path, lineno, "not a number: '" + cell + "'");
      row.push_back(x);
    }
    rows.push_back(std::move(row));
  }
  const auto J = static_cast<Eigen::Index>(rows.size());
  Eigen::MatrixXd m(J, J);
  for (Eigen::Index i = 0; i < J; ++i) {
    if (static_cast<Eigen::Index>(rows[static_cast<std::size_t>(i)].size()) != J)
      throw ParseError(path, 0, "matrix is not square");
    for (Eigen::Index j = 0; j < J; ++j) m(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
  }
  return m;
}

}  // namespace evimix

#ifndef EVIMIX_TAIL_HPP
#define EVIMIX_TAIL_HPP

// Pareto-type tail primitives: observation containers, threshold
// exceedances, the Hill estimator, the Pareto excess density and return
// levels.

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace evimix {

struct AreaSeries {
  std::string area_id;
  std::vector<double> values;
  std::optional<double> lon;
  std::optional<double> lat;
};

/// Observations grouped by area, in first-appearance order.
class Dataset {
 public:
  Dataset() = default;
  /// Validates ids (unique, nonempty), series lengths (>= 1) and finiteness.
  explicit Dataset(std::vector<AreaSeries> areas);

  std::size_t size() const noexcept { return areas_.size(); }
  const AreaSeries& operator[](std::size_t j) const { return areas_[j]; }
  const std::vector<AreaSeries>& areas() const noexcept { return areas_; }
  std::vector<std::string> ids() const;

  /// Index of an area id, or nullopt.
  std::optional<std::size_t> find(const std::string& area_id) const;

  /// Keeps only the listed areas (in the given order).
  Dataset subset(std::span<const std::size_t> indices) const;

 private:
  std::vector<AreaSeries> areas_;
};

/// Date-aligned observations: column j holds area j, row i a common date.
/// Missing entries are NaN.
struct Panel {
  std::vector<std::string> area_ids;
  std::vector<std::string> dates;
  std::vector<std::vector<double>> columns;

  std::size_t rows() const noexcept { return dates.size(); }
  std::size_t cols() const noexcept { return columns.size(); }
  /// Drops missing entries column-wise.
  Dataset to_dataset() const;
};

/// Sufficient statistics of the Pareto excess likelihood, one entry per area.
struct ExceedanceSummary {
  std::vector<std::string> area_ids;
  std::vector<double> omega;       // thresholds
  std::vector<std::size_t> k;      // exceedance counts (strict Y > omega)
  std::vector<double> S;           // sum of log(Y / omega) over exceedances
  std::vector<std::size_t> n;      // sample sizes
  double k_bar = 0.0;              // mean of k

  std::size_t size() const noexcept { return omega.size(); }
  /// Indices of areas with k == 0.
  std::vector<std::size_t> flagged() const;
  /// Throws NoExceedancesError listing flagged areas, if any.
  void require_exceedances() const;
  ExceedanceSummary subset(std::span<const std::size_t> indices) const;
};

/// Appends one area's statistics given its observations and threshold.
/// Used by both threshold flavours of extract_exceedances.
void accumulate_area(ExceedanceSummary& out, const std::string& area_id,
                     std::span<const double> values, double omega);

/// The ceil(prob * n)-th order statistic (1-based) of the values; `prob` in
/// (0, 1). A relative slack of 1e-12 in the product guards against
/// representation error (0.9 * 100 -> 90, not 91).
double empirical_quantile(std::span<const double> values, double prob);

ExceedanceSummary extract_exceedances(const Dataset& data,
                                      std::span<const double> thresholds);
/// Thresholds at the empirical (1 - tail_fraction) quantile of each area.
ExceedanceSummary extract_exceedances(const Dataset& data,
                                      double tail_fraction);

/// Hill estimate S_j / k_j for area j.
double hill_estimate(const ExceedanceSummary& summary, std::size_t j);
std::vector<double> hill_estimates(const ExceedanceSummary& summary);
/// Hill estimate computed straight from raw observations.
double hill_estimate(std::span<const double> values, double omega);

/// log of the Pareto excess density on (omega, inf) with index gamma.
double pareto_log_density(double y, double omega, double gamma);

/// R-year return level omega * (periods_per_year * R * k / n)^gamma.
double return_level(double omega, std::size_t k, std::size_t n, double gamma,
                    double R_years, unsigned periods_per_year = 365);

}  // namespace evimix

#endif  // EVIMIX_TAIL_HPP

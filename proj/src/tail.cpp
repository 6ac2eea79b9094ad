#include "evimix/tail.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_set>

#include "evimix/error.hpp"

namespace evimix {

Dataset::Dataset(std::vector<AreaSeries> areas) : areas_(std::move(areas)) {
  std::unordered_set<std::string> seen;
  for (const auto& a : areas_) {
    if (a.area_id.empty())
      throw Error(ErrorKind::DomainError, "empty area_id");
    if (!seen.insert(a.area_id).second)
      throw Error(ErrorKind::DuplicateKey, "duplicate area_id '" + a.area_id + "'");
    if (a.values.empty())
      throw Error(ErrorKind::DomainError, "area '" + a.area_id + "' has no observations");
    for (double y : a.values)
      if (!std::isfinite(y))
        throw Error(ErrorKind::DomainError,
                    "non-finite observation in area '" + a.area_id + "'");
  }
}

std::vector<std::string> Dataset::ids() const {
  std::vector<std::string> out;
  out.reserve(areas_.size());
  for (const auto& a : areas_) out.push_back(a.area_id);
  return out;
}

std::optional<std::size_t> Dataset::find(const std::string& area_id) const {
  for (std::size_t j = 0; j < areas_.size(); ++j)
    if (areas_[j].area_id == area_id) return j;
  return std::nullopt;
}

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
  std::vector<AreaSeries> out;
  out.reserve(indices.size());
  for (auto j : indices) out.push_back(areas_.at(j));
  return Dataset(std::move(out));
}

Dataset Panel::to_dataset() const {
  std::vector<AreaSeries> areas;
  areas.reserve(cols());
  for (std::size_t j = 0; j < cols(); ++j) {
    AreaSeries a{area_ids[j], {}, std::nullopt, std::nullopt};
    for (double y : columns[j])
      if (!std::isnan(y)) a.values.push_back(y);
    areas.push_back(std::move(a));
  }
  return Dataset(std::move(areas));
}

namespace {
double mean_k(const std::vector<std::size_t>& k) {
  double total = 0.0;
  for (auto kj : k) total += static_cast<double>(kj);
  return k.empty() ? 0.0 : total / static_cast<double>(k.size());
}
}  // namespace

std::vector<std::size_t> ExceedanceSummary::flagged() const {
  std::vector<std::size_t> out;
  for (std::size_t j = 0; j < k.size(); ++j)
    if (k[j] == 0) out.push_back(j);
  return out;
}

void ExceedanceSummary::require_exceedances() const {
  auto bad = flagged();
  if (bad.empty()) return;
  std::vector<std::string> ids;
  for (auto j : bad)
    ids.push_back(j < area_ids.size() ? area_ids[j] : std::to_string(j));
  throw NoExceedancesError(std::move(ids));
}

ExceedanceSummary ExceedanceSummary::subset(
    std::span<const std::size_t> indices) const {
  ExceedanceSummary out;
  for (auto j : indices) {
    out.area_ids.push_back(j < area_ids.size() ? area_ids[j] : std::to_string(j));
    out.omega.push_back(omega.at(j));
    out.k.push_back(k.at(j));
    out.S.push_back(S.at(j));
    out.n.push_back(n.at(j));
  }
  out.k_bar = mean_k(out.k);
  return out;
}

void accumulate_area(ExceedanceSummary& out, const std::string& area_id,
                     std::span<const double> values, double omega) {
  if (!(omega > 0.0) || !std::isfinite(omega))
    throw Error(ErrorKind::InvalidThreshold,
                "threshold for area '" + area_id + "' must be positive and finite");
  std::size_t k = 0;
  double S = 0.0;
  for (double y : values) {
    if (y > omega) {
      ++k;
      S += std::log(y / omega);
    }
  }
  out.area_ids.push_back(area_id);
  out.omega.push_back(omega);
  out.k.push_back(k);
  out.S.push_back(S);
  out.n.push_back(values.size());
  out.k_bar = mean_k(out.k);
}

double empirical_quantile(std::span<const double> values, double prob) {
  if (values.empty())
    throw Error(ErrorKind::DegenerateQuantile, "quantile of an empty sample");
  if (!(prob > 0.0 && prob < 1.0))
    throw Error(ErrorKind::InvalidParameter, "quantile level must lie in (0, 1)");
  const double n = static_cast<double>(values.size());
  auto rank = static_cast<std::size_t>(std::ceil(prob * n * (1.0 - 1e-12)));
  rank = std::clamp<std::size_t>(rank, 1, values.size());
  std::vector<double> sorted(values.begin(), values.end());
  std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(rank - 1),
                   sorted.end());
  return sorted[rank - 1];
}

ExceedanceSummary extract_exceedances(const Dataset& data,
                                      std::span<const double> thresholds) {
  if (thresholds.size() != data.size())
    throw Error(ErrorKind::DimensionMismatch,
                "expected " + std::to_string(data.size()) + " thresholds, got " +
                    std::to_string(thresholds.size()));
  ExceedanceSummary out;
  for (std::size_t j = 0; j < data.size(); ++j)
    accumulate_area(out, data[j].area_id, data[j].values, thresholds[j]);
  return out;
}

ExceedanceSummary extract_exceedances(const Dataset& data, double tail_fraction) {
  if (!(tail_fraction > 0.0 && tail_fraction < 1.0))
    throw Error(ErrorKind::InvalidParameter, "tail_fraction must lie in (0, 1)");
  ExceedanceSummary out;
  for (const auto& area : data.areas()) {
    const double omega = empirical_quantile(area.values, 1.0 - tail_fraction);
    accumulate_area(out, area.area_id, area.values, omega);
  }
  return out;
}

double hill_estimate(const ExceedanceSummary& summary, std::size_t j) {
  if (summary.k.at(j) == 0)
    throw NoExceedancesError(
        {j < summary.area_ids.size() ? summary.area_ids[j] : std::to_string(j)});
  return summary.S[j] / static_cast<double>(summary.k[j]);
}

std::vector<double> hill_estimates(const ExceedanceSummary& summary) {
  summary.require_exceedances();
  std::vector<double> out(summary.size());
  for (std::size_t j = 0; j < out.size(); ++j) out[j] = hill_estimate(summary, j);
  return out;
}

double hill_estimate(std::span<const double> values, double omega) {
  ExceedanceSummary s;
  accumulate_area(s, "area", values, omega);
  return hill_estimate(s, 0);
}

double pareto_log_density(double y, double omega, double gamma) {
  if (!(gamma > 0.0))
    throw Error(ErrorKind::InvalidParameter, "Pareto index must be positive");
  if (!(omega > 0.0))
    throw Error(ErrorKind::InvalidThreshold, "threshold must be positive");
  if (!(y > omega))
    throw Error(ErrorKind::OutOfSupport, "Pareto density evaluated at y <= omega");
  return -std::log(omega * gamma) - (1.0 / gamma + 1.0) * std::log(y / omega);
}

double return_level(double omega, std::size_t k, std::size_t n, double gamma,
                    double R_years, unsigned periods_per_year) {
  if (k == 0) throw NoExceedancesError({"<return level>"});
  if (n == 0 || k > n)
    throw Error(ErrorKind::InvalidParameter, "return level requires 0 < k <= n");
  if (!(omega > 0.0))
    throw Error(ErrorKind::InvalidThreshold, "threshold must be positive");
  if (!(gamma > 0.0) || !(R_years > 0.0) || periods_per_year == 0)
    throw Error(ErrorKind::InvalidParameter,
                "return level requires gamma > 0, R > 0, periods_per_year > 0");
  const double base = static_cast<double>(periods_per_year) * R_years *
                      static_cast<double>(k) / static_cast<double>(n);
  return omega * std::pow(base, gamma);
}

}  // namespace evimix

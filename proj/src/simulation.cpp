#include "evimix/simulation.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <optional>
#include <ostream>
#include <thread>

#include "evimix/error.hpp"
#include "evimix/format.hpp"
#include "evimix/tail.hpp"

namespace evimix {

std::string to_string(CorrelationCase c) {
  switch (c) {
    case CorrelationCase::Kernel500: return "kernel500";
    case CorrelationCase::Kernel1000: return "kernel1000";
    case CorrelationCase::Identity: return "identity";
  }
  return "unknown";
}

CorrelationCase parse_case(const std::string& name) {
  if (name == "kernel500") return CorrelationCase::Kernel500;
  if (name == "kernel1000") return CorrelationCase::Kernel1000;
  if (name == "identity") return CorrelationCase::Identity;
  throw Error(ErrorKind::UsageError,
              "unknown case '" + name + "' (expected kernel500, kernel1000 or identity)");
}

void SimulationSpec::validate() const {
  if (J < 2) throw Error(ErrorKind::UsageError, "J must be at least 2");
  if (n < 1) throw Error(ErrorKind::UsageError, "n must be at least 1");
  if (M < 1) throw Error(ErrorKind::UsageError, "M must be at least 1");
  model.validate();
}

std::vector<double> true_evi_grid(std::size_t J) {
  if (J < 2) throw Error(ErrorKind::InvalidParameter, "EVI grid needs J >= 2");
  std::vector<double> gamma(J);
  for (std::size_t j = 0; j < J; ++j) {
    // (j/(J-1) - 1/2) as an integer offset over 2(J-1): exact mirror symmetry
    const auto offset = 2 * static_cast<long long>(j) - static_cast<long long>(J - 1);
    const double x = static_cast<double>(offset) / (2.0 * static_cast<double>(J - 1));
    gamma[j] = 2.0 * x * x + 0.2;
  }
  return gamma;
}

namespace {
std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}
}  // namespace

std::uint64_t replicate_seed(std::uint64_t seed, std::uint64_t m) {
  return splitmix64(splitmix64(seed) ^ (m + 0x632be59bd9b4e019ULL * (m + 1)));
}

double open_uniform(std::mt19937_64& rng) {
  return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53;
}

std::vector<double> sample_pareto(double gamma, std::size_t n, std::mt19937_64& rng) {
  if (!(gamma > 0.0)) throw Error(ErrorKind::InvalidParameter, "Pareto index must be positive");
  std::vector<double> out(n);
  for (auto& y : out) y = pareto_from_uniform(open_uniform(rng), gamma);
  return out;
}

double case_length_scale(CorrelationCase c, std::size_t J, bool rescale) {
  double base = 0.0;
  switch (c) {
    case CorrelationCase::Kernel500: base = 500.0; break;
    case CorrelationCase::Kernel1000: base = 1000.0; break;
    case CorrelationCase::Identity: return 0.0;
  }
  return rescale ? base * static_cast<double>(J) / 1000.0 : base;
}

CorrelationMatrix case_correlation(CorrelationCase c, std::size_t J, bool rescale) {
  if (J < 2) throw Error(ErrorKind::InvalidParameter, "case correlation needs J >= 2");
  if (c == CorrelationCase::Identity) return CorrelationMatrix::identity(J);
  const double scale = case_length_scale(c, J, rescale);
  const auto n = static_cast<Eigen::Index>(J);
  Eigen::MatrixXd D(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      D(i, j) = std::exp(-std::abs(static_cast<double>(i - j)) / scale);
  return CorrelationMatrix(D);
}

double mse(const Eigen::MatrixXd& estimates, const std::vector<double>& truth) {
  if (static_cast<std::size_t>(estimates.cols()) != truth.size())
    throw Error(ErrorKind::DimensionMismatch, "estimate columns differ from truth length");
  if (estimates.rows() == 0) throw Error(ErrorKind::DimensionMismatch, "no replicates");
  double total = 0.0;
  for (Eigen::Index m = 0; m < estimates.rows(); ++m)
    for (Eigen::Index j = 0; j < estimates.cols(); ++j) {
      const double d = estimates(m, j) - truth[static_cast<std::size_t>(j)];
      total += d * d;
    }
  return total / static_cast<double>(estimates.rows() * estimates.cols());
}

double sample_quantile(std::vector<double> values, double prob) {
  if (values.empty()) throw Error(ErrorKind::DimensionMismatch, "quantile of empty sample");
  std::sort(values.begin(), values.end());
  const double h = (static_cast<double>(values.size()) - 1.0) * prob;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

namespace {

struct ReplicateResult {
  std::optional<Eigen::VectorXd> proposed;
  Eigen::VectorXd hill;
  bool converged = false;
};

ReplicateResult run_replicate(const SimulationSpec& spec, const std::vector<double>& truth,
                              const CorrelationMatrix& D, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<AreaSeries> areas;
  areas.reserve(spec.J);
  for (std::size_t j = 0; j < spec.J; ++j)
    areas.push_back({std::to_string(j + 1), sample_pareto(truth[j], spec.n, rng), {}, {}});
  const Dataset data(std::move(areas));
  // Fixed thresholds at the lower end of the Pareto support: k_j = n_j.
  const std::vector<double> omega(spec.J, 1.0);
  const ExceedanceSummary ex = extract_exceedances(data, omega);

  ReplicateResult out;
  const auto hill = hill_estimates(ex);
  out.hill = Eigen::Map<const Eigen::VectorXd>(hill.data(), static_cast<Eigen::Index>(hill.size()));
  try {
    const ModelFit f = fit(ex, D, spec.model);
    out.proposed = f.gamma_tilde;
    out.converged = f.converged;
  } catch (const Error&) {
    out.proposed.reset();
  }
  return out;
}

}  // namespace

SimulationReport run_study(const SimulationSpec& spec) {
  spec.validate();
  const auto t0 = std::chrono::steady_clock::now();

  SimulationReport report;
  report.spec = spec;
  report.truth = true_evi_grid(spec.J);
  const CorrelationMatrix D = case_correlation(spec.corr_case, spec.J, spec.rescale_kernels);

  report.replicate_seeds.resize(spec.M);
  for (std::size_t m = 0; m < spec.M; ++m) report.replicate_seeds[m] = replicate_seed(spec.seed, m);

  std::vector<ReplicateResult> results(spec.M);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t m = next++; m < spec.M; m = next++)
      results[m] = run_replicate(spec, report.truth, D, report.replicate_seeds[m]);
  };
  unsigned workers = spec.workers ? spec.workers : std::max(1u, std::thread::hardware_concurrency());
  workers = static_cast<unsigned>(std::min<std::size_t>(workers, spec.M));
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(worker);
  }

  // Reduction in replicate order; independent of the worker count.
  std::vector<std::size_t> ok;
  for (std::size_t m = 0; m < spec.M; ++m) {
    if (!results[m].proposed) {
      ++report.failed_replicates;
      continue;
    }
    if (!results[m].converged) ++report.unconverged_replicates;
    ok.push_back(m);
  }
  const auto J = static_cast<Eigen::Index>(spec.J);
  const auto R = static_cast<Eigen::Index>(ok.size());
  Eigen::MatrixXd prop(R, J), hill(R, J);
  for (Eigen::Index r = 0; r < R; ++r) {
    prop.row(r) = results[ok[static_cast<std::size_t>(r)]].proposed->transpose();
    hill.row(r) = results[ok[static_cast<std::size_t>(r)]].hill.transpose();
  }
  if (R > 0) {
    report.mse_proposed = mse(prop, report.truth);
    report.mse_hill = mse(hill, report.truth);
  } else {
    report.mse_proposed = report.mse_hill = std::numeric_limits<double>::quiet_NaN();
  }

  auto curves = [&](const Eigen::MatrixXd& est, std::vector<double>& mean,
                    std::vector<double>& p05, std::vector<double>& p95) {
    mean.assign(spec.J, std::numeric_limits<double>::quiet_NaN());
    p05 = p95 = mean;
    if (R == 0) return;
    for (Eigen::Index j = 0; j < J; ++j) {
      std::vector<double> col(est.col(j).data(), est.col(j).data() + R);
      const auto u = static_cast<std::size_t>(j);
      mean[u] = est.col(j).mean();
      p05[u] = sample_quantile(col, 0.05);
      p95[u] = sample_quantile(std::move(col), 0.95);
    }
  };
  curves(prop, report.mean_proposed, report.p05_proposed, report.p95_proposed);
  curves(hill, report.mean_hill, report.p05_hill, report.p95_hill);

  report.wall_time_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return report;
}

void write_curves_csv(std::ostream& os, const SimulationReport& r) {
  os << "area,truth,mean_proposed,p05_proposed,p95_proposed,mean_hill,p05_hill,p95_hill\n";
  for (std::size_t j = 0; j < r.truth.size(); ++j) {
    os << (j + 1) << ',' << fmt9(r.truth[j]) << ',' << fmt9(r.mean_proposed[j]) << ','
       << fmt9(r.p05_proposed[j]) << ',' << fmt9(r.p95_proposed[j]) << ','
       << fmt9(r.mean_hill[j]) << ',' << fmt9(r.p05_hill[j]) << ',' << fmt9(r.p95_hill[j])
       << '\n';
  }
}

void write_summary(std::ostream& os, const std::vector<SimulationReport>& reports) {
  if (reports.empty()) return;
  const auto& s = reports.front().spec;
  double oracle = 0.0;
  for (double g : reports.front().truth) oracle += g * g;
  oracle /= static_cast<double>(s.J) * static_cast<double>(s.n);

  os << "J = " << s.J << "\n"
     << "n = " << s.n << "\n"
     << "M = " << s.M << "\n"
     << "seed = " << s.seed << "\n"
     << "hill_mse_oracle = " << fmt9(oracle) << "\n\n";
  os << "case,length_scale,mse_proposed,mse_hill,ratio_hill_over_proposed,failed,unconverged\n";
  for (const auto& r : reports) {
    os << to_string(r.spec.corr_case) << ','
       << fmt9(case_length_scale(r.spec.corr_case, r.spec.J, r.spec.rescale_kernels)) << ','
       << fmt9(r.mse_proposed) << ',' << fmt9(r.mse_hill) << ','
       << fmt9(r.mse_hill / r.mse_proposed) << ',' << r.failed_replicates << ','
       << r.unconverged_replicates << '\n';
  }
}

}  // namespace evimix

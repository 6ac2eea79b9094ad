#include "evimix/cli/commands.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <numeric>

#include "evimix/cli/io.hpp"
#include "evimix/error.hpp"
#include "evimix/format.hpp"

namespace evimix::cli {

CorrSource parse_corr_source(const std::string& name) {
  if (name == "identity") return CorrSource::Identity;
  if (name == "distance") return CorrSource::Distance;
  if (name == "taildep") return CorrSource::TailDependence;
  if (name == "file") return CorrSource::File;
  throw Error(ErrorKind::UsageError,
              "unknown correlation source '" + name + "' (identity, distance, taildep, file)");
}

namespace {

// Output sink: a file, or stdout for "-".
class Sink {
 public:
  explicit Sink(const std::string& path) {
    if (path == "-" || path.empty()) {
      os_ = &std::cout;
      return;
    }
    file_ = std::make_unique<std::ofstream>(path);
    if (!*file_) throw Error(ErrorKind::UsageError, "cannot write '" + path + "'");
    os_ = file_.get();
  }
  std::ostream& operator*() { return *os_; }

 private:
  std::unique_ptr<std::ofstream> file_;
  std::ostream* os_ = nullptr;
};

std::string r_label(double R) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "z_%g", R);
  return buf;
}

void require(bool ok, const std::string& message) {
  if (!ok) throw Error(ErrorKind::UsageError, message);
}

Observations load(const RunConfig& cfg) {
  require(!cfg.data_path.empty(), "--data is required");
  Observations obs = parse_observations(cfg.data_path);
  if (cfg.corr.source == CorrSource::Distance) {
    require(!cfg.stations_path.empty(), "--corr distance requires --stations");
    obs.data = join_stations(obs.data, parse_stations(cfg.stations_path));
  }
  return obs;
}

Eigen::MatrixXd raw_for(const Observations& obs, const RunConfig& cfg) {
  const auto J = static_cast<Eigen::Index>(obs.data.size());
  switch (cfg.corr.source) {
    case CorrSource::Identity:
      return Eigen::MatrixXd::Identity(J, J);
    case CorrSource::Distance:
      return distance_kernel(coordinates_of(obs.data), cfg.corr.c);
    case CorrSource::TailDependence:
      require(obs.panel.has_value(),
              "--corr taildep needs date-aligned input (header area_id,date,value)");
      return build_tail_dependence_corr(*obs.panel, cfg.corr.p);
    case CorrSource::File: {
      require(!cfg.corr.matrix_path.empty(), "--corr file requires --corr-matrix");
      Eigen::MatrixXd m = read_matrix_csv(cfg.corr.matrix_path);
      if (m.rows() != J)
        throw Error(ErrorKind::DimensionMismatch,
                    "matrix file has " + std::to_string(m.rows()) + " rows but the data has " +
                        std::to_string(J) + " areas");
      return m;
    }
  }
  return {};
}

CorrelationMatrix finish_corr(const Eigen::MatrixXd& raw, const RunConfig& cfg) {
  if (cfg.corr.source == CorrSource::File) return repair_pd(raw, cfg.corr.eps);
  return repair_pd(sparsify(raw, cfg.corr.cutoff), cfg.corr.eps);
}

std::vector<double> checked_R(const RunConfig& cfg) {
  for (double R : cfg.return_R) require(R > 0.0, "return periods must be positive");
  return cfg.return_R;
}

void write_fit_summary(std::ostream& os, const ModelFit& f, const ExceedanceSummary& ex,
                       std::size_t screened_out) {
  auto line = [&](const char* key, const std::string& value) {
    os << key << " = " << value << '\n';
  };
  const double hw_mu = kZ975 * f.se_mu, hw_s2 = kZ975 * f.se_sigma2;
  line("areas", std::to_string(ex.size()));
  line("areas_screened_out", std::to_string(screened_out));
  line("k_bar", fmt9(ex.k_bar));
  line("mu_hat", fmt9(f.mu_hat));
  line("sigma2_hat", fmt9(f.sigma2_hat));
  line("se_mu", fmt9(f.se_mu));
  line("se_sigma2", fmt9(f.se_sigma2));
  line("ci95_mu_lower", fmt9(f.ci_mu.first));
  line("ci95_mu_upper", fmt9(f.ci_mu.second));
  line("ci95_mu_halfwidth", fmt9(hw_mu));
  line("ci95_mu_fullwidth", fmt9(2.0 * hw_mu));
  line("ci95_sigma2_lower", fmt9(f.ci_sigma2.first));
  line("ci95_sigma2_upper", fmt9(f.ci_sigma2.second));
  line("ci95_sigma2_halfwidth", fmt9(hw_s2));
  line("ci95_sigma2_fullwidth", fmt9(2.0 * hw_s2));
  line("laplace_nll", fmt9(f.laplace_nll));
  line("converged", f.converged ? "true" : "false");
  line("hit_clamp", f.hit_clamp ? "true" : "false");
  line("outer_iterations", std::to_string(f.outer_iterations));
  line("objective_evaluations", std::to_string(f.objective_evaluations));
  line("inner_iterations", std::to_string(f.inner_iterations));
}

}  // namespace

Eigen::MatrixXd raw_correlation(const RunConfig& cfg) { return raw_for(load(cfg), cfg); }

CorrelationMatrix build_correlation(const RunConfig& cfg) {
  return finish_corr(raw_correlation(cfg), cfg);
}

int cmd_hill(const RunConfig& cfg) {
  const Observations obs = load(cfg);
  const ExceedanceSummary ex = extract_exceedances(obs.data, cfg.tail_fraction);
  Sink out(cfg.output_path);
  *out << "area_id,omega,k,n,gamma_hill\n";
  for (std::size_t j = 0; j < ex.size(); ++j) {
    *out << ex.area_ids[j] << ',' << fmt9(ex.omega[j]) << ',' << ex.k[j] << ',' << ex.n[j] << ','
         << (ex.k[j] ? fmt9(hill_estimate(ex, j)) : std::string("NA")) << '\n';
  }
  if (!ex.flagged().empty())
    std::cerr << "warning: " << ex.flagged().size() << " area(s) without exceedances\n";
  return kExitOk;
}

int cmd_build_corr(const RunConfig& cfg) {
  const CorrelationMatrix D = build_correlation(cfg);
  Sink out(cfg.output_path);
  write_matrix_csv(*out, D.entries());
  return kExitOk;
}

int cmd_fit(const RunConfig& cfg) {
  const auto R = checked_R(cfg);
  const Observations obs = load(cfg);
  const ExceedanceSummary all = extract_exceedances(obs.data, cfg.tail_fraction);
  all.require_exceedances();

  std::vector<std::size_t> keep;
  for (std::size_t j = 0; j < all.size(); ++j)
    if (!cfg.require_positive_evi || hill_estimate(all, j) >= cfg.evi_floor) keep.push_back(j);
  if (keep.empty()) throw Error(ErrorKind::DomainError, "screening removed every area");
  const bool screened = keep.size() != all.size();
  const ExceedanceSummary ex = screened ? all.subset(keep) : all;

  const CorrelationMatrix D_all = finish_corr(raw_for(obs, cfg), cfg);
  const CorrelationMatrix D = screened ? D_all.principal_submatrix(keep) : D_all;

  const ModelFit f = fit(ex, D, cfg.model);

  std::filesystem::create_directories(cfg.out_dir);
  const auto dir = std::filesystem::path(cfg.out_dir);
  {
    std::ofstream os(dir / "fit_summary.txt");
    if (!os) throw Error(ErrorKind::UsageError, "cannot write into '" + cfg.out_dir + "'");
    write_fit_summary(os, f, ex, all.size() - keep.size());
  }
  {
    std::ofstream os(dir / "areas.csv");
    if (!os) throw Error(ErrorKind::UsageError, "cannot write into '" + cfg.out_dir + "'");
    os << "area_id,omega,k,n,gamma_hill,v_tilde,gamma_tilde";
    for (double r : R) os << ',' << r_label(r);
    os << '\n';
    for (std::size_t j = 0; j < ex.size(); ++j) {
      const auto i = static_cast<Eigen::Index>(j);
      os << ex.area_ids[j] << ',' << fmt9(ex.omega[j]) << ',' << ex.k[j] << ',' << ex.n[j] << ','
         << fmt9(hill_estimate(ex, j)) << ',' << fmt9(f.v_tilde(i)) << ','
         << fmt9(f.gamma_tilde(i));
      for (double r : R)
        os << ','
           << fmt9(return_level(ex.omega[j], ex.k[j], ex.n[j], f.gamma_tilde(i), r,
                                cfg.periods_per_year));
      os << '\n';
    }
  }
  if (!f.converged) {
    std::cerr << "warning: outer optimizer did not converge within " << cfg.model.outer_max_iter
              << " iterations; outputs hold the best point found\n";
    return kExitNotConverged;
  }
  return kExitOk;
}

int cmd_return_levels(const RunConfig& cfg) {
  const auto R = checked_R(cfg);
  require(!R.empty(), "at least one --R return period is required");
  require(!cfg.input_table.empty(), "--input is required");
  const Table t = read_table(cfg.input_table);
  const std::string& path = cfg.input_table;
  const auto c_id = t.column("area_id", path), c_omega = t.column("omega", path),
             c_k = t.column("k", path), c_n = t.column("n", path),
             c_gamma = t.column(cfg.gamma_column, path);

  auto number = [&](const std::string& cell, std::size_t row) {
    char* end = nullptr;
    const double x = std::strtod(cell.c_str(), &end);
    if (cell.empty() || *end != '\0') throw ParseError(path, row + 2, "not a number: '" + cell + "'");
    return x;
  };
  auto count = [&](const std::string& cell, std::size_t row) {
    const double x = number(cell, row);
    if (x < 0.0 || x != std::floor(x)) throw ParseError(path, row + 2, "not a count: '" + cell + "'");
    return static_cast<std::size_t>(x);
  };

  Sink out(cfg.output_path);
  *out << "area_id,omega,k,n," << cfg.gamma_column;
  for (double r : R) *out << ',' << r_label(r);
  *out << '\n';
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    const auto& row = t.rows[i];
    const double omega = number(row[c_omega], i), gamma = number(row[c_gamma], i);
    const std::size_t k = count(row[c_k], i), n = count(row[c_n], i);
    *out << row[c_id] << ',' << fmt9(omega) << ',' << k << ',' << n << ',' << fmt9(gamma);
    for (double r : R)
      *out << ',' << fmt9(return_level(omega, k, n, gamma, r, cfg.periods_per_year));
    *out << '\n';
  }
  return kExitOk;
}

int cmd_simulate(const RunConfig& cfg) {
  std::vector<CorrelationCase> cases;
  if (cfg.sim_case == "all")
    cases = {CorrelationCase::Kernel500, CorrelationCase::Kernel1000, CorrelationCase::Identity};
  else
    cases = {parse_case(cfg.sim_case)};

  std::vector<SimulationReport> reports;
  for (auto c : cases) {
    SimulationSpec spec;
    spec.J = cfg.sim_J;
    spec.n = cfg.sim_n;
    spec.M = cfg.sim_M;
    spec.corr_case = c;
    spec.seed = cfg.seed;
    spec.workers = cfg.workers;
    spec.rescale_kernels = cfg.rescale_kernels;
    spec.model = cfg.model;
    reports.push_back(run_study(spec));
    std::cerr << to_string(c) << ": " << fmt9(reports.back().wall_time_seconds) << " s\n";
  }

  std::filesystem::create_directories(cfg.out_dir);
  const auto dir = std::filesystem::path(cfg.out_dir);
  {
    std::ofstream os(dir / "summary.txt");
    if (!os) throw Error(ErrorKind::UsageError, "cannot write into '" + cfg.out_dir + "'");
    write_summary(os, reports);
  }
  for (const auto& r : reports) {
    const std::string name =
        reports.size() == 1 ? "curves.csv" : "curves_" + to_string(r.spec.corr_case) + ".csv";
    std::ofstream os(dir / name);
    if (!os) throw Error(ErrorKind::UsageError, "cannot write into '" + cfg.out_dir + "'");
    write_curves_csv(os, r);
  }
  return kExitOk;
}

int run(const RunConfig& cfg, std::ostream& err) {
  try {
    if (cfg.command == "hill") return cmd_hill(cfg);
    if (cfg.command == "build-corr") return cmd_build_corr(cfg);
    if (cfg.command == "fit") return cmd_fit(cfg);
    if (cfg.command == "return-levels") return cmd_return_levels(cfg);
    if (cfg.command == "simulate") return cmd_simulate(cfg);
    err << "error: unknown command '" << cfg.command << "'\n";
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
  }
  return kExitInputError;
}

}  // namespace evimix::cli

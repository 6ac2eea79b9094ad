// evimix: command-line front end.
//
//   evimix hill          --data obs.csv [--tail-fraction 0.1] [-o out.csv]
//   evimix build-corr    --data obs.csv --corr distance|taildep|identity ...
//   evimix fit           --data obs.csv --corr ... --out-dir DIR [--R 50 ...]
//   evimix return-levels --input areas.csv --R 50 [--gamma-column gamma_tilde]
//   evimix simulate      --case kernel500|kernel1000|identity|all --J --n --M --seed
//
// Every subcommand accepts --config FILE with `key = value` lines using the
// long option names; flags on the command line override the file.

#include <CLI11.hpp>
#include <cmath>
#include <iostream>
#include <memory>

#include "evimix/cli/commands.hpp"

namespace {

using evimix::cli::RunConfig;

// CLI11 only reads config files on the root app. This reader files every
// unsectioned `key = value` line under the subcommand being run.
class SubcommandConfig : public CLI::ConfigINI {
 public:
  explicit SubcommandConfig(const CLI::App* app) : app_(app) {}

  std::vector<CLI::ConfigItem> from_config(std::istream& input) const override {
    auto items = CLI::ConfigINI::from_config(input);
    const auto subs = app_->get_subcommands();
    if (subs.size() != 1) return items;
    for (auto& item : items)
      if (item.parents.empty()) item.parents = {subs.front()->get_name()};
    return items;
  }

 private:
  const CLI::App* app_;
};

void add_data(CLI::App* sub, RunConfig& cfg) {
  sub->add_option("--data", cfg.data_path,
                  "observations CSV (area_id,value or area_id,date,value)")
      ->required();
}

void add_threshold(CLI::App* sub, RunConfig& cfg) {
  sub->add_option("--tail-fraction", cfg.tail_fraction,
                  "fraction of each area's sample above the threshold")
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();
}

void add_corr(CLI::App* sub, RunConfig& cfg, std::string& source) {
  sub->add_option("--corr", source, "correlation source: identity, distance, taildep, file")
      ->capture_default_str();
  sub->add_option("--stations", cfg.stations_path, "station CSV (area_id,lon,lat)");
  sub->add_option("--c", cfg.corr.c, "distance kernel scale")->capture_default_str();
  sub->add_option("--p", cfg.corr.p, "tail-dependence level")->capture_default_str();
  sub->add_option("--cutoff", cfg.corr.cutoff, "zero correlations with |x| below this")
      ->capture_default_str();
  sub->add_option("--eps", cfg.corr.eps, "eigenvalue floor for positive-definite repair")
      ->capture_default_str();
  sub->add_option("--corr-matrix", cfg.corr.matrix_path, "matrix CSV for --corr file");
}

void add_model(CLI::App* sub, RunConfig& cfg, std::string& init_mu) {
  auto& m = cfg.model;
  sub->add_option("--inner-grad-tol", m.inner_grad_tol)->capture_default_str();
  sub->add_option("--inner-max-iter", m.inner_max_iter)->capture_default_str();
  sub->add_option("--outer-tol", m.outer_tol)->capture_default_str();
  sub->add_option("--outer-max-iter", m.outer_max_iter)->capture_default_str();
  sub->add_option("--init-mu", init_mu, "starting mu, or 'hill'")->capture_default_str();
  sub->add_option("--init-log-sigma2", m.init_log_sigma2)->capture_default_str();
  sub->add_option("--v-clamp", m.v_clamp)->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
  RunConfig cfg;
  std::string corr_source = "identity";
  std::string init_mu = "hill";

  CLI::App app{"Mixed-effects extreme value index estimation for many areas"};
  app.require_subcommand(1);

  auto* hill = app.add_subcommand("hill", "per-area thresholds and Hill estimates");
  add_data(hill, cfg);
  add_threshold(hill, cfg);
  hill->add_option("-o,--output", cfg.output_path, "output CSV ('-' for stdout)");

  auto* corr = app.add_subcommand("build-corr", "build the random-effect correlation matrix");
  add_data(corr, cfg);
  add_corr(corr, cfg, corr_source);
  corr->add_option("-o,--output", cfg.output_path, "output matrix CSV ('-' for stdout)");

  auto* fit = app.add_subcommand("fit", "fit the mixed model and predict per-area EVIs");
  add_data(fit, cfg);
  add_threshold(fit, cfg);
  add_corr(fit, cfg, corr_source);
  add_model(fit, cfg, init_mu);
  fit->add_option("--out-dir", cfg.out_dir, "directory for fit_summary.txt and areas.csv")
      ->capture_default_str();
  fit->add_option("--R", cfg.return_R, "return periods in years (repeatable)");
  fit->add_option("--periods-per-year", cfg.periods_per_year)->capture_default_str();
  fit->add_flag("--require-positive-evi", cfg.require_positive_evi,
                "drop areas whose Hill estimate is below --evi-floor");
  fit->add_option("--evi-floor", cfg.evi_floor)->capture_default_str();

  auto* rl = app.add_subcommand("return-levels", "return levels from a per-area CSV");
  rl->add_option("--input", cfg.input_table, "CSV with area_id,omega,k,n and a gamma column")
      ->required();
  rl->add_option("--gamma-column", cfg.gamma_column)->capture_default_str();
  rl->add_option("--R", cfg.return_R, "return periods in years (repeatable)")->required();
  rl->add_option("--periods-per-year", cfg.periods_per_year)->capture_default_str();
  rl->add_option("-o,--output", cfg.output_path, "output CSV ('-' for stdout)");

  auto* sim = app.add_subcommand("simulate", "Monte Carlo study on exact-Pareto areas");
  sim->add_option("--case", cfg.sim_case, "kernel500, kernel1000, identity or all")
      ->capture_default_str();
  sim->add_option("--J", cfg.sim_J, "number of areas")->capture_default_str();
  sim->add_option("--n", cfg.sim_n, "observations per area")->capture_default_str();
  sim->add_option("--M", cfg.sim_M, "replicates")->capture_default_str();
  sim->add_option("--seed", cfg.seed)->capture_default_str();
  sim->add_option("--workers", cfg.workers, "worker threads (0 = all cores)")
      ->capture_default_str();
  sim->add_flag("!--no-rescale", cfg.rescale_kernels,
                "keep kernel length scales at 500/1000 labels for any J");
  sim->add_option("--out-dir", cfg.out_dir, "directory for summary.txt and curves CSVs")
      ->capture_default_str();
  add_model(sim, cfg, init_mu);

  app.set_config("--config", "", "key = value file with option defaults");
  app.config_formatter(std::make_shared<SubcommandConfig>(&app));
  app.allow_config_extras(CLI::config_extras_mode::error);
  for (auto* sub : {hill, corr, fit, rl, sim}) {
    sub->fallthrough();
    sub->allow_config_extras(CLI::config_extras_mode::error);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : evimix::cli::kExitInputError;
  }

  for (auto* sub : {hill, corr, fit, rl, sim})
    if (sub->parsed()) cfg.command = sub->get_name();
  try {
    cfg.corr.source = evimix::cli::parse_corr_source(corr_source);
    if (init_mu != "hill") cfg.model.init_mu = std::stod(init_mu);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return evimix::cli::kExitInputError;
  }
  return evimix::cli::run(cfg, std::cerr);
}

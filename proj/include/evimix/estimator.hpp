#ifndef EVIMIX_ESTIMATOR_HPP
#define EVIMIX_ESTIMATOR_HPP

// Mixed-effects EVI model gamma_j = exp(mu + V_j), V ~ N(0, sigma2 * D).
//
// Inner problem: for fixed (mu, sigma2) the negative log of the joint
// density of random effects and exceedances,
//
//   f(v) = -log phi_J(v; 0, sigma2 D)
//          + sum_j [ k_j log omega_j + k_j (mu + v_j)
//                    + (exp(-(mu + v_j)) + 1) S_j ],
//
// is strictly convex in v; its minimizer is the conditional mode.
// Outer problem: (mu, log sigma2) minimize the Laplace approximation of
// -log L(mu, sigma2) built at that mode.

#include <Eigen/Core>
#include <cstddef>
#include <optional>
#include <utility>
#include <vector>

#include "evimix/correlation.hpp"
#include "evimix/tail.hpp"

namespace evimix {

struct ModelConfig {
  double inner_grad_tol = 1e-10;
  int inner_max_iter = 100;
  double outer_tol = 1e-8;
  int outer_max_iter = 500;
  /// nullopt means "start from log of the mean Hill estimate".
  std::optional<double> init_mu;
  double init_log_sigma2 = -2.302585092994046;  // log 0.1
  /// Bound on |mu + v_j| inside exponentials.
  double v_clamp = 30.0;
  /// Box for log sigma2 seen by the outer search.
  double min_log_sigma2 = -20.0;
  double max_log_sigma2 = 5.0;

  /// Throws InvalidParameter on nonpositive tolerances or iteration caps.
  void validate() const;
};

struct ConditionalMode {
  Eigen::VectorXd v;
  /// Cholesky factor of the Hessian (sigma2 D)^{-1} + diag(w) at v.
  Eigen::MatrixXd hessian_chol;
  double objective = 0.0;
  double grad_inf_norm = 0.0;
  int iterations = 0;
  bool hit_clamp = false;
};

struct ModelFit {
  double mu_hat = 0.0;
  double sigma2_hat = 0.0;
  Eigen::VectorXd v_tilde;
  Eigen::VectorXd gamma_tilde;
  double se_mu = 0.0;
  double se_sigma2 = 0.0;
  std::pair<double, double> ci_mu;
  std::pair<double, double> ci_sigma2;
  double laplace_nll = 0.0;
  bool converged = false;
  bool hit_clamp = false;
  int inner_iterations = 0;
  int outer_iterations = 0;
  int objective_evaluations = 0;
};

struct StdErrors {
  double se_mu = 0.0;
  double se_sigma2 = 0.0;
  std::pair<double, double> ci_mu;
  std::pair<double, double> ci_sigma2;
};

/// 97.5% standard normal quantile used for the 95% intervals.
inline constexpr double kZ975 = 1.959964;

double joint_neg_log_posterior(const Eigen::VectorXd& v, double mu, double sigma2,
                               const CorrelationMatrix& D, const ExceedanceSummary& ex,
                               double v_clamp = 30.0);

/// Gradient of joint_neg_log_posterior in v.
Eigen::VectorXd inner_gradient(const Eigen::VectorXd& v, double mu, double sigma2,
                               const CorrelationMatrix& D, const ExceedanceSummary& ex,
                               double v_clamp = 30.0);

/// Dense Hessian of joint_neg_log_posterior in v.
Eigen::MatrixXd inner_hessian(const Eigen::VectorXd& v, double mu, double sigma2,
                              const CorrelationMatrix& D, const ExceedanceSummary& ex,
                              double v_clamp = 30.0);

/// Damped Newton minimization of the inner objective. `start` (warm start)
/// defaults to v = 0. Throws InnerDivergedError after cfg.inner_max_iter.
ConditionalMode conditional_mode(double mu, double sigma2, const CorrelationMatrix& D,
                                 const ExceedanceSummary& ex, const ModelConfig& cfg,
                                 const Eigen::VectorXd* start = nullptr);

/// -log of the Laplace approximation of the marginal likelihood.
double laplace_marginal_nll(double mu, double sigma2, const CorrelationMatrix& D,
                            const ExceedanceSummary& ex, const ModelConfig& cfg);

/// Same, reusing/updating a warm-start vector and returning the mode.
double laplace_marginal_nll(double mu, double sigma2, const CorrelationMatrix& D,
                            const ExceedanceSummary& ex, const ModelConfig& cfg,
                            ConditionalMode& mode, const Eigen::VectorXd* start);

ModelFit fit(const ExceedanceSummary& ex, const CorrelationMatrix& D,
             const ModelConfig& cfg = {});

StdErrors std_errors(double mu_hat, double sigma2_hat, const CorrelationMatrix& D);

Eigen::VectorXd predict_evi(double mu_hat, const Eigen::VectorXd& v_tilde);

}  // namespace evimix

#endif  // EVIMIX_ESTIMATOR_HPP

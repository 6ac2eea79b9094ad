#include "evimix/estimator.hpp"

#include <Eigen/Cholesky>
#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

#include "evimix/error.hpp"

namespace evimix {

void ModelConfig::validate() const {
  if (!(inner_grad_tol > 0.0) || !(outer_tol > 0.0) || !(v_clamp > 0.0))
    throw Error(ErrorKind::InvalidParameter, "tolerances and v_clamp must be positive");
  if (inner_max_iter < 1 || outer_max_iter < 1)
    throw Error(ErrorKind::InvalidParameter, "iteration limits must be at least 1");
  if (!(min_log_sigma2 < max_log_sigma2))
    throw Error(ErrorKind::InvalidParameter, "empty log sigma2 search box");
  if (!std::isfinite(init_log_sigma2) || (init_mu && !std::isfinite(*init_mu)))
    throw Error(ErrorKind::InvalidParameter, "initial values must be finite");
}

namespace {

void check_problem(const CorrelationMatrix& D, const ExceedanceSummary& ex) {
  if (D.dim() != ex.size())
    throw Error(ErrorKind::DimensionMismatch,
                "correlation matrix has dimension " + std::to_string(D.dim()) + " but " +
                    std::to_string(ex.size()) + " areas were supplied");
  ex.require_exceedances();
}

// Data-side pieces of the inner problem, with the exponent clamp applied.
struct DataTerms {
  Eigen::VectorXd k, S, log_omega;
  double clamp;

  DataTerms(const ExceedanceSummary& ex, double v_clamp) : clamp(v_clamp) {
    const auto J = static_cast<Eigen::Index>(ex.size());
    k.resize(J);
    S.resize(J);
    log_omega.resize(J);
    for (Eigen::Index j = 0; j < J; ++j) {
      const auto u = static_cast<std::size_t>(j);
      k(j) = static_cast<double>(ex.k[u]);
      S(j) = ex.S[u];
      log_omega(j) = std::log(ex.omega[u]);
    }
  }

  // exp(-(mu + v_j)) with the argument clamped to [-clamp, clamp].
  Eigen::VectorXd inv_gamma(const Eigen::VectorXd& v, double mu, bool* hit = nullptr) const {
    Eigen::VectorXd out(v.size());
    for (Eigen::Index j = 0; j < v.size(); ++j) {
      const double eta = mu + v(j);
      if (hit && std::abs(eta) > clamp) *hit = true;
      out(j) = std::exp(-std::clamp(eta, -clamp, clamp));
    }
    return out;
  }

  double value(const Eigen::VectorXd& v, double mu) const {
    const Eigen::VectorXd e = inv_gamma(v, mu);
    return (k.array() * log_omega.array()).sum() +
           (k.array() * (mu + v.array())).sum() + ((e.array() + 1.0) * S.array()).sum();
  }
};

// Inner objective evaluated with the precomputed precision matrix; used by
// the Newton line search.
struct InnerProblem {
  const CorrelationMatrix& D;
  DataTerms data;
  double mu, sigma2, gauss_const;

  InnerProblem(const CorrelationMatrix& D_, const ExceedanceSummary& ex, double mu_,
               double sigma2_, double v_clamp)
      : D(D_), data(ex, v_clamp), mu(mu_), sigma2(sigma2_) {
    const double J = static_cast<double>(D.dim());
    gauss_const = 0.5 * J * std::log(2.0 * std::numbers::pi * sigma2) + 0.5 * D.log_det();
  }

  Eigen::VectorXd precision_times(const Eigen::VectorXd& v) const {
    if (D.is_identity()) return v;
    return D.precision() * v;
  }

  double value(const Eigen::VectorXd& v) const {
    return gauss_const + v.dot(precision_times(v)) / (2.0 * sigma2) + data.value(v, mu);
  }

  Eigen::VectorXd gradient(const Eigen::VectorXd& v, bool* hit = nullptr) const {
    const Eigen::VectorXd e = data.inv_gamma(v, mu, hit);
    return precision_times(v) / sigma2 + data.k - e.cwiseProduct(data.S);
  }

  Eigen::VectorXd curvature(const Eigen::VectorXd& v) const {
    return data.inv_gamma(v, mu).cwiseProduct(data.S);
  }
};

// Cholesky factor of (sigma2 D)^{-1} + diag(w). Lower triangular.
Eigen::MatrixXd factor_hessian(const InnerProblem& prob, const Eigen::VectorXd& w) {
  const auto J = static_cast<Eigen::Index>(prob.D.dim());
  if (prob.D.is_identity()) {
    Eigen::MatrixXd L = Eigen::MatrixXd::Zero(J, J);
    L.diagonal() = (w.array() + 1.0 / prob.sigma2).sqrt();
    return L;
  }
  Eigen::MatrixXd H = prob.D.precision() / prob.sigma2;
  H.diagonal() += w;
  Eigen::LLT<Eigen::MatrixXd> llt(H);
  if (llt.info() != Eigen::Success)
    throw Error(ErrorKind::NotPositiveDefinite, "inner Hessian factorization failed");
  return llt.matrixL();
}

Eigen::VectorXd chol_solve(const Eigen::MatrixXd& L, const Eigen::VectorXd& b, bool diagonal) {
  if (diagonal) return b.array() / L.diagonal().array().square();
  const Eigen::VectorXd z = L.triangularView<Eigen::Lower>().solve(b);
  return L.transpose().triangularView<Eigen::Upper>().solve(z);
}

}  // namespace

double joint_neg_log_posterior(const Eigen::VectorXd& v, double mu, double sigma2,
                               const CorrelationMatrix& D, const ExceedanceSummary& ex,
                               double v_clamp) {
  check_problem(D, ex);
  return -gaussian_logpdf(v, sigma2, D) + DataTerms(ex, v_clamp).value(v, mu);
}

Eigen::VectorXd inner_gradient(const Eigen::VectorXd& v, double mu, double sigma2,
                               const CorrelationMatrix& D, const ExceedanceSummary& ex,
                               double v_clamp) {
  check_problem(D, ex);
  if (static_cast<std::size_t>(v.size()) != D.dim())
    throw Error(ErrorKind::DimensionMismatch, "vector length differs from matrix dimension");
  return InnerProblem(D, ex, mu, sigma2, v_clamp).gradient(v);
}

Eigen::MatrixXd inner_hessian(const Eigen::VectorXd& v, double mu, double sigma2,
                              const CorrelationMatrix& D, const ExceedanceSummary& ex,
                              double v_clamp) {
  check_problem(D, ex);
  if (static_cast<std::size_t>(v.size()) != D.dim())
    throw Error(ErrorKind::DimensionMismatch, "vector length differs from matrix dimension");
  InnerProblem prob(D, ex, mu, sigma2, v_clamp);
  Eigen::MatrixXd H = D.precision() / sigma2;
  H.diagonal() += prob.curvature(v);
  return H;
}

ConditionalMode conditional_mode(double mu, double sigma2, const CorrelationMatrix& D,
                                 const ExceedanceSummary& ex, const ModelConfig& cfg,
                                 const Eigen::VectorXd* start) {
  check_problem(D, ex);
  if (!(sigma2 > 0.0) || !std::isfinite(sigma2) || !std::isfinite(mu))
    throw Error(ErrorKind::InvalidParameter, "mu must be finite and sigma2 positive");
  const InnerProblem prob(D, ex, mu, sigma2, cfg.v_clamp);
  const bool diagonal = D.is_identity();
  const auto J = static_cast<Eigen::Index>(D.dim());

  ConditionalMode out;
  out.v = (start && start->size() == J) ? *start : Eigen::VectorXd::Zero(J);
  Eigen::VectorXd g = prob.gradient(out.v, &out.hit_clamp);
  double f = prob.value(out.v);
  double gnorm = g.lpNorm<Eigen::Infinity>();

  while (gnorm > cfg.inner_grad_tol) {
    if (out.iterations >= cfg.inner_max_iter)
      throw InnerDivergedError(
          "conditional mode not reached in " + std::to_string(cfg.inner_max_iter) +
              " Newton iterations (|g|_inf = " + std::to_string(gnorm) + ")",
          std::vector<double>(out.v.data(), out.v.data() + J), gnorm);
    ++out.iterations;

    const Eigen::MatrixXd L = factor_hessian(prob, prob.curvature(out.v));
    const Eigen::VectorXd step = -chol_solve(L, g, diagonal);

    // Step halving until the objective decreases. Near the mode the decrease
    // of a full Newton step can fall below the rounding level of f; a step
    // that leaves f unchanged to that level but shrinks the gradient is
    // accepted as well.
    const double f_slack = 64.0 * std::numeric_limits<double>::epsilon() * (1.0 + std::abs(f));
    double t = 1.0;
    bool accepted = false;
    for (int halving = 0; halving <= 40; ++halving, t *= 0.5) {
      const Eigen::VectorXd trial = out.v + t * step;
      const double f_trial = prob.value(trial);
      if (!std::isfinite(f_trial)) continue;
      bool hit = false;
      const Eigen::VectorXd g_trial = prob.gradient(trial, &hit);
      const double gn_trial = g_trial.lpNorm<Eigen::Infinity>();
      if (f_trial < f || (f_trial <= f + f_slack && gn_trial < gnorm)) {
        out.v = trial;
        f = f_trial;
        g = g_trial;
        gnorm = gn_trial;
        out.hit_clamp = out.hit_clamp || hit;
        accepted = true;
        break;
      }
    }
    if (!accepted)
      throw InnerDivergedError("Newton line search failed to make progress",
                               std::vector<double>(out.v.data(), out.v.data() + J), gnorm);
  }

  out.hessian_chol = factor_hessian(prob, prob.curvature(out.v));
  out.objective = f;
  out.grad_inf_norm = gnorm;
  return out;
}

double laplace_marginal_nll(double mu, double sigma2, const CorrelationMatrix& D,
                            const ExceedanceSummary& ex, const ModelConfig& cfg,
                            ConditionalMode& mode, const Eigen::VectorXd* start) {
  mode = conditional_mode(mu, sigma2, D, ex, cfg, start);
  const double J = static_cast<double>(D.dim());
  const double half_log_det_h = mode.hessian_chol.diagonal().array().log().sum();
  const double f = joint_neg_log_posterior(mode.v, mu, sigma2, D, ex, cfg.v_clamp);
  return f - 0.5 * J * std::log(2.0 * std::numbers::pi) + half_log_det_h;
}

double laplace_marginal_nll(double mu, double sigma2, const CorrelationMatrix& D,
                            const ExceedanceSummary& ex, const ModelConfig& cfg) {
  ConditionalMode mode;
  return laplace_marginal_nll(mu, sigma2, D, ex, cfg, mode, nullptr);
}

namespace {

// Nelder-Mead on x = (mu, log sigma2). Each vertex keeps the conditional
// mode found for it so later evaluations can warm-start from the current
// best vertex.
struct Vertex {
  std::array<double, 2> x{};
  double f = std::numeric_limits<double>::infinity();
  Eigen::VectorXd mode;
};

class OuterSearch {
 public:
  OuterSearch(const CorrelationMatrix& D, const ExceedanceSummary& ex, const ModelConfig& cfg)
      : D_(D), ex_(ex), cfg_(cfg) {}

  Vertex evaluate(const std::array<double, 2>& x, const Eigen::VectorXd* warm) {
    Vertex vert;
    vert.x = x;
    if (x[1] < cfg_.min_log_sigma2 || x[1] > cfg_.max_log_sigma2 || !std::isfinite(x[0]))
      return vert;  // infeasible: f = +inf
    ConditionalMode mode;
    try {
      vert.f = laplace_marginal_nll(x[0], std::exp(x[1]), D_, ex_, cfg_, mode, warm);
    } catch (const InnerDivergedError& e) {
      throw InnerDivergedError(std::string(e.what()) + " at mu = " + std::to_string(x[0]) +
                                   ", log sigma2 = " + std::to_string(x[1]),
                               e.last_iterate(), e.gradient_norm());
    }
    vert.mode = std::move(mode.v);
    ++evaluations;
    inner_iterations += mode.iterations;
    hit_clamp = hit_clamp || mode.hit_clamp;
    return vert;
  }

  int evaluations = 0;
  int inner_iterations = 0;
  bool hit_clamp = false;

 private:
  const CorrelationMatrix& D_;
  const ExceedanceSummary& ex_;
  const ModelConfig& cfg_;
};

}  // namespace

ModelFit fit(const ExceedanceSummary& ex, const CorrelationMatrix& D, const ModelConfig& cfg) {
  cfg.validate();
  check_problem(D, ex);

  double mu0;
  if (cfg.init_mu) {
    mu0 = *cfg.init_mu;
  } else {
    const auto hill = hill_estimates(ex);
    mu0 = std::log(std::accumulate(hill.begin(), hill.end(), 0.0) /
                   static_cast<double>(hill.size()));
  }
  const double ls0 = std::clamp(cfg.init_log_sigma2, cfg.min_log_sigma2, cfg.max_log_sigma2);

  OuterSearch search(D, ex, cfg);
  std::array<Vertex, 3> simplex;
  simplex[0] = search.evaluate({mu0, ls0}, nullptr);
  simplex[1] = search.evaluate({mu0 + 0.1, ls0}, &simplex[0].mode);
  simplex[2] = search.evaluate({mu0, ls0 + (ls0 + 0.5 <= cfg.max_log_sigma2 ? 0.5 : -0.5)},
                               &simplex[0].mode);

  auto by_value = [](const Vertex& a, const Vertex& b) { return a.f < b.f; };
  auto point = [](const std::array<double, 2>& a, const std::array<double, 2>& b, double t) {
    return std::array<double, 2>{a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])};
  };

  ModelFit out;
  int iter = 0;
  for (; iter < cfg.outer_max_iter; ++iter) {
    std::sort(simplex.begin(), simplex.end(), by_value);
    double diameter = 0.0;
    for (int i = 1; i < 3; ++i)
      for (int c = 0; c < 2; ++c)
        diameter = std::max(diameter, std::abs(simplex[i].x[c] - simplex[0].x[c]));
    const double spread = simplex[2].f - simplex[0].f;
    if (diameter < cfg.outer_tol && spread < cfg.outer_tol) {
      out.converged = true;
      break;
    }

    const Eigen::VectorXd* warm = &simplex[0].mode;
    const std::array<double, 2> centroid{0.5 * (simplex[0].x[0] + simplex[1].x[0]),
                                         0.5 * (simplex[0].x[1] + simplex[1].x[1])};
    Vertex reflected = search.evaluate(point(centroid, simplex[2].x, -1.0), warm);
    if (reflected.f < simplex[0].f) {
      Vertex expanded = search.evaluate(point(centroid, simplex[2].x, -2.0), warm);
      simplex[2] = expanded.f < reflected.f ? std::move(expanded) : std::move(reflected);
      continue;
    }
    if (reflected.f < simplex[1].f) {
      simplex[2] = std::move(reflected);
      continue;
    }
    const bool outside = reflected.f < simplex[2].f;
    Vertex contracted = outside ? search.evaluate(point(centroid, simplex[2].x, -0.5), warm)
                                : search.evaluate(point(centroid, simplex[2].x, 0.5), warm);
    if (contracted.f < (outside ? reflected.f : simplex[2].f)) {
      simplex[2] = std::move(contracted);
      continue;
    }
    for (int i = 1; i < 3; ++i)
      simplex[i] = search.evaluate(point(simplex[0].x, simplex[i].x, 0.5), warm);
  }
  std::sort(simplex.begin(), simplex.end(), by_value);
  const Vertex& best = simplex[0];
  if (!std::isfinite(best.f))
    throw Error(ErrorKind::InvalidParameter, "no feasible starting point for the outer search");

  out.mu_hat = best.x[0];
  out.sigma2_hat = std::exp(best.x[1]);
  const ConditionalMode mode =
      conditional_mode(out.mu_hat, out.sigma2_hat, D, ex, cfg, &best.mode);
  out.v_tilde = mode.v;
  out.gamma_tilde = predict_evi(out.mu_hat, out.v_tilde);
  out.laplace_nll = best.f;
  out.outer_iterations = iter;
  out.objective_evaluations = search.evaluations;
  out.inner_iterations = search.inner_iterations + mode.iterations;
  out.hit_clamp = search.hit_clamp || mode.hit_clamp;

  const StdErrors se = std_errors(out.mu_hat, out.sigma2_hat, D);
  out.se_mu = se.se_mu;
  out.se_sigma2 = se.se_sigma2;
  out.ci_mu = se.ci_mu;
  out.ci_sigma2 = se.ci_sigma2;
  return out;
}

StdErrors std_errors(double mu_hat, double sigma2_hat, const CorrelationMatrix& D) {
  if (!(sigma2_hat > 0.0))
    throw Error(ErrorKind::InvalidParameter, "sigma2_hat must be positive");
  const double J = static_cast<double>(D.dim());
  const Eigen::VectorXd ones = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(D.dim()));
  const double info = D.quad_form(ones);
  StdErrors se;
  se.se_mu = std::sqrt(sigma2_hat / info);
  se.se_sigma2 = sigma2_hat * std::sqrt(2.0 / J);
  se.ci_mu = {mu_hat - kZ975 * se.se_mu, mu_hat + kZ975 * se.se_mu};
  se.ci_sigma2 = {sigma2_hat - kZ975 * se.se_sigma2, sigma2_hat + kZ975 * se.se_sigma2};
  return se;
}

Eigen::VectorXd predict_evi(double mu_hat, const Eigen::VectorXd& v_tilde) {
  // scalar std::exp so callers can reproduce each entry bit for bit
  Eigen::VectorXd g(v_tilde.size());
  for (Eigen::Index j = 0; j < v_tilde.size(); ++j) g(j) = std::exp(mu_hat + v_tilde(j));
  return g;
}

}  // namespace evimix

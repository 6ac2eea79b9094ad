// Reference computations used by the tests. Nothing here calls into the
// estimator; each quantity is rebuilt from the model's closed-form pieces.
#ifndef EVIMIX_TESTS_ORACLES_HPP
#define EVIMIX_TESTS_ORACLES_HPP

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <vector>

namespace oracle {

struct AreaStats {
  double k;
  double S;
  double omega;
};

// Pareto log likelihood of one area's exceedances, summed observation by
// observation: sum_i [-log(omega*gamma) - (1/gamma + 1) log(y_i/omega)].
inline double pareto_loglik(const AreaStats& a, double gamma) {
  return -a.k * std::log(a.omega * gamma) - (1.0 / gamma + 1.0) * a.S;
}

// log N(v; 0, sigma2 * [[1, rho], [rho, 1]]) written out with the explicit
// 2x2 inverse and determinant.
inline double bivariate_normal_logpdf(double v1, double v2, double sigma2, double rho) {
  const double det = sigma2 * sigma2 * (1.0 - rho * rho);
  const double q = (v1 * v1 - 2.0 * rho * v1 * v2 + v2 * v2) / (sigma2 * (1.0 - rho * rho));
  return -std::log(2.0 * std::numbers::pi) - 0.5 * std::log(det) - 0.5 * q;
}

inline double normal_logpdf(double v, double sigma2) {
  return -0.5 * std::log(2.0 * std::numbers::pi * sigma2) - 0.5 * v * v / sigma2;
}

// Maximizes a concave 1-D function on [lo, hi] by golden-section search.
inline double golden_max(const std::function<double(double)>& f, double lo, double hi) {
  const double r = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = lo, b = hi;
  double c = b - r * (b - a), d = a + r * (b - a);
  double fc = f(c), fd = f(d);
  for (int it = 0; it < 200 && b - a > 1e-13; ++it) {
    if (fc > fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - r * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + r * (b - a);
      fd = f(d);
    }
  }
  return 0.5 * (a + b);
}

inline double gk(const std::function<double(double)>& f, double a, double b) {
  return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, a, b, 15, 1e-12);
}

// -log of  integral N(v; 0, sigma2) * prod_i Pareto(y_i; omega, exp(mu+v)) dv
// by adaptive Gauss-Kronrod on a window around the integrand's peak.
inline double quadrature_nll_1d(double mu, double sigma2, const AreaStats& a) {
  auto logf = [&](double v) { return normal_logpdf(v, sigma2) + pareto_loglik(a, std::exp(mu + v)); };
  const double peak = golden_max(logf, -20.0, 20.0);
  const double shift = logf(peak);
  const double half = 4.0;
  const double I = gk([&](double v) { return std::exp(logf(v) - shift); }, peak - half, peak + half);
  return -(shift + std::log(I));
}

// Two areas with correlation rho: nested adaptive Gauss-Kronrod. The peak
// is located by coordinate-wise golden-section ascent on the concave
// log-integrand.
inline double quadrature_nll_2d(double mu, double sigma2, double rho, const AreaStats& a1,
                                const AreaStats& a2) {
  auto logf = [&](double v1, double v2) {
    return bivariate_normal_logpdf(v1, v2, sigma2, rho) + pareto_loglik(a1, std::exp(mu + v1)) +
           pareto_loglik(a2, std::exp(mu + v2));
  };
  double p1 = 0.0, p2 = 0.0;
  for (int sweep = 0; sweep < 500; ++sweep) {
    const double n1 = golden_max([&](double v) { return logf(v, p2); }, -20.0, 20.0);
    const double n2 = golden_max([&](double v) { return logf(n1, v); }, -20.0, 20.0);
    const double moved = std::abs(n1 - p1) + std::abs(n2 - p2);
    p1 = n1;
    p2 = n2;
    if (moved < 1e-12) break;
  }
  const double shift = logf(p1, p2);
  const double half = 4.0;
  auto inner = [&](double v1) {
    return gk([&](double v2) { return std::exp(logf(v1, v2) - shift); }, p2 - half, p2 + half);
  };
  const double I = gk(inner, p1 - half, p1 + half);
  return -(shift + std::log(I));
}

// Root of an increasing function on [lo, hi] by bisection to machine width.
inline double bisect(const std::function<double(double)>& g, double lo, double hi) {
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid == lo || mid == hi) break;
    (g(mid) > 0.0 ? hi : lo) = mid;
  }
  return 0.5 * (lo + hi);
}

// (1/J) sum_j gamma_j^2 / n for the quadratic EVI grid, evaluated from the
// grid formula directly.
inline double hill_mse(std::size_t J, std::size_t n) {
  double acc = 0.0;
  for (std::size_t j = 1; j <= J; ++j) {
    const double t = static_cast<double>(j - 1) / static_cast<double>(J - 1) - 0.5;
    const double g = 2.0 * t * t + 0.2;
    acc += g * g;
  }
  return acc / static_cast<double>(J) / static_cast<double>(n);
}

}  // namespace oracle

namespace testio {

inline std::filesystem::path scratch(const std::string& name) {
  auto dir = std::filesystem::path(EVIMIX_TEST_TMP) / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  os << text;
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

// Runs the evimix binary with `args`, stdout and stderr redirected into
// `dir`; returns the exit status.
inline int run_cli(const std::string& args, const std::filesystem::path& dir) {
  const std::string cmd = std::string("\"") + EVIMIX_BINARY + "\" " + args + " > \"" +
                          (dir / "stdout.txt").string() + "\" 2> \"" +
                          (dir / "stderr.txt").string() + "\"";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace testio

#endif  // EVIMIX_TESTS_ORACLES_HPP

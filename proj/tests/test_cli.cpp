#include <doctest.h>

#include <cmath>
#include <map>
#include <random>
#include <sstream>

#include "evimix/cli/commands.hpp"
#include "evimix/cli/io.hpp"
#include "evimix/error.hpp"
#include "support/oracles.hpp"

using namespace evimix;
using namespace evimix::cli;
namespace fs = std::filesystem;

namespace {

ErrorKind kind_of(const auto& call) {
  try {
    call();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an evimix::Error");
  return ErrorKind::UsageError;
}

std::map<std::string, std::string> read_summary(const fs::path& path) {
  std::map<std::string, std::string> out;
  std::istringstream is(testio::read_file(path));
  std::string line;
  while (std::getline(is, line)) {
    const auto eq = line.find(" = ");
    if (eq != std::string::npos) out[line.substr(0, eq)] = line.substr(eq + 3);
  }
  return out;
}

struct Csv {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  double num(std::size_t r, const std::string& col) const {
    for (std::size_t c = 0; c < header.size(); ++c)
      if (header[c] == col) return std::stod(rows[r][c]);
    FAIL("no column " << col);
    return 0.0;
  }
};

Csv read_csv(const fs::path& path) {
  Csv out;
  std::istringstream is(testio::read_file(path));
  std::string line;
  bool first = true;
  while (std::getline(is, line)) {
    std::vector<std::string> cells;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (first) out.header = cells;
    else out.rows.push_back(cells);
    first = false;
  }
  return out;
}

// Long-format observations with Pareto areas: gamma_j = exp(mu + V_j).
std::string pareto_long_csv(std::size_t J, std::size_t n, double mu, double sigma2,
                            std::uint64_t seed, double scale = 1.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::ostringstream os;
  os.precision(17);
  os << "area_id,value\n";
  for (std::size_t j = 0; j < J; ++j) {
    const double g = std::exp(mu + std::sqrt(sigma2) * z(rng));
    for (std::size_t i = 0; i < n; ++i)
      os << "st" << j << ',' << scale * std::pow(1.0 - u(rng), -g) << '\n';
  }
  return os.str();
}

}  // namespace

TEST_CASE("long-format observations") {
  const auto dir = testio::scratch("cli_long");
  testio::write_file(dir / "a.csv", "area_id,value\na,1.5\nb,3\na,2.5\n");
  const auto obs = parse_observations((dir / "a.csv").string());
  REQUIRE(obs.data.size() == 2);
  CHECK(obs.data[0].area_id == "a");
  CHECK(obs.data[0].values == std::vector<double>{1.5, 2.5});
  CHECK_FALSE(obs.panel.has_value());

  testio::write_file(dir / "bad.csv", "area_id,value\na,1.5\na,abc\n");
  try {
    parse_observations((dir / "bad.csv").string());
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line() == 3);
  }
  testio::write_file(dir / "neg.csv", "area_id,value\na,1.5\na,0\n");
  CHECK(kind_of([&] { parse_observations((dir / "neg.csv").string()); }) == ErrorKind::DomainError);
  testio::write_file(dir / "hdr.csv", "id,value\na,1\n");
  CHECK(kind_of([&] { parse_observations((dir / "hdr.csv").string()); }) == ErrorKind::ParseError);
  testio::write_file(dir / "short.csv", "area_id,value\na\n");
  CHECK(kind_of([&] { parse_observations((dir / "short.csv").string()); }) == ErrorKind::ParseError);
  CHECK(kind_of([&] { parse_observations((dir / "missing.csv").string()); }) == ErrorKind::ParseError);

  testio::write_file(dir / "crlf.csv", "\xEF\xBB\xBF" "area_id,value\r\na,2\r\n\r\na,4\r\n");
  CHECK(parse_observations((dir / "crlf.csv").string()).data[0].values == std::vector<double>{2, 4});
}

TEST_CASE("panel observations") {
  const auto dir = testio::scratch("cli_panel");
  testio::write_file(dir / "p.csv", "area_id,date,value\na,d1,1\nb,d1,2\na,d2,3\nb,d2,4\n");
  const auto obs = parse_observations((dir / "p.csv").string());
  REQUIRE(obs.panel.has_value());
  CHECK(obs.panel->rows() == 2);
  CHECK(obs.panel->cols() == 2);
  CHECK(common_rows(*obs.panel, 0, 1) == 2);

  testio::write_file(dir / "q.csv", "area_id,date,value\na,d1,1\nb,d1,2\na,d2,3\n");
  const auto q = parse_observations((dir / "q.csv").string());
  CHECK(q.panel->rows() == 2);
  CHECK(common_rows(*q.panel, 0, 1) == 1);
  CHECK(q.data[1].values.size() == 1);

  testio::write_file(dir / "na.csv", "area_id,date,value\na,d1,NA\na,d2,0\nb,d1,2\nb,d2,\n");
  const auto na = parse_observations((dir / "na.csv").string());
  CHECK(na.data[0].values == std::vector<double>{0.0});
  CHECK(common_rows(*na.panel, 0, 1) == 0);

  testio::write_file(dir / "dup.csv", "area_id,date,value\na,d1,1\na,d1,2\n");
  CHECK(kind_of([&] { parse_observations((dir / "dup.csv").string()); }) == ErrorKind::DuplicateKey);
}

TEST_CASE("stations") {
  const auto dir = testio::scratch("cli_stations");
  testio::write_file(dir / "obs.csv", "area_id,value\nx,2\ny,3\n");
  testio::write_file(dir / "ok.csv", "area_id,lon,lat\ny,1,2\nx,3,4\n");
  testio::write_file(dir / "miss.csv", "area_id,lon,lat\nx,3,4\n");
  testio::write_file(dir / "dup.csv", "area_id,lon,lat\nx,3,4\nx,1,1\n");
  const auto data = parse_observations((dir / "obs.csv").string()).data;
  const Dataset joined = join_stations(data, parse_stations((dir / "ok.csv").string()));
  CHECK(joined[0].lon.value() == 3.0);
  CHECK(joined[1].lat.value() == 2.0);
  try {
    join_stations(data, parse_stations((dir / "miss.csv").string()));
    FAIL("expected MissingCoordinates");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::MissingCoordinates);
    CHECK(std::string(e.what()).find('y') != std::string::npos);
  }
  CHECK(kind_of([&] { parse_stations((dir / "dup.csv").string()); }) == ErrorKind::DuplicateKey);

  const std::string args = "build-corr --data " + (dir / "obs.csv").string() +
                           " --corr distance --stations " + (dir / "miss.csv").string();
  CHECK(testio::run_cli(args, dir) == kExitInputError);
  CHECK(testio::read_file(dir / "stderr.txt").find("MissingCoordinates") != std::string::npos);
}

TEST_CASE("hill command") {
  const auto dir = testio::scratch("cli_hill");
  testio::write_file(dir / "obs.csv", "area_id,value\na,1\na,2\na,4\na,8\nb,3\nb,5\n");
  REQUIRE(testio::run_cli("hill --data " + (dir / "obs.csv").string() + " --tail-fraction 0.5 -o " +
                              (dir / "h.csv").string(), dir) == kExitOk);
  const Csv h = read_csv(dir / "h.csv");
  CHECK(h.header == std::vector<std::string>{"area_id", "omega", "k", "n", "gamma_hill"});
  REQUIRE(h.rows.size() == 2);
  CHECK(h.num(0, "omega") == 2.0);
  CHECK(h.num(0, "k") == 2.0);
  CHECK(h.num(0, "gamma_hill") == doctest::Approx(1.5 * std::log(2.0)).epsilon(1e-8));
}

TEST_CASE("fit on a three-area toy file") {
  const auto dir = testio::scratch("cli_fit3");
  testio::write_file(dir / "obs.csv", pareto_long_csv(3, 300, std::log(0.5), 0.05, 1));
  const std::string args = "fit --data " + (dir / "obs.csv").string() + " --out-dir " +
                           (dir / "out").string() + " --R 50";
  REQUIRE(testio::run_cli(args, dir) == kExitOk);
  const auto s = read_summary(dir / "out" / "fit_summary.txt");
  for (const char* key : {"mu_hat", "sigma2_hat", "se_mu", "se_sigma2", "ci95_mu_lower",
                          "ci95_mu_upper", "ci95_mu_halfwidth", "ci95_mu_fullwidth",
                          "ci95_sigma2_halfwidth", "ci95_sigma2_fullwidth", "laplace_nll",
                          "converged"})
    CHECK(s.count(key) == 1);
  CHECK(s.at("converged") == "true");
  const double mu = std::stod(s.at("mu_hat"));
  CHECK(std::stod(s.at("ci95_mu_fullwidth")) ==
        doctest::Approx(2.0 * std::stod(s.at("ci95_mu_halfwidth"))).epsilon(1e-8));

  const Csv a = read_csv(dir / "out" / "areas.csv");
  CHECK(a.header == std::vector<std::string>{"area_id", "omega", "k", "n", "gamma_hill", "v_tilde",
                                             "gamma_tilde", "z_50"});
  REQUIRE(a.rows.size() == 3);
  for (std::size_t r = 0; r < 3; ++r) {
    // 9 significant digits in the files bound the achievable agreement
    CHECK(std::abs(std::exp(mu + a.num(r, "v_tilde")) / a.num(r, "gamma_tilde") - 1.0) < 1e-8);
    const double z = return_level(a.num(r, "omega"), static_cast<std::size_t>(a.num(r, "k")),
                                  static_cast<std::size_t>(a.num(r, "n")), a.num(r, "gamma_tilde"), 50.0);
    CHECK(a.num(r, "z_50") == doctest::Approx(z).epsilon(1e-7));
  }
}

TEST_CASE("fit on a simulated fixture recovers the parameters") {
  const auto dir = testio::scratch("cli_fit_recover");
  const double mu_star = std::log(0.5), s2_star = 0.04;
  testio::write_file(dir / "obs.csv", pareto_long_csv(60, 2000, mu_star, s2_star, 77, 3.0));
  REQUIRE(testio::run_cli("fit --data " + (dir / "obs.csv").string() + " --out-dir " +
                              (dir / "out").string(), dir) == kExitOk);
  const auto s = read_summary(dir / "out" / "fit_summary.txt");
  CHECK(std::abs(std::stod(s.at("mu_hat")) - mu_star) <= 3.0 * std::stod(s.at("se_mu")));
  CHECK(std::abs(std::stod(s.at("sigma2_hat")) - s2_star) <= 3.0 * std::stod(s.at("se_sigma2")));
}

TEST_CASE("exit statuses") {
  const auto dir = testio::scratch("cli_exit");
  testio::write_file(dir / "obs.csv", pareto_long_csv(4, 100, std::log(0.5), 0.05, 3));
  const std::string data = " --data " + (dir / "obs.csv").string();

  // area whose values all tie: no value exceeds its own quantile threshold
  testio::write_file(dir / "flat.csv", "area_id,value\nok,1\nok,2\nok,3\nflat,5\nflat,5\nflat,5\n");
  CHECK(testio::run_cli("fit --data " + (dir / "flat.csv").string() + " --tail-fraction 0.4 --out-dir " +
                            (dir / "o0").string(), dir) == kExitInputError);
  CHECK(testio::read_file(dir / "stderr.txt").find("flat") != std::string::npos);

  CHECK(testio::run_cli("fit" + data + " --corr taildep --out-dir " + (dir / "o1").string(), dir) ==
        kExitInputError);
  CHECK(testio::read_file(dir / "stderr.txt").find("area_id,date,value") != std::string::npos);

  CHECK(testio::run_cli("fit" + data + " --outer-max-iter 1 --out-dir " + (dir / "o2").string(), dir) ==
        kExitNotConverged);
  CHECK(fs::exists(dir / "o2" / "areas.csv"));
  CHECK(read_summary(dir / "o2" / "fit_summary.txt").at("converged") == "false");

  CHECK(testio::run_cli("fit" + data + " --out-dir " + (dir / "o3").string(), dir) == kExitOk);
  CHECK(testio::run_cli("simulate --J 1", dir) == kExitInputError);
  CHECK(testio::run_cli("simulate --case kernel42 --J 10 --M 1", dir) == kExitInputError);
  CHECK(testio::run_cli("fit --out-dir x", dir) == kExitInputError);
  CHECK(testio::run_cli("frobnicate", dir) == kExitInputError);
  CHECK(testio::run_cli("return-levels --input " + (dir / "none.csv").string() + " --R 10", dir) ==
        kExitInputError);
}

TEST_CASE("return-levels command") {
  const auto dir = testio::scratch("cli_rl");
  testio::write_file(dir / "in.csv", "area_id,omega,k,n,gamma_tilde\nx,100,5,100,0.5\ny,1,1,365,1\n");
  REQUIRE(testio::run_cli("return-levels --input " + (dir / "in.csv").string() + " --R 50 --R 1 -o " +
                              (dir / "out.csv").string(), dir) == kExitOk);
  const Csv c = read_csv(dir / "out.csv");
  CHECK(c.header.back() == "z_1");
  CHECK(std::abs(c.num(0, "z_50") - 3020.76) < 0.01);
  CHECK(std::abs(c.num(0, "z_50") - 100.0 * std::sqrt(912.5)) < 1e-5);
  CHECK(c.num(1, "z_1") == 1.0);

  testio::write_file(dir / "nocol.csv", "area_id,omega,k,n\nx,100,5,100\n");
  CHECK(testio::run_cli("return-levels --input " + (dir / "nocol.csv").string() + " --R 50", dir) ==
        kExitInputError);
  testio::write_file(dir / "zero.csv", "area_id,omega,k,n,gamma_tilde\nx,100,0,100,0.5\n");
  CHECK(testio::run_cli("return-levels --input " + (dir / "zero.csv").string() + " --R 50", dir) ==
        kExitInputError);
}

TEST_CASE("correlation matrix round trip through a file") {
  const auto dir = testio::scratch("cli_roundtrip");
  testio::write_file(dir / "obs.csv", pareto_long_csv(5, 200, std::log(0.4), 0.1, 12));
  testio::write_file(dir / "st.csv",
                     "area_id,lon,lat\nst0,0,0\nst1,0.5,0\nst2,1,1\nst3,2,0.3\nst4,0.2,1.5\n");
  const std::string data = " --data " + (dir / "obs.csv").string();
  const std::string dist = " --corr distance --c 1.2 --stations " + (dir / "st.csv").string();
  REQUIRE(testio::run_cli("build-corr" + data + dist + " -o " + (dir / "D.csv").string(), dir) == kExitOk);
  REQUIRE(testio::run_cli("fit" + data + dist + " --out-dir " + (dir / "a").string(), dir) == kExitOk);
  REQUIRE(testio::run_cli("fit" + data + " --corr file --corr-matrix " + (dir / "D.csv").string() +
                              " --out-dir " + (dir / "b").string(), dir) == kExitOk);
  CHECK(testio::read_file(dir / "a" / "fit_summary.txt") == testio::read_file(dir / "b" / "fit_summary.txt"));
  CHECK(testio::read_file(dir / "a" / "areas.csv") == testio::read_file(dir / "b" / "areas.csv"));

  RunConfig in_process;
  in_process.data_path = (dir / "obs.csv").string();
  in_process.stations_path = (dir / "st.csv").string();
  in_process.corr.source = CorrSource::Distance;
  in_process.corr.c = 1.2;
  const CorrelationMatrix D1 = build_correlation(in_process);
  const CorrelationMatrix D2(read_matrix_csv((dir / "D.csv").string()));
  const auto ex = extract_exceedances(parse_observations(in_process.data_path).data, 0.1);
  const ModelConfig cfg;
  CHECK(std::abs(laplace_marginal_nll(-0.9, 0.1, D1, ex, cfg) -
                 laplace_marginal_nll(-0.9, 0.1, D2, ex, cfg)) <= 1e-12);

  testio::write_file(dir / "small.csv", "1,0\n0,1\n");
  CHECK(testio::run_cli("fit" + data + " --corr file --corr-matrix " + (dir / "small.csv").string() +
                            " --out-dir " + (dir / "c").string(), dir) == kExitInputError);
}

TEST_CASE("tail-dependence correlation from panel input") {
  const auto dir = testio::scratch("cli_taildep");
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::ostringstream os;
  os << "area_id,date,value\n";
  for (int d = 0; d < 200; ++d) {
    const double common = u(rng);
    for (int j = 0; j < 3; ++j) os << "s" << j << ",t" << d << ',' << (j < 2 ? common : u(rng)) + 1.0 << '\n';
  }
  testio::write_file(dir / "p.csv", os.str());
  REQUIRE(testio::run_cli("build-corr --data " + (dir / "p.csv").string() + " --corr taildep --p 0.9 -o " +
                              (dir / "D.csv").string(), dir) == kExitOk);
  const Eigen::MatrixXd D = read_matrix_csv((dir / "D.csv").string());
  CHECK(D(0, 1) == doctest::Approx(1.0).epsilon(1e-3));
  CHECK(D(0, 2) < 0.5);
  CHECK(Eigen::LLT<Eigen::MatrixXd>(D).info() == Eigen::Success);
}

TEST_CASE("positivity screen drops areas below the floor") {
  const auto dir = testio::scratch("cli_screen");
  std::ostringstream os;
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  os << "area_id,value\n";
  const double g[4] = {0.1, 0.6, 0.7, 0.65};
  for (int j = 0; j < 4; ++j)
    for (int i = 0; i < 500; ++i) os << "a" << j << ',' << std::pow(1.0 - u(rng), -g[j]) << '\n';
  testio::write_file(dir / "obs.csv", os.str());
  REQUIRE(testio::run_cli("fit --data " + (dir / "obs.csv").string() +
                              " --require-positive-evi --evi-floor 0.3 --out-dir " + (dir / "o").string(),
                          dir) == kExitOk);
  CHECK(read_summary(dir / "o" / "fit_summary.txt").at("areas_screened_out") == "1");
  const Csv a = read_csv(dir / "o" / "areas.csv");
  REQUIRE(a.rows.size() == 3);
  CHECK(a.rows[0][0] == "a1");
}

TEST_CASE("config file supplies defaults and flags override it") {
  const auto dir = testio::scratch("cli_config");
  testio::write_file(dir / "obs.csv", "area_id,value\nx,2\ny,3\n");
  testio::write_file(dir / "st.csv", "area_id,lon,lat\nx,0,0\ny,3,4\n");
  testio::write_file(dir / "run.ini", "corr = distance\nc = 5\nstations = " + (dir / "st.csv").string() + "\n");
  const std::string base = "build-corr --data " + (dir / "obs.csv").string() + " --config " +
                           (dir / "run.ini").string();
  REQUIRE(testio::run_cli(base + " -o " + (dir / "a.csv").string(), dir) == kExitOk);
  CHECK(read_matrix_csv((dir / "a.csv").string())(0, 1) == doctest::Approx(std::exp(-1.0)).epsilon(1e-15));
  REQUIRE(testio::run_cli(base + " --c 2.5 -o " + (dir / "b.csv").string(), dir) == kExitOk);
  CHECK(read_matrix_csv((dir / "b.csv").string())(0, 1) == doctest::Approx(std::exp(-2.0)).epsilon(1e-15));

  testio::write_file(dir / "bad.ini", "no_such_option = 1\n");
  CHECK(testio::run_cli("build-corr --data " + (dir / "obs.csv").string() + " --config " +
                            (dir / "bad.ini").string(), dir) == kExitInputError);
}

TEST_CASE("simulate is byte-identical across runs and worker counts") {
  const auto dir = testio::scratch("cli_sim");
  const std::string args = "simulate --case identity --J 50 --n 50 --M 5 --seed 7";
  REQUIRE(testio::run_cli(args + " --out-dir " + (dir / "a").string(), dir) == kExitOk);
  REQUIRE(testio::run_cli(args + " --out-dir " + (dir / "b").string(), dir) == kExitOk);
  REQUIRE(testio::run_cli(args + " --workers 3 --out-dir " + (dir / "c").string(), dir) == kExitOk);
  for (const char* f : {"summary.txt", "curves.csv"}) {
    const std::string a = testio::read_file(dir / "a" / f);
    CHECK_FALSE(a.empty());
    CHECK(a == testio::read_file(dir / "b" / f));
    CHECK(a == testio::read_file(dir / "c" / f));
  }
}

TEST_CASE("simulate kernel500 at desk scale favours the proposed method") {
  const auto dir = testio::scratch("cli_sim_kernel");
  REQUIRE(testio::run_cli("simulate --case kernel500 --J 100 --n 50 --M 5 --seed 11 --out-dir " +
                              (dir / "o").string(), dir) == kExitOk);
  const std::string text = testio::read_file(dir / "o" / "summary.txt");
  const auto at = text.find("\nkernel500,");
  REQUIRE(at != std::string::npos);
  std::vector<std::string> cells;
  std::stringstream ls(text.substr(at + 1, text.find('\n', at + 1) - at - 1));
  std::string cell;
  while (std::getline(ls, cell, ',')) cells.push_back(cell);
  REQUIRE(cells.size() >= 4);
  CHECK(std::stod(cells[2]) < std::stod(cells[3]));
  CHECK(fs::exists(dir / "o" / "curves.csv"));
}

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "epiobs/data/datasets.hpp"
#include "epiobs/data/io.hpp"
#include "epiobs/error.hpp"
#include "epiobs/zoo/zoo.hpp"

using namespace epiobs;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir() {
  const auto d = fs::temp_directory_path() / "epiobs-test-data";
  fs::create_directories(d);
  return d;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string first_line(const fs::path& p) {
  std::ifstream in(p);
  std::string line;
  std::getline(in, line);
  return line;
}

}  // namespace

TEST_SUITE("datasets") {
  TEST_CASE("boarding school") {
    const auto d = dataset_boarding_school();
    CHECK(d.size() == 14);
    CHECK(d.t.front() == 0.0);
    CHECK(d.t.back() == 13.0);
    CHECK(d.y(0, 0) == 1.0);
    CHECK(d.y.sum() == 1538.0);
    CHECK(d.dof_convention == DofConvention::KnownX0);
  }

  TEST_CASE("Bombay") {
    const auto d = dataset_bombay();
    CHECK(d.size() == 31);
    CHECK(d.y.sum() == 8859.0);
    Eigen::Index peak = 0;
    CHECK(d.y.col(0).maxCoeff(&peak) == 925.0);
    CHECK(peak == 18);
    CHECK(d.dof_convention == DofConvention::EstimatedX0);
  }

  TEST_CASE("unknown case study") { CHECK_THROWS_AS((void)case_study("london"), UsageError); }
}

TEST_SUITE("case studies") {
  TEST_CASE("boarding school passes every pinned check") {
    const auto r = run_case_study("boarding-school");
    for (const auto& c : r.checks) {
      CAPTURE(c.name);
      CHECK(c.pass);
    }
    CHECK(r.pass);
    const auto j = r.to_json();
    CHECK(j["pass"] == true);
    CHECK(j["fim"]["intervals"].size() == 2);
  }

  TEST_CASE("Bombay passes with the ill-conditioned flag") {
    const auto r = run_case_study("bombay");
    for (const auto& c : r.checks) {
      CAPTURE(c.name);
      CHECK(c.pass);
    }
    CHECK(r.pass);
    CHECK(r.fim.ill_conditioned);
    CHECK(r.fim.condition_number >= 1e20);
  }

  TEST_CASE("Bombay residual sum keeps decreasing along the ridge") {
    const auto cs = case_study("bombay");
    double prev_sse = INFINITY;
    double prev_gamma = 0.0;
    for (std::size_t budget : {100, 200, 400, 800, 1600}) {
      FitOptions o;
      o.max_iterations = budget;
      const auto f = ols_fit(cs.guess, cs.dataset, o);
      CAPTURE(budget);
      CHECK_FALSE(f.converged);
      CHECK(f.sse < prev_sse);
      CHECK(f.estimate[1] > prev_gamma);
      // Initial death rate γ·I0 stays put while γ and S0 run off.
      if (budget >= 400) CHECK(f.estimate[1] * f.estimate[3] == doctest::Approx(6.0).epsilon(0.05));
      prev_sse = f.sse;
      prev_gamma = f.estimate[1];
    }
  }

  TEST_CASE("session sensitivity columns reproduce the printed Bombay intervals") {
    const auto cs = case_study("bombay");
    Vector th = cs.guess.theta;
    th[0] = 8.552408800e-05;
    th[1] = 3.7161743;
    Vector x0(2);
    x0 << 48113.13, 1.4213612;
    const auto b = sensitivity_solve(cs.guess.model, th, x0, cs.dataset.t);
    const auto session = bombay_session_chi(b, th);
    const auto chain = output_sensitivity(b, cs.guess.model, th, cs.guess.free);
    for (std::size_t i = 0; i < session.size(); ++i) {
      CHECK(session[i](0, 0) == doctest::Approx(chain[i](0, 0)));
      CHECK(session[i](0, 2) == doctest::Approx(chain[i](0, 2)));
      CHECK(session[i](0, 3) == doctest::Approx(chain[i](0, 3)));
      // Columns differ by (γ − 1)·I.
      CHECK(session[i](0, 1) - chain[i](0, 1) == doctest::Approx((th[1] - 1.0) * b.x[i][1]).epsilon(1e-9));
    }
    FitResult f;
    f.estimate = Vector(4);
    f.estimate << th[0], th[1], x0[0], x0[1];
    f.sse = fit_residuals(cs.guess.model, th, x0, cs.dataset).squaredNorm();
    f.dof = 25;
    const auto r = confidence_intervals(f, fim(session, f.sse / f.dof));
    CHECK(r.condition_number == doctest::Approx(9.141e24).epsilon(0.05));
    CHECK(r.half_widths[1] == doctest::Approx(25.255243).epsilon(0.05));
    CHECK(r.half_widths[2] == doctest::Approx(593794.26).epsilon(0.05));
  }

  TEST_CASE("fitted curve CSV") {
    const auto cs = case_study("boarding-school");
    const auto fit = ols_fit(cs.guess, cs.dataset);
    const auto path = temp_dir() / "curve.csv";
    emit_case_study_curve(cs, fit, path.string());
    const auto t = read_csv(path.string());
    CHECK(t.header == std::vector<std::string>{"t", "data", "fitted"});
    CHECK(t.rows.size() == 1301);
    CHECK(t.rows[100][0] == doctest::Approx(1.0));
    CHECK(t.rows[100][1] == 6.0);
    CHECK(std::isnan(t.rows[101][1]));
  }
}

TEST_SUITE("io") {
  TEST_CASE("SIR trajectory CSV has t,S,I,y and is byte-identical when re-emitted") {
    const auto e = zoo_by_id("sir-classical");
    const auto traj = integrate(e.spec, e.default_x0, e.default_params, uniform_grid(0.0, 10.0, 20));
    const auto a = temp_dir() / "traj-a.csv";
    const auto b = temp_dir() / "traj-b.csv";
    emit_plot_data(traj, e.spec, a.string());
    emit_plot_data(traj, e.spec, b.string());
    CHECK(first_line(a) == "t,S,I,y");
    CHECK(slurp(a) == slurp(b));
  }

  TEST_CASE("observer run CSV schema and determinism") {
    const auto cfg = default_observer_config(ObserverFamily::Luenberger);
    const auto run = simulate_with_noise(cfg, {NoiseKind::Gaussian, 0.05, 1.0, false}, 7);
    const auto a = temp_dir() / "run-a.csv";
    const auto b = temp_dir() / "run-b.csv";
    emit_plot_data(run, a.string());
    emit_plot_data(simulate_with_noise(cfg, {NoiseKind::Gaussian, 0.05, 1.0, false}, 7), b.string());
    CHECK(first_line(a) == "t,error_norm,innovation,x_x1,x_x2,x_x3,xhat_x1,xhat_x2,xhat_x3");
    CHECK(slurp(a) == slurp(b));
  }

  TEST_CASE("CSV values round-trip exactly") {
    CsvTable t{{"t", "y"}, {{0.0, 0.1}, {1.0 / 3.0, 1e-300}, {2.0, -123456.789}}};
    const auto p = temp_dir() / "rt.csv";
    write_csv(t, p.string());
    const auto back = read_csv(p.string());
    CHECK(back.header == t.header);
    CHECK(back.rows == t.rows);
  }

  TEST_CASE("dataset CSV picks t and y columns") {
    const auto p = temp_dir() / "multi.csv";
    {
      std::ofstream out(p);
      out << "t,S,y2,y1\n0,5,1,2\n1,6,3,4\n";
    }
    const auto d = read_dataset_csv(p.string());
    CHECK(d.outputs == std::vector<std::size_t>{1, 0});
    CHECK(d.y(1, 0) == 3.0);
    CHECK(d.y(1, 1) == 4.0);
  }

  TEST_CASE("malformed input and unwritable paths") {
    const auto p = temp_dir() / "bad.csv";
    {
      std::ofstream out(p);
      out << "t,y\n0,1\n1,abc\n";
    }
    CHECK_THROWS_AS((void)read_csv(p.string()), ValidationError);
    {
      std::ofstream out(p);
      out << "t,z\n0,1\n";
    }
    CHECK_THROWS_AS((void)read_dataset_csv(p.string()), ValidationError);
    CHECK_THROWS_AS((void)read_csv((temp_dir() / "absent.csv").string()), IoError);
    CHECK_THROWS_AS(write_csv({{"t"}, {}}, "/nonexistent-dir/x.csv"), IoError);
    CHECK_THROWS_AS(write_json(nlohmann::json::object(), "/nonexistent-dir/x.json"), IoError);
  }

  TEST_CASE("JSON serialization of a fit") {
    const auto cs = case_study("boarding-school");
    const auto fit = ols_fit(cs.guess, cs.dataset);
    const auto j = to_json(fit);
    CHECK(j["estimate"]["beta"].get<double>() == doctest::Approx(1.9605032).epsilon(5e-3));
    CHECK(j["converged"] == true);
    const auto r = to_json(fim_at_fit(cs.guess, cs.dataset, fit));
    CHECK(r["fim"].size() == 2);
    CHECK(r["intervals"][0]["name"] == "beta");
  }
}

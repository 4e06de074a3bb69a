#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <vector>

#include "evae/errors.hpp"
#include "evae/kernels.hpp"

using namespace evae;

namespace {

std::filesystem::path temp_file(const std::string& name) {
  return std::filesystem::temp_directory_path() / name;
}

}  // namespace

TEST_CASE("simpson integrates low-degree polynomials exactly") {
  const auto cubic = [](double t) { return 2.0 * t * t * t - t + 1.0; };
  // Exact for cubics even on a coarse grid.
  CHECK(simpson(cubic, 0.0, 2.0, 3) == doctest::Approx(8.0 - 2.0 + 2.0).epsilon(1e-12));
  const auto quartic = [](double t) { return t * t * t * t; };
  CHECK(simpson(quartic, 0.0, 1.0, 2001) == doctest::Approx(0.2).epsilon(1e-12));
  CHECK_THROWS_AS(simpson(cubic, 0.0, 1.0, 4), ConfigError);
  CHECK_THROWS_AS(simpson(cubic, 0.0, 1.0, 1), ConfigError);
}

TEST_CASE("quadrature spec validation") {
  QuadratureSpec q;
  q.validate();  // defaults are fine
  q.points = 1000;
  CHECK_THROWS_AS(q.validate(), ConfigError);  // even
  q.points = 999;
  CHECK_THROWS_AS(q.validate(), ConfigError);  // too few
  q.points = 1001;
  q.lo = 1.0;
  q.hi = 0.0;
  CHECK_THROWS_AS(q.validate(), ConfigError);  // inverted window
}

TEST_CASE("roughness functional matches closed forms across scales") {
  // Variance-matched family: I(epa) = 3/(5r), and the competitors' closed
  // forms follow from their matched scale parameters.
  for (double r : {0.1, 0.5, 1.0, 2.0, 10.0}) {
    CHECK(functional_I(Kernel::epanechnikov(0.0, r)) ==
          doctest::Approx(3.0 / (5.0 * r)).epsilon(1e-9));
    CHECK(functional_I(Kernel::gaussian(0.0, r)) ==
          doctest::Approx(std::sqrt(5.0) / (2.0 * std::sqrt(M_PI)) / r).epsilon(1e-9));
    CHECK(functional_I(Kernel::uniform(0.0, r)) ==
          doctest::Approx(1.0 / (2.0 * r * std::sqrt(3.0 / 5.0))).epsilon(1e-9));
    CHECK(functional_I(Kernel::quartic(0.0, r)) ==
          doctest::Approx(std::pow(5.0 / 7.0, 1.5) / r).epsilon(1e-9));
  }
  // Location does not matter.
  CHECK(functional_I(Kernel::epanechnikov(3.7, 1.0)) == doctest::Approx(0.6).epsilon(1e-9));
}

TEST_CASE("pair functional values") {
  // Frozen quadrature oracle for the parabolic kernel, exact value for the
  // box kernel, closed form 1/(2 sigma sqrt(2 pi)) for the gaussian.
  CHECK(functional_J(Kernel::epanechnikov(0.0, 1.0)) ==
        doctest::Approx(0.433766234).epsilon(1e-6));
  const double w = std::sqrt(3.0 / 5.0);  // uniform half-width at r=1
  CHECK(functional_J(Kernel::uniform(0.0, 1.0)) ==
        doctest::Approx((1.0 / 3.0) / w).epsilon(1e-4));
  const double sigma = 1.0 / std::sqrt(5.0);
  CHECK(functional_J(Kernel::gaussian(0.0, 1.0)) ==
        doctest::Approx(1.0 / (2.0 * sigma * std::sqrt(2.0 * M_PI))).epsilon(1e-6));
}

TEST_CASE("tabulated kernels reproduce their analytic counterparts") {
  std::vector<double> grid, values;
  for (int i = 0; i <= 400; ++i) {
    const double t = -1.0 + 2.0 * i / 400.0;
    grid.push_back(t);
    values.push_back(0.75 * (1.0 - t * t));
  }
  Kernel k = Kernel::tabulated("table-epa", grid, values);
  CHECK(k.r() == doctest::Approx(1.0).epsilon(1e-4));
  CHECK(functional_I(k) == doctest::Approx(0.6).epsilon(1e-4));
}

TEST_CASE("tabulated kernel validation") {
  CHECK_THROWS_AS(Kernel::tabulated("bad", {0.0, 0.0, 1.0}, {0.5, 0.5, 0.5}), ValidationError);
  CHECK_THROWS_AS(Kernel::tabulated("bad", {0.0, 1.0}, {0.5, -0.5}), ValidationError);
  CHECK_THROWS_AS(Kernel::tabulated("bad", {0.0}, {1.0}), ValidationError);
}

TEST_CASE("table files parse comments and report bad lines") {
  const auto good = temp_file("kernel_table_good.txt");
  {
    std::ofstream out(good);
    out << "# triangular kernel on [-1, 1]\n";
    for (int i = 0; i <= 200; ++i) {
      const double t = -1.0 + 2.0 * i / 200.0;
      out << t << " " << (1.0 - std::abs(t)) << "\n";
    }
  }
  Kernel k = Kernel::from_table_file(good);
  // Triangular kernel: mass 1, variance 1/6 -> r = sqrt(5/6).
  CHECK(k.r() == doctest::Approx(std::sqrt(5.0 / 6.0)).epsilon(1e-3));
  CHECK(functional_I(k) == doctest::Approx(2.0 / 3.0).epsilon(1e-3));

  const auto bad = temp_file("kernel_table_bad.txt");
  {
    std::ofstream out(bad);
    out << "0.0 1.0\nnot-a-number 2.0\n";
  }
  try {
    Kernel::from_table_file(bad);
    CHECK(false);
  } catch (const FormatError& e) {
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }
  CHECK_THROWS_AS(Kernel::from_table_file(temp_file("missing_table.txt")), FormatError);
}

TEST_CASE("non-normalized tables are rejected by the functionals") {
  std::vector<double> grid = {-1.0, 0.0, 1.0};
  std::vector<double> values = {0.0, 2.0, 0.0};  // mass 2, not a density
  Kernel k = Kernel::tabulated("unnormalized", grid, values);
  CHECK_THROWS_AS(functional_I(k), ValidationError);
}

TEST_CASE("parabolic kernel minimizes roughness in the matched family") {
  const std::vector<Kernel> family = {
      Kernel::epanechnikov(0.0, 1.0), Kernel::gaussian(0.0, 1.0), Kernel::uniform(0.0, 1.0),
      Kernel::quartic(0.0, 1.0)};
  const RoughnessReport report = verify_min_roughness(family);
  REQUIRE(report.rows.size() == 4);
  CHECK(report.best == 0);
  CHECK(report.rows[0].kernel == "epanechnikov");
  CHECK(report.rows[0].i_value == doctest::Approx(0.6).epsilon(1e-9));
  CHECK(report.rows[0].margin == 0.0);
  // Frozen closed-form margins at r = 1.
  CHECK(report.rows[1].margin == doctest::Approx(0.030783130505).epsilon(1e-6));
  CHECK(report.rows[2].margin == doctest::Approx(0.045497224368).epsilon(1e-6));
  CHECK(report.rows[3].margin == doctest::Approx(0.003681610520).epsilon(1e-6));
}

TEST_CASE("roughness verification rejects bad candidate sets") {
  CHECK_THROWS_AS(verify_min_roughness({}), ConfigError);
  // No parabolic candidate to compare against.
  CHECK_THROWS_AS(verify_min_roughness({Kernel::gaussian(0.0, 1.0)}), ConfigError);
  // Mixed locations break the moment checks.
  try {
    verify_min_roughness({Kernel::epanechnikov(0.0, 1.0), Kernel::gaussian(5.0, 1.0)});
    CHECK(false);
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("gaussian") != std::string::npos);
  }
}

TEST_CASE("roughness report CSV layout") {
  const RoughnessReport report =
      verify_min_roughness({Kernel::epanechnikov(0.0, 2.0), Kernel::uniform(0.0, 2.0)});
  std::ostringstream out;
  write_csv(report, out);
  std::istringstream in(out.str());
  std::string line;
  std::getline(in, line);
  CHECK(line == "kernel,i_value,j_value,margin");
  std::getline(in, line);
  CHECK(line.rfind("epanechnikov,", 0) == 0);
  std::getline(in, line);
  CHECK(line.rfind("uniform,", 0) == 0);
}

TEST_CASE("explicit integration windows narrow the functional") {
  QuadratureSpec q;
  q.lo = -0.5;
  q.hi = 0.5;
  // Mass inside [-0.5, 0.5] is 11/16 for the parabolic kernel, so the
  // normalization check must fire.
  CHECK_THROWS_AS(functional_I(Kernel::epanechnikov(0.0, 1.0), q), ValidationError);
}

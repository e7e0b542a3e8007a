#include <doctest.h>

#include <cmath>
#include <numbers>
#include <numeric>

#include "oracles.hpp"
#include "rmtfeat/error.hpp"
#include "rmtfeat/rmt.hpp"
#include "rmtfeat/rng.hpp"

using namespace rmtfeat;

namespace {

EigenSpectrum spectrum(std::vector<double> v, bool normalized = false, double c = 0.0) {
  const std::size_t n = v.size();
  return {std::move(v), n, c, normalized, 0};
}

std::function<double(double)> as_fn(const TestFunction& phi) {
  return [phi](double x) { return phi(x); };
}

}  // namespace

TEST_CASE("MPLaw edges") {
  const auto law = MPLaw::from_ratio(0.25);
  CHECK(law.a == 0.25);
  CHECK(law.b == 2.25);
  CHECK_THROWS_AS(MPLaw::from_ratio(1.0), Error);
  CHECK_THROWS_AS(MPLaw::from_ratio(0.0), Error);
  CHECK(MPLaw::from_dimensions(64, 200).c == 0.32);
}

TEST_CASE("mp_density") {
  const auto law = MPLaw::from_ratio(0.3);
  CHECK(mp_density(law, law.a) == 0.0);
  CHECK(mp_density(law, law.b) == 0.0);
  CHECK(mp_density(law, law.b + 0.1) == 0.0);
  CHECK(mp_density(law, law.a * 0.5) == 0.0);
  // c = 1 is outside the constructor's range but the density formula still
  // applies on [0, 4].
  const MPLaw square{1.0, 0.0, 4.0};
  CHECK(mp_density(square, 1.0) == doctest::Approx(std::sqrt(3.0) / (2.0 * std::numbers::pi)).epsilon(1e-15));
  CHECK(mp_density(square, 1.0) == doctest::Approx(0.27566).epsilon(1e-5));
}

TEST_CASE("mp_cdf against the Simpson oracle") {
  for (double c : {0.1, 0.25, 0.5, 0.9}) {
    const auto law = MPLaw::from_ratio(c);
    const oracle::MP ref(c);
    CHECK(std::abs(ref.cdf(ref.b) - 1.0) < 1e-8);  // the density integrates to 1
    CHECK(mp_cdf(law, law.a) == 0.0);
    CHECK(mp_cdf(law, law.a - 1.0) == 0.0);
    CHECK(mp_cdf(law, law.b) == 1.0);
    CHECK(mp_cdf(law, law.b * 2.0) == 1.0);
    CHECK(std::abs(mp_cdf(law, std::nextafter(law.b, 0.0)) - 1.0) < 1e-8);
    for (double q : {0.1, 0.3, 0.5, 0.7, 0.9}) {
      const double x = law.a + q * (law.b - law.a);
      CHECK(std::abs(mp_cdf(law, x) - ref.cdf(x)) < 1e-9);
    }
    double prev = 0.0;
    for (int i = 0; i <= 1000; ++i) {
      const double x = law.a - 0.1 + (law.b - law.a + 0.2) * i / 1000.0;
      const double f = mp_cdf(law, x);
      CHECK(f >= prev);
      prev = f;
    }
  }
}

TEST_CASE("esd_ks_distance") {
  const double c = 0.25;
  const auto law = MPLaw::from_ratio(c);
  const oracle::MPTable table(c, 20001);
  SUBCASE("10000 inverse-transform samples are within the DKW band") {
    Rng rng(17);
    std::vector<double> x(10000);
    for (double& v : x) v = table.quantile(rng.uniform());
    CHECK(esd_ks_distance(x, law) < 0.02);
  }
  SUBCASE("a discretized CDF grid is within one grid step") {
    const std::size_t n = 2000;
    std::vector<double> x(n);
    for (std::size_t i = 0; i < n; ++i) x[i] = table.quantile((static_cast<double>(i) + 0.5) / n);
    CHECK(esd_ks_distance(x, law) <= 1.0 / n);
  }
  SUBCASE("single atom at 1") {
    const double f1 = oracle::MP(c).cdf(1.0);
    const double expected = std::max(f1, 1.0 - f1);
    CHECK(esd_ks_distance(std::vector<double>{1.0}, law) == doctest::Approx(expected).epsilon(1e-9));
  }
  SUBCASE("c mismatch") {
    CHECK_THROWS_AS(esd_ks_distance(spectrum({1.0, 1.0}, false, 0.5), law), Error);
    CHECK_NOTHROW(esd_ks_distance(spectrum({1.0, 1.0}, false, 0.25), law));
  }
}

TEST_CASE("test function values") {
  CHECK(TestFunction::lrt()(1.0) == 0.0);
  CHECK(TestFunction::wasserstein()(1.0) == 0.0);
  CHECK(TestFunction::nagao()(1.0) == 0.0);
  CHECK(TestFunction::wasserstein()(4.0) == 1.0);
  CHECK(TestFunction::von_neumann_entropy()(0.0) == 0.0);
  CHECK(TestFunction::parse("vnentropy").kind() == TestFunctionKind::VonNeumannEntropy);
  CHECK_THROWS_AS(TestFunction::parse("cubic"), Error);
  const auto tab = TestFunction::tabulated({0.0, 1.0, 3.0}, {0.0, 2.0, 0.0});
  CHECK(tab(0.5) == 1.0);
  CHECK(tab(2.0) == 1.0);
  CHECK(tab.derivative(2.0) == -1.0);
  CHECK_THROWS_AS(tab(3.5), Error);
  CHECK_THROWS_AS(TestFunction::tabulated({1.0, 1.0}, {0.0, 0.0}), Error);
}

TEST_CASE("les worked examples") {
  CHECK(les(spectrum({1, 1, 1}), TestFunction::lrt()).value == 0.0);
  CHECK(les(spectrum({0.5, 0.5}, true), TestFunction::von_neumann_entropy()).value ==
        doctest::Approx(std::log(2.0)).epsilon(1e-15));
  CHECK(les(spectrum({0, 2}), TestFunction::nagao()).value == 2.0);
  CHECK(les(spectrum({0, 2}), TestFunction::nagao(), true).value == 1.0);
  CHECK_THROWS_AS(les(spectrum({0.5, 0.5}, false), TestFunction::von_neumann_entropy()), Error);
}

TEST_CASE("les floors zero eigenvalues before the LRT log") {
  const auto f = les(spectrum({0.0, 1.0, 2.0}), TestFunction::lrt());
  CHECK(f.floored == 1);
  const double expected = (1e-12 - std::log(1e-12) - 1.0) + 0.0 + (2.0 - std::log(2.0) - 1.0);
  CHECK(f.value == doctest::Approx(expected).epsilon(1e-14));
  CHECK(les(spectrum({0.0, 1.0}), TestFunction::nagao()).floored == 0);
}

TEST_CASE("property: les depends only on the spectrum") {
  Rng rng(31);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 3 + rng.below(6);
    Matrix g(n, 2 * n);
    for (double& v : g.values()) v = rng.normal();
    const Matrix m = (1.0 / (2.0 * n)) * gram(g);
    // Random orthogonal Q from the eigenvectors of a random symmetric matrix.
    Matrix s(n, n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j <= i; ++j) s(i, j) = s(j, i) = rng.normal();
    const Matrix q = jacobi_eigen(s).vectors;
    Matrix rotated = multiply(multiply(q, m), q.transpose());
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < i; ++j) rotated(i, j) = rotated(j, i);
    const auto sa = eigen_spectrum({m, 2 * n, CovNormalization::PerSample});
    const auto sb = eigen_spectrum({rotated, 2 * n, CovNormalization::PerSample});
    auto shuffled = sa;
    shuffle(shuffled.eigenvalues, rng);
    for (const auto& phi : {TestFunction::lrt(), TestFunction::wasserstein(), TestFunction::nagao()}) {
      const double a = les(sa, phi).value;
      CHECK(std::abs(les(sb, phi).value - a) < 1e-9 * std::max(1.0, std::abs(a)));
      CHECK(std::abs(les(shuffled, phi).value - a) < 1e-12 * std::max(1.0, std::abs(a)));
    }
  }
}

TEST_CASE("les_lln_limit moments and oracle agreement") {
  for (double c : {0.1, 0.25, 0.5, 0.9}) {
    const auto law = MPLaw::from_ratio(c);
    CHECK(les_lln_limit(TestFunction::identity(), law) == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(les_lln_limit(TestFunction::constant(), law) == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(les_lln_limit(TestFunction::nagao(), law) == doctest::Approx(c).epsilon(1e-10));
  }
  for (double c : {0.25, 0.5}) {
    const auto law = MPLaw::from_ratio(c);
    const oracle::MP ref(c);
    for (const auto& phi : {TestFunction::lrt(), TestFunction::wasserstein(), TestFunction::nagao(),
                            TestFunction::von_neumann_entropy()}) {
      CHECK(les_lln_limit(phi, law) == doctest::Approx(ref.integrate(as_fn(phi), ref.b)).epsilon(1e-9));
    }
  }
  const auto tab = TestFunction::tabulated({0.0, 1.0}, {0.0, 1.0});
  CHECK_THROWS_AS(les_lln_limit(tab, MPLaw::from_ratio(0.25)), Error);
}

TEST_CASE("clt_variance closed forms") {
  CHECK(clt_variance(TestFunction::constant(), {0.3, 0.0, 128}) == doctest::Approx(0.0));
  CHECK(std::abs(clt_variance(TestFunction::identity(), {0.5, 0.0, 128}) - 1.0) < 1e-6);
  CHECK(std::abs(clt_variance(TestFunction::identity(), {0.25, 0.0, 128}) - 0.5) < 1e-6);
  // Var(trace) = c (2 + k4) for standardized entries.
  CHECK(std::abs(clt_variance(TestFunction::identity(), {0.25, -1.2, 128}) - 0.25 * 0.8) < 1e-6);
  CHECK(std::abs(clt_variance(TestFunction::identity(), {0.25, -2.0, 128})) < 1e-6);
  CHECK_THROWS_AS(clt_variance(TestFunction::identity(), {0.25, 0.0, 16}), Error);
  CHECK_THROWS_AS(clt_variance(TestFunction::identity(), {1.5, 0.0, 128}), Error);
}

TEST_CASE("shannon_entropy") {
  CHECK(shannon_entropy(std::vector<double>{1, 0, 0}) == 0.0);
  CHECK(shannon_entropy(std::vector<double>{0.5, 0.5}, 2.0) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(shannon_entropy(std::vector<double>{0.25, 0.25, 0.25, 0.25}, 2.0) == doctest::Approx(2.0).epsilon(1e-15));
  CHECK_THROWS_AS(shannon_entropy(std::vector<double>{1.2, -0.2}), Error);
  CHECK_THROWS_AS(shannon_entropy(std::vector<double>{0.5, 0.6}), Error);
}

TEST_CASE("von_neumann_entropy") {
  const std::size_t n = 5;
  CHECK(von_neumann_entropy({(1.0 / n) * Matrix::identity(n), 0, CovNormalization::PerSample}) ==
        doctest::Approx(std::log(5.0)).epsilon(1e-14));
  Matrix proj(3, 3);
  const std::vector<double> v{0.6, 0.0, 0.8};
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j) proj(i, j) = v[i] * v[j];
  CHECK(std::abs(von_neumann_entropy({proj, 0, CovNormalization::PerSample})) < 1e-10);
  const double h = -0.25 * std::log(0.25) - 0.75 * std::log(0.75);
  CHECK(von_neumann_entropy({Matrix(2, 2, {1, 0, 0, 3}), 0, CovNormalization::PerSample}) ==
        doctest::Approx(h).epsilon(1e-14));
  CHECK(h == doctest::Approx(0.5623).epsilon(1e-4));
  CHECK_THROWS_AS(von_neumann_entropy({Matrix(2, 2), 0, CovNormalization::PerSample}), Error);
}

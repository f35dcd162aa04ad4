#include <doctest.h>

#include <cmath>
#include <complex>
#include <limits>
#include <stdexcept>
#include <vector>

#include "flexarray/beamformer.hpp"

using namespace flexarray;

TEST_CASE("quantize rounds to the 2^-10 grid") {
  CHECK(quantize(0.12345).value() == doctest::Approx(0.1230469).epsilon(1e-6));
  CHECK(quantize(0.12345).raw == 126);
  CHECK(quantize(-0.12345).raw == (0x8000 | 126));
  // ties go away from zero
  CHECK(quantize(0.5 / 1024).raw == 1);
  CHECK(quantize(-0.5 / 1024).signed_lsbs() == -1);
  CHECK(quantize(0.49 / 1024).raw == 0);
}

TEST_CASE("quantize is exact on every representable value") {
  for (int m = -32767; m <= 32767; ++m) {
    const double x = m / 1024.0;
    const QWord q = quantize(x);
    REQUIRE(q.signed_lsbs() == m);
    REQUIRE(q.value() == x);
  }
}

TEST_CASE("quantize saturates and never emits negative zero") {
  CHECK(quantize(1e9).raw == 0x7FFF);
  CHECK(quantize(-1e9).raw == 0xFFFF);
  CHECK(quantize(QWord::kMax + 0.4 / 1024).value() == QWord::kMax);
  CHECK(quantize(std::numeric_limits<double>::infinity()).value() == QWord::kMax);
  CHECK(quantize(-std::numeric_limits<double>::infinity()).value() == -QWord::kMax);
  CHECK(quantize(-0.0).raw == 0);
  CHECK(quantize(-1e-6).raw == 0);
  CHECK_THROWS_AS(quantize(std::nan("")), std::invalid_argument);
}

TEST_CASE("quantize is monotone") {
  double prev = -40.0;
  int prev_q = quantize(prev).signed_lsbs();
  for (double x = -40.0; x <= 40.0; x += 0.000377) {
    const int q = quantize(x).signed_lsbs();
    REQUIRE(q >= prev_q);
    prev_q = q;
  }
}

TEST_CASE("bf_out sums channels") {
  const std::vector<std::complex<double>> s{{1, 0}, {0, 1}, {-1, 0}, {0, 2}};
  CHECK(bf_out(s) == std::complex<double>(0, 3));
  CHECK_THROWS(bf_out(std::span<const std::complex<double>>{}));
}

TEST_CASE("objective kinds") {
  const BfSample s{3.0, -4.0, 0.0};
  CHECK(objective(s) == 5.0);
  CHECK(objective(s, ObjectiveKind::Power) == 25.0);
  CHECK(objective(s, ObjectiveKind::InPhase) == 3.0);
  const std::vector<BfSample> w{{3, 4, 0}, {0, 1, 0}};
  CHECK(objective(w) == 3.0);
  CHECK(objective(std::span<const BfSample>{}) == 0.0);
}

TEST_CASE("normalizer maps the coherent maximum to the target") {
  const BfNormalizer n(4 * 2.2387, 28.0);
  CHECK(n.digitize(4 * 2.2387).value() == doctest::Approx(28.0).epsilon(1e-3));
  CHECK(n.digitize(0.0).raw == 0);
  CHECK_THROWS(BfNormalizer(0.0));
  CHECK_THROWS(BfNormalizer(1.0, -1.0));
}

#include <cmath>
#include <sstream>
#include <string>

#include "doctest.h"
#include "oracles.hpp"
#include "resshift/error.hpp"
#include "resshift/rng.hpp"
#include "resshift/schedule.hpp"

using namespace resshift;

TEST_CASE("eta_one endpoint rule") {
  CHECK(eta_one(2.0) == doctest::Approx(4e-4).epsilon(1e-14));
  CHECK(eta_one(40.0) == doctest::Approx(1e-6).epsilon(1e-14));
  CHECK(eta_one(0.04) == 0.001);
  CHECK_THROWS_AS(eta_one(0.0), InvalidParameter);
  CHECK_THROWS_AS(eta_one(-1.0), InvalidParameter);
}

TEST_CASE("default schedule") {
  const auto s = build_schedule({15, 0.3, 2.0});
  CHECK(s.eta(0) == 0.0);
  CHECK(s.eta(1) == doctest::Approx(4e-4).epsilon(1e-14));
  CHECK(s.eta(15) == 0.999);
  CHECK(schedule_base(15, 2.0) == doctest::Approx(1.3224).epsilon(1e-4));
  CHECK(schedule_exponent(2, 15, 0.3) == doctest::Approx(std::pow(1.0 / 14, 0.3) * 14));
  CHECK(schedule_exponent(2, 15, 0.3) == doctest::Approx(6.341).epsilon(1e-3));
  for (int t = 1; t <= 15; ++t) CHECK(s.eta(t) > s.eta(t - 1));
}

TEST_CASE("two-step schedule has only endpoints") {
  const auto s = build_schedule({2, 1.0, 2.0});
  REQUIRE(s.etas().size() == 3);
  CHECK(s.etas()[0] == 0.0);
  CHECK(s.etas()[1] == doctest::Approx(4e-4).epsilon(1e-14));
  CHECK(s.etas()[2] == 0.999);
}

TEST_CASE("schedule matches the closed-form oracle on random configs") {
  Rng rng(2024);
  for (int i = 0; i < 50; ++i) {
    const int T = 2 + static_cast<int>(rng.below(199));
    const double p = rng.uniform(0.1, 3.0);
    const double kappa = rng.uniform(0.1, 50.0);
    CAPTURE(T);
    CAPTURE(p);
    CAPTURE(kappa);
    const auto s = build_schedule({T, p, kappa});
    const auto ref = oracle::schedule(T, p, kappa);
    for (int t = 1; t <= T; ++t) {
      CHECK(std::abs(s.eta(t) - static_cast<double>(ref[t])) <= 1e-10 * static_cast<double>(ref[t]));
      CHECK(s.alpha(t) == s.eta(t) - s.eta(t - 1));
    }
  }
}

TEST_CASE("invalid parameters") {
  CHECK_THROWS_AS(build_schedule({1, 0.3, 2.0}), InvalidParameter);
  CHECK_THROWS_AS(build_schedule({15, 0.0, 2.0}), InvalidParameter);
  CHECK_THROWS_AS(build_schedule({15, 0.3, -2.0}), InvalidParameter);
  CHECK_THROWS_AS(build_schedule({15, NAN, 2.0}), InvalidParameter);
  const auto s = build_schedule({});
  CHECK_THROWS_AS(s.alpha(0), StepError);
  CHECK_THROWS_AS(s.alpha(16), StepError);
  CHECK_THROWS_AS(s.eta(-1), StepError);
}

TEST_CASE("loss weights") {
  const auto s = build_schedule({15, 0.3, 2.0});
  CHECK_THROWS_AS(loss_weight(s, 1), UndefinedWeight);
  const auto ref = oracle::schedule(15, 0.3L, 2.0L);
  const long double w2 = (ref[2] - ref[1]) / (8.0L * ref[2] * ref[1]);
  CHECK(loss_weight(s, 2) == doctest::Approx(static_cast<double>(w2)).epsilon(1e-10));
  for (int t = 2; t <= 15; ++t) CHECK(loss_weight(s, t) > 0.0);
}

TEST_CASE("relative noise curve") {
  const auto s = build_schedule({15, 0.3, 2.0});
  const auto curve = relative_noise_curve(s);
  REQUIRE(curve.size() == 15);
  CHECK(curve.front().first == 1);
  CHECK(curve.front().second == doctest::Approx(0.04).epsilon(1e-12));
  CHECK(curve.back().second == doctest::Approx(2.0 * std::sqrt(0.999)).epsilon(1e-14));
  for (std::size_t i = 1; i < curve.size(); ++i) CHECK(curve[i].second > curve[i - 1].second);
}

TEST_CASE("schedule csv") {
  std::ostringstream os;
  write_schedule_csv(os, build_schedule({15, 0.3, 2.0}));
  std::istringstream is(os.str());
  std::string line;
  std::getline(is, line);
  CHECK(line == "t,eta,alpha,rel_noise");
  int rows = 0;
  std::string last;
  while (std::getline(is, line)) {
    ++rows;
    last = line;
  }
  CHECK(rows == 15);
  CHECK(last.rfind("15,0.999,", 0) == 0);
}

#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>

#include "aspectra/spikem.hpp"

using namespace aspectra;

TEST_CASE("diffusion simulation matches hand-propagated values", "[spikem]") {
  SpikeMParams p;
  p.n_pop = 1000.0;
  p.beta = 0.001;
  p.n_b = 3;
  p.s_b = 2.0;
  p.eps = 0.0;
  p.p_a = 0.0;
  auto db = spikem_simulate(p, 8);
  REQUIRE(db.size() == 8);
  for (int i = 0; i <= 3; ++i) CHECK(db[size_t(i)] == 0.0);
  // first infected day: u * s_b * beta * 1^-1.5
  CHECK(db[4] == Catch::Approx(2.0).epsilon(1e-14));
  CHECK(db[5] == Catch::Approx(2.7016925676241748).epsilon(1e-14));
  CHECK(db[6] == Catch::Approx(3.775862719394605).epsilon(1e-14));
  CHECK(db[7] == Catch::Approx(5.320465282343777).epsilon(1e-14));
}

TEST_CASE("periodic modulation and background noise enter the update", "[spikem]") {
  SpikeMParams p;
  p.n_pop = 500.0;
  p.beta = 0.002;
  p.n_b = 0;
  p.s_b = 1.0;
  p.eps = 0.1;
  p.p_a = 0.5;
  p.p_p = 7.0;
  p.p_s = 1.0;
  auto db = spikem_simulate(p, 6);
  CHECK(db[0] == 0.0);
  CHECK(db[1] == Catch::Approx(1.636210351700003).epsilon(1e-14));
  CHECK(db[2] == Catch::Approx(2.53519706826254).epsilon(1e-14));
  CHECK(db[3] == Catch::Approx(4.111501879482393).epsilon(1e-14));
  CHECK(db[4] == Catch::Approx(8.117793361192234).epsilon(1e-14));
  CHECK(db[5] == Catch::Approx(14.067296222417868).epsilon(1e-14));
}

TEST_CASE("total volume never exceeds the susceptible population", "[spikem]") {
  Rng rng(2024);
  for (int trial = 0; trial < 200; ++trial) {
    SpikeMParams p;
    p.n_pop = rng.uniform(10.0, 5000.0);
    p.beta = rng.uniform(0.0, 3.0);
    p.n_b = rng.uniform_int(0, 10);
    p.s_b = rng.uniform(0.0, 50.0);
    p.eps = rng.uniform(0.0, 5.0);
    p.p_a = rng.uniform(0.0, 0.95);
    p.p_p = rng.uniform(2.0, 14.0);
    p.p_s = rng.uniform(0.0, 14.0);
    int n_days = rng.uniform_int(p.n_b + 1, 90);
    auto db = spikem_simulate(p, n_days);
    double total = 0;
    for (double v : db) {
      CHECK(v >= 0.0);
      total += v;
    }
    CHECK(total <= p.n_pop + 1e-9);
  }
}

TEST_CASE("parameter validation rejects out-of-range values", "[spikem]") {
  auto bad = [](auto mutate) {
    SpikeMParams p;
    mutate(p);
    return p;
  };
  CHECK_THROWS_AS(bad([](SpikeMParams& p) { p.n_pop = 0.0; }).validate(), std::invalid_argument);
  CHECK_THROWS_AS(bad([](SpikeMParams& p) { p.beta = -0.1; }).validate(), std::invalid_argument);
  CHECK_THROWS_AS(bad([](SpikeMParams& p) { p.n_b = -1; }).validate(), std::invalid_argument);
  CHECK_THROWS_AS(bad([](SpikeMParams& p) { p.s_b = -1.0; }).validate(), std::invalid_argument);
  CHECK_THROWS_AS(bad([](SpikeMParams& p) { p.eps = -1.0; }).validate(), std::invalid_argument);
  CHECK_THROWS_AS(bad([](SpikeMParams& p) { p.p_a = 1.0; }).validate(), std::invalid_argument);
  CHECK_THROWS_AS(bad([](SpikeMParams& p) { p.p_p = 0.0; }).validate(), std::invalid_argument);
  SpikeMParams ok;
  CHECK_THROWS_AS(spikem_simulate(ok, 0), std::invalid_argument);
  ok.n_b = 5;
  CHECK_THROWS_AS(spikem_simulate(ok, 5), std::invalid_argument);
}

TEST_CASE("fitting a simulated burst recovers the curve", "[spikem]") {
  SpikeMParams truth;
  truth.n_pop = 1000.0;
  truth.beta = 0.0012;  // u * beta near one: the burst unfolds over days
  truth.n_b = 5;
  truth.s_b = 60.0;
  truth.eps = 0.5;
  truth.p_a = 0.1;
  truth.p_p = 7.0;
  truth.p_s = 1.0;
  auto obs = spikem_simulate(truth, 45);
  double peak = *std::max_element(obs.begin(), obs.end());
  REQUIRE(peak > 1.0);

  SpikeMFit fit = spikem_fit(obs);
  CHECK(fit.converged);
  auto resim = spikem_simulate(fit.params, int(obs.size()));
  double sse = 0;
  for (size_t i = 0; i < obs.size(); ++i) sse += (resim[i] - obs[i]) * (resim[i] - obs[i]);
  double rmse = std::sqrt(sse / double(obs.size()));
  CHECK(rmse < 0.01 * peak);

  // same seed gives an identical fit
  SpikeMFit fit2 = spikem_fit(obs);
  CHECK(fit2.sse == fit.sse);
  CHECK(fit2.params.n_pop == fit.params.n_pop);
  CHECK(fit2.params.beta == fit.params.beta);
  CHECK(fit2.params.n_b == fit.params.n_b);
}

TEST_CASE("degenerate observation series fit cleanly", "[spikem]") {
  std::vector<double> zeros(20, 0.0);
  SpikeMFit fit = spikem_fit(zeros);
  CHECK(fit.converged);
  CHECK(fit.sse == 0.0);
  CHECK(fit.params.beta == 0.0);

  CHECK_THROWS_AS(spikem_fit(std::vector<double>(13, 1.0)), std::invalid_argument);
}

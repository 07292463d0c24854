#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <set>

#include "aspectra/eventclf.hpp"

using namespace aspectra;

TEST_CASE("cell indexing is a bijection over type and phase", "[eventclf]") {
  std::set<int> seen;
  for (EventType ty : {EventType::breaking, EventType::anticipated})
    for (EventTime ti : {EventTime::before, EventTime::during, EventTime::after}) {
      int c = cell_index(ty, ti);
      CHECK(c >= 0);
      CHECK(c < kNumTimeTypeCells);
      CHECK(cell_type(c) == ty);
      CHECK(cell_time(c) == ti);
      seen.insert(c);
    }
  CHECK(seen.size() == 6);
  CHECK(event_type_from_string("breaking") == EventType::breaking);
  CHECK(std::string(to_string(EventTime::during)) == "during");
  CHECK_THROWS_AS(event_type_from_string("sudden"), std::invalid_argument);
  CHECK_THROWS_AS(event_time_from_string("later"), std::invalid_argument);
}

TEST_CASE("standardizer drops constant columns and zero-centers the rest", "[eventclf]") {
  std::vector<std::vector<double>> rows = {{1, 5, 2}, {3, 5, 4}};
  Standardizer s = Standardizer::fit(rows);
  REQUIRE(s.kept == std::vector<size_t>{0, 2});
  REQUIRE(s.dropped == std::vector<size_t>{1});
  CHECK(s.mean[0] == 2.0);
  CHECK(s.mean[2] == 3.0);
  CHECK(s.stddev[0] == 1.0);  // population deviation
  auto z = s.transform({5, 9, 3});
  REQUIRE(z.size() == 2);
  CHECK(z[0] == 3.0);
  CHECK(z[1] == 0.0);

  Standardizer back = Standardizer::from_json(s.to_json());
  CHECK(back.transform({5, 9, 3}) == z);

  CHECK_THROWS_AS(Standardizer::fit({}), std::invalid_argument);
  CHECK_THROWS_AS(Standardizer::fit({{1, 2}, {1}}), std::invalid_argument);
  CHECK_THROWS_AS(Standardizer::fit({{7, 7}, {7, 7}}), std::runtime_error);
  CHECK_THROWS_AS(s.transform({1.0}), std::invalid_argument);
}

TEST_CASE("sigmoid calibration is monotone and balanced on symmetric data", "[eventclf]") {
  PlattScaler p = PlattScaler::fit({-2.0, -1.5, 1.5, 2.0}, {0, 0, 1, 1});
  CHECK(p.prob(2.0) > 0.6);
  CHECK(p.prob(-2.0) < 0.4);
  CHECK(p.prob(2.0) > p.prob(0.0));
  CHECK(p.prob(0.0) > p.prob(-2.0));

  PlattScaler sym = PlattScaler::fit({-1.0, 1.0}, {0, 1});
  CHECK(sym.prob(0.0) == Catch::Approx(0.5).margin(1e-3));

  CHECK_THROWS_AS(PlattScaler::fit({}, {}), std::invalid_argument);
  CHECK_THROWS_AS(PlattScaler::fit({1.0}, {1, 0}), std::invalid_argument);
}

namespace {

struct PlantedSet {
  std::vector<std::vector<double>> rows;
  std::vector<EventType> types;
  std::vector<EventTime> times;
};

// feature 0 decides the type, feature 1 decides the phase, feature 2 is noise
PlantedSet planted_set(int per_cell, uint64_t seed) {
  PlantedSet out;
  Rng rng(seed);
  for (int cell = 0; cell < kNumTimeTypeCells; ++cell) {
    EventType ty = cell_type(cell);
    EventTime ti = cell_time(cell);
    for (int i = 0; i < per_cell; ++i) {
      double x0 = (ty == EventType::anticipated ? 2.0 : -2.0) + rng.normal(0.0, 0.3);
      double x1 = 3.0 * double(int(ti) - 1) + rng.normal(0.0, 0.3);
      out.rows.push_back({x0, x1, rng.normal(0.0, 1.0)});
      out.types.push_back(ty);
      out.times.push_back(ti);
    }
  }
  return out;
}

}  // namespace

TEST_CASE("max-margin type model separates planted classes", "[eventclf]") {
  PlantedSet data = planted_set(10, 7);
  Stage1Model m = train_stage1(data.rows, data.types);
  int correct = 0;
  for (size_t i = 0; i < data.rows.size(); ++i) {
    auto pr = m.probs(data.rows[i]);
    CHECK(pr[0] + pr[1] == Catch::Approx(1.0).margin(1e-12));
    if (m.predict(data.rows[i]) == data.types[i]) ++correct;
  }
  CHECK(correct == int(data.rows.size()));

  CHECK_THROWS_AS(train_stage1({}, {}), std::invalid_argument);
  CHECK_THROWS_AS(
      train_stage1({{1.0, 0.0}, {2.0, 1.0}}, {EventType::breaking, EventType::breaking}),
      std::invalid_argument);
}

TEST_CASE("multinomial logistic model fits separable classes", "[eventclf]") {
  std::vector<std::vector<double>> rows;
  std::vector<int> labels;
  Rng rng(5);
  for (int c = 0; c < 3; ++c)
    for (int i = 0; i < 15; ++i) {
      double a = c == 1 ? 4.0 : (c == 2 ? -4.0 : 0.0);
      double b = c == 0 ? 4.0 : -2.0;
      rows.push_back({a + rng.normal(0.0, 0.2), b + rng.normal(0.0, 0.2)});
      labels.push_back(c);
    }
  SoftmaxModel m = train_softmax(rows, labels, 3);
  for (size_t i = 0; i < rows.size(); ++i) {
    CHECK(m.predict(rows[i]) == labels[i]);
    auto p = m.probs(rows[i]);
    double sum = p[0] + p[1] + p[2];
    CHECK(sum == Catch::Approx(1.0).margin(1e-12));
  }
  CHECK_THROWS_AS(train_softmax(rows, labels, 4), std::invalid_argument);  // class 3 missing
  labels[0] = 9;
  CHECK_THROWS_AS(train_softmax(rows, labels, 3), std::invalid_argument);
}

TEST_CASE("cascaded model predicts planted type and phase", "[eventclf]") {
  PlantedSet data = planted_set(12, 21);
  CascadeModel m = train_cascade(data.rows, data.types, data.times);
  int ty_ok = 0, ti_ok = 0;
  for (size_t i = 0; i < data.rows.size(); ++i) {
    if (m.predict_type(data.rows[i]) == data.types[i]) ++ty_ok;
    if (m.predict_time(data.rows[i]) == data.times[i]) ++ti_ok;
  }
  CHECK(ty_ok == int(data.rows.size()));
  CHECK(ti_ok >= int(data.rows.size() * 95 / 100));

  // persistence keeps decisions bit-stable
  CascadeModel back = cascade_from_json(cascade_to_json(m));
  for (size_t i = 0; i < data.rows.size(); ++i) {
    CHECK(back.predict_type(data.rows[i]) == m.predict_type(data.rows[i]));
    CHECK(back.predict_time(data.rows[i]) == m.predict_time(data.rows[i]));
    CHECK(back.stage1.decision(data.rows[i]) == m.stage1.decision(data.rows[i]));
  }
  CHECK_THROWS_AS(cascade_from_json(nlohmann::json{{"format", "other"}}), std::runtime_error);
}

namespace {

// identity projection: zero-mean unit-deviation columns, all kept
MixtureModel toy_mixture(std::vector<std::vector<double>> centroids) {
  MixtureModel m;
  m.standardizer.mean = {0.0, 0.0};
  m.standardizer.stddev = {1.0, 1.0};
  m.standardizer.kept = {0, 1};
  m.scale = {1.0, 1.0};
  m.centroids = std::move(centroids);
  return m;
}

}  // namespace

TEST_CASE("soft assignment matches hand-worked distance ratios", "[eventclf]") {
  // squared distances from the origin: 0 then five cells at 4
  MixtureModel a =
      toy_mixture({{0, 0}, {2, 0}, {0, 2}, {-2, 0}, {0, -2}, {2, 0}});
  TimeTypeDistribution da = soft_assign(a, {0.0, 0.0});
  CHECK(da.p[0] == 1.0);
  for (int c = 1; c < 6; ++c) CHECK(da.p[size_t(c)] == 0.0);
  CHECK(da.sum() == 1.0);

  // squared distances 1, 2, 4 and three farthest cells: raw 0.75/0.5/0 -> 0.6/0.4
  MixtureModel b =
      toy_mixture({{1, 0}, {1, 1}, {2, 0}, {0, 2}, {-2, 0}, {0, -2}});
  TimeTypeDistribution db = soft_assign(b, {0.0, 0.0});
  CHECK(db.p[0] == 0.6);
  CHECK(db.p[1] == 0.4);
  for (int c = 2; c < 6; ++c) CHECK(db.p[size_t(c)] == 0.0);

  // all cells equidistant: both the zero-distance and zero-weight branches
  MixtureModel eq0 = toy_mixture(std::vector<std::vector<double>>(6, {1.0, 1.0}));
  TimeTypeDistribution de = soft_assign(eq0, {1.0, 1.0});
  for (double v : de.p) CHECK(v == Catch::Approx(1.0 / 6.0));
  MixtureModel ring =
      toy_mixture({{2, 0}, {0, 2}, {-2, 0}, {0, -2}, {2, 0}, {0, 2}});
  TimeTypeDistribution dr = soft_assign(ring, {0.0, 0.0});
  for (double v : dr.p) CHECK(v == Catch::Approx(1.0 / 6.0));

  MixtureModel unfit;
  CHECK_THROWS_AS(soft_assign(unfit, {0.0, 0.0}), std::invalid_argument);
}

TEST_CASE("mixture fit recovers planted cell blobs", "[eventclf]") {
  std::vector<std::vector<double>> rows;
  std::vector<int> labels;
  std::vector<std::vector<double>> centers = {{0, 0}, {10, 0}, {20, 0},
                                              {0, 10}, {10, 10}, {20, 10}};
  Rng rng(3);
  for (int cell = 0; cell < 6; ++cell)
    for (int i = 0; i < 20; ++i) {
      rows.push_back({centers[size_t(cell)][0] + rng.normal(0.0, 0.1),
                      centers[size_t(cell)][1] + rng.normal(0.0, 0.1)});
      labels.push_back(cell);
    }
  std::vector<double> importance = {1.0, 1.0};
  MixtureModel m = fit_mixture(rows, labels, importance);
  CHECK(m.converged);

  for (int cell = 0; cell < 6; ++cell) {
    TimeTypeDistribution d = soft_assign(m, centers[size_t(cell)]);
    CHECK(d.sum() == Catch::Approx(1.0).margin(1e-9));
    int arg = 0;
    for (int c = 1; c < 6; ++c)
      if (d.p[size_t(c)] > d.p[size_t(arg)]) arg = c;
    CHECK(arg == cell);
  }

  // distributions remain normalized across arbitrary probe points
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<double> x = {rng.uniform(-30.0, 50.0), rng.uniform(-30.0, 50.0)};
    TimeTypeDistribution d = soft_assign(m, x);
    CHECK(d.sum() == Catch::Approx(1.0).margin(1e-9));
    for (double v : d.p) CHECK(v >= 0.0);
  }

  MixtureModel back = mixture_from_json(mixture_to_json(m));
  TimeTypeDistribution d1 = soft_assign(m, {5.0, 5.0});
  TimeTypeDistribution d2 = soft_assign(back, {5.0, 5.0});
  for (int c = 0; c < 6; ++c) CHECK(d1.p[size_t(c)] == d2.p[size_t(c)]);

  CHECK_THROWS_AS(fit_mixture({{1, 2}, {3, 4}}, {0, 1}, {}), std::invalid_argument);
  CHECK_THROWS_AS(fit_mixture(rows, labels, {0.0, 0.0}), std::invalid_argument);
  CHECK_THROWS_AS(fit_mixture(rows, {0, 1}, importance), std::invalid_argument);
  CHECK_THROWS_AS(fit_mixture(rows, labels, {1.0, 1.0, 1.0}), std::invalid_argument);
  auto bad_labels = labels;
  bad_labels[0] = 6;
  CHECK_THROWS_AS(fit_mixture(rows, bad_labels, importance), std::invalid_argument);
}

TEST_CASE("classification metrics match hand counts", "[eventclf]") {
  ClassMetrics m = classification_metrics({0, 1, 1, 2}, {0, 1, 2, 2}, 3);
  CHECK(m.accuracy == 0.75);
  // per-class f1: 1.0 (n=1), 2/3 (n=2), 2/3 (n=1) -> weighted 0.75
  CHECK(m.weighted_f1 == Catch::Approx(0.75));

  ClassMetrics perfect = classification_metrics({1, 0, 1}, {1, 0, 1}, 2);
  CHECK(perfect.accuracy == 1.0);
  CHECK(perfect.weighted_f1 == 1.0);

  CHECK_THROWS_AS(classification_metrics({}, {}, 2), std::invalid_argument);
  CHECK_THROWS_AS(classification_metrics({0, 1}, {0}, 2), std::invalid_argument);
}

TEST_CASE("rolling evaluation trains strictly on earlier bins", "[eventclf]") {
  // chronological stream: every bin carries all six cells
  std::vector<std::vector<double>> rows;
  std::vector<EventType> types;
  std::vector<EventTime> times;
  Rng rng(11);
  for (int b = 0; b < 10; ++b) {
    PlantedSet chunk = planted_set(2, uint64_t(100 + b));
    for (size_t i = 0; i < chunk.rows.size(); ++i) {
      rows.push_back(chunk.rows[i]);
      types.push_back(chunk.types[i]);
      times.push_back(chunk.times[i]);
    }
  }
  RollingReport rep = rolling_classification(rows, types, times, 10, 4);
  REQUIRE(rep.bins.size() == 4);
  size_t n = rows.size();
  for (int t = 0; t < 4; ++t) {
    const auto& b = rep.bins[size_t(t)];
    CHECK(b.test_bin == 6 + t);
    CHECK(b.n_train == size_t(b.test_bin) * n / 10);
    CHECK(b.n_test == n / 10);
    CHECK(b.type_metrics.accuracy >= 0.9);
    CHECK(b.time_metrics.accuracy >= 0.8);
  }
  CHECK(rep.type_avg.accuracy >= 0.9);
  CHECK(rep.time_avg.accuracy >= 0.8);

  CHECK_THROWS_AS(rolling_classification({{1.0}}, {EventType::breaking}, {EventTime::before}),
                  std::invalid_argument);
}

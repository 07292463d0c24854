#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <sstream>

#include "aspectra/ranker.hpp"

using namespace aspectra;

namespace {

ModelSet identity_model2() {
  ModelSet m;
  m.standardizer.mean = {0.0, 0.0};
  m.standardizer.stddev = {1.0, 1.0};
  m.standardizer.kept = {0, 1};
  for (auto& wc : m.w) wc.assign(2, 0.0);
  return m;
}

TimeTypeDistribution make_dist(std::array<double, 6> p) {
  TimeTypeDistribution d;
  d.p = p;
  return d;
}

}  // namespace

TEST_CASE("mixture-weighted score blends the cell models", "[ranker]") {
  ModelSet m = identity_model2();
  m.w[0] = {2.0, 0.0};
  m.w[1] = {-1.0, 0.0};
  TimeTypeDistribution dist = make_dist({0.6, 0.4, 0, 0, 0, 0});
  // 0.6 * 2 + 0.4 * (-1)
  CHECK(m.score({1.0, 0.0}, dist) == Catch::Approx(0.8).epsilon(1e-12));
  CHECK(ensemble_score(m, {1.0, 0.0}, dist) == Catch::Approx(0.8).epsilon(1e-12));

  // cells with zero probability never contribute, whatever their weights hold
  m.w[5] = {1e18, 1e18};
  CHECK(m.score({1.0, 0.0}, dist) == Catch::Approx(0.8).epsilon(1e-12));

  CHECK_THROWS_AS(m.score({1.0, 0.0, 3.0}, dist), std::invalid_argument);
}

TEST_CASE("ranked lists sort by score with lexicographic ties", "[ranker]") {
  RankedList list = {{"b", 1.0}, {"c", 2.0}, {"a", 1.0}};
  sort_ranked(list);
  REQUIRE(list.size() == 3);
  CHECK(list[0].aspect == "c");
  CHECK(list[1].aspect == "a");
  CHECK(list[2].aspect == "b");

  ModelSet m = identity_model2();
  m.w[0] = {1.0, 0.0};
  TimeTypeDistribution dist = make_dist({1, 0, 0, 0, 0, 0});
  auto ranked = rank_candidates(m, {{"x", {1.0, 0.0}}, {"y", {3.0, 0.0}}}, dist);
  CHECK(ranked[0].aspect == "y");
  CHECK(ranked[0].score == 3.0);
  CHECK_THROWS_AS(rank_candidates(m, {{"x", {1.0, 0.0}}, {"x", {2.0, 0.0}}}, dist),
                  std::invalid_argument);
}

namespace {

struct PlantedRanking {
  std::vector<std::vector<double>> rows;
  std::vector<PairwisePreference> prefs;
  std::vector<TimeTypeDistribution> dists;
};

// row quality grows with feature 0; preferences demand at least a gap of two
PlantedRanking planted_ranking() {
  PlantedRanking out;
  Rng rng(17);
  for (int i = 0; i < 12; ++i)
    out.rows.push_back({double(i), rng.normal(0.0, 0.1), rng.normal(0.0, 0.1)});
  out.dists.push_back(make_dist({1.0 / 6, 1.0 / 6, 1.0 / 6, 1.0 / 6, 1.0 / 6, 1.0 / 6}));
  out.dists.push_back(make_dist({0, 0, 1, 0, 0, 0}));
  out.dists.push_back(make_dist({0.5, 0.5, 0, 0, 0, 0}));
  size_t next = 0;
  for (size_t i = 0; i < out.rows.size(); ++i)
    for (size_t j = 0; j < out.rows.size(); ++j)
      if (out.rows[i][0] >= out.rows[j][0] + 2.0)
        out.prefs.push_back({i, j, next++ % out.dists.size()});
  return out;
}

}  // namespace

TEST_CASE("training orders separable preferences perfectly", "[ranker]") {
  PlantedRanking data = planted_ranking();
  ModelSet m = train_ensemble(data.rows, data.prefs, data.dists);
  REQUIRE(m.epoch_objectives.size() == 50);
  CHECK(m.objective == m.epoch_objectives.back());
  CHECK(m.epoch_objectives.back() < m.epoch_objectives.front());

  size_t correct = 0;
  for (const auto& p : data.prefs) {
    double si = m.score(data.rows[p.better], data.dists[p.dist]);
    double sj = m.score(data.rows[p.worse], data.dists[p.dist]);
    if (si > sj) ++correct;
  }
  CHECK(correct == data.prefs.size());
}

TEST_CASE("one-hot distributions reduce the ensemble to independent cells", "[ranker]") {
  Rng rng(23);
  std::vector<std::vector<double>> rows;
  for (int i = 0; i < 20; ++i)
    rows.push_back({rng.normal(0, 1), rng.normal(0, 1), rng.normal(0, 1)});
  std::vector<TimeTypeDistribution> dists;
  for (int c = 0; c < 6; ++c) {
    std::array<double, 6> p{};
    p[size_t(c)] = 1.0;
    dists.push_back(make_dist(p));
  }
  std::vector<PairwisePreference> prefs;
  for (int k = 0; k < 60; ++k) {
    size_t i = size_t(rng.uniform_int(0, 19));
    size_t j = size_t(rng.uniform_int(0, 19));
    if (i == j) continue;
    prefs.push_back({i, j, size_t(rng.uniform_int(0, 5))});
  }
  REQUIRE(prefs.size() > 30);
  ModelSet m = train_ensemble(rows, prefs, dists, 20.0, 10);

  // the joint objective must equal the sum of per-cell hinge objectives
  double total = 0;
  for (size_t c = 0; c < kNumTimeTypeCells; ++c) {
    double reg = 0;
    for (double v : m.w[c]) reg += v * v;
    double hinge = 0;
    for (const auto& p : prefs) {
      if (p.dist != c) continue;
      double margin = m.score(rows[p.better], dists[c]) - m.score(rows[p.worse], dists[c]);
      hinge += std::max(0.0, 1.0 - margin);
    }
    total += 0.5 * reg + m.C * hinge;
  }
  CHECK(ensemble_objective(m, rows, prefs, dists) == Catch::Approx(total).epsilon(1e-9));
}

TEST_CASE("trainer rejects malformed inputs", "[ranker]") {
  PlantedRanking data = planted_ranking();
  CHECK_THROWS_AS(train_ensemble({}, data.prefs, data.dists), std::invalid_argument);
  CHECK_THROWS_AS(train_ensemble(data.rows, {}, data.dists), std::invalid_argument);
  CHECK_THROWS_AS(train_ensemble(data.rows, {{0, 0, 0}}, data.dists), std::invalid_argument);
  CHECK_THROWS_AS(train_ensemble(data.rows, {{0, 99, 0}}, data.dists), std::invalid_argument);
  CHECK_THROWS_AS(train_ensemble(data.rows, {{0, 1, 99}}, data.dists), std::invalid_argument);
  auto bad = data.rows;
  bad[0][0] = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(train_ensemble(bad, data.prefs, data.dists), std::invalid_argument);

  // C = 0 short-circuits to the zero model
  ModelSet zero = train_ensemble(data.rows, data.prefs, data.dists, 0.0);
  CHECK(zero.objective == 0.0);
  CHECK(zero.score(data.rows[0], data.dists[0]) == 0.0);
}

TEST_CASE("masked ranker learns from its feature subset only", "[ranker]") {
  Rng rng(9);
  std::vector<std::vector<double>> rows;
  for (int i = 0; i < 14; ++i)
    rows.push_back({rng.normal(0, 1), rng.normal(0, 1), double(i), 7.0});  // col 3 constant
  std::vector<PairwisePreference> prefs;
  for (size_t i = 0; i < rows.size(); ++i)
    for (size_t j = 0; j < rows.size(); ++j)
      if (rows[i][2] >= rows[j][2] + 2.0) prefs.push_back({i, j, 0});

  SingleRanker m = train_single(rows, prefs, {2, 3});
  CHECK(m.mask == std::vector<size_t>{2, 3});
  // the constant column is dropped; sub-vector index 0 is original feature 2
  CHECK(m.standardizer.kept == std::vector<size_t>{0});
  CHECK(m.mask[m.standardizer.kept[0]] == 2);
  REQUIRE(m.w.size() == 1);
  CHECK(m.w[0] > 0.0);
  size_t correct = 0;
  for (const auto& p : prefs)
    if (m.score(rows[p.better]) > m.score(rows[p.worse])) ++correct;
  CHECK(correct == prefs.size());
  CHECK(m.objective == Catch::Approx(single_objective(m, rows, prefs)));

  CHECK_THROWS_AS(train_single(rows, prefs, {}), std::invalid_argument);
  CHECK_THROWS_AS(train_single(rows, {}, {2}), std::invalid_argument);
  CHECK_THROWS_AS(train_single(rows, prefs, {9}), std::invalid_argument);
  CHECK_THROWS_AS(m.score({1.0, 2.0}), std::invalid_argument);
}

namespace {

LogIndex acme_index() {
  std::vector<QueryRecord> q;
  std::vector<std::optional<ClickRecord>> c;
  auto add = [&](const std::string& terms, Day d, int n) {
    for (int i = 0; i < n; ++i) {
      q.push_back({"u", terms, d});
      c.push_back(std::nullopt);
    }
  };
  add("acme cup", 0, 2);
  add("other", 1, 4);
  add("acme cup", 2, 3);
  add("acme news", 2, 1);
  IngestOptions opts;
  opts.min_qf = 1;
  opts.min_click = 1;
  return LogIndex::from_records(q, c, opts, nullptr);
}

}  // namespace

TEST_CASE("popularity baselines rank by cumulative and windowed counts", "[ranker]") {
  LogIndex idx = acme_index();
  std::vector<std::string> cands = {"acme cup", "acme news", "other"};

  auto mle = baseline_mle(cands, idx, 2);
  REQUIRE(mle.size() == 3);
  CHECK(mle[0].aspect == "acme cup");
  CHECK(mle[0].score == 5.0);
  CHECK(mle[1].aspect == "other");
  CHECK(mle[2].aspect == "acme news");

  // early cut-off: zero-score ties break lexicographically
  auto early = baseline_mle(cands, idx, 0);
  CHECK(early[0].aspect == "acme cup");
  CHECK(early[1].aspect == "acme news");
  CHECK(early[2].aspect == "other");

  auto win = baseline_mle_w(cands, idx, 2, 2);  // days 1..2
  CHECK(win[0].aspect == "other");
  CHECK(win[0].score == 4.0);
  CHECK(win[1].aspect == "acme cup");
  CHECK(win[1].score == 3.0);
  CHECK_THROWS_AS(baseline_mle_w(cands, idx, 2, 0), std::invalid_argument);
}

TEST_CASE("last-n baseline walks the stream backwards with truncation", "[ranker]") {
  LogIndex idx = acme_index();
  std::vector<std::string> cands = {"acme cup", "acme news", "other"};
  std::set<std::string> aliases = {"acme"};

  // newest first: 1x news, then only 2 of the 3 cup records fit into N=3
  auto lnq = baseline_lnq(cands, idx, 2, aliases, 3);
  CHECK(lnq[0].aspect == "acme cup");
  CHECK(lnq[0].score == 2.0);
  CHECK(lnq[1].aspect == "acme news");
  CHECK(lnq[1].score == 1.0);
  CHECK(lnq[2].score == 0.0);

  // records after t are invisible
  auto past = baseline_lnq(cands, idx, 0, aliases, 10);
  CHECK(past[0].aspect == "acme cup");
  CHECK(past[0].score == 2.0);
  CHECK(past[1].score == 0.0);

  CHECK_THROWS_AS(baseline_lnq(cands, idx, 2, aliases, 0), std::invalid_argument);
}

TEST_CASE("forecast baseline predicts the next day with popularity fallback", "[ranker]") {
  // 28 days: "seasonal" spikes to 5 on phase 0, "flat" is constant 2
  std::vector<QueryRecord> q;
  std::vector<std::optional<ClickRecord>> c;
  for (Day d = 0; d < 28; ++d) {
    int n_seasonal = d % 7 == 0 ? 5 : 1;
    for (int i = 0; i < n_seasonal; ++i) {
      q.push_back({"u", "seasonal", d});
      c.push_back(std::nullopt);
    }
    for (int i = 0; i < 2; ++i) {
      q.push_back({"u", "flat", d});
      c.push_back(std::nullopt);
    }
  }
  IngestOptions opts;
  opts.min_qf = 1;
  opts.min_click = 1;
  LogIndex idx = LogIndex::from_records(q, c, opts, nullptr);

  std::vector<std::string> flags;
  auto pnq = baseline_pnq({"seasonal", "flat"}, idx, 27, 7, 10, &flags);
  REQUIRE(pnq.size() == 2);
  // day 28 falls on the spike phase, so the forecast restores the peak level
  CHECK(pnq[0].aspect == "seasonal");
  CHECK(pnq[0].score == Catch::Approx(5.0).margin(1e-6));
  CHECK(pnq[1].aspect == "flat");
  CHECK(pnq[1].score == Catch::Approx(2.0).margin(1e-6));
  CHECK(flags.empty());

  // fewer than two full cycles of history: windowed popularity, flagged
  std::vector<std::string> early_flags;
  auto early = baseline_pnq({"seasonal", "flat"}, idx, 5, 7, 10, &early_flags);
  CHECK(early[0].aspect == "flat");
  CHECK(early[0].score == 12.0);  // 2 per day over days 0..5
  CHECK(early[1].aspect == "seasonal");
  CHECK(early[1].score == 10.0);  // 5 + 1*5
  CHECK(early_flags == std::vector<std::string>{"seasonal", "flat"});

  auto rwr = baseline_rwr({{"b", 0.2}, {"a", 0.9}, {"c", 0.2}});
  CHECK(rwr[0].aspect == "a");
  CHECK(rwr[1].aspect == "b");  // tie with c, name order
  CHECK(rwr[2].aspect == "c");
}

TEST_CASE("model files round-trip through their json forms", "[ranker]") {
  PlantedRanking data = planted_ranking();
  ModelSet m = train_ensemble(data.rows, data.prefs, data.dists, 20.0, 10);

  ModelSet back = ranker_from_json(ranker_to_json(m));
  for (const auto& p : data.prefs) {
    CHECK(back.score(data.rows[p.better], data.dists[p.dist]) ==
          m.score(data.rows[p.better], data.dists[p.dist]));
  }
  // a serialize-parse cycle keeps doubles bit-exact
  auto text = ranker_to_json(m).dump();
  ModelSet back2 = ranker_from_json(nlohmann::json::parse(text));
  CHECK(back2.score(data.rows[0], data.dists[0]) == m.score(data.rows[0], data.dists[0]));
  CHECK(back2.objective == m.objective);

  CHECK_THROWS_AS(ranker_from_json(nlohmann::json{{"format", "nope"}}), std::runtime_error);
  auto broken = ranker_to_json(m);
  broken["w"] = nlohmann::json::array({std::vector<double>{1.0}});
  CHECK_THROWS_AS(ranker_from_json(broken), std::runtime_error);

  SingleRanker s = train_single(data.rows, data.prefs, {0, 1});
  SingleRanker sback = single_from_json(single_to_json(s));
  CHECK(sback.score(data.rows[3]) == s.score(data.rows[3]));
  CHECK(sback.mask == s.mask);
  CHECK_THROWS_AS(single_from_json(nlohmann::json{{"format", "nope"}}), std::runtime_error);
}

TEST_CASE("run lines carry entity, day, rank, score and tag", "[ranker]") {
  RankedList list = {{"cup", 1.5}, {"news", -0.25}};
  std::ostringstream os;
  append_run_lines(os, "E1", make_day(2006, 3, 5), list, "mle");
  CHECK(os.str() ==
        "E1\t2006-03-05\tcup\t1\t1.5\tmle\n"
        "E1\t2006-03-05\tnews\t2\t-0.25\tmle\n");
}

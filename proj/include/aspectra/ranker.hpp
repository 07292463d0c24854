#pragma once

#include <array>
#include <fstream>
#include <map>
#include <set>

#include <json.hpp>

#include "aspectra/common.hpp"
#include "aspectra/eventclf.hpp"
#include "aspectra/logstore.hpp"
#include "aspectra/signals.hpp"

namespace aspectra {

// ---------------------------------------------------------------------------
// Pairwise preferences over feature rows. `better` and `worse` index into the
// feature matrix; `dist` indexes the per-(entity, day) time/type distribution
// shared by both rows.

struct PairwisePreference {
  size_t better = 0;
  size_t worse = 0;
  size_t dist = 0;
};

struct RankedItem {
  std::string aspect;
  double score = 0.0;
};
using RankedList = std::vector<RankedItem>;

inline void sort_ranked(RankedList& list) {
  std::sort(list.begin(), list.end(), [](const RankedItem& a, const RankedItem& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.aspect < b.aspect;
  });
}

// ---------------------------------------------------------------------------
// Ensemble of six cell-specific linear rankers. A row is scored by every cell
// model and the scores are mixed by the row's time/type distribution.

struct ModelSet {
  Standardizer standardizer;
  std::array<std::vector<double>, kNumTimeTypeCells> w{};
  double C = 20.0;
  uint64_t seed = 42;
  double objective = 0.0;
  std::vector<double> epoch_objectives;

  double score_std(const std::vector<double>& z, const TimeTypeDistribution& dist) const {
    double s = 0;
    for (size_t c = 0; c < kNumTimeTypeCells; ++c) {
      if (dist.p[c] == 0.0) continue;
      double dot = 0;
      for (size_t j = 0; j < z.size(); ++j) dot += w[c][j] * z[j];
      s += dist.p[c] * dot;
    }
    return s;
  }
  double score(const std::vector<double>& x_raw, const TimeTypeDistribution& dist) const {
    if (x_raw.size() != standardizer.mean.size())
      throw std::invalid_argument("ensemble_score: dimension mismatch");
    return score_std(standardizer.transform(x_raw), dist);
  }
};

// Full regularized objective: 1/2 sum_c ||w_c||^2 + C * sum_prefs hinge.
inline double ensemble_objective(const ModelSet& m, const std::vector<std::vector<double>>& rows,
                                 const std::vector<PairwisePreference>& prefs,
                                 const std::vector<TimeTypeDistribution>& dists) {
  double reg = 0;
  for (const auto& wc : m.w)
    for (double v : wc) reg += v * v;
  double hinge = 0;
  for (const auto& p : prefs) {
    double margin = m.score(rows[p.better], dists[p.dist]) - m.score(rows[p.worse], dists[p.dist]);
    hinge += std::max(0.0, 1.0 - margin);
  }
  return 0.5 * reg + m.C * hinge;
}

namespace detail {

inline void check_rows(const std::vector<std::vector<double>>& rows) {
  for (size_t i = 0; i < rows.size(); ++i)
    for (double v : rows[i])
      if (!std::isfinite(v))
        throw std::invalid_argument("train: non-finite feature in row " + std::to_string(i));
}

}  // namespace detail

// Stochastic subgradient descent with iterate averaging on the equivalent
// per-preference objective (lambda/2)*sum||w||^2 + (1/n)*sum hinge,
// lambda = 1/(C*n). Step eta_0/(1 + lambda*t) with eta_0 = 0.1.
inline ModelSet train_ensemble(const std::vector<std::vector<double>>& rows,
                               const std::vector<PairwisePreference>& prefs,
                               const std::vector<TimeTypeDistribution>& dists, double C = 20.0,
                               int epochs = 50, uint64_t seed = 42) {
  if (prefs.empty()) throw std::invalid_argument("train_ensemble: empty preference set");
  if (rows.empty()) throw std::invalid_argument("train_ensemble: no feature rows");
  detail::check_rows(rows);
  for (const auto& p : prefs) {
    if (p.better >= rows.size() || p.worse >= rows.size() || p.better == p.worse)
      throw std::invalid_argument("train_ensemble: bad preference indices");
    if (p.dist >= dists.size())
      throw std::invalid_argument("train_ensemble: preference without distribution");
  }

  ModelSet m;
  m.C = C;
  m.seed = seed;
  m.standardizer = Standardizer::fit(rows);
  size_t d = m.standardizer.kept.size();
  for (auto& wc : m.w) wc.assign(d, 0.0);
  if (C == 0.0) {
    m.objective = 0.0;
    return m;
  }

  std::vector<std::vector<double>> z;
  z.reserve(rows.size());
  for (const auto& r : rows) z.push_back(m.standardizer.transform(r));

  size_t n = prefs.size();
  double lambda = 1.0 / (C * double(n));
  const double eta0 = 0.1;

  std::array<std::vector<double>, kNumTimeTypeCells> w;
  std::array<std::vector<double>, kNumTimeTypeCells> wavg;
  for (auto& wc : w) wc.assign(d, 0.0);
  for (auto& wc : wavg) wc.assign(d, 0.0);
  long t = 0;

  std::vector<size_t> order(n);
  for (size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng(seed);

  auto margin_of = [&](const PairwisePreference& p,
                       const std::array<std::vector<double>, kNumTimeTypeCells>& ws) {
    const auto& dist = dists[p.dist];
    const auto& zi = z[p.better];
    const auto& zj = z[p.worse];
    double s = 0;
    for (size_t c = 0; c < kNumTimeTypeCells; ++c) {
      if (dist.p[c] == 0.0) continue;
      double dot = 0;
      for (size_t k = 0; k < d; ++k) dot += ws[c][k] * (zi[k] - zj[k]);
      s += dist.p[c] * dot;
    }
    return s;
  };

  for (int epoch = 0; epoch < epochs; ++epoch) {
    rng.shuffle(order);
    for (size_t idx : order) {
      ++t;
      const auto& p = prefs[idx];
      double eta = eta0 / (1.0 + lambda * double(t));
      double margin = margin_of(p, w);
      double shrink = 1.0 - eta * lambda;
      if (shrink < 0) shrink = 0;
      const auto& dist = dists[p.dist];
      const auto& zi = z[p.better];
      const auto& zj = z[p.worse];
      for (size_t c = 0; c < kNumTimeTypeCells; ++c) {
        for (size_t k = 0; k < d; ++k) w[c][k] *= shrink;
        if (margin < 1.0 && dist.p[c] != 0.0) {
          double coef = eta * dist.p[c];
          for (size_t k = 0; k < d; ++k) w[c][k] += coef * (zi[k] - zj[k]);
        }
      }
      double inv_t = 1.0 / double(t);
      for (size_t c = 0; c < kNumTimeTypeCells; ++c)
        for (size_t k = 0; k < d; ++k)
          wavg[c][k] += (w[c][k] - wavg[c][k]) * inv_t;
    }
    ModelSet snapshot = m;
    snapshot.w = wavg;
    m.epoch_objectives.push_back(ensemble_objective(snapshot, rows, prefs, dists));
  }
  m.w = wavg;
  m.objective = m.epoch_objectives.back();
  return m;
}

inline double ensemble_score(const ModelSet& m, const std::vector<double>& x_raw,
                             const TimeTypeDistribution& dist) {
  return m.score(x_raw, dist);
}

// Candidates ranked by ensemble score, descending; lexicographic tie-break.
inline RankedList rank_candidates(const ModelSet& m,
                                  const std::vector<std::pair<std::string, std::vector<double>>>&
                                      candidates,
                                  const TimeTypeDistribution& dist) {
  RankedList out;
  std::set<std::string> seen;
  for (const auto& [name, x] : candidates) {
    if (!seen.insert(name).second)
      throw std::invalid_argument("rank: duplicate aspect '" + name + "'");
    out.push_back({name, m.score(x, dist)});
  }
  sort_ranked(out);
  return out;
}

// ---------------------------------------------------------------------------
// Single pairwise ranker over a feature subset (used for the salience-only /
// short-term-only / all-features ablations, and to compute importance
// weights for the mixture model).

struct SingleRanker {
  Standardizer standardizer;
  std::vector<size_t> mask;  // original feature indices used
  std::vector<double> w;
  double C = 20.0;
  double objective = 0.0;

  double score(const std::vector<double>& x_raw) const {
    std::vector<double> sub;
    sub.reserve(mask.size());
    for (size_t j : mask) {
      if (j >= x_raw.size()) throw std::invalid_argument("single ranker: dimension mismatch");
      sub.push_back(x_raw[j]);
    }
    auto zv = standardizer.transform(sub);
    double s = 0;
    for (size_t k = 0; k < zv.size(); ++k) s += w[k] * zv[k];
    return s;
  }
};

inline double single_objective(const SingleRanker& m, const std::vector<std::vector<double>>& rows,
                               const std::vector<PairwisePreference>& prefs) {
  double reg = 0;
  for (double v : m.w) reg += v * v;
  double hinge = 0;
  for (const auto& p : prefs)
    hinge += std::max(0.0, 1.0 - (m.score(rows[p.better]) - m.score(rows[p.worse])));
  return 0.5 * reg + m.C * hinge;
}

inline SingleRanker train_single(const std::vector<std::vector<double>>& rows,
                                 const std::vector<PairwisePreference>& prefs,
                                 const std::vector<size_t>& mask, double C = 20.0,
                                 int epochs = 50, uint64_t seed = 42) {
  if (mask.empty()) throw std::invalid_argument("train_single: empty feature mask");
  if (prefs.empty()) throw std::invalid_argument("train_single: empty preference set");
  detail::check_rows(rows);

  std::vector<std::vector<double>> sub;
  sub.reserve(rows.size());
  for (const auto& r : rows) {
    std::vector<double> s;
    s.reserve(mask.size());
    for (size_t j : mask) {
      if (j >= r.size()) throw std::invalid_argument("train_single: mask out of range");
      s.push_back(r[j]);
    }
    sub.push_back(std::move(s));
  }

  SingleRanker m;
  m.mask = mask;
  m.C = C;
  m.standardizer = Standardizer::fit(sub);
  size_t d = m.standardizer.kept.size();
  m.w.assign(d, 0.0);
  if (C == 0.0) return m;

  std::vector<std::vector<double>> z;
  z.reserve(sub.size());
  for (const auto& r : sub) z.push_back(m.standardizer.transform(r));

  size_t n = prefs.size();
  double lambda = 1.0 / (C * double(n));
  const double eta0 = 0.1;
  std::vector<double> w(d, 0.0), wavg(d, 0.0);
  std::vector<size_t> order(n);
  for (size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng(seed);
  long t = 0;
  for (int epoch = 0; epoch < epochs; ++epoch) {
    rng.shuffle(order);
    for (size_t idx : order) {
      ++t;
      const auto& p = prefs[idx];
      double eta = eta0 / (1.0 + lambda * double(t));
      const auto& zi = z[p.better];
      const auto& zj = z[p.worse];
      double margin = 0;
      for (size_t k = 0; k < d; ++k) margin += w[k] * (zi[k] - zj[k]);
      double shrink = 1.0 - eta * lambda;
      if (shrink < 0) shrink = 0;
      for (size_t k = 0; k < d; ++k) w[k] *= shrink;
      if (margin < 1.0)
        for (size_t k = 0; k < d; ++k) w[k] += eta * (zi[k] - zj[k]);
      double inv_t = 1.0 / double(t);
      for (size_t k = 0; k < d; ++k) wavg[k] += (w[k] - wavg[k]) * inv_t;
    }
  }
  m.w = wavg;
  m.objective = single_objective(m, rows, prefs);
  return m;
}

// ---------------------------------------------------------------------------
// Popularity baselines over the query log.

inline RankedList baseline_mle(const std::vector<std::string>& candidates, const LogIndex& index,
                               Day t) {
  RankedList out;
  for (const auto& c : candidates) {
    double s = 0;
    if (index.has_span() && t >= index.first_day())
      s = double(index.freq_between(normalize_query(c), index.first_day(),
                                    std::min(t, index.last_day())));
    out.push_back({c, s});
  }
  sort_ranked(out);
  return out;
}

inline RankedList baseline_mle_w(const std::vector<std::string>& candidates,
                                 const LogIndex& index, Day t, int W = 10) {
  if (W < 1) throw std::invalid_argument("baseline_mle_w: window must be >= 1");
  RankedList out;
  for (const auto& c : candidates) {
    double s = 0;
    if (index.has_span() && t >= index.first_day())
      s = double(index.freq_between(normalize_query(c), Day(t - W + 1),
                                    std::min(t, index.last_day())));
    out.push_back({c, s});
  }
  sort_ranked(out);
  return out;
}

// Last-N-queries baseline: walk the record stream backwards from t, keep the
// last N records mentioning the entity, and count exact candidate matches.
inline RankedList baseline_lnq(const std::vector<std::string>& candidates, const LogIndex& index,
                               Day t, const std::set<std::string>& entity_aliases, long N = 200) {
  if (N < 1) throw std::invalid_argument("baseline_lnq: N must be >= 1");
  std::map<std::string, double> score;
  for (const auto& c : candidates) score[normalize_query(c)] = 0.0;

  auto matches_entity = [&](const std::string& q) {
    for (const auto& a : entity_aliases)
      if (contains_at_word_boundary(q, a)) return true;
    return false;
  };

  long taken = 0;
  const auto& runs = index.chrono();
  for (auto it = runs.rbegin(); it != runs.rend() && taken < N; ++it) {
    if (it->day > t) continue;
    const std::string& q = index.query_text(it->qid);
    if (!matches_entity(q)) continue;
    long use = std::min<long>(long(it->count), N - taken);
    taken += use;
    auto sit = score.find(q);
    if (sit != score.end()) sit->second += double(use);
  }

  RankedList out;
  for (const auto& c : candidates) out.push_back({c, score[normalize_query(c)]});
  sort_ranked(out);
  return out;
}

// Predicted-next-query baseline: one-step forecast of each candidate's series
// at t+1; candidates with too little history fall back to their windowed
// popularity and are flagged.
inline RankedList baseline_pnq(const std::vector<std::string>& candidates, const LogIndex& index,
                               Day t, int period = 7, int W = 10,
                               std::vector<std::string>* fallback_flags = nullptr) {
  RankedList out;
  for (const auto& c : candidates) {
    std::string norm = normalize_query(c);
    double s = 0;
    bool fell_back = true;
    if (index.has_span() && t >= index.first_day()) {
      auto series = index.daily_series(norm, index.first_day(), std::min(t, index.last_day()));
      if (series.size() >= 2 * size_t(period)) {
        HwModel mdl = holt_winters_fit(series.values, period);
        s = mdl.forecast(1);
        fell_back = false;
      }
    }
    if (fell_back) {
      if (index.has_span() && t >= index.first_day())
        s = double(index.freq_between(norm, Day(t - W + 1), std::min(t, index.last_day())));
      if (fallback_flags) fallback_flags->push_back(c);
    }
    out.push_back({c, s});
  }
  sort_ranked(out);
  return out;
}

// Candidates in walk-score order (scores must accompany the names).
inline RankedList baseline_rwr(const std::vector<std::pair<std::string, double>>& scored) {
  RankedList out;
  for (const auto& [name, s] : scored) out.push_back({name, s});
  sort_ranked(out);
  return out;
}

// ---------------------------------------------------------------------------
// Persistence and run files.

inline nlohmann::json ranker_to_json(const ModelSet& m) {
  nlohmann::json j;
  j["format"] = "aspectra-ranker";
  j["version"] = 1;
  j["standardizer"] = m.standardizer.to_json();
  j["C"] = m.C;
  j["seed"] = m.seed;
  j["objective"] = m.objective;
  nlohmann::json ws = nlohmann::json::array();
  for (const auto& wc : m.w) ws.push_back(wc);
  j["w"] = ws;
  return j;
}

inline ModelSet ranker_from_json(const nlohmann::json& j) {
  if (j.value("format", "") != "aspectra-ranker")
    throw std::runtime_error("ranker_from_json: not a ranker model file");
  ModelSet m;
  m.standardizer = Standardizer::from_json(j.at("standardizer"));
  m.C = j.at("C").get<double>();
  m.seed = j.at("seed").get<uint64_t>();
  m.objective = j.at("objective").get<double>();
  auto ws = j.at("w");
  if (ws.size() != kNumTimeTypeCells) throw std::runtime_error("ranker_from_json: bad cell count");
  for (size_t c = 0; c < kNumTimeTypeCells; ++c) m.w[c] = ws[c].get<std::vector<double>>();
  return m;
}

inline nlohmann::json single_to_json(const SingleRanker& m) {
  return {{"format", "aspectra-single-ranker"}, {"version", 1},
          {"standardizer", m.standardizer.to_json()}, {"mask", m.mask},
          {"w", m.w},           {"C", m.C},
          {"objective", m.objective}};
}

inline SingleRanker single_from_json(const nlohmann::json& j) {
  if (j.value("format", "") != "aspectra-single-ranker")
    throw std::runtime_error("single_from_json: not a single ranker file");
  SingleRanker m;
  m.standardizer = Standardizer::from_json(j.at("standardizer"));
  m.mask = j.at("mask").get<std::vector<size_t>>();
  m.w = j.at("w").get<std::vector<double>>();
  m.C = j.at("C").get<double>();
  m.objective = j.at("objective").get<double>();
  return m;
}

// One line per ranked aspect: entity, day, aspect, rank, score, tag.
inline void append_run_lines(std::ostream& os, const std::string& entity, Day day,
                             const RankedList& list, const std::string& tag) {
  int r = 1;
  for (const auto& item : list)
    os << entity << "\t" << format_day(day) << "\t" << item.aspect << "\t" << r++ << "\t"
       << fmt_double(item.score) << "\t" << tag << "\n";
}

}  // namespace aspectra

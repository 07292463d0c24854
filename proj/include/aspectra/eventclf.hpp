#pragma once

#include <array>
#include <fstream>
#include <numbers>
#include <optional>

#include <json.hpp>

#include "aspectra/common.hpp"

namespace aspectra {

// ---------------------------------------------------------------------------
// Event labels: what kind of event an entity carries and which phase of it a
// point in time falls into.

enum class EventType : int { breaking = 0, anticipated = 1 };
enum class EventTime : int { before = 0, during = 1, after = 2 };

inline const char* to_string(EventType t) {
  return t == EventType::breaking ? "breaking" : "anticipated";
}
inline const char* to_string(EventTime t) {
  switch (t) {
    case EventTime::before: return "before";
    case EventTime::during: return "during";
    default: return "after";
  }
}
inline EventType event_type_from_string(const std::string& s) {
  if (s == "breaking") return EventType::breaking;
  if (s == "anticipated") return EventType::anticipated;
  throw std::invalid_argument("unknown event type: '" + s + "'");
}
inline EventTime event_time_from_string(const std::string& s) {
  if (s == "before") return EventTime::before;
  if (s == "during") return EventTime::during;
  if (s == "after") return EventTime::after;
  throw std::invalid_argument("unknown event time: '" + s + "'");
}

inline constexpr int kNumTimeTypeCells = 6;

inline int cell_index(EventType ty, EventTime ti) { return 3 * int(ty) + int(ti); }
inline EventType cell_type(int cell) { return EventType(cell / 3); }
inline EventTime cell_time(int cell) { return EventTime(cell % 3); }

// ---------------------------------------------------------------------------
// Feature standardization. Zero-variance columns are dropped and recorded.

struct Standardizer {
  std::vector<double> mean, stddev;  // per original column
  std::vector<size_t> kept;
  std::vector<size_t> dropped;

  static Standardizer fit(const std::vector<std::vector<double>>& rows) {
    if (rows.empty()) throw std::invalid_argument("standardizer: no rows");
    size_t d = rows[0].size();
    Standardizer s;
    s.mean.assign(d, 0.0);
    s.stddev.assign(d, 0.0);
    for (const auto& r : rows) {
      if (r.size() != d) throw std::invalid_argument("standardizer: ragged rows");
      for (size_t j = 0; j < d; ++j) s.mean[j] += r[j];
    }
    for (double& m : s.mean) m /= double(rows.size());
    for (const auto& r : rows)
      for (size_t j = 0; j < d; ++j) {
        double dv = r[j] - s.mean[j];
        s.stddev[j] += dv * dv;
      }
    for (size_t j = 0; j < d; ++j) {
      s.stddev[j] = std::sqrt(s.stddev[j] / double(rows.size()));
      if (s.stddev[j] > 0)
        s.kept.push_back(j);
      else
        s.dropped.push_back(j);
    }
    if (s.kept.empty()) throw std::runtime_error("standardizer: all features constant");
    return s;
  }

  std::vector<double> transform(const std::vector<double>& x) const {
    if (x.size() != mean.size()) throw std::invalid_argument("standardizer: dimension mismatch");
    std::vector<double> out;
    out.reserve(kept.size());
    for (size_t j : kept) out.push_back((x[j] - mean[j]) / stddev[j]);
    return out;
  }

  nlohmann::json to_json() const {
    return {{"mean", mean}, {"stddev", stddev}, {"kept", kept}, {"dropped", dropped}};
  }
  static Standardizer from_json(const nlohmann::json& j) {
    Standardizer s;
    s.mean = j.at("mean").get<std::vector<double>>();
    s.stddev = j.at("stddev").get<std::vector<double>>();
    s.kept = j.at("kept").get<std::vector<size_t>>();
    s.dropped = j.at("dropped").get<std::vector<size_t>>();
    return s;
  }
};

// ---------------------------------------------------------------------------
// Platt sigmoid calibration: P(y=1|score) = 1 / (1 + exp(a*score + b)).
// Newton iterations on the regularized targets, after Lin/Weng's recipe.

struct PlattScaler {
  double a = 0.0, b = 0.0;

  double prob(double score) const {
    double z = a * score + b;
    return z >= 0 ? std::exp(-z) / (1.0 + std::exp(-z)) : 1.0 / (1.0 + std::exp(z));
  }

  static PlattScaler fit(const std::vector<double>& scores, const std::vector<int>& labels) {
    size_t n = scores.size();
    if (n == 0 || labels.size() != n) throw std::invalid_argument("platt: bad input");
    double n_pos = 0, n_neg = 0;
    for (int y : labels) (y > 0 ? n_pos : n_neg) += 1;
    double t_pos = (n_pos + 1.0) / (n_pos + 2.0);
    double t_neg = 1.0 / (n_neg + 2.0);
    std::vector<double> t(n);
    for (size_t i = 0; i < n; ++i) t[i] = labels[i] > 0 ? t_pos : t_neg;

    double a = 0.0, b = std::log((n_neg + 1.0) / (n_pos + 1.0));
    double fval = 0.0;
    auto objective = [&](double aa, double bb) {
      double obj = 0;
      for (size_t i = 0; i < n; ++i) {
        double z = aa * scores[i] + bb;
        // log(1+exp(z)) computed stably
        double l1pe = z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
        obj += t[i] * z + l1pe - z;  // == -t*log(p) - (1-t)*log(1-p) with p = sigma(-z)
      }
      return obj;
    };
    fval = objective(a, b);
    for (int it = 0; it < 100; ++it) {
      double g1 = 0, g2 = 0, h11 = 1e-12, h22 = 1e-12, h12 = 0;
      for (size_t i = 0; i < n; ++i) {
        double z = a * scores[i] + b;
        double p = z >= 0 ? std::exp(-z) / (1.0 + std::exp(-z)) : 1.0 / (1.0 + std::exp(z));
        double d1 = t[i] - p;
        double d2 = p * (1.0 - p);
        g1 += scores[i] * d1;
        g2 += d1;
        h11 += scores[i] * scores[i] * d2;
        h22 += d2;
        h12 += scores[i] * d2;
      }
      if (std::abs(g1) < 1e-10 && std::abs(g2) < 1e-10) break;
      double det = h11 * h22 - h12 * h12;
      if (std::abs(det) < 1e-18) break;
      double da = -(h22 * g1 - h12 * g2) / det;
      double db = -(-h12 * g1 + h11 * g2) / det;
      double step = 1.0;
      bool moved = false;
      for (int ls = 0; ls < 20; ++ls) {
        double na = a + step * da, nb = b + step * db;
        double nf = objective(na, nb);
        if (nf < fval + 1e-12) {
          a = na;
          b = nb;
          fval = nf;
          moved = true;
          break;
        }
        step *= 0.5;
      }
      if (!moved) break;
    }
    return PlattScaler{a, b};
  }
};

// ---------------------------------------------------------------------------
// Stage 1: binary max-margin event-type model (hinge loss, subgradient
// descent with the classic 1/(lambda*t) schedule), calibrated on a held-out
// slice so it can emit type probabilities for the cascade.

struct Stage1Model {
  Standardizer standardizer;
  std::vector<double> w;
  double bias = 0.0;
  PlattScaler platt;
  double lambda = 1e-3;

  double decision(const std::vector<double>& x_raw) const {
    auto z = standardizer.transform(x_raw);
    double s = bias;
    for (size_t j = 0; j < z.size(); ++j) s += w[j] * z[j];
    return s;
  }
  // probabilities over {breaking, anticipated}; positive class = anticipated
  std::array<double, 2> probs(const std::vector<double>& x_raw) const {
    double p_ant = platt.prob(decision(x_raw));
    return {1.0 - p_ant, p_ant};
  }
  EventType predict(const std::vector<double>& x_raw) const {
    auto p = probs(x_raw);
    return p[1] > p[0] ? EventType::anticipated : EventType::breaking;
  }
};

inline Stage1Model train_stage1(const std::vector<std::vector<double>>& rows,
                                const std::vector<EventType>& labels, uint64_t seed = 42,
                                double lambda = 1e-3, int epochs = 200) {
  if (rows.size() != labels.size() || rows.empty())
    throw std::invalid_argument("train_stage1: bad input");
  bool has_pos = false, has_neg = false;
  for (auto l : labels) (l == EventType::anticipated ? has_pos : has_neg) = true;
  if (!has_pos || !has_neg)
    throw std::invalid_argument("train_stage1: both event types must be present");

  Stage1Model m;
  m.lambda = lambda;
  m.standardizer = Standardizer::fit(rows);

  std::vector<std::vector<double>> z;
  z.reserve(rows.size());
  for (const auto& r : rows) z.push_back(m.standardizer.transform(r));
  size_t d = z[0].size();

  // 20% held out (seeded shuffle) for sigmoid calibration.
  std::vector<size_t> order(rows.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(seed);
  rng.shuffle(order);
  size_t n_cal = std::max<size_t>(1, rows.size() / 5);
  if (rows.size() - n_cal < 2) n_cal = rows.size() > 2 ? rows.size() - 2 : 0;
  std::vector<size_t> cal(order.begin(), order.begin() + long(n_cal));
  std::vector<size_t> train(order.begin() + long(n_cal), order.end());
  auto split_ok = [&](const std::vector<size_t>& idx) {
    bool p = false, q = false;
    for (size_t i : idx) (labels[i] == EventType::anticipated ? p : q) = true;
    return p && q;
  };
  if (train.empty() || !split_ok(train)) {
    train.assign(order.begin(), order.end());  // degenerate split: calibrate in-sample
    cal = train;
  }
  if (cal.empty() || !split_ok(cal)) cal = train;

  m.w.assign(d, 0.0);
  long t = 0;
  for (int epoch = 0; epoch < epochs; ++epoch) {
    rng.shuffle(train);
    for (size_t i : train) {
      ++t;
      double eta = 1.0 / (lambda * double(t));
      double y = labels[i] == EventType::anticipated ? 1.0 : -1.0;
      double s = m.bias;
      for (size_t j = 0; j < d; ++j) s += m.w[j] * z[i][j];
      double shrink = 1.0 - eta * lambda;
      if (shrink < 0) shrink = 0;
      for (size_t j = 0; j < d; ++j) m.w[j] *= shrink;
      if (y * s < 1.0) {
        for (size_t j = 0; j < d; ++j) m.w[j] += eta * y * z[i][j];
        m.bias += eta * y;
      }
    }
  }

  std::vector<double> cal_scores;
  std::vector<int> cal_labels;
  for (size_t i : cal) {
    double s = m.bias;
    for (size_t j = 0; j < d; ++j) s += m.w[j] * z[i][j];
    cal_scores.push_back(s);
    cal_labels.push_back(labels[i] == EventType::anticipated ? 1 : 0);
  }
  m.platt = PlattScaler::fit(cal_scores, cal_labels);
  return m;
}

// ---------------------------------------------------------------------------
// Multinomial logistic regression (full-batch gradient descent, L2).

struct SoftmaxModel {
  Standardizer standardizer;
  size_t n_classes = 0;
  std::vector<std::vector<double>> w;  // n_classes x d
  std::vector<double> bias;

  std::vector<double> probs_std(const std::vector<double>& z) const {
    std::vector<double> s(n_classes);
    double mx = -std::numeric_limits<double>::infinity();
    for (size_t c = 0; c < n_classes; ++c) {
      double v = bias[c];
      for (size_t j = 0; j < z.size(); ++j) v += w[c][j] * z[j];
      s[c] = v;
      mx = std::max(mx, v);
    }
    double sum = 0;
    for (double& v : s) {
      v = std::exp(v - mx);
      sum += v;
    }
    for (double& v : s) v /= sum;
    return s;
  }
  std::vector<double> probs(const std::vector<double>& x_raw) const {
    return probs_std(standardizer.transform(x_raw));
  }
  int predict(const std::vector<double>& x_raw) const {
    auto p = probs(x_raw);
    return int(std::max_element(p.begin(), p.end()) - p.begin());
  }
};

inline SoftmaxModel train_softmax(const std::vector<std::vector<double>>& rows,
                                  const std::vector<int>& labels, size_t n_classes,
                                  double lambda = 1e-3, int epochs = 500) {
  if (rows.size() != labels.size() || rows.empty())
    throw std::invalid_argument("train_softmax: bad input");
  std::vector<char> seen(n_classes, 0);
  for (int l : labels) {
    if (l < 0 || size_t(l) >= n_classes) throw std::invalid_argument("train_softmax: bad label");
    seen[size_t(l)] = 1;
  }
  for (size_t c = 0; c < n_classes; ++c)
    if (!seen[c])
      throw std::invalid_argument("train_softmax: class " + std::to_string(c) + " missing");

  SoftmaxModel m;
  m.n_classes = n_classes;
  m.standardizer = Standardizer::fit(rows);
  std::vector<std::vector<double>> z;
  z.reserve(rows.size());
  for (const auto& r : rows) z.push_back(m.standardizer.transform(r));
  size_t d = z[0].size();
  size_t n = z.size();
  m.w.assign(n_classes, std::vector<double>(d, 0.0));
  m.bias.assign(n_classes, 0.0);

  for (int epoch = 0; epoch < epochs; ++epoch) {
    double lr = 1.0 / (1.0 + 0.01 * epoch);
    std::vector<std::vector<double>> gw(n_classes, std::vector<double>(d, 0.0));
    std::vector<double> gb(n_classes, 0.0);
    for (size_t i = 0; i < n; ++i) {
      auto p = m.probs_std(z[i]);
      for (size_t c = 0; c < n_classes; ++c) {
        double diff = p[c] - (int(c) == labels[i] ? 1.0 : 0.0);
        for (size_t j = 0; j < d; ++j) gw[c][j] += diff * z[i][j];
        gb[c] += diff;
      }
    }
    for (size_t c = 0; c < n_classes; ++c) {
      for (size_t j = 0; j < d; ++j)
        m.w[c][j] -= lr * (gw[c][j] / double(n) + lambda * m.w[c][j]);
      m.bias[c] -= lr * gb[c] / double(n);
    }
  }
  return m;
}

// ---------------------------------------------------------------------------
// Cascade: stage-2 time model consumes the signal features plus the stage-1
// calibrated type probabilities as two extra columns.

struct CascadeModel {
  Stage1Model stage1;
  SoftmaxModel stage2;

  std::vector<double> augment(const std::vector<double>& x_raw) const {
    auto p = stage1.probs(x_raw);
    std::vector<double> out = x_raw;
    out.push_back(p[0]);
    out.push_back(p[1]);
    return out;
  }
  EventType predict_type(const std::vector<double>& x_raw) const {
    return stage1.predict(x_raw);
  }
  EventTime predict_time(const std::vector<double>& x_raw) const {
    return EventTime(stage2.predict(augment(x_raw)));
  }
};

inline SoftmaxModel train_stage2(const std::vector<std::vector<double>>& rows,
                                 const Stage1Model& stage1, const std::vector<EventTime>& labels,
                                 double lambda = 1e-3, int epochs = 500) {
  if (rows.size() != labels.size() || rows.empty())
    throw std::invalid_argument("train_stage2: bad input");
  std::vector<std::vector<double>> aug;
  aug.reserve(rows.size());
  for (const auto& r : rows) {
    auto p = stage1.probs(r);
    auto x = r;
    x.push_back(p[0]);
    x.push_back(p[1]);
    aug.push_back(std::move(x));
  }
  std::vector<int> y;
  y.reserve(labels.size());
  for (auto l : labels) y.push_back(int(l));
  return train_softmax(aug, y, 3, lambda, epochs);
}

inline CascadeModel train_cascade(const std::vector<std::vector<double>>& rows,
                                  const std::vector<EventType>& types,
                                  const std::vector<EventTime>& times, uint64_t seed = 42) {
  CascadeModel m;
  m.stage1 = train_stage1(rows, types, seed);
  m.stage2 = train_stage2(rows, m.stage1, times);
  return m;
}

// ---------------------------------------------------------------------------
// Six-component spherical Gaussian mixture over importance-scaled features;
// one component per (type, time) cell.

struct TimeTypeDistribution {
  std::array<double, kNumTimeTypeCells> p{};

  double at(EventType ty, EventTime ti) const { return p[size_t(cell_index(ty, ti))]; }
  double sum() const {
    double s = 0;
    for (double v : p) s += v;
    return s;
  }
};

struct MixtureModel {
  Standardizer standardizer;
  std::vector<double> scale;                   // importance weight per kept column
  std::vector<std::vector<double>> centroids;  // indexed by cell id, in scaled space
  bool converged = false;
  int iterations = 0;

  std::vector<double> project(const std::vector<double>& x_raw) const {
    auto z = standardizer.transform(x_raw);
    for (size_t j = 0; j < z.size(); ++j) z[j] *= scale[j];
    return z;
  }
};

namespace detail {

inline double sq_dist(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0;
  for (size_t i = 0; i < a.size(); ++i) {
    double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

}  // namespace detail

inline MixtureModel fit_mixture(const std::vector<std::vector<double>>& rows,
                                const std::vector<int>& cell_labels,
                                const std::vector<double>& importance, uint64_t seed = 42,
                                int max_iter = 100) {
  const size_t k = kNumTimeTypeCells;
  if (rows.size() < k) throw std::invalid_argument("fit_mixture: need at least 6 vectors");
  if (cell_labels.size() != rows.size())
    throw std::invalid_argument("fit_mixture: label count mismatch");
  if (!importance.empty() && importance.size() != rows[0].size())
    throw std::invalid_argument("fit_mixture: importance dimension mismatch");

  MixtureModel m;
  m.standardizer = Standardizer::fit(rows);
  m.scale.assign(m.standardizer.kept.size(), 1.0);
  if (!importance.empty()) {
    double mx = 0;
    for (double w : importance) mx = std::max(mx, std::abs(w));
    if (mx == 0.0) throw std::invalid_argument("fit_mixture: degenerate scaling");
    for (size_t j = 0; j < m.standardizer.kept.size(); ++j)
      m.scale[j] = std::abs(importance[m.standardizer.kept[j]]);
  }

  std::vector<std::vector<double>> z;
  z.reserve(rows.size());
  for (const auto& r : rows) z.push_back(m.project(r));
  size_t n = z.size(), d = z[0].size();

  // k-means++ seeding
  Rng rng(seed);
  std::vector<std::vector<double>> mu;
  mu.push_back(z[rng.uniform_int(0, int(n) - 1)]);
  std::vector<double> dist2(n);
  while (mu.size() < k) {
    double total = 0;
    for (size_t i = 0; i < n; ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (const auto& c : mu) best = std::min(best, detail::sq_dist(z[i], c));
      dist2[i] = best;
      total += best;
    }
    size_t pick = 0;
    if (total > 0) {
      double r = rng.uniform(0.0, total);
      double acc = 0;
      for (size_t i = 0; i < n; ++i) {
        acc += dist2[i];
        if (acc >= r) {
          pick = i;
          break;
        }
      }
    } else {
      pick = size_t(rng.uniform_int(0, int(n) - 1));
    }
    mu.push_back(z[pick]);
  }

  std::vector<double> pi(k, 1.0 / double(k)), var(k, 1.0);
  {
    double v0 = 0;
    for (size_t i = 0; i < n; ++i) v0 += detail::sq_dist(z[i], mu[0]);
    v0 = std::max(v0 / double(n * d), 1e-6);
    std::fill(var.begin(), var.end(), v0);
  }

  std::vector<std::vector<double>> resp(n, std::vector<double>(k, 0.0));
  double prev_ll = -std::numeric_limits<double>::infinity();
  int it = 0;
  for (; it < max_iter; ++it) {
    double ll = 0;
    for (size_t i = 0; i < n; ++i) {
      std::vector<double> logp(k);
      double mx = -std::numeric_limits<double>::infinity();
      for (size_t c = 0; c < k; ++c) {
        double d2 = detail::sq_dist(z[i], mu[c]);
        logp[c] = std::log(std::max(pi[c], 1e-300)) - 0.5 * double(d) * std::log(2 * std::numbers::pi * var[c]) -
                  0.5 * d2 / var[c];
        mx = std::max(mx, logp[c]);
      }
      double sum = 0;
      for (size_t c = 0; c < k; ++c) sum += std::exp(logp[c] - mx);
      ll += mx + std::log(sum);
      for (size_t c = 0; c < k; ++c) resp[i][c] = std::exp(logp[c] - mx) / sum;
    }
    // M step
    for (size_t c = 0; c < k; ++c) {
      double nc = 0;
      std::vector<double> nm(d, 0.0);
      for (size_t i = 0; i < n; ++i) {
        nc += resp[i][c];
        for (size_t j = 0; j < d; ++j) nm[j] += resp[i][c] * z[i][j];
      }
      if (nc < 1e-12) {
        // dead component: respawn on the farthest point
        size_t far = 0;
        double best = -1;
        for (size_t i = 0; i < n; ++i) {
          double mind = std::numeric_limits<double>::infinity();
          for (const auto& cm : mu) mind = std::min(mind, detail::sq_dist(z[i], cm));
          if (mind > best) {
            best = mind;
            far = i;
          }
        }
        mu[c] = z[far];
        pi[c] = 1.0 / double(n);
        var[c] = 1.0;
        continue;
      }
      for (size_t j = 0; j < d; ++j) mu[c][j] = nm[j] / nc;
      double vs = 0;
      for (size_t i = 0; i < n; ++i) vs += resp[i][c] * detail::sq_dist(z[i], mu[c]);
      var[c] = vs / (nc * double(d)) + 1e-6;
      pi[c] = nc / double(n);
    }
    if (std::abs(ll - prev_ll) < 1e-6) {
      ++it;
      m.converged = true;
      break;
    }
    prev_ll = ll;
  }
  m.iterations = it;

  // Hard-assign training points, then map components to cells bijectively by
  // descending majority count (ties broken by overall cell frequency, then
  // by index).
  std::vector<std::vector<long>> count(k, std::vector<long>(k, 0));
  std::vector<long> cell_freq(k, 0);
  for (size_t i = 0; i < n; ++i) {
    size_t comp = size_t(std::max_element(resp[i].begin(), resp[i].end()) - resp[i].begin());
    int cell = cell_labels[i];
    if (cell < 0 || cell >= int(k)) throw std::invalid_argument("fit_mixture: bad cell label");
    ++count[comp][size_t(cell)];
    ++cell_freq[size_t(cell)];
  }
  std::vector<int> comp_to_cell(k, -1);
  std::vector<char> used_comp(k, 0), used_cell(k, 0);
  for (size_t step = 0; step < k; ++step) {
    long best_cnt = -1;
    size_t best_comp = 0, best_cell = 0;
    for (size_t c = 0; c < k; ++c) {
      if (used_comp[c]) continue;
      for (size_t l = 0; l < k; ++l) {
        if (used_cell[l]) continue;
        bool better = count[c][l] > best_cnt ||
                      (count[c][l] == best_cnt && cell_freq[l] > cell_freq[best_cell]);
        if (better) {
          best_cnt = count[c][l];
          best_comp = c;
          best_cell = l;
        }
      }
    }
    comp_to_cell[best_comp] = int(best_cell);
    used_comp[best_comp] = 1;
    used_cell[best_cell] = 1;
  }
  m.centroids.assign(k, {});
  for (size_t c = 0; c < k; ++c) m.centroids[size_t(comp_to_cell[c])] = mu[c];
  return m;
}

// Similarity-to-centroid turned into a proper distribution: the farthest cell
// gets 0 before normalization, a cell at the centroid gets 1.
inline TimeTypeDistribution soft_assign(const MixtureModel& m, const std::vector<double>& x_raw) {
  if (m.centroids.size() != kNumTimeTypeCells)
    throw std::invalid_argument("soft_assign: model not fitted");
  auto z = m.project(x_raw);
  std::array<double, kNumTimeTypeCells> d2{};
  double mx = 0;
  for (size_t c = 0; c < kNumTimeTypeCells; ++c) {
    d2[c] = detail::sq_dist(z, m.centroids[c]);
    mx = std::max(mx, d2[c]);
  }
  TimeTypeDistribution dist;
  if (mx == 0.0) {
    dist.p.fill(1.0 / double(kNumTimeTypeCells));
    return dist;
  }
  double sum = 0;
  for (size_t c = 0; c < kNumTimeTypeCells; ++c) {
    dist.p[c] = 1.0 - d2[c] / mx;
    sum += dist.p[c];
  }
  if (sum <= 0) {
    dist.p.fill(1.0 / double(kNumTimeTypeCells));
    return dist;
  }
  for (double& v : dist.p) v /= sum;
  return dist;
}

// ---------------------------------------------------------------------------
// Rolling chronological evaluation: rows must arrive ordered by time; they
// are split into `bins` equal chronological bins and each of the last
// `trials` bins is tested with all strictly earlier bins as training data.

struct ClassMetrics {
  double accuracy = 0.0;
  double weighted_f1 = 0.0;
};

inline ClassMetrics classification_metrics(const std::vector<int>& truth,
                                           const std::vector<int>& pred, int n_classes) {
  if (truth.size() != pred.size() || truth.empty())
    throw std::invalid_argument("classification_metrics: bad input");
  ClassMetrics out;
  size_t correct = 0;
  for (size_t i = 0; i < truth.size(); ++i)
    if (truth[i] == pred[i]) ++correct;
  out.accuracy = double(correct) / double(truth.size());
  double f1w = 0;
  for (int c = 0; c < n_classes; ++c) {
    long tp = 0, fp = 0, fn = 0, support = 0;
    for (size_t i = 0; i < truth.size(); ++i) {
      if (truth[i] == c) {
        ++support;
        if (pred[i] == c) ++tp;
        else ++fn;
      } else if (pred[i] == c) {
        ++fp;
      }
    }
    if (support == 0) continue;
    double prec = tp + fp > 0 ? double(tp) / double(tp + fp) : 0.0;
    double rec = double(tp) / double(support);
    double f1 = prec + rec > 0 ? 2 * prec * rec / (prec + rec) : 0.0;
    f1w += f1 * double(support) / double(truth.size());
  }
  out.weighted_f1 = f1w;
  return out;
}

struct RollingBinResult {
  int test_bin = 0;
  size_t n_train = 0, n_test = 0;
  ClassMetrics type_metrics;
  ClassMetrics time_metrics;
  ClassMetrics flat_time_metrics;  // plain multinomial logistic on raw features
};

struct RollingReport {
  std::vector<RollingBinResult> bins;
  ClassMetrics type_avg;
  ClassMetrics time_avg;
  ClassMetrics flat_time_avg;
};

inline RollingReport rolling_classification(const std::vector<std::vector<double>>& rows,
                                            const std::vector<EventType>& types,
                                            const std::vector<EventTime>& times, int n_bins = 10,
                                            int n_trials = 4, uint64_t seed = 42) {
  size_t n = rows.size();
  if (n < size_t(n_bins)) throw std::invalid_argument("rolling_classification: too few rows");
  auto bin_start = [&](int b) { return size_t(b) * n / size_t(n_bins); };
  RollingReport rep;
  for (int trial = 0; trial < n_trials; ++trial) {
    int test_bin = n_bins - n_trials + trial;
    size_t tr_end = bin_start(test_bin);
    size_t te_end = bin_start(test_bin + 1);
    std::vector<std::vector<double>> xtr(rows.begin(), rows.begin() + long(tr_end));
    std::vector<EventType> ytr_type(types.begin(), types.begin() + long(tr_end));
    std::vector<EventTime> ytr_time(times.begin(), times.begin() + long(tr_end));
    CascadeModel model = train_cascade(xtr, ytr_type, ytr_time, seed);
    std::vector<int> ytr_time_int(ytr_time.size());
    for (size_t i = 0; i < ytr_time.size(); ++i) ytr_time_int[i] = int(ytr_time[i]);
    SoftmaxModel flat = train_softmax(xtr, ytr_time_int, 3);
    std::vector<int> tt, tp, mt, mp, fp;
    for (size_t i = tr_end; i < te_end; ++i) {
      tt.push_back(int(types[i]));
      tp.push_back(int(model.predict_type(rows[i])));
      mt.push_back(int(times[i]));
      mp.push_back(int(model.predict_time(rows[i])));
      fp.push_back(flat.predict(rows[i]));
    }
    RollingBinResult r;
    r.test_bin = test_bin;
    r.n_train = tr_end;
    r.n_test = te_end - tr_end;
    r.type_metrics = classification_metrics(tt, tp, 2);
    r.time_metrics = classification_metrics(mt, mp, 3);
    r.flat_time_metrics = classification_metrics(mt, fp, 3);
    rep.bins.push_back(r);
  }
  for (const auto& b : rep.bins) {
    rep.type_avg.accuracy += b.type_metrics.accuracy / double(rep.bins.size());
    rep.type_avg.weighted_f1 += b.type_metrics.weighted_f1 / double(rep.bins.size());
    rep.time_avg.accuracy += b.time_metrics.accuracy / double(rep.bins.size());
    rep.time_avg.weighted_f1 += b.time_metrics.weighted_f1 / double(rep.bins.size());
    rep.flat_time_avg.accuracy += b.flat_time_metrics.accuracy / double(rep.bins.size());
    rep.flat_time_avg.weighted_f1 += b.flat_time_metrics.weighted_f1 / double(rep.bins.size());
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Model persistence.

inline nlohmann::json cascade_to_json(const CascadeModel& m) {
  nlohmann::json j;
  j["format"] = "aspectra-eventclf";
  j["version"] = 1;
  j["stage1"] = {{"standardizer", m.stage1.standardizer.to_json()},
                 {"w", m.stage1.w},
                 {"bias", m.stage1.bias},
                 {"platt_a", m.stage1.platt.a},
                 {"platt_b", m.stage1.platt.b},
                 {"lambda", m.stage1.lambda}};
  j["stage2"] = {{"standardizer", m.stage2.standardizer.to_json()},
                 {"n_classes", m.stage2.n_classes},
                 {"w", m.stage2.w},
                 {"bias", m.stage2.bias}};
  return j;
}

inline CascadeModel cascade_from_json(const nlohmann::json& j) {
  if (j.value("format", "") != "aspectra-eventclf")
    throw std::runtime_error("cascade_from_json: not an event classifier file");
  CascadeModel m;
  const auto& s1 = j.at("stage1");
  m.stage1.standardizer = Standardizer::from_json(s1.at("standardizer"));
  m.stage1.w = s1.at("w").get<std::vector<double>>();
  m.stage1.bias = s1.at("bias").get<double>();
  m.stage1.platt.a = s1.at("platt_a").get<double>();
  m.stage1.platt.b = s1.at("platt_b").get<double>();
  m.stage1.lambda = s1.at("lambda").get<double>();
  const auto& s2 = j.at("stage2");
  m.stage2.standardizer = Standardizer::from_json(s2.at("standardizer"));
  m.stage2.n_classes = s2.at("n_classes").get<size_t>();
  m.stage2.w = s2.at("w").get<std::vector<std::vector<double>>>();
  m.stage2.bias = s2.at("bias").get<std::vector<double>>();
  return m;
}

inline nlohmann::json mixture_to_json(const MixtureModel& m) {
  nlohmann::json j;
  j["format"] = "aspectra-mixture";
  j["version"] = 1;
  j["standardizer"] = m.standardizer.to_json();
  j["scale"] = m.scale;
  j["centroids"] = m.centroids;
  return j;
}

inline MixtureModel mixture_from_json(const nlohmann::json& j) {
  if (j.value("format", "") != "aspectra-mixture")
    throw std::runtime_error("mixture_from_json: not a mixture model file");
  MixtureModel m;
  m.standardizer = Standardizer::from_json(j.at("standardizer"));
  m.scale = j.at("scale").get<std::vector<double>>();
  m.centroids = j.at("centroids").get<std::vector<std::vector<double>>>();
  return m;
}

}  // namespace aspectra

#pragma once

#include <map>
#include <optional>

#include "aspectra/common.hpp"
#include "aspectra/logstore.hpp"

namespace aspectra {

// ---------------------------------------------------------------------------
// Seasonality strength via classical additive decomposition.
//
// Trend is a centered moving average (2xM MA for even periods), the seasonal
// component is the mean detrended value per phase (re-centered to sum 0), and
// the remainder is what is left. Strength = max(0, 1 - Var(R)/Var(S+R)).

inline double seasonality(const std::vector<double>& x, int period = 7) {
  if (period < 2) throw std::invalid_argument("seasonality: period must be >= 2");
  size_t n = x.size();
  size_t m = size_t(period);
  if (n < 2 * m) throw std::invalid_argument("seasonality: insufficient data");

  std::vector<double> trend(n, std::numeric_limits<double>::quiet_NaN());
  if (m % 2 == 1) {
    size_t half = m / 2;
    for (size_t t = half; t + half < n; ++t) {
      double s = 0;
      for (size_t j = t - half; j <= t + half; ++j) s += x[j];
      trend[t] = s / double(m);
    }
  } else {
    size_t half = m / 2;
    for (size_t t = half; t + half < n; ++t) {
      double s = 0.5 * x[t - half] + 0.5 * x[t + half];
      for (size_t j = t - half + 1; j < t + half; ++j) s += x[j];
      trend[t] = s / double(m);
    }
  }

  std::vector<double> phase_sum(m, 0.0);
  std::vector<int> phase_cnt(m, 0);
  for (size_t t = 0; t < n; ++t) {
    if (std::isnan(trend[t])) continue;
    phase_sum[t % m] += x[t] - trend[t];
    ++phase_cnt[t % m];
  }
  std::vector<double> seasonal(m, 0.0);
  double mean_idx = 0;
  int filled = 0;
  for (size_t p = 0; p < m; ++p) {
    if (phase_cnt[p] > 0) {
      seasonal[p] = phase_sum[p] / phase_cnt[p];
      mean_idx += seasonal[p];
      ++filled;
    }
  }
  if (filled > 0) mean_idx /= filled;
  for (double& v : seasonal) v -= mean_idx;

  std::vector<double> rem, detr;
  for (size_t t = 0; t < n; ++t) {
    if (std::isnan(trend[t])) continue;
    double d = x[t] - trend[t];
    detr.push_back(d);                  // S + R
    rem.push_back(d - seasonal[t % m]);  // R
  }
  if (detr.size() < 2) return 0.0;
  double var_sr = variance_of(detr);
  if (var_sr <= 0.0) return 0.0;
  double f = 1.0 - variance_of(rem) / var_sr;
  return std::clamp(f, 0.0, 1.0);
}

// ---------------------------------------------------------------------------
// Lag-1 autocorrelation.

inline double autocorr_lag1(const std::vector<double>& x) {
  size_t n = x.size();
  if (n < 3) throw std::invalid_argument("autocorr_lag1: need at least 3 points");
  double mean = mean_of(x);
  double num = 0, den = 0;
  for (size_t t = 0; t < n; ++t) {
    double d = x[t] - mean;
    den += d * d;
    if (t + 1 < n) num += d * (x[t + 1] - mean);
  }
  if (den == 0.0) throw std::domain_error("autocorr_lag1: constant series");
  return num / den;
}

// ---------------------------------------------------------------------------
// Goodman-Kruskal gamma over two ranked lists. Items missing from one list
// are treated as tied at rank len+1 of that list; tied pairs count toward
// neither Nc nor Nd.

inline double rank_gamma(const std::vector<std::string>& list_t,
                         const std::vector<std::string>& list_prev) {
  if (list_t.empty() || list_prev.empty())
    throw std::invalid_argument("rank_gamma: empty ranking");
  std::map<std::string, std::pair<int, int>> ranks;  // item -> (rank_t, rank_prev)
  int phantom_t = int(list_t.size()) + 1;
  int phantom_p = int(list_prev.size()) + 1;
  {
    // first occurrence wins; zero marks "not ranked in that list yet"
    int r = 1;
    for (auto& item : list_t) {
      auto& pr = ranks[item];
      if (pr.first == 0) pr.first = r;
      ++r;
    }
    r = 1;
    for (auto& item : list_prev) {
      auto& pr = ranks[item];
      if (pr.second == 0) pr.second = r;
      ++r;
    }
    for (auto& [item, pr] : ranks) {
      if (pr.first == 0) pr.first = phantom_t;
      if (pr.second == 0) pr.second = phantom_p;
    }
  }
  std::vector<std::pair<int, int>> v;
  v.reserve(ranks.size());
  for (auto& [item, pr] : ranks) v.push_back(pr);
  long nc = 0, nd = 0;
  for (size_t i = 0; i < v.size(); ++i) {
    for (size_t j = i + 1; j < v.size(); ++j) {
      int da = v[i].first - v[j].first;
      int db = v[i].second - v[j].second;
      if (da == 0 || db == 0) continue;
      if ((da > 0) == (db > 0)) ++nc;
      else ++nd;
    }
  }
  if (nc + nd == 0) return 0.0;
  return double(nc - nd) / double(nc + nd);
}

// ---------------------------------------------------------------------------
// Additive Holt-Winters triple exponential smoothing, parameters picked from
// a coarse grid by in-sample one-step SSE.

struct HwModel {
  double alpha = 0, beta = 0, gamma = 0;
  double level = 0, trend = 0;
  std::vector<double> season;     // s[n-m .. n-1]
  std::vector<double> residuals;  // one-step in-sample errors, t in [m, n)
  double sse = 0;
  int period = 0;

  double forecast(int h) const {
    if (h < 1) throw std::invalid_argument("forecast: horizon must be >= 1");
    size_t m = season.size();
    return level + h * trend + season[size_t((h - 1) % int(m))];
  }
  double residual_std() const {
    if (residuals.empty()) return 0.0;
    double mu = mean_of(residuals);
    double acc = 0;
    for (double r : residuals) acc += (r - mu) * (r - mu);
    return std::sqrt(acc / double(residuals.size()));
  }
};

namespace detail {

inline HwModel hw_run(const std::vector<double>& x, int period, double alpha, double beta,
                      double gamma) {
  size_t n = x.size();
  size_t m = size_t(period);
  double l = 0, b = 0;
  for (size_t j = 0; j < m; ++j) l += x[j];
  l /= double(m);
  double mean2 = 0;
  for (size_t j = m; j < 2 * m; ++j) mean2 += x[j];
  mean2 /= double(m);
  b = (mean2 - l) / double(m);
  std::vector<double> s(n, 0.0);
  for (size_t j = 0; j < m; ++j) s[j] = x[j] - l;

  HwModel model;
  model.alpha = alpha;
  model.beta = beta;
  model.gamma = gamma;
  model.period = period;
  for (size_t t = m; t < n; ++t) {
    double yhat = l + b + s[t - m];
    double err = x[t] - yhat;
    model.residuals.push_back(err);
    model.sse += err * err;
    double l_new = alpha * (x[t] - s[t - m]) + (1.0 - alpha) * (l + b);
    b = beta * (l_new - l) + (1.0 - beta) * b;
    s[t] = gamma * (x[t] - l_new) + (1.0 - gamma) * s[t - m];
    l = l_new;
  }
  model.level = l;
  model.trend = b;
  model.season.assign(s.begin() + long(n - m), s.end());
  return model;
}

}  // namespace detail

inline HwModel holt_winters_fit(const std::vector<double>& x, int period = 7) {
  if (period < 2) throw std::invalid_argument("holt_winters: period must be >= 2");
  size_t m = size_t(period);
  if (x.size() < 2 * m) throw std::invalid_argument("holt_winters: insufficient data");
  static const double grid[] = {0.05, 0.20, 0.35, 0.50, 0.65, 0.80, 0.95};
  std::optional<HwModel> best;
  for (double a : grid)
    for (double b : grid)
      for (double g : grid) {
        HwModel mdl = detail::hw_run(x, period, a, b, g);
        if (!std::isfinite(mdl.sse)) continue;
        if (!best || mdl.sse < best->sse) best = std::move(mdl);
      }
  if (!best) throw std::runtime_error("holt_winters: no finite fit");
  return *best;
}

inline std::vector<double> holt_winters_forecast(const std::vector<double>& x, int period,
                                                 int horizon) {
  if (horizon < 1) throw std::invalid_argument("holt_winters: horizon must be >= 1");
  HwModel mdl = holt_winters_fit(x, period);
  std::vector<double> out;
  for (int h = 1; h <= horizon; ++h) out.push_back(mdl.forecast(h));
  return out;
}

// |last observation - its one-step forecast| / (sigma_residual + 1e-9),
// with the model fitted on the prefix that excludes the last observation.
inline double surprise(const std::vector<double>& x, int period = 7) {
  if (x.size() < 2 * size_t(period) + 1)
    throw std::invalid_argument("surprise: insufficient data");
  std::vector<double> prefix(x.begin(), x.end() - 1);
  HwModel mdl = holt_winters_fit(prefix, period);
  double yhat = mdl.forecast(1);
  return std::abs(x.back() - yhat) / (mdl.residual_std() + 1e-9);
}

}  // namespace aspectra

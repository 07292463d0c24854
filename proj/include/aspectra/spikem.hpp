#pragma once

#include <array>
#include <numbers>

#include "aspectra/common.hpp"

namespace aspectra {

// Rise-and-fall diffusion model. One shock of size S_b enters at day n_b into
// a susceptible population N_pop; infections propagate with a power-law decay
// kernel f(tau) = beta * tau^-1.5 (truncated at 30 days) modulated by a
// periodic attention factor p(n) = 1 + p_a * |sin(2*pi*(n+P_s)/P_p)|.
struct SpikeMParams {
  double n_pop = 1000.0;  // susceptible population, > 0
  double beta = 1.0;      // infectivity, >= 0
  int n_b = 0;            // shock day, >= 0
  double s_b = 1.0;       // shock size, >= 0
  double eps = 0.0;       // background noise, >= 0
  double p_a = 0.0;       // periodicity amplitude, [0,1)
  double p_p = 7.0;       // period, > 0
  double p_s = 0.0;       // phase shift

  void validate() const {
    if (!(n_pop > 0)) throw std::invalid_argument("spikem: n_pop must be > 0");
    if (!(beta >= 0)) throw std::invalid_argument("spikem: beta must be >= 0");
    if (n_b < 0) throw std::invalid_argument("spikem: n_b must be >= 0");
    if (!(s_b >= 0)) throw std::invalid_argument("spikem: s_b must be >= 0");
    if (!(eps >= 0)) throw std::invalid_argument("spikem: eps must be >= 0");
    if (!(p_a >= 0 && p_a < 1)) throw std::invalid_argument("spikem: p_a must be in [0,1)");
    if (!(p_p > 0)) throw std::invalid_argument("spikem: p_p must be > 0");
  }
};

inline constexpr int kSpikemKernelTail = 30;

inline std::vector<double> spikem_simulate(const SpikeMParams& p, int n_days) {
  p.validate();
  if (n_days <= p.n_b) throw std::invalid_argument("spikem_simulate: n_days must exceed n_b");

  auto periodic = [&](int n) {
    return 1.0 + p.p_a * std::abs(std::sin(2.0 * std::numbers::pi * (n + p.p_s) / p.p_p));
  };
  auto kernel = [&](int tau) {
    if (tau < 1 || tau > kSpikemKernelTail) return 0.0;
    return p.beta * std::pow(double(tau), -1.5);
  };

  std::vector<double> db(size_t(n_days), 0.0);
  double u = p.n_pop;
  for (int next = p.n_b + 1; next < n_days; ++next) {
    double infection = 0.0;
    int t_lo = std::max(p.n_b, next - kSpikemKernelTail);
    for (int t = t_lo; t <= next - 1; ++t) {
      double active = db[size_t(t)] + (t == p.n_b ? p.s_b : 0.0);
      infection += active * kernel(next - t);
    }
    double val = periodic(next) * (u * infection + p.eps);
    val = std::clamp(val, 0.0, u);
    db[size_t(next)] = val;
    u -= val;
  }
  return db;
}

struct SpikeMFit {
  SpikeMParams params;
  double sse = std::numeric_limits<double>::infinity();
  bool converged = false;
  int iterations = 0;
};

namespace detail {

// Continuous parameters are optimized in a transformed space so box
// constraints hold by construction: log for positives, logit for p_a.
struct SpikemTheta {
  std::array<double, 7> v{};  // log n_pop, log beta, log s_b, log eps, logit p_a, log p_p, p_s

  static SpikemTheta from_params(const SpikeMParams& p) {
    SpikemTheta t;
    auto slog = [](double x) { return std::log(std::max(x, 1e-12)); };
    t.v[0] = slog(p.n_pop);
    t.v[1] = slog(p.beta);
    t.v[2] = slog(p.s_b);
    t.v[3] = slog(p.eps);
    double pa = std::clamp(p.p_a, 1e-9, 1.0 - 1e-9);
    t.v[4] = std::log(pa / (1.0 - pa));
    t.v[5] = slog(p.p_p);
    t.v[6] = p.p_s;
    return t;
  }
  SpikeMParams to_params(int n_b) const {
    SpikeMParams p;
    p.n_b = n_b;
    p.n_pop = std::exp(std::clamp(v[0], -20.0, 30.0));
    p.beta = std::exp(std::clamp(v[1], -20.0, 10.0));
    p.s_b = std::exp(std::clamp(v[2], -20.0, 30.0));
    p.eps = std::exp(std::clamp(v[3], -20.0, 20.0));
    p.p_a = 1.0 / (1.0 + std::exp(-std::clamp(v[4], -30.0, 30.0)));
    if (p.p_a >= 1.0) p.p_a = 1.0 - 1e-12;
    p.p_p = std::max(1e-3, std::exp(std::clamp(v[5], -10.0, 10.0)));
    p.p_s = v[6];
    return p;
  }
};

inline double spikem_sse(const SpikeMParams& p, const std::vector<double>& obs) {
  auto sim = spikem_simulate(p, int(obs.size()));
  double sse = 0;
  for (size_t i = 0; i < obs.size(); ++i) {
    double d = sim[i] - obs[i];
    sse += d * d;
  }
  return std::isfinite(sse) ? sse : std::numeric_limits<double>::infinity();
}

// Levenberg-Marquardt in the transformed space with central-difference
// Jacobian; lambda adapts by factors of 10.
inline SpikeMFit spikem_lm(const std::vector<double>& obs, SpikemTheta theta, int n_b,
                           int max_iter = 500) {
  const size_t n = obs.size();
  const size_t k = theta.v.size();
  auto residuals = [&](const SpikemTheta& th, std::vector<double>& r) {
    SpikeMParams p = th.to_params(n_b);
    auto sim = spikem_simulate(p, int(n));
    r.resize(n);
    double sse = 0;
    for (size_t i = 0; i < n; ++i) {
      r[i] = sim[i] - obs[i];
      sse += r[i] * r[i];
    }
    return std::isfinite(sse) ? sse : std::numeric_limits<double>::infinity();
  };

  std::vector<double> r0;
  double sse = residuals(theta, r0);
  double lambda = 1e-3;
  SpikeMFit fit;
  bool any_accept = false;
  int stall = 0;
  int it = 0;
  for (; it < max_iter && std::isfinite(sse) && sse > 0; ++it) {
    // Jacobian by central differences.
    std::vector<std::vector<double>> jac(k);
    const double h = 1e-5;
    bool jac_ok = true;
    for (size_t j = 0; j < k; ++j) {
      SpikemTheta tp = theta, tm = theta;
      tp.v[j] += h;
      tm.v[j] -= h;
      std::vector<double> rp, rm;
      double sp = residuals(tp, rp);
      double sm = residuals(tm, rm);
      if (!std::isfinite(sp) || !std::isfinite(sm)) {
        jac_ok = false;
        break;
      }
      jac[j].resize(n);
      for (size_t i = 0; i < n; ++i) jac[j][i] = (rp[i] - rm[i]) / (2 * h);
    }
    if (!jac_ok) break;

    // Normal equations J^T J + lambda*diag, J^T r.
    std::array<std::array<double, 7>, 7> a{};
    std::array<double, 7> g{};
    for (size_t p = 0; p < k; ++p) {
      for (size_t q = p; q < k; ++q) {
        double s = 0;
        for (size_t i = 0; i < n; ++i) s += jac[p][i] * jac[q][i];
        a[p][q] = s;
        a[q][p] = s;
      }
      double s = 0;
      for (size_t i = 0; i < n; ++i) s += jac[p][i] * r0[i];
      g[p] = s;
    }

    bool accepted = false;
    for (int trial = 0; trial < 8; ++trial) {
      auto m = a;
      for (size_t p = 0; p < k; ++p) m[p][p] += lambda * (1.0 + a[p][p]);
      // Solve m * delta = g by Gaussian elimination with partial pivoting.
      std::array<double, 7> b = g;
      std::array<std::array<double, 7>, 7> lu = m;
      std::array<size_t, 7> piv{};
      bool singular = false;
      for (size_t c = 0; c < k; ++c) piv[c] = c;
      for (size_t c = 0; c < k; ++c) {
        size_t best = c;
        for (size_t rdx = c + 1; rdx < k; ++rdx)
          if (std::abs(lu[rdx][c]) > std::abs(lu[best][c])) best = rdx;
        if (std::abs(lu[best][c]) < 1e-14) {
          singular = true;
          break;
        }
        std::swap(lu[c], lu[best]);
        std::swap(b[c], b[best]);
        for (size_t rdx = c + 1; rdx < k; ++rdx) {
          double f = lu[rdx][c] / lu[c][c];
          for (size_t cc = c; cc < k; ++cc) lu[rdx][cc] -= f * lu[c][cc];
          b[rdx] -= f * b[c];
        }
      }
      if (singular) {
        lambda *= 10;
        continue;
      }
      std::array<double, 7> delta{};
      for (size_t c = k; c-- > 0;) {
        double s = b[c];
        for (size_t cc = c + 1; cc < k; ++cc) s -= lu[c][cc] * delta[cc];
        delta[c] = s / lu[c][c];
      }
      SpikemTheta cand = theta;
      for (size_t c = 0; c < k; ++c) cand.v[c] -= delta[c];
      std::vector<double> rc;
      double sc = residuals(cand, rc);
      if (sc < sse) {
        theta = cand;
        r0 = std::move(rc);
        double rel = (sse - sc) / std::max(sse, 1e-30);
        sse = sc;
        lambda = std::max(lambda / 10, 1e-12);
        accepted = true;
        any_accept = true;
        stall = rel < 1e-10 ? stall + 1 : 0;
        break;
      }
      lambda *= 10;
      if (lambda > 1e12) break;
    }
    if (!accepted) ++stall;
    if (stall >= 3) break;
  }
  fit.iterations = it;
  fit.params = theta.to_params(n_b);
  fit.params.n_b = n_b;
  fit.sse = sse;
  fit.converged = std::isfinite(sse) && (any_accept || sse == 0.0 || it == 0);
  return fit;
}

}  // namespace detail

inline SpikeMFit spikem_fit(const std::vector<double>& obs, uint64_t seed = 42,
                            int max_iter = 500, int n_starts = 5) {
  if (obs.size() < 14) throw std::invalid_argument("spikem_fit: need at least 14 days");

  double total = 0, peak = 0;
  size_t argmax = 0;
  for (size_t i = 0; i < obs.size(); ++i) {
    total += obs[i];
    if (obs[i] > peak) {
      peak = obs[i];
      argmax = i;
    }
  }
  if (total == 0.0) {
    SpikeMFit fit;
    fit.params = SpikeMParams{1.0, 0.0, 0, 0.0, 0.0, 0.0, 7.0, 0.0};
    fit.sse = 0.0;
    fit.converged = true;
    return fit;
  }

  int hi = int(argmax);
  if (hi >= int(obs.size()) - 1) hi = int(obs.size()) - 2;
  int lo = std::max(0, hi - 7);
  std::vector<int> nb_grid;
  for (int nb = lo; nb <= hi; ++nb) nb_grid.push_back(nb);

  Rng rng(seed);
  SpikeMFit best;
  for (int start = 0; start < n_starts; ++start) {
    SpikeMParams init;
    init.n_pop = std::max(1.0, total * std::exp(rng.normal(0.0, 0.3)));
    // keep u * beta near one so the initial curve bursts over days, not at once
    init.beta = std::exp(rng.normal(0.0, 0.5)) / std::max(1.0, total);
    init.s_b = std::max(1e-3, peak / 10.0 * std::exp(rng.normal(0.0, 0.3)));
    init.eps = std::max(1e-6, total / double(obs.size()) / 10.0);
    init.p_a = 0.1;
    init.p_p = 7.0;
    init.p_s = rng.uniform(0.0, 3.0);
    auto theta = detail::SpikemTheta::from_params(init);
    for (int nb : nb_grid) {
      SpikeMFit fit = detail::spikem_lm(obs, theta, nb, max_iter);
      if (fit.sse < best.sse) best = fit;
    }
  }
  if (!std::isfinite(best.sse)) best.converged = false;
  return best;
}

}  // namespace aspectra

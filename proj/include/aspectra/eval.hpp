#pragma once

#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <set>

#include <boost/math/distributions/students_t.hpp>

#include "aspectra/common.hpp"
#include "aspectra/eventclf.hpp"
#include "aspectra/ranker.hpp"

namespace aspectra {

// ---------------------------------------------------------------------------
// Graded relevance labels: (entity, aspect, period) -> grade in {0,1,2,3}.
// CSV layout: entity, aspect, before_grade, during_grade, after_grade.

class GradedLabelSet {
 public:
  void set(const std::string& entity, const std::string& aspect, EventTime period, int grade) {
    if (grade < 0 || grade > 3) throw std::invalid_argument("label grade out of range");
    grades_[key(entity, aspect)][int(period)] = grade;
  }

  std::optional<int> find(const std::string& entity, const std::string& aspect,
                          EventTime period) const {
    auto it = grades_.find(key(entity, aspect));
    if (it == grades_.end()) return std::nullopt;
    return it->second[int(period)];
  }

  // All labeled aspects of an entity with their grade for one period.
  std::map<std::string, int> grades_for(const std::string& entity, EventTime period) const {
    std::map<std::string, int> out;
    std::string prefix = entity + "\x1f";
    for (auto it = grades_.lower_bound(prefix); it != grades_.end(); ++it) {
      if (it->first.compare(0, prefix.size(), prefix) != 0) break;
      out[it->first.substr(prefix.size())] = it->second[int(period)];
    }
    return out;
  }

  size_t size() const { return grades_.size(); }

  void save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write labels: " + path);
    out << "entity,aspect,before_grade,during_grade,after_grade\n";
    for (const auto& [k, g] : grades_) {
      auto sep = k.find('\x1f');
      out << csv_escape(k.substr(0, sep)) << "," << csv_escape(k.substr(sep + 1)) << "," << g[0]
          << "," << g[1] << "," << g[2] << "\n";
    }
  }

  static GradedLabelSet load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open labels: " + path);
    GradedLabelSet set;
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      std::string_view sv = strip_cr(line);
      if (sv.empty()) continue;
      auto cols = csv_split(sv);
      if (line_no == 1 && cols.size() >= 1 && cols[0] == "entity") continue;
      if (cols.size() != 5)
        throw std::runtime_error("labels line " + std::to_string(line_no) + ": expected 5 columns");
      for (int p = 0; p < 3; ++p) {
        int g = std::stoi(cols[size_t(2 + p)]);
        set.set(cols[0], cols[1], EventTime(p), g);
      }
    }
    return set;
  }

 private:
  static std::string key(const std::string& entity, const std::string& aspect) {
    return entity + "\x1f" + aspect;
  }
  std::map<std::string, std::array<int, 3>> grades_;
};

// ---------------------------------------------------------------------------
// Graded metrics. Gains: grade 3 -> 7, grade 2 -> 3, grades 1/0/absent -> 0
// (2^g - 1 with the "irrelevant" grade flattened to zero gain).

inline double ndcg_gain(int grade) {
  switch (grade) {
    case 3: return 7.0;
    case 2: return 3.0;
    default: return 0.0;
  }
}

inline double ndcg_at_k(const RankedList& ranked, const std::map<std::string, int>& grades,
                        int k) {
  if (k < 1) throw std::invalid_argument("ndcg_at_k: k must be >= 1");
  auto gain_of = [&](const std::string& aspect) {
    auto it = grades.find(aspect);
    return it == grades.end() ? 0.0 : ndcg_gain(it->second);
  };
  double dcg = 0;
  for (size_t r = 0; r < ranked.size() && int(r) < k; ++r)
    dcg += gain_of(ranked[r].aspect) / std::log2(double(r + 2));
  std::vector<double> gains;
  for (const auto& item : ranked) gains.push_back(gain_of(item.aspect));
  std::sort(gains.begin(), gains.end(), std::greater<double>());
  double idcg = 0;
  for (size_t r = 0; r < gains.size() && int(r) < k; ++r)
    idcg += gains[r] / std::log2(double(r + 2));
  if (idcg == 0.0) return 0.0;
  return dcg / idcg;
}

inline double recall_at_k(const RankedList& ranked, const std::map<std::string, int>& grades,
                          int k) {
  if (k < 1) throw std::invalid_argument("recall_at_k: k must be >= 1");
  auto relevant = [&](const std::string& aspect) {
    auto it = grades.find(aspect);
    return it != grades.end() && it->second >= 2;
  };
  long total = 0, hit = 0;
  for (const auto& item : ranked)
    if (relevant(item.aspect)) ++total;
  for (size_t r = 0; r < ranked.size() && int(r) < k; ++r)
    if (relevant(ranked[r].aspect)) ++hit;
  if (total == 0) return 0.0;
  return double(hit) / double(total);
}

// ---------------------------------------------------------------------------
// Evaluation protocols over entities with event days.

struct EntityDay {
  std::string entity;
  Day event_day = 0;
};

struct RollingTrial {
  int test_bin = 0;
  std::vector<std::string> train;
  std::vector<std::string> test;
};

// Chronological binning; trial i trains on every bin before its test bin.
inline std::vector<RollingTrial> rolling_cv(std::vector<EntityDay> entities, int n_bins = 10,
                                            int test_bins = 4) {
  if (entities.size() < size_t(n_bins))
    throw std::invalid_argument("rolling_cv: fewer entities than bins");
  if (test_bins < 1 || test_bins > n_bins) throw std::invalid_argument("rolling_cv: bad test_bins");
  std::sort(entities.begin(), entities.end(), [](const EntityDay& a, const EntityDay& b) {
    if (a.event_day != b.event_day) return a.event_day < b.event_day;
    return a.entity < b.entity;
  });
  size_t n = entities.size();
  auto bin_start = [&](int b) { return size_t(b) * n / size_t(n_bins); };
  std::vector<RollingTrial> trials;
  for (int i = 0; i < test_bins; ++i) {
    RollingTrial t;
    t.test_bin = n_bins - test_bins + i;
    size_t tr_end = bin_start(t.test_bin);
    size_t te_end = bin_start(t.test_bin + 1);
    for (size_t j = 0; j < tr_end; ++j) t.train.push_back(entities[j].entity);
    for (size_t j = tr_end; j < te_end; ++j) t.test.push_back(entities[j].entity);
    trials.push_back(std::move(t));
  }
  return trials;
}

struct MonthSplit {
  std::vector<std::string> train;
  std::vector<std::string> test;
};

// The chronologically last month is the test set, everything earlier trains.
inline MonthSplit split_train_test_by_month(const std::vector<EntityDay>& entities) {
  if (entities.empty()) throw std::invalid_argument("split_train_test_by_month: no entities");
  int last_month = std::numeric_limits<int>::min();
  for (const auto& e : entities) last_month = std::max(last_month, month_index(e.event_day));
  MonthSplit split;
  for (const auto& e : entities) {
    if (month_index(e.event_day) == last_month)
      split.test.push_back(e.entity);
    else
      split.train.push_back(e.entity);
  }
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.test.begin(), split.test.end());
  return split;
}

// ---------------------------------------------------------------------------
// Paired two-sided t-test.

inline double paired_t_test(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw std::invalid_argument("paired_t_test: length mismatch");
  size_t n = a.size();
  if (n < 2) return 1.0;
  std::vector<double> d(n);
  for (size_t i = 0; i < n; ++i) d[i] = a[i] - b[i];
  double mean = mean_of(d);
  double var = 0;
  for (double x : d) var += (x - mean) * (x - mean);
  var /= double(n - 1);
  if (var <= 0.0) return 1.0;
  double t = mean / std::sqrt(var / double(n));
  boost::math::students_t dist(double(n - 1));
  double p = 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t)));
  return std::clamp(p, 0.0, 1.0);
}

inline std::string significance_marker(double p) {
  if (p < 0.01) return "***";
  if (p < 0.05) return "**";
  if (p < 0.1) return "*";
  return "";
}

// ---------------------------------------------------------------------------
// Method comparison: per-method paired metric samples (one value per ranked
// list), reported with percent deltas and t-test markers vs a baseline row.

struct MethodScores {
  std::string name;
  std::vector<double> ndcg3, ndcg10, recall3, recall10;
};

struct ComparisonCell {
  double value = 0;
  double delta_pct = 0;  // vs baseline
  double p_value = 1.0;
};

struct ComparisonRow {
  std::string method;
  std::array<ComparisonCell, 4> cells;  // NDCG@3, NDCG@10, R@3, R@10
  bool is_baseline = false;
};

struct ComparisonReport {
  std::string baseline;
  std::vector<ComparisonRow> rows;

  std::string to_csv() const {
    std::ostringstream os;
    os << "method,ndcg3,ndcg3_delta_pct,ndcg3_p,ndcg10,ndcg10_delta_pct,ndcg10_p,"
          "recall3,recall3_delta_pct,recall3_p,recall10,recall10_delta_pct,recall10_p\n";
    for (const auto& r : rows) {
      os << csv_escape(r.method);
      for (const auto& c : r.cells)
        os << "," << fmt_double(c.value) << "," << fmt_double(c.delta_pct) << ","
           << fmt_double(c.p_value);
      os << "\n";
    }
    return os.str();
  }

  std::string to_text() const {
    static const char* metric_names[4] = {"NDCG@3", "NDCG@10", "R@3", "R@10"};
    std::ostringstream os;
    os << "Method comparison (baseline: " << baseline << "; *, **, *** mark p<0.1, p<0.05, "
          "p<0.01 on a paired t-test vs the baseline)\n\n";
    os << std::left << std::setw(16) << "method";
    for (const auto* mn : metric_names) os << std::right << std::setw(19) << mn;
    os << "\n";
    for (const auto& r : rows) {
      os << std::left << std::setw(16) << r.method;
      for (const auto& c : r.cells) {
        std::ostringstream cell;
        cell << std::fixed << std::setprecision(4) << c.value;
        if (!r.is_baseline) {
          cell << " (" << std::showpos << std::setprecision(1) << c.delta_pct << "%"
               << std::noshowpos << significance_marker(c.p_value) << ")";
        }
        os << std::right << std::setw(19) << cell.str();
      }
      os << "\n";
    }
    return os.str();
  }
};

inline ComparisonReport build_comparison(const std::vector<MethodScores>& methods,
                                         const std::string& baseline_name) {
  const MethodScores* base = nullptr;
  for (const auto& m : methods)
    if (m.name == baseline_name) base = &m;
  if (!base) throw std::invalid_argument("build_comparison: baseline method not found");
  ComparisonReport rep;
  rep.baseline = baseline_name;
  for (const auto& m : methods) {
    ComparisonRow row;
    row.method = m.name;
    row.is_baseline = (m.name == baseline_name);
    const std::vector<double>* samples[4] = {&m.ndcg3, &m.ndcg10, &m.recall3, &m.recall10};
    const std::vector<double>* base_samples[4] = {&base->ndcg3, &base->ndcg10, &base->recall3,
                                                  &base->recall10};
    for (int c = 0; c < 4; ++c) {
      ComparisonCell cell;
      cell.value = samples[c]->empty() ? 0.0 : mean_of(*samples[c]);
      double bval = base_samples[c]->empty() ? 0.0 : mean_of(*base_samples[c]);
      cell.delta_pct = bval != 0.0 ? (cell.value - bval) / bval * 100.0 : 0.0;
      cell.p_value = row.is_baseline ? 1.0 : paired_t_test(*samples[c], *base_samples[c]);
      row.cells[size_t(c)] = cell;
    }
    rep.rows.push_back(std::move(row));
  }
  return rep;
}

}  // namespace aspectra

#pragma once

#include <array>
#include <fstream>
#include <map>
#include <set>
#include <unordered_map>

#include <json.hpp>

#include "aspectra/common.hpp"
#include "aspectra/logstore.hpp"
#include "aspectra/signals.hpp"

namespace aspectra {

// ---------------------------------------------------------------------------
// Corpus of entity articles (sectioned, with in-links) and per-URL texts.
// JSONL input: {"entity_id","title","sections":[{"title","text"}],"inlinks":[..]}
// or {"url","text"} per line.

struct Section {
  std::string title;
  std::unordered_map<std::string, long> tf;
  long length = 0;
};

struct EntityDoc {
  std::string entity_id;
  std::string title;
  std::vector<Section> sections;
  std::vector<std::string> inlinks;
};

class CorpusStore {
 public:
  void add_entity_doc(const std::string& entity_id, const std::string& title,
                      const std::vector<std::pair<std::string, std::string>>& sections,
                      const std::vector<std::string>& inlinks) {
    if (sections.empty())
      throw std::invalid_argument("corpus: entity '" + entity_id + "' has no sections");
    EntityDoc doc;
    doc.entity_id = entity_id;
    doc.title = title;
    doc.inlinks = inlinks;
    for (const auto& [stitle, text] : sections) {
      if (text.empty())
        throw std::invalid_argument("corpus: empty section text in entity '" + entity_id + "'");
      doc.sections.push_back(make_section(stitle, text));
      absorb_background(text);
    }
    entities_[entity_id] = std::move(doc);
  }

  void add_url_doc(const std::string& url, const std::string& text) {
    urls_[url] = make_section(url, text);
    absorb_background(text);
  }

  static CorpusStore load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open corpus: " + path);
    CorpusStore store;
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty()) continue;
      nlohmann::json j;
      try {
        j = nlohmann::json::parse(line);
      } catch (const std::exception& e) {
        throw std::runtime_error("corpus line " + std::to_string(line_no) + ": " + e.what());
      }
      if (j.contains("url")) {
        store.add_url_doc(j.at("url").get<std::string>(), j.at("text").get<std::string>());
      } else {
        std::vector<std::pair<std::string, std::string>> sections;
        for (const auto& s : j.at("sections"))
          sections.emplace_back(s.value("title", ""), s.at("text").get<std::string>());
        std::vector<std::string> inlinks;
        if (j.contains("inlinks"))
          inlinks = j.at("inlinks").get<std::vector<std::string>>();
        store.add_entity_doc(j.at("entity_id").get<std::string>(), j.value("title", ""),
                             sections, inlinks);
      }
    }
    if (store.entities_.empty()) throw std::runtime_error("corpus has no entity documents: " + path);
    return store;
  }

  bool has_entity(const std::string& id) const { return entities_.count(id) > 0; }
  const EntityDoc& entity(const std::string& id) const {
    auto it = entities_.find(id);
    if (it == entities_.end()) throw std::invalid_argument("corpus: unknown entity '" + id + "'");
    return it->second;
  }
  const Section* url_doc(const std::string& url) const {
    auto it = urls_.find(url);
    return it == urls_.end() ? nullptr : &it->second;
  }

  // Own article plus all in-link articles present in the store.
  std::vector<const Section*> collection_sections(const std::string& entity_id) const {
    const EntityDoc& doc = entity(entity_id);
    std::vector<const Section*> out;
    for (const auto& s : doc.sections) out.push_back(&s);
    for (const auto& link : doc.inlinks) {
      auto it = entities_.find(link);
      if (it == entities_.end()) continue;
      for (const auto& s : it->second.sections) out.push_back(&s);
    }
    return out;
  }

  double background_prob(const std::string& token) const {
    if (background_total_ == 0) return 0.0;
    auto it = background_.find(token);
    return it == background_.end() ? 0.0 : double(it->second) / double(background_total_);
  }
  long background_total() const { return background_total_; }
  size_t entity_count() const { return entities_.size(); }

 private:
  static Section make_section(const std::string& title, const std::string& text) {
    Section s;
    s.title = title;
    for (auto& t : tokenize_text(text)) {
      ++s.tf[t];
      ++s.length;
    }
    return s;
  }
  void absorb_background(const std::string& text) {
    for (auto& t : tokenize_text(text)) {
      ++background_[t];
      ++background_total_;
    }
  }

  std::map<std::string, EntityDoc> entities_;
  std::map<std::string, Section> urls_;
  std::unordered_map<std::string, long> background_;
  long background_total_ = 0;
};

// ---------------------------------------------------------------------------
// Long-term salience features.

// Per term: the best tf*idf over the entity collection's sections; the aspect
// scores the mean over its terms. Terms absent everywhere contribute 0.
inline double tfidf_salience(const std::string& aspect, const std::string& entity_id,
                             const CorpusStore& corpus) {
  auto terms = tokenize_text(aspect);
  if (terms.empty()) throw std::invalid_argument("tfidf_salience: empty aspect");
  auto sections = corpus.collection_sections(entity_id);
  double n_sec = double(sections.size());
  double sum = 0;
  for (const auto& w : terms) {
    long df = 0;
    long best_tf = 0;
    for (const Section* s : sections) {
      auto it = s->tf.find(w);
      if (it != s->tf.end()) {
        ++df;
        best_tf = std::max(best_tf, it->second);
      }
    }
    if (df == 0) continue;
    double idf = std::log(n_sec / double(df));
    double best = 0;
    for (const Section* s : sections) {
      auto it = s->tf.find(w);
      if (it != s->tf.end()) best = std::max(best, double(it->second) * idf);
    }
    sum += best;
  }
  return sum / double(terms.size());
}

// Frequency-weighted count of log queries up to `t` that mention one of the
// entity's aliases and the word `w`.
inline long cooccurrence_count(const std::string& w, const std::vector<uint32_t>& entity_qids,
                               const LogIndex& index, Day t) {
  long total = 0;
  for (uint32_t qid : entity_qids) {
    const std::string& q = index.query_text(qid);
    if (!contains_at_word_boundary(q, w)) continue;
    total += index.freq_between_id(qid, index.first_day(), std::min(t, index.last_day()));
  }
  return total;
}

inline long aspect_cooccurrence(const std::string& aspect,
                                const std::vector<uint32_t>& entity_qids, const LogIndex& index,
                                Day d0, Day d1) {
  auto terms = tokenize_text(aspect);
  long total = 0;
  for (uint32_t qid : entity_qids) {
    const std::string& q = index.query_text(qid);
    bool all = true;
    for (const auto& w : terms)
      if (!contains_at_word_boundary(q, w)) {
        all = false;
        break;
      }
    if (!all) continue;
    total += index.freq_between_id(qid, std::max(d0, index.first_day()),
                                   std::min(d1, index.last_day()));
  }
  return total;
}

// Share of the entity's aspect-co-occurrence mass (cumulative up to t) that
// belongs to this aspect, normalized over the candidate set.
inline double mle_salience(const std::string& aspect, const std::vector<std::string>& candidates,
                           const std::vector<uint32_t>& entity_qids, const LogIndex& index, Day t,
                           bool* zero_denominator = nullptr) {
  auto term_mass = [&](const std::string& a) {
    long m = 0;
    for (const auto& w : tokenize_text(a)) m += cooccurrence_count(w, entity_qids, index, t);
    return m;
  };
  long num = term_mass(aspect);
  long den = 0;
  for (const auto& c : candidates) den += term_mass(c);
  if (den == 0) {
    if (zero_denominator) *zero_denominator = true;
    return 0.0;
  }
  return double(num) / double(den);
}

// Entropy of the aspect's daily co-occurrence distribution inside the window;
// uniform spread scores highest, a single-day point mass scores 0.
inline double entropy_salience(const std::string& aspect,
                               const std::vector<uint32_t>& entity_qids, const LogIndex& index,
                               Day d0, Day d1) {
  if (d1 < d0) throw std::invalid_argument("entropy_salience: empty window");
  std::vector<long> counts;
  long total = 0;
  for (Day d = d0; d <= d1; ++d) {
    long c = aspect_cooccurrence(aspect, entity_qids, index, d, d);
    counts.push_back(c);
    total += c;
  }
  if (total == 0) return 0.0;
  double h = 0;
  for (long c : counts) {
    if (c == 0) continue;
    double p = double(c) / double(total);
    h -= p * std::log(p);
  }
  return h;
}

inline constexpr double kLmFloor = -1e9;

namespace detail {

inline double dirichlet_lm(const std::vector<std::string>& terms,
                           const std::unordered_map<std::string, long>& tf, long doc_len,
                           const CorpusStore& corpus, double mu) {
  double sum = 0;
  for (const auto& w : terms) {
    long f = 0;
    auto it = tf.find(w);
    if (it != tf.end()) f = it->second;
    double num = double(f) + mu * corpus.background_prob(w);
    double den = double(doc_len) + mu;
    double term = (num <= 0 || den <= 0) ? kLmFloor : std::log(num / den);
    sum += std::max(term, kLmFloor);
  }
  return std::max(sum, kLmFloor);
}

}  // namespace detail

// Dirichlet-smoothed unigram log-likelihood of the aspect under the entity's
// own article.
inline double lm_salience(const std::string& aspect, const std::string& entity_id,
                          const CorpusStore& corpus, double mu = 2000.0) {
  if (corpus.entity_count() == 0) throw std::invalid_argument("lm_salience: empty corpus");
  auto terms = tokenize_text(aspect);
  if (terms.empty()) throw std::invalid_argument("lm_salience: empty aspect");
  const EntityDoc& doc = corpus.entity(entity_id);
  std::unordered_map<std::string, long> tf;
  long len = 0;
  for (const auto& s : doc.sections) {
    for (const auto& [w, c] : s.tf) tf[w] += c;
    len += s.length;
  }
  return detail::dirichlet_lm(terms, tf, len, corpus, mu);
}

// ---------------------------------------------------------------------------
// Short-term interest features.

inline double temporal_click_entropy(const std::string& query, const LogIndex& index, Day day) {
  auto qid = index.query_id(normalize_query(query));
  if (!qid) return 0.0;
  auto clicks = index.clicks_on(*qid, day);
  long total = 0;
  for (const auto& [url, c] : clicks) total += c;
  if (total == 0) return 0.0;
  double h = 0;
  for (const auto& [url, c] : clicks) {
    double p = double(c) / double(total);
    h -= p * std::log(p);
  }
  return h;
}

// Short-minus-long moving average at position t.
inline double trending_momentum(const std::vector<double>& ts, int t, int i_s = 1, int i_l = 5) {
  if (i_s < 1 || i_l < i_s) throw std::invalid_argument("trending_momentum: bad intervals");
  if (t < i_l - 1 || size_t(t) >= ts.size())
    throw std::invalid_argument("trending_momentum: insufficient history");
  auto ma = [&](int len) {
    double s = 0;
    for (int i = t - len + 1; i <= t; ++i) s += ts[size_t(i)];
    return s / double(len);
  };
  return ma(i_s) - ma(i_l);
}

// Maximum Pearson correlation between the entity and aspect series over lags
// {-1, 0, +1}, computed on a trailing window ending at t.
inline double cross_correlation(const std::vector<double>& ts_e, const std::vector<double>& ts_a,
                                int t, int window = 14, int max_lag = 1,
                                bool* degenerate = nullptr) {
  if (ts_e.size() != ts_a.size())
    throw std::invalid_argument("cross_correlation: series length mismatch");
  if (t < 0 || size_t(t) >= ts_e.size())
    throw std::invalid_argument("cross_correlation: t out of range");
  int lo = std::max(0, t - window + 1);
  double best = -std::numeric_limits<double>::infinity();
  bool any = false;
  for (int lag = -max_lag; lag <= max_lag; ++lag) {
    std::vector<double> xs, ys;
    for (int i = lo; i <= t; ++i) {
      int j = i + lag;
      if (j < 0 || size_t(j) >= ts_a.size()) continue;
      xs.push_back(ts_e[size_t(i)]);
      ys.push_back(ts_a[size_t(j)]);
    }
    if (xs.size() < 3) continue;
    try {
      best = std::max(best, pearson(xs, ys));
      any = true;
    } catch (const std::domain_error&) {
      // zero variance at this lag
    }
  }
  if (!any) {
    if (degenerate) *degenerate = true;
    return 0.0;
  }
  return best;
}

// Aspect log-likelihood under the day's hot reading material: the
// concatenated texts of the k URLs most clicked for the entity that day.
inline double temporal_lm(const std::string& aspect, const std::vector<uint32_t>& entity_qids,
                          const CorpusStore& corpus, const LogIndex& index, Day day, int k = 3,
                          double mu = 2000.0, bool* missing = nullptr) {
  auto terms = tokenize_text(aspect);
  if (terms.empty()) throw std::invalid_argument("temporal_lm: empty aspect");
  std::map<std::string, long> url_clicks;
  for (uint32_t qid : entity_qids)
    for (const auto& [url, c] : index.clicks_on(qid, day)) url_clicks[url] += c;
  if (url_clicks.empty()) {
    if (missing) *missing = true;
    return 0.0;
  }
  std::vector<std::pair<std::string, long>> ranked(url_clicks.begin(), url_clicks.end());
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  if (int(ranked.size()) > k) ranked.resize(size_t(k));

  std::unordered_map<std::string, long> tf;
  long len = 0;
  for (const auto& [url, c] : ranked) {
    const Section* doc = corpus.url_doc(url);
    if (!doc) continue;
    for (const auto& [w, f] : doc->tf) tf[w] += f;
    len += doc->length;
  }
  if (len == 0) {
    if (missing) *missing = true;
    return 0.0;
  }
  return detail::dirichlet_lm(terms, tf, len, corpus, mu);
}

// ---------------------------------------------------------------------------
// Assembled per-(entity, aspect, day) feature vector. Each value carries a
// presence bit: 0 means the value was substituted because the underlying data
// was missing or degenerate, so learners can tell absent from zero.

inline constexpr size_t kNumAspectFeatures = 9;

inline const std::array<const char*, kNumAspectFeatures>& aspect_feature_names() {
  static const std::array<const char*, kNumAspectFeatures> names = {
      "tfidf", "mle",      "entropy",    "lm",         "click_entropy",
      "momentum", "cross_corr", "temporal_lm", "rwr_score"};
  return names;
}

// Long-term salience family (indices into the feature array).
inline const std::vector<size_t>& salience_feature_indices() {
  static const std::vector<size_t> idx = {0, 1, 2, 3};
  return idx;
}
// Short-term interest family.
inline const std::vector<size_t>& timeliness_feature_indices() {
  static const std::vector<size_t> idx = {4, 5, 6, 7};
  return idx;
}

struct AspectFeatureVector {
  std::array<double, kNumAspectFeatures> values{};
  std::array<double, kNumAspectFeatures> presence{};

  // learner input: values then presence bits
  std::vector<double> full() const {
    std::vector<double> out(values.begin(), values.end());
    out.insert(out.end(), presence.begin(), presence.end());
    return out;
  }
  void validate() const {
    for (double v : values)
      if (!std::isfinite(v)) throw std::runtime_error("feature vector has non-finite value");
  }
};

struct FeatureParams {
  double mu = 2000.0;
  int top_k_urls = 3;
  int i_s = 1;
  int i_l = 5;
  int cc_window = 14;
  int entropy_window = 28;
};

// Context for one entity at one hitting day.
struct EntityDayContext {
  std::string entity_id;
  std::vector<uint32_t> entity_qids;
  std::vector<double> entity_series;  // daily from log start to the hitting day
  Day day = 0;
};

inline AspectFeatureVector compute_aspect_features(
    const std::string& aspect, double rwr_score, const std::vector<std::string>& candidates,
    const EntityDayContext& ctx, const LogIndex& index, const CorpusStore& corpus,
    const FeatureParams& params = {}) {
  AspectFeatureVector out;
  out.presence.fill(1.0);

  out.values[0] = corpus.has_entity(ctx.entity_id)
                      ? tfidf_salience(aspect, ctx.entity_id, corpus)
                      : 0.0;
  if (!corpus.has_entity(ctx.entity_id)) out.presence[0] = 0.0;

  bool zero_den = false;
  out.values[1] = mle_salience(aspect, candidates, ctx.entity_qids, index, ctx.day, &zero_den);
  if (zero_den) out.presence[1] = 0.0;

  Day w0 = std::max(index.first_day(), ctx.day - Day(params.entropy_window - 1));
  out.values[2] = entropy_salience(aspect, ctx.entity_qids, index, w0, ctx.day);

  if (corpus.has_entity(ctx.entity_id)) {
    out.values[3] = lm_salience(aspect, ctx.entity_id, corpus, params.mu);
  } else {
    out.values[3] = 0.0;
    out.presence[3] = 0.0;
  }

  out.values[4] = temporal_click_entropy(aspect, index, ctx.day);

  auto qid = index.query_id(normalize_query(aspect));
  std::vector<double> aspect_series;
  if (qid) {
    aspect_series = index.daily_series_id(*qid, index.first_day(), ctx.day).values;
  } else {
    aspect_series.assign(ctx.entity_series.size(), 0.0);
  }
  int t = int(aspect_series.size()) - 1;
  if (t >= params.i_l - 1) {
    out.values[5] = trending_momentum(aspect_series, t, params.i_s, params.i_l);
  } else {
    out.values[5] = 0.0;
    out.presence[5] = 0.0;
  }

  bool cc_degenerate = false;
  if (ctx.entity_series.size() == aspect_series.size() && t >= 2) {
    out.values[6] = cross_correlation(ctx.entity_series, aspect_series, t, params.cc_window, 1,
                                      &cc_degenerate);
  } else {
    cc_degenerate = true;
    out.values[6] = 0.0;
  }
  if (cc_degenerate) out.presence[6] = 0.0;

  bool lm_missing = false;
  out.values[7] = temporal_lm(aspect, ctx.entity_qids, corpus, index, ctx.day, params.top_k_urls,
                              params.mu, &lm_missing);
  if (lm_missing) out.presence[7] = 0.0;

  out.values[8] = rwr_score;
  out.validate();
  return out;
}

}  // namespace aspectra

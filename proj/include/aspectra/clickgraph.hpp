#pragma once

#include <iostream>
#include <limits>

#include "aspectra/logstore.hpp"

namespace aspectra {

constexpr double kMinEdgeWeight = 1e-9;

// cf * ln(N / (qf + 1)). Degenerate arguments (N <= qf + 1) clamp to a small
// positive weight so the edge survives row normalization.
inline double cf_iqf(long cf, long qf, long n_queries, bool* clamped = nullptr) {
  if (cf < 1) throw std::invalid_argument("cf_iqf: cf must be >= 1");
  if (qf < 1) throw std::invalid_argument("cf_iqf: qf must be >= 1");
  if (n_queries <= qf + 1) {
    if (clamped) *clamped = true;
    return kMinEdgeWeight;
  }
  double w = double(cf) * std::log(double(n_queries) / double(qf + 1));
  if (w <= 0.0) {
    if (clamped) *clamped = true;
    return kMinEdgeWeight;
  }
  return w;
}

// Bipartite query-URL graph. Node ids: queries first, then URLs. Transition
// probabilities are row-normalized CF-IQF weights on both directions.
class ClickGraph {
 public:
  struct Edge {
    uint32_t query;  // index into query_names
    uint32_t url;    // index into url_names
    long cf;
    long qf;        // distinct queries that clicked this url
    double weight;  // cf-iqf
  };

  const std::vector<std::string>& query_names() const { return query_names_; }
  const std::vector<std::string>& url_names() const { return url_names_; }
  const std::vector<Edge>& edges() const { return edges_; }
  size_t num_nodes() const { return query_names_.size() + url_names_.size(); }
  size_t num_queries() const { return query_names_.size(); }
  long clamped_edges() const { return clamped_; }

  std::optional<uint32_t> query_node(std::string_view q) const {
    auto it = query_pos_.find(std::string(q));
    if (it == query_pos_.end()) return std::nullopt;
    return it->second;
  }

  // out_* give the row-stochastic adjacency in CSR form over all nodes
  // (queries: [0, nq), urls: [nq, nq+nu)).
  const std::vector<size_t>& row_ptr() const { return row_ptr_; }
  const std::vector<uint32_t>& col() const { return col_; }
  const std::vector<double>& prob() const { return prob_; }

  static ClickGraph from_edges(std::vector<std::string> queries,
                               std::vector<std::string> urls, std::vector<Edge> edges) {
    ClickGraph g;
    g.query_names_ = std::move(queries);
    g.url_names_ = std::move(urls);
    g.edges_ = std::move(edges);
    for (uint32_t i = 0; i < g.query_names_.size(); ++i) g.query_pos_[g.query_names_[i]] = i;
    g.build_transitions();
    return g;
  }

  void export_edges_tsv(std::ostream& out) const {
    out << "query\turl\tcf\tqf\tweight\n";
    for (const auto& e : edges_)
      out << query_names_[e.query] << "\t" << url_names_[e.url] << "\t" << e.cf << "\t"
          << e.qf << "\t" << fmt_double(e.weight) << "\n";
  }

  friend ClickGraph build_graph(const LogIndex& index, Day up_to);

 private:
  void build_transitions() {
    size_t n = num_nodes();
    size_t nq = query_names_.size();
    std::vector<std::vector<std::pair<uint32_t, double>>> adj(n);
    for (const auto& e : edges_) {
      adj[e.query].push_back({uint32_t(nq + e.url), e.weight});
      adj[nq + e.url].push_back({e.query, e.weight});
    }
    row_ptr_.assign(n + 1, 0);
    for (size_t i = 0; i < n; ++i) row_ptr_[i + 1] = row_ptr_[i] + adj[i].size();
    col_.resize(row_ptr_[n]);
    prob_.resize(row_ptr_[n]);
    for (size_t i = 0; i < n; ++i) {
      double row_sum = 0;
      for (auto& [j, w] : adj[i]) row_sum += w;
      size_t base = row_ptr_[i];
      for (size_t k = 0; k < adj[i].size(); ++k) {
        col_[base + k] = adj[i][k].first;
        prob_[base + k] = adj[i][k].second / row_sum;
      }
    }
  }

  std::vector<std::string> query_names_;
  std::vector<std::string> url_names_;
  std::vector<Edge> edges_;
  std::unordered_map<std::string, uint32_t> query_pos_;
  std::vector<size_t> row_ptr_;
  std::vector<uint32_t> col_;
  std::vector<double> prob_;
  long clamped_ = 0;
};

// Builds the co-click graph from all click pairs with day <= up_to
// (default: whole log). qf and N are computed on the same slice.
inline ClickGraph build_graph(const LogIndex& index,
                              Day up_to = std::numeric_limits<Day>::max()) {
  if (index.empty()) throw std::invalid_argument("build_graph: empty index");

  // collect per-pair click counts within the slice
  std::map<std::string, std::vector<std::pair<uint32_t, long>>> url_clicks;  // url -> (qid, cf)
  std::set<uint32_t> queries_in_slice;
  const auto& qs = index.queries();
  for (uint32_t qid = 0; qid < qs.size(); ++qid) {
    const auto& qd = index.data(qid);
    bool any_freq = false;
    for (auto& [d, c] : qd.daily)
      if (d <= up_to) {
        any_freq = true;
        break;
      }
    if (any_freq) queries_in_slice.insert(qid);
    for (auto& [url, dm] : qd.clicks) {
      long cf = 0;
      for (auto& [d, c] : dm)
        if (d <= up_to) cf += c;
      if (cf > 0) url_clicks[url].push_back({qid, cf});
    }
  }
  if (url_clicks.empty()) throw std::runtime_error("empty click graph");

  long n_queries = long(queries_in_slice.size());

  std::vector<std::string> url_names;
  std::set<uint32_t> query_set;
  for (auto& [url, qcs] : url_clicks) {
    url_names.push_back(url);
    for (auto& [qid, cf] : qcs) query_set.insert(qid);
  }
  std::vector<std::string> query_names;
  std::unordered_map<uint32_t, uint32_t> qmap;
  for (uint32_t qid : query_set) {
    qmap[qid] = uint32_t(query_names.size());
    query_names.push_back(qs[qid]);
  }

  long clamped = 0;
  std::vector<ClickGraph::Edge> edges;
  for (uint32_t u = 0; u < url_names.size(); ++u) {
    const auto& qcs = url_clicks[url_names[u]];
    long qf = long(qcs.size());
    for (auto& [qid, cf] : qcs) {
      bool was_clamped = false;
      double w = cf_iqf(cf, qf, n_queries, &was_clamped);
      if (was_clamped) ++clamped;
      edges.push_back({qmap[qid], u, cf, qf, w});
    }
  }
  std::sort(edges.begin(), edges.end(), [](const auto& a, const auto& b) {
    return std::tie(a.query, a.url) < std::tie(b.query, b.url);
  });
  auto g = ClickGraph::from_edges(std::move(query_names), std::move(url_names),
                                  std::move(edges));
  g.clamped_ = clamped;
  if (clamped > 0)
    std::cerr << "build_graph: clamped " << clamped << " degenerate cf-iqf edge weights\n";
  return g;
}

struct RwrResult {
  std::string source;
  // query-side scores excluding the source, sorted by score descending,
  // ties broken by query string.
  std::vector<std::pair<std::string, double>> scores;
  double full_sum = 0.0;  // over all nodes, before restriction
  int iterations = 0;
};

// Random walk with restart from a source query node. Fixed point of
// pi = (1-restart) * P^T pi + restart * e_source, stopped when the L1 change
// drops below tol. Mass at dangling nodes returns to the source.
inline RwrResult rwr(const ClickGraph& g, const std::string& source, double restart = 0.15,
                     double tol = 1e-10, int max_iter = 10000) {
  if (!(restart > 0.0 && restart < 1.0))
    throw std::invalid_argument("rwr: restart must be in (0,1)");
  auto src = g.query_node(source);
  if (!src) throw std::invalid_argument("rwr: source query not in graph: '" + source + "'");

  size_t n = g.num_nodes();
  std::vector<double> pi(n, 0.0), next(n);
  pi[*src] = 1.0;
  const auto& row_ptr = g.row_ptr();
  const auto& col = g.col();
  const auto& prob = g.prob();

  int it = 0;
  double delta = std::numeric_limits<double>::infinity();
  for (; it < max_iter && delta >= tol; ++it) {
    std::fill(next.begin(), next.end(), 0.0);
    double dangling = 0.0;
    for (size_t i = 0; i < n; ++i) {
      if (pi[i] == 0.0) continue;
      if (row_ptr[i] == row_ptr[i + 1]) {
        dangling += pi[i];
        continue;
      }
      double mass = (1.0 - restart) * pi[i];
      for (size_t k = row_ptr[i]; k < row_ptr[i + 1]; ++k) next[col[k]] += mass * prob[k];
    }
    next[*src] += restart + (1.0 - restart) * dangling;
    delta = 0.0;
    for (size_t i = 0; i < n; ++i) delta += std::fabs(next[i] - pi[i]);
    pi.swap(next);
  }
  if (delta >= tol) {
    throw std::runtime_error("rwr: no convergence after " + std::to_string(max_iter) +
                             " iterations, residual " + fmt_double(delta));
  }

  RwrResult res;
  res.source = source;
  res.iterations = it;
  for (double v : pi) res.full_sum += v;
  const auto& qnames = g.query_names();
  for (uint32_t i = 0; i < qnames.size(); ++i) {
    if (i == *src) continue;
    res.scores.push_back({qnames[i], pi[i]});
  }
  std::sort(res.scores.begin(), res.scores.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  return res;
}

// Top-k query-side candidates with positive score.
inline std::vector<std::pair<std::string, double>> candidates(const ClickGraph& g,
                                                              const std::string& source,
                                                              int k, double restart = 0.15) {
  if (k <= 0) throw std::invalid_argument("candidates: k must be positive");
  auto res = rwr(g, source, restart);
  std::vector<std::pair<std::string, double>> out;
  for (const auto& [q, s] : res.scores) {
    if (s <= 0.0) break;
    out.push_back({q, s});
    if (int(out.size()) == k) break;
  }
  return out;
}

}  // namespace aspectra

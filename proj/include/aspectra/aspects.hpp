#pragma once

#include <cstring>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "aspectra/common.hpp"

namespace aspectra {

// ---------------------------------------------------------------------------
// Stop words + Porter stemmer (fixed, embedded for reproducibility).

inline const std::unordered_set<std::string>& stop_words() {
  static const std::unordered_set<std::string> words = {
      "a",    "about", "above", "after", "again",  "all",   "also",  "am",    "an",
      "and",  "any",   "are",   "as",    "at",     "be",    "been",  "before", "being",
      "below", "between", "both", "but", "by",     "can",   "could", "did",   "do",
      "does", "doing", "down",  "during", "each",  "few",   "for",   "from",  "further",
      "had",  "has",   "have",  "having", "he",    "her",   "here",  "hers",  "him",
      "his",  "how",   "i",     "if",    "in",     "into",  "is",    "it",    "its",
      "just", "me",    "more",  "most",  "my",     "no",    "nor",   "not",   "now",
      "of",   "off",   "on",    "once",  "only",   "or",    "other", "our",   "out",
      "over", "own",   "same",  "she",   "should", "so",    "some",  "such",  "than",
      "that", "the",   "their", "them",  "then",   "there", "these", "they",  "this",
      "those", "through", "to",  "too",  "under",  "until", "up",    "very",  "was",
      "we",   "were",  "what",  "when",  "where",  "which", "while", "who",   "whom",
      "why",  "will",  "with",  "would", "you",    "your",  "yours"};
  return words;
}

namespace detail {

class Porter {
 public:
  static std::string stem(std::string w) {
    if (w.size() <= 2) return w;
    Porter p(std::move(w));
    p.step1a();
    p.step1b();
    p.step1c();
    p.step2();
    p.step3();
    p.step4();
    p.step5();
    return std::move(p.w_);
  }

 private:
  explicit Porter(std::string w) : w_(std::move(w)), k_(int(w_.size()) - 1) {}

  bool cons(int i) const {
    char c = w_[size_t(i)];
    switch (c) {
      case 'a': case 'e': case 'i': case 'o': case 'u':
        return false;
      case 'y':
        return i == 0 ? true : !cons(i - 1);
      default:
        return true;
    }
  }

  // number of VC sequences in w[0..j_]
  int m() const {
    int n = 0, i = 0;
    while (true) {
      if (i > j_) return n;
      if (!cons(i)) break;
      ++i;
    }
    ++i;
    while (true) {
      while (true) {
        if (i > j_) return n;
        if (cons(i)) break;
        ++i;
      }
      ++i;
      ++n;
      while (true) {
        if (i > j_) return n;
        if (!cons(i)) break;
        ++i;
      }
      ++i;
    }
  }

  bool vowel_in_stem() const {
    for (int i = 0; i <= j_; ++i)
      if (!cons(i)) return true;
    return false;
  }

  bool double_c(int j) const { return j >= 1 && w_[size_t(j)] == w_[size_t(j - 1)] && cons(j); }

  bool cvc(int i) const {
    if (i < 2 || !cons(i) || cons(i - 1) || !cons(i - 2)) return false;
    char c = w_[size_t(i)];
    return c != 'w' && c != 'x' && c != 'y';
  }

  bool ends(const char* s) {
    int len = int(std::strlen(s));
    if (len > k_ + 1) return false;
    if (w_.compare(size_t(k_ - len + 1), size_t(len), s) != 0) return false;
    j_ = k_ - len;
    return true;
  }

  void setto(const char* s) {
    int len = int(std::strlen(s));
    w_.replace(size_t(j_ + 1), std::string::npos, s);
    k_ = j_ + len;
    w_.resize(size_t(k_ + 1));
  }

  void r(const char* s) {
    if (m() > 0) setto(s);
  }

  void step1a() {
    if (w_[size_t(k_)] == 's') {
      if (ends("sses")) k_ -= 2;
      else if (ends("ies")) setto("i");
      else if (w_[size_t(k_ - 1)] != 's') --k_;
      w_.resize(size_t(k_ + 1));
    }
  }

  void step1b() {
    if (ends("eed")) {
      if (m() > 0) {
        --k_;
        w_.resize(size_t(k_ + 1));
      }
    } else if ((ends("ed") || ends("ing")) && vowel_in_stem()) {
      k_ = j_;
      w_.resize(size_t(k_ + 1));
      if (ends("at")) setto("ate");
      else if (ends("bl")) setto("ble");
      else if (ends("iz")) setto("ize");
      else if (double_c(k_)) {
        char c = w_[size_t(k_)];
        if (c != 'l' && c != 's' && c != 'z') {
          --k_;
          w_.resize(size_t(k_ + 1));
        }
      } else {
        j_ = k_;
        if (m() == 1 && cvc(k_)) setto("e");
      }
    }
  }

  void step1c() {
    if (ends("y") && vowel_in_stem()) w_[size_t(k_)] = 'i';
  }

  void step2() {
    switch (w_[size_t(k_ - 1)]) {
      case 'a':
        if (ends("ational")) { r("ate"); break; }
        if (ends("tional")) { r("tion"); break; }
        break;
      case 'c':
        if (ends("enci")) { r("ence"); break; }
        if (ends("anci")) { r("ance"); break; }
        break;
      case 'e':
        if (ends("izer")) { r("ize"); break; }
        break;
      case 'l':
        if (ends("abli")) { r("able"); break; }
        if (ends("alli")) { r("al"); break; }
        if (ends("entli")) { r("ent"); break; }
        if (ends("eli")) { r("e"); break; }
        if (ends("ousli")) { r("ous"); break; }
        break;
      case 'o':
        if (ends("ization")) { r("ize"); break; }
        if (ends("ation")) { r("ate"); break; }
        if (ends("ator")) { r("ate"); break; }
        break;
      case 's':
        if (ends("alism")) { r("al"); break; }
        if (ends("iveness")) { r("ive"); break; }
        if (ends("fulness")) { r("ful"); break; }
        if (ends("ousness")) { r("ous"); break; }
        break;
      case 't':
        if (ends("aliti")) { r("al"); break; }
        if (ends("iviti")) { r("ive"); break; }
        if (ends("biliti")) { r("ble"); break; }
        break;
      default:
        break;
    }
  }

  void step3() {
    switch (w_[size_t(k_)]) {
      case 'e':
        if (ends("icate")) { r("ic"); break; }
        if (ends("ative")) { r(""); break; }
        if (ends("alize")) { r("al"); break; }
        break;
      case 'i':
        if (ends("iciti")) { r("ic"); break; }
        break;
      case 'l':
        if (ends("ical")) { r("ic"); break; }
        if (ends("ful")) { r(""); break; }
        break;
      case 's':
        if (ends("ness")) { r(""); break; }
        break;
      default:
        break;
    }
  }

  void step4() {
    switch (w_[size_t(k_ - 1)]) {
      case 'a': if (ends("al")) break; return;
      case 'c': if (ends("ance") || ends("ence")) break; return;
      case 'e': if (ends("er")) break; return;
      case 'i': if (ends("ic")) break; return;
      case 'l': if (ends("able") || ends("ible")) break; return;
      case 'n':
        if (ends("ant") || ends("ement") || ends("ment") || ends("ent")) break;
        return;
      case 'o':
        if (ends("ion") && j_ >= 0 && (w_[size_t(j_)] == 's' || w_[size_t(j_)] == 't')) break;
        if (ends("ou")) break;
        return;
      case 's': if (ends("ism")) break; return;
      case 't': if (ends("ate") || ends("iti")) break; return;
      case 'u': if (ends("ous")) break; return;
      case 'v': if (ends("ive")) break; return;
      case 'z': if (ends("ize")) break; return;
      default: return;
    }
    if (m() > 1) {
      k_ = j_;
      w_.resize(size_t(k_ + 1));
    }
  }

  void step5() {
    j_ = k_;
    if (w_[size_t(k_)] == 'e') {
      int a = m();
      if (a > 1 || (a == 1 && !cvc(k_ - 1))) {
        --k_;
        w_.resize(size_t(k_ + 1));
      }
    }
    if (w_[size_t(k_)] == 'l' && double_c(k_) && m() > 1) {
      --k_;
      w_.resize(size_t(k_ + 1));
    }
  }

  std::string w_;
  int k_;
  int j_ = 0;
};

}  // namespace detail

inline std::string porter_stem(const std::string& word) { return detail::Porter::stem(word); }

// Tokens after stop-word removal and stemming.
inline std::vector<std::string> stemmed_tokens(std::string_view text) {
  std::vector<std::string> out;
  for (auto& t : tokenize(text))
    if (!stop_words().count(t)) out.push_back(porter_stem(t));
  return out;
}

inline double jaccard(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  std::set<std::string> sa(a.begin(), a.end()), sb(b.begin(), b.end());
  if (sa.empty() && sb.empty()) return 1.0;
  size_t inter = 0;
  for (const auto& x : sa) inter += sb.count(x);
  size_t uni = sa.size() + sb.size() - inter;
  return uni == 0 ? 1.0 : double(inter) / double(uni);
}

inline size_t levenshtein(std::string_view a, std::string_view b) {
  std::vector<size_t> prev(b.size() + 1), cur(b.size() + 1);
  for (size_t j = 0; j <= b.size(); ++j) prev[j] = j;
  for (size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (size_t j = 1; j <= b.size(); ++j) {
      size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    prev.swap(cur);
  }
  return prev[b.size()];
}

// 0.5 * jaccard(stemmed token sets) + 0.5 * (1 - normalized edit distance).
// Strings whose token sets vanish after stop-word removal fall back to
// raw-token jaccard for the first component.
inline double lexical_sim(std::string_view a, std::string_view b) {
  auto ta = stemmed_tokens(a);
  auto tb = stemmed_tokens(b);
  double jac;
  if (ta.empty() || tb.empty())
    jac = jaccard(tokenize(a), tokenize(b));
  else
    jac = jaccard(ta, tb);
  size_t ml = std::max(a.size(), b.size());
  double nlev = ml == 0 ? 0.0 : double(levenshtein(a, b)) / double(ml);
  return 0.5 * jac + 0.5 * (1.0 - nlev);
}

// ---------------------------------------------------------------------------
// Word embeddings, text format: one line per token, "token v1 v2 ... vd".

class EmbeddingTable {
 public:
  EmbeddingTable() = default;

  void add(const std::string& token, std::vector<double> vec) {
    if (dim_ == 0) dim_ = vec.size();
    if (vec.size() != dim_)
      throw std::invalid_argument("embedding dimension mismatch for token '" + token + "'");
    vecs_[token] = std::move(vec);
  }
  size_t dim() const { return dim_; }
  size_t size() const { return vecs_.size(); }
  const std::vector<double>* find(const std::string& token) const {
    auto it = vecs_.find(token);
    return it == vecs_.end() ? nullptr : &it->second;
  }

  static EmbeddingTable load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open embeddings: " + path);
    EmbeddingTable t;
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      std::istringstream is(line);
      std::string tok;
      is >> tok;
      std::vector<double> v;
      double x;
      while (is >> x) v.push_back(x);
      if (!v.empty()) t.add(tok, std::move(v));
    }
    if (t.size() == 0) throw std::runtime_error("empty embedding table: " + path);
    return t;
  }

 private:
  std::unordered_map<std::string, std::vector<double>> vecs_;
  size_t dim_ = 0;
};

// Cosine of mean token vectors, rescaled from [-1,1] to [0,1]. OOV tokens are
// skipped; if one side is fully OOV the pair is neutral (0.5) and flagged.
inline double semantic_sim(std::string_view a, std::string_view b,
                           const EmbeddingTable& emb, bool* oov_flag = nullptr) {
  auto mean_vec = [&](std::string_view s, std::vector<double>& out) {
    out.assign(emb.dim(), 0.0);
    int n = 0;
    for (auto& t : tokenize(s)) {
      if (const auto* v = emb.find(t)) {
        for (size_t i = 0; i < out.size(); ++i) out[i] += (*v)[i];
        ++n;
      }
    }
    if (n == 0) return false;
    for (double& x : out) x /= n;
    return true;
  };
  std::vector<double> va, vb;
  if (!mean_vec(a, va) || !mean_vec(b, vb)) {
    if (oov_flag) *oov_flag = true;
    return 0.5;
  }
  double dot = 0, na = 0, nb = 0;
  for (size_t i = 0; i < va.size(); ++i) {
    dot += va[i] * vb[i];
    na += va[i] * va[i];
    nb += vb[i] * vb[i];
  }
  if (na == 0.0 || nb == 0.0) {
    if (oov_flag) *oov_flag = true;
    return 0.5;
  }
  double cosine = dot / std::sqrt(na * nb);
  cosine = std::clamp(cosine, -1.0, 1.0);
  return 0.5 * (cosine + 1.0);
}

// ---------------------------------------------------------------------------
// Similarity matrix + affinity propagation.

struct SimilarityMatrix {
  size_t n = 0;
  std::vector<double> s;  // row-major n*n
  double lambda_lex = 0.5;
  double lambda_sem = 0.5;

  double& at(size_t i, size_t j) { return s[i * n + j]; }
  double at(size_t i, size_t j) const { return s[i * n + j]; }
};

inline SimilarityMatrix build_similarity(const std::vector<std::string>& texts,
                                         const EmbeddingTable* emb, double lambda_lex = 0.5,
                                         double lambda_sem = 0.5) {
  SimilarityMatrix m;
  m.n = texts.size();
  m.lambda_lex = lambda_lex;
  m.lambda_sem = lambda_sem;
  m.s.assign(m.n * m.n, 0.0);
  for (size_t i = 0; i < m.n; ++i) {
    m.at(i, i) = 1.0;
    for (size_t j = i + 1; j < m.n; ++j) {
      double lex = lexical_sim(texts[i], texts[j]);
      double sem = emb ? semantic_sim(texts[i], texts[j], *emb) : 0.5;
      double v = lambda_lex * lex + lambda_sem * sem;
      m.at(i, j) = v;
      m.at(j, i) = v;
    }
  }
  return m;
}

struct ApResult {
  std::vector<int> cluster_of;  // dense cluster ids, 0..k-1
  std::vector<size_t> exemplars;
  bool converged = false;
  bool no_exemplar_fallback = false;
  int iterations = 0;
};

inline double median_off_diagonal(const SimilarityMatrix& m) {
  std::vector<double> vals;
  for (size_t i = 0; i < m.n; ++i)
    for (size_t j = 0; j < m.n; ++j)
      if (i != j) vals.push_back(m.at(i, j));
  if (vals.empty()) return 0.0;
  std::sort(vals.begin(), vals.end());
  size_t h = vals.size() / 2;
  return vals.size() % 2 ? vals[h] : 0.5 * (vals[h - 1] + vals[h]);
}

// Responsibility/availability message passing. Exemplars are points with
// r(k,k)+a(k,k) > 0; convergence requires a stable exemplar set for
// `stable_iters` consecutive iterations.
inline ApResult affinity_propagation(const SimilarityMatrix& sim, double damping = 0.7,
                                     int max_iter = 200,
                                     std::optional<double> preference = std::nullopt,
                                     int stable_iters = 15) {
  if (!(damping >= 0.5 && damping < 1.0))
    throw std::invalid_argument("affinity_propagation: damping must be in [0.5, 1)");
  size_t n = sim.n;
  ApResult res;
  if (n == 0) return res;
  if (n == 1) {
    res.cluster_of = {0};
    res.exemplars = {0};
    res.converged = true;
    return res;
  }

  double pref = preference.value_or(median_off_diagonal(sim));
  std::vector<double> s(sim.s);
  for (size_t i = 0; i < n; ++i) s[i * n + i] = pref;

  // deterministic symmetry-breaking jitter: on inputs with exact ties the
  // exemplar criterion is degenerate (everyone sits at r+a == 0), so nudge
  // every entry by a value that depends only on its position
  double scale = 0.0;
  for (double v : s) scale = std::max(scale, std::fabs(v));
  if (scale == 0.0) scale = 1.0;
  {
    Rng jitter(0x5eedf00dULL);
    for (double& v : s) v += 1e-9 * scale * jitter.normal();
  }

  std::vector<double> r(n * n, 0.0), a(n * n, 0.0);
  std::vector<char> is_ex(n, 0), prev_ex(n, 0);
  int stable = 0;
  int it = 0;
  for (; it < max_iter; ++it) {
    // responsibilities
    for (size_t i = 0; i < n; ++i) {
      double best = -std::numeric_limits<double>::infinity();
      double second = best;
      size_t best_k = 0;
      for (size_t k = 0; k < n; ++k) {
        double v = a[i * n + k] + s[i * n + k];
        if (v > best) {
          second = best;
          best = v;
          best_k = k;
        } else if (v > second) {
          second = v;
        }
      }
      for (size_t k = 0; k < n; ++k) {
        double cmp = (k == best_k) ? second : best;
        double newval = s[i * n + k] - cmp;
        r[i * n + k] = damping * r[i * n + k] + (1.0 - damping) * newval;
      }
    }
    // availabilities
    for (size_t k = 0; k < n; ++k) {
      double pos_sum = 0.0;
      for (size_t i = 0; i < n; ++i)
        if (i != k) pos_sum += std::max(0.0, r[i * n + k]);
      for (size_t i = 0; i < n; ++i) {
        double newval;
        if (i == k) {
          newval = pos_sum;
        } else {
          double v = r[k * n + k] + pos_sum - std::max(0.0, r[i * n + k]);
          newval = std::min(0.0, v);
        }
        a[i * n + k] = damping * a[i * n + k] + (1.0 - damping) * newval;
      }
    }
    for (size_t k = 0; k < n; ++k) is_ex[k] = (r[k * n + k] + a[k * n + k] > 0.0) ? 1 : 0;
    // stability only counts once some exemplar has emerged; the empty set at
    // startup is a transient of the damped messages, not a fixed point
    bool any_ex = std::find(is_ex.begin(), is_ex.end(), 1) != is_ex.end();
    if (any_ex && is_ex == prev_ex) {
      if (++stable >= stable_iters) {
        ++it;
        res.converged = true;
        break;
      }
    } else {
      stable = 0;
      prev_ex = is_ex;
    }
  }
  res.iterations = it;

  for (size_t k = 0; k < n; ++k)
    if (is_ex[k]) res.exemplars.push_back(k);
  res.cluster_of.assign(n, -1);
  if (res.exemplars.empty()) {
    res.no_exemplar_fallback = true;
    for (size_t i = 0; i < n; ++i) {
      res.cluster_of[i] = int(i);
      res.exemplars.push_back(i);
    }
    return res;
  }
  std::unordered_map<size_t, int> cluster_id;
  for (size_t c = 0; c < res.exemplars.size(); ++c) cluster_id[res.exemplars[c]] = int(c);
  for (size_t i = 0; i < n; ++i) {
    if (cluster_id.count(i)) {
      res.cluster_of[i] = cluster_id[i];
      continue;
    }
    size_t best_k = res.exemplars[0];
    double best_s = -std::numeric_limits<double>::infinity();
    for (size_t k : res.exemplars) {
      double v = sim.at(i, k);
      if (v > best_s) {
        best_s = v;
        best_k = k;
      }
    }
    res.cluster_of[i] = cluster_id[best_k];
  }
  return res;
}

// ---------------------------------------------------------------------------
// Aspect extraction: cluster ranked walk candidates and pick representatives.

struct AspectCandidate {
  std::string text;
  double rwr_score = 0.0;
  int cluster_id = -1;
  bool is_representative = false;
  long frequency = 0;
};

struct AspectParams {
  double lambda_lex = 0.5;
  double lambda_sem = 0.5;
  double damping = 0.7;
  int max_iter = 200;
};

// Input candidates must be RWR-ranked (descending). Returns the top-k cluster
// representatives ordered by walk score. The representative of a cluster is
// its most frequent member (ties: higher walk score, then lexicographic).
inline std::vector<AspectCandidate> extract_aspects(std::vector<AspectCandidate> candidates,
                                                    const EmbeddingTable* emb, int k,
                                                    const AspectParams& params = {}) {
  if (k <= 0) throw std::invalid_argument("extract_aspects: k must be positive");
  if (candidates.empty()) return {};

  std::vector<std::string> texts;
  for (const auto& c : candidates) texts.push_back(c.text);
  auto sim = build_similarity(texts, emb, params.lambda_lex, params.lambda_sem);
  auto ap = affinity_propagation(sim, params.damping, params.max_iter);

  for (size_t i = 0; i < candidates.size(); ++i) candidates[i].cluster_id = ap.cluster_of[i];

  size_t n_clusters = ap.exemplars.size();
  std::vector<int> rep(n_clusters, -1);
  for (size_t i = 0; i < candidates.size(); ++i) {
    int c = candidates[i].cluster_id;
    if (rep[c] < 0) {
      rep[c] = int(i);
      continue;
    }
    const auto& cur = candidates[size_t(rep[c])];
    const auto& cand = candidates[i];
    bool better = cand.frequency > cur.frequency ||
                  (cand.frequency == cur.frequency && cand.rwr_score > cur.rwr_score) ||
                  (cand.frequency == cur.frequency && cand.rwr_score == cur.rwr_score &&
                   cand.text < cur.text);
    if (better) rep[c] = int(i);
  }

  std::vector<AspectCandidate> reps;
  for (size_t c = 0; c < n_clusters; ++c) {
    if (rep[c] < 0) continue;
    auto a = candidates[size_t(rep[c])];
    a.is_representative = true;
    reps.push_back(std::move(a));
  }
  std::sort(reps.begin(), reps.end(), [](const auto& x, const auto& y) {
    if (x.rwr_score != y.rwr_score) return x.rwr_score > y.rwr_score;
    return x.text < y.text;
  });
  if (int(reps.size()) > k) reps.resize(size_t(k));
  return reps;
}

}  // namespace aspectra

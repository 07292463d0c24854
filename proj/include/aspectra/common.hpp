#pragma once

#include <algorithm>
#include <array>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace aspectra {

// Days since 1970-01-01, UTC calendar.
using Day = int32_t;

inline Day make_day(int year, int month, int day) {
  using namespace std::chrono;
  year_month_day ymd{std::chrono::year{year}, std::chrono::month{unsigned(month)},
                     std::chrono::day{unsigned(day)}};
  if (!ymd.ok()) throw std::invalid_argument("invalid calendar date");
  return Day(sys_days{ymd}.time_since_epoch().count());
}

// Accepts "YYYY-MM-DD" optionally followed by a time-of-day, which is ignored.
inline Day parse_day(std::string_view s) {
  if (s.size() < 10 || s[4] != '-' || s[7] != '-')
    throw std::invalid_argument("unparseable date: '" + std::string(s) + "'");
  auto num = [&](size_t pos, size_t len) {
    int v = 0;
    auto r = std::from_chars(s.data() + pos, s.data() + pos + len, v);
    if (r.ec != std::errc() || r.ptr != s.data() + pos + len)
      throw std::invalid_argument("unparseable date: '" + std::string(s) + "'");
    return v;
  };
  return make_day(num(0, 4), num(5, 2), num(8, 2));
}

inline std::string format_day(Day d) {
  using namespace std::chrono;
  year_month_day ymd{sys_days{days{d}}};
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02d-%02d", int(ymd.year()),
                unsigned(ymd.month()), unsigned(ymd.day()));
  return buf;
}

// year*12 + (month-1); used by the month-based train/test split.
inline int month_index(Day d) {
  using namespace std::chrono;
  year_month_day ymd{sys_days{days{d}}};
  return int(ymd.year()) * 12 + int(unsigned(ymd.month())) - 1;
}

// ---------------------------------------------------------------------------
// Query/text normalization.

inline std::string normalize_query(std::string_view raw) {
  std::string out;
  out.reserve(raw.size());
  bool pending_space = false;
  for (unsigned char c : raw) {
    if (c == ' ' || c == '\t' || c == '\r' || c == '\n' || c == '\f' || c == '\v') {
      if (!out.empty()) pending_space = true;
      continue;
    }
    if (pending_space) {
      out.push_back(' ');
      pending_space = false;
    }
    out.push_back(char(std::tolower(c)));
  }
  return out;
}

inline std::vector<std::string> tokenize(std::string_view s) {
  std::vector<std::string> toks;
  size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && s[i] == ' ') ++i;
    size_t j = i;
    while (j < s.size() && s[j] != ' ') ++j;
    if (j > i) toks.emplace_back(s.substr(i, j - i));
    i = j;
  }
  return toks;
}

// Splits free text (document content) into lowercase alphanumeric tokens.
inline std::vector<std::string> tokenize_text(std::string_view s) {
  std::vector<std::string> toks;
  std::string cur;
  for (unsigned char c : s) {
    if (std::isalnum(c)) {
      cur.push_back(char(std::tolower(c)));
    } else if (!cur.empty()) {
      toks.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) toks.push_back(std::move(cur));
  return toks;
}

// Word-boundary substring containment on normalized strings: `needle` must
// appear in `hay` delimited by string edges or spaces.
inline bool contains_at_word_boundary(std::string_view hay, std::string_view needle) {
  if (needle.empty()) return false;
  size_t pos = 0;
  while ((pos = hay.find(needle, pos)) != std::string_view::npos) {
    bool left_ok = pos == 0 || hay[pos - 1] == ' ';
    size_t end = pos + needle.size();
    bool right_ok = end == hay.size() || hay[end] == ' ';
    if (left_ok && right_ok) return true;
    ++pos;
  }
  return false;
}

// Fraction of characters that are ASCII letters, digits or spaces.
inline double ascii_ratio(std::string_view s) {
  if (s.empty()) return 1.0;
  size_t ok = 0;
  for (unsigned char c : s)
    if (c == ' ' || (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z'))
      ++ok;
  return double(ok) / double(s.size());
}

// ---------------------------------------------------------------------------
// Line parsing helpers.

inline std::vector<std::string_view> split_on(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  size_t start = 0;
  for (size_t i = 0; i <= line.size(); ++i) {
    if (i == line.size() || line[i] == sep) {
      out.push_back(line.substr(start, i - start));
      start = i + 1;
    }
  }
  return out;
}

inline std::string_view strip_cr(std::string_view s) {
  if (!s.empty() && s.back() == '\r') s.remove_suffix(1);
  return s;
}

// Minimal CSV quoting: wraps fields containing separators/quotes.
inline std::string csv_escape(std::string_view field) {
  bool needs = field.find_first_of(",\"\n") != std::string_view::npos;
  if (!needs) return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    out.push_back(c);
    if (c == '"') out.push_back('"');
  }
  out.push_back('"');
  return out;
}

inline std::vector<std::string> csv_split(std::string_view line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (size_t i = 0; i < line.size(); ++i) {
    char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(std::move(cur));
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(std::move(cur));
  return out;
}

inline std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

// ---------------------------------------------------------------------------
// Seeded RNG wrapper. All stochastic steps in the library draw from this.

class Rng {
 public:
  explicit Rng(uint64_t seed) : eng_(seed) {}

  uint64_t u64() { return eng_(); }
  double uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(eng_); }
  double uniform(double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(eng_);
  }
  int uniform_int(int lo, int hi) {  // inclusive bounds
    return std::uniform_int_distribution<int>(lo, hi)(eng_);
  }
  double normal(double mean = 0.0, double sd = 1.0) {
    return std::normal_distribution<double>(mean, sd)(eng_);
  }
  long poisson(double lambda) {
    if (lambda <= 0.0) return 0;
    return std::poisson_distribution<long>(lambda)(eng_);
  }
  template <class T>
  void shuffle(std::vector<T>& v) {
    std::shuffle(v.begin(), v.end(), eng_);
  }
  std::mt19937_64& engine() { return eng_; }

 private:
  std::mt19937_64 eng_;
};

// FNV-1a, used for manifest content hashes and token-derived seeds.
inline uint64_t fnv1a64(std::string_view data, uint64_t h = 14695981039346656037ull) {
  for (unsigned char c : data) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

inline std::string hex64(uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", (unsigned long long)v);
  return buf;
}

// ---------------------------------------------------------------------------
// Basic statistics shared across modules.

inline double mean_of(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  double s = 0.0;
  for (double x : v) s += x;
  return s / double(v.size());
}

inline double variance_of(const std::vector<double>& v) {  // population
  if (v.empty()) return 0.0;
  double m = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return s / double(v.size());
}

inline double pearson(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size() || a.size() < 2) throw std::invalid_argument("pearson: bad input");
  double ma = mean_of(a), mb = mean_of(b);
  double num = 0, da = 0, db = 0;
  for (size_t i = 0; i < a.size(); ++i) {
    num += (a[i] - ma) * (b[i] - mb);
    da += (a[i] - ma) * (a[i] - ma);
    db += (b[i] - mb) * (b[i] - mb);
  }
  if (da <= 0.0 || db <= 0.0) throw std::domain_error("pearson: zero variance");
  return num / std::sqrt(da * db);
}

}  // namespace aspectra

#pragma once

#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <unordered_map>

#include <json.hpp>

#include "aspectra/common.hpp"

namespace aspectra {

struct QueryRecord {
  std::string user;
  std::string terms;  // normalized: lowercase, whitespace-collapsed
  Day day = 0;
};

struct ClickRecord {
  std::string query;
  std::string url;
  int rank = 0;  // >= 1
  Day day = 0;
};

// Daily-binned counts for an entity or aspect.
struct TimeSeries {
  Day origin = 0;
  std::vector<double> values;

  size_t size() const { return values.size(); }
  double total() const {
    double s = 0;
    for (double v : values) s += v;
    return s;
  }
};

struct IngestOptions {
  long min_qf = 5;
  long max_qf = 15000;
  long min_click = 3;
  bool english_only = false;
  double ascii_threshold = 0.9;
};

struct RejectReport {
  struct Entry {
    size_t line_no;
    std::string reason;
  };
  std::vector<Entry> rejected_lines;
  size_t lines_read = 0;
  size_t records_parsed = 0;
  long queries_dropped_low = 0;
  long queries_dropped_high = 0;
  long queries_dropped_non_english = 0;
  long click_pairs_dropped = 0;

  std::string to_text() const {
    std::ostringstream os;
    os << "lines_read\t" << lines_read << "\n";
    os << "records_parsed\t" << records_parsed << "\n";
    os << "queries_dropped_low_freq\t" << queries_dropped_low << "\n";
    os << "queries_dropped_high_freq\t" << queries_dropped_high << "\n";
    os << "queries_dropped_non_english\t" << queries_dropped_non_english << "\n";
    os << "click_pairs_dropped\t" << click_pairs_dropped << "\n";
    for (const auto& e : rejected_lines) os << "line " << e.line_no << "\t" << e.reason << "\n";
    return os.str();
  }
};

// Alias dictionary used to match entities against query strings.
class EntityAliasTable {
 public:
  void add(const std::string& entity, const std::string& alias) {
    table_[entity].insert(normalize_query(alias));
  }
  bool has(const std::string& entity) const { return table_.count(entity) > 0; }
  const std::set<std::string>& aliases(const std::string& entity) const {
    auto it = table_.find(entity);
    if (it == table_.end())
      throw std::invalid_argument("unknown entity_id: '" + entity + "'");
    return it->second;
  }
  const std::map<std::string, std::set<std::string>>& all() const { return table_; }

  static EntityAliasTable from_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open alias table: " + path);
    nlohmann::json j;
    in >> j;
    EntityAliasTable t;
    for (auto it = j.begin(); it != j.end(); ++it)
      for (const auto& a : it.value()) t.add(it.key(), a.get<std::string>());
    return t;
  }
  void to_json_file(const std::string& path) const {
    nlohmann::json j = nlohmann::json::object();
    for (const auto& [e, as] : table_) {
      nlohmann::json arr = nlohmann::json::array();
      for (const auto& a : as) arr.push_back(a);
      j[e] = arr;
    }
    std::ofstream out(path);
    out << j.dump(1) << "\n";
  }

 private:
  std::map<std::string, std::set<std::string>> table_;
};

// Immutable after ingestion. Query ids are indices into a lexicographically
// sorted string table, so iteration order is deterministic everywhere.
class LogIndex {
 public:
  struct QueryData {
    long total = 0;
    std::map<Day, long> daily;
    std::map<std::string, std::map<Day, long>> clicks;  // url -> day -> count
  };
  struct ChronoRun {  // run-length encoded record stream, in log order
    Day day;
    uint32_t qid;
    uint32_t count;
  };

  bool empty() const { return queries_.empty(); }
  size_t num_queries() const { return queries_.size(); }
  bool has_span() const { return last_ >= first_; }
  Day first_day() const { return first_; }
  Day last_day() const { return last_; }

  const std::vector<std::string>& queries() const { return queries_; }
  std::optional<uint32_t> query_id(std::string_view q) const {
    auto it = std::lower_bound(queries_.begin(), queries_.end(), q);
    if (it == queries_.end() || *it != q) return std::nullopt;
    return uint32_t(it - queries_.begin());
  }
  const QueryData& data(uint32_t qid) const { return data_[qid]; }
  const std::vector<ChronoRun>& chrono() const { return chrono_; }

  long total_freq(std::string_view q) const {
    auto id = query_id(q);
    return id ? data_[*id].total : 0;
  }
  long freq_on(std::string_view q, Day d) const {
    auto id = query_id(q);
    if (!id) return 0;
    auto& m = data_[*id].daily;
    auto it = m.find(d);
    return it == m.end() ? 0 : it->second;
  }
  long freq_between(std::string_view q, Day lo, Day hi) const {
    auto id = query_id(q);
    if (!id) return 0;
    long s = 0;
    auto& m = data_[*id].daily;
    for (auto it = m.lower_bound(lo); it != m.end() && it->first <= hi; ++it) s += it->second;
    return s;
  }
  const std::string& query_text(uint32_t qid) const { return queries_[qid]; }

  long freq_between_id(uint32_t qid, Day lo, Day hi) const {
    long s = 0;
    auto& m = data_[qid].daily;
    for (auto it = m.lower_bound(lo); it != m.end() && it->first <= hi; ++it) s += it->second;
    return s;
  }

  // (url, count) pairs clicked for this query on one day, url-sorted.
  std::vector<std::pair<std::string, long>> clicks_on(uint32_t qid, Day d) const {
    std::vector<std::pair<std::string, long>> out;
    for (const auto& [url, days] : data_[qid].clicks) {
      auto it = days.find(d);
      if (it != days.end() && it->second > 0) out.emplace_back(url, it->second);
    }
    return out;
  }

  TimeSeries daily_series_id(uint32_t qid, Day lo, Day hi) const {
    TimeSeries ts;
    ts.origin = lo;
    ts.values.assign(size_t(hi - lo + 1), 0.0);
    auto& m = data_[qid].daily;
    for (auto it = m.lower_bound(lo); it != m.end() && it->first <= hi; ++it)
      ts.values[size_t(it->first - lo)] += double(it->second);
    return ts;
  }

  // Daily frequency series for an exact query string over [lo, hi].
  TimeSeries daily_series(std::string_view q, Day lo, Day hi) const {
    TimeSeries ts;
    ts.origin = lo;
    ts.values.assign(size_t(hi - lo + 1), 0.0);
    if (auto id = query_id(q)) {
      auto& m = data_[*id].daily;
      for (auto it = m.lower_bound(lo); it != m.end() && it->first <= hi; ++it)
        ts.values[size_t(it->first - lo)] += double(it->second);
    }
    return ts;
  }

  const IngestOptions& options() const { return opts_; }

  // --- construction --------------------------------------------------------

  friend LogIndex ingest(const std::string& path, const IngestOptions& opts,
                         RejectReport* report);

  static LogIndex from_records(const std::vector<QueryRecord>& qrecs,
                               const std::vector<std::optional<ClickRecord>>& clicks,
                               const IngestOptions& opts, RejectReport* report) {
    return build(qrecs, clicks, opts, report);
  }

  // --- serialization -------------------------------------------------------

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["format"] = "aspectra-index";
    j["version"] = 1;
    j["options"] = {{"min_qf", opts_.min_qf},
                    {"max_qf", opts_.max_qf},
                    {"min_click", opts_.min_click},
                    {"english_only", opts_.english_only}};
    if (has_span()) {
      j["span"] = {{"first", format_day(first_)}, {"last", format_day(last_)}};
    } else {
      j["span"] = nullptr;
    }
    nlohmann::json qs = nlohmann::json::array();
    for (size_t i = 0; i < queries_.size(); ++i) {
      nlohmann::json q;
      q["q"] = queries_[i];
      nlohmann::json days = nlohmann::json::array();
      for (auto& [d, c] : data_[i].daily) days.push_back({d, c});
      q["days"] = days;
      nlohmann::json clicks = nlohmann::json::array();
      for (auto& [url, dm] : data_[i].clicks) {
        nlohmann::json cd = nlohmann::json::array();
        for (auto& [d, c] : dm) cd.push_back({d, c});
        clicks.push_back({{"u", url}, {"days", cd}});
      }
      q["clicks"] = clicks;
      qs.push_back(q);
    }
    j["queries"] = qs;
    nlohmann::json runs = nlohmann::json::array();
    for (const auto& r : chrono_) runs.push_back({r.day, r.qid, r.count});
    j["chrono"] = runs;
    return j;
  }

  static LogIndex from_json(const nlohmann::json& j) {
    if (!j.contains("format") || j["format"] != "aspectra-index")
      throw std::runtime_error("not an index file");
    if (j.at("version").get<int>() != 1)
      throw std::runtime_error("unsupported index version");
    LogIndex idx;
    idx.opts_.min_qf = j["options"]["min_qf"].get<long>();
    idx.opts_.max_qf = j["options"]["max_qf"].get<long>();
    idx.opts_.min_click = j["options"]["min_click"].get<long>();
    idx.opts_.english_only = j["options"]["english_only"].get<bool>();
    if (!j["span"].is_null()) {
      idx.first_ = parse_day(j["span"]["first"].get<std::string>());
      idx.last_ = parse_day(j["span"]["last"].get<std::string>());
    }
    for (const auto& q : j["queries"]) {
      idx.queries_.push_back(q["q"].get<std::string>());
      QueryData qd;
      for (const auto& dc : q["days"]) {
        qd.daily[dc[0].get<Day>()] = dc[1].get<long>();
        qd.total += dc[1].get<long>();
      }
      for (const auto& cl : q["clicks"]) {
        auto& dm = qd.clicks[cl["u"].get<std::string>()];
        for (const auto& dc : cl["days"]) dm[dc[0].get<Day>()] = dc[1].get<long>();
      }
      idx.data_.push_back(std::move(qd));
    }
    for (const auto& r : j["chrono"])
      idx.chrono_.push_back({r[0].get<Day>(), r[1].get<uint32_t>(), r[2].get<uint32_t>()});
    return idx;
  }

  void save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write index: " + path);
    out << to_json().dump() << "\n";
  }
  static LogIndex load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open index: " + path);
    nlohmann::json j;
    in >> j;
    return from_json(j);
  }

  // Re-emits the index as a log file in record order. Clicks are attached
  // greedily to the earliest record slots of their (day, query) group.
  void export_log_tsv(std::ostream& out) const {
    std::vector<std::map<std::string, std::map<Day, long>>::const_iterator> cursor;
    // track per (qid) remaining clicks per day
    std::vector<std::map<Day, std::vector<std::pair<std::string, long>>>> pending(data_.size());
    for (size_t i = 0; i < data_.size(); ++i)
      for (auto& [url, dm] : data_[i].clicks)
        for (auto& [d, c] : dm) pending[i][d].push_back({url, c});
    for (const auto& run : chrono_) {
      uint32_t left = run.count;
      auto& per_day = pending[run.qid];
      auto it = per_day.find(run.day);
      while (left > 0) {
        if (it != per_day.end() && !it->second.empty()) {
          auto& [url, c] = it->second.front();
          out << "u\t" << queries_[run.qid] << "\t" << format_day(run.day)
              << " 00:00:00\t1\t" << url << "\n";
          if (--c == 0) it->second.erase(it->second.begin());
        } else {
          out << "u\t" << queries_[run.qid] << "\t" << format_day(run.day)
              << " 00:00:00\t\t\n";
        }
        --left;
      }
    }
  }

 private:
  static LogIndex build(const std::vector<QueryRecord>& qrecs,
                        const std::vector<std::optional<ClickRecord>>& clicks,
                        const IngestOptions& opts, RejectReport* report) {
    // first pass: totals on normalized queries
    std::unordered_map<std::string, long> totals;
    for (const auto& r : qrecs) totals[r.terms]++;

    auto keep_query = [&](const std::string& q, long total) {
      if (total < opts.min_qf) {
        if (report) report->queries_dropped_low++;
        return false;
      }
      if (total > opts.max_qf) {
        if (report) report->queries_dropped_high++;
        return false;
      }
      if (opts.english_only && ascii_ratio(q) < opts.ascii_threshold) {
        if (report) report->queries_dropped_non_english++;
        return false;
      }
      return true;
    };

    std::vector<std::string> kept;
    for (const auto& [q, total] : totals)
      if (keep_query(q, total)) kept.push_back(q);
    std::sort(kept.begin(), kept.end());

    LogIndex idx;
    idx.opts_ = opts;
    idx.queries_ = std::move(kept);
    idx.data_.resize(idx.queries_.size());

    std::unordered_map<std::string, uint32_t> qid;
    for (uint32_t i = 0; i < idx.queries_.size(); ++i) qid[idx.queries_[i]] = i;

    for (const auto& r : qrecs) {
      auto it = qid.find(r.terms);
      if (it == qid.end()) continue;
      auto& qd = idx.data_[it->second];
      qd.total++;
      qd.daily[r.day]++;
      if (!idx.has_span()) {
        idx.first_ = idx.last_ = r.day;
      } else {
        idx.first_ = std::min(idx.first_, r.day);
        idx.last_ = std::max(idx.last_, r.day);
      }
      if (!idx.chrono_.empty() && idx.chrono_.back().day == r.day &&
          idx.chrono_.back().qid == it->second) {
        idx.chrono_.back().count++;
      } else {
        idx.chrono_.push_back({r.day, it->second, 1});
      }
    }

    // click pair totals, then min_click filter
    std::map<std::pair<uint32_t, std::string>, long> pair_total;
    for (const auto& c : clicks) {
      if (!c) continue;
      auto it = qid.find(c->query);
      if (it == qid.end()) continue;
      pair_total[{it->second, c->url}]++;
    }
    std::set<std::pair<uint32_t, std::string>> kept_pairs;
    for (const auto& [key, total] : pair_total) {
      if (total >= opts.min_click)
        kept_pairs.insert(key);
      else if (report)
        report->click_pairs_dropped++;
    }
    for (const auto& c : clicks) {
      if (!c) continue;
      auto it = qid.find(c->query);
      if (it == qid.end()) continue;
      if (!kept_pairs.count({it->second, c->url})) continue;
      idx.data_[it->second].clicks[c->url][c->day]++;
    }
    return idx;
  }

  IngestOptions opts_;
  std::vector<std::string> queries_;
  std::vector<QueryData> data_;
  std::vector<ChronoRun> chrono_;
  Day first_ = 0, last_ = -1;
};

// Parses the 5-column TSV log (AnonID, Query, QueryTime, ItemRank, ClickURL).
// Header row auto-detected. Malformed lines go to the reject report and
// ingestion continues.
inline LogIndex ingest(const std::string& path, const IngestOptions& opts = {},
                       RejectReport* report = nullptr) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open log file: " + path);

  std::vector<QueryRecord> qrecs;
  std::vector<std::optional<ClickRecord>> clicks;
  std::string line;
  size_t line_no = 0;
  auto reject = [&](const std::string& why) {
    if (report) report->rejected_lines.push_back({line_no, why});
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (report) report->lines_read++;
    std::string_view sv = strip_cr(line);
    if (line_no == 1 && sv.substr(0, 6) == "AnonID") continue;  // header
    if (sv.empty()) continue;
    auto cols = split_on(sv, '\t');
    if (cols.size() != 5) {
      reject("expected 5 columns, got " + std::to_string(cols.size()));
      continue;
    }
    std::string terms = normalize_query(cols[1]);
    if (terms.empty()) {
      reject("empty query after normalization");
      continue;
    }
    Day day;
    try {
      day = parse_day(cols[2]);
    } catch (const std::exception&) {
      reject("unparseable timestamp '" + std::string(cols[2]) + "'");
      continue;
    }
    QueryRecord qr{std::string(cols[0]), terms, day};
    std::optional<ClickRecord> cr;
    if (!cols[4].empty()) {
      int rank = 1;
      if (!cols[3].empty()) {
        auto r = std::from_chars(cols[3].data(), cols[3].data() + cols[3].size(), rank);
        if (r.ec != std::errc() || rank < 1) {
          reject("bad item rank '" + std::string(cols[3]) + "'");
          continue;
        }
      }
      cr = ClickRecord{terms, std::string(cols[4]), rank, day};
    }
    if (report) report->records_parsed++;
    qrecs.push_back(std::move(qr));
    clicks.push_back(std::move(cr));
  }
  return LogIndex::from_records(qrecs, clicks, opts, report);
}

// Matched query ids for an entity: queries containing any alias at a word
// boundary. Sorted, deduplicated.
inline std::vector<uint32_t> entity_query_ids(const LogIndex& index,
                                              const EntityAliasTable& aliases,
                                              const std::string& entity) {
  const auto& as = aliases.aliases(entity);  // throws on unknown entity
  std::vector<uint32_t> ids;
  const auto& qs = index.queries();
  for (uint32_t i = 0; i < qs.size(); ++i)
    for (const auto& a : as)
      if (contains_at_word_boundary(qs[i], a)) {
        ids.push_back(i);
        break;
      }
  return ids;
}

// Daily match counts for an entity over [window_lo, window_hi].
inline TimeSeries series_for(const LogIndex& index, const EntityAliasTable& aliases,
                             const std::string& entity, Day window_lo, Day window_hi) {
  if (window_hi < window_lo) throw std::invalid_argument("series_for: empty window");
  if (!index.has_span() || window_lo < index.first_day() || window_hi > index.last_day())
    throw std::invalid_argument("series_for: window outside log span");
  auto ids = entity_query_ids(index, aliases, entity);
  TimeSeries ts;
  ts.origin = window_lo;
  ts.values.assign(size_t(window_hi - window_lo + 1), 0.0);
  for (uint32_t id : ids) {
    const auto& daily = index.data(id).daily;
    for (auto it = daily.lower_bound(window_lo); it != daily.end() && it->first <= window_hi;
         ++it)
      ts.values[size_t(it->first - window_lo)] += double(it->second);
  }
  return ts;
}

// Loads a (entity_id, ISO day, edit_count) CSV; returns the entity's series
// with gaps filled with zeros. Negative counts are rejected and reported.
inline TimeSeries load_edit_series(const std::string& path, const std::string& entity,
                                   RejectReport* report = nullptr) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open edit series: " + path);
  std::map<Day, double> rows;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view sv = strip_cr(line);
    if (sv.empty()) continue;
    auto cols = csv_split(sv);
    if (cols.size() != 3) {
      if (report) report->rejected_lines.push_back({line_no, "expected 3 columns"});
      continue;
    }
    if (cols[0] != entity) continue;
    Day d;
    try {
      d = parse_day(cols[1]);
    } catch (const std::exception&) {
      if (report) report->rejected_lines.push_back({line_no, "bad day"});
      continue;
    }
    double c = 0;
    try {
      c = std::stod(cols[2]);
    } catch (const std::exception&) {
      if (report) report->rejected_lines.push_back({line_no, "bad count"});
      continue;
    }
    if (c < 0) {
      if (report) report->rejected_lines.push_back({line_no, "negative edit_count"});
      continue;
    }
    rows[d] += c;
  }
  if (rows.empty())
    throw std::runtime_error("no edit rows for entity: '" + entity + "'");
  TimeSeries ts;
  ts.origin = rows.begin()->first;
  Day last = rows.rbegin()->first;
  ts.values.assign(size_t(last - ts.origin + 1), 0.0);
  for (auto& [d, c] : rows) ts.values[size_t(d - ts.origin)] = c;
  return ts;
}

}  // namespace aspectra

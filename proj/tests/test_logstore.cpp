#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>

#include "aspectra/logstore.hpp"

using namespace aspectra;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir() {
  auto p = fs::temp_directory_path() / "aspectra_logstore_test";
  fs::create_directories(p);
  return p;
}

std::string write_file(const std::string& name, const std::string& content) {
  auto p = temp_dir() / name;
  std::ofstream out(p);
  out << content;
  return p.string();
}

// Log with one frequent query (6 hits), one rare (2 hits), one click pair
// repeated 3 times and one repeated once.
std::string sample_log() {
  std::string log = "AnonID\tQuery\tQueryTime\tItemRank\tClickURL\n";
  for (int i = 0; i < 3; ++i)
    log += "1\tparis hotels\t2006-03-0" + std::to_string(i + 1) +
           " 10:00:00\t1\thttp://a.example/x\n";
  for (int i = 0; i < 3; ++i)
    log += "2\tParis  HOTELS\t2006-03-0" + std::to_string(i + 1) + " 11:00:00\t\t\n";
  log += "3\trare query\t2006-03-02 09:00:00\t\t\n";
  log += "3\trare query\t2006-03-03 09:00:00\t2\thttp://b.example/y\n";
  return log;
}

}  // namespace

TEST_CASE("ingest normalizes, filters by frequency, and applies min_click", "[logstore]") {
  auto path = write_file("basic.tsv", sample_log());
  IngestOptions opts;
  opts.min_qf = 5;
  opts.min_click = 3;
  RejectReport report;
  LogIndex idx = ingest(path, opts, &report);

  // "paris hotels" and "Paris  HOTELS" normalize together: total 6, kept
  REQUIRE(idx.num_queries() == 1);
  CHECK(idx.total_freq("paris hotels") == 6);
  CHECK(idx.total_freq("rare query") == 0);  // 2 < min_qf
  CHECK(report.queries_dropped_low == 1);
  CHECK(report.records_parsed == 8);

  // click pair survives: 3 clicks on http://a.example/x >= min_click
  auto qid = idx.query_id("paris hotels");
  REQUIRE(qid.has_value());
  auto clicks = idx.clicks_on(*qid, parse_day("2006-03-01"));
  REQUIRE(clicks.size() == 1);
  CHECK(clicks[0].first == "http://a.example/x");
  CHECK(clicks[0].second == 1);

  CHECK(idx.first_day() == parse_day("2006-03-01"));
  CHECK(idx.last_day() == parse_day("2006-03-03"));
  CHECK(idx.freq_on("paris hotels", parse_day("2006-03-02")) == 2);
  CHECK(idx.freq_between("paris hotels", parse_day("2006-03-01"), parse_day("2006-03-02")) == 4);
}

TEST_CASE("ingest drops malformed lines but keeps going", "[logstore]") {
  std::string log = sample_log();
  log += "9\tbad date\tnot-a-date\t\t\n";
  log += "9\tshort line\n";
  log += "9\t   \t2006-03-01 00:00:00\t\t\n";  // empty after normalization
  auto path = write_file("malformed.tsv", log);
  RejectReport report;
  IngestOptions opts;
  opts.min_qf = 1;
  opts.min_click = 1;
  LogIndex idx = ingest(path, opts, &report);
  CHECK(idx.num_queries() == 2);
  REQUIRE(report.rejected_lines.size() == 3);
  CHECK(report.rejected_lines[0].reason.find("unparseable timestamp") != std::string::npos);
  CHECK(report.rejected_lines[1].reason.find("5 columns") != std::string::npos);
  CHECK(report.rejected_lines[2].reason.find("empty query") != std::string::npos);
}

TEST_CASE("english-only filter drops low-ascii queries", "[logstore]") {
  std::string log = "AnonID\tQuery\tQueryTime\tItemRank\tClickURL\n";
  for (int i = 0; i < 5; ++i) log += "1\tplain words\t2006-03-01 00:00:00\t\t\n";
  for (int i = 0; i < 5; ++i) log += "1\t\xd0\xbf\xd0\xbe\xd0\xb8\xd1\x81\xd0\xba\t2006-03-01 00:00:00\t\t\n";
  auto path = write_file("ascii.tsv", log);
  IngestOptions opts;
  opts.min_qf = 1;
  opts.english_only = true;
  RejectReport report;
  LogIndex idx = ingest(path, opts, &report);
  CHECK(idx.num_queries() == 1);
  CHECK(report.queries_dropped_non_english == 1);

  opts.english_only = false;
  LogIndex idx2 = ingest(path, opts);
  CHECK(idx2.num_queries() == 2);
}

TEST_CASE("max_qf drops head queries", "[logstore]") {
  std::string log = "AnonID\tQuery\tQueryTime\tItemRank\tClickURL\n";
  for (int i = 0; i < 20; ++i) log += "1\thead\t2006-03-01 00:00:00\t\t\n";
  for (int i = 0; i < 6; ++i) log += "1\ttail\t2006-03-01 00:00:00\t\t\n";
  auto path = write_file("maxqf.tsv", log);
  IngestOptions opts;
  opts.min_qf = 5;
  opts.max_qf = 15;
  RejectReport report;
  LogIndex idx = ingest(path, opts, &report);
  CHECK(idx.num_queries() == 1);
  CHECK(idx.total_freq("tail") == 6);
  CHECK(report.queries_dropped_high == 1);
}

TEST_CASE("index save/load round-trips exactly", "[logstore]") {
  auto path = write_file("roundtrip.tsv", sample_log());
  IngestOptions opts;
  opts.min_qf = 1;
  opts.min_click = 1;
  LogIndex idx = ingest(path, opts);
  auto bin = (temp_dir() / "roundtrip.bin").string();
  idx.save(bin);
  LogIndex back = LogIndex::load(bin);
  CHECK(back.to_json().dump() == idx.to_json().dump());
  CHECK(back.num_queries() == idx.num_queries());
  CHECK(back.first_day() == idx.first_day());
  CHECK(back.total_freq("rare query") == 2);
}

TEST_CASE("alias table matches queries at word boundaries", "[logstore]") {
  std::string log = "AnonID\tQuery\tQueryTime\tItemRank\tClickURL\n";
  auto add = [&](const std::string& q, int n) {
    for (int i = 0; i < n; ++i) log += "1\t" + q + "\t2006-03-01 00:00:00\t\t\n";
  };
  add("justice league", 3);
  add("justice league schedule", 2);
  add("injustice leagues", 2);
  auto path = write_file("alias.tsv", log);
  IngestOptions opts;
  opts.min_qf = 1;
  LogIndex idx = ingest(path, opts);

  EntityAliasTable aliases;
  aliases.add("e1", "Justice  League");
  auto ids = entity_query_ids(idx, aliases, "e1");
  REQUIRE(ids.size() == 2);
  CHECK(idx.query_text(ids[0]) == "justice league");
  CHECK(idx.query_text(ids[1]) == "justice league schedule");
  CHECK_THROWS_AS(entity_query_ids(idx, aliases, "nope"), std::invalid_argument);

  auto series = series_for(idx, aliases, "e1", idx.first_day(), idx.last_day());
  REQUIRE(series.values.size() == 1);
  CHECK(series.values[0] == 5.0);
  CHECK_THROWS_AS(series_for(idx, aliases, "e1", idx.first_day() - 1, idx.last_day()),
                  std::invalid_argument);

  auto json_path = (temp_dir() / "aliases.json").string();
  aliases.to_json_file(json_path);
  auto back = EntityAliasTable::from_json_file(json_path);
  CHECK(back.all() == aliases.all());
}

TEST_CASE("edit series loads with zero-filled gaps", "[logstore]") {
  auto path = write_file("edits.csv",
                         "entity,day,edit_count\n"
                         "e1,2006-03-01,4\n"
                         "e1,2006-03-04,2\n"
                         "e2,2006-03-02,9\n"
                         "e1,2006-03-04,1\n");
  TimeSeries ts = load_edit_series(path, "e1");
  CHECK(ts.origin == parse_day("2006-03-01"));
  CHECK(ts.values == std::vector<double>{4, 0, 0, 3});
  CHECK_THROWS(load_edit_series(path, "missing"));

  RejectReport rep;
  auto bad = write_file("edits_bad.csv", "entity,day,edit_count\ne1,2006-03-01,-2\ne1,2006-03-02,5\n");
  TimeSeries ts2 = load_edit_series(bad, "e1", &rep);
  CHECK(ts2.values == std::vector<double>{5});
  CHECK(rep.rejected_lines.size() == 1);
}

TEST_CASE("daily series and chrono order are deterministic", "[logstore]") {
  auto path = write_file("series.tsv", sample_log());
  IngestOptions opts;
  opts.min_qf = 1;
  opts.min_click = 1;
  LogIndex idx = ingest(path, opts);
  auto qid = idx.query_id("paris hotels");
  REQUIRE(qid);
  auto ts = idx.daily_series_id(*qid, idx.first_day(), idx.last_day());
  CHECK(ts.values == std::vector<double>{2, 2, 2});
  auto ts2 = idx.daily_series("paris hotels", idx.first_day(), idx.last_day());
  CHECK(ts2.values == ts.values);
  auto ts3 = idx.daily_series("unknown", idx.first_day(), idx.last_day());
  CHECK(ts3.values == std::vector<double>{0, 0, 0});
}

#include <catch2/catch_amalgamated.hpp>

#include "aspectra/common.hpp"

using namespace aspectra;

TEST_CASE("day parsing round-trips and rejects garbage", "[common]") {
  CHECK(format_day(parse_day("2006-03-01")) == "2006-03-01");
  CHECK(format_day(parse_day("2006-12-31")) == "2006-12-31");
  CHECK(parse_day("2006-03-02") - parse_day("2006-03-01") == 1);
  CHECK(parse_day("2006-04-01") - parse_day("2006-03-01") == 31);
  // leap handling
  CHECK(parse_day("2004-03-01") - parse_day("2004-02-28") == 2);
  // trailing time-of-day is ignored
  CHECK(parse_day("2006-03-01 17:45:02") == parse_day("2006-03-01"));
  CHECK_THROWS_AS(parse_day("2006/03/01"), std::invalid_argument);
  CHECK_THROWS_AS(parse_day("not a date"), std::invalid_argument);
  CHECK_THROWS_AS(parse_day("2006-02-30"), std::invalid_argument);
  CHECK_THROWS_AS(parse_day(""), std::invalid_argument);
}

TEST_CASE("month index is linear across year boundaries", "[common]") {
  Day dec = parse_day("2005-12-15");
  Day jan = parse_day("2006-01-15");
  CHECK(month_index(jan) - month_index(dec) == 1);
  CHECK(month_index(parse_day("2006-03-01")) == month_index(parse_day("2006-03-31")));
  CHECK(month_index(parse_day("2006-04-01")) - month_index(parse_day("2006-03-31")) == 1);
}

TEST_CASE("query normalization lowercases and squeezes whitespace", "[common]") {
  CHECK(normalize_query("  New   York\tAspects ") == "new york aspects");
  CHECK(normalize_query("already clean") == "already clean");
  CHECK(normalize_query("") == "");
}

TEST_CASE("tokenizers split on whitespace and punctuation", "[common]") {
  CHECK(tokenize("a b  c") == std::vector<std::string>{"a", "b", "c"});
  CHECK(tokenize_text("Hello, World! it's 2006.") ==
        std::vector<std::string>{"hello", "world", "it", "s", "2006"});
  CHECK(tokenize_text("") == std::vector<std::string>{});
}

TEST_CASE("csv escaping round-trips through the splitter", "[common]") {
  std::string field = "with, comma and \"quotes\"";
  std::string line = csv_escape(field) + "," + csv_escape("plain");
  auto cols = csv_split(line);
  REQUIRE(cols.size() == 2);
  CHECK(cols[0] == field);
  CHECK(cols[1] == "plain");
}

TEST_CASE("strip_cr removes a trailing carriage return only", "[common]") {
  CHECK(strip_cr("abc\r") == "abc");
  CHECK(strip_cr("abc") == "abc");
  CHECK(strip_cr("a\rbc") == "a\rbc");
}

TEST_CASE("fnv1a64 matches published reference vectors", "[common]") {
  // reference values of the FNV-1a 64-bit algorithm
  CHECK(fnv1a64("") == 0xcbf29ce484222325ull);
  CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cull);
  CHECK(fnv1a64("foobar") == 0x85944171f73967e8ull);
}

TEST_CASE("rng is deterministic per seed and poisson has sane mean", "[common]") {
  Rng a(7), b(7), c(8);
  bool all_same = true, any_diff = false;
  double acc = 0;
  for (int i = 0; i < 1000; ++i) {
    double va = a.uniform(), vb = b.uniform(), vc = c.uniform();
    all_same = all_same && va == vb;
    any_diff = any_diff || va != vc;
    acc += va;
  }
  CHECK(all_same);
  CHECK(any_diff);
  CHECK(acc / 1000.0 == Catch::Approx(0.5).margin(0.05));

  Rng p(11);
  double sum = 0;
  for (int i = 0; i < 4000; ++i) sum += double(p.poisson(3.5));
  CHECK(sum / 4000.0 == Catch::Approx(3.5).margin(0.15));
  CHECK(p.poisson(0.0) == 0);
}

TEST_CASE("uniform_int covers its inclusive range", "[common]") {
  Rng r(3);
  std::set<long> seen;
  for (int i = 0; i < 400; ++i) {
    long v = r.uniform_int(2, 5);
    CHECK(v >= 2);
    CHECK(v <= 5);
    seen.insert(v);
  }
  CHECK(seen.size() == 4);
}

TEST_CASE("fmt_double keeps 12 significant digits", "[common]") {
  CHECK(fmt_double(0.5) == "0.5");
  CHECK(std::stod(fmt_double(1.0 / 3.0)) == Catch::Approx(1.0 / 3.0).epsilon(1e-11));
  CHECK(fmt_double(0.0) == "0");
}

TEST_CASE("word-boundary containment requires full-token matches", "[common]") {
  CHECK(contains_at_word_boundary("new york history", "history"));
  CHECK(contains_at_word_boundary("new york history", "new york"));
  CHECK_FALSE(contains_at_word_boundary("new york history", "york h"));
  CHECK_FALSE(contains_at_word_boundary("historyx", "history"));
  CHECK_FALSE(contains_at_word_boundary("prehistory", "history"));
  CHECK_FALSE(contains_at_word_boundary("anything", ""));
}

TEST_CASE("pearson correlation oracle values", "[common]") {
  CHECK(pearson({1, 2, 3}, {2, 4, 6}) == Catch::Approx(1.0));
  CHECK(pearson({1, 2, 3}, {6, 4, 2}) == Catch::Approx(-1.0));
  CHECK_THROWS_AS(pearson({1, 1, 1}, {1, 2, 3}), std::domain_error);
  CHECK_THROWS_AS(pearson({1}, {2}), std::invalid_argument);
}

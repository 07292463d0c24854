#pragma once

#include <filesystem>
#include <fstream>
#include <numbers>
#include <set>

#include <json.hpp>

#include "aspectra/common.hpp"
#include "aspectra/eventclf.hpp"
#include "aspectra/logstore.hpp"
#include "aspectra/spikem.hpp"

namespace aspectra {

// ---------------------------------------------------------------------------
// Synthetic dataset with planted ground truth: entities whose query attention
// follows a diffusion curve around a planted event day, aspects whose volume
// and graded relevance depend on the event phase, a sectioned article corpus,
// an edit-activity series, and click structure that co-clicks an entity's
// aspects onto shared URLs.

struct AspectTemplate {
  std::string term;
  std::array<int, 3> grades_breaking;        // before, during, after
  std::array<int, 3> grades_anticipated;
  std::array<double, 3> intensity_breaking;  // volume multiplier per phase
  std::array<double, 3> intensity_anticipated;
  double article_weight = 0.0;  // term frequency weight inside the entity article
};

inline const std::vector<AspectTemplate>& default_aspect_templates() {
  static const std::vector<AspectTemplate> t = {
      {"history", {3, 1, 1}, {3, 1, 1}, {0.50, 0.20, 0.20}, {0.50, 0.20, 0.20}, 12.0},
      {"facts", {2, 1, 1}, {2, 1, 1}, {0.35, 0.15, 0.15}, {0.35, 0.15, 0.15}, 6.0},
      {"results", {1, 3, 3}, {1, 3, 3}, {0.03, 1.00, 0.85}, {0.03, 1.00, 0.85}, 0.0},
      {"highlights", {1, 2, 3}, {1, 2, 3}, {0.02, 0.60, 0.95}, {0.02, 0.60, 0.95}, 0.0},
      {"live", {1, 3, 1}, {1, 3, 1}, {0.03, 1.00, 0.05}, {0.03, 1.00, 0.05}, 0.0},
      {"schedule", {1, 1, 1}, {3, 2, 1}, {0.10, 0.10, 0.05}, {0.70, 0.08, 0.01}, 3.0},
      {"rumor", {0, 0, 0}, {0, 0, 0}, {0.06, 0.06, 0.06}, {0.06, 0.06, 0.06}, 0.0},
  };
  return t;
}

struct SynthSpec {
  int n_breaking = 30;
  int n_anticipated = 30;
  std::string span_start = "2006-03-01";
  int span_days = 92;
  // Event days stay inside [margin_lo, span - 1 - margin_hi]. The left margin
  // leaves enough pre-event history for two full weekly cycles at the
  // earliest studied hitting time (event - 10).
  int event_margin_lo = 24;
  int event_margin_hi = 14;
  double base_volume = 6.0;
  uint64_t seed = 42;
  int n_background_queries = 40;
  std::vector<AspectTemplate> templates = default_aspect_templates();
  std::vector<int> event_day_offsets;  // optional explicit event offsets per entity

  void validate() const {
    if (n_breaking < 0 || n_anticipated < 0 || n_breaking + n_anticipated == 0)
      throw std::invalid_argument("synth: need at least one entity");
    if (span_days - 1 - event_margin_hi < event_margin_lo)
      throw std::invalid_argument("synth: span too short for the event margins");
    if (templates.empty()) throw std::invalid_argument("synth: no aspect templates");
    for (int off : event_day_offsets)
      if (off < event_margin_lo || off > span_days - 1 - event_margin_hi)
        throw std::invalid_argument("synth: event day outside span");
  }
};

struct SynthEntity {
  std::string id;
  std::string alias;
  EventType type = EventType::breaking;
  Day event_day = 0;
};

struct SynthPaths {
  std::string log_tsv;
  std::string aliases_json;
  std::string corpus_jsonl;
  std::string edits_csv;
  std::string labels_csv;
  std::string entities_csv;
  std::string embeddings_txt;
};

struct SynthResult {
  std::vector<SynthEntity> entities;
  SynthPaths paths;
  Day span_start = 0;
  int span_days = 0;
};

inline EventTime phase_of(Day d, Day event_day, int half_window = 5) {
  if (d < event_day - half_window) return EventTime::before;
  if (d <= event_day + half_window) return EventTime::during;
  return EventTime::after;
}

namespace detail {

inline const std::vector<std::string>& synth_adjectives() {
  static const std::vector<std::string> v = {
      "amber",  "birch",  "cedar",  "delta",   "ember",  "fable",  "garnet", "harbor",
      "indigo", "juniper", "kestrel", "lumen",  "marble", "nimbus", "onyx",   "prairie",
      "quartz", "rowan",  "sable",  "tundra",  "umber",  "velvet", "willow", "zephyr",
      "aurora", "basalt", "coral",  "drift",   "echo",   "falcon", "glacier", "heron"};
  return v;
}

inline const std::vector<std::string>& synth_nouns() {
  static const std::vector<std::string> v = {
      "marathon", "festival", "summit",  "derby",    "regatta",  "premiere", "election",
      "eclipse",  "carnival", "expo",    "tournament", "parade",  "auction",  "concert",
      "pageant",  "rally",    "fair",    "gala",      "contest",  "ceremony", "voyage",
      "launch",   "debate",   "opening", "finale",    "festivity", "jubilee",  "exhibit",
      "revue",    "congress", "classic", "series"};
  return v;
}

inline const std::vector<std::string>& synth_background_words() {
  static const std::vector<std::string> v = {
      "weather", "recipes", "horoscope", "lottery", "crossword", "jokes",   "wallpaper",
      "ringtone", "directions", "coupons", "quotes", "lyrics",   "trivia",  "puzzles",
      "forecast", "calculator", "dictionary", "thesaurus", "translator", "almanac"};
  return v;
}

}  // namespace detail

class SynthGenerator {
 public:
  explicit SynthGenerator(SynthSpec spec) : spec_(std::move(spec)), rng_(spec_.seed) {
    spec_.validate();
    origin_ = parse_day(spec_.span_start);
    build_entities();
  }

  SynthResult generate(const std::string& out_dir) {
    std::filesystem::create_directories(out_dir);
    SynthResult res;
    res.entities = entities_;
    res.span_start = origin_;
    res.span_days = spec_.span_days;
    auto path = [&](const std::string& name) {
      return (std::filesystem::path(out_dir) / name).string();
    };
    res.paths.log_tsv = path("log.tsv");
    res.paths.aliases_json = path("aliases.json");
    res.paths.corpus_jsonl = path("corpus.jsonl");
    res.paths.edits_csv = path("edits.csv");
    res.paths.labels_csv = path("labels.csv");
    res.paths.entities_csv = path("entities.csv");
    res.paths.embeddings_txt = path("embeddings.txt");

    write_log(res.paths.log_tsv);
    write_aliases(res.paths.aliases_json);
    write_corpus(res.paths.corpus_jsonl);
    write_edits(res.paths.edits_csv);
    write_labels(res.paths.labels_csv);
    write_entities(res.paths.entities_csv);
    write_embeddings(res.paths.embeddings_txt);
    return res;
  }

  const std::vector<SynthEntity>& entities() const { return entities_; }
  Day origin() const { return origin_; }

  // Expected (pre-noise) daily volume of one aspect query.
  double aspect_intensity(size_t entity_idx, const AspectTemplate& tpl, int day_off) const {
    const SynthEntity& e = entities_[entity_idx];
    EventTime phase = phase_of(origin_ + day_off, e.event_day);
    const auto& intensity =
        e.type == EventType::breaking ? tpl.intensity_breaking : tpl.intensity_anticipated;
    return intensity[size_t(int(phase))] * curves_[entity_idx][size_t(day_off)];
  }

 private:
  void build_entities() {
    const auto& adjs = detail::synth_adjectives();
    const auto& nouns = detail::synth_nouns();
    int total = spec_.n_breaking + spec_.n_anticipated;
    if (!spec_.event_day_offsets.empty() && int(spec_.event_day_offsets.size()) != total)
      throw std::invalid_argument("synth: event_day_offsets count mismatch");
    std::set<std::string> used;
    for (int i = 0; i < total; ++i) {
      SynthEntity e;
      e.type = (i % 2 == 0 && i / 2 < spec_.n_breaking) || i / 2 >= spec_.n_anticipated
                   ? EventType::breaking
                   : EventType::anticipated;
      std::string alias;
      size_t salt = 0;
      do {
        size_t a = (size_t(i) * 7 + salt * 13) % adjs.size();
        size_t b = (size_t(i) * 11 + salt * 17) % nouns.size();
        alias = adjs[a] + " " + nouns[b];
        ++salt;
      } while (!used.insert(alias).second);
      e.alias = alias;
      std::string id = alias;
      for (char& c : id)
        if (c == ' ') c = '_';
      e.id = (e.type == EventType::breaking ? "b_" : "a_") + id;
      int lo = spec_.event_margin_lo;
      int hi = spec_.span_days - 1 - spec_.event_margin_hi;
      int offset = spec_.event_day_offsets.empty()
                       ? lo + int((long(i) * (hi - lo)) / std::max(1, total - 1))
                       : spec_.event_day_offsets[size_t(i)];
      e.event_day = origin_ + offset;
      entities_.push_back(std::move(e));
    }

    // attention curves
    for (size_t i = 0; i < entities_.size(); ++i) {
      const SynthEntity& e = entities_[i];
      int event_off = int(e.event_day - origin_);
      double jitter = std::exp(rng_.normal(0.0, 0.15));
      SpikeMParams p;
      if (e.type == EventType::breaking) {
        p.n_pop = 1000.0 * jitter;
        p.beta = 0.0012;
        p.n_b = std::max(0, event_off - 2);
        p.s_b = 60.0 * jitter;
        p.eps = 0.0;
        p.p_a = 0.0;
        p.p_p = 7.0;
      } else {
        p.n_pop = 800.0 * jitter;
        p.beta = 0.0009;
        p.n_b = std::max(0, event_off - 6);
        p.s_b = 30.0 * jitter;
        p.eps = 0.0;
        p.p_a = 0.8;
        p.p_p = 7.0;
        p.p_s = 0.0;
      }
      auto spike = spikem_simulate(p, spec_.span_days);
      std::vector<double> curve(size_t(spec_.span_days), 0.0);
      for (int d = 0; d < spec_.span_days; ++d) {
        double base = spec_.base_volume;
        if (e.type == EventType::anticipated)
          base *= 1.0 + 0.8 * std::abs(std::sin(2.0 * std::numbers::pi * d / 7.0));
        curve[size_t(d)] = base + spike[size_t(d)];
      }
      curves_.push_back(std::move(curve));
    }
  }

  std::string hub_url(const SynthEntity& e) const { return "http://portal.example/" + e.id; }
  std::string wiki_url(const SynthEntity& e) const { return "http://wiki.example/" + e.id; }
  std::string aspect_url(const SynthEntity& e, const std::string& term) const {
    return "http://news.example/" + e.id + "/" + term;
  }

  void write_log(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write log: " + path);
    out << "AnonID\tQuery\tQueryTime\tItemRank\tClickURL\n";
    const auto& bg = detail::synth_background_words();
    for (int d = 0; d < spec_.span_days; ++d) {
      std::string date = format_day(origin_ + d);
      auto emit = [&](const std::string& query, const std::string& url, int rank) {
        long user = 1000 + long(rng_.uniform_int(0, 4999));
        int hh = rng_.uniform_int(0, 23), mm = rng_.uniform_int(0, 59),
            ss = rng_.uniform_int(0, 59);
        char ts[32];
        std::snprintf(ts, sizeof(ts), "%s %02d:%02d:%02d", date.c_str(), hh, mm, ss);
        out << user << "\t" << query << "\t" << ts << "\t";
        if (url.empty())
          out << "\t";
        else
          out << rank << "\t" << url;
        out << "\n";
      };

      for (size_t ei = 0; ei < entities_.size(); ++ei) {
        const SynthEntity& e = entities_[ei];
        // the bare entity query
        long n_alias = rng_.poisson(0.4 * curves_[ei][size_t(d)]);
        for (long k = 0; k < n_alias; ++k) {
          double r = rng_.uniform(0.0, 1.0);
          if (r < 0.5)
            emit(e.alias, hub_url(e), 1);
          else if (r < 0.8)
            emit(e.alias, wiki_url(e), 2);
          else
            emit(e.alias, "", 0);
        }
        // aspect queries
        for (const auto& tpl : spec_.templates) {
          double lambda = aspect_intensity(ei, tpl, d);
          long n = rng_.poisson(lambda);
          std::string q = e.alias + " " + tpl.term;
          for (long k = 0; k < n; ++k) {
            double r = rng_.uniform(0.0, 1.0);
            if (r < 0.30)
              emit(q, hub_url(e), 1);
            else if (r < 0.75)
              emit(q, aspect_url(e, tpl.term), 2);
            else if (r < 0.90 && tpl.article_weight > 0)
              emit(q, wiki_url(e), 3);
            else
              emit(q, "", 0);
          }
        }
      }
      // background noise
      for (int b = 0; b < spec_.n_background_queries; ++b) {
        const std::string& w = bg[size_t(b) % bg.size()];
        std::string q = w + (b >= int(bg.size()) ? " online" : "");
        long n = rng_.poisson(3.0);
        for (long k = 0; k < n; ++k) {
          double r = rng_.uniform(0.0, 1.0);
          if (r < 0.6)
            emit(q, "http://misc.example/" + w, 1);
          else
            emit(q, "", 0);
        }
      }
    }
  }

  void write_aliases(const std::string& path) {
    EntityAliasTable table;
    for (const auto& e : entities_) table.add(e.id, e.alias);
    table.to_json_file(path);
  }

  void write_corpus(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write corpus: " + path);
    auto repeat = [](const std::string& w, int n) {
      std::string s;
      for (int i = 0; i < n; ++i) {
        if (!s.empty()) s += " ";
        s += w;
      }
      return s;
    };
    for (size_t ei = 0; ei < entities_.size(); ++ei) {
      const SynthEntity& e = entities_[ei];
      nlohmann::json j;
      j["entity_id"] = e.id;
      j["title"] = e.alias;
      nlohmann::json sections = nlohmann::json::array();
      std::string intro = e.alias + " is a recurring public event drawing broad attention";
      sections.push_back({{"title", "intro"}, {"text", intro}});
      for (const auto& tpl : spec_.templates) {
        if (tpl.article_weight <= 0) continue;
        std::string text = "the " + tpl.term + " of " + e.alias + " spans many years " +
                           repeat(tpl.term, int(tpl.article_weight));
        sections.push_back({{"title", tpl.term}, {"text", text}});
      }
      sections.push_back(
          {{"title", "reception"},
           {"text", "coverage of " + e.alias + " grew steadily across regional outlets"}});
      j["sections"] = sections;
      nlohmann::json inlinks = nlohmann::json::array();
      inlinks.push_back(entities_[(ei + 1) % entities_.size()].id);
      inlinks.push_back(entities_[(ei + 2) % entities_.size()].id);
      j["inlinks"] = inlinks;
      out << j.dump() << "\n";
    }
    for (const auto& e : entities_) {
      out << nlohmann::json{
                 {"url", hub_url(e)},
                 {"text", e.alias + " official portal news updates and announcements"}}
                 .dump()
          << "\n";
      out << nlohmann::json{{"url", wiki_url(e)},
                            {"text", e.alias + " history facts background " +
                                         repeat("history", 8) + " " + repeat("facts", 5)}}
                 .dump()
          << "\n";
      for (const auto& tpl : spec_.templates) {
        if (tpl.article_weight > 0) continue;  // event-side reading material only
        out << nlohmann::json{{"url", aspect_url(e, tpl.term)},
                              {"text", e.alias + " " + tpl.term + " report " +
                                           repeat(tpl.term, 10) + " coverage of the event"}}
                   .dump()
            << "\n";
      }
    }
  }

  void write_edits(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write edits: " + path);
    out << "entity,day,count\n";
    for (const auto& e : entities_) {
      int event_off = int(e.event_day - origin_);
      for (int d = 0; d < spec_.span_days; ++d) {
        double v;
        if (e.type == EventType::anticipated) {
          v = 4.0 + 3.0 * std::abs(std::sin(2.0 * std::numbers::pi * d / 7.0));
          if (std::abs(d - event_off) <= 2) v += 20.0;
        } else {
          v = 2.0;
          if (d >= event_off && d <= event_off + 3) v += 25.0 / (1 + d - event_off);
        }
        out << csv_escape(e.id) << "," << format_day(origin_ + d) << "," << long(std::lround(v))
            << "\n";
      }
    }
  }

  void write_labels(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write labels: " + path);
    out << "entity,aspect,before_grade,during_grade,after_grade\n";
    for (const auto& e : entities_) {
      for (const auto& tpl : spec_.templates) {
        const auto& g =
            e.type == EventType::breaking ? tpl.grades_breaking : tpl.grades_anticipated;
        out << csv_escape(e.id) << "," << csv_escape(e.alias + " " + tpl.term) << "," << g[0]
            << "," << g[1] << "," << g[2] << "\n";
      }
    }
  }

  void write_entities(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write entities: " + path);
    out << "entity,alias,type,event_day\n";
    for (const auto& e : entities_)
      out << csv_escape(e.id) << "," << csv_escape(e.alias) << "," << to_string(e.type) << ","
          << format_day(e.event_day) << "\n";
  }

  void write_embeddings(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write embeddings: " + path);
    std::set<std::string> vocab;
    for (const auto& e : entities_)
      for (auto& t : tokenize(e.alias)) vocab.insert(t);
    for (const auto& tpl : spec_.templates) vocab.insert(tpl.term);
    for (const auto& w : detail::synth_background_words()) vocab.insert(w);
    Rng erng(spec_.seed ^ 0x9e3779b97f4a7c15ULL);
    const int dim = 8;
    for (const auto& w : vocab) {
      out << w;
      double norm = 0;
      std::array<double, 8> v{};
      for (int j = 0; j < dim; ++j) {
        v[size_t(j)] = erng.normal(0.0, 1.0);
        norm += v[size_t(j)] * v[size_t(j)];
      }
      norm = std::sqrt(norm);
      for (int j = 0; j < dim; ++j) out << " " << fmt_double(v[size_t(j)] / norm);
      out << "\n";
    }
  }

  SynthSpec spec_;
  Rng rng_;
  Day origin_ = 0;
  std::vector<SynthEntity> entities_;
  std::vector<std::vector<double>> curves_;
};

inline SynthResult generate_synthetic(const SynthSpec& spec, const std::string& out_dir) {
  SynthGenerator gen(spec);
  return gen.generate(out_dir);
}

// entities.csv reader (entity, alias, type, event_day).
struct EntityInfo {
  std::string id;
  std::string alias;
  EventType type = EventType::breaking;
  Day event_day = 0;
};

inline std::vector<EntityInfo> load_entities_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open entities file: " + path);
  std::vector<EntityInfo> out;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view sv = strip_cr(line);
    if (sv.empty()) continue;
    auto cols = csv_split(sv);
    if (line_no == 1 && !cols.empty() && cols[0] == "entity") continue;
    if (cols.size() != 4)
      throw std::runtime_error("entities line " + std::to_string(line_no) +
                               ": expected 4 columns");
    EntityInfo e;
    e.id = cols[0];
    e.alias = cols[1];
    e.type = event_type_from_string(cols[2]);
    e.event_day = parse_day(cols[3]);
    out.push_back(std::move(e));
  }
  if (out.empty()) throw std::runtime_error("entities file empty: " + path);
  return out;
}

}  // namespace aspectra

#pragma once

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <json.hpp>

#include "aspectra/aspects.hpp"
#include "aspectra/clickgraph.hpp"
#include "aspectra/common.hpp"
#include "aspectra/eval.hpp"
#include "aspectra/eventclf.hpp"
#include "aspectra/features.hpp"
#include "aspectra/logstore.hpp"
#include "aspectra/ranker.hpp"
#include "aspectra/signals.hpp"
#include "aspectra/spikem.hpp"
#include "aspectra/synth.hpp"

namespace aspectra {

// Thrown for bad configs, bad CLI usage, and missing/stale artifacts; the CLI
// maps it to exit code 1. Everything else is an internal error (exit code 2).
struct UserError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Configuration: one flat JSON object. CLI flags override file values which
// override defaults.

struct Config {
  // input/output paths; empty input paths default to the synth outputs
  std::string output_dir = "out";
  std::string log, aliases, corpus, edits, embeddings, labels, entities;

  // ingest
  long min_qf = 5;
  long max_qf = 15000;
  long min_click = 3;
  bool english_only = false;
  double ascii_threshold = 0.9;

  // graph + aspect extraction
  double restart = 0.15;
  int candidate_pool = 30;
  int top_k_aspects = 10;
  double ap_damping = 0.7;
  int ap_max_iter = 200;
  double lambda_lex = 0.5;
  double lambda_sem = 0.5;

  // time-series signals
  int period = 7;

  // aspect features
  double mu = 2000.0;
  int top_k_lm = 3;
  int i_s = 1;
  int i_l = 5;
  int cc_window = 14;
  int entropy_window = 28;

  // ranking
  double C = 20.0;
  int epochs = 50;
  int W = 10;
  long N = 200;

  // evaluation protocol
  int n_bins = 10;
  int test_bins = 4;
  int study_offset = 10;  // studied hitting times: event-day +/- offset

  // synthetic generator
  int synth_breaking = 30;
  int synth_anticipated = 30;
  int synth_span_days = 92;
  std::string synth_start = "2006-03-01";

  uint64_t seed = 42;

  std::string out(const std::string& rel) const {
    return (std::filesystem::path(output_dir) / rel).string();
  }
  std::string synth_dir() const { return out("synth"); }
  std::string log_path() const { return log.empty() ? out("synth/log.tsv") : log; }
  std::string aliases_path() const {
    return aliases.empty() ? out("synth/aliases.json") : aliases;
  }
  std::string corpus_path() const { return corpus.empty() ? out("synth/corpus.jsonl") : corpus; }
  std::string edits_path() const { return edits.empty() ? out("synth/edits.csv") : edits; }
  std::string embeddings_path() const {
    return embeddings.empty() ? out("synth/embeddings.txt") : embeddings;
  }
  std::string labels_path() const { return labels.empty() ? out("synth/labels.csv") : labels; }
  std::string entities_path() const {
    return entities.empty() ? out("synth/entities.csv") : entities;
  }

  void validate() const {
    auto fail = [](const std::string& msg) { throw UserError("config: " + msg); };
    if (output_dir.empty()) fail("output_dir must not be empty");
    if (min_qf < 1) fail("min_qf must be >= 1");
    if (max_qf <= min_qf) fail("max_qf must exceed min_qf");
    if (min_click < 1) fail("min_click must be >= 1");
    if (!(ascii_threshold >= 0.0 && ascii_threshold <= 1.0))
      fail("ascii_threshold must be in [0,1]");
    if (!(restart > 0.0 && restart < 1.0)) fail("restart must be in (0,1)");
    if (candidate_pool < 1) fail("candidate_pool must be >= 1");
    if (top_k_aspects < 1) fail("top_k_aspects must be >= 1");
    if (!(ap_damping >= 0.5 && ap_damping < 1.0)) fail("ap_damping must be in [0.5,1)");
    if (ap_max_iter < 1) fail("ap_max_iter must be >= 1");
    if (lambda_lex < 0 || lambda_sem < 0 || lambda_lex + lambda_sem <= 0)
      fail("similarity weights must be nonnegative and not both zero");
    if (period < 2) fail("period must be >= 2");
    if (!(mu > 0)) fail("mu must be > 0");
    if (top_k_lm < 1) fail("top_k_lm must be >= 1");
    if (i_s < 1 || i_l <= i_s) fail("momentum intervals need 1 <= i_s < i_l");
    if (cc_window < 3) fail("cc_window must be >= 3");
    if (entropy_window < 1) fail("entropy_window must be >= 1");
    if (C < 0) fail("C must be >= 0");
    if (epochs < 1) fail("epochs must be >= 1");
    if (W < 1) fail("W must be >= 1");
    if (N < 1) fail("N must be >= 1");
    if (n_bins < 2) fail("n_bins must be >= 2");
    if (test_bins < 1 || test_bins > n_bins) fail("test_bins must be in [1, n_bins]");
    if (study_offset < 1) fail("study_offset must be >= 1");
    if (synth_breaking < 0 || synth_anticipated < 0 ||
        synth_breaking + synth_anticipated == 0)
      fail("synthetic entity counts must be nonnegative and not both zero");
    if (synth_span_days < 30) fail("synth_span_days must be >= 30");
    try {
      parse_day(synth_start);
    } catch (const std::exception& e) {
      fail(std::string("synth_start: ") + e.what());
    }
  }

  nlohmann::json to_json() const {
    return {{"output_dir", output_dir},
            {"log", log},
            {"aliases", aliases},
            {"corpus", corpus},
            {"edits", edits},
            {"embeddings", embeddings},
            {"labels", labels},
            {"entities", entities},
            {"min_qf", min_qf},
            {"max_qf", max_qf},
            {"min_click", min_click},
            {"english_only", english_only},
            {"ascii_threshold", ascii_threshold},
            {"restart", restart},
            {"candidate_pool", candidate_pool},
            {"top_k_aspects", top_k_aspects},
            {"ap_damping", ap_damping},
            {"ap_max_iter", ap_max_iter},
            {"lambda_lex", lambda_lex},
            {"lambda_sem", lambda_sem},
            {"period", period},
            {"mu", mu},
            {"top_k_lm", top_k_lm},
            {"i_s", i_s},
            {"i_l", i_l},
            {"cc_window", cc_window},
            {"entropy_window", entropy_window},
            {"C", C},
            {"epochs", epochs},
            {"W", W},
            {"N", N},
            {"n_bins", n_bins},
            {"test_bins", test_bins},
            {"study_offset", study_offset},
            {"synth_breaking", synth_breaking},
            {"synth_anticipated", synth_anticipated},
            {"synth_span_days", synth_span_days},
            {"synth_start", synth_start},
            {"seed", seed}};
  }

  // Applies keys from j over the current values; unknown keys are an error.
  void apply(const nlohmann::json& j) {
    if (!j.is_object()) throw UserError("config: expected a JSON object");
    for (auto it = j.begin(); it != j.end(); ++it) {
      const std::string& k = it.key();
      const auto& v = it.value();
      try {
        if (k == "output_dir") output_dir = v.get<std::string>();
        else if (k == "log") log = v.get<std::string>();
        else if (k == "aliases") aliases = v.get<std::string>();
        else if (k == "corpus") corpus = v.get<std::string>();
        else if (k == "edits") edits = v.get<std::string>();
        else if (k == "embeddings") embeddings = v.get<std::string>();
        else if (k == "labels") labels = v.get<std::string>();
        else if (k == "entities") entities = v.get<std::string>();
        else if (k == "min_qf") min_qf = v.get<long>();
        else if (k == "max_qf") max_qf = v.get<long>();
        else if (k == "min_click") min_click = v.get<long>();
        else if (k == "english_only") english_only = v.get<bool>();
        else if (k == "ascii_threshold") ascii_threshold = v.get<double>();
        else if (k == "restart") restart = v.get<double>();
        else if (k == "candidate_pool") candidate_pool = v.get<int>();
        else if (k == "top_k_aspects") top_k_aspects = v.get<int>();
        else if (k == "ap_damping") ap_damping = v.get<double>();
        else if (k == "ap_max_iter") ap_max_iter = v.get<int>();
        else if (k == "lambda_lex") lambda_lex = v.get<double>();
        else if (k == "lambda_sem") lambda_sem = v.get<double>();
        else if (k == "period") period = v.get<int>();
        else if (k == "mu") mu = v.get<double>();
        else if (k == "top_k_lm") top_k_lm = v.get<int>();
        else if (k == "i_s") i_s = v.get<int>();
        else if (k == "i_l") i_l = v.get<int>();
        else if (k == "cc_window") cc_window = v.get<int>();
        else if (k == "entropy_window") entropy_window = v.get<int>();
        else if (k == "C") C = v.get<double>();
        else if (k == "epochs") epochs = v.get<int>();
        else if (k == "W") W = v.get<int>();
        else if (k == "N") N = v.get<long>();
        else if (k == "n_bins") n_bins = v.get<int>();
        else if (k == "test_bins") test_bins = v.get<int>();
        else if (k == "study_offset") study_offset = v.get<int>();
        else if (k == "synth_breaking") synth_breaking = v.get<int>();
        else if (k == "synth_anticipated") synth_anticipated = v.get<int>();
        else if (k == "synth_span_days") synth_span_days = v.get<int>();
        else if (k == "synth_start") synth_start = v.get<std::string>();
        else if (k == "seed") seed = v.get<uint64_t>();
        else throw UserError("config: unknown key '" + k + "'");
      } catch (const nlohmann::json::exception& e) {
        throw UserError("config: bad value for '" + k + "': " + e.what());
      }
    }
  }

  static Config from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw UserError("cannot open config file: " + path);
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::exception& e) {
      throw UserError("config parse error in " + path + ": " + e.what());
    }
    Config c;
    c.apply(j);
    return c;
  }
};

// ---------------------------------------------------------------------------
// Artifact manifests: every step records content hashes of its inputs and
// outputs so downstream steps can detect missing or stale artifacts and
// re-runs can be verified byte-for-byte.

inline std::string hash_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UserError("cannot open file for hashing: " + path);
  uint64_t h = 1469598103934665603ull;
  char buf[1 << 16];
  while (in.read(buf, sizeof buf) || in.gcount() > 0)
    h = fnv1a64(std::string_view(buf, size_t(in.gcount())), h);
  char out[32];
  std::snprintf(out, sizeof out, "fnv1a64:%016llx", (unsigned long long)h);
  return out;
}

struct Manifest {
  std::string step;
  uint64_t seed = 0;
  std::string params_hash;
  std::map<std::string, std::string> inputs;   // path -> content hash
  std::map<std::string, std::string> outputs;  // path -> content hash

  nlohmann::json to_json() const {
    return {{"format", "aspectra-manifest"}, {"version", 1},       {"step", step},
            {"seed", seed},                  {"params", params_hash}, {"inputs", inputs},
            {"outputs", outputs}};
  }
  static Manifest from_json(const nlohmann::json& j) {
    if (j.value("format", "") != "aspectra-manifest")
      throw UserError("not a manifest file");
    Manifest m;
    m.step = j.at("step").get<std::string>();
    m.seed = j.at("seed").get<uint64_t>();
    m.params_hash = j.at("params").get<std::string>();
    m.inputs = j.at("inputs").get<std::map<std::string, std::string>>();
    m.outputs = j.at("outputs").get<std::map<std::string, std::string>>();
    return m;
  }
};

// ---------------------------------------------------------------------------
// Artifact registry: which step produces which file, for "run X first"
// messages and chain validation.

inline const std::vector<std::pair<std::string, std::string>>& artifact_producers() {
  // (relative artifact path under output_dir or synth dir) -> producing step
  static const std::vector<std::pair<std::string, std::string>> v = {
      {"synth/log.tsv", "synth"},        {"synth/aliases.json", "synth"},
      {"synth/corpus.jsonl", "synth"},   {"synth/edits.csv", "synth"},
      {"synth/labels.csv", "synth"},     {"synth/entities.csv", "synth"},
      {"synth/embeddings.txt", "synth"}, {"logstore.bin", "ingest"},
      {"ingest_report.txt", "ingest"},   {"graph.tsv", "graph"},
      {"aspects.jsonl", "aspects"},      {"signals.csv", "signals"},
      {"eventclf.json", "classify"},     {"mixture.json", "classify"},
      {"dists.csv", "classify"},         {"classify_report.csv", "classify"},
      {"features.csv", "features"},      {"ranker.json", "train"},
      {"runs/ensemble.tsv", "rank"},     {"metrics.csv", "evaluate"},
      {"comparison.csv", "evaluate"},    {"slices.csv", "evaluate"},
      {"report.txt", "report"},
  };
  return v;
}

// ---------------------------------------------------------------------------
// Loaders for the intermediate artifact files.

struct AspectEntry {
  std::string entity;
  std::string aspect;
  double rwr_score = 0.0;
  int cluster_id = -1;
};

inline std::map<std::string, std::vector<AspectEntry>> load_aspects_jsonl(
    const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UserError("cannot open aspects file: " + path);
  std::map<std::string, std::vector<AspectEntry>> out;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw UserError("aspects line " + std::to_string(line_no) + ": " + e.what());
    }
    AspectEntry a;
    a.entity = j.at("entity").get<std::string>();
    a.aspect = j.at("aspect").get<std::string>();
    a.rwr_score = j.at("rwr_score").get<double>();
    a.cluster_id = j.at("cluster_id").get<int>();
    out[a.entity].push_back(std::move(a));
  }
  return out;
}

inline constexpr int kNumSignalFeatures = 13;

inline const std::vector<std::string>& signal_feature_names() {
  static const std::vector<std::string> v = {
      "seasonality_q", "seasonality_we", "autocorr_lag1", "rank_gamma",  "surprise",
      "spikem_n_pop",  "spikem_beta",    "spikem_n_b",    "spikem_s_b",  "spikem_eps",
      "spikem_p_a",    "spikem_p_p",     "spikem_p_s"};
  return v;
}

struct SignalRow {
  std::string entity;
  Day day = 0;
  std::vector<double> x;  // kNumSignalFeatures values
};

inline std::vector<SignalRow> load_signals_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UserError("cannot open signals file: " + path);
  std::vector<SignalRow> rows;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view sv = strip_cr(line);
    if (sv.empty()) continue;
    auto cols = csv_split(sv);
    if (line_no == 1 && !cols.empty() && cols[0] == "entity") continue;
    if (cols.size() != size_t(2 + kNumSignalFeatures))
      throw UserError("signals line " + std::to_string(line_no) + ": expected " +
                      std::to_string(2 + kNumSignalFeatures) + " columns");
    SignalRow r;
    r.entity = cols[0];
    r.day = parse_day(cols[1]);
    for (int f = 0; f < kNumSignalFeatures; ++f) r.x.push_back(std::stod(cols[size_t(2 + f)]));
    rows.push_back(std::move(r));
  }
  if (rows.empty()) throw UserError("signals file empty: " + path);
  return rows;
}

inline std::string entity_day_key(const std::string& entity, Day d) {
  return entity + "\x1f" + format_day(d);
}

inline std::map<std::string, TimeTypeDistribution> load_dists_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UserError("cannot open distribution file: " + path);
  std::map<std::string, TimeTypeDistribution> out;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view sv = strip_cr(line);
    if (sv.empty()) continue;
    auto cols = csv_split(sv);
    if (line_no == 1 && !cols.empty() && cols[0] == "entity") continue;
    if (cols.size() < size_t(2 + kNumTimeTypeCells))
      throw UserError("dists line " + std::to_string(line_no) + ": too few columns");
    TimeTypeDistribution d;
    for (int c = 0; c < kNumTimeTypeCells; ++c) d.p[size_t(c)] = std::stod(cols[size_t(2 + c)]);
    out[entity_day_key(cols[0], parse_day(cols[1]))] = d;
  }
  if (out.empty()) throw UserError("distribution file empty: " + path);
  return out;
}

struct FeatureRow {
  std::string entity;
  std::string aspect;
  Day day = 0;
  std::vector<double> values;    // kNumAspectFeatures
  std::vector<double> presence;  // kNumAspectFeatures
  int grade = -1;                // planted label for the day's phase, -1 if unknown
};

inline std::vector<FeatureRow> load_features_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UserError("cannot open feature file: " + path);
  std::vector<FeatureRow> rows;
  std::string line;
  size_t line_no = 0;
  const size_t want = 3 + 2 * kNumAspectFeatures + 1;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view sv = strip_cr(line);
    if (sv.empty()) continue;
    auto cols = csv_split(sv);
    if (line_no == 1 && !cols.empty() && cols[0] == "entity") continue;
    if (cols.size() != want)
      throw UserError("features line " + std::to_string(line_no) + ": expected " +
                      std::to_string(want) + " columns");
    FeatureRow r;
    r.entity = cols[0];
    r.aspect = cols[1];
    r.day = parse_day(cols[2]);
    for (size_t f = 0; f < kNumAspectFeatures; ++f)
      r.values.push_back(std::stod(cols[3 + f]));
    for (size_t f = 0; f < kNumAspectFeatures; ++f)
      r.presence.push_back(std::stod(cols[3 + kNumAspectFeatures + f]));
    r.grade = std::stoi(cols[3 + 2 * kNumAspectFeatures]);
    rows.push_back(std::move(r));
  }
  if (rows.empty()) throw UserError("feature file empty: " + path);
  return rows;
}

// ---------------------------------------------------------------------------
// Rolling classification over chronologically binned entities: per trial,
// a cascade and a flat (non-cascaded) multinomial logistic are trained on
// entities from strictly earlier bins and tested on the trial's bin.

inline RollingReport rolling_classification_by_entity(
    const std::vector<SignalRow>& rows, const std::vector<EventType>& types,
    const std::vector<EventTime>& times, const std::vector<EntityInfo>& entities, int n_bins = 10,
    int test_bins = 4, uint64_t seed = 42) {
  if (rows.size() != types.size() || rows.size() != times.size())
    throw std::invalid_argument("rolling classification: size mismatch");
  std::vector<EntityDay> eds;
  for (const auto& e : entities) eds.push_back({e.id, e.event_day});
  auto trials = rolling_cv(eds, n_bins, test_bins);

  RollingReport rep;
  for (const auto& trial : trials) {
    std::set<std::string> train_set(trial.train.begin(), trial.train.end());
    std::set<std::string> test_set(trial.test.begin(), trial.test.end());
    std::vector<std::vector<double>> xtr;
    std::vector<EventType> ytr_type;
    std::vector<EventTime> ytr_time;
    std::vector<int> ytr_time_int;
    std::vector<size_t> test_rows;
    for (size_t i = 0; i < rows.size(); ++i) {
      if (train_set.count(rows[i].entity)) {
        xtr.push_back(rows[i].x);
        ytr_type.push_back(types[i]);
        ytr_time.push_back(times[i]);
        ytr_time_int.push_back(int(times[i]));
      } else if (test_set.count(rows[i].entity)) {
        test_rows.push_back(i);
      }
    }
    if (xtr.empty() || test_rows.empty())
      throw std::invalid_argument("rolling classification: empty trial split");
    CascadeModel model = train_cascade(xtr, ytr_type, ytr_time, seed);
    SoftmaxModel flat = train_softmax(xtr, ytr_time_int, 3);
    std::vector<int> tt, tp, mt, mp, fp;
    for (size_t i : test_rows) {
      tt.push_back(int(types[i]));
      tp.push_back(int(model.predict_type(rows[i].x)));
      mt.push_back(int(times[i]));
      mp.push_back(int(model.predict_time(rows[i].x)));
      fp.push_back(flat.predict(rows[i].x));
    }
    RollingBinResult r;
    r.test_bin = trial.test_bin;
    r.n_train = xtr.size();
    r.n_test = test_rows.size();
    r.type_metrics = classification_metrics(tt, tp, 2);
    r.time_metrics = classification_metrics(mt, mp, 3);
    r.flat_time_metrics = classification_metrics(mt, fp, 3);
    rep.bins.push_back(r);
  }
  for (const auto& b : rep.bins) {
    rep.type_avg.accuracy += b.type_metrics.accuracy / double(rep.bins.size());
    rep.type_avg.weighted_f1 += b.type_metrics.weighted_f1 / double(rep.bins.size());
    rep.time_avg.accuracy += b.time_metrics.accuracy / double(rep.bins.size());
    rep.time_avg.weighted_f1 += b.time_metrics.weighted_f1 / double(rep.bins.size());
    rep.flat_time_avg.accuracy += b.flat_time_metrics.accuracy / double(rep.bins.size());
    rep.flat_time_avg.weighted_f1 += b.flat_time_metrics.weighted_f1 / double(rep.bins.size());
  }
  return rep;
}

// ---------------------------------------------------------------------------
// The pipeline: one method per subcommand. Progress goes to the log stream
// (stderr in the CLI); machine outputs only to files under output_dir.

class Pipeline {
 public:
  explicit Pipeline(Config cfg, std::ostream& log = std::cerr)
      : cfg_(std::move(cfg)), log_(log) {
    cfg_.validate();
  }

  const Config& config() const { return cfg_; }

  static const std::vector<std::string>& step_names() {
    static const std::vector<std::string> v = {"ingest",   "synth", "graph",    "aspects",
                                               "signals",  "classify", "features", "train",
                                               "rank",     "evaluate", "report"};
    return v;
  }

  void run(const std::string& step) {
    if (step == "ingest") run_ingest();
    else if (step == "synth") run_synth();
    else if (step == "graph") run_graph();
    else if (step == "aspects") run_aspects();
    else if (step == "signals") run_signals();
    else if (step == "classify") run_classify();
    else if (step == "features") run_features();
    else if (step == "train") run_train();
    else if (step == "rank") run_rank();
    else if (step == "evaluate") run_evaluate();
    else if (step == "report") run_report();
    else throw UserError("unknown subcommand: '" + step + "'");
  }

  // --- steps ---------------------------------------------------------------

  void run_synth() {
    SynthSpec spec;
    spec.n_breaking = cfg_.synth_breaking;
    spec.n_anticipated = cfg_.synth_anticipated;
    spec.span_days = cfg_.synth_span_days;
    spec.span_start = cfg_.synth_start;
    spec.seed = cfg_.seed;
    log_ << "[synth] generating " << spec.n_breaking + spec.n_anticipated
         << " entities over " << spec.span_days << " days\n";
    SynthResult res = generate_synthetic(spec, cfg_.synth_dir());
    std::map<std::string, std::string> outputs;
    for (const std::string& p :
         {res.paths.log_tsv, res.paths.aliases_json, res.paths.corpus_jsonl,
          res.paths.edits_csv, res.paths.labels_csv, res.paths.entities_csv,
          res.paths.embeddings_txt})
      outputs[p] = hash_file(p);
    write_manifest("synth", {}, outputs);
    log_ << "[synth] wrote " << outputs.size() << " files under " << cfg_.synth_dir() << "\n";
  }

  void run_ingest() {
    std::string logp = cfg_.log_path();
    require_input(logp);
    IngestOptions opts;
    opts.min_qf = cfg_.min_qf;
    opts.max_qf = cfg_.max_qf;
    opts.min_click = cfg_.min_click;
    opts.english_only = cfg_.english_only;
    opts.ascii_threshold = cfg_.ascii_threshold;
    RejectReport report;
    log_ << "[ingest] reading " << logp << "\n";
    LogIndex index = ingest(logp, opts, &report);
    if (index.empty()) throw UserError("ingest produced an empty index: " + logp);
    ensure_dir(cfg_.output_dir);
    std::string store = cfg_.out("logstore.bin");
    index.save(store);
    std::string rep_path = cfg_.out("ingest_report.txt");
    {
      std::ofstream out(rep_path);
      out << report.to_text();
    }
    write_manifest("ingest", {{logp, hash_file(logp)}},
                   {{store, hash_file(store)}, {rep_path, hash_file(rep_path)}});
    log_ << "[ingest] " << index.num_queries() << " queries kept, "
         << report.records_parsed << " records parsed\n";
  }

  void run_graph() {
    std::string store = cfg_.out("logstore.bin");
    require_input(store);
    LogIndex index = LogIndex::load(store);
    ClickGraph g = build_graph(index);
    std::string gpath = cfg_.out("graph.tsv");
    {
      std::ofstream out(gpath);
      if (!out) throw UserError("cannot write graph: " + gpath);
      g.export_edges_tsv(out);
    }
    write_manifest("graph", {{store, hash_file(store)}}, {{gpath, hash_file(gpath)}});
    log_ << "[graph] " << g.num_queries() << " query nodes, " << g.edges().size()
         << " edges (" << g.clamped_edges() << " clamped)\n";
  }

  void run_aspects() {
    std::string store = cfg_.out("logstore.bin");
    std::string gpath = cfg_.out("graph.tsv");
    std::string ents = cfg_.entities_path();
    std::string embp = cfg_.embeddings_path();
    require_input(store);
    require_input(gpath);
    require_input(ents);
    LogIndex index = LogIndex::load(store);
    ClickGraph g = build_graph(index);
    auto entities = load_entities_csv(ents);

    std::optional<EmbeddingTable> emb;
    if (std::filesystem::exists(embp)) {
      emb = EmbeddingTable::load(embp);
    } else {
      log_ << "[aspects] no embedding file at " << embp << "; semantic similarity neutral\n";
    }

    AspectParams params;
    params.lambda_lex = cfg_.lambda_lex;
    params.lambda_sem = cfg_.lambda_sem;
    params.damping = cfg_.ap_damping;
    params.max_iter = cfg_.ap_max_iter;

    std::string apath = cfg_.out("aspects.jsonl");
    std::ofstream out(apath);
    if (!out) throw UserError("cannot write aspects: " + apath);
    size_t total = 0;
    for (const auto& e : entities) {
      std::string source = normalize_query(e.alias);
      std::vector<std::pair<std::string, double>> pool;
      if (g.query_node(source)) {
        pool = candidates(g, source, cfg_.candidate_pool, cfg_.restart);
      } else {
        log_ << "[aspects] entity " << e.id << ": alias query not in click graph, skipped\n";
      }
      std::vector<AspectCandidate> cands;
      for (const auto& [q, s] : pool)
        cands.push_back({q, s, -1, false, index.total_freq(q)});
      auto reps = extract_aspects(std::move(cands), emb ? &*emb : nullptr,
                                  cfg_.top_k_aspects, params);
      for (const auto& r : reps) {
        out << nlohmann::json{{"entity", e.id},
                              {"aspect", r.text},
                              {"rwr_score", r.rwr_score},
                              {"cluster_id", r.cluster_id}}
                   .dump()
            << "\n";
        ++total;
      }
    }
    out.close();
    write_manifest("aspects",
                   {{store, hash_file(store)},
                    {gpath, hash_file(gpath)},
                    {ents, hash_file(ents)}},
                   {{apath, hash_file(apath)}});
    log_ << "[aspects] kept " << total << " aspects for " << entities.size() << " entities\n";
  }

  void run_signals() {
    std::string store = cfg_.out("logstore.bin");
    std::string ents = cfg_.entities_path();
    std::string apath = cfg_.out("aspects.jsonl");
    std::string edits = cfg_.edits_path();
    std::string alias_path = cfg_.aliases_path();
    for (const auto& p : {store, ents, apath, edits, alias_path}) require_input(p);

    LogIndex index = LogIndex::load(store);
    auto aliases = EntityAliasTable::from_json_file(alias_path);
    auto entities = load_entities_csv(ents);
    auto aspects = load_aspects_jsonl(apath);

    std::string spath = cfg_.out("signals.csv");
    std::ofstream out(spath);
    if (!out) throw UserError("cannot write signals: " + spath);
    out << "entity,day";
    for (const auto& n : signal_feature_names()) out << "," << n;
    out << "\n";

    size_t n_rows = 0;
    for (const auto& e : entities) {
      TimeSeries edit_series;
      bool have_edits = true;
      try {
        edit_series = load_edit_series(edits, e.id);
      } catch (const std::exception& ex) {
        have_edits = false;
        log_ << "[signals] " << e.id << ": no edit series (" << ex.what() << ")\n";
      }
      std::vector<std::string> cand_texts;
      auto ait = aspects.find(e.id);
      if (ait != aspects.end())
        for (const auto& a : ait->second) cand_texts.push_back(a.aspect);

      for (Day t : studied_days(e)) {
        std::vector<double> x = signal_vector(index, aliases, e, t, edit_series, have_edits,
                                              cand_texts);
        out << csv_escape(e.id) << "," << format_day(t);
        for (double v : x) out << "," << fmt_double(v);
        out << "\n";
        ++n_rows;
      }
    }
    out.close();
    std::map<std::string, std::string> inputs;
    for (const auto& p : {store, ents, apath, edits, alias_path}) inputs[p] = hash_file(p);
    write_manifest("signals", inputs, {{spath, hash_file(spath)}});
    log_ << "[signals] wrote " << n_rows << " rows\n";
  }

  void run_classify() {
    std::string spath = cfg_.out("signals.csv");
    std::string ents = cfg_.entities_path();
    std::string labels_path = cfg_.labels_path();
    for (const auto& p : {spath, ents, labels_path}) require_input(p);

    auto rows = load_signals_csv(spath);
    auto entities = load_entities_csv(ents);
    auto labels = GradedLabelSet::load(labels_path);
    std::map<std::string, const EntityInfo*> by_id;
    for (const auto& e : entities) by_id[e.id] = &e;

    std::vector<EventType> types;
    std::vector<EventTime> times;
    std::vector<std::vector<double>> x;
    for (const auto& r : rows) {
      auto it = by_id.find(r.entity);
      if (it == by_id.end())
        throw UserError("signals row for unknown entity '" + r.entity + "'");
      types.push_back(it->second->type);
      times.push_back(phase_of(r.day, it->second->event_day));
      x.push_back(r.x);
    }

    // rolling report over chronologically binned entities
    auto rolling = rolling_classification_by_entity(rows, types, times, entities, cfg_.n_bins,
                                                    cfg_.test_bins, cfg_.seed);
    std::string rpath = cfg_.out("classify_report.csv");
    {
      std::ofstream out(rpath);
      out << "test_bin,n_train,n_test,type_accuracy,type_weighted_f1,time_accuracy,"
             "time_weighted_f1,flat_time_accuracy,flat_time_weighted_f1\n";
      for (const auto& b : rolling.bins)
        out << b.test_bin << "," << b.n_train << "," << b.n_test << ","
            << fmt_double(b.type_metrics.accuracy) << ","
            << fmt_double(b.type_metrics.weighted_f1) << ","
            << fmt_double(b.time_metrics.accuracy) << ","
            << fmt_double(b.time_metrics.weighted_f1) << ","
            << fmt_double(b.flat_time_metrics.accuracy) << ","
            << fmt_double(b.flat_time_metrics.weighted_f1) << "\n";
      out << "average,,," << fmt_double(rolling.type_avg.accuracy) << ","
          << fmt_double(rolling.type_avg.weighted_f1) << ","
          << fmt_double(rolling.time_avg.accuracy) << ","
          << fmt_double(rolling.time_avg.weighted_f1) << ","
          << fmt_double(rolling.flat_time_avg.accuracy) << ","
          << fmt_double(rolling.flat_time_avg.weighted_f1) << "\n";
    }

    // month-split models for the downstream ranking chain
    std::vector<EntityDay> eds;
    for (const auto& e : entities) eds.push_back({e.id, e.event_day});
    MonthSplit split = split_train_test_by_month(eds);
    std::set<std::string> train_set(split.train.begin(), split.train.end());
    std::vector<std::vector<double>> xtr;
    std::vector<EventType> ttr;
    std::vector<EventTime> mtr;
    std::vector<int> cells_tr;
    std::vector<size_t> train_idx;
    for (size_t i = 0; i < rows.size(); ++i) {
      if (!train_set.count(rows[i].entity)) continue;
      xtr.push_back(x[i]);
      ttr.push_back(types[i]);
      mtr.push_back(times[i]);
      cells_tr.push_back(cell_index(types[i], times[i]));
      train_idx.push_back(i);
    }
    if (xtr.empty()) throw UserError("classify: empty training split");
    log_ << "[classify] training on " << xtr.size() << " rows (" << split.train.size()
         << " entities), test month holds " << split.test.size() << " entities\n";
    CascadeModel cascade = train_cascade(xtr, ttr, mtr, cfg_.seed);

    std::vector<double> importance = mixture_importance(rows, labels, by_id, train_idx);
    MixtureModel mixture = fit_mixture(xtr, cells_tr, importance, cfg_.seed);

    std::string cpath = cfg_.out("eventclf.json");
    {
      std::ofstream out(cpath);
      out << cascade_to_json(cascade).dump(1) << "\n";
    }
    std::string mpath = cfg_.out("mixture.json");
    {
      std::ofstream out(mpath);
      out << mixture_to_json(mixture).dump(1) << "\n";
    }

    std::string dpath = cfg_.out("dists.csv");
    {
      std::ofstream out(dpath);
      out << "entity,day";
      for (int c = 0; c < kNumTimeTypeCells; ++c)
        out << ",p_" << to_string(cell_type(c)) << "_" << to_string(cell_time(c));
      out << ",pred_type,pred_time\n";
      for (size_t i = 0; i < rows.size(); ++i) {
        TimeTypeDistribution d = soft_assign(mixture, x[i]);
        out << csv_escape(rows[i].entity) << "," << format_day(rows[i].day);
        for (int c = 0; c < kNumTimeTypeCells; ++c) out << "," << fmt_double(d.p[size_t(c)]);
        out << "," << to_string(cascade.predict_type(x[i])) << ","
            << to_string(cascade.predict_time(x[i])) << "\n";
      }
    }

    std::map<std::string, std::string> inputs;
    for (const auto& p : {spath, ents, labels_path}) inputs[p] = hash_file(p);
    std::map<std::string, std::string> outputs;
    for (const auto& p : {rpath, cpath, mpath, dpath}) outputs[p] = hash_file(p);
    write_manifest("classify", inputs, outputs);
    log_ << "[classify] rolling type accuracy " << rolling.type_avg.accuracy
         << ", cascaded time F1 " << rolling.time_avg.weighted_f1 << " vs flat "
         << rolling.flat_time_avg.weighted_f1 << "\n";
  }

  void run_features() {
    std::string store = cfg_.out("logstore.bin");
    std::string apath = cfg_.out("aspects.jsonl");
    std::string ents = cfg_.entities_path();
    std::string alias_path = cfg_.aliases_path();
    std::string corpus_path = cfg_.corpus_path();
    std::string labels_path = cfg_.labels_path();
    for (const auto& p : {store, apath, ents, alias_path, corpus_path, labels_path})
      require_input(p);

    LogIndex index = LogIndex::load(store);
    auto aliases = EntityAliasTable::from_json_file(alias_path);
    auto entities = load_entities_csv(ents);
    auto aspects = load_aspects_jsonl(apath);
    CorpusStore corpus = CorpusStore::load(corpus_path);
    auto labels = GradedLabelSet::load(labels_path);

    FeatureParams fp;
    fp.mu = cfg_.mu;
    fp.top_k_urls = cfg_.top_k_lm;
    fp.i_s = cfg_.i_s;
    fp.i_l = cfg_.i_l;
    fp.cc_window = cfg_.cc_window;
    fp.entropy_window = cfg_.entropy_window;

    std::string fpath = cfg_.out("features.csv");
    std::ofstream out(fpath);
    if (!out) throw UserError("cannot write features: " + fpath);
    out << "entity,aspect,day";
    for (const auto& n : aspect_feature_names()) out << "," << n;
    for (const auto& n : aspect_feature_names()) out << ",has_" << n;
    out << ",grade\n";

    size_t n_rows = 0;
    for (const auto& e : entities) {
      auto ait = aspects.find(e.id);
      if (ait == aspects.end() || ait->second.empty()) {
        log_ << "[features] entity " << e.id << ": no aspects, skipped\n";
        continue;
      }
      std::vector<std::string> cand_texts;
      for (const auto& a : ait->second) cand_texts.push_back(a.aspect);
      auto qids = entity_query_ids(index, aliases, e.id);
      for (Day t : studied_days(e)) {
        EntityDayContext ctx;
        ctx.entity_id = e.id;
        ctx.entity_qids = qids;
        ctx.entity_series = series_for(index, aliases, e.id, index.first_day(), t).values;
        ctx.day = t;
        EventTime phase = phase_of(t, e.event_day);
        for (const auto& a : ait->second) {
          auto fv = compute_aspect_features(a.aspect, a.rwr_score, cand_texts, ctx, index,
                                            corpus, fp);
          auto grade = labels.find(e.id, a.aspect, phase);
          out << csv_escape(e.id) << "," << csv_escape(a.aspect) << "," << format_day(t);
          for (double v : fv.values) out << "," << fmt_double(v);
          for (double v : fv.presence) out << "," << fmt_double(v);
          out << "," << (grade ? *grade : -1) << "\n";
          ++n_rows;
        }
      }
    }
    out.close();
    std::map<std::string, std::string> inputs;
    for (const auto& p : {store, apath, ents, alias_path, corpus_path, labels_path})
      inputs[p] = hash_file(p);
    write_manifest("features", inputs, {{fpath, hash_file(fpath)}});
    log_ << "[features] wrote " << n_rows << " rows\n";
  }

  void run_train() {
    std::string fpath = cfg_.out("features.csv");
    std::string dpath = cfg_.out("dists.csv");
    std::string ents = cfg_.entities_path();
    for (const auto& p : {fpath, dpath, ents}) require_input(p);

    auto frows = load_features_csv(fpath);
    auto dists_by_key = load_dists_csv(dpath);
    auto entities = load_entities_csv(ents);

    std::vector<EntityDay> eds;
    for (const auto& e : entities) eds.push_back({e.id, e.event_day});
    MonthSplit split = split_train_test_by_month(eds);
    std::set<std::string> train_set(split.train.begin(), split.train.end());

    // training rows: feature vectors of train-month entities only
    std::vector<std::vector<double>> rows;
    std::vector<TimeTypeDistribution> dists;
    std::map<std::string, size_t> dist_index;  // (entity, day) -> dists slot
    std::map<std::string, size_t> row_index;   // (entity, day, aspect) -> row
    for (const auto& r : frows) {
      if (!train_set.count(r.entity)) continue;
      std::string gkey = entity_day_key(r.entity, r.day);
      auto dit = dists_by_key.find(gkey);
      if (dit == dists_by_key.end())
        throw UserError("no distribution for " + r.entity + " at " + format_day(r.day) +
                        "; re-run classify");
      if (!dist_index.count(gkey)) {
        dist_index[gkey] = dists.size();
        dists.push_back(dit->second);
      }
      row_index[gkey + "\x1f" + r.aspect] = rows.size();
      rows.push_back(r.values);
    }
    if (rows.empty()) throw UserError("train: no training rows in the train months");

    // graded preferences within each (entity, day); grade-0 rows are dropped
    std::vector<PairwisePreference> prefs;
    {
      std::map<std::string, std::vector<std::pair<size_t, int>>> graded_groups;
      for (const auto& r : frows) {
        if (!train_set.count(r.entity)) continue;
        std::string gkey = entity_day_key(r.entity, r.day);
        std::string rkey = gkey + "\x1f" + r.aspect;
        graded_groups[gkey].push_back({row_index.at(rkey), r.grade});
      }
      for (const auto& [gkey, members] : graded_groups) {
        for (const auto& [ri, gi] : members) {
          if (gi < 1) continue;
          for (const auto& [rj, gj] : members) {
            if (gj < 1) continue;
            if (gi > gj) prefs.push_back({ri, rj, dist_index.at(gkey)});
          }
        }
      }
    }
    if (prefs.empty())
      throw UserError("train: no usable graded preference pairs (check the label file)");
    log_ << "[train] " << rows.size() << " rows, " << prefs.size() << " preference pairs\n";

    ModelSet ensemble = train_ensemble(rows, prefs, dists, cfg_.C, cfg_.epochs, cfg_.seed);
    SingleRanker svm_sal = train_single(rows, prefs, salience_feature_indices(), cfg_.C,
                                        cfg_.epochs, cfg_.seed);
    SingleRanker svm_time = train_single(rows, prefs, timeliness_feature_indices(), cfg_.C,
                                         cfg_.epochs, cfg_.seed);
    std::vector<size_t> all_mask(kNumAspectFeatures);
    for (size_t i = 0; i < all_mask.size(); ++i) all_mask[i] = i;
    SingleRanker svm_all = train_single(rows, prefs, all_mask, cfg_.C, cfg_.epochs, cfg_.seed);

    nlohmann::json bundle = {{"format", "aspectra-ranker-bundle"},
                             {"version", 1},
                             {"seed", cfg_.seed},
                             {"C", cfg_.C},
                             {"train_entities", split.train},
                             {"test_entities", split.test},
                             {"ensemble", ranker_to_json(ensemble)},
                             {"svm_salience", single_to_json(svm_sal)},
                             {"svm_timeliness", single_to_json(svm_time)},
                             {"svm_all", single_to_json(svm_all)}};
    std::string rpath = cfg_.out("ranker.json");
    {
      std::ofstream out(rpath);
      out << bundle.dump(1) << "\n";
    }
    std::map<std::string, std::string> inputs;
    for (const auto& p : {fpath, dpath, ents}) inputs[p] = hash_file(p);
    write_manifest("train", inputs, {{rpath, hash_file(rpath)}});
    log_ << "[train] ensemble objective " << ensemble.objective << "\n";
  }

  void run_rank() {
    std::string store = cfg_.out("logstore.bin");
    std::string apath = cfg_.out("aspects.jsonl");
    std::string fpath = cfg_.out("features.csv");
    std::string dpath = cfg_.out("dists.csv");
    std::string rpath = cfg_.out("ranker.json");
    std::string ents = cfg_.entities_path();
    std::string alias_path = cfg_.aliases_path();
    for (const auto& p : {store, apath, fpath, dpath, rpath, ents, alias_path})
      require_input(p);

    LogIndex index = LogIndex::load(store);
    auto aliases = EntityAliasTable::from_json_file(alias_path);
    auto entities = load_entities_csv(ents);
    auto aspects = load_aspects_jsonl(apath);
    auto frows = load_features_csv(fpath);
    auto dists_by_key = load_dists_csv(dpath);

    nlohmann::json bundle;
    {
      std::ifstream in(rpath);
      in >> bundle;
    }
    if (bundle.value("format", "") != "aspectra-ranker-bundle")
      throw UserError("not a ranker bundle: " + rpath);
    ModelSet ensemble = ranker_from_json(bundle.at("ensemble"));
    SingleRanker svm_sal = single_from_json(bundle.at("svm_salience"));
    SingleRanker svm_time = single_from_json(bundle.at("svm_timeliness"));
    SingleRanker svm_all = single_from_json(bundle.at("svm_all"));

    std::map<std::string, std::vector<double>> feat;  // (entity, day, aspect) -> values
    for (const auto& r : frows)
      feat[entity_day_key(r.entity, r.day) + "\x1f" + r.aspect] = r.values;

    ensure_dir(cfg_.out("runs"));
    std::map<std::string, std::ofstream> files;
    for (const auto& m : method_names()) {
      files[m].open(cfg_.out("runs/" + m + ".tsv"));
      if (!files[m]) throw UserError("cannot write run file for " + m);
    }

    for (const auto& e : entities) {
      auto ait = aspects.find(e.id);
      if (ait == aspects.end() || ait->second.empty()) continue;
      std::vector<std::pair<std::string, double>> scored;
      std::vector<std::string> texts;
      for (const auto& a : ait->second) {
        scored.push_back({a.aspect, a.rwr_score});
        texts.push_back(a.aspect);
      }
      const auto& alias_set = aliases.aliases(e.id);
      for (Day t : studied_days(e)) {
        std::string gkey = entity_day_key(e.id, t);
        auto dit = dists_by_key.find(gkey);
        if (dit == dists_by_key.end())
          throw UserError("no distribution for " + gkey + "; re-run classify");
        std::vector<std::pair<std::string, std::vector<double>>> cand_feats;
        for (const auto& a : texts) {
          auto fit = feat.find(gkey + "\x1f" + a);
          if (fit == feat.end())
            throw UserError("missing feature row for " + e.id + "/" + a + " at " +
                            format_day(t) + "; re-run features");
          cand_feats.push_back({a, fit->second});
        }

        auto emit = [&](const std::string& method, const RankedList& list) {
          append_run_lines(files[method], e.id, t, list, method);
        };
        emit("rwr", baseline_rwr(scored));
        emit("rwr_mle", baseline_mle(texts, index, t));
        emit("mle_w", baseline_mle_w(texts, index, t, cfg_.W));
        emit("lnq", baseline_lnq(texts, index, t, alias_set, cfg_.N));
        emit("pnq", baseline_pnq(texts, index, t, cfg_.period, cfg_.W));
        auto score_single = [&](const SingleRanker& m) {
          RankedList list;
          for (const auto& [name, xv] : cand_feats) list.push_back({name, m.score(xv)});
          sort_ranked(list);
          return list;
        };
        emit("svm_salience", score_single(svm_sal));
        emit("svm_timeliness", score_single(svm_time));
        emit("svm_all", score_single(svm_all));
        emit("ensemble", rank_candidates(ensemble, cand_feats, dit->second));
      }
    }
    for (auto& [m, f] : files) f.close();

    std::map<std::string, std::string> inputs;
    for (const auto& p : {store, apath, fpath, dpath, rpath, ents, alias_path})
      inputs[p] = hash_file(p);
    std::map<std::string, std::string> outputs;
    for (const auto& m : method_names()) {
      std::string p = cfg_.out("runs/" + m + ".tsv");
      outputs[p] = hash_file(p);
    }
    write_manifest("rank", inputs, outputs);
    log_ << "[rank] wrote " << outputs.size() << " run files under " << cfg_.out("runs")
         << "\n";
  }

  void run_evaluate() {
    std::string ents = cfg_.entities_path();
    std::string labels_path = cfg_.labels_path();
    require_input(ents);
    require_input(labels_path);
    for (const auto& m : method_names()) require_input(cfg_.out("runs/" + m + ".tsv"));

    auto entities = load_entities_csv(ents);
    auto labels = GradedLabelSet::load(labels_path);
    std::map<std::string, const EntityInfo*> by_id;
    for (const auto& e : entities) by_id[e.id] = &e;

    std::vector<EntityDay> eds;
    for (const auto& e : entities) eds.push_back({e.id, e.event_day});
    MonthSplit split = split_train_test_by_month(eds);
    std::set<std::string> test_set(split.test.begin(), split.test.end());

    // method -> (entity, day) -> ranked list
    std::map<std::string, std::map<std::string, RankedList>> runs;
    for (const auto& m : method_names()) runs[m] = load_run_file(cfg_.out("runs/" + m + ".tsv"));

    // per-slice metrics
    struct SliceMetric {
      std::string method, entity;
      Day day;
      EventTime phase;
      EventType type;
      bool test = false;
      double ndcg3, ndcg10, recall3, recall10;
    };
    std::vector<SliceMetric> metrics;
    for (const auto& m : method_names()) {
      for (const auto& [gkey, list] : runs.at(m)) {
        auto sep = gkey.find('\x1f');
        std::string entity = gkey.substr(0, sep);
        Day day = parse_day(gkey.substr(sep + 1));
        auto it = by_id.find(entity);
        if (it == by_id.end()) throw UserError("run file has unknown entity '" + entity + "'");
        EventTime phase = phase_of(day, it->second->event_day);
        auto grades = labels.grades_for(entity, phase);
        SliceMetric sm;
        sm.method = m;
        sm.entity = entity;
        sm.day = day;
        sm.phase = phase;
        sm.type = it->second->type;
        sm.test = test_set.count(entity) > 0;
        sm.ndcg3 = ndcg_at_k(list, grades, 3);
        sm.ndcg10 = ndcg_at_k(list, grades, 10);
        sm.recall3 = recall_at_k(list, grades, 3);
        sm.recall10 = recall_at_k(list, grades, 10);
        metrics.push_back(std::move(sm));
      }
    }

    std::string mpath = cfg_.out("metrics.csv");
    {
      std::ofstream out(mpath);
      out << "method,entity,day,phase,type,split,ndcg3,ndcg10,recall3,recall10\n";
      for (const auto& sm : metrics)
        out << csv_escape(sm.method) << "," << csv_escape(sm.entity) << ","
            << format_day(sm.day) << "," << to_string(sm.phase) << "," << to_string(sm.type)
            << "," << (sm.test ? "test" : "train") << "," << fmt_double(sm.ndcg3) << ","
            << fmt_double(sm.ndcg10) << "," << fmt_double(sm.recall3) << ","
            << fmt_double(sm.recall10) << "\n";
    }

    // aligned test-split samples -> comparison table vs the walk baseline
    auto comparison = comparison_from_metrics(metrics);
    std::string cpath = cfg_.out("comparison.csv");
    {
      std::ofstream out(cpath);
      out << comparison.to_csv();
    }

    // phase/type slice means of NDCG@3 over all studied days
    std::string slpath = cfg_.out("slices.csv");
    {
      std::ofstream out(slpath);
      out << "slice,method,ndcg3,n\n";
      for (EventType ty : {EventType::breaking, EventType::anticipated}) {
        for (EventTime ph : {EventTime::before, EventTime::during, EventTime::after}) {
          for (const auto& m : method_names()) {
            double sum = 0;
            long n = 0;
            for (const auto& sm : metrics) {
              if (sm.method != m || sm.type != ty || sm.phase != ph) continue;
              sum += sm.ndcg3;
              ++n;
            }
            out << to_string(ty) << "_" << to_string(ph) << "," << m << ","
                << fmt_double(n ? sum / double(n) : 0.0) << "," << n << "\n";
          }
        }
      }
    }

    std::map<std::string, std::string> inputs;
    inputs[ents] = hash_file(ents);
    inputs[labels_path] = hash_file(labels_path);
    for (const auto& m : method_names()) {
      std::string p = cfg_.out("runs/" + m + ".tsv");
      inputs[p] = hash_file(p);
    }
    std::map<std::string, std::string> outputs = {{mpath, hash_file(mpath)},
                                                  {cpath, hash_file(cpath)},
                                                  {slpath, hash_file(slpath)}};
    write_manifest("evaluate", inputs, outputs);
    for (const auto& row : comparison.rows)
      if (row.method == "ensemble" || row.method == "rwr")
        log_ << "[evaluate] " << row.method << " NDCG@3 " << row.cells[0].value << "\n";
  }

  void run_report() {
    std::string mpath = cfg_.out("metrics.csv");
    std::string slpath = cfg_.out("slices.csv");
    require_input(mpath);
    require_input(slpath);

    auto metrics = load_metrics_csv(mpath);
    auto comparison = comparison_from_metrics(metrics);

    std::ostringstream rep;
    rep << "Entity aspect ranking report\n";
    rep << "============================\n\n";
    rep << "seed " << cfg_.seed << "; test split = chronologically last event month\n\n";
    rep << comparison.to_text() << "\n";

    rep << "NDCG@3 by event type and phase (all studied days)\n\n";
    {
      std::ifstream in(slpath);
      std::string line;
      std::getline(in, line);  // header
      std::map<std::string, std::map<std::string, std::pair<double, long>>> table;
      std::set<std::string> slice_names;
      while (std::getline(in, line)) {
        auto cols = csv_split(strip_cr(line));
        if (cols.size() != 4) continue;
        table[cols[1]][cols[0]] = {std::stod(cols[2]), std::stol(cols[3])};
        slice_names.insert(cols[0]);
      }
      rep << std::left << std::setw(16) << "method";
      for (const auto& s : slice_names) rep << std::right << std::setw(20) << s;
      rep << "\n";
      for (const auto& m : method_names()) {
        rep << std::left << std::setw(16) << m;
        for (const auto& s : slice_names) {
          std::ostringstream cell;
          cell << std::fixed << std::setprecision(4) << table[m][s].first;
          rep << std::right << std::setw(20) << cell.str();
        }
        rep << "\n";
      }
      rep << "\n";
    }

    std::string clpath = cfg_.out("classify_report.csv");
    if (std::filesystem::exists(clpath)) {
      rep << "Classification (rolling " << cfg_.n_bins << "-bin, last " << cfg_.test_bins
          << " bins averaged)\n\n";
      std::ifstream in(clpath);
      std::string line;
      while (std::getline(in, line)) rep << "  " << line << "\n";
    }

    std::string rpath = cfg_.out("report.txt");
    {
      std::ofstream out(rpath);
      out << rep.str();
    }
    std::cout << rep.str();
    write_manifest("report",
                   {{mpath, hash_file(mpath)}, {slpath, hash_file(slpath)}},
                   {{rpath, hash_file(rpath)}});
    log_ << "[report] wrote " << rpath << "\n";
  }

  // Studied hitting times for an entity: before / at / after the event day.
  std::vector<Day> studied_days(const EntityInfo& e) const {
    return {e.event_day - cfg_.study_offset, e.event_day, e.event_day + cfg_.study_offset};
  }

  static const std::vector<std::string>& method_names() {
    static const std::vector<std::string> v = {"rwr",     "rwr_mle",      "mle_w",
                                               "lnq",     "pnq",          "svm_salience",
                                               "svm_timeliness", "svm_all", "ensemble"};
    return v;
  }

 private:
  struct MetricRow {
    std::string method, entity;
    Day day;
    std::string phase, type, split;
    double ndcg3, ndcg10, recall3, recall10;
  };

  template <typename Rows>
  ComparisonReport comparison_from_metrics(const Rows& metrics) const {
    // aligned (entity, day) sample vectors over the test split, keyed in
    // sorted order so every method pairs the same slices
    std::map<std::string, std::map<std::string, std::array<double, 4>>> by_method;
    for (const auto& sm : metrics) {
      if (!is_test(sm)) continue;
      by_method[method_of(sm)][entity_day_key(entity_of(sm), day_of(sm))] = {
          ndcg3_of(sm), ndcg10_of(sm), recall3_of(sm), recall10_of(sm)};
    }
    if (by_method.empty()) throw UserError("evaluate: no test-split slices to compare");
    std::vector<MethodScores> methods;
    const auto& ref_keys = by_method.begin()->second;
    for (const auto& name : method_names()) {
      auto it = by_method.find(name);
      if (it == by_method.end()) throw UserError("missing run data for method " + name);
      if (it->second.size() != ref_keys.size())
        throw UserError("method " + name + " covers a different slice set");
      MethodScores ms;
      ms.name = name;
      for (const auto& [k, vals] : it->second) {
        ms.ndcg3.push_back(vals[0]);
        ms.ndcg10.push_back(vals[1]);
        ms.recall3.push_back(vals[2]);
        ms.recall10.push_back(vals[3]);
      }
      methods.push_back(std::move(ms));
    }
    return build_comparison(methods, "rwr");
  }

  // accessors letting comparison_from_metrics work over both the evaluate
  // step's in-memory rows and the report step's re-parsed rows
  template <typename T>
  static bool is_test(const T& r) {
    if constexpr (requires { r.test; }) return r.test;
    else return r.split == "test";
  }
  template <typename T>
  static std::string method_of(const T& r) { return r.method; }
  template <typename T>
  static std::string entity_of(const T& r) { return r.entity; }
  template <typename T>
  static Day day_of(const T& r) { return r.day; }
  template <typename T>
  static double ndcg3_of(const T& r) { return r.ndcg3; }
  template <typename T>
  static double ndcg10_of(const T& r) { return r.ndcg10; }
  template <typename T>
  static double recall3_of(const T& r) { return r.recall3; }
  template <typename T>
  static double recall10_of(const T& r) { return r.recall10; }

  std::vector<MetricRow> load_metrics_csv(const std::string& path) const {
    std::ifstream in(path);
    if (!in) throw UserError("cannot open metrics: " + path);
    std::vector<MetricRow> rows;
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      std::string_view sv = strip_cr(line);
      if (sv.empty()) continue;
      auto cols = csv_split(sv);
      if (line_no == 1 && !cols.empty() && cols[0] == "method") continue;
      if (cols.size() != 10)
        throw UserError("metrics line " + std::to_string(line_no) + ": expected 10 columns");
      MetricRow r;
      r.method = cols[0];
      r.entity = cols[1];
      r.day = parse_day(cols[2]);
      r.phase = cols[3];
      r.type = cols[4];
      r.split = cols[5];
      r.ndcg3 = std::stod(cols[6]);
      r.ndcg10 = std::stod(cols[7]);
      r.recall3 = std::stod(cols[8]);
      r.recall10 = std::stod(cols[9]);
      rows.push_back(std::move(r));
    }
    if (rows.empty()) throw UserError("metrics file empty: " + path);
    return rows;
  }

  std::map<std::string, RankedList> load_run_file(const std::string& path) const {
    std::ifstream in(path);
    if (!in) throw UserError("cannot open run file: " + path);
    std::map<std::string, std::vector<std::tuple<int, std::string, double>>> groups;
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      std::string_view sv = strip_cr(line);
      if (sv.empty()) continue;
      auto cols = split_on(sv, '\t');
      if (cols.size() != 6)
        throw UserError("run file " + path + " line " + std::to_string(line_no) +
                        ": expected 6 columns");
      groups[entity_day_key(std::string(cols[0]), parse_day(cols[1]))].push_back(
          {std::stoi(std::string(cols[3])), std::string(cols[2]),
           std::stod(std::string(cols[4]))});
    }
    std::map<std::string, RankedList> out;
    for (auto& [k, v] : groups) {
      std::sort(v.begin(), v.end());
      RankedList list;
      for (auto& [rank, aspect, score] : v) list.push_back({aspect, score});
      out[k] = std::move(list);
    }
    return out;
  }

  // Importance weights for the mixture scaling: |w| of a pairwise ranker
  // trained on a seeded sample of training-split signal rows, where a row
  // outranks another when its (entity, day) slice carries more graded
  // relevance mass. Falls back to uniform weights when the sample is flat.
  std::vector<double> mixture_importance(const std::vector<SignalRow>& rows,
                                         const GradedLabelSet& labels,
                                         const std::map<std::string, const EntityInfo*>& by_id,
                                         const std::vector<size_t>& train_idx) {
    std::vector<size_t> sample = train_idx;
    Rng rng(cfg_.seed ^ 0x5bd1e995u);
    rng.shuffle(sample);
    if (sample.size() > 40) sample.resize(40);
    std::sort(sample.begin(), sample.end());

    auto mass = [&](const SignalRow& r) {
      const EntityInfo* e = by_id.at(r.entity);
      EventTime phase = phase_of(r.day, e->event_day);
      double m = 0;
      for (const auto& [aspect, g] : labels.grades_for(r.entity, phase)) m += double(g);
      return m;
    };

    std::vector<std::vector<double>> x;
    std::vector<double> masses;
    for (size_t i : sample) {
      x.push_back(rows[i].x);
      masses.push_back(mass(rows[i]));
    }
    std::vector<PairwisePreference> prefs;
    for (size_t i = 0; i < x.size() && prefs.size() < 400; ++i)
      for (size_t j = 0; j < x.size() && prefs.size() < 400; ++j) {
        if (i == j) continue;
        if (masses[i] > masses[j]) prefs.push_back({i, j, 0});
      }

    std::vector<double> importance(kNumSignalFeatures, 1.0);
    if (prefs.empty()) {
      log_ << "[classify] flat relevance mass in the sample; uniform importance weights\n";
      return importance;
    }
    std::vector<size_t> mask(kNumSignalFeatures);
    for (size_t i = 0; i < mask.size(); ++i) mask[i] = i;
    SingleRanker rk = train_single(x, prefs, mask, cfg_.C, cfg_.epochs, cfg_.seed);
    std::fill(importance.begin(), importance.end(), 0.0);
    for (size_t k = 0; k < rk.standardizer.kept.size(); ++k)
      importance[rk.mask[rk.standardizer.kept[k]]] = std::abs(rk.w[k]);
    double total = 0;
    for (double v : importance) total += v;
    if (total <= 0) {
      log_ << "[classify] degenerate ranker weights; uniform importance weights\n";
      std::fill(importance.begin(), importance.end(), 1.0);
    }
    return importance;
  }

  // One signal vector for (entity, day): series features on the query-log
  // attention series, seasonality additionally on the edit series.
  std::vector<double> signal_vector(const LogIndex& index, const EntityAliasTable& aliases,
                                    const EntityInfo& e, Day t, const TimeSeries& edit_series,
                                    bool have_edits, const std::vector<std::string>& cands) {
    if (t < index.first_day() || t > index.last_day())
      throw UserError("studied day " + format_day(t) + " for " + e.id +
                      " lies outside the log span");
    std::vector<double> psi_q =
        series_for(index, aliases, e.id, index.first_day(), t).values;

    auto warn = [&](const char* what, const std::exception& ex) {
      log_ << "[signals] " << e.id << " " << format_day(t) << " " << what << ": " << ex.what()
           << " (using 0)\n";
    };

    double season_q = 0;
    try {
      season_q = seasonality(psi_q, cfg_.period);
    } catch (const std::exception& ex) {
      warn("seasonality_q", ex);
    }

    double season_we = 0;
    if (have_edits && t >= edit_series.origin) {
      size_t len = size_t(std::min<Day>(t - edit_series.origin + 1,
                                        Day(edit_series.values.size())));
      std::vector<double> prefix(edit_series.values.begin(),
                                 edit_series.values.begin() + long(len));
      try {
        season_we = seasonality(prefix, cfg_.period);
      } catch (const std::exception& ex) {
        warn("seasonality_we", ex);
      }
    }

    double ac = 0;
    try {
      ac = autocorr_lag1(psi_q);
    } catch (const std::exception& ex) {
      warn("autocorr_lag1", ex);
    }

    double gamma = 0;
    if (!cands.empty() && t - 1 >= index.first_day()) {
      auto rank_on = [&](Day d) {
        std::vector<std::pair<long, std::string>> scored;
        for (const auto& c : cands)
          scored.push_back({index.freq_on(normalize_query(c), d), c});
        std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
          if (a.first != b.first) return a.first > b.first;
          return a.second < b.second;
        });
        std::vector<std::string> out;
        for (auto& [s, c] : scored) out.push_back(c);
        return out;
      };
      gamma = rank_gamma(rank_on(t), rank_on(t - 1));
    }

    double sup = 0;
    try {
      sup = surprise(psi_q, cfg_.period);
    } catch (const std::exception& ex) {
      warn("surprise", ex);
    }

    SpikeMParams sp;
    try {
      SpikeMFit fit = spikem_fit(psi_q, cfg_.seed);
      sp = fit.params;
      if (!fit.converged)
        log_ << "[signals] " << e.id << " " << format_day(t) << " diffusion fit not converged"
             << " (sse " << fit.sse << ")\n";
    } catch (const std::exception& ex) {
      warn("spikem_fit", ex);
    }

    return {season_q, season_we, ac,      gamma,   sup,     sp.n_pop, sp.beta,
            double(sp.n_b),      sp.s_b,  sp.eps,  sp.p_a,  sp.p_p,   sp.p_s};
  }

  void ensure_dir(const std::string& dir) { std::filesystem::create_directories(dir); }

  std::string manifest_path(const std::string& step) const {
    return cfg_.out("manifests/" + step + ".json");
  }

  void write_manifest(const std::string& step, std::map<std::string, std::string> inputs,
                      std::map<std::string, std::string> outputs) {
    Manifest m;
    m.step = step;
    m.seed = cfg_.seed;
    char buf[32];
    std::snprintf(buf, sizeof buf, "fnv1a64:%016llx",
                  (unsigned long long)fnv1a64(cfg_.to_json().dump()));
    m.params_hash = buf;
    m.inputs = std::move(inputs);
    m.outputs = std::move(outputs);
    ensure_dir(cfg_.out("manifests"));
    std::ofstream out(manifest_path(step));
    if (!out) throw UserError("cannot write manifest for step " + step);
    out << m.to_json().dump(1) << "\n";
  }

  // Which step produces a path (by suffix match against the registry).
  std::optional<std::string> producer_of(const std::string& path) const {
    std::filesystem::path p(path);
    for (const auto& [rel, step] : artifact_producers()) {
      if (cfg_.out(rel) == path) return step;
      if (p.filename().string() == std::filesystem::path(rel).filename().string())
        return step;
    }
    return std::nullopt;
  }

  // A required input must exist; if a pipeline step produced it, the step's
  // manifest must still match its bytes (stale detection).
  void require_input(const std::string& path) {
    auto step = producer_of(path);
    if (!std::filesystem::exists(path)) {
      if (step)
        throw UserError("missing artifact " + path + ": run '" + *step + "' first");
      throw UserError("missing input file: " + path);
    }
    if (!step) return;  // external input, nothing to cross-check
    std::string man = manifest_path(*step);
    if (!std::filesystem::exists(man)) {
      // produced outside this pipeline run tree (e.g. user-provided file
      // living at the default location); accept the bytes as-is
      return;
    }
    std::ifstream in(man);
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::exception& e) {
      throw UserError("corrupt manifest " + man + ": " + e.what());
    }
    Manifest m = Manifest::from_json(j);
    auto it = m.outputs.find(path);
    if (it == m.outputs.end()) return;
    if (it->second != hash_file(path))
      throw UserError("stale artifact " + path + ": contents changed since '" + *step +
                      "' ran; run '" + *step + "' again");
  }

  Config cfg_;
  std::ostream& log_;
};

}  // namespace aspectra

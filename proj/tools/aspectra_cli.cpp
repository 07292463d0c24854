// Command-line entry point for the query-log aspect analytics pipeline.
//
// Usage: aspectra <subcommand> [--config FILE] [--set key=value ...]
//
// Exit codes: 0 success, 1 user error (bad flags, bad config, missing or
// stale inputs), 2 internal error. All progress output goes to stderr;
// machine-readable results are written only to files under output_dir.

#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "aspectra/pipeline.hpp"

namespace {

// --set values arrive as raw strings; reinterpret each against the config's
// JSON schema so numbers, booleans, and strings all land with the right type.
nlohmann::json coerce_override(const std::string& key, const std::string& raw) {
  nlohmann::json defaults = aspectra::Config{}.to_json();
  auto it = defaults.find(key);
  if (it == defaults.end())
    throw aspectra::UserError("config: unknown key '" + key + "'");
  if (it->is_string()) return raw;
  nlohmann::json parsed = nlohmann::json::parse(raw, nullptr, false);
  if (parsed.is_discarded())
    throw aspectra::UserError("config: cannot parse value for '" + key + "': " + raw);
  return parsed;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Query-log analytics: entity aspects, temporal signals, and ranking"};
  app.require_subcommand(1);

  std::string config_path;
  std::vector<std::string> overrides;
  app.add_option("--config", config_path, "JSON config file")
      ->check(CLI::ExistingFile);
  app.add_option("--set", overrides, "Override a config key, e.g. --set seed=7");

  struct SubDesc {
    const char* name;
    const char* help;
  };
  const std::vector<SubDesc> subs = {
      {"synth", "Generate a synthetic query log with planted ground truth"},
      {"ingest", "Parse and filter the query log into a binary index"},
      {"graph", "Build the query-URL co-click graph"},
      {"aspects", "Extract entity aspects via random walks and clustering"},
      {"signals", "Compute per-entity time-series signal features"},
      {"classify", "Train event type/time classifiers and soft assignments"},
      {"features", "Compute per-aspect ranking features"},
      {"train", "Train the pairwise ranking models"},
      {"rank", "Produce ranked aspect lists for every method"},
      {"evaluate", "Score all methods against the graded labels"},
      {"report", "Render a human-readable results summary"},
  };
  for (const auto& s : subs) app.add_subcommand(s.name, s.help);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    aspectra::Config cfg;
    if (!config_path.empty()) cfg = aspectra::Config::from_file(config_path);
    for (const std::string& ov : overrides) {
      auto eq = ov.find('=');
      if (eq == std::string::npos || eq == 0)
        throw aspectra::UserError("--set expects key=value, got: " + ov);
      std::string key = ov.substr(0, eq);
      cfg.apply({{key, coerce_override(key, ov.substr(eq + 1))}});
    }

    aspectra::Pipeline pipeline(cfg, std::cerr);
    for (const auto& s : subs)
      if (app.get_subcommand(s.name)->parsed()) pipeline.run(s.name);
    return 0;
  } catch (const aspectra::UserError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 2;
  }
}

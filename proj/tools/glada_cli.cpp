// glada: command-line front end.
//   synth              write a synthetic source/target pair
//   pretrain           source training only, with the source-only baseline
//   run                full adaptation scenario
//   eval               score a finished run's checkpoints on its target test split
//   export-embeddings  dump test-set features of a finished run
// Exit codes: 0 success, 1 usage error, 2 runtime failure.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "glada/checkpoint.hpp"
#include "glada/dataio.hpp"
#include "glada/pipeline.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace glada;

namespace {

constexpr int kUsage = 1;
constexpr int kFailure = 2;

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string mode;
  bool no_lca = false;
  std::string adv_mode;
  std::string out;
  std::string run_dir;
  bool export_embeddings = false;
  bool source_only = false;
};

// Config file (if any) plus command-line overrides.
pipeline::ScenarioConfig scenario_config(const Options& o) {
  pipeline::ScenarioConfig c;
  if (!o.config.empty()) {
    c = pipeline::load_config(o.config);
  } else if (!o.run_dir.empty()) {
    c = pipeline::load_config(fs::path(o.run_dir) / "config.json");
  }
  if (o.seed) c.seed = *o.seed;
  if (!o.mode.empty()) c.mode = pipeline::da_mode_from_string(o.mode);
  if (o.no_lca) c.hyperparams.lca_enabled = false;
  if (!o.adv_mode.empty()) c.hyperparams.adv_mode = adv_mode_from_string(o.adv_mode);
  if (!o.out.empty()) c.output_dir = fs::absolute(o.out);
  if (o.export_embeddings) c.export_embeddings = true;
  return c;
}

void print_score(const char* what, Real mf1) {
  std::cout << what << " MF1: " << std::fixed << std::setprecision(2) << mf1 * 100.0 << '\n';
}

int cmd_synth(const Options& o) {
  dataio::SynthSpec spec;
  if (!o.config.empty()) {
    std::ifstream in(o.config);
    if (!in) throw IoError("cannot read " + o.config);
    spec = json::parse(in).get<dataio::SynthSpec>();
  }
  if (o.seed) spec.seed = *o.seed;
  const auto [src, tgt] = dataio::make_synthetic_pair(spec);
  const fs::path out = o.out;
  dataio::save_dataset(src, out / "source");
  dataio::save_dataset(tgt, out / "target");
  std::ofstream(out / "synth.json") << json(spec).dump(2) << '\n';
  std::cout << "wrote " << src.size() << " source and " << tgt.size() << " target samples to "
            << out.string() << '\n';
  return 0;
}

int cmd_pretrain(const Options& o) {
  auto cfg = scenario_config(o);
  pipeline::Scenario s(cfg);
  s.pretrain();
  const auto& r = s.report();
  if (!cfg.output_dir.empty()) {
    const fs::path out = cfg.output_dir;
    fs::create_directories(out / "checkpoints");
    nets::save(s.source_encoder(), out / "checkpoints" / "source_encoder");
    nets::save(s.source_classifier(), out / "checkpoints" / "source_classifier");
    write_history(s.pretrain_history(), out / "pretrain_history.jsonl");
    std::ofstream(out / "config.json") << json(cfg).dump(2) << '\n';
    json j{{"source_test_macro_f1", r.source_test.macro_f1},
           {"source_only_macro_f1", r.source_only.macro_f1},
           {"source_only_per_class_f1", r.source_only.per_class_f1}};
    std::ofstream(out / "pretrain_report.json") << j.dump(2) << '\n';
  }
  print_score("source test", r.source_test.macro_f1);
  print_score("source-only target test", r.source_only.macro_f1);
  return 0;
}

int cmd_run(const Options& o) {
  if (o.config.empty()) throw ArgumentError("run needs --config");
  const auto cfg = scenario_config(o);
  const auto r = pipeline::run_scenario(cfg);
  print_score("source-only target test", r.source_only.macro_f1);
  print_score("target test", r.target_test.macro_f1);
  if (r.pseudo_label_mf1) print_score("pseudo-label", *r.pseudo_label_mf1);
  if (!cfg.output_dir.empty()) std::cout << "report: " << (cfg.output_dir / "report.json").string() << '\n';
  return 0;
}

int cmd_eval(const Options& o) {
  if (o.run_dir.empty()) throw ArgumentError("eval needs --run-dir");
  auto cfg = scenario_config(o);
  cfg.output_dir.clear();
  const pipeline::Scenario s(cfg);
  const fs::path ck = fs::path(o.run_dir) / "checkpoints";
  const auto enc = nets::load_encoder(ck / (o.source_only ? "source_encoder" : "target_encoder"));
  const auto clf =
      nets::load_classifier(ck / (o.source_only ? "source_classifier" : "shared_classifier"));
  const auto e = pipeline::evaluate(enc, clf, s.target_split().test);
  std::cout << json{{"macro_f1", e.macro_f1}, {"per_class_f1", e.per_class_f1}}.dump() << '\n';
  return 0;
}

int cmd_export(const Options& o) {
  if (o.run_dir.empty()) throw ArgumentError("export-embeddings needs --run-dir");
  if (o.out.empty()) throw ArgumentError("export-embeddings needs --out FILE");
  Options no_out = o;
  no_out.out.clear();
  auto cfg = scenario_config(no_out);
  const pipeline::Scenario s(cfg);
  const fs::path ck = fs::path(o.run_dir) / "checkpoints";
  pipeline::export_embeddings(nets::load_encoder(ck / "source_encoder"),
                              nets::load_encoder(ck / "target_encoder"), s.source_split().test,
                              s.target_split().test, o.out);
  std::cout << "wrote " << o.out << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Domain adaptation for time-series classification"};
  app.require_subcommand(1);
  Options o;

  const auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config, "JSON config file");
    sub->add_option("--seed", o.seed, "Random seed");
    sub->add_option("--out", o.out, "Output directory (file for export-embeddings)");
  };
  const auto add_scenario = [&](CLI::App* sub) {
    sub->add_option("--mode", o.mode, "uda or ssda")->check(CLI::IsMember({"uda", "ssda"}));
    sub->add_flag("--no-lca", o.no_lca, "Disable the center-loss terms");
    sub->add_option("--adv-mode", o.adv_mode, "shared-half or literal")
        ->check(CLI::IsMember({"shared-half", "literal"}));
  };

  auto* synth = app.add_subcommand("synth", "Write a synthetic source/target pair");
  add_common(synth);
  synth->get_option("--out")->required();
  auto* pretrain = app.add_subcommand("pretrain", "Train the source model only");
  add_common(pretrain);
  add_scenario(pretrain);
  pretrain->get_option("--config")->required();
  auto* run = app.add_subcommand("run", "Run a full adaptation scenario");
  add_common(run);
  add_scenario(run);
  run->get_option("--config")->required();
  run->add_flag("--export-embeddings", o.export_embeddings, "Also write embeddings.tsv");
  auto* eval = app.add_subcommand("eval", "Evaluate a finished run on its target test split");
  add_common(eval);
  eval->add_option("--run-dir", o.run_dir, "Output directory of a previous run")->required();
  eval->add_flag("--source-only", o.source_only, "Score the source model instead");
  auto* exp = app.add_subcommand("export-embeddings", "Export test-set features of a run");
  add_common(exp);
  exp->add_option("--run-dir", o.run_dir, "Output directory of a previous run")->required();
  exp->get_option("--out")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  try {
    if (*synth) return cmd_synth(o);
    if (*pretrain) return cmd_pretrain(o);
    if (*run) return cmd_run(o);
    if (*eval) return cmd_eval(o);
    if (*exp) return cmd_export(o);
  } catch (const ArgumentError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kFailure;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kFailure;
  }
  return kUsage;
}

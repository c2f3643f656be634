// georef: parse -> resolve -> mapgen -> georef -> eval over a run directory.

#include <iostream>

#include <CLI11.hpp>

#include "georef/pipeline.hpp"

using namespace georef;

namespace {

struct Args {
  std::string config;
  std::string out = "run";
  std::string input;
  std::string annotations;
  std::string audit;
  std::string dataset;
  std::string template_id;
  std::string provider;
  bool offline = false;
  bool refresh = false;
  int workers = 0;
  long min_length = -1;
  double buffer_factor = 0.0;
};

RunOptions options_from(const Args& a) {
  RunOptions o;
  o.offline = a.offline;
  o.refresh_cache = a.refresh;
  if (a.workers > 0) o.workers = a.workers;
  if (a.min_length >= 0) o.min_length = static_cast<std::size_t>(a.min_length);
  if (a.buffer_factor > 0.0) o.buffer_factor = a.buffer_factor;
  if (!a.template_id.empty()) o.template_id = a.template_id;
  if (!a.provider.empty()) o.provider = a.provider;
  return o;
}

int report(const std::string& stage, const StageStatus& s) {
  std::cerr << stage << ": " << s.completed.size() << " completed, " << s.failed.size() << " failed\n";
  for (const auto& [id, err] : s.failed) std::cerr << "  " << id << ": " << err << "\n";
  return s.exit_code();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Georeference specimen locality descriptions with gridded maps"};
  app.require_subcommand(1);
  Args a;

  const auto common = [&](CLI::App* sub) {
    sub->add_option("--config", a.config, "Pipeline config (JSON)")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", a.out, "Run directory");
    sub->add_option("--workers", a.workers, "Worker threads")->check(CLI::PositiveNumber);
    sub->add_flag("--offline", a.offline, "Local gazetteers only, blank basemap, no remote providers");
    sub->add_flag("--refresh-cache", a.refresh, "Ignore cached answers (they are still rewritten)");
  };

  auto* parse = app.add_subcommand("parse", "Extract place names, relations and containment");
  common(parse);
  parse->add_option("--input", a.input, "Records (.csv or .json)")->required()->check(CLI::ExistingFile);
  parse->add_option("--min-length", a.min_length, "Minimum description length in characters");
  parse->add_option("--annotations", a.annotations, "Directory of manual annotation sidecars")
      ->check(CLI::ExistingDirectory);

  auto* resolve = app.add_subcommand("resolve", "Look up and disambiguate place names");
  common(resolve);

  auto* mapgen = app.add_subcommand("mapgen", "Render gridded map excerpts and the dataset");
  common(mapgen);
  mapgen->add_option("--buffer-factor", a.buffer_factor, "Relatum buffer = distance x factor")
      ->check(CLI::PositiveNumber);

  auto* georef = app.add_subcommand("georef", "Ask the model for grid cells or coordinates");
  common(georef);
  georef->add_option("--template", a.template_id, "Prompt template id");
  georef->add_option("--provider", a.provider, "Provider name from the config");

  auto* eval = app.add_subcommand("eval", "Score predictions against the dataset");
  common(eval);
  eval->add_option("--audit", a.audit, "Re-score this audit log instead of predictions.json")
      ->check(CLI::ExistingFile);
  eval->add_option("--dataset", a.dataset, "Dataset file (defaults to the run's dataset.json)")
      ->check(CLI::ExistingFile);

  auto* run = app.add_subcommand("run", "All stages in order");
  common(run);
  run->add_option("--input", a.input, "Records (.csv or .json)")->required()->check(CLI::ExistingFile);
  run->add_option("--min-length", a.min_length, "Minimum description length in characters");
  run->add_option("--annotations", a.annotations, "Directory of manual annotation sidecars")
      ->check(CLI::ExistingDirectory);
  run->add_option("--buffer-factor", a.buffer_factor, "Relatum buffer = distance x factor")
      ->check(CLI::PositiveNumber);
  run->add_option("--template", a.template_id, "Prompt template id");
  run->add_option("--provider", a.provider, "Provider name from the config");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    PipelineConfig config = load_config(a.config);
    if (!a.annotations.empty()) config.annotations_dir = std::filesystem::absolute(a.annotations);
    const RunOptions options = options_from(a);
    const RunLayout layout{a.out};

    if (parse->parsed()) return report("parse", cmd_parse(a.input, layout, config, options));
    if (resolve->parsed()) return report("resolve", cmd_resolve(layout, config, options));
    if (mapgen->parsed()) return report("mapgen", cmd_mapgen(layout, config, options));
    if (georef->parsed()) return report("georef", cmd_georef(layout, config, options));
    if (eval->parsed()) {
      std::optional<std::filesystem::path> audit, dataset;
      if (!a.audit.empty()) audit = a.audit;
      if (!a.dataset.empty()) dataset = a.dataset;
      const int code = report("eval", cmd_eval(layout, config, audit, dataset));
      std::cout << read_file(layout.report_csv());
      return code;
    }
    if (run->parsed()) {
      const int code = report("run", cmd_run(a.input, layout, config, options));
      std::error_code ec;
      if (std::filesystem::exists(layout.report_csv(), ec)) std::cout << read_file(layout.report_csv());
      return code;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}

// palmscope — leaf-damage scoring, caterpillar counting, and detection
// evaluation from annotated field images.

#include "palmscope/pipeline.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace {

struct CommonArgs {
  std::string manifest_path;
  std::string config_path;
  std::string out_override;
  long long seed_override = -1;
  int jobs_override = 0;
};

void add_common(CLI::App* sub, CommonArgs& args, bool manifest_required) {
  auto* manifest =
      sub->add_option("--manifest", args.manifest_path, "Manifest JSON file");
  if (manifest_required) manifest->required();
  sub->add_option("--config", args.config_path,
                  "Config JSON file (falls back to $PALMSCOPE_CONFIG)")
      ->envname("PALMSCOPE_CONFIG");
  sub->add_option("--out", args.out_override,
                  "Output directory (overrides config output_dir)");
  sub->add_option("--seed", args.seed_override,
                  "Random seed (overrides config seed, must be >= 0)");
  sub->add_option("--jobs", args.jobs_override,
                  "Parallel workers (overrides config jobs, must be >= 1)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "palmscope: annotation ingestion, leaf-damage progression scoring,\n"
      "caterpillar counting, and detection-metric evaluation"};
  app.require_subcommand(1);

  CommonArgs args;
  std::string method = "classical";
  std::string pairs_path;
  std::vector<std::string> count_reports;

  auto* ingest = app.add_subcommand(
      "ingest", "Normalize annotation files into masks and box-line bundles");
  add_common(ingest, args, true);

  auto* severity = app.add_subcommand(
      "severity", "Score green/brown progression per annotated leaflet");
  add_common(severity, args, true);

  auto* count =
      app.add_subcommand("count", "Count caterpillars per manifest image");
  add_common(count, args, true);
  count->add_option("--method", method, "classical | detections")
      ->check(CLI::IsMember({"classical", "detections"}));

  auto* eval = app.add_subcommand(
      "eval", "Evaluate detection files against ground-truth boxes");
  add_common(eval, args, true);

  auto* compare = app.add_subcommand(
      "compare", "Count-agreement table across methods or prepared pairs");
  add_common(compare, args, false);
  compare->add_option("--pairs", pairs_path,
                      "CSV of image_id,predicted,truth rows");
  compare->add_option("--counts", count_reports,
                      "count_report JSON file(s) to score against manifest "
                      "truth counts");

  auto* augment = app.add_subcommand(
      "augment", "Write a seeded augmentation sweep per manifest image");
  add_common(augment, args, true);

  CLI11_PARSE(app, argc, argv);

  try {
    palmscope::Config cfg;
    if (!args.config_path.empty()) cfg = palmscope::load_config(args.config_path);
    if (!args.out_override.empty()) cfg.output_dir = args.out_override;
    if (args.seed_override >= 0)
      cfg.seed = static_cast<std::uint64_t>(args.seed_override);
    if (args.jobs_override > 0) cfg.jobs = args.jobs_override;
    cfg.validate();

    std::optional<palmscope::Manifest> manifest;
    if (!args.manifest_path.empty())
      manifest = palmscope::load_manifest(args.manifest_path);

    if (app.got_subcommand(ingest)) return palmscope::run_ingest(cfg, *manifest);
    if (app.got_subcommand(severity)) return palmscope::run_severity(cfg, *manifest);
    if (app.got_subcommand(count)) return palmscope::run_count(cfg, *manifest, method);
    if (app.got_subcommand(eval)) return palmscope::run_eval(cfg, *manifest);
    if (app.got_subcommand(augment)) return palmscope::run_augment(cfg, *manifest);
    if (app.got_subcommand(compare)) {
      std::optional<std::filesystem::path> pairs;
      if (!pairs_path.empty()) pairs = pairs_path;
      std::vector<std::filesystem::path> reports(count_reports.begin(),
                                                 count_reports.end());
      return palmscope::run_compare(cfg, manifest, pairs, reports);
    }
  } catch (const palmscope::Error& e) {
    std::cerr << "palmscope: error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "palmscope: error: internal: " << e.what() << "\n";
    return 2;
  }
  return 2;
}

// Command line driver for the spoken question answering pipeline.
//
// Usage:
//   sqa <subcommand> [--config <path>] [--out <dir>] [--seed <n>]
//       [--skip-mlm] [--boundaries true|asr]
//
// Subcommands: gen-data, pretrain-text, train-joint-embed,
// pretrain-speechbert, finetune-qa, train-cascade, eval, ensemble-eval,
// wer-curve.

#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "sqa/config.hpp"
#include "sqa/error.hpp"
#include "sqa/pipeline.hpp"

namespace {

const char* const kSubcommands[] = {
    "gen-data",       "pretrain-text", "train-joint-embed",
    "pretrain-speechbert", "finetune-qa",   "train-cascade",
    "eval",           "ensemble-eval", "wer-curve",
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Desk-scale end-to-end spoken question answering pipeline"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir = "run";
  std::string boundaries;
  std::uint64_t seed_override = 0;
  bool seed_given = false;
  bool skip_mlm = false;

  for (const char* name : kSubcommands) {
    CLI::App* sub = app.add_subcommand(name);
    sub->add_option("--config", config_path, "path to a key = value config file");
    sub->add_option("--out", out_dir, "run directory (default: ./run)");
    sub->add_option("--seed", seed_override, "master seed override")
        ->each([&](const std::string&) { seed_given = true; });
    sub->add_flag("--skip-mlm", skip_mlm,
                  "fine-tune / evaluate without the mixed MLM stage");
    sub->add_option("--boundaries", boundaries,
                    "segmentation for evaluation: asr or true")
        ->check(CLI::IsMember({"asr", "true"}));
  }

  CLI11_PARSE(app, argc, argv);

  try {
    sqa::RunConfig cfg =
        config_path.empty() ? sqa::RunConfig{} : sqa::load_config(config_path);
    if (seed_given) cfg.seed = seed_override;
    if (skip_mlm) cfg.skip_mlm = true;
    if (!boundaries.empty()) cfg.boundary_source = boundaries;
    sqa::validate_config(cfg);

    const std::string subcommand = app.get_subcommands().front()->get_name();
    return sqa::run_pipeline(subcommand, cfg, out_dir);
  } catch (const sqa::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 2;
  }
}

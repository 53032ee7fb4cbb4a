#include <iostream>
#include <map>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "nlsvd/config.hpp"
#include "nlsvd/runner.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Coordinatewise GSVD toolkit: train, decompose, validate, attack"};
  app.set_version_flag("--version", std::string(nlsvd::kVersion));
  app.require_subcommand(1);

  const std::map<std::string, std::string> help{
      {"train-svdnet", "train the SVD network and write svdnet.ckpt"},
      {"build-gsvd", "estimate gains and write gsvd.json"},
      {"validate", "reconstruction, left-inverse and gain checks on held-out data"},
      {"attack", "lifted-space directional attack on held-out points"},
      {"bias-sweep", "retrain on undersampled data and report head geometry"},
      {"traverse", "null-space samples and interpolations as PGM images"},
      {"pipeline", "all of the above in order"},
  };
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  for (const auto& name : nlsvd::subcommands()) {
    CLI::App* sub = app.add_subcommand(name, help.at(name));
    sub->add_option("--config", config_path, "JSON run configuration")->check(CLI::ExistingFile);
    sub->add_option("--seed", seed, "override the configured seed");
    sub->add_option("--out", out, "override the output directory");
  }
  CLI11_PARSE(app, argc, argv);

  const std::string subcommand = app.get_subcommands().front()->get_name();
  nlsvd::RunConfig cfg;
  try {
    if (!config_path.empty()) cfg = nlsvd::load_config(config_path);
    if (seed) cfg.seed = cfg.train.seed = *seed;
    if (out) cfg.output_dir = *out;
  } catch (const std::exception& e) {
    std::cout << nlsvd::error_json(e) << '\n';
    return 1;
  }
  return nlsvd::run_guarded(subcommand, cfg, std::clog, std::cout);
}

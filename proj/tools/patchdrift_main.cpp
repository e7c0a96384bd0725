#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "patchdrift/scenario.hpp"
#include "patchdrift/version.hpp"

namespace {

struct CommonArgs {
  std::string config_path;
  std::string out_dir = ".";
  std::optional<std::uint64_t> seed;
  int threads = 0;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("config", args.config_path, "scenario config (JSON)")->required();
  cmd->add_option("--out-dir", args.out_dir, "directory for emitted files");
  cmd->add_option("--seed", args.seed, "override the config seed");
  cmd->add_option("--threads", args.threads,
                  "worker threads (default: PATCHDRIFT_THREADS or hardware)");
}

patchdrift::RunOptions to_options(const CommonArgs& args) {
  patchdrift::RunOptions opt;
  opt.out_dir = args.out_dir;
  opt.seed = args.seed;
  opt.threads = args.threads;
  return opt;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"patchdrift: stochastic growth rates of dispersing populations"};
  app.set_version_flag("--version", patchdrift::kVersion);
  app.require_subcommand(1);

  CommonArgs run_args, compare_args;
  std::string validate_path;

  CLI::App* run_cmd = app.add_subcommand("run", "execute a scenario and emit CSV/JSON");
  add_common(run_cmd, run_args);

  CLI::App* compare_cmd =
      app.add_subcommand("compare", "cross-check every applicable method on one scenario");
  add_common(compare_cmd, compare_args);

  CLI::App* validate_cmd =
      app.add_subcommand("validate", "parse a config and print its normalized form");
  validate_cmd->add_option("config", validate_path, "scenario config (JSON)")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (run_cmd->parsed()) {
      auto outcome =
          patchdrift::run_scenario(patchdrift::load_config_file(run_args.config_path),
                                   to_options(run_args));
      for (const auto& f : outcome.files) std::cout << f << "\n";
      return outcome.all_pass ? 0 : 3;
    }
    if (compare_cmd->parsed()) {
      patchdrift::json config = patchdrift::load_config_file(compare_args.config_path);
      config["task"] = "compare";
      auto outcome = patchdrift::run_scenario(config, to_options(compare_args));
      std::cout << outcome.verdicts.dump(2) << "\n";
      return outcome.all_pass ? 0 : 3;
    }
    if (validate_cmd->parsed()) {
      patchdrift::ScenarioConfig cfg =
          patchdrift::parse_scenario(patchdrift::load_config_file(validate_path));
      std::cout << cfg.normalized().dump(2) << "\n";
      return 0;
    }
  } catch (const patchdrift::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}

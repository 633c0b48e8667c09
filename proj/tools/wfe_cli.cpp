// wfe: config-driven experiment runner and state inspector.
//
//   wfe run <config.json> [--set key=value]... [--output dir]
//   wfe validate <config.json> [--set key=value]...
//   wfe state build <recipe.json> [-o state.json] [--seed n]
//   wfe state inspect <state.json>
//
// Exit codes: 0 ok, 2 bad config or usage, 3 numerical failure, 4 I/O error.

#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "wfe/runner.hpp"

namespace {

std::string slurp(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::ios_base::failure("cannot read " + path);
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

void report(const wfe::ConfigError& e) {
  for (const auto& i : e.issues()) std::cerr << "error: " << (i.path.empty() ? "<root>" : i.path) << ": " << i.message << "\n";
}

wfe::ExperimentConfig load(const std::string& path, const std::vector<std::string>& overrides) {
  auto j = wfe::parse_json_text(slurp(path));
  for (const auto& o : overrides) wfe::apply_override(j, o);
  return wfe::parse_config(j);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"wave-function-energy experiments"};
  app.require_subcommand(1);

  std::string config_path;
  std::vector<std::string> overrides;
  std::string output_dir;

  auto* run = app.add_subcommand("run", "run an experiment and write its outputs");
  run->add_option("config", config_path, "experiment config (JSON)")->required();
  run->add_option("--set", overrides, "override a config value, e.g. toy.w=0.2");
  run->add_option("--output", output_dir, "output directory (overrides the config)");

  auto* validate = app.add_subcommand("validate", "check a config and print it with defaults filled");
  validate->add_option("config", config_path, "experiment config (JSON)")->required();
  validate->add_option("--set", overrides, "override a config value");

  auto* state = app.add_subcommand("state", "build or inspect state files");
  state->require_subcommand(1);
  std::string recipe_path, state_out, state_path;
  std::uint64_t seed = 1;
  auto* build = state->add_subcommand("build", "build a state from a recipe (the 'state' config block)");
  build->add_option("recipe", recipe_path, "state recipe (JSON)")->required();
  build->add_option("-o,--output", state_out, "write here instead of stdout");
  build->add_option("--seed", seed, "seed for randomized recipes");
  auto* inspect = state->add_subcommand("inspect", "print observables of a state file");
  inspect->add_option("state", state_path, "state file (JSON)")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : wfe::kExitConfig;
  }

  try {
    if (*run) {
      if (!output_dir.empty()) overrides.push_back("output=\"" + output_dir + "\"");
      const auto cfg = load(config_path, overrides);
      const auto res = wfe::run_experiment(cfg);
      if (res.exit_code != wfe::kExitOk) {
        std::cerr << "error: " << res.manifest.value("error", std::string("run failed")) << "\n";
      } else {
        std::cout << cfg.output << "\n";
      }
      return res.exit_code;
    }
    if (*validate) {
      const auto cfg = load(config_path, overrides);
      std::cout << cfg.resolved.dump(2) << "\n";
      return wfe::kExitOk;
    }
    if (*build) {
      auto j = wfe::parse_json_text(slurp(recipe_path));
      const auto cfg = wfe::parse_config({{"experiment", "state"}, {"seed", seed}, {"state", j}});
      const auto s = wfe::build_state(cfg.state.recipe, seed);
      if (state_out.empty()) {
        std::cout << wfe::to_json(s).dump() << "\n";
      } else {
        wfe::write_state(state_out, s);
      }
      return wfe::kExitOk;
    }
    if (*inspect) {
      const auto s = wfe::read_state(state_path);
      std::cout << wfe::inspect_state(s).dump(2) << "\n";
      return wfe::kExitOk;
    }
  } catch (const wfe::ConfigError& e) {
    report(e);
    return wfe::kExitConfig;
  } catch (const std::ios_base::failure& e) {
    std::cerr << "error: " << e.what() << "\n";
    return wfe::kExitIo;
  } catch (const wfe::NumericalFailure& e) {
    std::cerr << "error: " << e.what() << "\n";
    return wfe::kExitNumerical;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return wfe::kExitConfig;
  }
  return wfe::kExitOk;
}

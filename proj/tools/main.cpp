#include <cstdint>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "flagdyn/scenario.hpp"

int main(int argc, char** argv) {
  CLI::App app{"flag bundle dynamics toolkit"};
  app.require_subcommand(1);

  struct SubArgs {
    std::string config;
    std::string out = "out";
    std::optional<std::uint64_t> seed;
    std::optional<int> threads;
    bool strict = false;
  };
  const std::pair<const char*, const char*> subs[] = {
      {"spectrum", "polar exponent estimate with convergence data"},
      {"morse", "chain-recurrence analysis and spectrum hulls"},
      {"check", "the three equality conditions plus verdict"},
      {"unique-ergodic", "singleton-spectrum analysis over a rotation"},
      {"iid-demo", "independent products: regularity vs refinement"},
      {"perturb", "gauge perturbation continuity table"},
  };
  SubArgs args[6];
  for (int i = 0; i < 6; ++i) {
    auto* sc = app.add_subcommand(subs[i].first, subs[i].second);
    sc->add_option("--config", args[i].config, "scenario config (JSON)")->required();
    sc->add_option("--out", args[i].out, "output directory (default: out)");
    sc->add_option("--seed", args[i].seed, "override the config seed");
    sc->add_option("--threads", args[i].threads, "worker threads (default: config or 1)");
    sc->add_flag("--strict", args[i].strict, "exit 3 when non-convergence warnings are present");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  for (int i = 0; i < 6; ++i) {
    if (app.get_subcommands().front()->get_name() == subs[i].first) {
      flagdyn::CliOverrides ov;
      ov.seed = args[i].seed;
      ov.threads = args[i].threads;
      ov.strict = args[i].strict;
      return flagdyn::run_scenario(subs[i].first, args[i].config, args[i].out, ov);
    }
  }
  return 1;
}

// tvlearn command line front end.
//
// Exit status: 0 success, 1 usage or input error, 2 numerical failure.

#include <CLI11.hpp>

#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "tvlearn/config.hpp"
#include "tvlearn/error.hpp"
#include "tvlearn/experiments.hpp"
#include "tvlearn/state_solver.hpp"

namespace {

struct Flags {
  std::string config_path;
  std::vector<std::string> sets;
  std::optional<std::string> out, model, input, clean, phantom, lambda;
  std::optional<long long> seed, size;
};

void add_common(CLI::App* sub, Flags& f) {
  sub->add_option("-c,--config", f.config_path, "key=value config file")->check(CLI::ExistingFile);
  sub->add_option("-s,--set", f.sets, "override a config key, e.g. --set solver.gamma=50");
  sub->add_option("-o,--out", f.out, "output directory (output.dir)");
  sub->add_option("--model", f.model, "gaussian | gauss_poisson | impulse (model)");
  sub->add_option("--input", f.input, "noisy image, PGM or PNG (input.noisy)");
  sub->add_option("--clean", f.clean, "ground truth image (input.clean)");
  sub->add_option("--phantom", f.phantom, "bundled phantom when no clean image is given (input.phantom)");
  sub->add_option("--size", f.size, "phantom size in pixels (input.size)");
  sub->add_option("--seed", f.seed, "noise seed (seed)");
}

tvlearn::Config build_config(const Flags& f) {
  tvlearn::Config cfg = f.config_path.empty() ? tvlearn::Config{} : tvlearn::Config::load(f.config_path);
  auto put = [&cfg](const char* key, const std::optional<std::string>& v) {
    if (v) cfg.set(key, *v);
  };
  put("output.dir", f.out);
  put("model", f.model);
  put("input.noisy", f.input);
  put("input.clean", f.clean);
  put("input.phantom", f.phantom);
  put("denoise.lambda", f.lambda);
  if (f.seed) cfg.set("seed", std::to_string(*f.seed));
  if (f.size) cfg.set("input.size", std::to_string(*f.size));
  for (const auto& kv : f.sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos || eq == 0) throw tvlearn::PreconditionError("--set expects key=value, got '" + kv + "'");
    cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Learn TV denoising fidelity weights by bilevel optimization"};
  app.set_version_flag("--version", TVLEARN_VERSION);
  app.require_subcommand(0, 1);
  bool dump_defaults = false;
  app.add_flag("--print-defaults", dump_defaults, "print the default config and exit");

  Flags flags;
  using Runner = std::function<int(const tvlearn::ExperimentSettings&)>;
  std::map<CLI::App*, Runner> runners;
  auto sub = [&](const char* name, const char* help, Runner run) {
    CLI::App* s = app.add_subcommand(name, help);
    add_common(s, flags);
    runners[s] = std::move(run);
    return s;
  };
  CLI::App* den = sub("denoise", "one inner solve at fixed weights", tvlearn::run_denoise);
  den->add_option("--lambda", flags.lambda, "weights, comma separated (denoise.lambda)");
  sub("learn", "learn weights for one noisy/clean pair", tvlearn::run_learn);
  sub("train", "learn weights shared by several pairs", tvlearn::run_train);
  sub("gradcheck", "compare adjoint and finite-difference gradients", tvlearn::run_gradcheck);
  sub("sweep-mesh", "learned weights across image sizes", tvlearn::run_sweep_mesh);
  sub("sweep-noise", "learned weights across noise variances", tvlearn::run_sweep_noise);
  sub("noise", "write a clean/noisy image pair", tvlearn::run_noise);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  if (dump_defaults) {
    std::cout << tvlearn::default_config_text();
    return 0;
  }
  if (app.get_subcommands().empty()) {
    std::cerr << app.help();
    return 1;
  }

  CLI::App* chosen = app.get_subcommands().front();
  try {
    const tvlearn::ExperimentSettings settings = tvlearn::settings_from_config(build_config(flags));
    return runners.at(chosen)(settings);
  } catch (const tvlearn::PreconditionError& e) {
    std::cerr << "tvlearn " << chosen->get_name() << ": " << e.what() << '\n';
    return 1;
  } catch (const tvlearn::IoError& e) {
    std::cerr << "tvlearn " << chosen->get_name() << ": " << e.what() << '\n';
    return 1;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "tvlearn " << chosen->get_name() << ": " << e.what() << '\n';
    return 1;
  } catch (const tvlearn::ConvergenceError& e) {
    std::cerr << "tvlearn " << chosen->get_name() << ": " << e.what() << " after " << e.trace().iterations
              << " Newton steps\n";
    return 2;
  } catch (const tvlearn::Error& e) {
    std::cerr << "tvlearn " << chosen->get_name() << ": numerical failure: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "tvlearn " << chosen->get_name() << ": " << e.what() << '\n';
    return 2;
  }
}

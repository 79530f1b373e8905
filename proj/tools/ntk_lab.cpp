#include <CLI11.hpp>

#include <functional>
#include <iostream>
#include <map>

#include "ntk/experiments.hpp"

namespace {

using Command = std::function<ntk::Json(const ntk::Config&, const ntk::RunContext&)>;

const std::map<std::string, std::pair<Command, std::string>>& commands() {
  static const std::map<std::string, std::pair<Command, std::string>> table = {
      {"ntk-convergence", {ntk::cmd_ntk_convergence, "empirical NTK curves at init and after training vs the limit"}},
      {"kernel-regression", {ntk::cmd_kernel_regression, "trained nets vs the t -> infinity Gaussian limit"}},
      {"pca-convergence", {ntk::cmd_pca_convergence, "training along the 2nd kernel principal component (MNIST)"}},
      {"pd-certificate", {ntk::cmd_pd_certificate, "Hermite positive-definiteness certificate and Gram check"}},
  };
  return table;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ntk-lab: neural tangent kernel experiments"};
  app.require_subcommand(1);

  std::string config_path;
  std::uint64_t seed = 0;
  std::string out_dir = "out";
  bool full = false;
  std::vector<std::string> overrides;

  for (const auto& [name, entry] : commands()) {
    auto* sub = app.add_subcommand(name, entry.second);
    sub->add_option("--config", config_path, "flat key = value config file")->check(CLI::ExistingFile);
    sub->add_option("--seed", seed, "base seed for data and initialization");
    sub->add_option("--out", out_dir, "output directory");
    sub->add_flag("--full", full, "larger widths for the width sweeps");
    sub->add_option("--set", overrides, "override a config entry, key=value (repeatable)");
  }
  CLI11_PARSE(app, argc, argv);

  try {
    auto config = config_path.empty() ? ntk::Config() : ntk::Config::from_file(config_path);
    for (const auto& kv : overrides) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw ntk::ConfigError(kv, "--set expects key=value");
      config.set(kv.substr(0, eq), kv.substr(eq + 1));
    }
    const ntk::RunContext ctx{out_dir, seed, full};
    const auto& name = app.get_subcommands().front()->get_name();
    const auto summary = commands().at(name).first(config, ctx);
    std::cout << summary.dump(2) << '\n';
    return 0;
  } catch (const ntk::ConfigError& e) {
    std::cerr << "ntk-lab: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "ntk-lab: " << e.what() << '\n';
    return 1;
  }
}

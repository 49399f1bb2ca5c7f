#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "openrpf/errors.hpp"
#include "openrpf/harness.hpp"
#include "openrpf/scenarios.hpp"

namespace {

struct Common {
  std::string config;
  std::optional<std::string> out;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> format;
};

struct ConeFlags {
  std::optional<double> a, u, v, epsilon;
  std::optional<int> depth;
  std::optional<std::size_t> samples;
};

void add_common(CLI::App* app, Common& c, bool needs_config) {
  auto* opt = app->add_option("--config", c.config, "Config file, or scenario:<name> for a built-in");
  if (needs_config) opt->required();
  app->add_option("--out", c.out, "Output directory");
  app->add_option("--seed", c.seed, "Seed for every sampled quantity");
  app->add_option("--format", c.format, "Table format")->check(CLI::IsMember({"csv", "json"}));
}

openrpf::ExperimentConfig load(const std::string& spec) {
  const std::string prefix = "scenario:";
  if (spec.rfind(prefix, 0) == 0) return openrpf::load_scenario(spec.substr(prefix.size()));
  return openrpf::load_config(spec);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Random open-system transfer operators: eigendata, escape rates, cones"};
  app.require_subcommand(1);
  Common common;
  ConeFlags cone;

  struct Entry {
    const char* name;
    const char* help;
    openrpf::Subcommand sub;
  };
  const Entry entries[] = {
      {"solve", "Eigendata (λ, q, ν, μ) of the closed and open operators", openrpf::Subcommand::Solve},
      {"escape", "Expected pressures, escape rate and conditionally invariant measure", openrpf::Subcommand::Escape},
      {"correlations", "Decay of correlations for the configured observables", openrpf::Subcommand::Correlations},
      {"cones", "Lasota-Yorke constants, fiber classification and cone contraction", openrpf::Subcommand::Cones},
      {"check", "Invariant suite over the built-in scenarios", openrpf::Subcommand::Check},
  };
  for (const auto& e : entries) {
    CLI::App* sub = app.add_subcommand(e.name, e.help);
    add_common(sub, common, e.sub != openrpf::Subcommand::Check);
    if (e.sub == openrpf::Subcommand::Cones) {
      sub->add_option("--a", cone.a, "Explicit cone parameter (default: constructive ã)");
      sub->add_option("--u", cone.u, "Contraction budget u");
      sub->add_option("--v", cone.v, "Cone ratio v");
      sub->add_option("--epsilon", cone.epsilon, "Good-fiber tolerance ε");
      sub->add_option("--depth", cone.depth, "Functional depth");
      sub->add_option("--samples", cone.samples, "Samples per estimate");
    }
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : openrpf::exit_code::validation;
  }

  try {
    const CLI::App* chosen = app.get_subcommands().front();
    const auto sub = *openrpf::parse_subcommand(chosen->get_name());
    openrpf::RunOptions options{common.out, common.seed, common.format, false};
    openrpf::ResultBundle bundle;
    if (sub == openrpf::Subcommand::Check) {
      bundle = openrpf::run_check(options);
      for (const auto& r : bundle.checks) {
        if (!r.pass) std::cerr << "FAIL " << r.scenario << ": " << r.check << " = " << r.value << "\n";
      }
      std::cout << bundle.checks.size() << " checks, "
                << std::count_if(bundle.checks.begin(), bundle.checks.end(), [](const auto& r) { return !r.pass; })
                << " failed\n";
    } else {
      openrpf::ExperimentConfig cfg = load(common.config);
      if (cone.a) cfg.cones.a = *cone.a;
      if (cone.u) cfg.cones.u = *cone.u;
      if (cone.v) cfg.cones.v = *cone.v;
      if (cone.epsilon) cfg.cones.epsilon = *cone.epsilon;
      if (cone.depth) cfg.cones.depth = *cone.depth;
      if (cone.samples) cfg.cones.samples = *cone.samples;
      cfg.cones.validate();
      bundle = openrpf::run(cfg, sub, options);
      std::cout << bundle.summary_json << "\n";
    }
    return bundle.exit_code;
  } catch (...) {
    std::string message;
    const int code = openrpf::exit_code_for_current_exception(message);
    std::cerr << message << "\n";
    return code;
  }
}

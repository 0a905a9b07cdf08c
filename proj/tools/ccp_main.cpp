#include <cstdint>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "ccp/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{
      "Crack-path engineering toolkit: enriched finite-element growth "
      "simulation, reanalysis verification, and hole-placement optimization"};
  app.require_subcommand(1);

  std::string config;
  std::string out = "out";
  std::uint64_t seed = 0;
  int jobs = 0;
  std::string solver;
  std::string inner;

  const struct {
    const char* name;
    const char* desc;
  } cmds[] = {
      {"simulate", "grow the crack and write path/steps/fields CSVs"},
      {"sample", "build a stratified design dataset with true evaluations"},
      {"train", "fit the fitness surrogate on a sampled dataset"},
      {"optimize", "search hole placements so the crack tracks the key points"},
      {"verify", "run full and reanalysis solvers side by side per step"},
  };
  for (const auto& c : cmds) {
    CLI::App* sub = app.add_subcommand(c.name, c.desc);
    sub->add_option("--config", config, "JSON run configuration")->required();
    sub->add_option("--out", out, "output directory (default: out)");
    sub->add_option("--seed", seed, "override the config seed");
    sub->add_option("--jobs", jobs, "max concurrent fitness evaluations");
    sub->add_option("--solver", solver, "growth-loop solver")
        ->check(CLI::IsMember({"full", "dur"}));
    sub->add_option("--inner", inner, "optimizer engine")
        ->check(CLI::IsMember({"pso", "bpnn-pso"}));
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? ccp::cli::kOk : ccp::cli::kUsage;
  }

  CLI::App* sub = app.get_subcommands().front();
  ccp::cli::Overrides o;
  if (sub->count("--seed")) o.seed = seed;
  if (sub->count("--jobs")) o.jobs = jobs;
  if (sub->count("--solver")) o.solver = solver;
  if (sub->count("--inner")) o.inner = inner;

  ccp::cli::RunConfig cfg;
  try {
    cfg = ccp::cli::parse_config_file(config);
    ccp::cli::apply_overrides(cfg, o);
  } catch (const ccp::cli::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return ccp::cli::kValidation;
  } catch (const ccp::cli::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return ccp::cli::kConfig;
  }

  return ccp::cli::dispatch(sub->get_name(), cfg, out);
}

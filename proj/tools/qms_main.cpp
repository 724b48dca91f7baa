#include "qms/cli.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv) {
  CLI::App app{"Superlinear integral equations on finite quasi-metric spaces"};
  app.set_version_flag("--version", qms::cli::library_version());
  qms::cli::RunOptions opts;
  std::uint64_t seed = 0;
  std::size_t threads = 0;

  app.add_option("command", opts.command, "Pipeline to run")
      ->required()
      ->check(CLI::IsMember(qms::cli::commands()));
  app.add_option("--scenario", opts.scenario, "Scenario JSON file")->required();
  app.add_option("--out", opts.out, "Output directory")->required();
  auto* seed_opt = app.add_option("--seed", seed, "Override the scenario seed");
  auto* thread_opt = app.add_option("--threads", threads, "Worker threads (0 = all cores)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : qms::cli::kExitInput;
  }
  if (*seed_opt) opts.seed = seed;
  if (*thread_opt) opts.threads = threads;
  return qms::cli::run(opts, std::cerr);
}

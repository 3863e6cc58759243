// Command-line front end over the C API.
#include <cstdint>
#include <cstdio>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "dynrec/dynrec.h"

namespace {

int finish(dynrec_status s, const char* what) {
  if (s != DYNREC_OK) std::fprintf(stderr, "dynrec %s: %s: %s\n", what, dynrec_status_name(s), dynrec_last_error());
  return dynrec_exit_code(s);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Walk-forward stock recommendation and backtesting"};
  app.require_subcommand(1);
  std::string log_level = "warn";
  app.add_option("--log-level", log_level, "stderr verbosity (trace, debug, info, warn, error, off)");
  app.set_version_flag("--version", std::string(dynrec_version()));

  std::string config, out, run_dir, benchmark;
  std::optional<std::uint64_t> seed;

  auto* synth = app.add_subcommand("synth", "generate a synthetic dataset");
  synth->add_option("--config", config, "synth config file")->required();
  synth->add_option("--out", out, "output directory")->required();
  synth->add_option("--seed", seed, "override the config seed");

  auto* run = app.add_subcommand("run", "run the full pipeline");
  run->add_option("--config", config, "run config file")->required();
  run->add_option("--out", out, "output directory")->required();
  run->add_option("--seed", seed, "override the config seed");
  run->add_option("--benchmark", benchmark, "benchmark series (date,value)");

  auto* report = app.add_subcommand("report", "summarize a completed run");
  report->add_option("--run", run_dir, "run output directory")->required();
  report->add_option("--benchmark", benchmark, "benchmark series (date,value)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  if (dynrec_set_log_level(log_level.c_str()) != DYNREC_OK) return finish(DYNREC_ERR_INVALID_ARGUMENT, "--log-level");
  const std::uint64_t* seed_ptr = seed ? &*seed : nullptr;
  const char* bench = benchmark.empty() ? nullptr : benchmark.c_str();

  if (synth->parsed()) return finish(dynrec_synth(config.c_str(), out.c_str(), seed_ptr), "synth");
  if (run->parsed()) return finish(dynrec_run(config.c_str(), out.c_str(), seed_ptr, bench), "run");
  if (report->parsed()) {
    dynrec_text* table = nullptr;
    const auto s = dynrec_report(run_dir.c_str(), bench, &table);
    if (s == DYNREC_OK) std::fputs(dynrec_text_data(table), stdout);
    dynrec_text_free(table);
    return finish(s, "report");
  }
  return 1;
}

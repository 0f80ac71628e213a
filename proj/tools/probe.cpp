#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "probe/run.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Needle-sequence probe method: forward checks, needle fits, indicator fields and theorem checks."};
  app.footer(probe::config_defaults_help() +
             "\nEvery flag can also be set through the environment variable named in brackets.\n"
             "Exit codes: 0 success, 1 internal error, 2 ConfigError, 3 SolverError, 4 ScheduleError.");

  std::string config_path, mode_flag, mode_arg, out, timestamp;
  int threads = 0;
  std::optional<std::uint64_t> seed;
  bool print_config = false;
  app.add_option("MODE", mode_arg, "Mode to run (same values as --mode)");
  app.add_option("-c,--config", config_path, "JSON run configuration")->required()->envname("PROBE_CONFIG");
  app.add_option("-o,--out", out, "Output directory (overrides the config's output)")->envname("PROBE_OUT");
  app.add_option("-t,--threads", threads, "Worker threads (default: config value, then available parallelism)")
      ->envname("PROBE_THREADS")
      ->check(CLI::NonNegativeNumber);
  app.add_option("-s,--seed", seed, "Seed for randomized checks (overrides the config)")->envname("PROBE_SEED");
  app.add_option("-m,--mode", mode_flag,
                 "forward-check | needle-fit | indicator-series | side-a-field | side-b-field | verify-suite")
      ->envname("PROBE_MODE");
  app.add_option("--timestamp", timestamp, "Manifest timestamp (default: current UTC time)")->envname("PROBE_TIMESTAMP");
  app.add_flag("--print-config", print_config, "Print the effective configuration and exit");
  CLI11_PARSE(app, argc, argv);

  try {
    probe::RunConfig config = probe::load_config(config_path);
    if (!mode_arg.empty() && !mode_flag.empty() && mode_arg != mode_flag) {
      throw probe::ConfigError("mode", "positional mode and --mode disagree");
    }
    const std::string mode = !mode_flag.empty() ? mode_flag : mode_arg;
    if (!mode.empty()) config.mode = probe::parse_mode(mode);
    if (seed) config.seed = *seed;
    if (!out.empty()) config.output = out;
    if (threads > 0) config.threads = threads;
    if (print_config) {
      std::cout << probe::effective_config(config);
      return 0;
    }
    probe::RunOptions opts;
    opts.timestamp = timestamp;
    const probe::RunResult res = probe::run(config, opts);
    for (const auto& [k, v] : res.summary) std::cout << k << " = " << v << "\n";
    std::cout << "wrote " << res.files.size() << " files to " << res.directory << "\n";
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "error [" << probe::error_category(e) << "]: " << e.what() << "\n";
    return probe::exit_code(e);
  }
}

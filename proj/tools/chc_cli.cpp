// chc - command-line driver for single runs and convergence studies.
#include "chc/checks.hpp"
#include "chc/config.hpp"
#include "chc/experiments.hpp"
#include "chc/parallel.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>

namespace fs = std::filesystem;
using namespace chc;

namespace {

const std::vector<std::string> kCommands{"run",          "study-det",     "study-det-deriv", "study-stoch-conv",
                                         "study-strong", "study-moments", "probe-holder"};

std::string utc_timestamp()
{
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
  return buf;
}

std::ofstream open_output(const fs::path& path)
{
  std::ofstream os(path);
  if (!os)
    throw std::runtime_error("cannot write " + path.string());
  return os;
}

template <class Writer>
void write_file(const fs::path& path, Writer&& writer)
{
  auto os = open_output(path);
  writer(os);
}

int report(const std::vector<Check>& checks)
{
  for (const auto& c : checks)
    std::cout << (c.pass ? "PASS " : "FAIL ") << c.detail << '\n';
  return all_pass(checks) ? 0 : 1;
}

std::vector<std::string> planned_outputs(const std::string& command, const fs::path& out)
{
  const auto p = [&](const std::string& name) { return (out / name).string(); };
  if (command == "run")
    return {p("run.csv")};
  if (command == "study-det")
    return {p("det_linear_h.csv"), p("det_linear_k.csv")};
  if (command == "study-det-deriv")
    return {p("det_deriv_h.csv"), p("det_deriv_k.csv")};
  if (command == "study-stoch-conv")
    return {p("stoch_conv_h.csv"), p("stoch_conv_k.csv")};
  if (command == "study-strong")
    return {p("strong.csv")};
  if (command == "study-moments")
    return {p("moments.csv")};
  return {p("holder.csv")};
}

int dispatch(const std::string& command, const StudyConfig& cfg, const fs::path& out)
{
  const auto outputs = planned_outputs(command, out);
  if (command == "run") {
    const Trajectory traj = single_run(cfg);
    StepperConfig sc = cfg.stepper;
    sc.k = cfg.T / static_cast<double>(cfg.N);
    write_file(outputs[0], [&](std::ostream& os) { write_trajectory_csv(os, traj, sc); });
    std::cout << "run: " << cfg.N << " steps, sup J=" << traj.maxima.sup_lyapunov << '\n';
    return 0;
  }
  if (command == "study-det" || command == "study-det-deriv" || command == "study-stoch-conv") {
    const auto [space, time] = command == "study-det"         ? det_linear_rate_study(cfg)
                               : command == "study-det-deriv" ? det_derivative_rate_study(cfg)
                                                              : stoch_conv_rate_study(cfg);
    write_file(outputs[0], [&](std::ostream& os) { write_rate_csv(os, space); });
    write_file(outputs[1], [&](std::ostream& os) { write_rate_csv(os, time); });
    return report(command == "study-det"         ? det_linear_checks(space, time)
                  : command == "study-det-deriv" ? det_derivative_checks(space, time)
                                                 : stoch_conv_checks(space, time));
  }
  if (command == "study-strong") {
    const RateStudyResult r = strong_convergence_study(cfg);
    write_file(outputs[0], [&](std::ostream& os) { write_rate_csv(os, r); });
    return report({strong_decay(r)});
  }
  if (command == "study-moments") {
    const MomentStudyResult r = moment_bound_study(cfg);
    write_file(outputs[0], [&](std::ostream& os) { write_moment_csv(os, r); });
    return report(moment_checks(r));
  }
  const HolderResult r = holder_probe(cfg);
  write_file(outputs[0], [&](std::ostream& os) { write_holder_csv(os, r); });
  return report(holder_checks(r));
}

}  // namespace

int main(int argc, char** argv)
{
  CLI::App app{"Stochastic Cahn-Hilliard-Cook finite element solver"};
  std::string command;
  std::string config_path, seed_flag, study_flag;
  std::string out_dir = "out";
  unsigned workers = default_workers();
  app.add_option("command", command, "run | study-det | study-det-deriv | study-stoch-conv | study-strong | "
                                     "study-moments | probe-holder");
  app.add_option("--config", config_path, "flat key = value config file");
  app.add_option("--seed", seed_flag, "master seed (overrides CHC_SEED and the config)");
  app.add_option("--out", out_dir, "output directory");
  app.add_option("--workers", workers, "worker threads for Monte-Carlo samples");
  app.add_option("--study", study_flag, "study name (alternative to the positional command)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  if (command.empty())
    command = study_flag;
  if (std::find(kCommands.begin(), kCommands.end(), command) == kCommands.end()) {
    std::cerr << (command.empty() ? "missing command" : "unknown command '" + command + "'") << "\n\n"
              << app.help();
    return 2;
  }

  try {
    StudyConfig cfg;
    if (!config_path.empty())
      cfg = parse_config_file(config_path);
    cfg.study = command;
    if (!seed_flag.empty() || std::getenv("CHC_SEED"))
      cfg.noise.seed = resolve_seed(seed_flag);
    cfg.workers = std::max(1u, workers);
    validate(cfg);

    const fs::path out(out_dir);
    fs::create_directories(out);
    RunManifest manifest{cfg, kArtifactVersion, utc_timestamp(), planned_outputs(command, out)};
    write_file(out / (command + ".manifest"), [&](std::ostream& os) { write_manifest(os, manifest); });

    return dispatch(command, cfg, out);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << command << " failed: " << e.what() << '\n';
    return 1;
  }
}

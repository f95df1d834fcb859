// fkp <subcommand> [--config FILE] [key=value ...]
//
// Exit status 0 iff the run completed; 1 for a failed or interrupted run;
// 2 for configuration errors.

#include <cstdio>
#include <map>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "run_config.hpp"

namespace {

const std::map<std::string, std::string> descriptions{
    {"ground-state", "line solitary wave profile (profile.csv, profile.fkps)"},
    {"evolve", "unperturbed line soliton run (diagnostics.csv, snapshots)"},
    {"experiment", "perturbed line soliton run (diagnostics.csv, snapshots)"},
    {"spectrum", "eigenvalues of L(k) (spectrum.csv)"},
    {"growth-rate", "transverse growth rates over k (growth_rate.csv)"},
    {"branch", "dimension-breaking branch (branch.csv, phi_*.fkps)"},
    {"sweep", "repeat sweep_of over sweep_alpha values"},
    {"verify", "acceptance checks (verify.txt)"},
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Fractional KP solver: ground states, evolution, spectra, branches"};
  app.set_version_flag("--version", std::string(fkp::cli::version));
  app.require_subcommand(1);

  std::string config_path;
  std::vector<std::string> assignments;
  for (const auto& name : fkp::cli::subcommands()) {
    auto* sub = app.add_subcommand(name, descriptions.at(name));
    sub->add_option("--config", config_path, "key=value config file")->check(CLI::ExistingFile);
    sub->add_option("assignments", assignments, "key=value overrides");
  }
  CLI11_PARSE(app, argc, argv);

  const std::string subcommand = app.get_subcommands().front()->get_name();
  fkp::cli::RunConfig cfg;
  try {
    std::vector<std::string> ov = assignments;
    ov.push_back("subcommand=" + subcommand);
    cfg = config_path.empty() ? fkp::cli::parse_config("", ov) : fkp::cli::parse_config_file(config_path, ov);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "fkp: %s\n", e.what());
    return 2;
  }

  fkp::cli::RunManifest manifest;
  try {
    manifest = fkp::cli::run(cfg);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "fkp: %s\n", e.what());
    return 1;
  }
  std::printf("%s: %s%s%s\n", subcommand.c_str(), manifest.status.c_str(), manifest.message.empty() ? "" : ": ",
              manifest.message.c_str());
  std::printf("manifest: %s\n", (cfg.out_dir / "manifest.json").string().c_str());
  if (!manifest.completed()) {
    if (manifest.status == "error") std::fprintf(stderr, "fkp: %s\n", manifest.message.c_str());
    return 1;
  }
  return 0;
}

#include "jivekit/commands.hpp"
#include "jivekit/io.hpp"

#include "CLI11.hpp"

#include <cstdlib>
#include <iostream>

int main(int argc, char** argv) {
  using namespace jivekit;

  CLI::App app{"Joint and individual variation decomposition of multi-block data"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);

  std::optional<std::uint64_t> seed;
  std::optional<std::string> backend;
  app.add_option("--seed", seed, "override config seeds")->group("Overrides");
  app.add_option("--backend", backend, "override backend")
      ->check(CLI::IsMember({"classical", "robust"}))
      ->group("Overrides");

  std::string manifest, config, study, input, out;
  std::optional<int> workers, replications;

  auto* dec = app.add_subcommand("decompose", "decompose a multi-block CSV dataset");
  dec->add_option("--manifest", manifest, "dataset manifest JSON")->required();
  dec->add_option("--config", config, "decomposition config JSON")->required();
  dec->add_option("--out", out, "output directory")->required();

  auto* sim = app.add_subcommand("simulate", "run a Monte-Carlo study");
  sim->add_option("--study", study, "study config JSON")->required();
  sim->add_option("--out", out, "output directory")->required();
  sim->add_option("--workers", workers, "parallel replications (default $JIVEKIT_WORKERS or config)")
      ->check(CLI::PositiveNumber);
  sim->add_option("--replications", replications, "override the replication count")
      ->check(CLI::NonNegativeNumber);

  auto* rep = app.add_subcommand("report", "regenerate TSV summaries from a study report");
  rep->add_option("--input", input, "study_report.json")->required();
  rep->add_option("--out", out, "output directory")->required();

  // Options may appear before or after the subcommand.
  for (auto* sub : {dec, sim, rep}) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitInput;
  }

  CommandOverrides ov;
  ov.seed = seed;
  if (backend) ov.backend = backend_from_string(*backend);
  ov.replications = replications;
  ov.workers = workers;
  if (!ov.workers) {
    if (const char* env = std::getenv("JIVEKIT_WORKERS")) {
      try {
        const int w = std::stoi(env);
        if (w < 1) throw std::invalid_argument("non-positive");
        ov.workers = w;
      } catch (const std::exception&) {
        std::cerr << "error: JIVEKIT_WORKERS must be a positive integer, got '" << env << "'\n";
        return kExitInput;
      }
    }
  }

  if (dec->parsed()) return cmd_decompose(manifest, config, out, ov, std::cerr);
  if (sim->parsed()) return cmd_simulate(study, out, ov, std::cerr);
  return cmd_report(input, out, std::cerr);
}

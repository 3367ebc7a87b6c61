#include <CLI11.hpp>

#include <iostream>

#include "phshape/cli.hpp"
#include "phshape/errors.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Energy-shaping controller synthesis, checking and simulation"};
  app.require_subcommand(1, 1);

  phshape::cli::Command cmd;
  std::string mode = "reduced";
  std::string config;
  std::string out;
  for (const auto& [name, help] : {std::pair{"synth", "solve the matching conditions and write a controller package"},
                                   std::pair{"check", "verify a controller package"},
                                   std::pair{"simulate", "simulate the closed loop and write trajectory.csv"},
                                   std::pair{"export", "write plot-ready CSVs"}}) {
    auto* sub = app.add_subcommand(name, help);
    sub->add_option("--config", config, "run configuration (JSON)")->required()->check(CLI::ExistingFile);
    sub->add_option("--mode", mode, "simulation mode")->check(CLI::IsMember({"reduced", "interconnected"}));
    sub->add_option("--out", out, "package and output directory (default out/<config name>)");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : phshape::cli::kConfigError;
  }

  cmd.name = app.get_subcommands().front()->get_name();
  cmd.config = config;
  cmd.out = out;
  cmd.mode = phshape::cli::parse_mode(mode);
  return phshape::cli::run(cmd, std::cout, std::cerr);
}

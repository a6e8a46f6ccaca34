/******************************************************************************
 *
 * smokecap - single-view smoke density and velocity reconstruction
 *
 * This program is free software, distributed under the terms of the
 * Apache License, Version 2.0
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Command line front end
 *
 ******************************************************************************/
#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "smokecap/app.hpp"

using namespace smokecap;

int main(int argc, char** argv)
{
    CLI::App cli{"Single-view smoke density and velocity reconstruction"};
    cli.require_subcommand(1);
    cli.fallthrough();

    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<int> frames;
    std::optional<std::string> out_dir;
    cli.add_option("--seed", seed, "Random seed of the synthetic scene");
    cli.add_option("--frames", frames, "Number of frames to process, starting at frame 0")->check(CLI::PositiveNumber);
    cli.add_option("--out", out_dir, "Output directory");

    const char* commands[][2] = {
        {"simulate", "Run the synthetic scene and write ground-truth volumes"},
        {"project", "Render the front view of the ground-truth densities"},
        {"reconstruct", "Reconstruct density and velocity from the image sequence and evaluate"},
        {"resim", "Re-simulate the reconstructed motion at a finer resolution"},
        {"extrapolate", "Continue the simulation from a reconstructed frame"},
        {"eval", "Write the error report of an existing reconstruction"},
    };
    for (const auto& c : commands) cli.add_subcommand(c[0], c[1])->add_option("config", config_path, "Configuration file")->required();
    cli.add_subcommand("defaults", "Print every configuration key with its default value");

    try {
        cli.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return cli.exit(e);
    }

    const std::string command = cli.get_subcommands().front()->get_name();
    try {
        if (command == "defaults") {
            std::cout << default_config_text();
            return 0;
        }
        AppConfig cfg = load_config(config_path);
        if (seed) cfg.seed = *seed;
        if (frames) cfg.frames = *frames;
        if (out_dir) cfg.out_dir = *out_dir;

        if (command == "simulate") {
            run_simulate(cfg);
        } else if (command == "project") {
            run_project(cfg);
        } else if (command == "reconstruct") {
            EvalReport report;
            run_reconstruct(cfg, &report);
            std::cout << report.to_csv();
        } else if (command == "eval") {
            std::cout << run_eval(cfg).to_csv();
        } else if (command == "resim") {
            run_resim(cfg);
        } else if (command == "extrapolate") {
            run_extrapolate(cfg);
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "smokecap %s: %s\n", command.c_str(), e.what());
        return 1;
    }
    return 0;
}

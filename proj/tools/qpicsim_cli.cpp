// Copyright 2026 The qpicsim Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <exception>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "qpicsim/experiment.hpp"
#include "qpicsim/version.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfigError = 2;
constexpr int kExitRuntimeError = 3;

int run_command(const std::string &config_path) {
    qpicsim::ExperimentConfig cfg;
    try {
        cfg = qpicsim::parse_experiment_config(config_path);
    } catch (const qpicsim::invalid_config &err) {
        std::cerr << err.what() << "\n";
        return kExitConfigError;
    }
    try {
        const auto result = qpicsim::run_scenario(cfg);
        std::cout << result.summary.dump(2) << "\n";
        return kExitOk;
    } catch (const std::exception &err) {
        std::cerr << "scenario failed: " << err.what() << "\n";
        std::cerr << "partial outputs retained in " << cfg.output_dir << " (see manifest.json)\n";
        return kExitRuntimeError;
    }
}

int validate_command(const std::string &config_path) {
    try {
        const auto cfg = qpicsim::parse_experiment_config(config_path);
        std::cout << "OK: " << config_path << " (scenario " << qpicsim::scenario_name(cfg.scenario) << ")\n";
        return kExitOk;
    } catch (const qpicsim::invalid_config &err) {
        std::cerr << err.what() << "\n";
        return kExitConfigError;
    }
}

}  // namespace

int main(int argc, char **argv) {
    CLI::App app{"Photonic-circuit experiment runner"};
    app.require_subcommand(1);

    std::string run_config;
    auto *run = app.add_subcommand("run", "Run one experiment scenario from a config file");
    run->add_option("config", run_config, "Path to the configuration document")->required();

    std::string validate_config;
    auto *validate = app.add_subcommand("validate", "Validate a config file without running it");
    validate->add_option("config", validate_config, "Path to the configuration document")->required();

    auto *version = app.add_subcommand("version", "Print the version string");

    CLI11_PARSE(app, argc, argv);

    if (run->parsed()) {
        return run_command(run_config);
    }
    if (validate->parsed()) {
        return validate_command(validate_config);
    }
    if (version->parsed()) {
        std::cout << qpicsim::kVersion << "\n";
        return kExitOk;
    }
    return kExitConfigError;
}

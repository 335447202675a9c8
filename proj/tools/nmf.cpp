// Copyright 2026 The NMF Authors
// SPDX-License-Identifier: Apache-2.0

// nmf train|render|relight|eval|make-synthetic --config <file> [--set key=value ...] --out <dir>

#include <nmf/commands.h>
#include <nmf/config.h>

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <functional>
#include <map>
#include <string>
#include <vector>

namespace {

std::string oneLine(std::string s) {
    std::replace(s.begin(), s.end(), '\n', ' ');
    while (!s.empty() && s.back() == ' ') s.pop_back();
    return s;
}

}  // namespace

int main(int argc, char** argv) {
    using Runner = std::function<void(const nmf::RunConfig&, const std::string&)>;
    const std::vector<std::pair<std::string, std::pair<std::string, Runner>>> commands = {
        {"train", {"optimize a model on a posed image set", nmf::runTrain}},
        {"render", {"render the test views from a checkpoint", nmf::runRender}},
        {"relight", {"render the test views under a new environment map", nmf::runRelight}},
        {"eval", {"render the test views and report PSNR, SSIM and normal MAE", nmf::runEval}},
        {"make-synthetic", {"write the analytic sphere dataset", nmf::runMakeSynthetic}},
    };

    CLI::App app{"Neural microfacet fields"};
    app.require_subcommand(1);
    std::string configPath, outDir;
    std::vector<std::string> overrides;
    std::map<CLI::App*, Runner> runners;
    for (const auto& [name, entry] : commands) {
        CLI::App* sub = app.add_subcommand(name, entry.first);
        sub->add_option("--config", configPath, "TOML configuration file")->required();
        sub->add_option("--set", overrides, "override a config key (key=value), repeatable");
        sub->add_option("--out", outDir, "output directory")->required();
        runners[sub] = entry.second;
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::fprintf(stderr, "nmf: error: %s\n", oneLine(e.what()).c_str());
        return 2;
    }

    try {
        const nmf::RunConfig cfg = nmf::loadRunConfig(configPath, overrides);
        for (const auto& [sub, run] : runners)
            if (sub->parsed()) run(cfg, outDir);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "nmf: error: %s\n", oneLine(e.what()).c_str());
        return 1;
    }
    return 0;
}

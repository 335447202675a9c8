// Copyright 2026 The NMF Authors
// SPDX-License-Identifier: Apache-2.0

// Run configuration. Files use a flat TOML subset: `[section]` headers,
// `key = value` lines (dotted keys allowed), `#` comments, and values that
// are booleans, numbers, "strings" or arrays of numbers. Every key is
// validated; unknown keys are rejected. `--set key=value` overrides use the
// same value syntax and may leave strings unquoted.

#pragma once

#include <nmf/model.h>
#include <nmf/optim.h>
#include <nmf/render.h>

#include <map>
#include <string>
#include <variant>
#include <vector>

namespace nmf {

using ConfigValue = std::variant<bool, double, std::string, std::vector<double>>;
using ConfigTable = std::map<std::string, ConfigValue>;

/// Parses the TOML subset into fully qualified keys. Throws with a line number.
ConfigTable parseConfigText(const std::string& text, const std::string& origin = "config");
/// Parses `key=value` (the value may be an unquoted string).
std::pair<std::string, ConfigValue> parseOverride(const std::string& assignment);

struct SyntheticConfig {
    int trainViews = 16;
    int testViews = 4;
    int width = 64;
    int height = 64;
    double fovDegrees = 40.0;
    double cameraDistance = 4.0;
    double radius = 1.0;
    double sharpness = 0.02;  // logistic width of the surface, world units
    double sigmaMax = 400.0;
    Rgbd albedo{0.7, 0.35, 0.2};
    Rgbd albedoAlt{0.15, 0.35, 0.6};
    int checker = 0;  // checker cells around the equator; 0 keeps the albedo constant
    Rgbd f0{0.25, 0.25, 0.25};
    double roughness = 0.15;
    int envHeight = 64;
    int envWidth = 128;
    int secondaryBudget = 256;
    int samplesPerRay = 256;
    uint64_t seed = 7;
};

struct RunConfig {
    std::string dataPath;
    std::string trainSplit = "train";
    std::string testSplit = "test";
    std::string checkpoint;   // input checkpoint for render/relight/eval
    std::string relightEnv;   // PFM for relight
    double relightRotateDegrees = 0.0;

    ModelShape model;
    uint64_t modelSeed = 0;
    int finalResolution = 300;

    RenderConfig render;

    double scheduleScale = 1.0;
    TrainConfig train;
    int snapshotEvery = 0;
    int checkpointEvery = 0;
    int snapshotView = 0;

    SyntheticConfig synthetic;

    /// Applies every key of the table; throws on unknown keys or bad values.
    void apply(const ConfigTable& table);
    /// Cross-field checks and derived values (schedule, resolutions).
    void finalize();
};

/// Reads a file (may be empty path for defaults), applies overrides, finalizes.
RunConfig loadRunConfig(const std::string& path, const std::vector<std::string>& overrides);

}  // namespace nmf

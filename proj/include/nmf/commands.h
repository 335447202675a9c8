// Copyright 2026 The NMF Authors
// SPDX-License-Identifier: Apache-2.0

// Entry points behind the `nmf` command line tool. Each throws nmf::Error
// with a one-line reason on failure.

#pragma once

#include <nmf/config.h>

#include <string>

namespace nmf {

/// Optimizes a model on `data.path`; writes train_log.csv, snapshots,
/// periodic checkpoints and model.nmf into `out`.
void runTrain(const RunConfig& cfg, const std::string& out);

/// Renders every view of the test split from `io.checkpoint`.
void runRender(const RunConfig& cfg, const std::string& out);

/// Like render, with the environment replaced by `relight.env` (PFM) and
/// optionally rotated about +z by `relight.rotate_degrees`.
void runRelight(const RunConfig& cfg, const std::string& out);

/// Renders the test split and writes metrics.csv and metrics.txt.
void runEval(const RunConfig& cfg, const std::string& out);

/// Writes the analytic sphere dataset.
void runMakeSynthetic(const RunConfig& cfg, const std::string& out);

}  // namespace nmf

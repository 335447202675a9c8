// Copyright 2026 The NMF Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>
#include <string>
#include <vector>

namespace nmf {

/// Learning-rate group of a parameter array.
enum class ParamGroup { Grid, Network, Environment };

/// Named view of one optimizable array. Gradient objects expose the same
/// list in the same order, so optimizers can zip the two.
struct ParamRef {
    std::string name;
    ParamGroup group;
    std::span<double> data;
};

using ParamList = std::vector<ParamRef>;

}  // namespace nmf

// Copyright 2026 The NMF Authors
// SPDX-License-Identifier: Apache-2.0

// Binary model container. Layout (all integers u32, little-endian):
//
//   "NMF1"  version  array_count  reserved(0)        16-byte header
//   per array:  name_len  name  ndim  dims[ndim]  float32 data
//
// See docs/checkpoint.md for the array names.

#pragma once

#include <nmf/model.h>

#include <string>

namespace nmf {

inline constexpr uint32_t kCheckpointVersion = 1;

void saveCheckpoint(const std::string& path, Model& model, int step = 0);
/// Throws on a bad magic, an unsupported version, or missing/mis-sized arrays.
Model loadCheckpoint(const std::string& path, int* step = nullptr);

}  // namespace nmf

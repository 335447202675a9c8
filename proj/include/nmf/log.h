// Copyright 2026 The NMF Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <iostream>
#include <mutex>
#include <string>

namespace nmf {

enum class LogLevel { Quiet, Warning, Info };

inline LogLevel& logLevel() {
    static LogLevel level = LogLevel::Info;
    return level;
}

inline void logLine(LogLevel level, const char* tag, const std::string& msg) {
    static std::mutex mu;
    if (level > logLevel()) return;
    std::lock_guard<std::mutex> lock(mu);
    std::cerr << tag << msg << '\n';
}

inline void logInfo(const std::string& msg) { logLine(LogLevel::Info, "", msg); }
inline void logWarning(const std::string& msg) { logLine(LogLevel::Warning, "warning: ", msg); }

}  // namespace nmf

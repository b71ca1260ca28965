// Copyright 2026 The sylcut Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#pragma once

#include <functional>
#include <iostream>
#include <mutex>
#include <string>
#include <string_view>

namespace sylcut::log {

enum class Level { kDebug = 0, kInfo = 1, kWarning = 2, kError = 3 };

using Sink = std::function<void(Level, std::string_view)>;

namespace detail {

struct State {
  std::mutex mu;
  Level min_level = Level::kInfo;
  Sink sink;
};

inline State& state() {
  static State s;
  return s;
}

inline const char* level_name(Level l) {
  switch (l) {
    case Level::kDebug: return "DEBUG";
    case Level::kInfo: return "LOG";
    case Level::kWarning: return "WARNING";
    case Level::kError: return "ERROR";
  }
  return "?";
}

}  // namespace detail

/// Replaces the output sink. An empty sink restores the stderr default.
inline void set_sink(Sink sink) {
  auto& s = detail::state();
  std::lock_guard lock(s.mu);
  s.sink = std::move(sink);
}

inline void set_level(Level level) {
  auto& s = detail::state();
  std::lock_guard lock(s.mu);
  s.min_level = level;
}

inline void write(Level level, std::string_view msg) {
  auto& s = detail::state();
  std::lock_guard lock(s.mu);
  if (level < s.min_level) return;
  if (s.sink) {
    s.sink(level, msg);
  } else {
    std::cerr << detail::level_name(level) << " (sylcut) " << msg << '\n';
  }
}

inline void debug(std::string_view msg) { write(Level::kDebug, msg); }
inline void info(std::string_view msg) { write(Level::kInfo, msg); }
inline void warn(std::string_view msg) { write(Level::kWarning, msg); }
inline void error(std::string_view msg) { write(Level::kError, msg); }

}  // namespace sylcut::log

// Copyright 2026 paramfuzz project authors. All rights reserved.
// Use of this source code is governed by Apache 2 LICENSE that can be found in the LICENSE file.

#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace paramfuzz {

enum class CallKind { OpenDev, InvokeOp, WriteParam, SyzModDev };

inline const char* call_kind_name(CallKind k) {
  switch (k) {
    case CallKind::OpenDev: return "open_dev";
    case CallKind::InvokeOp: return "invoke_op";
    case CallKind::WriteParam: return "write_param";
    case CallKind::SyzModDev: return "syz_mod_dev";
  }
  return "?";
}

// One argument of an invoke_op call.
struct OpArgValue {
  bool is_str = false;
  int64_t i = 0;
  std::string s;
};

struct Call {
  CallKind kind = CallKind::WriteParam;
  std::string desc;   // descriptor name this call was instantiated from
  std::string path;   // write_param / syz_mod_dev parameter path (may contain '#')
  std::string value;  // parameter payload
  std::string dev;    // open_dev / syz_mod_dev device pattern
  std::string op;     // invoke_op entry point
  std::vector<OpArgValue> args;
  uint64_t seed = 0;            // syz_mod_dev co-selection serial
  std::string flags = "read_write";  // open mode: read | write | read_write
  int result = 0;  // produced fd id (OpenDev / SyzModDev), unique per case, > 0
  int fd = 0;      // consumed fd id (InvokeOp)
};

struct TestCase {
  std::vector<std::vector<Call>> threads;
  uint64_t schedule_seed = 0;

  size_t call_count() const {
    size_t n = 0;
    for (const auto& t : threads) n += t.size();
    return n;
  }
};

// TestCase shape limits (configurable caps live in the fuzzer config; these
// are the hard defaults).
inline constexpr int kMaxThreads = 4;
inline constexpr int kMaxCallsPerThread = 16;

inline bool well_formed(const TestCase& tc, int max_threads = kMaxThreads,
                        int max_calls = kMaxCallsPerThread) {
  if (tc.threads.empty() || tc.threads.size() > static_cast<size_t>(max_threads)) return false;
  std::vector<int> produced;
  for (const auto& t : tc.threads) {
    if (t.size() > static_cast<size_t>(max_calls)) return false;
    for (const auto& c : t) {
      if (c.result > 0) produced.push_back(c.result);
    }
  }
  for (const auto& t : tc.threads)
    for (const auto& c : t) {
      if (c.kind == CallKind::InvokeOp) {
        bool found = false;
        for (int p : produced)
          if (p == c.fd) found = true;
        if (!found) return false;
      }
    }
  return true;
}

}  // namespace paramfuzz

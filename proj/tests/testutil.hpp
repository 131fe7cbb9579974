// Copyright 2026 paramfuzz project authors. All rights reserved.
// Use of this source code is governed by Apache 2 LICENSE that can be found in the LICENSE file.

#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "paramfuzz/util.hpp"

namespace testutil {

inline std::string source_dir() { return PARAMFUZZ_SOURCE_DIR; }

inline std::string corpus_path(const std::string& name) {
  return source_dir() + "/corpus/" + name;
}

inline std::vector<std::string> corpus_files() {
  std::vector<std::string> out;
  for (const auto& e : std::filesystem::directory_iterator(source_dir() + "/corpus")) {
    if (e.path().extension() == ".dmir") out.push_back(e.path().string());
  }
  std::sort(out.begin(), out.end());
  return out;
}

inline std::string read_corpus(const std::string& name) {
  return paramfuzz::read_file(corpus_path(name));
}

}  // namespace testutil

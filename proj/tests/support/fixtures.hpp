#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "groundwork/corpus_io.hpp"

#ifndef GROUNDWORK_FIXTURES
#error "GROUNDWORK_FIXTURES must point at tests/fixtures"
#endif

namespace groundwork::testing {

inline std::filesystem::path fixture(const std::string& name) {
  return std::filesystem::path(GROUNDWORK_FIXTURES) / name;
}

inline DialogAnnotation load_dialog(const std::string& name) {
  return read_corpus(fixture(name)).dialogs.at(0);
}

inline std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Fresh scratch directory under the build tree.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("groundwork-test-" + name + "-" +
                                                       std::to_string(::getpid()));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace groundwork::testing

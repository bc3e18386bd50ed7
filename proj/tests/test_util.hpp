#pragma once

#include <unistd.h>

#include <filesystem>
#include <optional>
#include <string>
#include <utility>

#include "uabs/error.hpp"

namespace uabs::testing {

/// Runs fn and reports the category of the Error it throws, if any.
template <typename F>
std::optional<ErrorCategory> category_of(F&& fn) {
  try {
    std::forward<F>(fn)();
  } catch (const Error& e) {
    return e.category();
  }
  return std::nullopt;
}

/// Self-cleaning scratch directory under the system temp root.
struct TempDir {
  std::filesystem::path path;

  TempDir() {
    path = std::filesystem::temp_directory_path() /
           ("uabs_test_" + std::to_string(::getpid()) + "_" +
            std::to_string(counter()++));
    std::filesystem::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  std::filesystem::path file(const std::string& name) const { return path / name; }

 private:
  static int& counter() {
    static int n = 0;
    return n;
  }
};

}  // namespace uabs::testing

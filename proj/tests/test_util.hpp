#pragma once

#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "crcnet/rng.hpp"
#include "crcnet/survival.hpp"

namespace testutil {

inline bool contains(const std::string& haystack, const std::string& needle) {
  return haystack.find(needle) != std::string::npos;
}

// Random right-censored observations; times drawn from a small integer set
// when `tied` so tied times actually occur.
inline std::vector<crcnet::Observation> random_observations(std::size_t n,
                                                            crcnet::CounterRng& rng,
                                                            bool tied = true) {
  std::vector<crcnet::Observation> obs(n);
  for (auto& o : obs) {
    o.time = tied ? static_cast<double>(1 + rng.next_below(8))
                  : rng.next_exponential(0.1);
    o.event = rng.next_unit() < 0.65;
  }
  return obs;
}

struct TempDir {
  std::filesystem::path path;

  explicit TempDir(const std::string& tag) {
    path = std::filesystem::temp_directory_path() /
           ("crcnet_test_" + tag + "_" + std::to_string(::getpid()));
    std::filesystem::remove_all(path);
    std::filesystem::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
}

inline std::string read_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

}  // namespace testutil

#pragma once

#include <stdexcept>
#include <string>

namespace crcnet {

// Input file absent or unreadable. CLI maps this to exit code 2.
struct missing_input_error : std::runtime_error {
  explicit missing_input_error(const std::string& msg) : std::runtime_error(msg) {}
};

// File present but its header/format does not match the documented schema.
// CLI maps this to exit code 3.
struct schema_error : std::runtime_error {
  explicit schema_error(const std::string& msg) : std::runtime_error(msg) {}
};

// Bad run configuration (config file or flags). CLI maps this to exit code 4.
struct config_error : std::runtime_error {
  explicit config_error(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace crcnet

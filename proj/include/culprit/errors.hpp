#pragma once

#include <stdexcept>
#include <string>

namespace culprit {

// Input or contract violation (bad file, bad flag combination). CLI exit code 1.
class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

// Failure of the surrounding environment (git, filesystem, subprocess). CLI exit code 2.
class EnvironmentError : public std::runtime_error {
 public:
  explicit EnvironmentError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace culprit

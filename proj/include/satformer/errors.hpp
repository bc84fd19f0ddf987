#pragma once

#include <stdexcept>

namespace satformer {

// Filesystem-level failure; the CLI maps this to exit code 3.
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace satformer

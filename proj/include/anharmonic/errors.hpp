#pragma once

#include <stdexcept>
#include <string>

namespace anharmonic {

/// Raised when an iterative numerical procedure cannot meet its tolerance
/// within the configured resource caps, or when a certificate check fails.
class NumericalFailure : public std::runtime_error {
public:
    explicit NumericalFailure(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace anharmonic

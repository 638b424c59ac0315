#pragma once

#include <stdexcept>
#include <string>

namespace anisoperc {

// Invalid LatticeSpec, manifest field or option value.
class SpecError : public std::invalid_argument {
public:
  explicit SpecError(const std::string& what) : std::invalid_argument(what) {}
};

// Arguments outside the mathematical domain of an operation
// (p >= p_c for the threshold, non-comparable parameter pairs, ...).
class DomainError : public std::domain_error {
public:
  explicit DomainError(const std::string& what) : std::domain_error(what) {}
};

// Operation not defined for the requested lattice variant (e.g. coupling with s != 1).
class UnsupportedVariant : public std::logic_error {
public:
  explicit UnsupportedVariant(const std::string& what) : std::logic_error(what) {}
};

}  // namespace anisoperc

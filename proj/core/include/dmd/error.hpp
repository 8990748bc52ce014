#pragma once

#include <stdexcept>
#include <string>

namespace dmd {

enum class ErrorKind {
  Parse,       // malformed input files
  Structural,  // instance breaks a structural invariant (ids, routes, tree shape)
  Assumption,  // message network violates a standing assumption
  Domain,      // argument outside a valuation's domain
  Shape,       // profile components do not match the directory layout
  Config,      // inconsistent mechanism configuration
  Solver,      // oracle failed to converge
  Unbounded,   // a best response has no maximizer
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace dmd

#pragma once

#include <stdexcept>
#include <string>

namespace nematic {

struct ParseError : std::runtime_error {
  int line;
  ParseError(int line_, const std::string& what)
      : std::runtime_error("parse error (line " + std::to_string(line_) + "): " + what), line(line_) {}
};

struct ValidationError : std::runtime_error {
  std::string key;
  ValidationError(std::string key_, const std::string& what)
      : std::runtime_error("invalid '" + key_ + "': " + what), key(std::move(key_)) {}
};

struct UnknownExperiment : std::runtime_error {
  explicit UnknownExperiment(const std::string& name)
      : std::runtime_error("unknown experiment: " + name) {}
};

struct NoConvergence : std::runtime_error {
  int iterations;
  double residual;
  NoConvergence(const std::string& where, int it, double res)
      : std::runtime_error(where + " did not converge (iter " + std::to_string(it) +
                           ", residual " + std::to_string(res) + ")"),
        iterations(it), residual(res) {}
};

struct NewtonDiverged : std::runtime_error {
  NewtonDiverged(int it, double res)
      : std::runtime_error("director Newton diverged (iter " + std::to_string(it) +
                           ", residual " + std::to_string(res) + ")") {}
};

struct FixedPointDiverged : std::runtime_error {
  FixedPointDiverged(int it, double incr)
      : std::runtime_error("fixed-point loop exceeded max iterations (" + std::to_string(it) +
                           ", last increment " + std::to_string(incr) + ")") {}
};

struct IncompatibleCharges : std::runtime_error {
  explicit IncompatibleCharges(double net)
      : std::runtime_error("initial charges carry nonzero net mass: " + std::to_string(net)) {}
};

struct UnnormalizableDirector : std::runtime_error {
  explicit UnnormalizableDirector(int node)
      : std::runtime_error("director vanishes at node " + std::to_string(node) +
                           " and no fallback is configured") {}
};

struct StepTooLarge : std::runtime_error {
  explicit StepTooLarge(const std::string& what) : std::runtime_error(what) {}
};

struct IoError : std::runtime_error {
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace nematic

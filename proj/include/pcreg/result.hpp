#pragma once

#include <vector>

#include "pcreg/lie.hpp"

namespace pcreg {

/// Output of an iterative registration: G maps the source onto the template.
struct RegistrationResult {
  RigidTransform G;
  int iterations = 0;
  bool converged = false;
  std::vector<double> twist_norms;           // one entry per iteration
  std::vector<RigidTransform> transforms;    // G after each iteration
};

}  // namespace pcreg

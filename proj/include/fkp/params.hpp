#pragma once

#include <cmath>

#include "fkp/errors.hpp"

namespace fkp {

/// Physical parameters of (u_t + u u_x - D^alpha u_x)_x + sigma u_yy = 0
/// and of the travelling speed c of its line solitary waves.
struct FkpParams {
  double alpha = 2.0;
  int sigma = -1;  // -1: fKP-I, +1: fKP-II
  double c = 2.0;

  void validate() const {
    if (!(alpha > 1.0 / 3.0 && alpha <= 2.0))
      throw PreconditionError("alpha must be in (1/3, 2]");
    if (sigma != -1 && sigma != 1) throw PreconditionError("sigma must be -1 or +1");
    if (!(c > 0.0) || !std::isfinite(c)) throw PreconditionError("c must be positive");
  }
};

}  // namespace fkp

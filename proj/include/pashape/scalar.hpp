// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>

namespace pashape {

// Numeric value of a scalar of any differentiable type. The autodiff Var
// type adds its own overload in its namespace; templated code calls
// scalar_value() unqualified so the right one is found at instantiation.
inline double scalar_value(double x) { return x; }

constexpr double kInvLn2 = 1.4426950408889634074;  // 1/ln(2)

}  // namespace pashape

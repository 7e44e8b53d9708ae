#pragma once

// Iterative inversion: learning the inverse of a black-box map by repeated
// affine regression under input-distribution shift, its convergence
// certificates, and its application to learning control of a 2D point mass.

#include "itin/control.hpp"
#include "itin/csv.hpp"
#include "itin/errors.hpp"
#include "itin/intent.hpp"
#include "itin/inversion.hpp"
#include "itin/numkit.hpp"
#include "itin/particle.hpp"
#include "itin/policy.hpp"
#include "itin/rng.hpp"
#include "itin/theory.hpp"

namespace itin {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace itin

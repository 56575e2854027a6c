#pragma once

#include <functional>
#include <vector>

#include "dimml/tape.hpp"

namespace dimml {

// Builds a scalar loss from leaf Vars bound in the order of the parameter
// list. The same builder is evaluated both on a recording tape (analytic
// gradients) and on constants (central differences), so it must be a
// deterministic pure function of the parameters.
using LossBuilder = std::function<Var(Tape&, const std::vector<Var>&)>;

// Central-difference gradient verification. Returns the maximum over all
// parameter entries of |analytic - numeric| / max(1, |analytic|).
// Throws numeric_error if any evaluation is non-finite.
double finite_difference_check(const LossBuilder& fn, const std::vector<Tensor>& params,
                               double eps = 1e-5);

}  // namespace dimml

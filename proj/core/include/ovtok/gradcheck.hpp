#pragma once

#include <functional>
#include <vector>

#include "ovtok/graph.hpp"

namespace ovtok {

/// Builds the scalar loss on a fresh graph. Called repeatedly with perturbed
/// parameter values, so it must not cache graph state between calls.
using ScalarFn = std::function<TensorPtr(Graph&)>;

/// Central-difference gradient verification. Runs one analytic backward
/// pass, then perturbs every coordinate of every parameter by +/- eps and
/// compares. Returns the maximum relative error over all coordinates.
/// Throws if the function produces a non-finite value at any probe point.
double grad_check(const ScalarFn& f, const std::vector<TensorPtr>& params, double eps = 1e-5);

}  // namespace ovtok

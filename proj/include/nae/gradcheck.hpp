#pragma once

#include <functional>
#include <span>

#include "nae/tensor.hpp"

namespace nae {

// A scalar-valued function of tensors captured by the closure.
using ScalarFunction = std::function<Tensor(Tape&)>;

// Compares tape gradients of `f` with respect to every entry of `inputs` with
// central differences (f(x + eps) - f(x - eps)) / (2 eps). Returns the worst
// |numeric - analytic| / max(1, |analytic|). Inputs are restored afterwards and
// their gradients cleared.
double grad_check(const ScalarFunction& f, std::span<const Tensor> inputs, double eps = 1e-5);
double grad_check(const ScalarFunction& f, const Tensor& input, double eps = 1e-5);

}  // namespace nae

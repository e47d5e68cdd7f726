#include "nae/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "nae/errors.hpp"

namespace nae {

double grad_check(const ScalarFunction& f, std::span<const Tensor> inputs, double eps) {
  std::vector<bool> saved_flags;
  for (auto t : inputs) {
    saved_flags.push_back(t.requires_grad());
    t.set_requires_grad(true);
    t.zero_grad();
  }

  Tape tape;
  const Tensor loss = f(tape);
  if (loss.size() != 1) throw ContractError("grad_check: function must return a scalar");
  tape.backward(loss);

  auto evaluate = [&] {
    Tape scratch;
    return f(scratch).item();
  };

  double worst = 0.0;
  for (auto t : inputs) {
    const std::vector<double> analytic(t.grad().begin(), t.grad().end());
    auto values = t.values();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double original = values[i];
      values[i] = original + eps;
      const double plus = evaluate();
      values[i] = original - eps;
      const double minus = evaluate();
      values[i] = original;
      const double numeric = (plus - minus) / (2.0 * eps);
      const double err = std::abs(numeric - analytic[i]) / std::max(1.0, std::abs(analytic[i]));
      worst = std::max(worst, std::isfinite(err) ? err : INFINITY);
    }
  }

  for (std::size_t i = 0; i < inputs.size(); ++i) {
    Tensor t = inputs[i];
    t.zero_grad();
    t.set_requires_grad(saved_flags[i]);
  }
  return worst;
}

double grad_check(const ScalarFunction& f, const Tensor& input, double eps) {
  return grad_check(f, std::span<const Tensor>(&input, 1), eps);
}

}  // namespace nae

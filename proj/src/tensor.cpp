#include "nae/tensor.hpp"

#include <algorithm>
#include <sstream>

#include "nae/errors.hpp"

namespace nae {

std::size_t shape_size(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? " x " : "") << shape[i];
  os << ']';
  return os.str();
}

Tensor::Tensor(Shape shape, bool requires_grad) : data_(std::make_shared<Storage>()) {
  const auto n = shape_size(shape);
  data_->shape = std::move(shape);
  data_->values.assign(n, 0.0);
  data_->grad.assign(n, 0.0);
  data_->requires_grad = requires_grad;
}

Tensor::Tensor(Shape shape, std::vector<double> values, bool requires_grad)
    : data_(std::make_shared<Storage>()) {
  if (shape_size(shape) != values.size()) {
    throw DimensionError("tensor shape " + shape_str(shape) + " does not match " +
                         std::to_string(values.size()) + " values");
  }
  data_->grad.assign(values.size(), 0.0);
  data_->shape = std::move(shape);
  data_->values = std::move(values);
  data_->requires_grad = requires_grad;
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return Tensor({1}, {value}, requires_grad);
}

double Tensor::item() const {
  if (size() != 1) throw ContractError("item() on tensor of shape " + shape_str(shape()));
  return data_->values[0];
}

void Tensor::zero_grad() const { std::fill(data_->grad.begin(), data_->grad.end(), 0.0); }

Tensor Tensor::clone() const {
  Tensor copy;
  copy.data_ = std::make_shared<Storage>(*data_);
  return copy;
}

void Tape::record(Tensor output, std::function<void()> backward_rule) {
  nodes_.push_back({std::move(output), std::move(backward_rule)});
}

void Tape::backward(const Tensor& loss) {
  if (!loss.defined() || loss.size() != 1) {
    throw ContractError("backward() needs a scalar loss");
  }
  const bool on_tape = std::any_of(nodes_.begin(), nodes_.end(),
                                   [&](const Node& n) { return n.output.same_storage(loss); });
  if (!on_tape && !loss.requires_grad()) {
    throw ContractError("backward() loss was not produced on this tape");
  }
  for (auto& node : nodes_) node.output.zero_grad();
  Tensor seed = loss;
  seed.grad()[0] += 1.0;
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) it->backward_rule();
}

}  // namespace nae

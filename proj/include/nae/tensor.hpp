#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace nae {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_str(const Shape& shape);

// Dense row-major array of doubles with a gradient slot.
//
// Tensor is a handle: copies share storage, so an op recorded on a tape and the
// caller see the same values and gradients. Use clone() for an independent copy.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, bool requires_grad = false);
  Tensor(Shape shape, std::vector<double> values, bool requires_grad = false);

  static Tensor scalar(double value, bool requires_grad = false);

  bool defined() const noexcept { return static_cast<bool>(data_); }
  const Shape& shape() const { return data_->shape; }
  std::size_t rank() const { return data_->shape.size(); }
  std::size_t dim(std::size_t axis) const { return data_->shape.at(axis); }
  std::size_t size() const { return data_->values.size(); }

  std::span<double> values() { return data_->values; }
  std::span<const double> values() const { return data_->values; }
  // The gradient slot is writable through any handle; backward rules hold
  // const handles to their inputs.
  std::span<double> grad() const { return data_->grad; }

  double item() const;

  bool requires_grad() const { return data_->requires_grad; }
  void set_requires_grad(bool flag) { data_->requires_grad = flag; }
  void zero_grad() const;

  Tensor clone() const;
  bool same_storage(const Tensor& other) const { return data_ == other.data_; }

 private:
  struct Storage {
    Shape shape;
    std::vector<double> values;
    std::vector<double> grad;
    bool requires_grad = false;
  };
  std::shared_ptr<Storage> data_;
};

// Records differentiable operations in execution order and replays their
// adjoints in reverse. A tape is single-threaded; use one tape per thread.
class Tape {
 public:
  void record(Tensor output, std::function<void()> backward_rule);

  // Seeds d(loss)/d(loss) = 1 and runs every recorded backward rule in reverse
  // order. Intermediate gradients are reset first; leaf gradients accumulate,
  // so calling twice doubles them.
  void backward(const Tensor& loss);

  std::size_t size() const { return nodes_.size(); }
  void clear() { nodes_.clear(); }

 private:
  struct Node {
    Tensor output;
    std::function<void()> backward_rule;
  };
  std::vector<Node> nodes_;
};

}  // namespace nae

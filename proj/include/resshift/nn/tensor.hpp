#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace resshift::nn {

struct TensorImpl;

/// Dense 64-bit tensor with reverse-mode gradient tracking.
///
/// Tensors are reference-counted handles; copying a Tensor aliases the same
/// storage. Operations on tensors that require gradients record a backward
/// closure, and `backward()` on a scalar result walks the recorded graph in
/// reverse topological order, accumulating into `grad()` of every tensor that
/// requires it. Gradients accumulate until `zero_grad()`.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<int> shape, double fill = 0.0, bool requires_grad = false);
  Tensor(std::vector<int> shape, std::vector<double> data, bool requires_grad = false);

  bool defined() const { return impl_ != nullptr; }
  const std::vector<int>& shape() const;
  int dim(std::size_t i) const { return shape()[i]; }
  std::size_t rank() const { return shape().size(); }
  std::size_t numel() const;

  std::span<double> data();
  std::span<const double> data() const;
  // Allocated (zeroed) on first access.
  std::span<double> grad();
  std::span<const double> grad() const;
  bool has_grad() const;

  bool requires_grad() const;
  void set_requires_grad(bool on);

  double item() const;
  void backward();
  void zero_grad();

  TensorImpl* impl() const { return impl_.get(); }
  const std::shared_ptr<TensorImpl>& handle() const { return impl_; }

 private:
  explicit Tensor(std::shared_ptr<TensorImpl> impl) : impl_(std::move(impl)) {}
  friend Tensor make_result(std::vector<int> shape, std::vector<double> data,
                            std::vector<Tensor> parents,
                            std::function<void(TensorImpl&)> backward);

  std::shared_ptr<TensorImpl> impl_;
};

struct TensorImpl {
  std::vector<int> shape;
  std::vector<double> data;
  std::vector<double> grad;  // empty until needed
  bool requires_grad = false;
  std::vector<std::shared_ptr<TensorImpl>> parents;
  // Reads this node's grad and accumulates into parents' grads.
  std::function<void(TensorImpl&)> backward;

  std::vector<double>& ensure_grad() {
    if (grad.empty()) grad.assign(data.size(), 0.0);
    return grad;
  }
};

// Creates an op output. Records `backward` only when gradient mode is on and
// some parent requires grad.
Tensor make_result(std::vector<int> shape, std::vector<double> data,
                   std::vector<Tensor> parents, std::function<void(TensorImpl&)> backward);

std::size_t shape_numel(const std::vector<int>& shape);
std::string shape_str(const std::vector<int>& shape);

bool grad_enabled();

// Disables graph recording for its lifetime.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

}  // namespace resshift::nn

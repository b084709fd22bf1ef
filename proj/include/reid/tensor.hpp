#ifndef REID_TENSOR_HPP_
#define REID_TENSOR_HPP_

#include <functional>
#include <memory>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace reid {

// Dense double tensor with optional gradient buffer. Value-semantic handle
// over shared storage; ops create fresh outputs and, when a GradTape is
// active and an input requires grad, record how to push gradients back.
struct TensorImpl {
  std::vector<int> shape;
  std::vector<double> data;
  std::vector<double> grad;  // empty until backward allocates it
  bool requires_grad = false;
  std::string name;  // set on parameters, used in diagnostics
};

class Tensor {
 public:
  Tensor() = default;
  Tensor(std::vector<int> shape, double fill, bool requires_grad = false);

  static Tensor zeros(std::vector<int> shape, bool requires_grad = false);
  static Tensor from_data(std::vector<int> shape, std::vector<double> data,
                          bool requires_grad = false);
  static Tensor scalar(double v, bool requires_grad = false);

  bool defined() const { return impl_ != nullptr; }
  const std::vector<int>& shape() const { return impl_->shape; }
  int numel() const { return static_cast<int>(impl_->data.size()); }
  int dim(int i) const { return impl_->shape[static_cast<size_t>(i)]; }

  std::span<const double> data() const { return impl_->data; }
  double* mutable_data() { return impl_->data.data(); }
  double at(int i) const { return impl_->data[static_cast<size_t>(i)]; }
  double value() const;  // scalar accessor, checks numel()==1

  bool requires_grad() const { return impl_ && impl_->requires_grad; }
  void set_requires_grad(bool v) { impl_->requires_grad = v; }
  bool has_grad() const { return impl_ && !impl_->grad.empty(); }
  std::span<const double> grad() const { return impl_->grad; }
  void zero_grad();

  const std::string& name() const { return impl_->name; }
  void set_name(std::string n) { impl_->name = std::move(n); }

  const std::shared_ptr<TensorImpl>& impl() const { return impl_; }

 private:
  std::shared_ptr<TensorImpl> impl_;
};

// Ordered record of executed primitive ops. Ops self-record when a scope is
// active; backward() replays entries in reverse exactly once, then clears.
class GradTape {
 public:
  struct Entry {
    const char* op;
    std::vector<std::shared_ptr<TensorImpl>> tensors;  // inputs then output
    std::function<void()> backward;
  };

  static GradTape* current();

  void record(Entry e) { entries_.push_back(std::move(e)); }
  size_t size() const { return entries_.size(); }
  void clear() { entries_.clear(); }

 private:
  std::vector<Entry> entries_;
  friend void backward(const Tensor& loss);
  friend class TapeScope;
};

class TapeScope {
 public:
  explicit TapeScope(GradTape& tape);
  ~TapeScope();
  TapeScope(const TapeScope&) = delete;
  TapeScope& operator=(const TapeScope&) = delete;

 private:
  GradTape* previous_;
};

// Populates grads of every recorded tensor reachable from `loss` (others get
// zeros), then clears the tape. `loss` must be a scalar that requires grad.
void backward(const Tensor& loss);

enum class Padding { valid, same };

// elementwise / scalar
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor add_scalar(const Tensor& a, double c);
Tensor mul_scalar(const Tensor& a, double c);
Tensor relu(const Tensor& a);
Tensor leaky_relu(const Tensor& a, double slope);
Tensor tanh_t(const Tensor& a);
Tensor exp_t(const Tensor& a);
Tensor log_t(const Tensor& a);
Tensor sqrt_t(const Tensor& a);
Tensor abs_t(const Tensor& a);
Tensor softplus(const Tensor& a);

// reductions
Tensor sum_all(const Tensor& a);
Tensor mean_all(const Tensor& a);
Tensor mean_axis(const Tensor& a, int axis);
Tensor max_axis(const Tensor& a, int axis);

// structure
Tensor reshape(const Tensor& a, std::vector<int> shape);
Tensor transpose(const Tensor& a);              // 2-D
Tensor row_slice(const Tensor& a, int row);     // 2-D -> 1-D
Tensor div_scalar_t(const Tensor& a, const Tensor& s);  // s is 1-element
Tensor l2_normalize_rows(const Tensor& a, double eps);  // 2-D, per-row

// linear algebra / conv
Tensor matmul(const Tensor& a, const Tensor& b);  // 2-D
Tensor conv2d(const Tensor& input, const Tensor& weight, const Tensor& bias,
              int stride, Padding padding);
Tensor maxpool2x2(const Tensor& a);   // {C,H,W}, H and W even
Tensor upsample2x(const Tensor& a);   // {C,H,W} nearest-neighbor

// classification
Tensor softmax_cross_entropy(const Tensor& logits, int label);

// tape-free copy of the values (constant w.r.t. any later backward)
Tensor detach(const Tensor& a);

// SGD with classical momentum: v <- mu*v + g; p <- p - lr*v. Grads are
// zeroed after a step. Velocity is keyed per parameter instance.
class SgdOptimizer {
 public:
  SgdOptimizer(double learning_rate, double momentum);

  void step(const std::vector<Tensor>& params);
  double learning_rate() const { return lr_; }
  void set_learning_rate(double lr) { lr_ = lr; }

 private:
  double lr_;
  double momentum_;
  std::unordered_map<const TensorImpl*, std::vector<double>> velocity_;
};

}  // namespace reid

#endif  // REID_TENSOR_HPP_

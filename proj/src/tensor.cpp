#include "reid/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "reid/error.hpp"
#include "reid/kernels.hpp"

namespace reid {

namespace {

thread_local GradTape* g_current_tape = nullptr;

int shape_numel(const std::vector<int>& shape) {
  int n = 1;
  for (int d : shape) {
    check(d > 0, "tensor dimensions must be positive, got " + shape_str(shape));
    n *= d;
  }
  return n;
}

void ensure_finite(const char* op, const std::vector<double>& v) {
  for (double x : v)
    if (!std::isfinite(x))
      fail(std::string(op) + ": non-finite output value");
}

// zero-initialized grad buffer on demand; only requires_grad tensors get one
void alloc_grad(const std::shared_ptr<TensorImpl>& t) {
  if (t->requires_grad && t->grad.empty()) t->grad.assign(t->data.size(), 0.0);
}

bool tracing(std::initializer_list<const Tensor*> inputs) {
  if (!g_current_tape) return false;
  for (const Tensor* t : inputs)
    if (t->requires_grad()) return true;
  return false;
}

Tensor make_out(std::vector<int> shape, std::vector<double> data) {
  return Tensor::from_data(std::move(shape), std::move(data));
}

// marks output differentiable and records the entry
void record(const char* op, std::initializer_list<const Tensor*> inputs,
            const Tensor& out, std::function<void()> bwd) {
  GradTape::Entry e;
  e.op = op;
  for (const Tensor* t : inputs) e.tensors.push_back(t->impl());
  out.impl()->requires_grad = true;
  e.tensors.push_back(out.impl());
  e.backward = std::move(bwd);
  g_current_tape->record(std::move(e));
}

}  // namespace

// ------------------------------------------------------------- Tensor ----

Tensor::Tensor(std::vector<int> shape, double fill, bool requires_grad) {
  impl_ = std::make_shared<TensorImpl>();
  int n = shape_numel(shape);
  impl_->shape = std::move(shape);
  impl_->data.assign(static_cast<size_t>(n), fill);
  impl_->requires_grad = requires_grad;
}

Tensor Tensor::zeros(std::vector<int> shape, bool requires_grad) {
  return Tensor(std::move(shape), 0.0, requires_grad);
}

Tensor Tensor::from_data(std::vector<int> shape, std::vector<double> data,
                         bool requires_grad) {
  int n = shape_numel(shape);
  check(static_cast<size_t>(n) == data.size(),
        "tensor data length " + std::to_string(data.size()) +
            " does not match shape " + shape_str(shape));
  Tensor t;
  t.impl_ = std::make_shared<TensorImpl>();
  t.impl_->shape = std::move(shape);
  t.impl_->data = std::move(data);
  t.impl_->requires_grad = requires_grad;
  return t;
}

Tensor Tensor::scalar(double v, bool requires_grad) {
  return from_data({1}, {v}, requires_grad);
}

double Tensor::value() const {
  check(impl_ && impl_->data.size() == 1,
        "value(): tensor is not a scalar, shape " +
            (impl_ ? shape_str(impl_->shape) : std::string("<empty>")));
  return impl_->data[0];
}

void Tensor::zero_grad() {
  if (!impl_->grad.empty()) std::fill(impl_->grad.begin(), impl_->grad.end(), 0.0);
}

// ------------------------------------------------------------- GradTape --

GradTape* GradTape::current() { return g_current_tape; }

TapeScope::TapeScope(GradTape& tape) {
  previous_ = g_current_tape;
  g_current_tape = &tape;
}

TapeScope::~TapeScope() { g_current_tape = previous_; }

void backward(const Tensor& loss) {
  GradTape* tape = g_current_tape;
  check(tape != nullptr, "backward: no active gradient tape");
  check(loss.defined() && loss.numel() == 1,
        "backward: loss must be a scalar, got shape " +
            (loss.defined() ? shape_str(loss.shape()) : std::string("<empty>")));
  check(loss.requires_grad(), "backward: loss does not require grad");

  for (auto& e : tape->entries_)
    for (auto& t : e.tensors) alloc_grad(t);

  alloc_grad(loss.impl());
  loss.impl()->grad[0] = 1.0;

  // entries whose output grad is identically zero contribute nothing (every
  // backward rule is linear in the output grad), so skip their closures
  for (auto it = tape->entries_.rbegin(); it != tape->entries_.rend(); ++it) {
    const auto& out = it->tensors.back();
    bool live = false;
    for (double g : out->grad)
      if (g != 0.0) { live = true; break; }
    if (live) it->backward();
  }

  // the forward values were checked op by op; grads can still blow up
  std::unordered_set<const TensorImpl*> seen;
  for (auto& e : tape->entries_) {
    for (auto& t : e.tensors) {
      if (!t->requires_grad || !seen.insert(t.get()).second) continue;
      for (double g : t->grad)
        if (!std::isfinite(g)) fail(std::string(e.op) + ": non-finite gradient");
    }
  }
  tape->entries_.clear();
}

// ------------------------------------------------------- elementwise ops --

namespace {

template <typename Fwd>
Tensor binary_elementwise(const char* op, const Tensor& a, const Tensor& b,
                          Fwd fwd, std::function<void()> (*make_bwd)(
                              std::shared_ptr<TensorImpl>, std::shared_ptr<TensorImpl>,
                              std::shared_ptr<TensorImpl>)) {
  if (a.shape() != b.shape()) fail_shape(op, a.shape(), b.shape());
  std::vector<double> out(a.data().size());
  for (size_t i = 0; i < out.size(); ++i) out[i] = fwd(a.at(static_cast<int>(i)), b.at(static_cast<int>(i)));
  Tensor r = make_out(a.shape(), std::move(out));
  ensure_finite(op, r.impl()->data);
  if (tracing({&a, &b})) record(op, {&a, &b}, r, make_bwd(a.impl(), b.impl(), r.impl()));
  return r;
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  return binary_elementwise(
      "add", a, b, [](double x, double y) { return x + y; },
      [](std::shared_ptr<TensorImpl> ai, std::shared_ptr<TensorImpl> bi,
         std::shared_ptr<TensorImpl> oi) -> std::function<void()> {
        return [ai, bi, oi]() {
          for (size_t i = 0; i < oi->grad.size(); ++i) {
            if (ai->requires_grad) ai->grad[i] += oi->grad[i];
            if (bi->requires_grad) bi->grad[i] += oi->grad[i];
          }
        };
      });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return binary_elementwise(
      "sub", a, b, [](double x, double y) { return x - y; },
      [](std::shared_ptr<TensorImpl> ai, std::shared_ptr<TensorImpl> bi,
         std::shared_ptr<TensorImpl> oi) -> std::function<void()> {
        return [ai, bi, oi]() {
          for (size_t i = 0; i < oi->grad.size(); ++i) {
            if (ai->requires_grad) ai->grad[i] += oi->grad[i];
            if (bi->requires_grad) bi->grad[i] -= oi->grad[i];
          }
        };
      });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return binary_elementwise(
      "mul", a, b, [](double x, double y) { return x * y; },
      [](std::shared_ptr<TensorImpl> ai, std::shared_ptr<TensorImpl> bi,
         std::shared_ptr<TensorImpl> oi) -> std::function<void()> {
        return [ai, bi, oi]() {
          for (size_t i = 0; i < oi->grad.size(); ++i) {
            if (ai->requires_grad) ai->grad[i] += oi->grad[i] * bi->data[i];
            if (bi->requires_grad) bi->grad[i] += oi->grad[i] * ai->data[i];
          }
        };
      });
}

namespace {

// unary op with pointwise derivative computed from (x, y)
Tensor unary_elementwise(const char* op, const Tensor& a, double (*fwd)(double),
                         double (*dfdx)(double x, double y)) {
  std::vector<double> out(a.data().size());
  for (size_t i = 0; i < out.size(); ++i) out[i] = fwd(a.impl()->data[i]);
  Tensor r = make_out(a.shape(), std::move(out));
  ensure_finite(op, r.impl()->data);
  if (tracing({&a})) {
    auto ai = a.impl(); auto oi = r.impl();
    record(op, {&a}, r, [ai, oi, dfdx]() {
      for (size_t i = 0; i < oi->grad.size(); ++i)
        ai->grad[i] += oi->grad[i] * dfdx(ai->data[i], oi->data[i]);
    });
  }
  return r;
}

}  // namespace

Tensor add_scalar(const Tensor& a, double c) {
  std::vector<double> out(a.data().size());
  for (size_t i = 0; i < out.size(); ++i) out[i] = a.impl()->data[i] + c;
  Tensor r = make_out(a.shape(), std::move(out));
  ensure_finite("add_scalar", r.impl()->data);
  if (tracing({&a})) {
    auto ai = a.impl(); auto oi = r.impl();
    record("add_scalar", {&a}, r, [ai, oi]() {
      for (size_t i = 0; i < oi->grad.size(); ++i) ai->grad[i] += oi->grad[i];
    });
  }
  return r;
}

Tensor mul_scalar(const Tensor& a, double c) {
  std::vector<double> out(a.data().size());
  for (size_t i = 0; i < out.size(); ++i) out[i] = a.impl()->data[i] * c;
  Tensor r = make_out(a.shape(), std::move(out));
  ensure_finite("mul_scalar", r.impl()->data);
  if (tracing({&a})) {
    auto ai = a.impl(); auto oi = r.impl();
    record("mul_scalar", {&a}, r, [ai, oi, c]() {
      for (size_t i = 0; i < oi->grad.size(); ++i) ai->grad[i] += oi->grad[i] * c;
    });
  }
  return r;
}

Tensor relu(const Tensor& a) {
  return unary_elementwise(
      "relu", a, [](double x) { return x > 0.0 ? x : 0.0; },
      [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Tensor leaky_relu(const Tensor& a, double slope) {
  std::vector<double> out(a.data().size());
  for (size_t i = 0; i < out.size(); ++i) {
    double x = a.impl()->data[i];
    out[i] = x > 0.0 ? x : slope * x;
  }
  Tensor r = make_out(a.shape(), std::move(out));
  ensure_finite("leaky_relu", r.impl()->data);
  if (tracing({&a})) {
    auto ai = a.impl(); auto oi = r.impl();
    record("leaky_relu", {&a}, r, [ai, oi, slope]() {
      for (size_t i = 0; i < oi->grad.size(); ++i)
        ai->grad[i] += oi->grad[i] * (ai->data[i] > 0.0 ? 1.0 : slope);
    });
  }
  return r;
}

Tensor tanh_t(const Tensor& a) {
  return unary_elementwise(
      "tanh", a, [](double x) { return std::tanh(x); },
      [](double, double y) { return 1.0 - y * y; });
}

Tensor exp_t(const Tensor& a) {
  return unary_elementwise(
      "exp", a, [](double x) { return std::exp(x); },
      [](double, double y) { return y; });
}

Tensor log_t(const Tensor& a) {
  for (double x : a.data())
    check(x > 0.0, "log: input must be positive");
  return unary_elementwise(
      "log", a, [](double x) { return std::log(x); },
      [](double x, double) { return 1.0 / x; });
}

Tensor sqrt_t(const Tensor& a) {
  for (double x : a.data())
    check(x >= 0.0, "sqrt: input must be non-negative");
  // subgradient 0 at x == 0 keeps hinge-style losses clean at the floor
  return unary_elementwise(
      "sqrt", a, [](double x) { return std::sqrt(x); },
      [](double, double y) { return y > 0.0 ? 0.5 / y : 0.0; });
}

Tensor abs_t(const Tensor& a) {
  return unary_elementwise(
      "abs", a, [](double x) { return std::fabs(x); },
      [](double x, double) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); });
}

namespace {
double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  double e = std::exp(x);
  return e / (1.0 + e);
}
}  // namespace

Tensor softplus(const Tensor& a) {
  return unary_elementwise(
      "softplus", a,
      [](double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::fabs(x))); },
      [](double x, double) { return sigmoid(x); });
}

// --------------------------------------------------------- reductions ----

Tensor sum_all(const Tensor& a) {
  double acc = 0.0;
  for (double x : a.data()) acc += x;
  Tensor r = Tensor::scalar(acc);
  ensure_finite("sum", r.impl()->data);
  if (tracing({&a})) {
    auto ai = a.impl(); auto oi = r.impl();
    record("sum", {&a}, r, [ai, oi]() {
      for (size_t i = 0; i < ai->grad.size(); ++i) ai->grad[i] += oi->grad[0];
    });
  }
  return r;
}

Tensor mean_all(const Tensor& a) {
  double acc = 0.0;
  for (double x : a.data()) acc += x;
  const double inv = 1.0 / static_cast<double>(a.numel());
  Tensor r = Tensor::scalar(acc * inv);
  ensure_finite("mean", r.impl()->data);
  if (tracing({&a})) {
    auto ai = a.impl(); auto oi = r.impl();
    record("mean", {&a}, r, [ai, oi, inv]() {
      for (size_t i = 0; i < ai->grad.size(); ++i) ai->grad[i] += oi->grad[0] * inv;
    });
  }
  return r;
}

namespace {

struct AxisDims {
  int outer, n, inner;
};

AxisDims axis_dims(const char* op, const std::vector<int>& shape, int axis) {
  check(axis >= 0 && axis < static_cast<int>(shape.size()),
        std::string(op) + ": axis " + std::to_string(axis) +
            " out of range for shape " + shape_str(shape));
  AxisDims d{1, shape[static_cast<size_t>(axis)], 1};
  for (int i = 0; i < axis; ++i) d.outer *= shape[static_cast<size_t>(i)];
  for (size_t i = static_cast<size_t>(axis) + 1; i < shape.size(); ++i)
    d.inner *= shape[i];
  return d;
}

std::vector<int> drop_axis(const std::vector<int>& shape, int axis) {
  std::vector<int> out;
  for (int i = 0; i < static_cast<int>(shape.size()); ++i)
    if (i != axis) out.push_back(shape[static_cast<size_t>(i)]);
  if (out.empty()) out.push_back(1);
  return out;
}

}  // namespace

Tensor mean_axis(const Tensor& a, int axis) {
  AxisDims d = axis_dims("mean_axis", a.shape(), axis);
  std::vector<double> out(static_cast<size_t>(d.outer) * d.inner, 0.0);
  const double* src = a.data().data();
  for (int o = 0; o < d.outer; ++o)
    for (int j = 0; j < d.n; ++j)
      for (int i = 0; i < d.inner; ++i)
        out[static_cast<size_t>(o) * d.inner + i] +=
            src[(static_cast<size_t>(o) * d.n + j) * d.inner + i];
  const double inv = 1.0 / d.n;
  for (double& x : out) x *= inv;
  Tensor r = make_out(drop_axis(a.shape(), axis), std::move(out));
  ensure_finite("mean_axis", r.impl()->data);
  if (tracing({&a})) {
    auto ai = a.impl(); auto oi = r.impl();
    record("mean_axis", {&a}, r, [ai, oi, d, inv]() {
      for (int o = 0; o < d.outer; ++o)
        for (int j = 0; j < d.n; ++j)
          for (int i = 0; i < d.inner; ++i)
            ai->grad[(static_cast<size_t>(o) * d.n + j) * d.inner + i] +=
                oi->grad[static_cast<size_t>(o) * d.inner + i] * inv;
    });
  }
  return r;
}

Tensor max_axis(const Tensor& a, int axis) {
  AxisDims d = axis_dims("max_axis", a.shape(), axis);
  std::vector<double> out(static_cast<size_t>(d.outer) * d.inner);
  std::vector<int> argmax(out.size());
  const double* src = a.data().data();
  for (int o = 0; o < d.outer; ++o) {
    for (int i = 0; i < d.inner; ++i) {
      double best = src[(static_cast<size_t>(o) * d.n) * d.inner + i];
      int best_j = 0;
      for (int j = 1; j < d.n; ++j) {
        double v = src[(static_cast<size_t>(o) * d.n + j) * d.inner + i];
        if (v > best) { best = v; best_j = j; }
      }
      out[static_cast<size_t>(o) * d.inner + i] = best;
      argmax[static_cast<size_t>(o) * d.inner + i] = best_j;
    }
  }
  Tensor r = make_out(drop_axis(a.shape(), axis), std::move(out));
  ensure_finite("max_axis", r.impl()->data);
  if (tracing({&a})) {
    auto ai = a.impl(); auto oi = r.impl();
    record("max_axis", {&a}, r, [ai, oi, d, argmax = std::move(argmax)]() {
      for (int o = 0; o < d.outer; ++o)
        for (int i = 0; i < d.inner; ++i) {
          const size_t oidx = static_cast<size_t>(o) * d.inner + i;
          ai->grad[(static_cast<size_t>(o) * d.n + argmax[oidx]) * d.inner + i] +=
              oi->grad[oidx];
        }
    });
  }
  return r;
}

// ---------------------------------------------------------- structure ----

Tensor reshape(const Tensor& a, std::vector<int> shape) {
  check(shape_numel(shape) == a.numel(),
        "reshape: cannot view " + shape_str(a.shape()) + " as " + shape_str(shape));
  std::vector<double> out(a.data().begin(), a.data().end());
  Tensor r = make_out(std::move(shape), std::move(out));
  if (tracing({&a})) {
    auto ai = a.impl(); auto oi = r.impl();
    record("reshape", {&a}, r, [ai, oi]() {
      for (size_t i = 0; i < oi->grad.size(); ++i) ai->grad[i] += oi->grad[i];
    });
  }
  return r;
}

Tensor transpose(const Tensor& a) {
  check(a.shape().size() == 2, "transpose: expected 2-D, got " + shape_str(a.shape()));
  const int m = a.dim(0), n = a.dim(1);
  std::vector<double> out(static_cast<size_t>(m) * n);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j)
      out[static_cast<size_t>(j) * m + i] = a.impl()->data[static_cast<size_t>(i) * n + j];
  Tensor r = make_out({n, m}, std::move(out));
  if (tracing({&a})) {
    auto ai = a.impl(); auto oi = r.impl();
    record("transpose", {&a}, r, [ai, oi, m, n]() {
      for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j)
          ai->grad[static_cast<size_t>(i) * n + j] += oi->grad[static_cast<size_t>(j) * m + i];
    });
  }
  return r;
}

Tensor row_slice(const Tensor& a, int row) {
  check(a.shape().size() == 2, "row_slice: expected 2-D, got " + shape_str(a.shape()));
  const int m = a.dim(0), n = a.dim(1);
  check(row >= 0 && row < m, "row_slice: row " + std::to_string(row) +
                                 " out of range for " + shape_str(a.shape()));
  std::vector<double> out(a.data().begin() + static_cast<size_t>(row) * n,
                          a.data().begin() + static_cast<size_t>(row + 1) * n);
  Tensor r = make_out({n}, std::move(out));
  if (tracing({&a})) {
    auto ai = a.impl(); auto oi = r.impl();
    record("row_slice", {&a}, r, [ai, oi, row, n]() {
      for (int j = 0; j < n; ++j)
        ai->grad[static_cast<size_t>(row) * n + j] += oi->grad[static_cast<size_t>(j)];
    });
  }
  return r;
}

Tensor div_scalar_t(const Tensor& a, const Tensor& s) {
  check(s.numel() == 1, "div_scalar: divisor must be a scalar tensor");
  const double sv = s.at(0);
  check(sv != 0.0, "div_scalar: division by zero");
  std::vector<double> out(a.data().size());
  for (size_t i = 0; i < out.size(); ++i) out[i] = a.impl()->data[i] / sv;
  Tensor r = make_out(a.shape(), std::move(out));
  ensure_finite("div_scalar", r.impl()->data);
  if (tracing({&a, &s})) {
    auto ai = a.impl(); auto si = s.impl(); auto oi = r.impl();
    record("div_scalar", {&a, &s}, r, [ai, si, oi, sv]() {
      double s_acc = 0.0;
      for (size_t i = 0; i < oi->grad.size(); ++i) {
        if (ai->requires_grad) ai->grad[i] += oi->grad[i] / sv;
        s_acc += oi->grad[i] * ai->data[i];
      }
      if (si->requires_grad) si->grad[0] -= s_acc / (sv * sv);
    });
  }
  return r;
}

Tensor l2_normalize_rows(const Tensor& a, double eps) {
  check(a.shape().size() == 2, "l2_normalize_rows: expected 2-D, got " + shape_str(a.shape()));
  const int m = a.dim(0), n = a.dim(1);
  std::vector<double> out(static_cast<size_t>(m) * n);
  std::vector<double> norms(static_cast<size_t>(m));
  for (int i = 0; i < m; ++i) {
    const double* row = a.data().data() + static_cast<size_t>(i) * n;
    double s = 0.0;
    for (int j = 0; j < n; ++j) s += row[j] * row[j];
    const double norm = std::sqrt(s + eps);
    norms[static_cast<size_t>(i)] = norm;
    for (int j = 0; j < n; ++j) out[static_cast<size_t>(i) * n + j] = row[j] / norm;
  }
  Tensor r = make_out(a.shape(), std::move(out));
  ensure_finite("l2_normalize_rows", r.impl()->data);
  if (tracing({&a})) {
    auto ai = a.impl(); auto oi = r.impl();
    record("l2_normalize_rows", {&a}, r, [ai, oi, m, n, norms = std::move(norms)]() {
      for (int i = 0; i < m; ++i) {
        const double* v = ai->data.data() + static_cast<size_t>(i) * n;
        const double* g = oi->grad.data() + static_cast<size_t>(i) * n;
        double* gv = ai->grad.data() + static_cast<size_t>(i) * n;
        const double norm = norms[static_cast<size_t>(i)];
        double dot = 0.0;
        for (int j = 0; j < n; ++j) dot += g[j] * v[j];
        const double inv = 1.0 / norm;
        const double inv3 = inv * inv * inv;
        for (int j = 0; j < n; ++j) gv[j] += g[j] * inv - v[j] * dot * inv3;
      }
    });
  }
  return r;
}

// ------------------------------------------------------ linear algebra ---

Tensor matmul(const Tensor& a, const Tensor& b) {
  check(a.shape().size() == 2 && b.shape().size() == 2,
        "matmul: expected 2-D operands, got " + shape_str(a.shape()) + " and " +
            shape_str(b.shape()));
  if (a.dim(1) != b.dim(0)) fail_shape("matmul", a.shape(), b.shape());
  const int m = a.dim(0), k = a.dim(1), n = b.dim(1);
  std::vector<double> out(static_cast<size_t>(m) * n);
  kernels::matmul(a.data().data(), b.data().data(), out.data(), m, k, n);
  Tensor r = make_out({m, n}, std::move(out));
  ensure_finite("matmul", r.impl()->data);
  if (tracing({&a, &b})) {
    auto ai = a.impl(); auto bi = b.impl(); auto oi = r.impl();
    record("matmul", {&a, &b}, r, [ai, bi, oi, m, k, n]() {
      if (ai->requires_grad) {
        std::vector<double> tmp(static_cast<size_t>(m) * k);
        kernels::matmul_nt(oi->grad.data(), bi->data.data(), tmp.data(), m, n, k);
        for (size_t i = 0; i < tmp.size(); ++i) ai->grad[i] += tmp[i];
      }
      if (bi->requires_grad) {
        std::vector<double> tmp(static_cast<size_t>(k) * n);
        kernels::matmul_tn(ai->data.data(), oi->grad.data(), tmp.data(), k, m, n);
        for (size_t i = 0; i < tmp.size(); ++i) bi->grad[i] += tmp[i];
      }
    });
  }
  return r;
}

namespace {

kernels::Conv2dDims conv_dims(const Tensor& input, const Tensor& weight,
                              int stride, Padding padding) {
  check(input.shape().size() == 3,
        "conv2d: input must be {C,H,W}, got " + shape_str(input.shape()));
  check(weight.shape().size() == 4,
        "conv2d: weight must be {Cout,Cin,kh,kw}, got " + shape_str(weight.shape()));
  check(stride >= 1, "conv2d: stride must be >= 1");
  if (input.dim(0) != weight.dim(1)) fail_shape("conv2d", input.shape(), weight.shape());
  kernels::Conv2dDims d;
  d.in_c = input.dim(0); d.in_h = input.dim(1); d.in_w = input.dim(2);
  d.out_c = weight.dim(0); d.kh = weight.dim(2); d.kw = weight.dim(3);
  d.stride = stride;
  if (padding == Padding::valid) {
    check(d.in_h >= d.kh && d.in_w >= d.kw,
          "conv2d: kernel larger than input for valid padding");
    d.out_h = (d.in_h - d.kh) / stride + 1;
    d.out_w = (d.in_w - d.kw) / stride + 1;
    d.pad_top = d.pad_left = 0;
  } else {
    d.out_h = (d.in_h + stride - 1) / stride;
    d.out_w = (d.in_w + stride - 1) / stride;
    const int pad_h = std::max(0, (d.out_h - 1) * stride + d.kh - d.in_h);
    const int pad_w = std::max(0, (d.out_w - 1) * stride + d.kw - d.in_w);
    d.pad_top = pad_h / 2;
    d.pad_left = pad_w / 2;
  }
  return d;
}

}  // namespace

Tensor conv2d(const Tensor& input, const Tensor& weight, const Tensor& bias,
              int stride, Padding padding) {
  kernels::Conv2dDims d = conv_dims(input, weight, stride, padding);
  check(bias.shape() == std::vector<int>{d.out_c},
        "conv2d: bias shape " + shape_str(bias.shape()) + " must be {" +
            std::to_string(d.out_c) + "}");
  std::vector<double> out(static_cast<size_t>(d.out_c) * d.out_h * d.out_w);
  kernels::conv2d_forward(input.data().data(), weight.data().data(),
                          bias.data().data(), out.data(), d);
  Tensor r = make_out({d.out_c, d.out_h, d.out_w}, std::move(out));
  ensure_finite("conv2d", r.impl()->data);
  if (tracing({&input, &weight, &bias})) {
    auto ii = input.impl(); auto wi = weight.impl(); auto bi = bias.impl();
    auto oi = r.impl();
    record("conv2d", {&input, &weight, &bias}, r, [ii, wi, bi, oi, d]() {
      if (ii->requires_grad)
        kernels::conv2d_backward_input(oi->grad.data(), wi->data.data(),
                                       ii->grad.data(), d);
      if (wi->requires_grad || bi->requires_grad) {
        std::vector<double> gw(wi->data.size(), 0.0);
        std::vector<double> gb(bi->data.size(), 0.0);
        kernels::conv2d_backward_weight(oi->grad.data(), ii->data.data(),
                                        gw.data(), gb.data(), d);
        if (wi->requires_grad)
          for (size_t i = 0; i < gw.size(); ++i) wi->grad[i] += gw[i];
        if (bi->requires_grad)
          for (size_t i = 0; i < gb.size(); ++i) bi->grad[i] += gb[i];
      }
    });
  }
  return r;
}

Tensor maxpool2x2(const Tensor& a) {
  check(a.shape().size() == 3, "maxpool2x2: input must be {C,H,W}, got " + shape_str(a.shape()));
  const int c = a.dim(0), h = a.dim(1), w = a.dim(2);
  check(h % 2 == 0 && w % 2 == 0, "maxpool2x2: spatial dims must be even, got " + shape_str(a.shape()));
  const int oh = h / 2, ow = w / 2;
  std::vector<double> out(static_cast<size_t>(c) * oh * ow);
  std::vector<int> arg(out.size());
  const double* src = a.data().data();
  for (int ch = 0; ch < c; ++ch) {
    const double* plane = src + static_cast<size_t>(ch) * h * w;
    for (int y = 0; y < oh; ++y) {
      for (int x = 0; x < ow; ++x) {
        int base = (2 * y) * w + 2 * x;
        int cand[4] = {base, base + 1, base + w, base + w + 1};
        int best = cand[0];
        for (int t = 1; t < 4; ++t)
          if (plane[cand[t]] > plane[best]) best = cand[t];
        const size_t oidx = (static_cast<size_t>(ch) * oh + y) * ow + x;
        out[oidx] = plane[best];
        arg[oidx] = best;
      }
    }
  }
  Tensor r = make_out({c, oh, ow}, std::move(out));
  if (tracing({&a})) {
    auto ai = a.impl(); auto oi = r.impl();
    record("maxpool2x2", {&a}, r, [ai, oi, c, h, w, oh, ow, arg = std::move(arg)]() {
      for (int ch = 0; ch < c; ++ch) {
        double* gplane = ai->grad.data() + static_cast<size_t>(ch) * h * w;
        for (int t = 0; t < oh * ow; ++t) {
          const size_t oidx = static_cast<size_t>(ch) * oh * ow + t;
          gplane[arg[oidx]] += oi->grad[oidx];
        }
      }
    });
  }
  return r;
}

Tensor upsample2x(const Tensor& a) {
  check(a.shape().size() == 3, "upsample2x: input must be {C,H,W}, got " + shape_str(a.shape()));
  const int c = a.dim(0), h = a.dim(1), w = a.dim(2);
  const int oh = 2 * h, ow = 2 * w;
  std::vector<double> out(static_cast<size_t>(c) * oh * ow);
  const double* src = a.data().data();
  for (int ch = 0; ch < c; ++ch)
    for (int y = 0; y < oh; ++y)
      for (int x = 0; x < ow; ++x)
        out[(static_cast<size_t>(ch) * oh + y) * ow + x] =
            src[(static_cast<size_t>(ch) * h + y / 2) * w + x / 2];
  Tensor r = make_out({c, oh, ow}, std::move(out));
  if (tracing({&a})) {
    auto ai = a.impl(); auto oi = r.impl();
    record("upsample2x", {&a}, r, [ai, oi, c, h, w, oh, ow]() {
      for (int ch = 0; ch < c; ++ch)
        for (int y = 0; y < oh; ++y)
          for (int x = 0; x < ow; ++x)
            ai->grad[(static_cast<size_t>(ch) * h + y / 2) * w + x / 2] +=
                oi->grad[(static_cast<size_t>(ch) * oh + y) * ow + x];
    });
  }
  return r;
}

// ------------------------------------------------------ classification ---

Tensor softmax_cross_entropy(const Tensor& logits, int label) {
  check(logits.shape().size() == 1,
        "softmax_cross_entropy: logits must be 1-D, got " + shape_str(logits.shape()));
  const int n = logits.dim(0);
  check(label >= 0 && label < n,
        "softmax_cross_entropy: label " + std::to_string(label) +
            " out of range for " + std::to_string(n) + " classes");
  const double* z = logits.data().data();
  double zmax = z[0];
  for (int i = 1; i < n; ++i) zmax = std::max(zmax, z[i]);
  double sum = 0.0;
  for (int i = 0; i < n; ++i) sum += std::exp(z[i] - zmax);
  const double lse = zmax + std::log(sum);
  Tensor r = Tensor::scalar(lse - z[label]);
  ensure_finite("softmax_cross_entropy", r.impl()->data);
  if (tracing({&logits})) {
    auto li = logits.impl(); auto oi = r.impl();
    record("softmax_cross_entropy", {&logits}, r, [li, oi, n, label, zmax, sum]() {
      const double g = oi->grad[0];
      for (int i = 0; i < n; ++i) {
        double p = std::exp(li->data[static_cast<size_t>(i)] - zmax) / sum;
        li->grad[static_cast<size_t>(i)] += g * (p - (i == label ? 1.0 : 0.0));
      }
    });
  }
  return r;
}

Tensor detach(const Tensor& a) {
  std::vector<double> copy(a.data().begin(), a.data().end());
  return Tensor::from_data(a.shape(), std::move(copy));
}

// ------------------------------------------------------------ optimizer --

SgdOptimizer::SgdOptimizer(double learning_rate, double momentum)
    : lr_(learning_rate), momentum_(momentum) {
  check(learning_rate >= 0.0, "sgd: learning rate must be >= 0");
  check(momentum >= 0.0 && momentum < 1.0, "sgd: momentum must be in [0,1)");
}

void SgdOptimizer::step(const std::vector<Tensor>& params) {
  for (const Tensor& p : params) {
    check(p.has_grad(), "sgd_step: parameter '" +
                            (p.name().empty() ? std::string("<unnamed>") : p.name()) +
                            "' has no gradient");
  }
  for (const Tensor& p : params) {
    TensorImpl* impl = p.impl().get();
    auto& v = velocity_[impl];
    if (v.empty()) v.assign(impl->data.size(), 0.0);
    for (size_t i = 0; i < impl->data.size(); ++i) {
      v[i] = momentum_ * v[i] + impl->grad[i];
      impl->data[i] -= lr_ * v[i];
    }
    std::fill(impl->grad.begin(), impl->grad.end(), 0.0);
  }
}

}  // namespace reid

#include "fcdm/tensor.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numbers>
#include <numeric>
#include <sstream>

#include "fcdm/error.hpp"
#include "fcdm/fft.hpp"

namespace fcdm {

struct Tensor::Impl {
  Shape shape;
  DType dtype = DType::f64;
  std::vector<double> data;
  bool requires_grad = false;
  std::uint64_t id = 0;
};

namespace {

std::atomic<std::uint64_t> g_next_id{1};
thread_local Tape* g_active_tape = nullptr;

double round_to(DType dtype, double v) {
  return dtype == DType::f32 ? static_cast<double>(static_cast<float>(v)) : v;
}

[[noreturn]] void violation(const std::string& what) { throw ContractViolation(what); }

void require_same_shape(std::string_view op, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    violation(std::string(op) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
              shape_string(b.shape()));
  }
}

void require_rank(std::string_view op, const Tensor& a, std::size_t rank) {
  if (a.rank() != rank) {
    violation(std::string(op) + ": expected rank " + std::to_string(rank) + ", got " +
              shape_string(a.shape()));
  }
}

DType result_dtype(std::span<const Tensor> inputs) {
  for (const Tensor& t : inputs) {
    if (t.dtype() == DType::f64) return DType::f64;
  }
  return inputs.empty() ? DType::f64 : DType::f32;
}

bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

}  // namespace

Tensor make_result(Shape shape, std::vector<double> data, DType dtype, bool requires_grad) {
  if (shape_numel(shape) != data.size()) {
    violation("tensor: shape " + shape_string(shape) + " does not match " +
              std::to_string(data.size()) + " values");
  }
  for (std::size_t extent : shape) {
    if (extent == 0) violation("tensor: zero extent in shape " + shape_string(shape));
  }
  if (dtype == DType::f32) {
    for (double& v : data) v = round_to(dtype, v);
  }
  auto impl = std::make_shared<Tensor::Impl>();
  impl->shape = std::move(shape);
  impl->dtype = dtype;
  impl->data = std::move(data);
  impl->requires_grad = requires_grad;
  impl->id = g_next_id.fetch_add(1, std::memory_order_relaxed);
  return Tensor(std::move(impl));
}

namespace {

/// Builds the output of a primitive and records it when any input is
/// tracked and a tape is active.
Tensor finish(std::string name, std::vector<Tensor> inputs, Shape shape, std::vector<double> data,
              Vjp vjp) {
  const DType dtype = result_dtype(inputs);
#ifndef NDEBUG
  if (!all_finite(data)) {
    bool inputs_finite = true;
    for (const Tensor& t : inputs) inputs_finite = inputs_finite && all_finite(t.data());
    if (inputs_finite) throw NumericalError(name + ": non-finite output from finite inputs");
  }
#endif
  Tape* tape = g_active_tape;
  bool tracked = false;
  if (tape != nullptr) {
    for (const Tensor& t : inputs) tracked = tracked || t.requires_grad();
  }
  Tensor out = make_result(std::move(shape), std::move(data), dtype, tracked);
  if (tracked) {
    Tape::Entry entry;
    entry.primitive = std::move(name);
    for (const Tensor& t : inputs) {
      entry.inputs.push_back(t.id());
      entry.input_requires_grad.push_back(t.requires_grad());
    }
    entry.output = out.id();
    entry.output_numel = out.numel();
    entry.vjp = std::move(vjp);
    tape->record(std::move(entry));
  }
  return out;
}

}  // namespace

std::string to_string(DType dtype) { return dtype == DType::f32 ? "f32" : "f64"; }

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ']';
  return os.str();
}

std::size_t shape_numel(const Shape& shape) {
  if (shape.empty()) return 0;
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

// --- Tensor ----------------------------------------------------------------

Tensor::Tensor() = default;

Tensor Tensor::from(Shape shape, std::vector<double> data, DType dtype, bool requires_grad) {
  return make_result(std::move(shape), std::move(data), dtype, requires_grad);
}

Tensor Tensor::zeros(Shape shape, DType dtype) { return full(std::move(shape), 0.0, dtype); }

Tensor Tensor::full(Shape shape, double value, DType dtype) {
  const std::size_t n = shape_numel(shape);
  return make_result(std::move(shape), std::vector<double>(n, value), dtype, false);
}

Tensor Tensor::scalar(double value, DType dtype) { return full({1}, value, dtype); }

Tensor Tensor::as_parameter() const {
  return make_result(shape(), std::vector<double>(data().begin(), data().end()), dtype(), true);
}

Tensor Tensor::detach() const {
  return make_result(shape(), std::vector<double>(data().begin(), data().end()), dtype(), false);
}

const Tensor::Impl& Tensor::checked(const std::shared_ptr<const Impl>& p) {
  if (!p) violation("use of an empty tensor handle");
  return *p;
}

const Shape& Tensor::shape() const { return checked(impl_).shape; }
std::size_t Tensor::dim(std::size_t axis) const {
  if (axis >= rank()) violation("axis " + std::to_string(axis) + " out of range for " + shape_string(shape()));
  return shape()[axis];
}
std::size_t Tensor::numel() const { return checked(impl_).data.size(); }
DType Tensor::dtype() const { return checked(impl_).dtype; }
bool Tensor::requires_grad() const { return checked(impl_).requires_grad; }
std::uint64_t Tensor::id() const { return checked(impl_).id; }
std::span<const double> Tensor::data() const { return checked(impl_).data; }

double Tensor::item() const {
  if (numel() != 1) violation("item(): tensor has shape " + shape_string(shape()));
  return data()[0];
}

// --- Tape ------------------------------------------------------------------

Tensor Gradients::of(const Tensor& t) const {
  auto it = grads_.find(t.id());
  if (it == grads_.end()) return Tensor::zeros(t.shape());
  return Tensor::from(t.shape(), it->second);
}

void Tape::record(Entry entry) {
  index_[entry.output] = entries_.size();
  entries_.push_back(std::move(entry));
}

Gradients Tape::backward(const Tensor& loss) {
  if (loss.numel() != 1) violation("backward: loss must be scalar, got " + shape_string(loss.shape()));
  if (consumed_) violation("backward: tape already consumed");
  auto found = index_.find(loss.id());
  if (found == index_.end()) violation("backward: loss was not recorded on this tape");
  consumed_ = true;

  Gradients result;
  auto& grads = result.grads_;
  grads[loss.id()] = {1.0};
  for (std::size_t i = found->second + 1; i-- > 0;) {
    const Entry& e = entries_[i];
    auto git = grads.find(e.output);
    if (git == grads.end()) continue;
    std::vector<std::vector<double>> in_grads = e.vjp(git->second);
    for (std::size_t k = 0; k < e.inputs.size(); ++k) {
      if (!e.input_requires_grad[k] || in_grads[k].empty()) continue;
      auto& acc = grads[e.inputs[k]];
      if (acc.empty()) {
        acc = std::move(in_grads[k]);
      } else {
        for (std::size_t j = 0; j < acc.size(); ++j) acc[j] += in_grads[k][j];
      }
    }
  }
  return result;
}

TapeScope::TapeScope(Tape& tape) : previous_(g_active_tape) { g_active_tape = &tape; }
TapeScope::~TapeScope() { g_active_tape = previous_; }

Tape* active_tape() { return g_active_tape; }

Gradients backward(const Tensor& loss) {
  if (g_active_tape == nullptr) violation("backward: no active tape");
  return g_active_tape->backward(loss);
}

// --- Elementwise and reductions -------------------------------------------

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape("add", a, b);
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] + b[i];
  return finish("add", {a, b}, a.shape(), std::move(out), [](std::span<const double> g) {
    std::vector<double> v(g.begin(), g.end());
    return std::vector<std::vector<double>>{v, v};
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape("sub", a, b);
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] - b[i];
  return finish("sub", {a, b}, a.shape(), std::move(out), [](std::span<const double> g) {
    std::vector<double> neg(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) neg[i] = -g[i];
    return std::vector<std::vector<double>>{{g.begin(), g.end()}, std::move(neg)};
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  const bool a_scalar = a.numel() == 1 && b.numel() != 1;
  const bool b_scalar = b.numel() == 1 && a.numel() != 1;
  if (!a_scalar && !b_scalar) require_same_shape("mul", a, b);
  const Tensor& big = a_scalar ? b : a;
  const std::size_t n = big.numel();
  auto av = [&](std::size_t i) { return a_scalar ? a[0] : a[i]; };
  auto bv = [&](std::size_t i) { return b_scalar ? b[0] : b[i]; };
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = av(i) * bv(i);
  return finish("mul", {a, b}, big.shape(), std::move(out),
                [a, b, a_scalar, b_scalar, n](std::span<const double> g) {
                  std::vector<double> ga(a.numel(), 0.0), gb(b.numel(), 0.0);
                  for (std::size_t i = 0; i < n; ++i) {
                    const double ai = a_scalar ? a[0] : a[i];
                    const double bi = b_scalar ? b[0] : b[i];
                    ga[a_scalar ? 0 : i] += g[i] * bi;
                    gb[b_scalar ? 0 : i] += g[i] * ai;
                  }
                  return std::vector<std::vector<double>>{std::move(ga), std::move(gb)};
                });
}

Tensor scale(const Tensor& a, double factor) {
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] * factor;
  return finish("scale", {a}, a.shape(), std::move(out), [factor](std::span<const double> g) {
    std::vector<double> v(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) v[i] = g[i] * factor;
    return std::vector<std::vector<double>>{std::move(v)};
  });
}

Tensor sum(const Tensor& a) {
  double s = 0.0;
  for (double v : a.data()) s += v;
  const std::size_t n = a.numel();
  return finish("sum", {a}, {1}, {s}, [n](std::span<const double> g) {
    return std::vector<std::vector<double>>{std::vector<double>(n, g[0])};
  });
}

Tensor mean(const Tensor& a) {
  double s = 0.0;
  for (double v : a.data()) s += v;
  const std::size_t n = a.numel();
  const double inv = 1.0 / static_cast<double>(n);
  return finish("mean", {a}, {1}, {s * inv}, [n, inv](std::span<const double> g) {
    return std::vector<std::vector<double>>{std::vector<double>(n, g[0] * inv)};
  });
}

Tensor square(const Tensor& a) {
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] * a[i];
  return finish("square", {a}, a.shape(), std::move(out), [a](std::span<const double> g) {
    std::vector<double> v(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) v[i] = 2.0 * a[i] * g[i];
    return std::vector<std::vector<double>>{std::move(v)};
  });
}

Tensor matvec(const Tensor& matrix, const Tensor& vec) {
  require_rank("matvec", matrix, 2);
  require_rank("matvec", vec, 1);
  const std::size_t m = matrix.dim(0), n = matrix.dim(1);
  if (vec.dim(0) != n) {
    violation("matvec: shape mismatch " + shape_string(matrix.shape()) + " x " + shape_string(vec.shape()));
  }
  std::vector<double> out(m, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) s += matrix[i * n + j] * vec[j];
    out[i] = s;
  }
  return finish("matvec", {matrix, vec}, {m}, std::move(out), [matrix, vec, m, n](std::span<const double> g) {
    std::vector<double> gm(m * n), gv(n, 0.0);
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        gm[i * n + j] = g[i] * vec[j];
        gv[j] += g[i] * matrix[i * n + j];
      }
    }
    return std::vector<std::vector<double>>{std::move(gm), std::move(gv)};
  });
}

Tensor reshape(const Tensor& a, Shape shape) {
  if (shape_numel(shape) != a.numel()) {
    violation("reshape: cannot view " + shape_string(a.shape()) + " as " + shape_string(shape));
  }
  std::vector<double> out(a.data().begin(), a.data().end());
  return finish("reshape", {a}, std::move(shape), std::move(out), [](std::span<const double> g) {
    return std::vector<std::vector<double>>{{g.begin(), g.end()}};
  });
}

// --- Activations -------------------------------------------------------------

namespace {
constexpr double kGeluC = 0.7978845608028654;  // sqrt(2 / pi)
constexpr double kGeluA = 0.044715;
}  // namespace

Tensor gelu(const Tensor& a) {
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double x = a[i];
    out[i] = 0.5 * x * (1.0 + std::tanh(kGeluC * (x + kGeluA * x * x * x)));
  }
  return finish("gelu", {a}, a.shape(), std::move(out), [a](std::span<const double> g) {
    std::vector<double> v(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double x = a[i];
      const double t = std::tanh(kGeluC * (x + kGeluA * x * x * x));
      const double dt = (1.0 - t * t) * kGeluC * (1.0 + 3.0 * kGeluA * x * x);
      v[i] = g[i] * (0.5 * (1.0 + t) + 0.5 * x * dt);
    }
    return std::vector<std::vector<double>>{std::move(v)};
  });
}

Tensor sigmoid(const Tensor& a) {
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = 1.0 / (1.0 + std::exp(-a[i]));
  std::vector<double> saved = out;
  return finish("sigmoid", {a}, a.shape(), std::move(out),
                [saved = std::move(saved)](std::span<const double> g) {
                  std::vector<double> v(g.size());
                  for (std::size_t i = 0; i < g.size(); ++i) v[i] = g[i] * saved[i] * (1.0 - saved[i]);
                  return std::vector<std::vector<double>>{std::move(v)};
                });
}

// --- Convolutions -----------------------------------------------------------

namespace {

struct ConvDims {
  std::size_t cin, h, w, cout, k, oh, ow;
};

void check_bias(std::string_view op, const std::optional<Tensor>& bias, std::size_t cout) {
  if (bias && (bias->rank() != 1 || bias->dim(0) != cout)) {
    violation(std::string(op) + ": bias shape " + shape_string(bias->shape()) + " does not match " +
              std::to_string(cout) + " output channels");
  }
}

std::vector<Tensor> conv_inputs(const Tensor& x, const Tensor& w, const std::optional<Tensor>& b) {
  std::vector<Tensor> in{x, w};
  if (b) in.push_back(*b);
  return in;
}

}  // namespace

Tensor conv2d(const Tensor& x, const Tensor& weight, const std::optional<Tensor>& bias,
              std::size_t stride, std::size_t pad) {
  require_rank("conv2d", x, 3);
  require_rank("conv2d", weight, 4);
  if (stride == 0) violation("conv2d: stride must be positive");
  if (weight.dim(1) != x.dim(0) || weight.dim(2) != weight.dim(3)) {
    violation("conv2d: weight " + shape_string(weight.shape()) + " incompatible with input " +
              shape_string(x.shape()));
  }
  ConvDims d{x.dim(0), x.dim(1), x.dim(2), weight.dim(0), weight.dim(2), 0, 0};
  if (d.h + 2 * pad < d.k || d.w + 2 * pad < d.k) {
    violation("conv2d: kernel larger than padded input " + shape_string(x.shape()));
  }
  d.oh = (d.h + 2 * pad - d.k) / stride + 1;
  d.ow = (d.w + 2 * pad - d.k) / stride + 1;
  check_bias("conv2d", bias, d.cout);

  const auto xd = x.data();
  const auto wd = weight.data();
  std::vector<double> out(d.cout * d.oh * d.ow, 0.0);
  const long p = static_cast<long>(pad);
  const long s = static_cast<long>(stride);
  for (std::size_t co = 0; co < d.cout; ++co) {
    double* o = out.data() + co * d.oh * d.ow;
    if (bias) std::fill(o, o + d.oh * d.ow, (*bias)[co]);
    for (std::size_t ci = 0; ci < d.cin; ++ci) {
      const double* xc = xd.data() + ci * d.h * d.w;
      for (std::size_t ky = 0; ky < d.k; ++ky) {
        for (std::size_t kx = 0; kx < d.k; ++kx) {
          const double wv = wd[((co * d.cin + ci) * d.k + ky) * d.k + kx];
          for (std::size_t oy = 0; oy < d.oh; ++oy) {
            const long iy = static_cast<long>(oy) * s + static_cast<long>(ky) - p;
            if (iy < 0 || iy >= static_cast<long>(d.h)) continue;
            const double* xrow = xc + static_cast<std::size_t>(iy) * d.w;
            double* orow = o + oy * d.ow;
            for (std::size_t ox = 0; ox < d.ow; ++ox) {
              const long ix = static_cast<long>(ox) * s + static_cast<long>(kx) - p;
              if (ix < 0 || ix >= static_cast<long>(d.w)) continue;
              orow[ox] += wv * xrow[ix];
            }
          }
        }
      }
    }
  }

  const bool has_bias = bias.has_value();
  return finish(
      "conv2d", conv_inputs(x, weight, bias), {d.cout, d.oh, d.ow}, std::move(out),
      [x, weight, d, p, s, has_bias](std::span<const double> g) {
        const auto xd = x.data();
        const auto wd = weight.data();
        std::vector<double> gx(xd.size(), 0.0), gw(wd.size(), 0.0);
        std::vector<double> gb;
        if (has_bias) {
          gb.assign(d.cout, 0.0);
          for (std::size_t co = 0; co < d.cout; ++co) {
            for (std::size_t i = 0; i < d.oh * d.ow; ++i) gb[co] += g[co * d.oh * d.ow + i];
          }
        }
        for (std::size_t co = 0; co < d.cout; ++co) {
          const double* gc = g.data() + co * d.oh * d.ow;
          for (std::size_t ci = 0; ci < d.cin; ++ci) {
            const double* xc = xd.data() + ci * d.h * d.w;
            double* gxc = gx.data() + ci * d.h * d.w;
            for (std::size_t ky = 0; ky < d.k; ++ky) {
              for (std::size_t kx = 0; kx < d.k; ++kx) {
                const std::size_t widx = ((co * d.cin + ci) * d.k + ky) * d.k + kx;
                const double wv = wd[widx];
                double acc = 0.0;
                for (std::size_t oy = 0; oy < d.oh; ++oy) {
                  const long iy = static_cast<long>(oy) * s + static_cast<long>(ky) - p;
                  if (iy < 0 || iy >= static_cast<long>(d.h)) continue;
                  const std::size_t row = static_cast<std::size_t>(iy) * d.w;
                  for (std::size_t ox = 0; ox < d.ow; ++ox) {
                    const long ix = static_cast<long>(ox) * s + static_cast<long>(kx) - p;
                    if (ix < 0 || ix >= static_cast<long>(d.w)) continue;
                    const double gv = gc[oy * d.ow + ox];
                    acc += gv * xc[row + ix];
                    gxc[row + ix] += gv * wv;
                  }
                }
                gw[widx] += acc;
              }
            }
          }
        }
        std::vector<std::vector<double>> res{std::move(gx), std::move(gw)};
        if (has_bias) res.push_back(std::move(gb));
        return res;
      });
}

Tensor conv2d_transpose(const Tensor& x, const Tensor& weight, const std::optional<Tensor>& bias,
                        std::size_t stride, std::size_t pad, std::size_t output_pad) {
  require_rank("conv2d_transpose", x, 3);
  require_rank("conv2d_transpose", weight, 4);
  if (stride == 0) violation("conv2d_transpose: stride must be positive");
  if (weight.dim(0) != x.dim(0) || weight.dim(2) != weight.dim(3)) {
    violation("conv2d_transpose: weight " + shape_string(weight.shape()) + " incompatible with input " +
              shape_string(x.shape()));
  }
  if (output_pad >= stride) violation("conv2d_transpose: output_pad must be smaller than stride");
  ConvDims d{x.dim(0), x.dim(1), x.dim(2), weight.dim(1), weight.dim(2), 0, 0};
  const long full_h = static_cast<long>((d.h - 1) * stride + d.k + output_pad);
  const long full_w = static_cast<long>((d.w - 1) * stride + d.k + output_pad);
  if (full_h <= static_cast<long>(2 * pad) || full_w <= static_cast<long>(2 * pad)) {
    violation("conv2d_transpose: padding consumes the whole output");
  }
  d.oh = static_cast<std::size_t>(full_h) - 2 * pad;
  d.ow = static_cast<std::size_t>(full_w) - 2 * pad;
  check_bias("conv2d_transpose", bias, d.cout);

  const auto xd = x.data();
  const auto wd = weight.data();
  const long p = static_cast<long>(pad);
  const long s = static_cast<long>(stride);
  std::vector<double> out(d.cout * d.oh * d.ow, 0.0);
  for (std::size_t co = 0; co < d.cout; ++co) {
    double* o = out.data() + co * d.oh * d.ow;
    if (bias) std::fill(o, o + d.oh * d.ow, (*bias)[co]);
    for (std::size_t ci = 0; ci < d.cin; ++ci) {
      const double* xc = xd.data() + ci * d.h * d.w;
      for (std::size_t ky = 0; ky < d.k; ++ky) {
        for (std::size_t kx = 0; kx < d.k; ++kx) {
          const double wv = wd[((ci * d.cout + co) * d.k + ky) * d.k + kx];
          for (std::size_t iy = 0; iy < d.h; ++iy) {
            const long oy = static_cast<long>(iy) * s + static_cast<long>(ky) - p;
            if (oy < 0 || oy >= static_cast<long>(d.oh)) continue;
            double* orow = o + static_cast<std::size_t>(oy) * d.ow;
            const double* xrow = xc + iy * d.w;
            for (std::size_t ix = 0; ix < d.w; ++ix) {
              const long ox = static_cast<long>(ix) * s + static_cast<long>(kx) - p;
              if (ox < 0 || ox >= static_cast<long>(d.ow)) continue;
              orow[ox] += wv * xrow[ix];
            }
          }
        }
      }
    }
  }

  const bool has_bias = bias.has_value();
  return finish(
      "conv2d_transpose", conv_inputs(x, weight, bias), {d.cout, d.oh, d.ow}, std::move(out),
      [x, weight, d, p, s, has_bias](std::span<const double> g) {
        const auto xd = x.data();
        const auto wd = weight.data();
        std::vector<double> gx(xd.size(), 0.0), gw(wd.size(), 0.0);
        std::vector<double> gb;
        if (has_bias) {
          gb.assign(d.cout, 0.0);
          for (std::size_t co = 0; co < d.cout; ++co) {
            for (std::size_t i = 0; i < d.oh * d.ow; ++i) gb[co] += g[co * d.oh * d.ow + i];
          }
        }
        for (std::size_t co = 0; co < d.cout; ++co) {
          const double* gc = g.data() + co * d.oh * d.ow;
          for (std::size_t ci = 0; ci < d.cin; ++ci) {
            const double* xc = xd.data() + ci * d.h * d.w;
            double* gxc = gx.data() + ci * d.h * d.w;
            for (std::size_t ky = 0; ky < d.k; ++ky) {
              for (std::size_t kx = 0; kx < d.k; ++kx) {
                const std::size_t widx = ((ci * d.cout + co) * d.k + ky) * d.k + kx;
                const double wv = wd[widx];
                double acc = 0.0;
                for (std::size_t iy = 0; iy < d.h; ++iy) {
                  const long oy = static_cast<long>(iy) * s + static_cast<long>(ky) - p;
                  if (oy < 0 || oy >= static_cast<long>(d.oh)) continue;
                  const double* grow = gc + static_cast<std::size_t>(oy) * d.ow;
                  for (std::size_t ix = 0; ix < d.w; ++ix) {
                    const long ox = static_cast<long>(ix) * s + static_cast<long>(kx) - p;
                    if (ox < 0 || ox >= static_cast<long>(d.ow)) continue;
                    acc += grow[ox] * xc[iy * d.w + ix];
                    gxc[iy * d.w + ix] += grow[ox] * wv;
                  }
                }
                gw[widx] += acc;
              }
            }
          }
        }
        std::vector<std::vector<double>> res{std::move(gx), std::move(gw)};
        if (has_bias) res.push_back(std::move(gb));
        return res;
      });
}

// --- Structural ops ---------------------------------------------------------

Tensor concat_channels(std::span<const Tensor> parts) {
  if (parts.empty()) violation("concat_channels: no inputs");
  Shape shape = parts[0].shape();
  if (shape.empty()) violation("concat_channels: rank-0 input");
  std::size_t channels = 0;
  std::vector<double> out;
  for (const Tensor& t : parts) {
    Shape rest_t(t.shape().begin() + 1, t.shape().end());
    Shape rest_0(shape.begin() + 1, shape.end());
    if (t.rank() != shape.size() || rest_t != rest_0) {
      violation("concat_channels: shape mismatch " + shape_string(shape) + " vs " + shape_string(t.shape()));
    }
    channels += t.dim(0);
    out.insert(out.end(), t.data().begin(), t.data().end());
  }
  shape[0] = channels;
  std::vector<std::size_t> sizes;
  for (const Tensor& t : parts) sizes.push_back(t.numel());
  return finish("concat_channels", std::vector<Tensor>(parts.begin(), parts.end()), std::move(shape),
                std::move(out), [sizes](std::span<const double> g) {
                  std::vector<std::vector<double>> res;
                  std::size_t off = 0;
                  for (std::size_t n : sizes) {
                    res.emplace_back(g.begin() + static_cast<long>(off), g.begin() + static_cast<long>(off + n));
                    off += n;
                  }
                  return res;
                });
}

Tensor split_channels(const Tensor& a, std::size_t start, std::size_t count) {
  if (a.rank() < 1 || count == 0 || start + count > a.dim(0)) {
    violation("split_channels: range [" + std::to_string(start) + ", " + std::to_string(start + count) +
              ") outside " + shape_string(a.shape()));
  }
  const std::size_t per = a.numel() / a.dim(0);
  Shape shape = a.shape();
  shape[0] = count;
  std::vector<double> out(a.data().begin() + static_cast<long>(start * per),
                          a.data().begin() + static_cast<long>((start + count) * per));
  const std::size_t total = a.numel();
  return finish("split_channels", {a}, std::move(shape), std::move(out),
                [total, start, per](std::span<const double> g) {
                  std::vector<double> ga(total, 0.0);
                  std::copy(g.begin(), g.end(), ga.begin() + static_cast<long>(start * per));
                  return std::vector<std::vector<double>>{std::move(ga)};
                });
}

Tensor slice_rows(const Tensor& a, std::size_t start, std::size_t count) {
  if (a.rank() < 2) violation("slice_rows: need rank >= 2, got " + shape_string(a.shape()));
  const std::size_t rows = a.dim(a.rank() - 2), cols = a.dim(a.rank() - 1);
  if (count == 0 || start + count > rows) {
    violation("slice_rows: range [" + std::to_string(start) + ", " + std::to_string(start + count) +
              ") outside " + shape_string(a.shape()));
  }
  const std::size_t outer = a.numel() / (rows * cols);
  Shape shape = a.shape();
  shape[shape.size() - 2] = count;
  std::vector<double> out;
  out.reserve(outer * count * cols);
  for (std::size_t o = 0; o < outer; ++o) {
    auto first = a.data().begin() + static_cast<long>((o * rows + start) * cols);
    out.insert(out.end(), first, first + static_cast<long>(count * cols));
  }
  return finish("slice_rows", {a}, std::move(shape), std::move(out),
                [outer, rows, cols, start, count](std::span<const double> g) {
                  std::vector<double> ga(outer * rows * cols, 0.0);
                  for (std::size_t o = 0; o < outer; ++o) {
                    std::copy_n(g.begin() + static_cast<long>(o * count * cols), count * cols,
                                ga.begin() + static_cast<long>((o * rows + start) * cols));
                  }
                  return std::vector<std::vector<double>>{std::move(ga)};
                });
}

Tensor pad_rows(const Tensor& a, std::size_t before, std::size_t after) {
  if (a.rank() < 2) violation("pad_rows: need rank >= 2, got " + shape_string(a.shape()));
  const std::size_t rows = a.dim(a.rank() - 2), cols = a.dim(a.rank() - 1);
  const std::size_t outer = a.numel() / (rows * cols);
  const std::size_t new_rows = rows + before + after;
  Shape shape = a.shape();
  shape[shape.size() - 2] = new_rows;
  std::vector<double> out(outer * new_rows * cols, 0.0);
  for (std::size_t o = 0; o < outer; ++o) {
    std::copy_n(a.data().begin() + static_cast<long>(o * rows * cols), rows * cols,
                out.begin() + static_cast<long>((o * new_rows + before) * cols));
  }
  return finish("pad_rows", {a}, std::move(shape), std::move(out),
                [outer, rows, cols, new_rows, before](std::span<const double> g) {
                  std::vector<double> ga(outer * rows * cols);
                  for (std::size_t o = 0; o < outer; ++o) {
                    std::copy_n(g.begin() + static_cast<long>((o * new_rows + before) * cols), rows * cols,
                                ga.begin() + static_cast<long>(o * rows * cols));
                  }
                  return std::vector<std::vector<double>>{std::move(ga)};
                });
}

// --- Spectral primitives ----------------------------------------------------

namespace {

/// Geometry of the 1-D lines along `axis` of a channel-first tensor.
struct Lines {
  std::size_t channels;  // extent of axis 0
  std::size_t outer;     // product of extents before `axis` (includes channels)
  std::size_t inner;     // product of extents after `axis`
};

Lines lines_of(std::string_view op, const Shape& shape, std::size_t axis) {
  if (axis == 0 || axis >= shape.size()) {
    violation(std::string(op) + ": axis " + std::to_string(axis) + " invalid for " + shape_string(shape) +
              " (axis 0 holds channels)");
  }
  Lines l{shape[0], 1, 1};
  for (std::size_t i = 0; i < axis; ++i) l.outer *= shape[i];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) l.inner *= shape[i];
  return l;
}

/// Real line (n samples) -> stacked complex line (m bins). Offsets index
/// the real input and the two output halves.
void rfft_lines(std::span<const double> in, std::span<double> out, const Lines& l, std::size_t n,
                std::size_t m) {
  std::vector<double> line(n);
  std::vector<fft::Complex> spec(m);
  for (std::size_t o = 0; o < l.outer; ++o) {
    for (std::size_t i = 0; i < l.inner; ++i) {
      for (std::size_t k = 0; k < n; ++k) line[k] = in[(o * n + k) * l.inner + i];
      fft::rfft(line, spec);
      for (std::size_t k = 0; k < m; ++k) {
        out[(o * m + k) * l.inner + i] = spec[k].real();
        out[((o + l.outer) * m + k) * l.inner + i] = spec[k].imag();
      }
    }
  }
}

void irfft_lines(std::span<const double> in, std::span<double> out, const Lines& half, std::size_t n,
                 std::size_t m) {
  std::vector<double> line(n);
  std::vector<fft::Complex> spec(m);
  for (std::size_t o = 0; o < half.outer; ++o) {
    for (std::size_t i = 0; i < half.inner; ++i) {
      for (std::size_t k = 0; k < m; ++k) {
        spec[k] = {in[(o * m + k) * half.inner + i], in[((o + half.outer) * m + k) * half.inner + i]};
      }
      fft::irfft(spec, line);
      for (std::size_t k = 0; k < n; ++k) out[(o * n + k) * half.inner + i] = line[k];
    }
  }
}

/// Weight of bin k in the half spectrum of a length-n real signal.
double bin_multiplicity(std::size_t k, std::size_t n) {
  if (k == 0) return 1.0;
  if (n % 2 == 0 && k == n / 2) return 1.0;
  return 2.0;
}

}  // namespace

Tensor rfft_axis(const Tensor& x, std::size_t axis) {
  const Lines l = lines_of("rfft_axis", x.shape(), axis);
  const std::size_t n = x.dim(axis);
  const std::size_t m = fft::half_bins(n);
  Shape shape = x.shape();
  shape[0] *= 2;
  shape[axis] = m;
  std::vector<double> out(shape_numel(shape));
  rfft_lines(x.data(), out, l, n, m);
  return finish("rfft_axis", {x}, shape, std::move(out), [l, n, m](std::span<const double> g) {
    // d/dx = n * irfft(G / c_k), c_k the bin multiplicity.
    std::vector<double> scaled(g.begin(), g.end());
    for (std::size_t o = 0; o < 2 * l.outer; ++o) {
      for (std::size_t k = 0; k < m; ++k) {
        const double f = static_cast<double>(n) / bin_multiplicity(k, n);
        for (std::size_t i = 0; i < l.inner; ++i) scaled[(o * m + k) * l.inner + i] *= f;
      }
    }
    std::vector<double> gx(l.outer * n * l.inner);
    irfft_lines(scaled, gx, l, n, m);
    return std::vector<std::vector<double>>{std::move(gx)};
  });
}

Tensor irfft_axis(const Tensor& x, std::size_t axis, std::size_t length) {
  if (x.rank() < 2 || x.dim(0) % 2 != 0) {
    violation("irfft_axis: expected stacked complex input, got " + shape_string(x.shape()));
  }
  Lines l = lines_of("irfft_axis", x.shape(), axis);
  const std::size_t m = x.dim(axis);
  if (length == 0 || fft::half_bins(length) != m) {
    violation("irfft_axis: length " + std::to_string(length) + " needs " +
              std::to_string(fft::half_bins(length)) + " bins, input has " + std::to_string(m));
  }
  l.channels /= 2;
  l.outer /= 2;
  Shape shape = x.shape();
  shape[0] /= 2;
  shape[axis] = length;
  std::vector<double> out(shape_numel(shape));
  irfft_lines(x.data(), out, l, length, m);
  const std::size_t n = length;
  return finish("irfft_axis", {x}, shape, std::move(out), [l, n, m](std::span<const double> g) {
    // d/dX_k = (c_k / n) * rfft(g)_k for both real and imaginary parts.
    std::vector<double> gx(2 * l.outer * m * l.inner);
    rfft_lines(g, gx, l, n, m);
    for (std::size_t o = 0; o < 2 * l.outer; ++o) {
      for (std::size_t k = 0; k < m; ++k) {
        const double f = bin_multiplicity(k, n) / static_cast<double>(n);
        for (std::size_t i = 0; i < l.inner; ++i) gx[(o * m + k) * l.inner + i] *= f;
      }
    }
    return std::vector<std::vector<double>>{std::move(gx)};
  });
}

namespace {

void fft_lines(std::span<const double> in, std::span<double> out, const Lines& half, std::size_t n,
               bool inverse, double post_scale) {
  std::vector<fft::Complex> line(n);
  const std::size_t imag_off = half.outer * n * half.inner;
  for (std::size_t o = 0; o < half.outer; ++o) {
    for (std::size_t i = 0; i < half.inner; ++i) {
      for (std::size_t k = 0; k < n; ++k) {
        const std::size_t idx = (o * n + k) * half.inner + i;
        line[k] = {in[idx], in[imag_off + idx]};
      }
      fft::fft(line, inverse);
      for (std::size_t k = 0; k < n; ++k) {
        const std::size_t idx = (o * n + k) * half.inner + i;
        out[idx] = line[k].real() * post_scale;
        out[imag_off + idx] = line[k].imag() * post_scale;
      }
    }
  }
}

}  // namespace

Tensor fft_axis(const Tensor& x, std::size_t axis, bool inverse) {
  if (x.rank() < 2 || x.dim(0) % 2 != 0) {
    violation("fft_axis: expected stacked complex input, got " + shape_string(x.shape()));
  }
  Lines l = lines_of("fft_axis", x.shape(), axis);
  l.channels /= 2;
  l.outer /= 2;
  const std::size_t n = x.dim(axis);
  std::vector<double> out(x.numel());
  fft_lines(x.data(), out, l, n, inverse, 1.0);
  return finish("fft_axis", {x}, x.shape(), std::move(out), [l, n, inverse](std::span<const double> g) {
    // Adjoint of the unnormalized forward DFT is n * inverse; of the
    // normalized inverse it is forward / n.
    std::vector<double> gx(g.size());
    const double f = inverse ? 1.0 / static_cast<double>(n) : static_cast<double>(n);
    fft_lines(g, gx, l, n, !inverse, f);
    return std::vector<std::vector<double>>{std::move(gx)};
  });
}

Tensor complex_hadamard(const Tensor& x, const Tensor& kernel, std::size_t axis) {
  require_rank("complex_hadamard", x, 3);
  require_rank("complex_hadamard", kernel, 2);
  if (axis != 1 && axis != 2) violation("complex_hadamard: axis must be 1 or 2");
  if (x.dim(0) % 2 != 0 || kernel.dim(0) != x.dim(0) || kernel.dim(1) != x.dim(axis)) {
    violation("complex_hadamard: kernel " + shape_string(kernel.shape()) + " does not match input " +
              shape_string(x.shape()) + " along axis " + std::to_string(axis));
  }
  const std::size_t c = x.dim(0) / 2, h = x.dim(1), w = x.dim(2);
  const std::size_t len = kernel.dim(1);
  const std::size_t half = c * h * w;
  auto kidx = [axis, len](std::size_t ch, std::size_t y, std::size_t xx) {
    return ch * len + (axis == 2 ? xx : y);
  };
  const auto xd = x.data();
  const auto kd = kernel.data();
  std::vector<double> out(x.numel());
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t y = 0; y < h; ++y) {
      for (std::size_t xx = 0; xx < w; ++xx) {
        const std::size_t i = (ch * h + y) * w + xx;
        const std::size_t kk = kidx(ch, y, xx);
        const double xr = xd[i], xi = xd[half + i];
        const double kr = kd[kk], ki = kd[c * len + kk];
        out[i] = xr * kr - xi * ki;
        out[half + i] = xr * ki + xi * kr;
      }
    }
  }
  return finish("complex_hadamard", {x, kernel}, x.shape(), std::move(out),
                [x, kernel, c, h, w, len, half, kidx](std::span<const double> g) {
                  const auto xd = x.data();
                  const auto kd = kernel.data();
                  std::vector<double> gx(xd.size()), gk(kd.size(), 0.0);
                  for (std::size_t ch = 0; ch < c; ++ch) {
                    for (std::size_t y = 0; y < h; ++y) {
                      for (std::size_t xx = 0; xx < w; ++xx) {
                        const std::size_t i = (ch * h + y) * w + xx;
                        const std::size_t kk = kidx(ch, y, xx);
                        const double xr = xd[i], xi = xd[half + i];
                        const double kr = kd[kk], ki = kd[c * len + kk];
                        const double gr = g[i], gi = g[half + i];
                        gx[i] = gr * kr + gi * ki;
                        gx[half + i] = -gr * ki + gi * kr;
                        gk[kk] += gr * xr + gi * xi;
                        gk[c * len + kk] += -gr * xi + gi * xr;
                      }
                    }
                  }
                  return std::vector<std::vector<double>>{std::move(gx), std::move(gk)};
                });
}

Tensor apply_linear(std::string name, const Tensor& x, Shape out_shape, const LinearFn& forward,
                    LinearFn adjoint) {
  std::vector<double> out = forward(x.data());
  if (out.size() != shape_numel(out_shape)) {
    violation(name + ": forward produced " + std::to_string(out.size()) + " values for shape " +
              shape_string(out_shape));
  }
  const std::size_t in_n = x.numel();
  return finish(std::move(name), {x}, std::move(out_shape), std::move(out),
                [adjoint = std::move(adjoint), in_n](std::span<const double> g) {
                  std::vector<double> gx = adjoint(g);
                  if (gx.size() != in_n) throw ContractViolation("linear adjoint returned wrong size");
                  return std::vector<std::vector<double>>{std::move(gx)};
                });
}

// --- Dispatcher -------------------------------------------------------------

namespace {

template <typename T>
T attr(const Attrs& attrs, std::string_view primitive, const std::string& key) {
  auto it = attrs.find(key);
  if (it == attrs.end()) violation(std::string(primitive) + ": missing attribute '" + key + "'");
  if (const T* v = std::get_if<T>(&it->second)) return *v;
  if constexpr (std::is_same_v<T, double>) {
    if (const auto* i = std::get_if<std::int64_t>(&it->second)) return static_cast<double>(*i);
  }
  violation(std::string(primitive) + ": attribute '" + key + "' has the wrong type");
}

std::size_t size_attr(const Attrs& attrs, std::string_view primitive, const std::string& key,
                      std::optional<std::size_t> fallback = std::nullopt) {
  if (fallback && attrs.find(key) == attrs.end()) return *fallback;
  const std::int64_t v = attr<std::int64_t>(attrs, primitive, key);
  if (v < 0) violation(std::string(primitive) + ": attribute '" + key + "' must be non-negative");
  return static_cast<std::size_t>(v);
}

void arity(std::string_view name, std::span<const Tensor> inputs, std::size_t lo, std::size_t hi) {
  if (inputs.size() < lo || inputs.size() > hi) {
    violation(std::string(name) + ": expected " + std::to_string(lo) +
              (lo == hi ? "" : "-" + std::to_string(hi)) + " inputs, got " + std::to_string(inputs.size()));
  }
}

}  // namespace

Tensor apply_primitive(std::string_view name, std::span<const Tensor> in, const Attrs& attrs) {
  auto opt_bias = [&](std::size_t i) { return in.size() > i ? std::optional<Tensor>(in[i]) : std::nullopt; };
  if (name == "add") return arity(name, in, 2, 2), add(in[0], in[1]);
  if (name == "sub") return arity(name, in, 2, 2), sub(in[0], in[1]);
  if (name == "mul") return arity(name, in, 2, 2), mul(in[0], in[1]);
  if (name == "scale") return arity(name, in, 1, 1), scale(in[0], attr<double>(attrs, name, "factor"));
  if (name == "sum") return arity(name, in, 1, 1), sum(in[0]);
  if (name == "mean") return arity(name, in, 1, 1), mean(in[0]);
  if (name == "square") return arity(name, in, 1, 1), square(in[0]);
  if (name == "matvec") return arity(name, in, 2, 2), matvec(in[0], in[1]);
  if (name == "gelu") return arity(name, in, 1, 1), gelu(in[0]);
  if (name == "sigmoid") return arity(name, in, 1, 1), sigmoid(in[0]);
  if (name == "reshape") {
    arity(name, in, 1, 1);
    Shape shape;
    for (std::int64_t e : attr<std::vector<std::int64_t>>(attrs, name, "shape")) {
      if (e <= 0) violation("reshape: non-positive extent");
      shape.push_back(static_cast<std::size_t>(e));
    }
    return reshape(in[0], std::move(shape));
  }
  if (name == "conv2d") {
    arity(name, in, 2, 3);
    return conv2d(in[0], in[1], opt_bias(2), size_attr(attrs, name, "stride", 1), size_attr(attrs, name, "pad", 0));
  }
  if (name == "conv2d_transpose") {
    arity(name, in, 2, 3);
    return conv2d_transpose(in[0], in[1], opt_bias(2), size_attr(attrs, name, "stride", 1),
                            size_attr(attrs, name, "pad", 0), size_attr(attrs, name, "output_pad", 0));
  }
  if (name == "concat_channels") return concat_channels(in);
  if (name == "split_channels") {
    arity(name, in, 1, 1);
    return split_channels(in[0], size_attr(attrs, name, "start"), size_attr(attrs, name, "count"));
  }
  if (name == "slice_rows") {
    arity(name, in, 1, 1);
    return slice_rows(in[0], size_attr(attrs, name, "start"), size_attr(attrs, name, "count"));
  }
  if (name == "pad_rows") {
    arity(name, in, 1, 1);
    return pad_rows(in[0], size_attr(attrs, name, "before"), size_attr(attrs, name, "after"));
  }
  if (name == "rfft_axis") return arity(name, in, 1, 1), rfft_axis(in[0], size_attr(attrs, name, "axis"));
  if (name == "irfft_axis") {
    arity(name, in, 1, 1);
    return irfft_axis(in[0], size_attr(attrs, name, "axis"), size_attr(attrs, name, "len"));
  }
  if (name == "fft_axis") {
    arity(name, in, 1, 1);
    const auto inv = attrs.find("inverse");
    const bool inverse = inv != attrs.end() && std::get_if<bool>(&inv->second) && std::get<bool>(inv->second);
    return fft_axis(in[0], size_attr(attrs, name, "axis"), inverse);
  }
  if (name == "complex_hadamard") {
    arity(name, in, 2, 2);
    return complex_hadamard(in[0], in[1], size_attr(attrs, name, "axis"));
  }
  violation("unknown primitive '" + std::string(name) + "'");
}

// --- Gradient check ---------------------------------------------------------

GradcheckResult gradcheck(const std::function<Tensor(const Tensor&)>& f, const Tensor& x, double eps) {
  if (x.dtype() != DType::f64) violation("gradcheck: input must be f64");
  GradcheckResult result;

  std::vector<double> analytic;
  {
    Tape tape;
    TapeScope scope(tape);
    const Tensor leaf = x.as_parameter();
    const Tensor loss = f(leaf);
    if (loss.numel() != 1) violation("gradcheck: function must be scalar-valued");
    if (!std::isfinite(loss.item())) {
      result.finite = false;
      result.message = "non-finite value at the base point";
      return result;
    }
    const Tensor g = tape.backward(loss).of(leaf);
    analytic.assign(g.data().begin(), g.data().end());
  }

  std::vector<double> values(x.data().begin(), x.data().end());
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double orig = values[i];
    values[i] = orig + eps;
    const double fp = f(Tensor::from(x.shape(), values)).item();
    values[i] = orig - eps;
    const double fm = f(Tensor::from(x.shape(), values)).item();
    values[i] = orig;
    if (!std::isfinite(fp) || !std::isfinite(fm)) {
      result.finite = false;
      result.worst_index = i;
      result.message = "non-finite evaluation at coordinate " + std::to_string(i);
      return result;
    }
    const double numeric = (fp - fm) / (2.0 * eps);
    const double denom = std::max({std::abs(analytic[i]), std::abs(numeric), 1e-8});
    const double err = std::abs(analytic[i] - numeric) / denom;
    if (err > result.max_rel_error) {
      result.max_rel_error = err;
      result.worst_index = i;
    }
  }
  return result;
}

}  // namespace fcdm

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <variant>
#include <vector>

namespace fcdm {

enum class DType { f32, f64 };

using Shape = std::vector<std::size_t>;

std::string to_string(DType dtype);
std::string shape_string(const Shape& shape);
std::size_t shape_numel(const Shape& shape);

/// Immutable dense row-major array. Values are stored as doubles; an f32
/// tensor holds values already rounded to single precision, so every
/// primitive result is exactly what a float pipeline would produce per
/// element (accumulation still happens in double).
///
/// Copies are cheap handles onto shared immutable storage. Each tensor has a
/// process-unique id which the tape uses to route gradients.
class Tensor {
 public:
  Tensor();

  static Tensor from(Shape shape, std::vector<double> data, DType dtype = DType::f64,
                     bool requires_grad = false);
  static Tensor zeros(Shape shape, DType dtype = DType::f64);
  static Tensor full(Shape shape, double value, DType dtype = DType::f64);
  static Tensor scalar(double value, DType dtype = DType::f64);

  /// Same values, new identity, marked as a differentiable leaf.
  Tensor as_parameter() const;
  /// Same values, new identity, not tracked.
  Tensor detach() const;

  const Shape& shape() const;
  std::size_t dim(std::size_t axis) const;
  std::size_t rank() const { return shape().size(); }
  std::size_t numel() const;
  DType dtype() const;
  bool requires_grad() const;
  std::uint64_t id() const;
  std::span<const double> data() const;
  double operator[](std::size_t i) const { return data()[i]; }
  /// Value of a single-element tensor.
  double item() const;

 private:
  struct Impl;
  explicit Tensor(std::shared_ptr<const Impl> impl) : impl_(std::move(impl)) {}
  static const Impl& checked(const std::shared_ptr<const Impl>& p);
  std::shared_ptr<const Impl> impl_;

  friend Tensor make_result(Shape, std::vector<double>, DType, bool);
};

/// Gradient store returned by backward(). Leaves that the loss does not
/// reach report zero gradients.
class Gradients {
 public:
  Tensor of(const Tensor& t) const;
  bool reached(const Tensor& t) const { return grads_.count(t.id()) != 0; }

 private:
  friend class Tape;
  std::unordered_map<std::uint64_t, std::vector<double>> grads_;
};

/// Vector-Jacobian product of one recorded application: receives the
/// gradient w.r.t. the output and returns one gradient per input (an empty
/// vector for inputs that do not require gradients).
using Vjp = std::function<std::vector<std::vector<double>>(std::span<const double>)>;

/// Ordered record of primitive applications. Entries are appended as
/// primitives run, so inputs always precede the node that consumes them.
/// A tape is confined to one thread and supports a single backward pass.
class Tape {
 public:
  struct Entry {
    std::string primitive;
    std::vector<std::uint64_t> inputs;
    std::vector<bool> input_requires_grad;
    std::uint64_t output = 0;
    std::size_t output_numel = 0;
    Vjp vjp;
  };

  std::size_t size() const { return entries_.size(); }
  const Entry& entry(std::size_t i) const { return entries_.at(i); }
  bool consumed() const { return consumed_; }

  void record(Entry entry);
  Gradients backward(const Tensor& loss);

 private:
  std::vector<Entry> entries_;
  std::unordered_map<std::uint64_t, std::size_t> index_;
  bool consumed_ = false;
};

/// Makes `tape` the active tape of the current thread for the scope's
/// lifetime. Primitives record onto the active tape whenever an input
/// requires gradients.
class TapeScope {
 public:
  explicit TapeScope(Tape& tape);
  ~TapeScope();
  TapeScope(const TapeScope&) = delete;
  TapeScope& operator=(const TapeScope&) = delete;

 private:
  Tape* previous_;
};

Tape* active_tape();

/// Reverse pass over the active tape.
Gradients backward(const Tensor& loss);

// ---------------------------------------------------------------------------
// Primitives. Every function below produces a new tensor; none broadcast
// except mul(), which accepts a single-element operand on either side.
// Channel-first layout [C, H, W] is assumed by the conv and channel ops.

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);
Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
Tensor square(const Tensor& a);
/// [m, n] x [n] -> [m]
Tensor matvec(const Tensor& matrix, const Tensor& vec);
Tensor reshape(const Tensor& a, Shape shape);

/// x [Cin, H, W], weight [Cout, Cin, k, k], bias [Cout] (optional).
Tensor conv2d(const Tensor& x, const Tensor& weight, const std::optional<Tensor>& bias,
              std::size_t stride, std::size_t pad);
/// x [Cin, H, W], weight [Cin, Cout, k, k]; output extent
/// (H - 1) * stride - 2 * pad + k + output_pad.
Tensor conv2d_transpose(const Tensor& x, const Tensor& weight, const std::optional<Tensor>& bias,
                        std::size_t stride, std::size_t pad, std::size_t output_pad = 0);

/// tanh approximation: 0.5 x (1 + tanh(sqrt(2/pi) (x + 0.044715 x^3))).
Tensor gelu(const Tensor& a);
Tensor sigmoid(const Tensor& a);

Tensor concat_channels(std::span<const Tensor> parts);
Tensor split_channels(const Tensor& a, std::size_t start, std::size_t count);
/// Rows are the second-to-last axis.
Tensor slice_rows(const Tensor& a, std::size_t start, std::size_t count);
Tensor pad_rows(const Tensor& a, std::size_t before, std::size_t after);

/// Real transform along `axis` (>= 1) of x [C, ...]. The complex result is
/// stored with real parts in channels [0, C) and imaginary parts in [C, 2C);
/// the transformed axis shrinks to n/2 + 1 bins.
Tensor rfft_axis(const Tensor& x, std::size_t axis);
/// Inverse of rfft_axis producing `length` samples along `axis`.
Tensor irfft_axis(const Tensor& x, std::size_t axis, std::size_t length);
/// Complex transform along `axis` of a stacked [2C, ...] tensor.
Tensor fft_axis(const Tensor& x, std::size_t axis, bool inverse);
/// x [2C, H, W] stacked complex, kernel [2C, L] stacked complex with L the
/// extent of `axis` (1 or 2); the kernel is shared along the other axis.
Tensor complex_hadamard(const Tensor& x, const Tensor& kernel, std::size_t axis);

/// Registers an arbitrary linear map with an explicit adjoint. `forward`
/// and `adjoint` must be exact transposes of each other.
using LinearFn = std::function<std::vector<double>(std::span<const double>)>;
Tensor apply_linear(std::string name, const Tensor& x, Shape out_shape, const LinearFn& forward,
                    LinearFn adjoint);

using AttrValue = std::variant<std::int64_t, double, bool, std::vector<std::int64_t>>;
using Attrs = std::map<std::string, AttrValue, std::less<>>;

/// String-keyed dispatcher over the primitive set, for callers that build
/// programs from data. Unknown names raise ContractViolation.
Tensor apply_primitive(std::string_view name, std::span<const Tensor> inputs,
                       const Attrs& attrs = {});

// ---------------------------------------------------------------------------

struct GradcheckResult {
  double max_rel_error = 0.0;
  std::size_t worst_index = 0;
  bool finite = true;
  std::string message;
};

/// Compares reverse-mode gradients of scalar `f` at `x` with central
/// differences of step `eps`, coordinate by coordinate:
/// |analytic - numeric| / max(|analytic|, |numeric|, 1e-8).
GradcheckResult gradcheck(const std::function<Tensor(const Tensor&)>& f, const Tensor& x,
                          double eps = 1e-5);

}  // namespace fcdm

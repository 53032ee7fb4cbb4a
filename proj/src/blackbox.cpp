#include "nlsvd/blackbox.hpp"

#include <sstream>

#include "nlsvd/error.hpp"

namespace nlsvd {

BlackBox::BlackBox(std::size_t d_in, std::size_t d_out, Function fn, bool reentrant)
    : d_in_(d_in),
      d_out_(d_out),
      fn_(std::make_shared<const Function>(std::move(fn))),
      counter_(std::make_shared<std::atomic<std::uint64_t>>(0)),
      reentrant_(reentrant) {
  if (d_in == 0 || d_out == 0) {
    throw Error(ErrorKind::InvalidInput, "black box dimensions must be positive");
  }
  if (!*fn_) throw Error(ErrorKind::InvalidInput, "black box function is empty");
}

std::uint64_t BlackBox::query_count() const noexcept {
  return counter_->load(std::memory_order_relaxed);
}

Vector BlackBox::evaluate(std::span<const double> x) const {
  if (x.size() != d_in_) {
    std::ostringstream os;
    os << "black box expects input of length " << d_in_ << ", got " << x.size();
    throw Error(ErrorKind::InvalidInput, os.str());
  }
  if (!all_finite(x)) throw Error(ErrorKind::InvalidInput, "black box input is not finite");
  counter_->fetch_add(1, std::memory_order_relaxed);
  Vector y = (*fn_)(x);
  if (y.size() != d_out_) {
    throw Error(ErrorKind::InvalidInput, "black box returned output of the wrong length");
  }
  return y;
}

const Vector& BlackBox::anchor() const {
  if (!anchor_) throw Error(ErrorKind::InvalidInput, "black box has no anchor");
  return anchor_->point;
}

const Vector& BlackBox::anchor_output() const {
  if (!anchor_) throw Error(ErrorKind::InvalidInput, "black box has no anchor");
  return anchor_->output;
}

Vector BlackBox::to_local(std::span<const double> x) const {
  if (!anchor_) return Vector(x.begin(), x.end());
  if (x.size() != d_in_) throw Error(ErrorKind::InvalidInput, "input length mismatch");
  return subtract(x, anchor_->point);
}

Vector BlackBox::evaluate_original(std::span<const double> x) const {
  if (!anchor_) return evaluate(x);
  return add(anchor_->output, evaluate(to_local(x)));
}

BlackBox anchored(const BlackBox& f, std::span<const double> x_star) {
  if (x_star.size() != f.d_in()) {
    throw Error(ErrorKind::InvalidInput, "anchor length does not match input dimension");
  }
  if (!all_finite(x_star)) throw Error(ErrorKind::InvalidInput, "anchor is not finite");

  const auto raw = f.fn_;
  const Vector point(x_star.begin(), x_star.end());
  f.counter_->fetch_add(1, std::memory_order_relaxed);
  const Vector base_output = (*raw)(point);

  BlackBox g = f;
  g.fn_ = std::make_shared<const BlackBox::Function>(
      [raw, point, base_output](std::span<const double> h) {
        Vector x(h.size());
        for (std::size_t i = 0; i < h.size(); ++i) x[i] = point[i] + h[i];
        Vector y = (*raw)(x);
        for (std::size_t i = 0; i < y.size(); ++i) y[i] -= base_output[i];
        return y;
      });
  // Anchoring an anchored box composes; the stored anchor is always expressed
  // in the original coordinates.
  if (f.anchor_) {
    g.anchor_ = BlackBox::Anchor{add(f.anchor_->point, point), add(f.anchor_->output, base_output)};
  } else {
    g.anchor_ = BlackBox::Anchor{point, base_output};
  }
  return g;
}

BlackBox linear_blackbox(const Matrix& a) {
  return BlackBox(a.cols(), a.rows(), [a](std::span<const double> x) { return a * x; }, true);
}

}  // namespace nlsvd

#pragma once

#include <Eigen/Dense>
#include <map>
#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <string>
#include <vector>

#include "growthgr/common.hpp"
#include "growthgr/rng.hpp"

namespace growthgr {

using EMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using EMap = Eigen::Map<EMat>;
using ECMap = Eigen::Map<const EMat>;

struct Tensor;
// Named tensors; the unit of parameter registration, checkpointing and
// optimizer state.
using ParamSet = std::map<std::string, Tensor>;
using GradMap = std::map<std::string, Tensor>;

// Dense row-major tensor of 64-bit reals, rank 1..3. Scalars are shape {1}.
struct Tensor {
  std::vector<int> shape;
  std::vector<double> v;

  Tensor() = default;

  static Tensor zeros(std::vector<int> s) {
    Tensor t;
    t.shape = std::move(s);
    t.v.assign(t.check_shape(), 0.0);
    return t;
  }

  static Tensor full(std::vector<int> s, double x) {
    Tensor t = zeros(std::move(s));
    std::fill(t.v.begin(), t.v.end(), x);
    return t;
  }

  static Tensor scalar(double x) { return from({1}, {x}); }

  static Tensor vec(std::vector<double> vals) {
    int n = static_cast<int>(vals.size());
    return from({n}, std::move(vals));
  }

  // Input construction: validates element count and finiteness.
  static Tensor from(std::vector<int> s, std::vector<double> vals) {
    Tensor t;
    t.shape = std::move(s);
    size_t n = t.check_shape();
    GGR_CHECK(vals.size() == n, dimension_error("tensor value count does not match shape"));
    for (double x : vals)
      GGR_CHECK(std::isfinite(x), contract_error("non-finite value in tensor input"));
    t.v = std::move(vals);
    return t;
  }

  static Tensor uniform_init(std::vector<int> s, int fan_in, Rng& rng) {
    Tensor t = zeros(std::move(s));
    double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (double& x : t.v) x = rng.uniform(-bound, bound);
    return t;
  }

  size_t check_shape() const {
    GGR_CHECK(!shape.empty() && shape.size() <= 3, dimension_error("tensor rank must be 1..3"));
    size_t n = 1;
    for (int d : shape) {
      GGR_CHECK(d > 0, dimension_error("tensor dims must be positive"));
      n *= static_cast<size_t>(d);
    }
    return n;
  }

  int rank() const { return static_cast<int>(shape.size()); }
  int64_t numel() const { return static_cast<int64_t>(v.size()); }
  bool same_shape(const Tensor& o) const { return shape == o.shape; }

  // Rank-2 view; rank-1 tensors are viewed as a single row.
  int rows() const { return rank() >= 2 ? shape[0] : 1; }
  int cols() const { return rank() >= 2 ? shape[1] : shape[0]; }

  double& at(int i) { return v[static_cast<size_t>(i)]; }
  double at(int i) const { return v[static_cast<size_t>(i)]; }
  double& at(int i, int j) { return v[static_cast<size_t>(i) * cols() + j]; }
  double at(int i, int j) const { return v[static_cast<size_t>(i) * cols() + j]; }
  double* ptr(int i, int j) { return v.data() + static_cast<size_t>(i) * cols() + j; }
  const double* ptr(int i, int j) const { return v.data() + static_cast<size_t>(i) * cols() + j; }

  EMap mat() { return EMap(v.data(), rows(), cols()); }
  ECMap mat() const { return ECMap(v.data(), rows(), cols()); }

  bool all_finite() const {
    for (double x : v)
      if (!std::isfinite(x)) return false;
    return true;
  }

  double item() const {
    GGR_CHECK(numel() == 1, contract_error("item() on non-scalar tensor"));
    return v[0];
  }

  uint64_t content_hash() const {
    uint64_t h = fnv1a64(shape.data(), shape.size() * sizeof(int));
    return fnv1a64(v.data(), v.size() * sizeof(double), h);
  }
};

// C = op(A) * op(B) with optional transposes.
inline Tensor matmul_raw(const Tensor& a, const Tensor& b, bool ta = false, bool tb = false) {
  int am = ta ? a.cols() : a.rows();
  int ak = ta ? a.rows() : a.cols();
  int bk = tb ? b.cols() : b.rows();
  int bn = tb ? b.rows() : b.cols();
  GGR_CHECK(ak == bk, dimension_error("matmul: inner dimensions do not match"));
  Tensor c = Tensor::zeros({am, bn});
  auto A = a.mat();
  auto B = b.mat();
  auto C = c.mat();
  if (!ta && !tb)
    C.noalias() = A * B;
  else if (ta && !tb)
    C.noalias() = A.transpose() * B;
  else if (!ta && tb)
    C.noalias() = A * B.transpose();
  else
    C.noalias() = A.transpose() * B.transpose();
  return c;
}

inline double dot(const double* a, const double* b, int n) {
  Eigen::Map<const Eigen::VectorXd> va(a, n), vb(b, n);
  return va.dot(vb);
}

}  // namespace growthgr

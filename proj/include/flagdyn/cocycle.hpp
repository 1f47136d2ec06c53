#pragma once

// Linear cocycles over the base systems: generators (symbol tables, constants,
// rotation-driven families, gauge compositions, time reversal), renormalized
// matrix products, the additive a-cocycle via iterated QR, and the polar
// cocycle a+ via an incremental product SVD that keeps per-column log scales
// (the raw product is never formed).

#include <Eigen/Dense>
#include <memory>
#include <vector>

#include "flagdyn/base_system.hpp"
#include "flagdyn/decomp.hpp"
#include "flagdyn/flags.hpp"
#include "flagdyn/weyl.hpp"

namespace flagdyn {

class GeneratorImpl {
 public:
  virtual ~GeneratorImpl() = default;
  virtual Eigen::MatrixXd at(const BasePoint& x) const = 0;
  virtual int dim() const = 0;
  // Symbol window [0, window) needed to evaluate on a cylinder; 0 if the
  // generator ignores symbols (constant), -1 if cylinder evaluation is
  // unsupported (rotation families, time-reversed wrappers).
  virtual int window() const = 0;
  virtual Eigen::MatrixXd at_word(const std::vector<int>& w, int pos) const;
};

class Generator {
 public:
  Generator() = default;
  static Generator table(std::vector<Eigen::MatrixXd> mats);
  static Generator constant(Eigen::MatrixXd m);
  // d=2: A(x) = R(2*pi*(c0 + c1*x)) * diag(diag_entries), x the circle coord.
  static Generator rotation_family(double c0, double c1, Eigen::Vector2d diag_entries);
  static Generator gauge(Generator sigma, Generator inner);
  static Generator reversed_of(Generator inner, bool inner_reversed);

  Eigen::MatrixXd at(const BasePoint& x) const { return impl_->at(x); }
  Eigen::MatrixXd at_word(const std::vector<int>& w, int pos = 0) const {
    return impl_->at_word(w, pos);
  }
  int dim() const { return impl_->dim(); }
  int window() const { return impl_->window(); }
  bool valid() const { return impl_ != nullptr; }

 private:
  std::shared_ptr<const GeneratorImpl> impl_;
};

struct CocycleSystem {
  BaseSystem base;
  Generator gen;
  int d = 0;
  Variant variant = Variant::Gl;
  bool reversed = false;  // evolve with step_inv instead of step

  BasePoint advance(const BasePoint& x) const { return reversed ? step_inv(x) : step(x); }
  BasePoint advance_inv(const BasePoint& x) const { return reversed ? step(x) : step_inv(x); }
  BasePoint advance_n(const BasePoint& x, long long n) const {
    return step_n(x, reversed ? -n : n);
  }
  Eigen::MatrixXd A(const BasePoint& x) const { return gen.at(x); }
  void validate() const;
};

CocycleSystem make_cocycle(BaseSystem base, Generator gen, Variant variant = Variant::Gl);

// A(x) -> sigma(step x) * A(x); sigma must evaluate on the same base.
CocycleSystem gauge_perturb(const CocycleSystem& c, const Generator& sigma);

// (phi, A) -> (phi^{-1}, x -> A(phi^{-1} x)^{-1}); repellers of c are
// attractors of the reversed system by construction.
CocycleSystem time_reversed(const CocycleSystem& c);

// Product kept with unit Frobenius norm; log_scale absorbs the magnitude.
struct ScaledMatrix {
  Eigen::MatrixXd m;
  double log_scale = 0.0;

  Eigen::MatrixXd dense() const { return std::exp(log_scale) * m; }
  static ScaledMatrix identity(int d);
  ScaledMatrix times(const Eigen::MatrixXd& left) const;  // left * this
};

// a * b, renormalized.
ScaledMatrix compose(const ScaledMatrix& a, const ScaledMatrix& b);

// rho(n, x); n may be negative (inverse-ordered product of inverses).
ScaledMatrix cocycle_product(const CocycleSystem& c, long long n, const BasePoint& x);

struct FlagBundlePoint {
  BasePoint x;
  Flag b;
};

// Iterated-QR accumulation of log diag(R) along the orbit; length-d vector.
// Entries within a type block depend on the frame completion; block sums are
// flag functions.
Eigen::VectorXd a_cocycle(const CocycleSystem& c, long long n, const FlagBundlePoint& xi);

FlagBundlePoint flow_step(const CocycleSystem& c, const FlagBundlePoint& xi);
FlagBundlePoint flow_step_inv(const CocycleSystem& c, const FlagBundlePoint& xi);
FlagBundlePoint flow_n(const CocycleSystem& c, long long n, FlagBundlePoint xi);

struct ProductSvd {
  Eigen::MatrixXd U;          // left singular vectors, columns sorted
  Eigen::VectorXd log_sigma;  // descending
  long long n = 0;
};

// SVD of rho(n, x) in factored form, n >= 1.
ProductSvd product_svd(const CocycleSystem& c, long long n, const BasePoint& x);

// One pass recording the SVD at each checkpoint (ascending positive values).
std::vector<ProductSvd> product_svd_checkpoints(const CocycleSystem& c, const BasePoint& x,
                                                const std::vector<long long>& ns);

// Sorted log singular values of rho(n, x).
Eigen::VectorXd aplus_cocycle(const CocycleSystem& c, long long n, const BasePoint& x);

}  // namespace flagdyn

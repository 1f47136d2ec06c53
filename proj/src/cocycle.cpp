#include "flagdyn/cocycle.hpp"

#include <Eigen/LU>
#include <Eigen/QR>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace flagdyn {

namespace {

constexpr double kDetTol = 1e-9;

void check_square_invertible(const Eigen::MatrixXd& m, const char* what) {
  if (m.rows() != m.cols() || m.rows() < 1) {
    throw std::invalid_argument(std::string(what) + ": matrix must be square");
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
  double smin = svd.singularValues()(m.rows() - 1);
  double smax = svd.singularValues()(0);
  if (!(smin > 0.0) || smin < 1e-12 * smax) {
    throw std::invalid_argument(std::string(what) + ": matrix is singular");
  }
}

class TableImpl : public GeneratorImpl {
 public:
  explicit TableImpl(std::vector<Eigen::MatrixXd> mats) : mats_(std::move(mats)) {
    if (mats_.empty()) throw std::invalid_argument("generator table is empty");
    for (const auto& m : mats_) {
      check_square_invertible(m, "generator table");
      if (m.rows() != mats_[0].rows()) {
        throw std::invalid_argument("generator table: mixed dimensions");
      }
    }
  }
  Eigen::MatrixXd at(const BasePoint& x) const override { return mats_.at(x.symbol(0)); }
  Eigen::MatrixXd at_word(const std::vector<int>& w, int pos) const override {
    return mats_.at(w.at(pos));
  }
  int dim() const override { return static_cast<int>(mats_[0].rows()); }
  int window() const override { return 1; }

 private:
  std::vector<Eigen::MatrixXd> mats_;
};

class ConstantImpl : public GeneratorImpl {
 public:
  explicit ConstantImpl(Eigen::MatrixXd m) : m_(std::move(m)) {
    check_square_invertible(m_, "constant generator");
  }
  Eigen::MatrixXd at(const BasePoint&) const override { return m_; }
  Eigen::MatrixXd at_word(const std::vector<int>&, int) const override { return m_; }
  int dim() const override { return static_cast<int>(m_.rows()); }
  int window() const override { return 0; }

 private:
  Eigen::MatrixXd m_;
};

class RotationFamilyImpl : public GeneratorImpl {
 public:
  RotationFamilyImpl(double c0, double c1, Eigen::Vector2d diag) : c0_(c0), c1_(c1), diag_(diag) {
    if (diag_.cwiseAbs().minCoeff() <= 0.0) {
      throw std::invalid_argument("rotation family: diagonal must be nonzero");
    }
  }
  Eigen::MatrixXd at(const BasePoint& x) const override {
    if (x.kind != BaseKind::IrrationalRotation) {
      throw std::invalid_argument("rotation family generator needs a rotation base point");
    }
    double th = 2.0 * M_PI * (c0_ + c1_ * x.coord);
    Eigen::Matrix2d r;
    r << std::cos(th), -std::sin(th), std::sin(th), std::cos(th);
    Eigen::Matrix2d m = r * diag_.asDiagonal();
    return m;
  }
  int dim() const override { return 2; }
  int window() const override { return -1; }

 private:
  double c0_, c1_;
  Eigen::Vector2d diag_;
};

class GaugeImpl : public GeneratorImpl {
 public:
  GaugeImpl(Generator sigma, Generator inner) : sigma_(std::move(sigma)), inner_(std::move(inner)) {
    if (sigma_.dim() != inner_.dim()) {
      throw std::invalid_argument("gauge: dimension mismatch");
    }
  }
  Eigen::MatrixXd at(const BasePoint& x) const override {
    return sigma_.at(step(x)) * inner_.at(x);
  }
  Eigen::MatrixXd at_word(const std::vector<int>& w, int pos) const override {
    return sigma_.at_word(w, pos + 1) * inner_.at_word(w, pos);
  }
  int dim() const override { return inner_.dim(); }
  int window() const override {
    if (sigma_.window() < 0 || inner_.window() < 0) return -1;
    return std::max(inner_.window(), 1 + sigma_.window());
  }

 private:
  Generator sigma_;
  Generator inner_;
};

class ReversedImpl : public GeneratorImpl {
 public:
  ReversedImpl(Generator inner, bool inner_reversed)
      : inner_(std::move(inner)), inner_reversed_(inner_reversed) {}
  Eigen::MatrixXd at(const BasePoint& x) const override {
    BasePoint y = inner_reversed_ ? step(x) : step_inv(x);
    Eigen::MatrixXd a = inner_.at(y);
    return a.partialPivLu().inverse();
  }
  int dim() const override { return inner_.dim(); }
  int window() const override { return -1; }

 private:
  Generator inner_;
  bool inner_reversed_;
};

}  // namespace

Eigen::MatrixXd GeneratorImpl::at_word(const std::vector<int>&, int) const {
  throw std::invalid_argument("generator does not support cylinder evaluation");
}

Generator Generator::table(std::vector<Eigen::MatrixXd> mats) {
  Generator g;
  g.impl_ = std::make_shared<TableImpl>(std::move(mats));
  return g;
}
Generator Generator::constant(Eigen::MatrixXd m) {
  Generator g;
  g.impl_ = std::make_shared<ConstantImpl>(std::move(m));
  return g;
}
Generator Generator::rotation_family(double c0, double c1, Eigen::Vector2d diag_entries) {
  Generator g;
  g.impl_ = std::make_shared<RotationFamilyImpl>(c0, c1, diag_entries);
  return g;
}
Generator Generator::gauge(Generator sigma, Generator inner) {
  Generator g;
  g.impl_ = std::make_shared<GaugeImpl>(std::move(sigma), std::move(inner));
  return g;
}
Generator Generator::reversed_of(Generator inner, bool inner_reversed) {
  Generator g;
  g.impl_ = std::make_shared<ReversedImpl>(std::move(inner), inner_reversed);
  return g;
}

void CocycleSystem::validate() const {
  if (!gen.valid()) throw std::invalid_argument("cocycle: generator not set");
  if (d != gen.dim()) throw std::invalid_argument("cocycle: dimension mismatch");
  if (variant == Variant::Sl) {
    // spot-check determinants on a few points
    std::vector<BasePoint> pts;
    if (base.kind == BaseKind::PeriodicOrbit) {
      for (int i = 0; i < base.period; ++i) {
        BasePoint p;
        p.kind = base.kind;
        p.index = i;
        p.period = base.period;
        pts.push_back(p);
      }
    } else if (base.kind == BaseKind::IrrationalRotation) {
      pts = sample(base, MeasureDescriptor::lebesgue(), 8, 101);
    } else {
      pts = sample(base, MeasureDescriptor::product(), 8, 101);
    }
    for (const auto& x : pts) {
      double det = A(x).determinant();
      if (std::abs(std::abs(det) - 1.0) > kDetTol) {
        throw std::invalid_argument("cocycle: sl variant requires |det| = 1");
      }
    }
  }
}

CocycleSystem make_cocycle(BaseSystem base, Generator gen, Variant variant) {
  CocycleSystem c{std::move(base), std::move(gen), 0, variant, false};
  c.d = c.gen.dim();
  c.validate();
  return c;
}

CocycleSystem gauge_perturb(const CocycleSystem& c, const Generator& sigma) {
  if (c.reversed) throw std::invalid_argument("gauge_perturb: apply before time reversal");
  CocycleSystem out = c;
  out.gen = Generator::gauge(sigma, c.gen);
  return out;
}

CocycleSystem time_reversed(const CocycleSystem& c) {
  CocycleSystem out = c;
  out.gen = Generator::reversed_of(c.gen, c.reversed);
  out.reversed = !c.reversed;
  return out;
}

ScaledMatrix ScaledMatrix::identity(int d) {
  ScaledMatrix s;
  s.m = Eigen::MatrixXd::Identity(d, d);
  double nrm = s.m.norm();
  s.m /= nrm;
  s.log_scale = std::log(nrm);
  return s;
}

ScaledMatrix ScaledMatrix::times(const Eigen::MatrixXd& left) const {
  ScaledMatrix out;
  out.m = left * m;
  double nrm = out.m.norm();
  if (!(nrm > 0.0) || !std::isfinite(nrm)) {
    throw decomposition_error("cocycle product degenerated");
  }
  out.m /= nrm;
  out.log_scale = log_scale + std::log(nrm);
  return out;
}

ScaledMatrix compose(const ScaledMatrix& a, const ScaledMatrix& b) {
  ScaledMatrix out = b.times(a.m);
  out.log_scale += a.log_scale;
  return out;
}

ScaledMatrix cocycle_product(const CocycleSystem& c, long long n, const BasePoint& x) {
  ScaledMatrix acc = ScaledMatrix::identity(c.d);
  if (n >= 0) {
    BasePoint y = x;
    for (long long j = 0; j < n; ++j) {
      acc = acc.times(c.A(y));
      y = c.advance(y);
    }
  } else {
    // rho(-k, x) = A(phi^{-k} x)^{-1} ... A(phi^{-1} x)^{-1}
    BasePoint y = x;
    for (long long j = 0; j < -n; ++j) {
      y = c.advance_inv(y);
      acc = acc.times(c.A(y).partialPivLu().inverse());
    }
  }
  return acc;
}

Eigen::VectorXd a_cocycle(const CocycleSystem& c, long long n, const FlagBundlePoint& xi) {
  if (n < 0) throw std::invalid_argument("a_cocycle: n must be nonnegative");
  const int d = c.d;
  if (xi.b.frame.rows() != d) throw std::invalid_argument("a_cocycle: dimension mismatch");
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(d);
  Eigen::MatrixXd q = xi.b.frame;
  BasePoint y = xi.x;
  for (long long j = 0; j < n; ++j) {
    IwasawaFactors f = iwasawa(c.A(y) * q);
    acc += f.a.array().log().matrix();
    q = f.k;
    y = c.advance(y);
  }
  return acc;
}

FlagBundlePoint flow_step(const CocycleSystem& c, const FlagBundlePoint& xi) {
  return {c.advance(xi.x), act(c.A(xi.x), xi.b)};
}

FlagBundlePoint flow_step_inv(const CocycleSystem& c, const FlagBundlePoint& xi) {
  BasePoint y = c.advance_inv(xi.x);
  Eigen::MatrixXd ainv = c.A(y).partialPivLu().inverse();
  return {y, act(ainv, xi.b)};
}

FlagBundlePoint flow_n(const CocycleSystem& c, long long n, FlagBundlePoint xi) {
  for (long long j = 0; j < n; ++j) xi = flow_step(c, xi);
  for (long long j = 0; j > n; --j) xi = flow_step_inv(c, xi);
  return xi;
}

namespace {

// Columns u_j (unit) with log scales s_j represent the matrix
// [.. u_j e^{s_j} ..]. Orthogonalizing the columns turns it into U diag(e^s),
// an SVD in factored form. Pairs with a huge scale gap are handled by plain
// Gram-Schmidt of the small column against the large one; comparable pairs
// get a two-sided-safe Jacobi rotation on the 2x2 Gram matrix.
struct ScaledColumns {
  Eigen::MatrixXd u;
  Eigen::VectorXd s;

  void renormalize_columns() {
    for (int j = 0; j < u.cols(); ++j) {
      double nrm = u.col(j).norm();
      if (!(nrm > 0.0) || !std::isfinite(nrm)) {
        throw decomposition_error("product svd: column collapsed");
      }
      u.col(j) /= nrm;
      s(j) += std::log(nrm);
    }
  }

  void orthogonalize() {
    const int d = static_cast<int>(u.cols());
    const int max_sweeps = 60;
    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
      double worst = 0.0;
      for (int p = 0; p < d; ++p) {
        for (int q = p + 1; q < d; ++q) {
          int a = p, b = q;  // a = larger scale
          if (s(b) > s(a)) std::swap(a, b);
          double g = u.col(a).dot(u.col(b));
          worst = std::max(worst, std::abs(g));
          if (std::abs(g) <= 1e-14) continue;
          double delta = s(b) - s(a);  // <= 0
          double e = std::exp(delta);
          if (e < 1e-13) {
            // scale gap dominates: project the small column only
            Eigen::VectorXd w = u.col(b) - g * u.col(a);
            double nrm = w.norm();
            if (nrm < 1e-14) {
              throw decomposition_error("product svd: columns numerically dependent");
            }
            u.col(b) = w / nrm;
            s(b) += std::log(nrm);
          } else {
            // Gram of (col_a, col_b) in units of e^{2 s_a}:
            //   [[1, g e], [g e, e^2]]
            double cgram = g * e;
            double tau = (e * e - 1.0) / (2.0 * cgram);
            double t = (tau >= 0 ? 1.0 : -1.0) / (std::abs(tau) + std::sqrt(1.0 + tau * tau));
            double cs = 1.0 / std::sqrt(1.0 + t * t);
            double sn = t * cs;
            Eigen::VectorXd va = cs * u.col(a) - sn * e * u.col(b);
            Eigen::VectorXd vb = sn * u.col(a) + cs * e * u.col(b);
            double na = va.norm(), nb = vb.norm();
            if (na < 1e-300 || nb < 1e-300) {
              throw decomposition_error("product svd: columns numerically dependent");
            }
            u.col(a) = va / na;
            u.col(b) = vb / nb;
            double base = s(a);
            s(a) = base + std::log(na);
            s(b) = base + std::log(nb);
          }
        }
      }
      if (worst <= 1e-14) return;
    }
    // verify residual orthogonality rather than trusting the sweep count
    for (int p = 0; p < d; ++p) {
      for (int q = p + 1; q < d; ++q) {
        if (std::abs(u.col(p).dot(u.col(q))) > 1e-10) {
          throw decomposition_error("product svd: jacobi sweeps did not converge");
        }
      }
    }
  }

  ProductSvd sorted(long long n) const {
    const int d = static_cast<int>(u.cols());
    std::vector<int> idx(d);
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](int i, int j) { return s(i) > s(j); });
    ProductSvd out;
    out.U.resize(u.rows(), d);
    out.log_sigma.resize(d);
    for (int j = 0; j < d; ++j) {
      out.U.col(j) = u.col(idx[j]);
      out.log_sigma(j) = s(idx[j]);
    }
    out.n = n;
    return out;
  }
};

}  // namespace

std::vector<ProductSvd> product_svd_checkpoints(const CocycleSystem& c, const BasePoint& x,
                                                const std::vector<long long>& ns) {
  if (ns.empty()) return {};
  for (size_t i = 0; i < ns.size(); ++i) {
    if (ns[i] < 1 || (i > 0 && ns[i] <= ns[i - 1])) {
      throw std::invalid_argument("product_svd_checkpoints: need ascending positive steps");
    }
  }
  const int d = c.d;
  ScaledColumns cols{Eigen::MatrixXd::Identity(d, d), Eigen::VectorXd::Zero(d)};
  std::vector<ProductSvd> out;
  out.reserve(ns.size());
  BasePoint y = x;
  size_t next = 0;
  for (long long j = 0; j < ns.back(); ++j) {
    cols.u = c.A(y) * cols.u;
    cols.renormalize_columns();
    cols.orthogonalize();
    y = c.advance(y);
    if (j + 1 == ns[next]) {
      out.push_back(cols.sorted(j + 1));
      ++next;
    }
  }
  return out;
}

ProductSvd product_svd(const CocycleSystem& c, long long n, const BasePoint& x) {
  if (n < 1) throw std::invalid_argument("product_svd: n must be positive");
  return product_svd_checkpoints(c, x, {n}).front();
}

Eigen::VectorXd aplus_cocycle(const CocycleSystem& c, long long n, const BasePoint& x) {
  return product_svd(c, n, x).log_sigma;
}

}  // namespace flagdyn

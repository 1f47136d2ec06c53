#include "flagdyn/spectrum.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace flagdyn {

namespace {

// For sl cocycles the true entry sum is zero; remove accumulated float drift
// so ChamberVector validation stays exact.
Eigen::VectorXd recenter_if_sl(Eigen::VectorXd v, Variant variant) {
  if (variant == Variant::Sl) v.array() -= v.mean();
  return v;
}

}  // namespace

SpectrumEstimate estimate_polar_exponent(const CocycleSystem& c, const MeasureDescriptor& mu,
                                         long long n, int k, std::uint64_t stream,
                                         double gap_tol_override, int threads) {
  if (n < 1 || k < 1) throw std::invalid_argument("estimate_polar_exponent: n, k >= 1");
  auto pts = sample(c.base, mu, k, stream);
  const int d = c.d;
  const long long half = std::max<long long>(1, n / 2);

  std::vector<Eigen::VectorXd> at_n(k), at_half(k);
  parallel_for(k, threads, [&](int i) {
    if (half < n) {
      auto cps = product_svd_checkpoints(c, pts[i], {half, n});
      at_half[i] = cps[0].log_sigma / static_cast<double>(half);
      at_n[i] = cps[1].log_sigma / static_cast<double>(n);
    } else {
      at_n[i] = product_svd(c, n, pts[i]).log_sigma / static_cast<double>(n);
      at_half[i] = at_n[i];
    }
  });

  Eigen::VectorXd mean = Eigen::VectorXd::Zero(d), mean_half = Eigen::VectorXd::Zero(d);
  for (int i = 0; i < k; ++i) {
    mean += at_n[i];
    mean_half += at_half[i];
  }
  mean /= k;
  mean_half /= k;

  Eigen::VectorXd se = Eigen::VectorXd::Zero(d);
  if (k >= 2) {
    for (int i = 0; i < k; ++i) se += (at_n[i] - mean).cwiseAbs2();
    se = (se / (static_cast<double>(k) * (k - 1))).cwiseSqrt();
  }

  SpectrumEstimate out;
  out.H = chamber_project(recenter_if_sl(mean, c.variant), c.variant);
  out.n_used = n;
  out.samples = k;
  out.std_error = se;
  out.method = "iterative";
  out.half_diff = (mean - mean_half).cwiseAbs().maxCoeff();
  out.converged = true;
  for (int j = 0; j < d; ++j) {
    if (std::abs(mean(j) - mean_half(j)) > 10.0 * se(j) + 1e-9) out.converged = false;
  }
  out.gap_tol = gap_tol_override > 0 ? gap_tol_override
                                     : 10.0 * (k >= 2 ? se.maxCoeff() : 0.0) + 1e-6;
  out.theta = theta_of(out.H, out.gap_tol);
  return out;
}

SpectrumEstimate periodic_spectrum(const CocycleSystem& c, const std::vector<int>& word) {
  if (word.empty()) throw std::invalid_argument("periodic_spectrum: empty word");
  if (c.base.kind == BaseKind::IrrationalRotation) {
    throw std::invalid_argument("periodic_spectrum: rotation base has no periodic words");
  }
  BasePoint x = periodic_point(c.base, word, 0);
  const long long w = static_cast<long long>(word.size());
  ScaledMatrix rho = cocycle_product(c, w, x);
  JordanData jd = jordan_multiplicative(rho.m, 1e-9, Variant::Gl);

  Eigen::VectorXd H = (jd.log_moduli.entries.array() + rho.log_scale) / static_cast<double>(w);
  SpectrumEstimate out;
  out.H = chamber_project(recenter_if_sl(H, c.variant), c.variant);
  out.n_used = w;
  out.samples = 1;
  out.std_error = Eigen::VectorXd::Zero(c.d);
  out.method = "exact-periodic";
  out.gap_tol = 1e-9;
  out.theta = theta_of(out.H, out.gap_tol);
  out.half_diff = 0.0;
  out.converged = true;
  out.degraded = jd.degraded;
  return out;
}

SectionFlagResult attractor_flag(const CocycleSystem& c, const BasePoint& x,
                                 const ThetaSet& theta, long long m, double tol,
                                 int max_doublings) {
  if (m < 2) throw std::invalid_argument("attractor_flag: m >= 2");
  auto flag_at = [&](long long look) {
    BasePoint past = c.advance_n(x, -look);
    ProductSvd f = product_svd(c, look, past);
    return project(full_flag(f.U), theta);
  };
  long long look = m;
  Flag prev = flag_at(look / 2);
  Flag cur = flag_at(look);
  double delta = flag_distance(prev, cur);
  int doublings = 0;
  while (delta >= tol && doublings < max_doublings) {
    prev = cur;
    look *= 2;
    cur = flag_at(look);
    delta = flag_distance(prev, cur);
    ++doublings;
  }
  return {cur, look, delta, delta < tol};
}

SectionFlagResult repeller_flag(const CocycleSystem& c, const BasePoint& x,
                                const ThetaSet& theta_star, long long m, double tol,
                                int max_doublings) {
  return attractor_flag(time_reversed(c), x, theta_star, m, tol, max_doublings);
}

SectionSample sample_sections(const CocycleSystem& c, const MeasureDescriptor& mu,
                              const ThetaSet& theta, int k, long long m, std::uint64_t stream,
                              int threads) {
  auto pts = sample(c.base, mu, k, stream);
  CocycleSystem rev = time_reversed(c);
  ThetaSet dual = dual_theta(theta);
  SectionSample out;
  out.points.resize(k);
  out.lookback = m;
  parallel_for(k, threads, [&](int i) {
    SectionFlagResult att = attractor_flag(c, pts[i], theta, m);
    SectionFlagResult rep = attractor_flag(rev, pts[i], dual, m);
    out.points[i] = {pts[i], att.flag, rep.flag, transversal_margin(att.flag, rep.flag),
                     att.converged && rep.converged};
  });
  return out;
}

FlagExponent flag_exponent(const CocycleSystem& c, const FlagBundlePoint& xi, long long n,
                           const SpectrumEstimate& spectrum) {
  if (!xi.b.type.is_empty()) throw std::invalid_argument("flag_exponent: full flag required");
  if (n < 1) throw std::invalid_argument("flag_exponent: n >= 1");
  FlagExponent out;
  out.lambda = a_cocycle(c, n, xi) / static_cast<double>(n);

  auto group = weyl_subgroup(ThetaSet::full(c.d));
  std::vector<Eigen::VectorXd> seen;
  double best = std::numeric_limits<double>::infinity();
  double second = std::numeric_limits<double>::infinity();
  for (const auto& w : group) {
    Eigen::VectorXd cand = w.apply(spectrum.H.entries);
    bool dup = false;
    for (const auto& s : seen) {
      if ((s - cand).norm() <= 1e-12) {
        dup = true;
        break;
      }
    }
    if (dup) continue;
    seen.push_back(cand);
    double r = (out.lambda - cand).norm();
    if (r < best) {
      second = best;
      best = r;
      out.w = w;
    } else if (r < second) {
      second = r;
    }
  }
  out.residual = best;
  out.runner_up = second;
  out.ambiguous = std::isfinite(second) && second < 2.0 * best;
  return out;
}

std::vector<double> vertical_exponents(const ChamberVector& H, const ThetaSet& theta) {
  if (H.dim() != theta.dim()) {
    throw std::invalid_argument("vertical_exponents: dimension mismatch");
  }
  // block id per position
  std::vector<int> block(H.dim());
  int b = 0;
  for (int i = 0; i < H.dim(); ++i) {
    block[i] = b;
    if (i < H.dim() - 1 && !theta.contains(i)) ++b;
  }
  std::vector<double> out;
  for (int i = 0; i < H.dim(); ++i) {
    for (int j = i + 1; j < H.dim(); ++j) {
      if (block[i] != block[j]) out.push_back(H.entries(j) - H.entries(i));
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

CentralEstimate central_exponent(const CocycleSystem& c, const MeasureDescriptor& mu,
                                 long long n, int k, std::uint64_t stream) {
  if (n < 1 || k < 1) throw std::invalid_argument("central_exponent: n, k >= 1");
  auto pts = sample(c.base, mu, k, stream);
  std::vector<double> vals(k);
  for (int i = 0; i < k; ++i) {
    BasePoint y = pts[i];
    double acc = 0.0;
    for (long long j = 0; j < n; ++j) {
      acc += std::log(std::abs(c.A(y).determinant()));
      y = c.advance(y);
    }
    vals[i] = acc / (static_cast<double>(n) * c.d);
  }
  CentralEstimate out;
  for (double v : vals) out.value += v;
  out.value /= k;
  if (k >= 2) {
    double s2 = 0.0;
    for (double v : vals) s2 += (v - out.value) * (v - out.value);
    out.std_error = std::sqrt(s2 / (static_cast<double>(k) * (k - 1)));
  }
  return out;
}

}  // namespace flagdyn

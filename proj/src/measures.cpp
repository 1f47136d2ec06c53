#include "flagdyn/measures.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

namespace flagdyn {

OccupationMeasure occupation_measure(const CocycleSystem& c,
                                     const FlagBundlePoint& xi, long long n) {
  if (n < 1) throw std::invalid_argument("occupation measure: horizon must be >= 1");
  if (xi.b.type.dim() != c.d)
    throw std::invalid_argument("occupation measure: flag dimension mismatch");
  OccupationMeasure out;
  out.origin = xi;
  out.horizon = n;
  out.points.reserve(static_cast<std::size_t>(n));
  FlagBundlePoint cur = xi;
  for (long long k = 0; k < n; ++k) {
    out.points.push_back(cur);
    cur = flow_step(c, cur);
  }
  return out;
}

Eigen::VectorXd integral_q(const CocycleSystem& c, const OccupationMeasure& mu) {
  if (mu.points.empty())
    throw std::invalid_argument("integral_q: empty support");
  const ThetaSet full_type = ThetaSet::empty(c.d);
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(c.d);
  for (const FlagBundlePoint& p : mu.points) {
    if (!(p.b.type == full_type))
      throw std::invalid_argument("integral_q: support must consist of full flags");
    acc += a_cocycle(c, 1, p);
  }
  return acc / static_cast<double>(mu.points.size());
}

MeasureClass classify(const Eigen::VectorXd& lyapunov, double tol) {
  const int d = static_cast<int>(lyapunov.size());
  if (d < 1) throw std::invalid_argument("classify: empty vector");
  MeasureClass out;
  out.lyapunov = lyapunov;

  bool dominant = true;      // all adjacent differences >= -tol
  bool anti_dominant = true; // all adjacent differences <= tol
  for (int i = 0; i + 1 < d; ++i) {
    const double diff = lyapunov(i) - lyapunov(i + 1);
    if (diff < -tol) dominant = false;
    if (diff > tol) anti_dominant = false;
  }
  if (dominant) {
    out.label = MeasureLabel::Attractor;
    out.boundary = anti_dominant;
  } else if (anti_dominant) {
    out.label = MeasureLabel::Repeller;
  } else {
    out.label = MeasureLabel::Neither;
  }

  // Stable descending argsort: w^{-1}(i) is the original position of the
  // i-th largest entry, so (w . lyapunov) is sorted non-increasing.
  std::vector<int> order(static_cast<std::size_t>(d));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return lyapunov(a) > lyapunov(b);
  });
  std::vector<int> images(static_cast<std::size_t>(d));
  for (int i = 0; i < d; ++i) images[static_cast<std::size_t>(order[i])] = i;
  out.coset = WeylElement(images);
  return out;
}

std::vector<FiberMeasure> ergodic_fiber_measures_over_periodic(
    const CocycleSystem& c, const MeasureDescriptor& rho, const ThetaSet& theta) {
  if (rho.kind != MeasureDescriptor::Kind::PeriodicWord || rho.word.empty())
    throw std::invalid_argument("fiber measures: periodic-word base measure required");
  const long long period = static_cast<long long>(rho.word.size());
  const BasePoint x0 = periodic_point(c.base, rho.word, 0);
  std::vector<FiberMeasure> out;
  for (PeriodicMorseComponent& pc : periodic_morse(c, rho.word, theta)) {
    FiberMeasure fm;
    fm.measure = occupation_measure(c, FlagBundlePoint{x0, pc.component.representative}, period);
    fm.cls = classify(pc.exponent, 1e-8);
    fm.component = std::move(pc);
    out.push_back(std::move(fm));
  }
  return out;
}

}  // namespace flagdyn

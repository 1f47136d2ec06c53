#pragma once

#include <vector>

#include <Eigen/Dense>

#include "flagdyn/base_system.hpp"
#include "flagdyn/cocycle.hpp"
#include "flagdyn/flags.hpp"
#include "flagdyn/morse.hpp"
#include "flagdyn/weyl.hpp"

namespace flagdyn {

// Empirical measure on the flag bundle: n orbit points, each of weight 1/n.
struct OccupationMeasure {
  std::vector<FlagBundlePoint> points;
  FlagBundlePoint origin;
  long long horizon = 0;
};

// Forward-orbit occupation measure started at xi, horizon n >= 1.
// The support consists of xi, flow(xi), ..., flow^{n-1}(xi).
OccupationMeasure occupation_measure(const CocycleSystem& c,
                                     const FlagBundlePoint& xi, long long n);

// Mean of the one-step log-diagonal observable over the support.  Requires
// full-flag support (otherwise the per-entry values depend on the frame
// completion, not just the flag).  By construction
//   integral_q(c, mu_n(xi)) == a_cocycle(c, n, xi) / n
// up to roundoff, so this is the Birkhoff average of the a-cocycle.
Eigen::VectorXd integral_q(const CocycleSystem& c, const OccupationMeasure& mu);

enum class MeasureLabel { Attractor, Repeller, Neither };

// Classification of an invariant measure by its Lyapunov vector.
struct MeasureClass {
  MeasureLabel label = MeasureLabel::Neither;
  Eigen::VectorXd lyapunov;
  WeylElement coset;   // w with w . lyapunov sorted non-increasing (stable)
  bool boundary = false;  // lyapunov lies in both closed cones (all ties)
};

// Attractor iff lyapunov is in the closed dominant cone (adjacent differences
// >= -tol), repeller dually.  Vectors in both cones — in particular the zero
// vector — report Attractor with the boundary flag set.  The coset is the
// Weyl element sorting the vector, ties broken by original position.
MeasureClass classify(const Eigen::VectorXd& lyapunov, double tol = 1e-9);

// One ergodic invariant measure on the flag bundle over a periodic base
// measure: the uniform measure on the (periodic) orbit of a fixed-component
// representative, together with its class and the underlying component.
struct FiberMeasure {
  OccupationMeasure measure;
  MeasureClass cls;
  PeriodicMorseComponent component;
};

// All ergodic fiber measures over the periodic-word base measure rho, one per
// fixed-point component of the period map on the theta-flag fiber.  The class
// is computed from the exact per-step component exponent.
std::vector<FiberMeasure> ergodic_fiber_measures_over_periodic(
    const CocycleSystem& c, const MeasureDescriptor& rho, const ThetaSet& theta);

}  // namespace flagdyn

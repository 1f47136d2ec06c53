#pragma once

// Lyapunov/polar spectrum estimation: Monte Carlo estimates with convergence
// diagnostics, exact spectra over periodic words, attractor/repeller section
// flags by the far-past push-forward, per-flag exponents classified to Weyl
// cosets, vertical exponents, and the central (determinant) exponent.

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "flagdyn/cocycle.hpp"

namespace flagdyn {

struct SpectrumEstimate {
  ChamberVector H;            // per-step log rates, sorted
  ThetaSet theta;             // block structure of H at gap_tol
  long long n_used = 0;
  int samples = 0;
  Eigen::VectorXd std_error;  // per-entry standard error of the mean
  std::string method;         // "iterative" or "exact-periodic"
  double gap_tol = 0.0;
  double half_diff = 0.0;     // |H(n) - H(n/2)|_inf
  bool converged = true;
  bool degraded = false;      // exact method: jordan invariance residual poor
};

// Mean of (1/n) aplus over k points sampled from mu. Convergence compares the
// n/2 and n horizons against 10 * stderr (small absolute float allowance).
// gap_tol_override < 0 means the default 10 * max stderr + 1e-6.
SpectrumEstimate estimate_polar_exponent(const CocycleSystem& c, const MeasureDescriptor& mu,
                                         long long n, int k, std::uint64_t stream = 0,
                                         double gap_tol_override = -1.0, int threads = 1);

// Exact spectrum of the periodic word: (1/len) log-moduli of the period
// product, stderr zero.
SpectrumEstimate periodic_spectrum(const CocycleSystem& c, const std::vector<int>& word);

struct SectionFlagResult {
  Flag flag;
  long long m_used = 0;
  double delta = 0.0;  // flag distance between half and full lookback
  bool converged = false;
};

// Forward-attracting flag at x: left singular flag of rho(m, phi^{-m} x),
// projected to the requested type. The lookback doubles until two successive
// results agree to tol, up to max_doublings.
SectionFlagResult attractor_flag(const CocycleSystem& c, const BasePoint& x,
                                 const ThetaSet& theta, long long m, double tol = 1e-6,
                                 int max_doublings = 6);

// Attractor of the time-reversed system; theta_star should be the dual type.
SectionFlagResult repeller_flag(const CocycleSystem& c, const BasePoint& x,
                                const ThetaSet& theta_star, long long m, double tol = 1e-6,
                                int max_doublings = 6);

struct SectionPoint {
  BasePoint x;
  Flag attractor;
  Flag repeller;
  double margin = 0.0;  // transversal margin of the pair
  bool converged = false;
};

struct SectionSample {
  std::vector<SectionPoint> points;
  long long lookback = 0;
};

SectionSample sample_sections(const CocycleSystem& c, const MeasureDescriptor& mu,
                              const ThetaSet& theta, int k, long long m,
                              std::uint64_t stream = 0, int threads = 1);

struct FlagExponent {
  Eigen::VectorXd lambda;  // (1/n) a_cocycle
  WeylElement w;           // lambda ~ w.apply(H) for the best coset
  double residual = 0.0;
  double runner_up = 0.0;  // residual of the best distinct other coset
  bool ambiguous = false;  // runner_up < 2 * residual
};

// Classifies the exponent vector of a full flag to the nearest w H_Ly over
// the Weyl orbit (cosets of the stabilizer of H_Ly collapse automatically).
FlagExponent flag_exponent(const CocycleSystem& c, const FlagBundlePoint& xi, long long n,
                           const SpectrumEstimate& spectrum);

// {H[j] - H[i] : i < j in distinct theta-blocks}, sorted ascending.
std::vector<double> vertical_exponents(const ChamberVector& H, const ThetaSet& theta);

struct CentralEstimate {
  double value = 0.0;
  double std_error = 0.0;
};

// Monte Carlo mean of (1/d) log|det A(x)| under mu.
CentralEstimate central_exponent(const CocycleSystem& c, const MeasureDescriptor& mu,
                                 long long n, int k, std::uint64_t stream = 0);

}  // namespace flagdyn

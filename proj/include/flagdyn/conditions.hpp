#pragma once

// The three equality conditions, their conjunction verdict with chain-graph
// cross-validation, the uniquely-ergodic analysis, the i.i.d. regularity demo,
// and the gauge-continuity experiment.

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "flagdyn/base_system.hpp"
#include "flagdyn/cocycle.hpp"
#include "flagdyn/measures.hpp"
#include "flagdyn/morse.hpp"
#include "flagdyn/spectrum.hpp"
#include "flagdyn/weyl.hpp"

namespace flagdyn {

// ---- condition 1: uniform transversality of the section pair ----

struct BoundedSectionReport {
  double tau = 1e-4;
  double min_margin = 0.0;
  int samples = 0;   // converged pairs measured
  int excluded = 0;  // non-converged pairs, excluded from the minimum
  long long lookback = 0;
  std::vector<double> bin_edges;  // margin histogram (log-spaced bins)
  std::vector<int> bin_counts;
  bool vacuous = false;  // trivial flag type: nothing to separate
  bool pass = false;
};

BoundedSectionReport check_bounded_section(const CocycleSystem& c, const MeasureDescriptor& mu,
                                           const ThetaSet& theta, int k, long long lookback,
                                           double tau = 1e-4, std::uint64_t stream = 0,
                                           int threads = 1);

// ---- condition 2: periodic spectra refine the invariant-measure spectrum ----

struct OrbitTheta {
  std::vector<int> word;
  ThetaSet theta_rho;
  bool ok = false;
};

struct RefinementReport {
  ThetaSet theta_nu;
  int max_period = 0;
  std::vector<OrbitTheta> orbits;
  int violations = 0;
  bool vacuous = false;  // no periodic measures (rotation base)
  bool pass = false;
};

RefinementReport check_refinement(const CocycleSystem& c, const SpectrumEstimate& nu,
                                  int max_period);

// ---- condition 3: extreme measures near the section classify correctly ----

struct OrbitAttRep {
  std::vector<int> word;
  int in_plus = 0;   // fiber measures within delta of the attractor cloud
  int in_minus = 0;  // dual count against the repeller cloud
  int violations = 0;
  bool inconclusive = false;  // no fiber measure near either cloud
  std::vector<std::string> witnesses;
};

struct AttRepReport {
  ThetaSet theta;
  ThetaSet theta_star;
  double delta = 0.05;
  std::vector<OrbitAttRep> orbits;
  int violations = 0;
  int inconclusive = 0;
  bool vacuous = false;
  bool pass = false;
};

// The attractor set is known only through samples: the membership surrogate is
// a delta-neighborhood of section flags computed at points whose symbol window
// [-lookback, lookback) is conditioned on the periodic word.
AttRepReport check_att_rep(const CocycleSystem& c, const SpectrumEstimate& nu, int max_period,
                           double delta = 0.05, int cond_samples = 12, long long lookback = 64,
                           std::uint64_t stream = 0);

// ---- single containment condition (equivalent to 2 AND 3) ----

struct OrbitContainment {
  std::vector<int> word;
  ThetaSet theta_rho;
  bool projectable = false;  // theta_rho refines theta_nu
  double distance = 0.0;     // max over phases of distance to the section cloud
  bool ok = false;
};

struct SectionContainmentReport {
  ThetaSet theta_nu;
  double delta = 0.05;
  std::vector<OrbitContainment> orbits;
  int violations = 0;
  bool vacuous = false;
  bool pass = false;
};

SectionContainmentReport check_section_containment(const CocycleSystem& c,
                                                   const SpectrumEstimate& nu, int max_period,
                                                   double delta = 0.05, int cond_samples = 12,
                                                   long long lookback = 64,
                                                   std::uint64_t stream = 0);

// ---- conjunction verdict with chain-graph cross-validation ----

struct Verdict {
  ThetaSet theta_ly;
  std::optional<ThetaSet> theta_mo;                      // computed
  std::optional<std::pair<ThetaSet, ThetaSet>> bracket;  // lower/upper bound
  std::string equal;  // "yes" | "no" | "undetermined"
  bool alarm = false; // conditions and computed decomposition disagree
  std::string rationale;
};

Verdict make_verdict(const ThetaSet& theta_ly, bool cond1, bool cond2, bool cond3,
                     const std::optional<ThetaSet>& theta_mo,
                     const std::optional<std::pair<ThetaSet, ThetaSet>>& bracket);

struct CheckOptions {
  long long n = 4096;       // estimation horizon
  int k = 16;               // estimation samples
  int max_period = 3;
  double tau = 1e-4;
  double delta = 0.05;
  int cond_samples = 12;
  long long lookback = 64;
  bool with_theta_mo = true;
  double eps_cells = 1.0;
  int flag_resolution = 24;
  int word_length = 1;
  std::uint64_t seed = 0;
  int threads = 1;
};

struct ConditionReport {
  SpectrumEstimate spectrum;
  BoundedSectionReport bounded_section;
  RefinementReport refinement;
  AttRepReport att_rep;
  SectionContainmentReport containment;
  Verdict verdict;
};

ConditionReport run_condition_checks(const CocycleSystem& c, const MeasureDescriptor& mu,
                                     const CheckOptions& opt = {});

// ---- uniquely ergodic base: singleton hull and polyhedron vertices ----

struct UeOptions {
  long long n = 8192;
  int k = 8;
  double tau = 1e-4;
  int flag_resolution = 48;
  int base_resolution = 64;
  double eps_cells = 1.0;
  int hull_directions = 16;
  std::uint64_t seed = 0;
  int threads = 1;
};

struct UniqueErgodicReport {
  SpectrumEstimate spectrum;
  BoundedSectionReport bounded;              // condition (2) of the equivalence
  std::optional<ThetaSet> theta_mo;          // empty when the grid is ambiguous
  bool theta_match = false;                  // condition (1)
  double root_spread = 0.0;                  // max |alpha(vertex)| over included roots
  bool roots_vanish = false;                 // condition (3)
  double singleton_gap = 0.0;                // attractor hull vs estimated exponent
  double hull_tol = 0.0;
  bool singleton = false;
  std::vector<Eigen::VectorXd> polyhedron_vertices;  // union over all chain sets
  bool polyhedron_vertices_ok = false;       // vertices realize the Weyl orbit
  bool vacuous_2_3 = true;                   // no periodic measures over a rotation
  std::string note;
};

UniqueErgodicReport unique_ergodic_analysis(const CocycleSystem& c, const UeOptions& opt = {});

// ---- i.i.d. regularity demo ----

struct IidDemoOptions {
  std::vector<Eigen::MatrixXd> alphabet;
  std::vector<double> weights;  // empty: uniform
  long long n = 4096;
  int k = 16;
  int max_period = 2;
  CheckOptions checks;  // seeds/threads shared below
  std::uint64_t seed = 0;
  int threads = 1;
};

struct IidDemoReport {
  SpectrumEstimate spectrum;
  std::vector<double> gaps;       // simple roots of the estimate
  std::vector<double> gap_sigma;  // propagated standard errors
  bool regular = false;           // all gaps clear 3 sigma
  ConditionReport conditions;
};

IidDemoReport iid_demo(const IidDemoOptions& opt);

// ---- gauge continuity experiment ----

struct ContinuityOptions {
  std::vector<double> eps;        // perturbation sizes; a 0 row is always added
  Eigen::MatrixXd skew;           // sigma(eps) = exp(eps * skew)
  std::vector<int> j_list;        // partial-sum weights delta_j, 1-based
  std::vector<long long> k_list;  // finite-horizon envelope values
  long long n = 4096;
  int k_samples = 16;
  std::uint64_t seed = 0;
  int threads = 1;
};

struct ContinuityRow {
  double eps = 0.0;
  std::vector<double> delta_j;
  std::vector<double> stderr_j;
  std::vector<std::vector<double>> envelope;     // [j index][k index]
  std::vector<std::vector<double>> envelope_se;  // sampling error of each value
  bool envelope_ok = true;  // each value >= delta_j - 3 * (combined errors)
};

struct ContinuityReport {
  std::vector<int> j_list;
  std::vector<long long> k_list;
  std::vector<ContinuityRow> rows;  // rows[0] is the unperturbed base
  double fitted_c = 0.0;            // max_j |delta_j(eps) - delta_j(0)| <= C eps
  bool monotone_within_noise = true;
  bool envelope_ok = true;
};

ContinuityReport continuity_experiment(const CocycleSystem& c, const ContinuityOptions& opt);

}  // namespace flagdyn

// Acceptance gate for the toolkit: eleven end-to-end criteria, one line of
// output each, exit code = number of failures.  Tolerances are pinned as
// constexpr values inside each criterion so a diff of this file shows every
// numeric gate.  Criterion 11 shells out to the CLI binary baked in at
// configure time.

#include <flagdyn/base_system.hpp>
#include <flagdyn/cocycle.hpp>
#include <flagdyn/common.hpp>
#include <flagdyn/conditions.hpp>
#include <flagdyn/decomp.hpp>
#include <flagdyn/flags.hpp>
#include <flagdyn/measures.hpp>
#include <flagdyn/morse.hpp>
#include <flagdyn/spectrum.hpp>
#include <flagdyn/weyl.hpp>

#include <Eigen/Dense>

#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#ifndef FLAGDYN_CLI_PATH
#define FLAGDYN_CLI_PATH ""
#endif
#ifndef FLAGDYN_CONFIG_DIR
#define FLAGDYN_CONFIG_DIR ""
#endif

namespace {

using Clock = std::chrono::steady_clock;
namespace fs = std::filesystem;
using flagdyn::BaseSystem;
using flagdyn::ChainGraph;
using flagdyn::ChainGraphConfig;
using flagdyn::CocycleSystem;
using flagdyn::CounterRng;
using flagdyn::Flag;
using flagdyn::FlagBundlePoint;
using flagdyn::Generator;
using flagdyn::MeasureDescriptor;
using flagdyn::MorseSet;
using flagdyn::SeqRng;
using flagdyn::ThetaSet;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, ...) {
  char buf[1024];
  va_list ap;
  va_start(ap, f);
  std::vsnprintf(buf, sizeof buf, f, ap);
  va_end(ap);
  return buf;
}

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

Eigen::MatrixXd diag2(double a, double b) {
  Eigen::Matrix2d m = Eigen::Matrix2d::Zero();
  m(0, 0) = a;
  m(1, 1) = b;
  return m;
}

Eigen::MatrixXd diag3(double a, double b, double c) {
  Eigen::Matrix3d m = Eigen::Matrix3d::Zero();
  m(0, 0) = a;
  m(1, 1) = b;
  m(2, 2) = c;
  return m;
}

// Same pinned generic companion letter as configs/iid_degenerate.json.
Eigen::MatrixXd generic_letter3() {
  Eigen::Matrix3d g;
  g << 1.5119159660871186, 0.43408919379098898, 0.64659584181489738,
      0.30295898157441115, 2.4597705998287465, -0.30959121763041741,
      0.36021317207232562, -0.41559866371979881, 1.5281128331499894;
  return g;
}

Eigen::MatrixXd random_square(int d, SeqRng& rng) {
  Eigen::MatrixXd m(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) m(i, j) = rng.sym();
  return m;
}

Eigen::MatrixXd random_invertible(int d, SeqRng& rng) {
  while (true) {
    Eigen::MatrixXd m = random_square(d, rng);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
    if (svd.singularValues()(d - 1) > 0.05 * svd.singularValues()(0)) return m;
  }
}

Eigen::MatrixXd random_orthogonal(int d, SeqRng& rng) {
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(random_square(d, rng));
  Eigen::MatrixXd q = qr.householderQ();
  Eigen::VectorXd diag = qr.matrixQR().diagonal();
  for (int i = 0; i < d; ++i)
    if (diag(i) < 0.0) q.col(i) = -q.col(i);
  return q;
}

// Letter with controlled singular values exp(±spread).
Eigen::MatrixXd random_letter(int d, double spread, SeqRng& rng) {
  Eigen::MatrixXd q1 = random_orthogonal(d, rng);
  Eigen::MatrixXd q2 = random_orthogonal(d, rng);
  Eigen::VectorXd v(d);
  for (int i = 0; i < d; ++i) v(i) = spread * rng.sym();
  return q1 * v.array().exp().matrix().asDiagonal() * q2;
}

CocycleSystem bernoulli_diag() {
  return make_cocycle(BaseSystem::full_shift({0.5, 0.5}, 9),
                      Generator::table({diag2(4.0, 0.25), diag2(2.0, 0.5)}));
}

ChainGraph two_pass_graph(const CocycleSystem& c, double eps_cells, int flag_resolution,
                          int word_length, int base_resolution) {
  ChainGraphConfig cfg;
  cfg.theta = ThetaSet::empty(2);
  cfg.eps = 0.0;
  cfg.flag_resolution = flag_resolution;
  cfg.word_length = word_length;
  cfg.base_resolution = base_resolution;
  ChainGraph probe = build_chain_graph(c, cfg);
  cfg.eps = eps_cells * probe.cell_diameter;
  return build_chain_graph(c, cfg);
}

const MorseSet* find_set(const std::vector<MorseSet>& sets, bool attractor) {
  for (const auto& s : sets) {
    if (attractor && s.is_attractor) return &s;
    if (!attractor && s.is_repeller) return &s;
  }
  return nullptr;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// ---------------------------------------------------------------------------
// 1. Group decompositions are exact on random invertible matrices.
Outcome criterion1() {
  constexpr double kFactorTol = 1e-10;  // relative Frobenius recomposition error
  constexpr double kInvarTol = 1e-10;   // polar entries under orthogonal framing
  constexpr double kDetTol = 1e-8;      // jordan log-moduli sum vs log|det|
  constexpr double kBudgetSeconds = 10.0;
  const auto t0 = Clock::now();

  int checked = 0;
  double worst_factor = 0.0, worst_invar = 0.0, worst_det = 0.0;
  for (int d : {2, 3, 4}) {
    SeqRng rng{CounterRng{0xacc10000ull + static_cast<std::uint64_t>(d)}.stream(1)};
    for (int t = 0; t < 1000; ++t) {
      Eigen::MatrixXd g = random_invertible(d, rng);
      auto f = flagdyn::iwasawa(g);
      Eigen::MatrixXd rec = f.k * f.a.asDiagonal() * f.n;
      worst_factor = std::max(worst_factor, (rec - g).norm() / g.norm());

      auto h = flagdyn::polar_aplus(g);
      Eigen::MatrixXd k1 = random_orthogonal(d, rng);
      Eigen::MatrixXd k2 = random_orthogonal(d, rng);
      auto h2 = flagdyn::polar_aplus(k1 * g * k2);
      for (int i = 0; i < d; ++i)
        worst_invar = std::max(worst_invar, std::fabs(h.entries[i] - h2.entries[i]));

      auto jd = flagdyn::jordan_multiplicative(g);
      double sum = 0.0;
      for (double v : jd.log_moduli.entries) sum += v;
      worst_det =
          std::max(worst_det, std::fabs(sum - std::log(std::fabs(g.determinant()))));
      ++checked;
    }
  }
  const double secs = seconds_since(t0);
  Outcome o;
  o.pass = worst_factor <= kFactorTol && worst_invar <= kInvarTol &&
           worst_det <= kDetTol && secs < kBudgetSeconds;
  o.detail = fmt(
      "%d matrices (d=2,3,4): recomposition %.2e (tol 1e-10), polar invariance %.2e "
      "(tol 1e-10), det sum %.2e (tol 1e-8), %.2fs (budget 10s)",
      checked, worst_factor, worst_invar, worst_det, secs);
  return o;
}

// ---------------------------------------------------------------------------
// 2. Additive and multiplicative cocycle identities over every base kind.
Outcome criterion2() {
  constexpr double kIdentityTol = 1e-8;  // per-instance identity error
  constexpr int kPerBase = 50;
  constexpr long long kMaxStep = 64;

  SeqRng gen_rng{CounterRng{0xacc20000ull}.stream(0)};
  std::vector<std::pair<CocycleSystem, MeasureDescriptor>> systems;
  systems.emplace_back(
      make_cocycle(BaseSystem::periodic_orbit(3, 11),
                   Generator::table({random_letter(2, 0.8, gen_rng),
                                     random_letter(2, 0.8, gen_rng),
                                     random_letter(2, 0.8, gen_rng)})),
      MeasureDescriptor::periodic_word({0, 1, 2}));
  systems.emplace_back(
      make_cocycle(BaseSystem::full_shift({0.5, 0.5}, 13),
                   Generator::table({random_letter(3, 0.8, gen_rng),
                                     random_letter(3, 0.8, gen_rng)})),
      MeasureDescriptor::product());
  systems.emplace_back(
      make_cocycle(BaseSystem::rotation(0.3819660112501051, 5),
                   Generator::rotation_family(0.1, 1.0, Eigen::Vector2d(1.6, 0.625))),
      MeasureDescriptor::lebesgue());
  Eigen::MatrixXi golden(2, 2);
  golden << 1, 1, 1, 0;
  systems.emplace_back(
      make_cocycle(BaseSystem::subshift(golden, 3),
                   Generator::table({random_letter(2, 0.8, gen_rng),
                                     random_letter(2, 0.8, gen_rng)})),
      MeasureDescriptor::product());

  int checked = 0;
  double worst_add = 0.0, worst_mul = 0.0;
  std::uint64_t stream = 100;
  for (const auto& [c, mu] : systems) {
    const int d = c.d;
    SeqRng rng{CounterRng{0xacc20000ull + stream}.stream(2)};
    auto pts = sample(c.base, mu, kPerBase, stream++);
    for (int t = 0; t < kPerBase; ++t) {
      const long long n = 1 + static_cast<long long>(rng.below(kMaxStep));
      const long long m = 1 + static_cast<long long>(rng.below(kMaxStep));
      const auto& x = pts[static_cast<std::size_t>(t)];
      FlagBundlePoint xi{x, flagdyn::full_flag(random_invertible(d, rng))};

      Eigen::VectorXd lhs = a_cocycle(c, n + m, xi);
      Eigen::VectorXd rhs =
          a_cocycle(c, n, flow_n(c, m, xi)) + a_cocycle(c, m, xi);
      worst_add = std::max(worst_add, (lhs - rhs).cwiseAbs().maxCoeff());

      auto whole = cocycle_product(c, n + m, x);
      auto head = cocycle_product(c, n, c.advance_n(x, m));
      auto tail = cocycle_product(c, m, x);
      Eigen::MatrixXd prod = head.m * tail.m;
      const double scale = head.log_scale + tail.log_scale + std::log(prod.norm());
      prod /= prod.norm();
      const double err =
          (whole.m - prod * std::exp(scale - whole.log_scale)).norm();
      worst_mul = std::max(worst_mul, err);
      ++checked;
    }
  }
  Outcome o;
  o.pass = checked == 4 * kPerBase && worst_add <= kIdentityTol &&
           worst_mul <= kIdentityTol;
  o.detail = fmt(
      "%d instances over 4 base kinds (n,m <= 64): additive %.2e, multiplicative "
      "%.2e (tol 1e-8)",
      checked, worst_add, worst_mul);
  return o;
}

// ---------------------------------------------------------------------------
// 3. Iterative estimate matches the exact periodic spectrum; rotation invariance.
Outcome criterion3() {
  constexpr double kEstimateTol = 1e-3;  // per entry, horizon 4096
  constexpr double kRotateTol = 1e-9;    // exact spectrum under word rotation
  constexpr double kMinGap = 0.05;       // skip near-tied period products
  constexpr int kScenarios = 20;
  constexpr long long kHorizon = 4096;

  SeqRng rng{CounterRng{0xacc30000ull}.stream(0)};
  int accepted = 0, skipped = 0, attempt = 0, rotations = 0;
  double worst_est = 0.0, worst_rot = 0.0;
  while (accepted < kScenarios && attempt < 400) {
    ++attempt;
    const int d = 2 + accepted % 2;
    const int omega = 1 + static_cast<int>(rng.below(5));
    // shift base so rotated periodic words genuinely conjugate the product
    const int alphabet = std::max(omega, 2);
    std::vector<Eigen::MatrixXd> letters;
    for (int i = 0; i < alphabet; ++i) letters.push_back(random_letter(d, 1.0, rng));
    std::vector<double> weights(static_cast<std::size_t>(alphabet),
                                1.0 / static_cast<double>(alphabet));
    auto c = make_cocycle(BaseSystem::full_shift(weights, 100 + attempt),
                          Generator::table(letters));
    std::vector<int> word(static_cast<std::size_t>(omega));
    for (int i = 0; i < omega; ++i) word[static_cast<std::size_t>(i)] = i;

    auto exact = periodic_spectrum(c, word);
    bool tied = exact.degraded;
    for (int i = 0; i + 1 < d && !tied; ++i)
      tied = exact.H.entries[static_cast<std::size_t>(i)] -
                 exact.H.entries[static_cast<std::size_t>(i + 1)] <
             kMinGap;
    if (tied) {
      ++skipped;
      continue;
    }

    auto est = estimate_polar_exponent(c, MeasureDescriptor::periodic_word(word),
                                       kHorizon, 4, 7000 + accepted);
    for (int i = 0; i < d; ++i)
      worst_est = std::max(worst_est,
                           std::fabs(est.H.entries[static_cast<std::size_t>(i)] -
                                     exact.H.entries[static_cast<std::size_t>(i)]));

    for (int r = 1; r < omega; ++r) {
      std::vector<int> rot(word.begin() + r, word.end());
      rot.insert(rot.end(), word.begin(), word.begin() + r);
      auto alt = periodic_spectrum(c, rot);
      for (int i = 0; i < d; ++i)
        worst_rot = std::max(worst_rot,
                             std::fabs(alt.H.entries[static_cast<std::size_t>(i)] -
                                       exact.H.entries[static_cast<std::size_t>(i)]));
      ++rotations;
    }
    ++accepted;
  }
  Outcome o;
  o.pass = accepted == kScenarios && rotations >= kScenarios &&
           worst_est <= kEstimateTol && worst_rot <= kRotateTol;
  o.detail = fmt(
      "%d scenarios (d=2,3, period<=5, %d near-tied skipped): estimate vs exact "
      "%.2e (tol 1e-3), word-rotation %.2e over %d rotations (tol 1e-9)",
      accepted, skipped, worst_est, worst_rot, rotations);
  return o;
}

// ---------------------------------------------------------------------------
// 4. Flag exponents classify into Weyl cosets; fixed flags realize every coset.
Outcome criterion4() {
  constexpr double kResidualFrac = 0.05;  // residual < frac * |H|
  constexpr double kCosetTol = 1e-9;      // fiber exponent vs exact, per entry
  constexpr long long kHorizon = 10000;
  constexpr int kFlags = 100;

  auto c = bernoulli_diag();
  auto est = estimate_polar_exponent(c, MeasureDescriptor::product(), 4096, 16, 0);
  Eigen::VectorXd h(2);
  h << est.H.entries[0], est.H.entries[1];
  const double hnorm = h.norm();

  SeqRng rng{CounterRng{0xacc40000ull}.stream(0)};
  auto pts = sample(c.base, MeasureDescriptor::product(), kFlags, 1000);
  int classified = 0;
  double worst_resid = 0.0;
  for (int t = 0; t < kFlags; ++t) {
    FlagBundlePoint xi{pts[static_cast<std::size_t>(t)],
                       flagdyn::full_flag(random_invertible(2, rng))};
    auto fe = flag_exponent(c, xi, kHorizon, est);
    worst_resid = std::max(worst_resid, fe.residual);
    if (fe.residual < kResidualFrac * hnorm) ++classified;
  }

  const std::vector<std::vector<int>> words = {{0}, {1}, {0, 1}, {0, 0, 1}, {0, 1, 1}};
  bool cosets_ok = true;
  double worst_coset = 0.0;
  for (const auto& w : words) {
    auto exact = periodic_spectrum(c, w);
    Eigen::VectorXd hw(2);
    hw << exact.H.entries[0], exact.H.entries[1];
    auto fms = ergodic_fiber_measures_over_periodic(
        c, MeasureDescriptor::periodic_word(w), ThetaSet::empty(2));
    std::set<std::string> seen;
    for (const auto& fm : fms) {
      seen.insert(fm.cls.coset.str());
      Eigen::VectorXd mapped = fm.cls.coset.apply(fm.cls.lyapunov);
      worst_coset = std::max(worst_coset, (mapped - hw).cwiseAbs().maxCoeff());
    }
    cosets_ok = cosets_ok && seen.size() == 2;  // d=2 Weyl group: id and swap
  }
  Outcome o;
  o.pass = classified == kFlags && cosets_ok && worst_coset <= kCosetTol;
  o.detail = fmt(
      "%d/%d flags classified (worst residual %.3f, gate %.3f); 5 periodic words "
      "realize both cosets, fiber exponent error %.2e (tol 1e-9)",
      classified, kFlags, worst_resid, kResidualFrac * hnorm, worst_coset);
  return o;
}

// ---------------------------------------------------------------------------
// 5. Attractor hull of the diagonal scenario matches the exact segment.
Outcome criterion5() {
  constexpr double kVertexTol = 0.05;  // grid tolerance on hull endpoints
  const double log2 = std::log(2.0), log4 = std::log(4.0);

  auto c = bernoulli_diag();
  ChainGraph g = two_pass_graph(c, 1.0, 64, 3, 64);
  auto sets = morse_sets(g);
  const MorseSet* att = find_set(sets, true);
  if (att == nullptr) return {false, "no attractor Morse set found"};
  auto hull = morse_spectrum(g, *att, 16);
  if (hull.vertices.empty()) return {false, "empty attractor hull"};

  double miss_lo = 1e9, miss_hi = 1e9, worst_root = 1e9;
  double h_lo = 1e9, h_hi = -1e9;
  for (const auto& v : hull.vertices) {
    miss_lo = std::min(miss_lo, std::max(std::fabs(v(0) - log2), std::fabs(v(1) + log2)));
    miss_hi = std::min(miss_hi, std::max(std::fabs(v(0) - log4), std::fabs(v(1) + log4)));
    worst_root = std::min(worst_root, v(0) - v(1));
    h_lo = std::min(h_lo, v(0));
    h_hi = std::max(h_hi, v(0));
  }

  auto est = estimate_polar_exponent(c, MeasureDescriptor::product(), 4096, 16, 0);
  const double pad = hull.inflation + 3.0 * est.std_error(0) + 1e-6;
  const bool inside = est.H.entries[0] >= h_lo - pad && est.H.entries[0] <= h_hi + pad;

  Outcome o;
  o.pass = miss_lo <= kVertexTol && miss_hi <= kVertexTol && worst_root > 0.0 && inside;
  o.detail = fmt(
      "endpoints off by %.3f/%.3f (tol 0.05), min simple root %.3f > 0, H1=%.4f in "
      "[%.4f,%.4f] pad %.4f",
      miss_lo, miss_hi, worst_root, est.H.entries[0], h_lo, h_hi, pad);
  return o;
}

// ---------------------------------------------------------------------------
// 6. Sampled Oseledets flags sit inside the Morse cells.
Outcome criterion6() {
  constexpr double kEpsCells = 2.0;  // chain budget = 2 * cell diameter
  constexpr int kSamples = 100;

  auto c = bernoulli_diag();
  ChainGraph g = two_pass_graph(c, kEpsCells, 64, 3, 64);
  auto sets = morse_sets(g);
  const MorseSet* att = find_set(sets, true);
  const MorseSet* rep = find_set(sets, false);
  if (att == nullptr || rep == nullptr) return {false, "missing attractor/repeller"};

  auto ss = sample_sections(c, MeasureDescriptor::product(), ThetaSet::empty(2),
                            kSamples, 64, 0, 1);
  int converged = 0, inside = 0;
  double worst = 0.0;
  for (const auto& p : ss.points) {
    if (!p.converged) continue;
    ++converged;
    const int b = base_state_of(g, p.x);
    const double da = distance_to_set(g, *att, b, p.attractor);
    const double dr = distance_to_set(g, *rep, b, p.repeller);
    worst = std::max(worst, std::max(da, dr));
    if (da <= 2.0 * g.eps && dr <= 2.0 * g.eps) ++inside;
  }
  Outcome o;
  o.pass = converged > 0 && inside == converged;
  o.detail = fmt(
      "%d/%d converged samples within 2*eps of attractor+repeller cells (worst "
      "distance %.4f, bound %.4f)",
      inside, converged, worst, 2.0 * g.eps);
  return o;
}

// ---------------------------------------------------------------------------
// 7. Uniquely ergodic certificate: singleton hull and all three conditions.
Outcome criterion7() {
  auto c = make_cocycle(BaseSystem::rotation(0.3819660112501051, 5),
                        Generator::constant(diag2(2.0, 0.5)));
  flagdyn::UeOptions opt;
  opt.seed = 5;
  auto r = unique_ergodic_analysis(c, opt);
  Outcome o;
  o.pass = r.singleton && r.theta_match && r.roots_vanish &&
           r.polyhedron_vertices_ok && r.bounded.pass && r.vacuous_2_3;
  o.detail = fmt(
      "singleton=%d (gap %.4f <= tol %.4f), type match=%d, roots vanish=%d "
      "(spread %.2e), bounded pass=%d (margin %.3f), checks 2-3 vacuous=%d",
      int(r.singleton), r.singleton_gap, r.hull_tol, int(r.theta_match),
      int(r.roots_vanish), r.root_spread, int(r.bounded.pass),
      r.bounded.min_margin, int(r.vacuous_2_3));
  return o;
}

// ---------------------------------------------------------------------------
// 8. Degenerate-letter iid scenario: regular estimate, refinement violation, no.
Outcome criterion8() {
  constexpr double kBudgetSeconds = 120.0;
  const auto t0 = Clock::now();

  flagdyn::IidDemoOptions opt;
  opt.alphabet = {diag3(2.0, 2.0, 0.25), generic_letter3()};
  opt.n = 4096;
  opt.k = 16;
  opt.max_period = 2;
  opt.seed = 7;
  opt.threads = 2;
  auto rep = iid_demo(opt);

  bool gaps_clear = rep.regular && rep.gaps.size() == 2;
  for (std::size_t i = 0; i < rep.gaps.size(); ++i)
    gaps_clear = gaps_clear && rep.gaps[i] > 3.0 * rep.gap_sigma[i];
  bool violation_at_h = false;
  for (const auto& orb : rep.conditions.refinement.orbits)
    if (!orb.ok && orb.word == std::vector<int>{0}) violation_at_h = true;
  const double secs = seconds_since(t0);

  Outcome o;
  o.pass = gaps_clear && rep.conditions.refinement.violations >= 1 &&
           violation_at_h && rep.conditions.verdict.equal == "no" &&
           secs < kBudgetSeconds;
  o.detail = fmt(
      "gaps %.3f/%.3f at 3sigma %.3f/%.3f, refinement violation at word (0)=%d, "
      "verdict=%s, %.1fs (budget 120s)",
      rep.gaps.size() > 0 ? rep.gaps[0] : -1.0, rep.gaps.size() > 1 ? rep.gaps[1] : -1.0,
      rep.gap_sigma.size() > 0 ? 3.0 * rep.gap_sigma[0] : -1.0,
      rep.gap_sigma.size() > 1 ? 3.0 * rep.gap_sigma[1] : -1.0, int(violation_at_h),
      rep.conditions.verdict.equal.c_str(), secs);
  return o;
}

// ---------------------------------------------------------------------------
// 9. Random flags flow forward into the attractor and backward into the repeller.
Outcome criterion9() {
  constexpr double kEpsCells = 2.0;
  constexpr int kFlags = 100;
  constexpr long long kSteps = 200;
  constexpr int kTail = 5;  // consecutive late steps that must all be inside

  struct Setup {
    const char* name;
    CocycleSystem c;
    MeasureDescriptor mu;
    int flag_resolution;
    int word_length;
  };
  std::vector<Setup> setups;
  setups.push_back({"bernoulli", bernoulli_diag(), MeasureDescriptor::product(), 64, 3});
  setups.push_back({"rotation",
                    make_cocycle(BaseSystem::rotation(0.3819660112501051, 5),
                                 Generator::constant(diag2(2.0, 0.5))),
                    MeasureDescriptor::lebesgue(), 48, 1});

  std::string parts;
  bool all_ok = true;
  for (const auto& s : setups) {
    ChainGraph g = two_pass_graph(s.c, kEpsCells, s.flag_resolution, s.word_length, 64);
    auto sets = morse_sets(g);
    const MorseSet* att = find_set(sets, true);
    const MorseSet* rep = find_set(sets, false);
    if (att == nullptr || rep == nullptr) return {false, "missing attractor/repeller"};
    const double bound = 2.0 * g.eps;

    SeqRng rng{CounterRng{0xacc90000ull}.stream(7)};
    auto pts = sample(s.c.base, s.mu, kFlags, 2000);
    int forward_ok = 0, backward_ok = 0;
    double worst_fwd = 0.0, worst_bwd = 0.0;
    for (int t = 0; t < kFlags; ++t) {
      const auto& x = pts[static_cast<std::size_t>(t)];
      Flag b = flagdyn::full_flag(random_invertible(2, rng));
      for (int tries = 0;
           tries < 50 && distance_to_set(g, *rep, base_state_of(g, x), b) <= bound;
           ++tries)
        b = flagdyn::full_flag(random_invertible(2, rng));

      FlagBundlePoint xi{x, b};
      xi = flow_n(s.c, kSteps - kTail, xi);
      double fwd = 0.0;
      for (int j = 0; j < kTail; ++j) {
        xi = flow_step(s.c, xi);
        fwd = std::max(fwd, distance_to_set(g, *att, base_state_of(g, xi.x), xi.b));
      }
      worst_fwd = std::max(worst_fwd, fwd);
      if (fwd <= bound) ++forward_ok;

      FlagBundlePoint yi{x, b};
      for (long long j = 0; j < kSteps - kTail; ++j) yi = flow_step_inv(s.c, yi);
      double bwd = 0.0;
      for (int j = 0; j < kTail; ++j) {
        yi = flow_step_inv(s.c, yi);
        bwd = std::max(bwd, distance_to_set(g, *rep, base_state_of(g, yi.x), yi.b));
      }
      worst_bwd = std::max(worst_bwd, bwd);
      if (bwd <= bound) ++backward_ok;
    }
    all_ok = all_ok && forward_ok == kFlags && backward_ok == kFlags;
    parts += fmt("%s%s: fwd %d/%d (worst %.4f), bwd %d/%d (worst %.4f, bound %.4f)",
                 parts.empty() ? "" : "; ", s.name, forward_ok, kFlags, worst_fwd,
                 backward_ok, kFlags, worst_bwd, bound);
  }
  return {all_ok, parts};
}

// ---------------------------------------------------------------------------
// 10. Gauge perturbation: monotone exponent shift with finite-horizon envelope.
Outcome criterion10() {
  constexpr double kMaxFittedC = 10.0;

  auto c = bernoulli_diag();
  flagdyn::ContinuityOptions opt;
  opt.eps = {0.1, 0.01, 0.001, 0.0001};
  opt.skew = Eigen::MatrixXd(2, 2);
  opt.skew << 0.0, 1.0, -1.0, 0.0;
  opt.j_list = {1, 2};
  opt.k_list = {8, 32, 128};
  opt.n = 4096;
  opt.k_samples = 16;
  opt.seed = 3;
  auto r = continuity_experiment(c, opt);

  double worst_delta = 0.0;
  for (const auto& row : r.rows)
    for (double dj : row.delta_j) worst_delta = std::max(worst_delta, std::fabs(dj));
  Outcome o;
  o.pass = r.monotone_within_noise && r.envelope_ok && r.fitted_c > 0.0 &&
           r.fitted_c <= kMaxFittedC;
  o.detail = fmt(
      "%zu rows: monotone within noise=%d, fitted C=%.4f (cap 10), envelopes above "
      "estimate-3sigma=%d, max |delta_j|=%.4f",
      r.rows.size(), int(r.monotone_within_noise), r.fitted_c, int(r.envelope_ok),
      worst_delta);
  return o;
}

// ---------------------------------------------------------------------------
// 11. CLI determinism: identical bytes across reruns and thread counts.
Outcome criterion11() {
  const std::string cli = FLAGDYN_CLI_PATH;
  const std::string cfg = FLAGDYN_CONFIG_DIR;
  if (cli.empty() || cfg.empty()) return {false, "CLI path not baked in"};

  const fs::path root = fs::temp_directory_path() / "flagdyn_acceptance";
  std::error_code ec;
  fs::remove_all(root, ec);
  fs::create_directories(root);

  auto run = [&](const std::string& args, const fs::path& out) -> int {
    std::string cmd = "\"" + cli + "\" check --config \"" + cfg +
                      "/bernoulli_diagonal.json\" --out \"" + out.string() + "\" " +
                      args + " >/dev/null 2>&1";
    int rc = std::system(cmd.c_str());
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
  };
  const int r1 = run("--threads 1", root / "t1");
  const int r2 = run("--threads 3", root / "t3");
  const int r3 = run("--threads 1", root / "rerun");
  if (r1 != 0 || r2 != 0 || r3 != 0)
    return {false, fmt("CLI exits %d/%d/%d (want 0)", r1, r2, r3)};

  bool same = true;
  std::string files;
  for (const char* f : {"report.json", "margins.csv", "spectrum_convergence.csv"}) {
    const std::string a = slurp(root / "t1" / f);
    const std::string b = slurp(root / "t3" / f);
    const std::string c = slurp(root / "rerun" / f);
    if (a.empty() || a != b || a != c) {
      same = false;
      files += std::string(files.empty() ? "" : ",") + f;
    }
  }
  const auto bytes = slurp(root / "t1" / "report.json").size();
  Outcome o;
  o.pass = same;
  o.detail = same ? fmt("check scenario, 3 runs (threads 1/3 + rerun): report.json "
                        "(%zu bytes), margins.csv, spectrum_convergence.csv byte-identical",
                        bytes)
                  : fmt("mismatch in: %s", files.c_str());
  return o;
}

}  // namespace

int main() {
  struct Item {
    int id;
    const char* name;
    std::function<Outcome()> fn;
  };
  const std::vector<Item> items = {
      {1, "decomposition exactness", criterion1},
      {2, "cocycle identities", criterion2},
      {3, "periodic exactness", criterion3},
      {4, "Weyl coset classification", criterion4},
      {5, "Morse attractor hull", criterion5},
      {6, "section containment", criterion6},
      {7, "uniquely ergodic certificate", criterion7},
      {8, "degenerate iid counterexample", criterion8},
      {9, "attractor-repeller basins", criterion9},
      {10, "gauge continuity", criterion10},
      {11, "CLI determinism", criterion11},
  };

  int failures = 0;
  for (const auto& it : items) {
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = it.fn();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    if (!o.pass) ++failures;
    std::printf("criterion %2d: %s — %s — %s (%.1fs)\n", it.id,
                o.pass ? "PASS" : "FAIL", it.name, o.detail.c_str(),
                seconds_since(t0));
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(items.size()) - failures,
              items.size());
  return failures;
}

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <random>

#include "flagdyn/spectrum.hpp"

using namespace flagdyn;

namespace {

Eigen::Matrix2d rot(double th) {
  Eigen::Matrix2d r;
  r << std::cos(th), -std::sin(th), std::sin(th), std::cos(th);
  return r;
}

// Independent estimator of the top exponent: norm growth of a pushed vector
// under a plain product, own RNG, no shared code with the library path.
double top_exponent_oracle(const Eigen::Matrix2d& a0, const Eigen::Matrix2d& a1,
                           long long n, int runs, double* se_out) {
  std::vector<double> vals(runs);
  for (int r = 0; r < runs; ++r) {
    std::mt19937_64 gen(0xabcdef12u + 7919u * r);
    std::bernoulli_distribution coin(0.5);
    Eigen::Vector2d v(1.0, 0.3);
    double acc = 0.0;
    for (long long i = 0; i < n; ++i) {
      v = (coin(gen) ? a1 : a0) * v;
      double nv = v.norm();
      acc += std::log(nv);
      v /= nv;
    }
    vals[r] = acc / n;
  }
  double mean = 0.0;
  for (double v : vals) mean += v;
  mean /= runs;
  double s2 = 0.0;
  for (double v : vals) s2 += (v - mean) * (v - mean);
  *se_out = std::sqrt(s2 / (static_cast<double>(runs) * (runs - 1)));
  return mean;
}

CocycleSystem bernoulli_pair(const Eigen::Matrix2d& a0, const Eigen::Matrix2d& a1,
                             std::uint64_t seed, Variant variant = Variant::Gl) {
  auto base = BaseSystem::full_shift({0.5, 0.5}, seed);
  return make_cocycle(base, Generator::table({a0, a1}), variant);
}

}  // namespace

TEST_CASE("orthogonal generators: zero spectrum, single block") {
  auto c = bernoulli_pair(rot(0.3), rot(1.1), 40, Variant::Sl);
  auto est = estimate_polar_exponent(c, MeasureDescriptor::product(), 256, 4);
  CHECK(est.H.entries.cwiseAbs().maxCoeff() <= 1e-12);
  CHECK(est.theta.is_full());
  CHECK(est.converged);
  CHECK(est.method == "iterative");
}

TEST_CASE("constant generator approaches the jordan moduli") {
  Eigen::Matrix2d g;
  g << 2.0, 1.0, 0.0, 0.5;
  auto c = bernoulli_pair(g, g, 41);
  auto est = estimate_polar_exponent(c, MeasureDescriptor::product(), 1024, 2);
  JordanData jd = jordan_multiplicative(g);
  CHECK(std::abs(est.H.entries(0) - jd.log_moduli.entries(0)) <= 1e-3);
  CHECK(std::abs(est.H.entries(1) - jd.log_moduli.entries(1)) <= 1e-3);
  CHECK(est.theta.is_empty());  // two separated exponents -> full-flag type
}

TEST_CASE("bernoulli top exponent matches a brute-force oracle") {
  Eigen::Matrix2d a0, a1;
  a0 << 2.0, 1.0, 0.0, 0.5;
  a1 << 0.5, 0.0, 1.0, 2.0;
  double se_oracle = 0.0;
  double oracle = top_exponent_oracle(a0, a1, 1000000, 32, &se_oracle);

  auto c = bernoulli_pair(a0, a1, 42);
  auto est = estimate_polar_exponent(c, MeasureDescriptor::product(), 16384, 32);
  double se = std::sqrt(est.std_error(0) * est.std_error(0) + se_oracle * se_oracle);
  CHECK(std::abs(est.H.entries(0) - oracle) <= 3.0 * se);
  CHECK(est.converged);
}

TEST_CASE("entry sum equals the determinant rate") {
  SeqRng rng(CounterRng{77});
  Eigen::Matrix2d a0, a1;
  a0 << 1.5, 0.2, -0.1, 0.9;
  a1 << 0.7, -0.4, 0.3, 1.8;
  auto c = bernoulli_pair(a0, a1, 43);
  const long long n = 512;
  const int k = 6;
  auto est = estimate_polar_exponent(c, MeasureDescriptor::product(), n, k, 5);
  auto cent = central_exponent(c, MeasureDescriptor::product(), n, k, 5);
  // same points, same horizon: sum of log sigma telescopes to the same values
  CHECK(std::abs(est.H.entries.sum() - 2.0 * cent.value) <= 1e-8);
}

TEST_CASE("periodic spectrum: exact values and word-rotation invariance") {
  SUBCASE("fixed word examples") {
    Eigen::Matrix2d h = Eigen::Vector2d(3.0, 1.0 / 3.0).asDiagonal();
    auto base = BaseSystem::full_shift({0.5, 0.5}, 3);
    auto c = make_cocycle(base, Generator::table({h, rot(0.4)}));
    auto est = periodic_spectrum(c, {0});
    CHECK(est.method == "exact-periodic");
    CHECK(est.std_error.maxCoeff() == 0.0);
    CHECK(est.H.entries(0) == doctest::Approx(std::log(3.0)).epsilon(1e-12));
    CHECK(est.H.entries(1) == doctest::Approx(-std::log(3.0)).epsilon(1e-12));
    // elliptic word: rotation generator has zero exponents
    auto ell = periodic_spectrum(c, {1});
    CHECK(ell.H.entries.cwiseAbs().maxCoeff() <= 1e-12);
    CHECK(ell.theta.is_full());
  }
  SUBCASE("two-letter word equals half the product moduli") {
    Eigen::Matrix2d a0, a1;
    a0 << 2.0, 0.3, 0.0, 0.6, a1 << 1.1, 0.0, -0.7, 0.8;
    auto base = BaseSystem::full_shift({0.5, 0.5}, 4);
    auto c = make_cocycle(base, Generator::table({a0, a1}));
    auto est = periodic_spectrum(c, {0, 1});
    JordanData jd = jordan_multiplicative(a1 * a0);
    for (int i = 0; i < 2; ++i) {
      CHECK(est.H.entries(i) ==
            doctest::Approx(0.5 * jd.log_moduli.entries(i)).epsilon(1e-10));
    }
    auto rotw = periodic_spectrum(c, {1, 0});
    CHECK((est.H.entries - rotw.H.entries).cwiseAbs().maxCoeff() <= 1e-9);
  }
}

TEST_CASE("attractor and repeller flags of constant systems") {
  auto base = BaseSystem::full_shift({0.5, 0.5}, 9);
  ThetaSet line_type = ThetaSet::from_blocks({1, 1});

  SUBCASE("diagonal") {
    Eigen::Matrix2d g = Eigen::Vector2d(2.0, 0.5).asDiagonal();
    auto c = make_cocycle(base, Generator::constant(g));
    auto x = sample(base, MeasureDescriptor::product(), 1, 0)[0];
    auto att = attractor_flag(c, x, line_type, 4);
    CHECK(att.converged);
    CHECK(flag_distance(att.flag, flag_from_line(Eigen::Vector2d(1, 0))) <= 1e-9);
    auto rep = repeller_flag(c, x, dual_theta(line_type), 4);
    CHECK(flag_distance(rep.flag, flag_from_line(Eigen::Vector2d(0, 1))) <= 1e-9);
  }
  SUBCASE("rotated eigenbasis") {
    Eigen::Matrix2d p;
    p << 1, 1, 1, -1;
    Eigen::Matrix2d g = p * Eigen::Vector2d(4.0, 0.25).asDiagonal() * p.inverse();
    auto c = make_cocycle(base, Generator::constant(g));
    auto x = sample(base, MeasureDescriptor::product(), 1, 1)[0];
    auto att = attractor_flag(c, x, line_type, 40);
    CHECK(flag_distance(att.flag, flag_from_line(Eigen::Vector2d(1, 1))) <= 1e-6);
    auto rep = repeller_flag(c, x, line_type, 40);
    CHECK(flag_distance(rep.flag, flag_from_line(Eigen::Vector2d(1, -1))) <= 1e-6);
    CHECK(transversal_margin(att.flag, rep.flag) > 0.5);
  }
}

TEST_CASE("section samples over the bernoulli system stay transversal") {
  Eigen::Matrix2d a0, a1;
  a0 << 2.0, 1.0, 0.0, 0.5;
  a1 << 0.5, 0.0, 1.0, 2.0;
  auto c = bernoulli_pair(a0, a1, 44);
  ThetaSet th = ThetaSet::from_blocks({1, 1});
  auto sec = sample_sections(c, MeasureDescriptor::product(), th, 12, 64, 2);
  REQUIRE(sec.points.size() == 12);
  for (const auto& p : sec.points) {
    CHECK(p.converged);
    CHECK(p.margin > 0.0);
    CHECK(p.attractor.type == th);
    CHECK(p.repeller.type == dual_theta(th));
  }
  // deterministic across thread counts
  auto sec4 = sample_sections(c, MeasureDescriptor::product(), th, 12, 64, 2, 4);
  for (int i = 0; i < 12; ++i) {
    CHECK((sec.points[i].attractor.frame - sec4.points[i].attractor.frame).norm() == 0.0);
    CHECK(sec.points[i].margin == sec4.points[i].margin);
  }
}

TEST_CASE("flag exponents classify to weyl cosets") {
  Eigen::Matrix2d g = Eigen::Vector2d(2.0, 0.5).asDiagonal();
  auto base = BaseSystem::full_shift({0.5, 0.5}, 11);
  auto c = make_cocycle(base, Generator::constant(g));
  auto x = sample(base, MeasureDescriptor::product(), 1, 0)[0];
  auto est = estimate_polar_exponent(c, MeasureDescriptor::product(), 128, 2);

  SUBCASE("repelling line first: longest element") {
    Eigen::Matrix2d fr;
    fr << 0, 1, 1, 0;
    FlagExponent fe = flag_exponent(c, {x, full_flag(fr)}, 64, est);
    CHECK(fe.lambda(0) == doctest::Approx(-std::log(2.0)).epsilon(1e-9));
    CHECK(fe.lambda(1) == doctest::Approx(std::log(2.0)).epsilon(1e-9));
    CHECK(fe.w == WeylElement::longest(2));
    CHECK(fe.residual <= 1e-9);
    CHECK(!fe.ambiguous);
  }
  SUBCASE("attracting flag: identity") {
    FlagExponent fe = flag_exponent(c, {x, full_flag(Eigen::Matrix2d::Identity())}, 64, est);
    CHECK(fe.w == WeylElement::identity(2));
    CHECK(fe.residual <= 1e-9);
  }
  SUBCASE("generic flags land in the identity coset") {
    Eigen::Matrix2d a0, a1;
    a0 << 2.0, 1.0, 0.0, 0.5;
    a1 << 0.5, 0.0, 1.0, 2.0;
    auto cb = bernoulli_pair(a0, a1, 45);
    auto estb = estimate_polar_exponent(cb, MeasureDescriptor::product(), 4096, 8);
    SeqRng rng(CounterRng{46});
    auto pts = sample(cb.base, MeasureDescriptor::product(), 50, 7);
    for (const auto& p : pts) {
      Eigen::Matrix2d fr;
      fr << rng.sym(), rng.sym(), rng.sym(), rng.sym();
      FlagExponent fe = flag_exponent(cb, {p, full_flag(fr)}, 2048, estb);
      CHECK(fe.w == WeylElement::identity(2));
    }
  }
}

TEST_CASE("vertical exponents") {
  SUBCASE("closed forms") {
    ChamberVector h1{Eigen::Vector2d(1.0, -1.0), Variant::Gl};
    auto v1 = vertical_exponents(h1, ThetaSet::empty(2));
    REQUIRE(v1.size() == 1);
    CHECK(v1[0] == doctest::Approx(-2.0));

    Eigen::Vector3d e(2.0, 2.0, -4.0);
    ChamberVector h2{e, Variant::Gl};
    auto v2 = vertical_exponents(h2, ThetaSet::from_blocks({2, 1}));
    REQUIRE(v2.size() == 2);
    CHECK(v2[0] == doctest::Approx(-6.0));
    CHECK(v2[1] == doctest::Approx(-6.0));
  }
  SUBCASE("contraction rate of a perturbed flag matches the slowest rate") {
    Eigen::Vector3d dvals(4.0, 1.0, 0.25);
    auto base = BaseSystem::full_shift({0.5, 0.5}, 12);
    auto c = make_cocycle(base, Generator::constant(Eigen::MatrixXd(dvals.asDiagonal())));
    auto x = sample(base, MeasureDescriptor::product(), 1, 0)[0];
    // attractor flag is the identity; perturb it and watch the flow pull back
    Eigen::Matrix3d fr = Eigen::Matrix3d::Identity();
    fr(1, 0) = 1e-3;
    fr(2, 1) = 1e-3;
    FlagBundlePoint xi{x, full_flag(fr)};
    Flag ref = full_flag(Eigen::Matrix3d::Identity());
    std::vector<double> dist;
    for (int nstep = 0; nstep <= 5; ++nstep) {
      dist.push_back(flag_distance(xi.b, ref));
      xi = flow_step(c, xi);
    }
    // least-squares slope of log dist per step
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int npt = static_cast<int>(dist.size());
    for (int i = 0; i < npt; ++i) {
      sx += i;
      sy += std::log(dist[i]);
      sxx += static_cast<double>(i) * i;
      sxy += i * std::log(dist[i]);
    }
    double slope = (npt * sxy - sx * sy) / (npt * sxx - sx * sx);
    ChamberVector h{dvals.array().log().matrix(), Variant::Gl};
    auto ve = vertical_exponents(h, ThetaSet::empty(3));
    double slowest = *std::max_element(ve.begin(), ve.end());
    CHECK(std::abs(slope - slowest) <= 0.1 * std::abs(slowest));
  }
}

TEST_CASE("central exponent") {
  SUBCASE("sl variant vanishes") {
    auto c = bernoulli_pair(rot(0.2) * Eigen::Vector2d(2.0, 0.5).asDiagonal().toDenseMatrix(),
                            rot(0.9), 47, Variant::Sl);
    auto ce = central_exponent(c, MeasureDescriptor::product(), 64, 4);
    CHECK(std::abs(ce.value) <= 1e-12);
  }
  SUBCASE("constant determinant") {
    Eigen::Matrix2d g = std::exp(1.0) * Eigen::Matrix2d::Identity();  // det = e^2
    auto base = BaseSystem::full_shift({0.5, 0.5}, 48);
    auto c = make_cocycle(base, Generator::constant(g));
    auto ce = central_exponent(c, MeasureDescriptor::product(), 16, 2);
    CHECK(ce.value == doctest::Approx(1.0).epsilon(1e-12));
  }
  SUBCASE("bernoulli determinant mix") {
    Eigen::Matrix2d g0 = std::exp(1.0) * Eigen::Matrix2d::Identity();      // det e^2
    Eigen::Matrix2d g1 = Eigen::Vector2d(std::exp(-1.0), 1.0).asDiagonal();  // det e^-1
    auto c = bernoulli_pair(g0, g1, 49);
    auto ce = central_exponent(c, MeasureDescriptor::product(), 4096, 8);
    CHECK(std::abs(ce.value - 0.25) <= 3.0 * ce.std_error + 1e-3);
  }
}

TEST_CASE("slow growth is flagged as non-converged") {
  Eigen::Matrix2d par;
  par << 1.0, 1.0, 0.0, 1.0;
  auto c = bernoulli_pair(par, par, 50);
  auto est = estimate_polar_exponent(c, MeasureDescriptor::product(), 256, 2);
  CHECK(!est.converged);  // sigma_1(n) ~ n, so H(n) vs H(n/2) differ by ~log(2)/n
}

TEST_CASE("input validation") {
  Eigen::Matrix2d g = Eigen::Vector2d(2.0, 0.5).asDiagonal();
  auto base = BaseSystem::full_shift({0.5, 0.5}, 51);
  auto c = make_cocycle(base, Generator::constant(g));
  auto x = sample(base, MeasureDescriptor::product(), 1, 0)[0];
  CHECK_THROWS_AS(estimate_polar_exponent(c, MeasureDescriptor::product(), 0, 1),
                  std::invalid_argument);
  CHECK_THROWS_AS(periodic_spectrum(c, {}), std::invalid_argument);
  CHECK_THROWS_AS(attractor_flag(c, x, ThetaSet::empty(2), 1), std::invalid_argument);
  auto est = estimate_polar_exponent(c, MeasureDescriptor::product(), 16, 1);
  Flag part = make_flag(ThetaSet::from_blocks({1, 1}), Eigen::Matrix2d::Identity());
  // full flag required for exponent classification
  ChamberVector h{Eigen::Vector2d(1.0, -1.0), Variant::Gl};
  CHECK_THROWS_AS(vertical_exponents(h, ThetaSet::empty(3)), std::invalid_argument);
}

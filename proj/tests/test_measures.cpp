#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <vector>

#include <Eigen/Dense>

#include "flagdyn/base_system.hpp"
#include "flagdyn/cocycle.hpp"
#include "flagdyn/common.hpp"
#include "flagdyn/flags.hpp"
#include "flagdyn/measures.hpp"
#include "flagdyn/spectrum.hpp"

using namespace flagdyn;

namespace {

Eigen::Matrix2d rot2(double t) {
  Eigen::Matrix2d m;
  m << std::cos(t), -std::sin(t), std::sin(t), std::cos(t);
  return m;
}

CocycleSystem constant_system(const Eigen::MatrixXd& a) {
  return make_cocycle(BaseSystem::periodic_orbit(1), Generator::table({a}));
}

Eigen::MatrixXd random_invertible(int d, SeqRng& seq) {
  while (true) {
    Eigen::MatrixXd m(d, d);
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) m(i, j) = seq.sym();
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
    if (svd.singularValues()(d - 1) > 0.05 * svd.singularValues()(0)) return m;
  }
}

Flag random_full_flag(int d, SeqRng& seq) {
  Eigen::MatrixXd m = random_invertible(d, seq);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(m);
  Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(d, d);
  return full_flag(q);
}

std::vector<Eigen::VectorXd> all_permuted(const Eigen::VectorXd& h) {
  std::vector<int> idx(static_cast<std::size_t>(h.size()));
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end());
  std::vector<Eigen::VectorXd> out;
  do {
    Eigen::VectorXd v(h.size());
    for (int i = 0; i < h.size(); ++i) v(i) = h(idx[static_cast<std::size_t>(i)]);
    bool dup = false;
    for (const auto& u : out)
      if ((u - v).lpNorm<Eigen::Infinity>() < 1e-12) dup = true;
    if (!dup) out.push_back(v);
  } while (std::next_permutation(idx.begin(), idx.end()));
  return out;
}

}  // namespace

TEST_CASE("occupation measure of a fixed flag is a Dirac") {
  auto c = constant_system(Eigen::Vector2d(2.0, 0.5).asDiagonal().toDenseMatrix());
  FlagBundlePoint xi{periodic_point(c.base, {0}, 0), full_flag(Eigen::Matrix2d::Identity())};
  auto mu = occupation_measure(c, xi, 7);
  CHECK(mu.points.size() == 7);
  CHECK(mu.horizon == 7);
  for (const auto& p : mu.points) {
    CHECK(p.b.frame.isApprox(Eigen::Matrix2d::Identity(), 1e-14));
    CHECK(p.x.index == xi.x.index);
  }
  CHECK_THROWS_AS(occupation_measure(c, xi, 0), std::invalid_argument);
}

TEST_CASE("occupation measure over a periodic orbit closes up") {
  Eigen::Matrix2d a0, a1;
  a0 << 2.0, 0.3, 0.0, 0.5;
  a1 << 1.5, 0.0, 0.4, 0.6;
  auto c = make_cocycle(BaseSystem::periodic_orbit(2), Generator::table({a0, a1}));
  auto fms = ergodic_fiber_measures_over_periodic(
      c, MeasureDescriptor::periodic_word({0, 1}), ThetaSet::empty(2));
  REQUIRE(!fms.empty());
  for (const auto& fm : fms) {
    REQUIRE(fm.measure.points.size() == 2);
    CHECK(fm.measure.points[0].x.index != fm.measure.points[1].x.index);
    // one more step returns to the starting flag
    FlagBundlePoint back = flow_step(c, fm.measure.points[1]);
    CHECK(flag_distance(back.b, fm.measure.points[0].b) < 1e-9);
  }
}

TEST_CASE("occupation measure sees the base marginal frequencies") {
  auto base = BaseSystem::full_shift({0.3, 0.7}, 21);
  auto c = make_cocycle(base, Generator::table({Eigen::Matrix2d::Identity(),
                                                Eigen::Matrix2d::Identity()}));
  BasePoint x = sample(base, MeasureDescriptor::product(), 1, 5)[0];
  FlagBundlePoint xi{x, full_flag(Eigen::Matrix2d::Identity())};
  const long long n = 100000;
  auto mu = occupation_measure(c, xi, n);
  long long zeros = 0;
  for (const auto& p : mu.points)
    if (p.x.symbol(0) == 0) ++zeros;
  const double freq = static_cast<double>(zeros) / static_cast<double>(n);
  const double sigma = std::sqrt(0.3 * 0.7 / static_cast<double>(n));
  CHECK(std::abs(freq - 0.3) <= 3.0 * sigma);
}

TEST_CASE("integral_q basics") {
  SUBCASE("orthogonal cocycle integrates to zero") {
    auto c = constant_system(rot2(0.8));
    auto seq_rng = SeqRng(CounterRng{0x5151});
    FlagBundlePoint xi{periodic_point(c.base, {0}, 0), random_full_flag(2, seq_rng)};
    auto v = integral_q(c, occupation_measure(c, xi, 50));
    CHECK(v.lpNorm<Eigen::Infinity>() < 1e-12);
  }
  SUBCASE("Dirac at the attracting flag of a diagonal matrix") {
    auto c = constant_system(Eigen::Vector2d(2.0, 0.5).asDiagonal().toDenseMatrix());
    FlagBundlePoint xi{periodic_point(c.base, {0}, 0), full_flag(Eigen::Matrix2d::Identity())};
    auto v = integral_q(c, occupation_measure(c, xi, 3));
    CHECK(v(0) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
    CHECK(v(1) == doctest::Approx(-std::log(2.0)).epsilon(1e-12));
  }
  SUBCASE("partial-flag support is rejected") {
    auto c = constant_system(Eigen::Vector3d(2.0, 1.0, 0.5).asDiagonal().toDenseMatrix());
    FlagBundlePoint xi{periodic_point(c.base, {0}, 0),
                       flag_from_line(Eigen::Vector3d(1.0, 0.0, 0.0))};
    auto mu = occupation_measure(c, xi, 3);
    CHECK_THROWS_AS(integral_q(c, mu), std::invalid_argument);
  }
}

TEST_CASE("integral_q telescopes to the a-cocycle average") {
  auto seq_rng = SeqRng(CounterRng{0x77aa});
  std::vector<Eigen::MatrixXd> mats = {random_invertible(3, seq_rng),
                                       random_invertible(3, seq_rng)};
  auto base = BaseSystem::full_shift({0.5, 0.5}, 3);
  auto c = make_cocycle(base, Generator::table(mats));
  BasePoint x = sample(base, MeasureDescriptor::product(), 1, 9)[0];
  FlagBundlePoint xi{x, random_full_flag(3, seq_rng)};
  const long long n = 200;
  auto mu = occupation_measure(c, xi, n);
  Eigen::VectorXd mean = integral_q(c, mu);
  Eigen::VectorXd direct = a_cocycle(c, n, xi) / static_cast<double>(n);
  CHECK((mean - direct).lpNorm<Eigen::Infinity>() < 1e-10);
}

TEST_CASE("classify labels cones and picks the sorting coset") {
  SUBCASE("strictly dominant vector") {
    Eigen::Vector2d v(std::log(2.0), -std::log(2.0));
    auto cls = classify(v);
    CHECK(cls.label == MeasureLabel::Attractor);
    CHECK(!cls.boundary);
    CHECK(cls.coset == WeylElement::identity(2));
  }
  SUBCASE("strictly anti-dominant vector") {
    Eigen::Vector2d v(-std::log(2.0), std::log(2.0));
    auto cls = classify(v);
    CHECK(cls.label == MeasureLabel::Repeller);
    CHECK(cls.coset == WeylElement::longest(2));
  }
  SUBCASE("mixed vector and its coset") {
    Eigen::Vector3d v(1.0, -2.0, 1.0);
    auto cls = classify(v);
    CHECK(cls.label == MeasureLabel::Neither);
    // transposition of the last two positions sorts (1,-2,1) stably
    CHECK(cls.coset == WeylElement({0, 2, 1}));
    Eigen::VectorXd sorted = cls.coset.apply(v);
    for (int i = 0; i + 1 < sorted.size(); ++i) CHECK(sorted(i) >= sorted(i + 1));
  }
  SUBCASE("zero vector sits on the boundary and reports attractor") {
    auto cls = classify(Eigen::VectorXd::Zero(3));
    CHECK(cls.label == MeasureLabel::Attractor);
    CHECK(cls.boundary);
    CHECK(cls.coset == WeylElement::identity(3));
  }
  SUBCASE("negation swaps attractor and repeller") {
    auto seq_rng = SeqRng(CounterRng{0x33dd});
    for (int trial = 0; trial < 64; ++trial) {
      const int d = 2 + static_cast<int>(seq_rng.below(3));
      Eigen::VectorXd v(d);
      for (int i = 0; i < d; ++i) v(i) = seq_rng.sym();
      auto a = classify(v);
      auto b = classify(-v);
      if (a.boundary) {
        CHECK(b.boundary);
        continue;
      }
      if (a.label == MeasureLabel::Attractor) CHECK(b.label == MeasureLabel::Repeller);
      if (a.label == MeasureLabel::Repeller) CHECK(b.label == MeasureLabel::Attractor);
      if (a.label == MeasureLabel::Neither) CHECK(b.label == MeasureLabel::Neither);
    }
  }
  SUBCASE("coset applied to the vector is always sorted") {
    auto seq_rng = SeqRng(CounterRng{0x90ee});
    for (int trial = 0; trial < 64; ++trial) {
      const int d = 2 + static_cast<int>(seq_rng.below(4));
      Eigen::VectorXd v(d);
      for (int i = 0; i < d; ++i) v(i) = seq_rng.sym();
      auto cls = classify(v);
      Eigen::VectorXd sorted = cls.coset.apply(v);
      for (int i = 0; i + 1 < d; ++i) CHECK(sorted(i) >= sorted(i + 1) - 1e-15);
    }
  }
}

TEST_CASE("fiber measures over a hyperbolic constant map on the line bundle") {
  auto c = constant_system(Eigen::Vector2d(3.0, 1.0 / 3.0).asDiagonal().toDenseMatrix());
  auto fms = ergodic_fiber_measures_over_periodic(
      c, MeasureDescriptor::periodic_word({0}), ThetaSet::empty(2));
  REQUIRE(fms.size() == 2);
  int n_att = 0, n_rep = 0;
  for (const auto& fm : fms) {
    REQUIRE(fm.measure.points.size() == 1);
    if (fm.cls.label == MeasureLabel::Attractor) {
      ++n_att;
      CHECK(fm.cls.lyapunov(0) == doctest::Approx(std::log(3.0)).epsilon(1e-12));
      CHECK(fm.cls.lyapunov(1) == doctest::Approx(-std::log(3.0)).epsilon(1e-12));
      // the attracting flag is the e1 line
      CHECK(std::abs(fm.measure.points[0].b.frame.col(0)(0)) == doctest::Approx(1.0).epsilon(1e-9));
    }
    if (fm.cls.label == MeasureLabel::Repeller) {
      ++n_rep;
      CHECK(fm.cls.lyapunov(0) == doctest::Approx(-std::log(3.0)).epsilon(1e-12));
      CHECK(std::abs(fm.measure.points[0].b.frame.col(0)(1)) == doctest::Approx(1.0).epsilon(1e-9));
    }
  }
  CHECK(n_att == 1);
  CHECK(n_rep == 1);
}

TEST_CASE("fiber measure of an elliptic map is a boundary attractor") {
  auto c = constant_system(rot2(1.0));
  auto fms = ergodic_fiber_measures_over_periodic(
      c, MeasureDescriptor::periodic_word({0}), ThetaSet::empty(2));
  REQUIRE(fms.size() == 1);
  CHECK(fms[0].cls.label == MeasureLabel::Attractor);
  CHECK(fms[0].cls.boundary);
  CHECK(fms[0].cls.lyapunov.lpNorm<Eigen::Infinity>() < 1e-12);
}

TEST_CASE("each fiber exponent matches exactly one permuted top vector") {
  // generic period-2 word in dimension 2
  Eigen::Matrix2d a0, a1;
  a0 << 1.5, 0.7, 0.2, 0.8;
  a1 << 0.9, -0.3, 0.6, 1.1;
  auto c = make_cocycle(BaseSystem::periodic_orbit(2), Generator::table({a0, a1}));
  std::vector<int> word = {0, 1};
  Eigen::VectorXd h = Eigen::Map<const Eigen::VectorXd>(
      periodic_spectrum(c, word).H.entries.data(), 2);
  auto cands = all_permuted(h);
  auto fms = ergodic_fiber_measures_over_periodic(
      c, MeasureDescriptor::periodic_word(word), ThetaSet::empty(2));
  REQUIRE(fms.size() == 2);
  for (const auto& fm : fms) {
    int matches = 0;
    for (const auto& cand : cands)
      if ((fm.cls.lyapunov - cand).lpNorm<Eigen::Infinity>() < 1e-8) ++matches;
    CHECK(matches == 1);
  }
}

TEST_CASE("a regular diagonal map realizes every Weyl element") {
  auto c = constant_system(Eigen::Vector3d(4.0, 1.0, 0.25).asDiagonal().toDenseMatrix());
  auto fms = ergodic_fiber_measures_over_periodic(
      c, MeasureDescriptor::periodic_word({0}), ThetaSet::empty(3));
  REQUIRE(fms.size() == 6);
  std::set<std::vector<int>> cosets;
  int n_att = 0, n_rep = 0;
  Eigen::Vector3d h(std::log(4.0), 0.0, std::log(0.25));
  for (const auto& fm : fms) {
    cosets.insert(fm.cls.coset.images());
    if (fm.cls.label == MeasureLabel::Attractor) ++n_att;
    if (fm.cls.label == MeasureLabel::Repeller) ++n_rep;
    // lyapunov = coset^{-1} . H_top
    Eigen::VectorXd back = fm.cls.coset.apply(fm.cls.lyapunov);
    CHECK((back - h).lpNorm<Eigen::Infinity>() < 1e-10);
  }
  CHECK(cosets.size() == 6);
  CHECK(n_att == 1);
  CHECK(n_rep == 1);
}

TEST_CASE("unique attractor measure on the adapted flag manifold") {
  auto c = constant_system(Eigen::Vector3d(2.0, 2.0, 0.25).asDiagonal().toDenseMatrix());

  SUBCASE("plane flags: one attractor among the fixed components") {
    auto fms = ergodic_fiber_measures_over_periodic(
        c, MeasureDescriptor::periodic_word({0}), ThetaSet::from_blocks({2, 1}));
    REQUIRE(fms.size() >= 2);
    int n_att = 0;
    for (const auto& fm : fms)
      if (fm.cls.label == MeasureLabel::Attractor) {
        ++n_att;
        Eigen::Vector3d expect(std::log(2.0), std::log(2.0), std::log(0.25));
        CHECK((fm.cls.lyapunov - expect).lpNorm<Eigen::Infinity>() < 1e-10);
      } else {
        // the other components mix the eigenvalues and are neither-classified
        CHECK(fm.cls.label != MeasureLabel::Repeller);
      }
    CHECK(n_att == 1);
  }

  SUBCASE("sampled fixed lines in the attracting component all classify attractor") {
    auto fms = ergodic_fiber_measures_over_periodic(
        c, MeasureDescriptor::periodic_word({0}), ThetaSet::from_blocks({1, 2}));
    const FiberMeasure* att = nullptr;
    for (const auto& fm : fms)
      if (fm.cls.label == MeasureLabel::Attractor) {
        REQUIRE(att == nullptr);
        att = &fm;
      }
    REQUIRE(att != nullptr);
    CHECK(att->component.component.manifold_dim >= 1);
    BasePoint x0 = periodic_point(c.base, {0}, 0);
    auto seq_rng = SeqRng(CounterRng{0xfeed1});
    for (int k = 0; k < 20; ++k) {
      Flag line = att->component.component.sample(seq_rng);
      CHECK(att->component.component.contains(line));
      // lines fixed by the map stay inside span(e1, e2)
      CHECK(std::abs(line.frame.col(0)(2)) < 1e-9);
      Eigen::VectorXd v = a_cocycle(c, 64, FlagBundlePoint{x0, line}) / 64.0;
      CHECK(classify(v, 1e-2).label == MeasureLabel::Attractor);
    }
  }
}

TEST_CASE("fiber measures require a periodic-word descriptor") {
  auto c = constant_system(rot2(0.3));
  CHECK_THROWS_AS(ergodic_fiber_measures_over_periodic(
                      c, MeasureDescriptor::product(), ThetaSet::empty(2)),
                  std::invalid_argument);
}

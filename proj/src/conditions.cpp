#include "flagdyn/conditions.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include <unsupported/Eigen/MatrixFunctions>

#include "flagdyn/common.hpp"
#include "flagdyn/decomp.hpp"
#include "flagdyn/flags.hpp"

namespace flagdyn {

namespace {

std::string word_str(const std::vector<int>& w) {
  std::ostringstream os;
  os << "(";
  for (std::size_t i = 0; i < w.size(); ++i) os << (i ? "," : "") << w[i];
  os << ")";
  return os.str();
}

double min_flag_dist(const Flag& b, const std::vector<Flag>& cloud) {
  double best = std::numeric_limits<double>::infinity();
  for (const Flag& f : cloud) best = std::min(best, flag_distance(b, f));
  return best;
}

// Section flags sampled at points whose symbol window [-L, L) is pinned to the
// periodic word; the far past/future stays random, so the flags explore the
// section closure near the orbit.  One deterministic sample per phase on a
// periodic-orbit base.
struct SectionClouds {
  std::vector<std::vector<Flag>> att;  // indexed by phase
  std::vector<std::vector<Flag>> rep;
};

SectionClouds conditioned_clouds(const CocycleSystem& c, const std::vector<int>& word,
                                 const ThetaSet& theta, const ThetaSet& theta_star,
                                 int samples, long long lookback, std::uint64_t stream,
                                 bool want_rep) {
  const int w = static_cast<int>(word.size());
  SectionClouds out;
  out.att.resize(static_cast<std::size_t>(w));
  out.rep.resize(static_cast<std::size_t>(w));
  const bool symbolic =
      c.base.kind == BaseKind::FullShift || c.base.kind == BaseKind::SubshiftFinite;
  const int reps = symbolic ? samples : 1;
  std::uint64_t tick = stream * 0x9e3779b9ULL + 1;
  for (int p = 0; p < w; ++p) {
    for (int s = 0; s < reps; ++s) {
      BasePoint x;
      if (symbolic) {
        const long long L = lookback;
        std::vector<int> forced(static_cast<std::size_t>(2 * L));
        for (long long j = 0; j < 2 * L; ++j) {
          long long r = (p + (-L + j)) % w;
          if (r < 0) r += w;
          forced[static_cast<std::size_t>(j)] = word[static_cast<std::size_t>(r)];
        }
        x = conditioned_point(c.base, forced, -L, tick++);
      } else {
        x = periodic_point(c.base, word, p);
      }
      auto af = attractor_flag(c, x, theta, lookback);
      if (af.converged) out.att[static_cast<std::size_t>(p)].push_back(af.flag);
      if (want_rep) {
        auto rf = repeller_flag(c, x, theta_star, lookback);
        if (rf.converged) out.rep[static_cast<std::size_t>(p)].push_back(rf.flag);
      }
    }
  }
  return out;
}

Eigen::VectorXd chamber_vec(const SpectrumEstimate& est) {
  return Eigen::Map<const Eigen::VectorXd>(est.H.entries.data(),
                                           static_cast<long>(est.H.entries.size()));
}

}  // namespace


BoundedSectionReport check_bounded_section(const CocycleSystem& c, const MeasureDescriptor& mu,
                                           const ThetaSet& theta, int k, long long lookback,
                                           double tau, std::uint64_t stream, int threads) {
  if (k < 1) throw std::invalid_argument("check_bounded_section: sample count must be >= 1");
  BoundedSectionReport r;
  r.tau = tau;
  r.lookback = lookback;
  r.bin_edges = {0.0, 1e-8, 1e-7, 1e-6, 1e-5, 1e-4, 1e-3, 1e-2, 1e-1, 1.0000001};
  r.bin_counts.assign(r.bin_edges.size() - 1, 0);
  if (theta == ThetaSet::full(theta.dim())) {
    // a point fiber: the section pair is trivially bounded
    r.vacuous = true;
    r.pass = true;
    r.min_margin = 1.0;
    return r;
  }
  SectionSample sec = sample_sections(c, mu, theta, k, lookback, stream, threads);
  r.lookback = sec.lookback;
  double lo = std::numeric_limits<double>::infinity();
  for (const SectionPoint& p : sec.points) {
    if (!p.converged) {
      ++r.excluded;
      continue;
    }
    ++r.samples;
    lo = std::min(lo, p.margin);
    auto it = std::upper_bound(r.bin_edges.begin(), r.bin_edges.end(), p.margin);
    int bin = std::clamp(static_cast<int>(it - r.bin_edges.begin()) - 1, 0,
                         static_cast<int>(r.bin_counts.size()) - 1);
    ++r.bin_counts[static_cast<std::size_t>(bin)];
  }
  r.min_margin = r.samples ? lo : 0.0;
  r.pass = r.samples > 0 && r.min_margin >= tau;
  return r;
}

RefinementReport check_refinement(const CocycleSystem& c, const SpectrumEstimate& nu,
                                  int max_period) {
  RefinementReport r;
  r.theta_nu = nu.theta;
  r.max_period = max_period;
  auto words = enumerate_periodic_orbits(c.base, max_period);
  if (words.empty()) {
    r.vacuous = true;
    r.pass = true;
    return r;
  }
  for (auto& w : words) {
    OrbitTheta o;
    o.theta_rho = periodic_spectrum(c, w).theta;
    o.ok = refines(o.theta_rho, r.theta_nu);
    o.word = std::move(w);
    if (!o.ok) ++r.violations;
    r.orbits.push_back(std::move(o));
  }
  r.pass = r.violations == 0;
  return r;
}

AttRepReport check_att_rep(const CocycleSystem& c, const SpectrumEstimate& nu, int max_period,
                           double delta, int cond_samples, long long lookback,
                           std::uint64_t stream) {
  AttRepReport r;
  r.theta = nu.theta;
  r.theta_star = dual_theta(nu.theta);
  r.delta = delta;
  if (nu.theta == ThetaSet::full(nu.theta.dim())) {
    r.vacuous = true;
    r.pass = true;
    return r;
  }
  auto words = enumerate_periodic_orbits(c.base, max_period);
  if (words.empty()) {
    r.vacuous = true;
    r.pass = true;
    return r;
  }
  std::uint64_t tick = stream + 1;
  for (auto& w : words) {
    OrbitAttRep o;
    o.word = w;
    SectionClouds clouds =
        conditioned_clouds(c, w, r.theta, r.theta_star, cond_samples, lookback, tick, true);
    tick += static_cast<std::uint64_t>(w.size()) * static_cast<std::uint64_t>(cond_samples) + 7;
    const auto rho = MeasureDescriptor::periodic_word(w);

    auto scan = [&](const ThetaSet& side_theta, const std::vector<std::vector<Flag>>& cloud,
                    bool plus) {
      for (const FiberMeasure& fm : ergodic_fiber_measures_over_periodic(c, rho, side_theta)) {
        double dist = 0.0;
        bool usable = true;
        for (std::size_t p = 0; p < fm.measure.points.size(); ++p) {
          if (cloud[p].empty()) {
            usable = false;
            break;
          }
          dist = std::max(dist, min_flag_dist(fm.measure.points[p].b, cloud[p]));
        }
        if (!usable || dist > delta) continue;
        (plus ? o.in_plus : o.in_minus)++;
        const bool ok = fm.cls.boundary ||
                        fm.cls.label == (plus ? MeasureLabel::Attractor : MeasureLabel::Repeller);
        if (!ok) {
          ++o.violations;
          std::ostringstream os;
          os << "word=" << word_str(o.word) << (plus ? " E+" : " E-")
             << " dist=" << dist << " exponent=[" << fm.cls.lyapunov.transpose() << "]";
          o.witnesses.push_back(os.str());
        }
      }
    };
    scan(r.theta, clouds.att, true);
    scan(r.theta_star, clouds.rep, false);

    o.inconclusive = (o.in_plus == 0 && o.in_minus == 0);
    r.violations += o.violations;
    if (o.inconclusive) ++r.inconclusive;
    r.orbits.push_back(std::move(o));
  }
  r.pass = r.violations == 0;
  return r;
}

SectionContainmentReport check_section_containment(const CocycleSystem& c,
                                                   const SpectrumEstimate& nu, int max_period,
                                                   double delta, int cond_samples,
                                                   long long lookback, std::uint64_t stream) {
  SectionContainmentReport r;
  r.theta_nu = nu.theta;
  r.delta = delta;
  if (nu.theta == ThetaSet::full(nu.theta.dim())) {
    r.vacuous = true;
    r.pass = true;
    return r;
  }
  auto words = enumerate_periodic_orbits(c.base, max_period);
  if (words.empty()) {
    r.vacuous = true;
    r.pass = true;
    return r;
  }
  std::uint64_t tick = stream + 0x51ed1;
  for (auto& w : words) {
    OrbitContainment o;
    o.word = w;
    o.theta_rho = periodic_spectrum(c, w).theta;
    o.projectable = refines(o.theta_rho, r.theta_nu);
    if (!o.projectable) {
      o.ok = false;
      ++r.violations;
      r.orbits.push_back(std::move(o));
      continue;
    }
    SectionClouds clouds =
        conditioned_clouds(c, w, r.theta_nu, dual_theta(r.theta_nu), cond_samples, lookback,
                           tick, false);
    tick += static_cast<std::uint64_t>(w.size()) * static_cast<std::uint64_t>(cond_samples) + 7;
    // the orbit of the attracting theta_rho-flag, projected to the nu type
    const Flag* start = nullptr;
    auto comps = periodic_morse(c, w, o.theta_rho);
    for (const auto& pc : comps)
      if (pc.component.is_attractor) start = &pc.component.representative;
    if (start == nullptr) throw decomposition_error("containment: no attracting component");
    FlagBundlePoint cur{periodic_point(c.base, w, 0), *start};
    double dist = 0.0;
    for (std::size_t p = 0; p < w.size(); ++p) {
      dist = std::max(dist, min_flag_dist(project(cur.b, r.theta_nu), clouds.att[p]));
      cur = flow_step(c, cur);
    }
    o.distance = dist;
    o.ok = dist <= delta;
    if (!o.ok) ++r.violations;
    r.orbits.push_back(std::move(o));
  }
  r.pass = r.violations == 0;
  return r;
}

Verdict make_verdict(const ThetaSet& theta_ly, bool cond1, bool cond2, bool cond3,
                     const std::optional<ThetaSet>& theta_mo,
                     const std::optional<std::pair<ThetaSet, ThetaSet>>& bracket) {
  Verdict v;
  v.theta_ly = theta_ly;
  v.theta_mo = theta_mo;
  v.bracket = bracket;
  const bool all = cond1 && cond2 && cond3;
  if (theta_mo.has_value()) {
    const bool same = (*theta_mo == theta_ly);
    if (all && same) {
      v.equal = "yes";
      v.rationale = "all three conditions pass and the computed decomposition type matches";
    } else if (!all && !same) {
      v.equal = "no";
      v.rationale = "condition failure confirmed by the computed decomposition type";
    } else {
      v.equal = "undetermined";
      v.alarm = true;
      v.rationale = all ? "conditions pass but the computed decomposition type differs"
                        : "a condition fails but the computed decomposition type matches";
    }
  } else if (bracket.has_value()) {
    const bool compatible =
        refines(bracket->first, theta_ly) && refines(theta_ly, bracket->second);
    if (!all) {
      v.equal = "no";
      v.rationale = "condition failure; decomposition type only bracketed";
    } else if (compatible) {
      v.equal = "undetermined";
      v.rationale = "conditions pass; decomposition type only bracketed";
    } else {
      v.equal = "undetermined";
      v.alarm = true;
      v.rationale = "conditions pass but the bracket excludes the spectrum type";
    }
  } else {
    v.equal = all ? "undetermined" : "no";
    v.rationale = all ? "conditions pass; no decomposition estimate available"
                      : "condition failure; no decomposition estimate available";
  }
  return v;
}

ConditionReport run_condition_checks(const CocycleSystem& c, const MeasureDescriptor& mu,
                                     const CheckOptions& opt) {
  ConditionReport rep;
  rep.spectrum = estimate_polar_exponent(c, mu, opt.n, opt.k, opt.seed, -1.0, opt.threads);
  const int margin_samples = std::max(4 * opt.k, 32);
  rep.bounded_section = check_bounded_section(c, mu, rep.spectrum.theta, margin_samples,
                                              opt.lookback, opt.tau, opt.seed + 1, opt.threads);
  rep.refinement = check_refinement(c, rep.spectrum, opt.max_period);
  rep.att_rep = check_att_rep(c, rep.spectrum, opt.max_period, opt.delta, opt.cond_samples,
                              opt.lookback, opt.seed + 2);
  rep.containment = check_section_containment(c, rep.spectrum, opt.max_period, opt.delta,
                                              opt.cond_samples, opt.lookback, opt.seed + 3);

  std::optional<ThetaSet> computed;
  std::optional<std::pair<ThetaSet, ThetaSet>> bracket;
  if (opt.with_theta_mo) {
    int wl = opt.word_length;
    if (c.gen.window() > wl) wl = c.gen.window();
    try {
      computed = theta_mo(c, opt.eps_cells, opt.flag_resolution, wl).theta;
    } catch (const std::exception&) {
      computed.reset();
    }
    if (!computed.has_value()) {
      try {
        bracket = theta_mo_bracket(c, opt.max_period, rep.spectrum);
      } catch (const std::exception&) {
        bracket.reset();
      }
    }
  }
  rep.verdict = make_verdict(rep.spectrum.theta, rep.bounded_section.pass, rep.refinement.pass,
                             rep.att_rep.pass, computed, bracket);
  return rep;
}

UniqueErgodicReport unique_ergodic_analysis(const CocycleSystem& c, const UeOptions& opt) {
  if (c.base.kind != BaseKind::IrrationalRotation)
    throw std::invalid_argument("unique_ergodic_analysis: rotation base required");
  UniqueErgodicReport r;
  const auto mu = MeasureDescriptor::lebesgue();
  r.spectrum = estimate_polar_exponent(c, mu, opt.n, opt.k, opt.seed, -1.0, opt.threads);
  r.bounded = check_bounded_section(c, mu, r.spectrum.theta, std::max(8 * opt.k, 32), 128,
                                    opt.tau, opt.seed + 1, opt.threads);
  r.vacuous_2_3 = true;  // no periodic measures over an irrational rotation

  const ThetaSet grid_theta =
      c.d == 2 ? ThetaSet::empty(2) : ThetaSet::from_blocks({1, c.d - 1});
  ChainGraphConfig cfg;
  cfg.theta = grid_theta;
  cfg.flag_resolution = opt.flag_resolution;
  cfg.base_resolution = opt.base_resolution;
  cfg.eps = 0.0;
  ChainGraph probe = build_chain_graph(c, cfg);
  cfg.eps = opt.eps_cells * probe.cell_diameter;
  ChainGraph g = build_chain_graph(c, cfg);
  auto sets = morse_sets(g);

  const Eigen::VectorXd h = chamber_vec(r.spectrum);
  double inflation = 0.0;
  std::vector<Eigen::VectorXd> vertices;
  const MorseSet* attractor = nullptr;
  int n_att = 0;
  std::vector<Eigen::VectorXd> att_vertices;
  for (const auto& s : sets) {
    SpectrumHull hull = morse_spectrum(g, s, opt.hull_directions);
    inflation = std::max(inflation, hull.inflation);
    for (const auto& v : hull.vertices) vertices.push_back(v);
    if (s.is_attractor) {
      ++n_att;
      attractor = &s;
      att_vertices = hull.vertices;
    }
  }
  r.polyhedron_vertices = vertices;
  const double se = r.spectrum.std_error.size() ? r.spectrum.std_error.maxCoeff() : 0.0;
  r.hull_tol = inflation + 3.0 * se + 0.05 * std::max(1.0, h.lpNorm<Eigen::Infinity>());

  // condition (1): computed decomposition type vs spectrum type
  try {
    r.theta_mo = theta_mo(c, opt.eps_cells, opt.flag_resolution, 1).theta;
  } catch (const std::exception&) {
    r.theta_mo.reset();
  }
  r.theta_match = r.theta_mo.has_value() && *r.theta_mo == r.spectrum.theta;

  // condition (3): included roots evaluate to ~0 on every hull vertex
  const ThetaSet& roots = r.theta_mo.has_value() ? *r.theta_mo : r.spectrum.theta;
  double spread = 0.0;
  for (const auto& v : vertices)
    for (int i = 0; i + 1 < c.d; ++i)
      if (roots.contains(i)) spread = std::max(spread, std::abs(v(i) - v(i + 1)));
  r.root_spread = spread;
  r.roots_vanish = spread <= r.hull_tol;

  // singleton: the attractor hull collapses onto the estimated exponent
  if (n_att == 1 && attractor != nullptr && !att_vertices.empty()) {
    double gap = 0.0;
    for (const auto& v : att_vertices) gap = std::max(gap, (v - h).lpNorm<Eigen::Infinity>());
    r.singleton_gap = gap;
    r.singleton = gap <= r.hull_tol;
  } else {
    r.note += "attractor chain component not unique; ";
    r.singleton = false;
  }

  // polyhedron property: hull vertices realize the Weyl orbit of the exponent
  std::vector<Eigen::VectorXd> orbit;
  {
    std::vector<int> idx(static_cast<std::size_t>(c.d));
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end());
    do {
      Eigen::VectorXd v(c.d);
      for (int i = 0; i < c.d; ++i) v(i) = h(idx[static_cast<std::size_t>(i)]);
      bool dup = false;
      for (const auto& u : orbit)
        if ((u - v).lpNorm<Eigen::Infinity>() < 1e-12) dup = true;
      if (!dup) orbit.push_back(v);
    } while (std::next_permutation(idx.begin(), idx.end()));
  }
  bool ok = !vertices.empty();
  for (const auto& v : vertices) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& u : orbit) best = std::min(best, (v - u).lpNorm<Eigen::Infinity>());
    if (best > r.hull_tol) ok = false;
  }
  for (const auto& u : orbit) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& v : vertices) best = std::min(best, (v - u).lpNorm<Eigen::Infinity>());
    if (best > r.hull_tol) ok = false;
  }
  r.polyhedron_vertices_ok = ok;
  return r;
}

IidDemoReport iid_demo(const IidDemoOptions& opt) {
  if (opt.alphabet.empty()) throw std::invalid_argument("iid_demo: empty alphabet");
  std::vector<Eigen::MatrixXd> mats(opt.alphabet.begin(), opt.alphabet.end());
  std::vector<double> w = opt.weights;
  if (w.size() > 1 && w.size() != mats.size())
    throw std::invalid_argument("iid_demo: weights/alphabet size mismatch");
  if (mats.size() == 1) {  // the shift base needs two symbols; duplicate
    mats.push_back(mats[0]);
    w.clear();
  }
  if (w.empty()) w.assign(mats.size(), 1.0 / static_cast<double>(mats.size()));
  auto base = BaseSystem::full_shift(w, static_cast<int>(opt.seed));
  auto c = make_cocycle(base, Generator::table(std::move(mats)));

  IidDemoReport rep;
  CheckOptions co = opt.checks;
  co.n = opt.n;
  co.k = opt.k;
  co.max_period = opt.max_period;
  co.seed = opt.seed;
  co.threads = opt.threads;
  rep.conditions = run_condition_checks(c, MeasureDescriptor::product(), co);
  rep.spectrum = rep.conditions.spectrum;

  const Eigen::VectorXd h = chamber_vec(rep.spectrum);
  for (int i = 0; i + 1 < c.d; ++i) {
    rep.gaps.push_back(h(i) - h(i + 1));
    const double si = rep.spectrum.std_error(i), sj = rep.spectrum.std_error(i + 1);
    rep.gap_sigma.push_back(std::sqrt(si * si + sj * sj));
  }
  rep.regular = true;
  for (std::size_t i = 0; i < rep.gaps.size(); ++i)
    if (rep.gaps[i] <= 3.0 * rep.gap_sigma[i] + 1e-12) rep.regular = false;
  return rep;
}

ContinuityReport continuity_experiment(const CocycleSystem& c, const ContinuityOptions& opt) {
  if (opt.skew.rows() != c.d || opt.skew.cols() != c.d)
    throw std::invalid_argument("continuity_experiment: skew dimension mismatch");
  if (opt.j_list.empty()) throw std::invalid_argument("continuity_experiment: empty j list");
  for (int j : opt.j_list)
    if (j < 1 || j > c.d) throw std::invalid_argument("continuity_experiment: j out of range");

  MeasureDescriptor mu = MeasureDescriptor::product();
  if (c.base.kind == BaseKind::IrrationalRotation) mu = MeasureDescriptor::lebesgue();

  std::vector<double> eps = opt.eps;
  eps.erase(std::remove_if(eps.begin(), eps.end(), [](double e) { return e <= 0.0; }),
            eps.end());
  std::sort(eps.begin(), eps.end());
  eps.insert(eps.begin(), 0.0);

  ContinuityReport rep;
  rep.j_list = opt.j_list;
  rep.k_list = opt.k_list;

  for (double e : eps) {
    CocycleSystem ce = c;
    if (e > 0.0) {
      Eigen::MatrixXd s = (e * opt.skew).exp();
      ce = gauge_perturb(c, Generator::constant(s));
    }
    ContinuityRow row;
    row.eps = e;
    SpectrumEstimate est =
        estimate_polar_exponent(ce, mu, opt.n, opt.k_samples, opt.seed, -1.0, opt.threads);
    const Eigen::VectorXd h = chamber_vec(est);
    for (int j : opt.j_list) {
      double dj = 0.0, var = 0.0;
      for (int i = 0; i < j; ++i) {
        dj += h(i);
        var += est.std_error(i) * est.std_error(i);
      }
      row.delta_j.push_back(dj);
      row.stderr_j.push_back(std::sqrt(var));
    }
    // finite-horizon upper envelope of the sub-additive characterization
    std::vector<BasePoint> pts = sample(ce.base, mu, opt.k_samples, opt.seed + 101);
    row.envelope.assign(opt.j_list.size(), {});
    row.envelope_se.assign(opt.j_list.size(), {});
    for (std::size_t ji = 0; ji < opt.j_list.size(); ++ji) {
      const int j = opt.j_list[ji];
      for (long long kk : opt.k_list) {
        std::vector<double> vals;
        vals.reserve(pts.size());
        for (const auto& x : pts) {
          Eigen::VectorXd a = aplus_cocycle(ce, kk, x);
          double s = 0.0;
          for (int i = 0; i < j; ++i) s += a(i);
          vals.push_back(s / static_cast<double>(kk));
        }
        double mean = 0.0;
        for (double v : vals) mean += v;
        mean /= static_cast<double>(vals.size());
        double var = 0.0;
        for (double v : vals) var += (v - mean) * (v - mean);
        const double se =
            vals.size() > 1 ? std::sqrt(var / (static_cast<double>(vals.size()) *
                                               (static_cast<double>(vals.size()) - 1.0)))
                            : 0.0;
        row.envelope[ji].push_back(mean);
        row.envelope_se[ji].push_back(se);
        if (mean < row.delta_j[ji] - 3.0 * (row.stderr_j[ji] + se) - 1e-9)
          row.envelope_ok = false;
      }
    }
    rep.envelope_ok = rep.envelope_ok && row.envelope_ok;
    rep.rows.push_back(std::move(row));
  }

  // deviation from the unperturbed row: fitted slope and monotonicity
  std::vector<double> dev(rep.rows.size(), 0.0), noise(rep.rows.size(), 0.0);
  for (std::size_t r = 0; r < rep.rows.size(); ++r) {
    for (std::size_t ji = 0; ji < opt.j_list.size(); ++ji) {
      dev[r] = std::max(dev[r], std::abs(rep.rows[r].delta_j[ji] - rep.rows[0].delta_j[ji]));
      noise[r] = std::max(noise[r], 3.0 * (rep.rows[r].stderr_j[ji] + rep.rows[0].stderr_j[ji]));
    }
  }
  double cfit = 0.0;
  for (std::size_t r = 1; r < rep.rows.size(); ++r)
    cfit = std::max(cfit, dev[r] / rep.rows[r].eps);
  rep.fitted_c = cfit;
  for (std::size_t r = 1; r + 1 < rep.rows.size(); ++r)
    if (dev[r] > dev[r + 1] + noise[r] + noise[r + 1]) rep.monotone_within_noise = false;
  return rep;
}

}  // namespace flagdyn

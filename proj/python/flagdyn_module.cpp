// Python bindings for the main operations: base systems, cocycles, spectrum
// estimation, condition checks, and the scenario runner.  Report structs are
// converted to plain dicts so callers get something json-ready.

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <flagdyn/base_system.hpp>
#include <flagdyn/cocycle.hpp>
#include <flagdyn/conditions.hpp>
#include <flagdyn/decomp.hpp>
#include <flagdyn/scenario.hpp>
#include <flagdyn/spectrum.hpp>
#include <flagdyn/weyl.hpp>

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace py = pybind11;
using namespace flagdyn;

namespace {

Variant variant_of(const std::string& s) {
  if (s == "gl") return Variant::Gl;
  if (s == "sl") return Variant::Sl;
  throw std::invalid_argument("variant must be 'gl' or 'sl'");
}

std::vector<int> blocks_of(const ThetaSet& t) {
  std::vector<int> b{1};
  for (int i = 0; i + 1 < t.dim(); ++i) {
    if (t.contains(i))
      ++b.back();
    else
      b.push_back(1);
  }
  return b;
}

py::dict theta_dict(const ThetaSet& t) {
  py::dict d;
  d["dim"] = t.dim();
  d["blocks"] = blocks_of(t);
  d["str"] = t.str();
  return d;
}

py::dict spectrum_dict(const SpectrumEstimate& e) {
  py::dict d;
  d["H"] = e.H.entries;
  d["theta"] = theta_dict(e.theta);
  d["n_used"] = e.n_used;
  d["samples"] = e.samples;
  d["std_error"] = std::vector<double>(e.std_error.data(),
                                       e.std_error.data() + e.std_error.size());
  d["method"] = e.method;
  d["gap_tol"] = e.gap_tol;
  d["half_diff"] = e.half_diff;
  d["converged"] = e.converged;
  d["degraded"] = e.degraded;
  return d;
}

py::dict verdict_dict(const Verdict& v) {
  py::dict d;
  d["theta_ly"] = theta_dict(v.theta_ly);
  if (v.theta_mo.has_value())
    d["theta_mo"] = theta_dict(*v.theta_mo);
  else
    d["theta_mo"] = py::none();
  d["equal"] = v.equal;
  d["alarm"] = v.alarm;
  d["rationale"] = v.rationale;
  return d;
}

py::dict conditions_dict(const ConditionReport& r) {
  py::dict d;
  d["spectrum"] = spectrum_dict(r.spectrum);
  py::dict b;
  b["pass"] = r.bounded_section.pass;
  b["vacuous"] = r.bounded_section.vacuous;
  b["min_margin"] = r.bounded_section.min_margin;
  b["samples"] = r.bounded_section.samples;
  b["excluded"] = r.bounded_section.excluded;
  d["bounded_section"] = b;
  py::dict rf;
  rf["pass"] = r.refinement.pass;
  rf["vacuous"] = r.refinement.vacuous;
  rf["violations"] = r.refinement.violations;
  d["refinement"] = rf;
  py::dict ar;
  ar["pass"] = r.att_rep.pass;
  ar["vacuous"] = r.att_rep.vacuous;
  ar["violations"] = r.att_rep.violations;
  d["att_rep"] = ar;
  py::dict ct;
  ct["pass"] = r.containment.pass;
  ct["vacuous"] = r.containment.vacuous;
  ct["violations"] = r.containment.violations;
  d["containment"] = ct;
  d["verdict"] = verdict_dict(r.verdict);
  return d;
}

CheckOptions check_options(long long n, int k, int max_period, double tau, double delta,
                           int cond_samples, long long lookback, bool with_theta_mo,
                           double eps_cells, int flag_resolution, int word_length,
                           std::uint64_t seed, int threads) {
  CheckOptions o;
  o.n = n;
  o.k = k;
  o.max_period = max_period;
  o.tau = tau;
  o.delta = delta;
  o.cond_samples = cond_samples;
  o.lookback = lookback;
  o.with_theta_mo = with_theta_mo;
  o.eps_cells = eps_cells;
  o.flag_resolution = flag_resolution;
  o.word_length = word_length;
  o.seed = seed;
  o.threads = threads;
  return o;
}

}  // namespace

PYBIND11_MODULE(_flagdyn, m) {
  m.doc() = "matrix cocycles on flag bundles: spectrum, Morse sets, equality checks";

  py::register_exception<capacity_error>(m, "CapacityError");
  py::register_exception<config_error>(m, "ConfigError");

  py::class_<BaseSystem>(m, "BaseSystem")
      .def_static("periodic_orbit", &BaseSystem::periodic_orbit, py::arg("period"),
                  py::arg("seed") = 0)
      .def_static("full_shift", &BaseSystem::full_shift, py::arg("weights"),
                  py::arg("seed") = 0)
      .def_static("rotation", &BaseSystem::rotation, py::arg("angle"),
                  py::arg("seed") = 0)
      .def_static("subshift", &BaseSystem::subshift, py::arg("adjacency"),
                  py::arg("seed") = 0);

  py::class_<Generator>(m, "Generator")
      .def_static("table", &Generator::table, py::arg("mats"))
      .def_static("constant", &Generator::constant, py::arg("m"))
      .def_static("rotation_family", &Generator::rotation_family, py::arg("c0"),
                  py::arg("c1"), py::arg("diag_entries"))
      .def_static("gauge", &Generator::gauge, py::arg("sigma"), py::arg("inner"));

  py::class_<MeasureDescriptor>(m, "MeasureDescriptor")
      .def_static("product", &MeasureDescriptor::product)
      .def_static("lebesgue", &MeasureDescriptor::lebesgue)
      .def_static("periodic_word", &MeasureDescriptor::periodic_word, py::arg("word"));

  py::class_<CocycleSystem>(m, "CocycleSystem")
      .def_readonly("d", &CocycleSystem::d)
      .def("__repr__", [](const CocycleSystem& c) {
        return "<CocycleSystem d=" + std::to_string(c.d) + ">";
      });

  m.def(
      "make_cocycle",
      [](const BaseSystem& b, const Generator& g, const std::string& variant) {
        return make_cocycle(b, g, variant_of(variant));
      },
      py::arg("base"), py::arg("generator"), py::arg("variant") = "gl");
  m.def("gauge_perturb", &gauge_perturb, py::arg("cocycle"), py::arg("sigma"));
  m.def("time_reversed", &time_reversed, py::arg("cocycle"));

  m.def(
      "iwasawa",
      [](const Eigen::MatrixXd& g) {
        auto f = iwasawa(g);
        return py::make_tuple(f.k, f.a, f.n);
      },
      py::arg("g"), "decompose g = k * diag(a) * n");
  m.def(
      "polar_aplus",
      [](const Eigen::MatrixXd& g, const std::string& variant) {
        return polar_aplus(g, variant_of(variant)).entries;
      },
      py::arg("g"), py::arg("variant") = "gl", "sorted log singular values");
  m.def(
      "jordan_log_moduli",
      [](const Eigen::MatrixXd& g, double tol) {
        auto jd = jordan_multiplicative(g, tol);
        py::dict d;
        d["log_moduli"] = jd.log_moduli.entries;
        std::vector<int> mult;
        for (const auto& grp : jd.groups) mult.push_back(grp.multiplicity);
        d["multiplicities"] = mult;
        d["degraded"] = jd.degraded;
        return d;
      },
      py::arg("g"), py::arg("tol") = 1e-9);

  m.def(
      "estimate_polar_exponent",
      [](const CocycleSystem& c, const MeasureDescriptor& mu, long long n, int k,
         std::uint64_t stream, double gap_tol, int threads) {
        return spectrum_dict(estimate_polar_exponent(c, mu, n, k, stream, gap_tol, threads));
      },
      py::arg("cocycle"), py::arg("measure"), py::arg("n") = 4096, py::arg("k") = 16,
      py::arg("stream") = 0, py::arg("gap_tol") = -1.0, py::arg("threads") = 1);
  m.def(
      "periodic_spectrum",
      [](const CocycleSystem& c, const std::vector<int>& word) {
        return spectrum_dict(periodic_spectrum(c, word));
      },
      py::arg("cocycle"), py::arg("word"));
  m.def(
      "enumerate_periodic_orbits",
      [](const BaseSystem& s, int max_period) {
        return enumerate_periodic_orbits(s, max_period);
      },
      py::arg("base"), py::arg("max_period"));

  m.def(
      "run_condition_checks",
      [](const CocycleSystem& c, const MeasureDescriptor& mu, long long n, int k,
         int max_period, double tau, double delta, int cond_samples, long long lookback,
         bool with_theta_mo, double eps_cells, int flag_resolution, int word_length,
         std::uint64_t seed, int threads) {
        auto opt = check_options(n, k, max_period, tau, delta, cond_samples, lookback,
                                 with_theta_mo, eps_cells, flag_resolution, word_length,
                                 seed, threads);
        return conditions_dict(run_condition_checks(c, mu, opt));
      },
      py::arg("cocycle"), py::arg("measure"), py::arg("n") = 4096, py::arg("k") = 16,
      py::arg("max_period") = 3, py::arg("tau") = 1e-4, py::arg("delta") = 0.05,
      py::arg("cond_samples") = 12, py::arg("lookback") = 64,
      py::arg("with_theta_mo") = true, py::arg("eps_cells") = 1.0,
      py::arg("flag_resolution") = 24, py::arg("word_length") = 1, py::arg("seed") = 0,
      py::arg("threads") = 1);

  m.def(
      "unique_ergodic_analysis",
      [](const CocycleSystem& c, long long n, int k, double tau, int flag_resolution,
         int base_resolution, double eps_cells, int hull_directions, std::uint64_t seed,
         int threads) {
        UeOptions o;
        o.n = n;
        o.k = k;
        o.tau = tau;
        o.flag_resolution = flag_resolution;
        o.base_resolution = base_resolution;
        o.eps_cells = eps_cells;
        o.hull_directions = hull_directions;
        o.seed = seed;
        o.threads = threads;
        auto r = unique_ergodic_analysis(c, o);
        py::dict d;
        d["spectrum"] = spectrum_dict(r.spectrum);
        d["bounded_pass"] = r.bounded.pass;
        d["theta_match"] = r.theta_match;
        d["roots_vanish"] = r.roots_vanish;
        d["root_spread"] = r.root_spread;
        d["singleton"] = r.singleton;
        d["singleton_gap"] = r.singleton_gap;
        d["hull_tol"] = r.hull_tol;
        d["vacuous_2_3"] = r.vacuous_2_3;
        d["polyhedron_vertices_ok"] = r.polyhedron_vertices_ok;
        d["note"] = r.note;
        return d;
      },
      py::arg("cocycle"), py::arg("n") = 8192, py::arg("k") = 8, py::arg("tau") = 1e-4,
      py::arg("flag_resolution") = 48, py::arg("base_resolution") = 64,
      py::arg("eps_cells") = 1.0, py::arg("hull_directions") = 16, py::arg("seed") = 0,
      py::arg("threads") = 1);

  m.def(
      "iid_demo",
      [](const std::vector<Eigen::MatrixXd>& alphabet, const std::vector<double>& weights,
         long long n, int k, int max_period, std::uint64_t seed, int threads) {
        IidDemoOptions o;
        o.alphabet = alphabet;
        o.weights = weights;
        o.n = n;
        o.k = k;
        o.max_period = max_period;
        o.seed = seed;
        o.threads = threads;
        auto r = iid_demo(o);
        py::dict d;
        d["spectrum"] = spectrum_dict(r.spectrum);
        d["gaps"] = r.gaps;
        d["gap_sigma"] = r.gap_sigma;
        d["regular"] = r.regular;
        d["conditions"] = conditions_dict(r.conditions);
        return d;
      },
      py::arg("alphabet"), py::arg("weights") = std::vector<double>{},
      py::arg("n") = 4096, py::arg("k") = 16, py::arg("max_period") = 2,
      py::arg("seed") = 0, py::arg("threads") = 1);

  m.def(
      "continuity_experiment",
      [](const CocycleSystem& c, const std::vector<double>& eps, const Eigen::MatrixXd& skew,
         const std::vector<int>& j_list, const std::vector<long long>& k_list, long long n,
         int k_samples, std::uint64_t seed, int threads) {
        ContinuityOptions o;
        o.eps = eps;
        o.skew = skew;
        o.j_list = j_list;
        o.k_list = k_list;
        o.n = n;
        o.k_samples = k_samples;
        o.seed = seed;
        o.threads = threads;
        auto r = continuity_experiment(c, o);
        py::dict d;
        d["j_list"] = r.j_list;
        d["k_list"] = r.k_list;
        py::list rows;
        for (const auto& row : r.rows) {
          py::dict rd;
          rd["eps"] = row.eps;
          rd["delta_j"] = row.delta_j;
          rd["stderr_j"] = row.stderr_j;
          rd["envelope"] = row.envelope;
          rd["envelope_ok"] = row.envelope_ok;
          rows.append(rd);
        }
        d["rows"] = rows;
        d["fitted_c"] = r.fitted_c;
        d["monotone_within_noise"] = r.monotone_within_noise;
        d["envelope_ok"] = r.envelope_ok;
        return d;
      },
      py::arg("cocycle"), py::arg("eps"), py::arg("skew"), py::arg("j_list"),
      py::arg("k_list"), py::arg("n") = 4096, py::arg("k_samples") = 16,
      py::arg("seed") = 0, py::arg("threads") = 1);

  m.def(
      "run_scenario",
      [](const std::string& subcommand, const std::string& config, const std::string& out,
         std::optional<std::uint64_t> seed, std::optional<int> threads, bool strict) {
        CliOverrides ov;
        ov.seed = seed;
        ov.threads = threads;
        ov.strict = strict;
        return run_scenario(subcommand, config, out, ov);
      },
      py::arg("subcommand"), py::arg("config"), py::arg("out"),
      py::arg("seed") = py::none(), py::arg("threads") = py::none(),
      py::arg("strict") = false,
      "run a config through the scenario pipeline; returns the CLI exit code");
}

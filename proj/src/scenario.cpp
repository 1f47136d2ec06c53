#include "flagdyn/scenario.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <iterator>
#include <set>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"

#include "flagdyn/common.hpp"
#include "flagdyn/conditions.hpp"
#include "flagdyn/morse.hpp"

namespace flagdyn {
namespace {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

std::string fmt17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

[[noreturn]] void fail(const std::string& where, const std::string& msg) {
  throw config_error(where + ": " + msg);
}

const json* find(const json& obj, const std::string& key) {
  if (!obj.is_object()) return nullptr;
  auto it = obj.find(key);
  return it == obj.end() ? nullptr : &*it;
}

void check_keys(const json& obj, const std::string& where,
                std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) fail(where, "expected an object");
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool known = false;
    for (const char* k : allowed)
      if (it.key() == k) {
        known = true;
        break;
      }
    if (!known) fail(where, "unknown key '" + it.key() + "'");
  }
}

std::string get_str(const json& o, const std::string& where, const std::string& key) {
  const json* v = find(o, key);
  if (!v || !v->is_string()) fail(where, "'" + key + "' must be a string");
  return v->get<std::string>();
}

double opt_num(const json& o, const std::string& where, const std::string& key, double dflt) {
  const json* v = find(o, key);
  if (!v) return dflt;
  if (!v->is_number()) fail(where, "'" + key + "' must be a number");
  return v->get<double>();
}

long long opt_int(const json& o, const std::string& where, const std::string& key,
                  long long dflt) {
  const json* v = find(o, key);
  if (!v) return dflt;
  if (!v->is_number_integer()) fail(where, "'" + key + "' must be an integer");
  return v->get<long long>();
}

bool opt_bool(const json& o, const std::string& where, const std::string& key, bool dflt) {
  const json* v = find(o, key);
  if (!v) return dflt;
  if (!v->is_boolean()) fail(where, "'" + key + "' must be a boolean");
  return v->get<bool>();
}

std::vector<double> get_num_list(const json& v, const std::string& where) {
  if (!v.is_array() || v.empty()) fail(where, "expected a non-empty array of numbers");
  std::vector<double> out;
  for (const auto& x : v) {
    if (!x.is_number()) fail(where, "expected a non-empty array of numbers");
    out.push_back(x.get<double>());
  }
  return out;
}

std::vector<int> get_int_list(const json& v, const std::string& where) {
  if (!v.is_array()) fail(where, "expected an array of integers");
  std::vector<int> out;
  for (const auto& x : v) {
    if (!x.is_number_integer()) fail(where, "expected an array of integers");
    out.push_back(x.get<int>());
  }
  return out;
}

Eigen::MatrixXd parse_matrix(const json& m, const std::string& where) {
  if (!m.is_array() || m.empty()) fail(where, "expected a matrix as an array of rows");
  const int rows = static_cast<int>(m.size());
  int cols = -1;
  Eigen::MatrixXd out;
  for (int i = 0; i < rows; ++i) {
    auto row = get_num_list(m[i], where);
    if (cols < 0) {
      cols = static_cast<int>(row.size());
      out.resize(rows, cols);
    } else if (static_cast<int>(row.size()) != cols) {
      fail(where, "ragged matrix rows");
    }
    for (int j = 0; j < cols; ++j) out(i, j) = row[j];
  }
  return out;
}

Eigen::MatrixXd parse_square_invertible(const json& m, const std::string& where) {
  Eigen::MatrixXd a = parse_matrix(m, where);
  if (a.rows() != a.cols()) fail(where, "matrix must be square");
  Eigen::FullPivLU<Eigen::MatrixXd> lu(a);
  if (!lu.isInvertible()) fail(where, "matrix is singular");
  return a;
}

// ---- json serializers ------------------------------------------------------

json vec_json(const Eigen::VectorXd& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

json vec_json(const std::vector<double>& v) {
  json a = json::array();
  for (double x : v) a.push_back(x);
  return a;
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

json theta_json(const ThetaSet& t) {
  json j;
  j["dim"] = t.dim();
  j["blocks"] = blocks_of(t);
  j["str"] = t.str();
  return j;
}

json spectrum_json(const SpectrumEstimate& e) {
  json j;
  j["H"] = vec_json(e.H.entries);
  j["std_error"] = vec_json(e.std_error);
  j["theta"] = theta_json(e.theta);
  j["n"] = e.n_used;
  j["samples"] = e.samples;
  j["method"] = e.method;
  j["gap_tol"] = e.gap_tol;
  j["half_diff"] = e.half_diff;
  j["converged"] = e.converged;
  j["degraded"] = e.degraded;
  return j;
}

json bounded_json(const BoundedSectionReport& r) {
  json j;
  j["tau"] = r.tau;
  j["min_margin"] = r.min_margin;
  j["samples"] = r.samples;
  j["excluded"] = r.excluded;
  j["lookback"] = r.lookback;
  j["vacuous"] = r.vacuous;
  j["pass"] = r.pass;
  j["bin_edges"] = vec_json(r.bin_edges);
  j["bin_counts"] = r.bin_counts;
  return j;
}

json refinement_json(const RefinementReport& r) {
  json j;
  j["theta"] = theta_json(r.theta_nu);
  j["max_period"] = r.max_period;
  json orbits = json::array();
  for (const auto& o : r.orbits) {
    json oj;
    oj["word"] = o.word;
    oj["theta"] = theta_json(o.theta_rho);
    oj["ok"] = o.ok;
    orbits.push_back(oj);
  }
  j["orbits"] = orbits;
  j["violations"] = r.violations;
  j["vacuous"] = r.vacuous;
  j["pass"] = r.pass;
  return j;
}

json att_rep_json(const AttRepReport& r) {
  json j;
  j["theta"] = theta_json(r.theta);
  j["theta_star"] = theta_json(r.theta_star);
  j["delta"] = r.delta;
  json orbits = json::array();
  for (const auto& o : r.orbits) {
    json oj;
    oj["word"] = o.word;
    oj["in_plus"] = o.in_plus;
    oj["in_minus"] = o.in_minus;
    oj["violations"] = o.violations;
    oj["inconclusive"] = o.inconclusive;
    oj["witnesses"] = o.witnesses;
    orbits.push_back(oj);
  }
  j["orbits"] = orbits;
  j["violations"] = r.violations;
  j["inconclusive"] = r.inconclusive;
  j["vacuous"] = r.vacuous;
  j["pass"] = r.pass;
  return j;
}

json containment_json(const SectionContainmentReport& r) {
  json j;
  j["theta"] = theta_json(r.theta_nu);
  j["delta"] = r.delta;
  json orbits = json::array();
  for (const auto& o : r.orbits) {
    json oj;
    oj["word"] = o.word;
    oj["theta"] = theta_json(o.theta_rho);
    oj["projectable"] = o.projectable;
    oj["distance"] = o.distance;
    oj["ok"] = o.ok;
    orbits.push_back(oj);
  }
  j["orbits"] = orbits;
  j["violations"] = r.violations;
  j["vacuous"] = r.vacuous;
  j["pass"] = r.pass;
  return j;
}

json verdict_json(const Verdict& v) {
  json j;
  j["theta_ly"] = theta_json(v.theta_ly);
  j["theta_mo"] = v.theta_mo ? theta_json(*v.theta_mo) : json(nullptr);
  if (v.bracket) {
    json b;
    b["lower"] = theta_json(v.bracket->first);
    b["upper"] = theta_json(v.bracket->second);
    j["bracket"] = b;
  } else {
    j["bracket"] = nullptr;
  }
  j["equal"] = v.equal;
  j["alarm"] = v.alarm;
  j["rationale"] = v.rationale;
  return j;
}

json condition_report_json(const ConditionReport& r) {
  json j;
  j["spectrum"] = spectrum_json(r.spectrum);
  j["bounded_section"] = bounded_json(r.bounded_section);
  j["refinement"] = refinement_json(r.refinement);
  j["att_rep"] = att_rep_json(r.att_rep);
  j["containment"] = containment_json(r.containment);
  j["verdict"] = verdict_json(r.verdict);
  return j;
}

// ---- CSV emission ----------------------------------------------------------

struct CsvTable {
  std::string header;
  std::vector<std::string> rows;
};

struct RunOutput {
  json results;
  std::vector<std::string> warnings;
  CsvTable hull, margins, conv;
};

RunOutput make_output(int d) {
  RunOutput o;
  o.hull.header = "set,rank,attractor,repeller,vertex";
  for (int j = 0; j < d; ++j) o.hull.header += ",h" + std::to_string(j + 1);
  o.margins.header = "bin_lo,bin_hi,count";
  o.conv.header = "n";
  for (int j = 0; j < d; ++j) o.conv.header += ",h" + std::to_string(j + 1);
  for (int j = 0; j < d; ++j) o.conv.header += ",se" + std::to_string(j + 1);
  return o;
}

void margins_rows(const BoundedSectionReport& r, CsvTable& t) {
  for (std::size_t i = 0; i < r.bin_counts.size(); ++i)
    t.rows.push_back(fmt17(r.bin_edges[i]) + "," + fmt17(r.bin_edges[i + 1]) + "," +
                     std::to_string(r.bin_counts[i]));
}

void hull_rows(int set_idx, int rank, bool att, bool rep,
               const std::vector<Eigen::VectorXd>& vertices, CsvTable& t) {
  for (std::size_t v = 0; v < vertices.size(); ++v) {
    std::string row = std::to_string(set_idx) + "," + std::to_string(rank) + "," +
                      (att ? "1" : "0") + "," + (rep ? "1" : "0") + "," + std::to_string(v);
    for (Eigen::Index j = 0; j < vertices[v].size(); ++j) row += "," + fmt17(vertices[v](j));
    t.rows.push_back(row);
  }
}

void convergence_rows(const CocycleSystem& c, const MeasureDescriptor& mu, long long n, int k,
                      std::uint64_t stream, double gap_tol, int threads, CsvTable& t) {
  std::set<long long> horizons;
  for (long long m : {n / 8, n / 4, n / 2, n})
    if (m >= 8) horizons.insert(m);
  if (horizons.empty()) horizons.insert(n);
  for (long long m : horizons) {
    auto est = estimate_polar_exponent(c, mu, m, k, stream, gap_tol, threads);
    std::string row = std::to_string(m);
    for (double h : est.H.entries) row += "," + fmt17(h);
    for (Eigen::Index j = 0; j < est.std_error.size(); ++j) row += "," + fmt17(est.std_error(j));
    t.rows.push_back(row);
  }
}

// ---- scenario loading ------------------------------------------------------

struct Scenario {
  json cfg;
  std::string name;
  std::uint64_t seed = 0;
  int threads = 1;
  Variant variant = Variant::Gl;
  CocycleSystem c;
  MeasureDescriptor mu = MeasureDescriptor::product();
  json measure_echo;
  std::vector<Eigen::MatrixXd> table;  // generator matrices when kind == table
  std::vector<double> weights;         // full-shift weights when applicable
};

json parse_config_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw config_error(path + ": cannot open config");
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  try {
    return json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    std::size_t off = e.byte > 0 ? std::min<std::size_t>(e.byte - 1, text.size()) : 0;
    int line = 1;
    std::size_t bol = 0;
    for (std::size_t i = 0; i < off && i < text.size(); ++i)
      if (text[i] == '\n') {
        ++line;
        bol = i + 1;
      }
    throw config_error(path + ":" + std::to_string(line) + ":" + std::to_string(off - bol + 1) +
                       ": " + e.what());
  }
}

Scenario load_scenario(const std::string& path, const CliOverrides& ov) {
  Scenario sc;
  sc.cfg = parse_config_text(path);
  check_keys(sc.cfg, "config",
             {"name", "notes", "seed", "threads", "variant", "base", "generator", "measure",
              "spectrum", "morse", "check", "unique_ergodic", "iid_demo", "perturb"});
  const json* nj = find(sc.cfg, "name");
  sc.name = nj && nj->is_string() ? nj->get<std::string>() : "scenario";
  long long seed = opt_int(sc.cfg, "config", "seed", 0);
  if (seed < 0) fail("config", "'seed' must be non-negative");
  sc.seed = ov.seed.value_or(static_cast<std::uint64_t>(seed));
  long long threads = opt_int(sc.cfg, "config", "threads", 1);
  sc.threads = ov.threads.value_or(static_cast<int>(threads));
  if (sc.threads < 1) fail("config", "'threads' must be >= 1");

  const json* vj = find(sc.cfg, "variant");
  if (vj) {
    std::string v = get_str(sc.cfg, "config", "variant");
    if (v == "gl")
      sc.variant = Variant::Gl;
    else if (v == "sl")
      sc.variant = Variant::Sl;
    else
      fail("config", "'variant' must be \"gl\" or \"sl\"");
  }

  const json* bj = find(sc.cfg, "base");
  if (!bj) fail("config", "'base' section is required");
  check_keys(*bj, "base", {"kind", "period", "weights", "angle", "transitions"});
  std::string bkind = get_str(*bj, "base", "kind");
  int bseed = static_cast<int>(sc.seed & 0x7fffffff);
  BaseSystem base = BaseSystem::periodic_orbit(1);
  int symbol_count = 0;
  if (bkind == "periodic_orbit") {
    long long p = opt_int(*bj, "base", "period", 1);
    if (p < 1) fail("base", "'period' must be >= 1");
    base = BaseSystem::periodic_orbit(static_cast<int>(p), bseed);
    symbol_count = static_cast<int>(p);
  } else if (bkind == "full_shift") {
    const json* wj = find(*bj, "weights");
    if (!wj) fail("base", "'weights' is required for a full shift");
    sc.weights = get_num_list(*wj, "base.weights");
    if (sc.weights.size() < 2) fail("base", "a full shift needs at least two symbols");
    double sum = 0.0;
    for (double w : sc.weights) {
      if (!(w > 0.0)) fail("base", "weights must be positive");
      sum += w;
    }
    for (double& w : sc.weights) w /= sum;
    base = BaseSystem::full_shift(sc.weights, bseed);
    symbol_count = static_cast<int>(sc.weights.size());
  } else if (bkind == "rotation") {
    double angle = opt_num(*bj, "base", "angle", 0.0);
    if (!(angle > 0.0 && angle < 1.0)) fail("base", "'angle' must lie in (0,1), in turns");
    base = BaseSystem::rotation(angle, bseed);
  } else if (bkind == "subshift") {
    const json* tj = find(*bj, "transitions");
    if (!tj) fail("base", "'transitions' is required for a subshift");
    Eigen::MatrixXd t = parse_matrix(*tj, "base.transitions");
    if (t.rows() != t.cols() || t.rows() < 2) fail("base", "transitions must be square, size >= 2");
    Eigen::MatrixXi ti(t.rows(), t.cols());
    for (Eigen::Index i = 0; i < t.rows(); ++i)
      for (Eigen::Index j = 0; j < t.cols(); ++j) {
        if (t(i, j) != 0.0 && t(i, j) != 1.0) fail("base", "transitions must be 0/1");
        ti(i, j) = static_cast<int>(t(i, j));
      }
    base = BaseSystem::subshift(ti, bseed);
    symbol_count = static_cast<int>(t.rows());
  } else {
    fail("base", "unknown kind '" + bkind + "'");
  }

  const json* gj = find(sc.cfg, "generator");
  if (!gj) fail("config", "'generator' section is required");
  check_keys(*gj, "generator", {"kind", "matrices", "matrix", "c0", "c1", "diag"});
  std::string gkind = get_str(*gj, "generator", "kind");
  Generator gen = Generator::constant(Eigen::MatrixXd::Identity(1, 1));
  if (gkind == "table") {
    const json* mj = find(*gj, "matrices");
    if (!mj || !mj->is_array() || mj->empty()) fail("generator", "'matrices' must be a non-empty array");
    for (std::size_t i = 0; i < mj->size(); ++i)
      sc.table.push_back(parse_square_invertible((*mj)[i], "generator.matrices[" + std::to_string(i) + "]"));
    for (const auto& m : sc.table)
      if (m.rows() != sc.table[0].rows()) fail("generator", "matrices must share one dimension");
    if (symbol_count > 0 && static_cast<int>(sc.table.size()) != symbol_count)
      fail("generator", "table size must match the base symbol count (" +
                            std::to_string(symbol_count) + ")");
    gen = Generator::table(sc.table);
  } else if (gkind == "constant") {
    const json* mj = find(*gj, "matrix");
    if (!mj) fail("generator", "'matrix' is required for a constant generator");
    gen = Generator::constant(parse_square_invertible(*mj, "generator.matrix"));
  } else if (gkind == "rotation_family") {
    double c0 = opt_num(*gj, "generator", "c0", 0.0);
    double c1 = opt_num(*gj, "generator", "c1", 1.0);
    const json* dj = find(*gj, "diag");
    if (!dj) fail("generator", "'diag' is required for a rotation family");
    auto dv = get_num_list(*dj, "generator.diag");
    if (dv.size() != 2 || dv[0] == 0.0 || dv[1] == 0.0)
      fail("generator", "'diag' must be two nonzero numbers");
    gen = Generator::rotation_family(c0, c1, Eigen::Vector2d(dv[0], dv[1]));
  } else {
    fail("generator", "unknown kind '" + gkind + "'");
  }

  try {
    sc.c = make_cocycle(base, gen, sc.variant);
  } catch (const std::invalid_argument& e) {
    fail("config", e.what());
  }

  // measure: explicit section or the natural default for the base
  const json* mj = find(sc.cfg, "measure");
  if (mj) {
    check_keys(*mj, "measure", {"kind", "word"});
    std::string mkind = get_str(*mj, "measure", "kind");
    if (mkind == "product") {
      sc.mu = MeasureDescriptor::product();
    } else if (mkind == "lebesgue") {
      sc.mu = MeasureDescriptor::lebesgue();
    } else if (mkind == "periodic_word") {
      const json* wj = find(*mj, "word");
      if (!wj) fail("measure", "'word' is required for a periodic measure");
      auto w = get_int_list(*wj, "measure.word");
      if (w.empty()) fail("measure", "'word' must be non-empty");
      sc.mu = MeasureDescriptor::periodic_word(w);
    } else {
      fail("measure", "unknown kind '" + mkind + "'");
    }
  } else {
    switch (sc.c.base.kind) {
      case BaseKind::FullShift:
      case BaseKind::SubshiftFinite:
        sc.mu = MeasureDescriptor::product();
        break;
      case BaseKind::IrrationalRotation:
        sc.mu = MeasureDescriptor::lebesgue();
        break;
      case BaseKind::PeriodicOrbit: {
        std::vector<int> w(static_cast<std::size_t>(sc.c.base.period));
        for (int i = 0; i < sc.c.base.period; ++i) w[static_cast<std::size_t>(i)] = i;
        sc.mu = MeasureDescriptor::periodic_word(w);
        break;
      }
    }
  }
  switch (sc.mu.kind) {
    case MeasureDescriptor::Kind::Product:
      sc.measure_echo = json{{"kind", "product"}};
      break;
    case MeasureDescriptor::Kind::Lebesgue:
      sc.measure_echo = json{{"kind", "lebesgue"}};
      break;
    case MeasureDescriptor::Kind::PeriodicWord:
      sc.measure_echo = json{{"kind", "periodic_word"}, {"word", sc.mu.word}};
      break;
  }
  return sc;
}

json section(const Scenario& sc, const char* name) {
  const json* s = find(sc.cfg, name);
  return s ? *s : json::object();
}

CheckOptions parse_check_options(const Scenario& sc) {
  json sec = section(sc, "check");
  check_keys(sec, "check",
             {"n", "k", "max_period", "tau", "delta", "cond_samples", "lookback", "with_theta_mo",
              "eps_cells", "flag_resolution", "word_length"});
  CheckOptions o;
  o.n = opt_int(sec, "check", "n", o.n);
  o.k = static_cast<int>(opt_int(sec, "check", "k", o.k));
  o.max_period = static_cast<int>(opt_int(sec, "check", "max_period", o.max_period));
  o.tau = opt_num(sec, "check", "tau", o.tau);
  o.delta = opt_num(sec, "check", "delta", o.delta);
  o.cond_samples = static_cast<int>(opt_int(sec, "check", "cond_samples", o.cond_samples));
  o.lookback = opt_int(sec, "check", "lookback", o.lookback);
  o.with_theta_mo = opt_bool(sec, "check", "with_theta_mo", o.with_theta_mo);
  o.eps_cells = opt_num(sec, "check", "eps_cells", o.eps_cells);
  o.flag_resolution = static_cast<int>(opt_int(sec, "check", "flag_resolution", o.flag_resolution));
  o.word_length = static_cast<int>(opt_int(sec, "check", "word_length", o.word_length));
  if (o.n < 2 || o.k < 1 || o.tau <= 0.0 || o.delta <= 0.0) fail("check", "invalid sizes");
  o.seed = sc.seed;
  o.threads = sc.threads;
  return o;
}

void spectrum_warnings(const SpectrumEstimate& e, std::vector<std::string>& w) {
  if (!e.converged)
    w.push_back("spectrum estimate not converged at n=" + std::to_string(e.n_used));
  if (e.degraded) w.push_back("periodic spectrum degraded: poor invariance residual");
}

void bounded_warnings(const BoundedSectionReport& r, std::vector<std::string>& w) {
  if (r.excluded > 0)
    w.push_back(std::to_string(r.excluded) + " section samples not converged (excluded)");
}

// ---- subcommand runners ----------------------------------------------------

RunOutput run_spectrum(const Scenario& sc) {
  RunOutput out = make_output(sc.c.d);
  json sec = section(sc, "spectrum");
  check_keys(sec, "spectrum", {"n", "k", "gap_tol"});
  long long n = opt_int(sec, "spectrum", "n", 4096);
  int k = static_cast<int>(opt_int(sec, "spectrum", "k", 16));
  double gap_tol = opt_num(sec, "spectrum", "gap_tol", -1.0);
  if (n < 2 || k < 1) fail("spectrum", "invalid sizes");
  auto est = estimate_polar_exponent(sc.c, sc.mu, n, k, sc.seed, gap_tol, sc.threads);
  out.results["estimate"] = spectrum_json(est);
  if (sc.mu.kind == MeasureDescriptor::Kind::PeriodicWord) {
    auto exact = periodic_spectrum(sc.c, sc.mu.word);
    out.results["exact"] = spectrum_json(exact);
    double err = 0.0;
    for (std::size_t i = 0; i < est.H.entries.size(); ++i)
      err = std::max(err, std::abs(est.H.entries[i] - exact.H.entries[i]));
    out.results["max_abs_error"] = err;
  }
  spectrum_warnings(est, out.warnings);
  convergence_rows(sc.c, sc.mu, n, k, sc.seed, gap_tol, sc.threads, out.conv);
  return out;
}

RunOutput run_morse(const Scenario& sc) {
  RunOutput out = make_output(sc.c.d);
  json sec = section(sc, "morse");
  check_keys(sec, "morse",
             {"theta_blocks", "eps_cells", "flag_resolution", "word_length", "base_resolution",
              "hull_directions", "max_period", "n", "k"});
  std::vector<int> blocks;
  const json* bj = find(sec, "theta_blocks");
  if (bj) {
    blocks = get_int_list(*bj, "morse.theta_blocks");
  } else {
    blocks = {1, sc.c.d - 1};
    if (sc.c.d == 2) blocks = {1, 1};
  }
  int sum = 0;
  for (int b : blocks) {
    if (b < 1) fail("morse", "'theta_blocks' entries must be >= 1");
    sum += b;
  }
  if (sum != sc.c.d) fail("morse", "'theta_blocks' must sum to the dimension");
  double eps_cells = opt_num(sec, "morse", "eps_cells", 1.0);
  int flag_resolution = static_cast<int>(opt_int(sec, "morse", "flag_resolution", 64));
  int word_length = static_cast<int>(opt_int(sec, "morse", "word_length", 3));
  int base_resolution = static_cast<int>(opt_int(sec, "morse", "base_resolution", 64));
  int hull_directions = static_cast<int>(opt_int(sec, "morse", "hull_directions", 16));
  int max_period = static_cast<int>(opt_int(sec, "morse", "max_period", 3));
  long long n = opt_int(sec, "morse", "n", 4096);
  int k = static_cast<int>(opt_int(sec, "morse", "k", 16));

  ChainGraphConfig gc;
  gc.theta = ThetaSet::from_blocks(blocks);
  gc.eps = 0.0;
  gc.flag_resolution = flag_resolution;
  gc.word_length = std::max(word_length, sc.c.gen.window());
  gc.base_resolution = base_resolution;
  ChainGraph g = build_chain_graph(sc.c, gc);
  double diameter = g.cell_diameter;
  if (eps_cells > 0.0) {
    gc.eps = eps_cells * diameter;
    g = build_chain_graph(sc.c, gc);
  }
  auto sets = morse_sets(g);

  auto est = estimate_polar_exponent(sc.c, sc.mu, n, k, sc.seed, -1.0, sc.threads);
  out.results["spectrum"] = spectrum_json(est);
  out.results["theta"] = theta_json(gc.theta);
  out.results["cell_diameter"] = diameter;
  out.results["eps"] = gc.eps;
  out.results["base_states"] = g.base_states;
  out.results["cells"] = g.cells;
  json sets_j = json::array();
  for (std::size_t i = 0; i < sets.size(); ++i) {
    auto hull = morse_spectrum(g, sets[i], hull_directions);
    json sj;
    sj["nodes"] = static_cast<int>(sets[i].nodes.size());
    sj["rank"] = sets[i].rank;
    sj["attractor"] = sets[i].is_attractor;
    sj["repeller"] = sets[i].is_repeller;
    sj["max_fiber_cells"] = sets[i].max_fiber_cells;
    json hj;
    hj["directions"] = static_cast<int>(hull.directions.size());
    json verts = json::array();
    for (const auto& v : hull.vertices) verts.push_back(vec_json(v));
    hj["vertices"] = verts;
    hj["inflation"] = hull.inflation;
    hj["convexity_defect"] = hull.convexity_defect;
    sj["hull"] = hj;
    sets_j.push_back(sj);
    hull_rows(static_cast<int>(i), sets[i].rank, sets[i].is_attractor, sets[i].is_repeller,
              hull.vertices, out.hull);
  }
  out.results["sets"] = sets_j;

  try {
    auto mo = theta_mo(sc.c, eps_cells, flag_resolution, gc.word_length);
    json mj;
    mj["theta"] = theta_json(mo.theta);
    mj["sets_low"] = mo.sets_low;
    mj["sets_high"] = mo.sets_high;
    mj["att_dim"] = mo.att_dim;
    mj["rep_dim"] = mo.rep_dim;
    mj["eps_low"] = mo.eps_low;
    mj["eps_high"] = mo.eps_high;
    out.results["theta_mo"] = mj;
  } catch (const ambiguity_error& e) {
    out.results["theta_mo"] = nullptr;
    auto bracket = theta_mo_bracket(sc.c, max_period, est);
    json bjn;
    bjn["lower"] = theta_json(bracket.first);
    bjn["upper"] = theta_json(bracket.second);
    out.results["theta_bracket"] = bjn;
    out.warnings.push_back(std::string("chain flag type ambiguous: ") + e.what());
  }
  spectrum_warnings(est, out.warnings);
  convergence_rows(sc.c, sc.mu, n, k, sc.seed, -1.0, sc.threads, out.conv);
  return out;
}

RunOutput run_check(const Scenario& sc) {
  RunOutput out = make_output(sc.c.d);
  CheckOptions opt = parse_check_options(sc);
  auto rep = run_condition_checks(sc.c, sc.mu, opt);
  out.results = condition_report_json(rep);
  margins_rows(rep.bounded_section, out.margins);
  spectrum_warnings(rep.spectrum, out.warnings);
  bounded_warnings(rep.bounded_section, out.warnings);
  if (!rep.verdict.theta_mo.has_value())
    out.warnings.push_back("chain flag type ambiguous: bracket used");
  convergence_rows(sc.c, sc.mu, opt.n, opt.k, sc.seed, -1.0, sc.threads, out.conv);
  return out;
}

RunOutput run_unique_ergodic(const Scenario& sc) {
  RunOutput out = make_output(sc.c.d);
  json sec = section(sc, "unique_ergodic");
  check_keys(sec, "unique_ergodic",
             {"n", "k", "tau", "flag_resolution", "base_resolution", "eps_cells",
              "hull_directions"});
  UeOptions o;
  o.n = opt_int(sec, "unique_ergodic", "n", o.n);
  o.k = static_cast<int>(opt_int(sec, "unique_ergodic", "k", o.k));
  o.tau = opt_num(sec, "unique_ergodic", "tau", o.tau);
  o.flag_resolution =
      static_cast<int>(opt_int(sec, "unique_ergodic", "flag_resolution", o.flag_resolution));
  o.base_resolution =
      static_cast<int>(opt_int(sec, "unique_ergodic", "base_resolution", o.base_resolution));
  o.eps_cells = opt_num(sec, "unique_ergodic", "eps_cells", o.eps_cells);
  o.hull_directions =
      static_cast<int>(opt_int(sec, "unique_ergodic", "hull_directions", o.hull_directions));
  o.seed = sc.seed;
  o.threads = sc.threads;
  auto rep = unique_ergodic_analysis(sc.c, o);
  out.results["spectrum"] = spectrum_json(rep.spectrum);
  out.results["bounded_section"] = bounded_json(rep.bounded);
  out.results["theta_mo"] = rep.theta_mo ? theta_json(*rep.theta_mo) : json(nullptr);
  out.results["theta_match"] = rep.theta_match;
  out.results["root_spread"] = rep.root_spread;
  out.results["roots_vanish"] = rep.roots_vanish;
  out.results["singleton_gap"] = rep.singleton_gap;
  out.results["hull_tol"] = rep.hull_tol;
  out.results["singleton"] = rep.singleton;
  json verts = json::array();
  for (const auto& v : rep.polyhedron_vertices) verts.push_back(vec_json(v));
  out.results["polyhedron_vertices"] = verts;
  out.results["polyhedron_vertices_ok"] = rep.polyhedron_vertices_ok;
  out.results["vacuous_2_3"] = rep.vacuous_2_3;
  out.results["note"] = rep.note;
  margins_rows(rep.bounded, out.margins);
  hull_rows(0, 0, true, false, rep.polyhedron_vertices, out.hull);
  spectrum_warnings(rep.spectrum, out.warnings);
  bounded_warnings(rep.bounded, out.warnings);
  if (!rep.theta_mo.has_value()) out.warnings.push_back("chain flag type ambiguous");
  convergence_rows(sc.c, sc.mu, o.n, o.k, sc.seed, -1.0, sc.threads, out.conv);
  return out;
}

RunOutput run_iid_demo(const Scenario& sc) {
  RunOutput out = make_output(sc.c.d);
  if (sc.c.base.kind != BaseKind::FullShift || sc.table.empty())
    fail("iid_demo", "needs a full-shift base and a table generator");
  json sec = section(sc, "iid_demo");
  check_keys(sec, "iid_demo", {"n", "k", "max_period"});
  IidDemoOptions o;
  o.alphabet = sc.table;
  o.weights = sc.weights;
  o.n = opt_int(sec, "iid_demo", "n", o.n);
  o.k = static_cast<int>(opt_int(sec, "iid_demo", "k", o.k));
  o.max_period = static_cast<int>(opt_int(sec, "iid_demo", "max_period", o.max_period));
  o.checks = parse_check_options(sc);
  o.seed = sc.seed;
  o.threads = sc.threads;
  auto rep = iid_demo(o);
  out.results["spectrum"] = spectrum_json(rep.spectrum);
  out.results["gaps"] = vec_json(rep.gaps);
  out.results["gap_sigma"] = vec_json(rep.gap_sigma);
  out.results["regular"] = rep.regular;
  out.results["conditions"] = condition_report_json(rep.conditions);
  margins_rows(rep.conditions.bounded_section, out.margins);
  spectrum_warnings(rep.spectrum, out.warnings);
  bounded_warnings(rep.conditions.bounded_section, out.warnings);
  convergence_rows(sc.c, sc.mu, o.n, o.k, sc.seed, -1.0, sc.threads, out.conv);
  return out;
}

RunOutput run_perturb(const Scenario& sc) {
  RunOutput out = make_output(sc.c.d);
  json sec = section(sc, "perturb");
  check_keys(sec, "perturb", {"eps", "skew", "j_list", "k_list", "n", "k_samples"});
  ContinuityOptions o;
  const json* ej = find(sec, "eps");
  if (!ej) fail("perturb", "'eps' list is required");
  o.eps = get_num_list(*ej, "perturb.eps");
  const json* kj = find(sec, "skew");
  if (!kj) fail("perturb", "'skew' matrix is required");
  o.skew = parse_matrix(*kj, "perturb.skew");
  const json* jj = find(sec, "j_list");
  o.j_list = jj ? get_int_list(*jj, "perturb.j_list") : std::vector<int>{1};
  const json* klj = find(sec, "k_list");
  if (klj) {
    o.k_list.clear();
    for (int k : get_int_list(*klj, "perturb.k_list")) o.k_list.push_back(k);
  }
  o.n = opt_int(sec, "perturb", "n", o.n);
  o.k_samples = static_cast<int>(opt_int(sec, "perturb", "k_samples", o.k_samples));
  o.seed = sc.seed;
  o.threads = sc.threads;
  ContinuityReport rep;
  try {
    rep = continuity_experiment(sc.c, o);
  } catch (const std::invalid_argument& e) {
    fail("perturb", e.what());
  }
  out.results["j_list"] = rep.j_list;
  out.results["k_list"] = rep.k_list;
  json rows = json::array();
  for (const auto& r : rep.rows) {
    json rj;
    rj["eps"] = r.eps;
    rj["delta"] = vec_json(r.delta_j);
    rj["std_error"] = vec_json(r.stderr_j);
    json env = json::array(), env_se = json::array();
    for (std::size_t j = 0; j < r.envelope.size(); ++j) {
      env.push_back(vec_json(r.envelope[j]));
      env_se.push_back(vec_json(r.envelope_se[j]));
    }
    rj["envelope"] = env;
    rj["envelope_se"] = env_se;
    rj["envelope_ok"] = r.envelope_ok;
    rows.push_back(rj);
  }
  out.results["rows"] = rows;
  out.results["fitted_c"] = rep.fitted_c;
  out.results["monotone_within_noise"] = rep.monotone_within_noise;
  out.results["envelope_ok"] = rep.envelope_ok;
  out.results["n"] = o.n;
  out.results["k_samples"] = o.k_samples;
  convergence_rows(sc.c, sc.mu, o.n, o.k_samples, sc.seed, -1.0, sc.threads, out.conv);
  return out;
}

void write_text(const fs::path& p, const std::string& content) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw config_error("cannot write " + p.string());
  out << content;
}

std::string csv_text(const CsvTable& t) {
  std::string s = t.header + "\n";
  for (const auto& r : t.rows) s += r + "\n";
  return s;
}

}  // namespace

int run_scenario(const std::string& subcommand, const std::string& config_path,
                 const std::string& out_dir, const CliOverrides& overrides) {
  try {
    Scenario sc = load_scenario(config_path, overrides);
    RunOutput out;
    if (subcommand == "spectrum")
      out = run_spectrum(sc);
    else if (subcommand == "morse")
      out = run_morse(sc);
    else if (subcommand == "check")
      out = run_check(sc);
    else if (subcommand == "unique-ergodic")
      out = run_unique_ergodic(sc);
    else if (subcommand == "iid-demo")
      out = run_iid_demo(sc);
    else if (subcommand == "perturb")
      out = run_perturb(sc);
    else
      fail("cli", "unknown subcommand '" + subcommand + "'");

    json report;
    report["schema_version"] = 1;
    report["name"] = sc.name;
    report["subcommand"] = subcommand;
    report["seed"] = sc.seed;
    report["dimension"] = sc.c.d;
    report["variant"] = sc.variant == Variant::Sl ? "sl" : "gl";
    report["measure"] = sc.measure_echo;
    report["results"] = out.results;
    report["warnings"] = out.warnings;
    report["converged"] = out.warnings.empty();
    report["config"] = sc.cfg;

    fs::create_directories(out_dir);
    fs::path dir(out_dir);
    write_text(dir / "report.json", report.dump(2) + "\n");
    write_text(dir / "hull_vertices.csv", csv_text(out.hull));
    write_text(dir / "margins.csv", csv_text(out.margins));
    write_text(dir / "spectrum_convergence.csv", csv_text(out.conv));
    if (overrides.strict && !out.warnings.empty()) {
      for (const auto& w : out.warnings) std::fprintf(stderr, "non-convergence: %s\n", w.c_str());
      return 3;
    }
    return 0;
  } catch (const config_error& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 1;
  } catch (const capacity_error& e) {
    std::fprintf(stderr, "capacity error: %s\n", e.what());
    return 2;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
}

}  // namespace flagdyn

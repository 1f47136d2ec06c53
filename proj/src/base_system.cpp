#include "flagdyn/base_system.hpp"

#include <algorithm>
#include <cmath>

namespace flagdyn {

namespace {

constexpr double kMaxEnumeration = 1e6;

int weighted_choice(const std::vector<double>& w, double u) {
  double acc = 0.0;
  for (size_t i = 0; i < w.size(); ++i) {
    acc += w[i];
    if (u < acc) return static_cast<int>(i);
  }
  return static_cast<int>(w.size()) - 1;
}

double frac(double x) { return x - std::floor(x); }

}  // namespace

BaseSystem BaseSystem::periodic_orbit(int period, std::uint64_t seed) {
  BaseSystem s;
  s.kind = BaseKind::PeriodicOrbit;
  s.period = period;
  s.seed = seed;
  s.validate();
  return s;
}

BaseSystem BaseSystem::full_shift(std::vector<double> weights, std::uint64_t seed) {
  BaseSystem s;
  s.kind = BaseKind::FullShift;
  s.alphabet = static_cast<int>(weights.size());
  s.weights = std::move(weights);
  s.seed = seed;
  s.validate();
  return s;
}

BaseSystem BaseSystem::rotation(double angle, std::uint64_t seed) {
  BaseSystem s;
  s.kind = BaseKind::IrrationalRotation;
  s.angle = angle;
  s.seed = seed;
  s.validate();
  return s;
}

BaseSystem BaseSystem::subshift(const Eigen::MatrixXi& transitions, std::uint64_t seed) {
  BaseSystem s;
  s.kind = BaseKind::SubshiftFinite;
  s.alphabet = static_cast<int>(transitions.rows());
  s.transitions = transitions;
  s.seed = seed;
  s.validate();
  return s;
}

void BaseSystem::validate() const {
  switch (kind) {
    case BaseKind::PeriodicOrbit:
      if (period < 1) throw std::invalid_argument("base: period must be >= 1");
      break;
    case BaseKind::FullShift: {
      if (alphabet < 2) throw std::invalid_argument("base: need >= 2 symbols");
      double sum = 0.0;
      for (double w : weights) {
        if (w <= 0) throw std::invalid_argument("base: weights must be positive");
        sum += w;
      }
      if (std::abs(sum - 1.0) > 1e-9)
        throw std::invalid_argument("base: weights must sum to 1");
      break;
    }
    case BaseKind::IrrationalRotation:
      if (!(angle > 0.0 && angle < 1.0))
        throw std::invalid_argument("base: rotation angle must lie in (0,1)");
      break;
    case BaseKind::SubshiftFinite: {
      if (transitions.rows() != transitions.cols() || transitions.rows() < 2)
        throw std::invalid_argument("base: transition matrix must be square, >= 2 states");
      for (int i = 0; i < transitions.rows(); ++i) {
        if (transitions.row(i).sum() == 0 || transitions.col(i).sum() == 0)
          throw std::invalid_argument("base: every state needs a successor and predecessor");
        for (int j = 0; j < transitions.cols(); ++j)
          if (transitions(i, j) != 0 && transitions(i, j) != 1)
            throw std::invalid_argument("base: transition entries must be 0/1");
      }
      break;
    }
  }
}

int BaseSystem::n_symbols() const {
  return kind == BaseKind::PeriodicOrbit ? period : alphabet;
}

// ---- ShiftOrbit ----

ShiftOrbit::ShiftOrbit(const BaseSystem& sys, CounterRng rng)
    : kind_(sys.kind),
      alphabet_(sys.alphabet),
      weights_(sys.weights),
      transitions_(sys.transitions),
      rng_(rng) {}

ShiftOrbit::ShiftOrbit(const BaseSystem& sys, std::vector<int> word)
    : kind_(sys.kind),
      alphabet_(sys.alphabet),
      weights_(sys.weights),
      transitions_(sys.transitions),
      periodic_(true),
      word_(std::move(word)) {
  if (word_.empty()) throw std::invalid_argument("shift orbit: empty word");
  for (int s : word_)
    if (s < 0 || s >= alphabet_) throw std::invalid_argument("shift orbit: symbol range");
}

ShiftOrbit::ShiftOrbit(const BaseSystem& sys, CounterRng rng, std::vector<int> forced,
                       long long lo)
    : ShiftOrbit(sys, rng) {
  forced_ = std::move(forced);
  forced_lo_ = lo;
}

int ShiftOrbit::forced_at(long long pos) const {
  if (forced_.empty()) return -1;
  long long rel = pos - forced_lo_;
  if (rel < 0 || rel >= static_cast<long long>(forced_.size())) return -1;
  return forced_[static_cast<size_t>(rel)];
}

int ShiftOrbit::draw_initial() {
  int f = forced_at(0);
  if (f >= 0) return f;
  double u = rng_.u01(0);
  if (kind_ == BaseKind::FullShift) return weighted_choice(weights_, u);
  return static_cast<int>(u * alphabet_) % alphabet_;
}

int ShiftOrbit::draw_forward(int prev, long long pos) {
  int f = forced_at(pos);
  if (f >= 0) return f;
  double u = rng_.u01(static_cast<std::uint64_t>(pos));
  if (kind_ == BaseKind::FullShift) return weighted_choice(weights_, u);
  std::vector<int> allowed;
  for (int s = 0; s < alphabet_; ++s)
    if (transitions_(prev, s)) allowed.push_back(s);
  return allowed[static_cast<size_t>(u * allowed.size()) % allowed.size()];
}

int ShiftOrbit::draw_backward(int next, long long pos) {
  int f = forced_at(pos);
  if (f >= 0) return f;
  double u = rng_.u01(static_cast<std::uint64_t>(pos));
  if (kind_ == BaseKind::FullShift) return weighted_choice(weights_, u);
  std::vector<int> allowed;
  for (int s = 0; s < alphabet_; ++s)
    if (transitions_(s, next)) allowed.push_back(s);
  return allowed[static_cast<size_t>(u * allowed.size()) % allowed.size()];
}

int ShiftOrbit::symbol(long long pos) {
  if (periodic_) {
    long long w = static_cast<long long>(word_.size());
    return word_[static_cast<size_t>(((pos % w) + w) % w)];
  }
  if (fwd_.empty()) fwd_.push_back(draw_initial());
  if (pos >= 0) {
    while (static_cast<long long>(fwd_.size()) <= pos)
      fwd_.push_back(draw_forward(fwd_.back(), static_cast<long long>(fwd_.size())));
    return fwd_[static_cast<size_t>(pos)];
  }
  while (static_cast<long long>(bwd_.size()) < -pos) {
    int next = bwd_.empty() ? fwd_[0] : bwd_.back();
    bwd_.push_back(draw_backward(next, -static_cast<long long>(bwd_.size()) - 1));
  }
  return bwd_[static_cast<size_t>(-pos - 1)];
}

// ---- BasePoint ----

int BasePoint::symbol(long long rel) const {
  switch (kind) {
    case BaseKind::PeriodicOrbit: {
      long long p = period;
      return static_cast<int>((((index + rel) % p) + p) % p);
    }
    case BaseKind::FullShift:
    case BaseKind::SubshiftFinite:
      return orbit->symbol(offset + rel);
    default:
      throw std::invalid_argument("symbol: not a symbolic base point");
  }
}

BasePoint step(const BasePoint& x) {
  BasePoint y = x;
  switch (x.kind) {
    case BaseKind::PeriodicOrbit:
      y.index = (x.index + 1) % x.period;
      break;
    case BaseKind::IrrationalRotation:
      y.coord = frac(x.coord + x.angle);
      break;
    default:
      y.offset = x.offset + 1;
  }
  return y;
}

BasePoint step_inv(const BasePoint& x) {
  BasePoint y = x;
  switch (x.kind) {
    case BaseKind::PeriodicOrbit:
      y.index = (x.index + x.period - 1) % x.period;
      break;
    case BaseKind::IrrationalRotation:
      y.coord = frac(x.coord - x.angle);
      break;
    default:
      y.offset = x.offset - 1;
  }
  return y;
}

BasePoint step_n(BasePoint x, long long n) {
  switch (x.kind) {
    case BaseKind::PeriodicOrbit: {
      long long p = x.period;
      x.index = static_cast<int>((((x.index + n) % p) + p) % p);
      return x;
    }
    case BaseKind::IrrationalRotation:
      x.coord = frac(x.coord + static_cast<double>(n) * x.angle);
      return x;
    default:
      x.offset += n;
      return x;
  }
}

double base_distance(const BasePoint& x, const BasePoint& y) {
  if (x.kind != y.kind) throw std::invalid_argument("base_distance: kind mismatch");
  switch (x.kind) {
    case BaseKind::PeriodicOrbit:
      return x.index == y.index ? 0.0 : 1.0;
    case BaseKind::IrrationalRotation: {
      double d = std::abs(x.coord - y.coord);
      return std::min(d, 1.0 - d);
    }
    default: {
      for (int k = 0; k <= 64; ++k) {
        if (x.symbol(k) != y.symbol(k) || x.symbol(-k) != y.symbol(-k))
          return std::ldexp(1.0, -k);
      }
      return 0.0;
    }
  }
}

std::vector<BasePoint> sample(const BaseSystem& s, const MeasureDescriptor& mu, int n,
                              std::uint64_t stream) {
  std::vector<BasePoint> out;
  out.reserve(n);
  CounterRng base = CounterRng{s.seed}.stream(0x5a3c17 + stream);
  switch (mu.kind) {
    case MeasureDescriptor::Kind::Product: {
      if (s.kind != BaseKind::FullShift && s.kind != BaseKind::SubshiftFinite)
        throw std::invalid_argument("sample: product measure needs a shift base");
      for (int i = 0; i < n; ++i) {
        BasePoint p;
        p.kind = s.kind;
        p.orbit = std::make_shared<ShiftOrbit>(s, base.stream(i));
        out.push_back(std::move(p));
      }
      break;
    }
    case MeasureDescriptor::Kind::Lebesgue: {
      if (s.kind != BaseKind::IrrationalRotation)
        throw std::invalid_argument("sample: lebesgue measure needs the rotation base");
      for (int i = 0; i < n; ++i) {
        BasePoint p;
        p.kind = s.kind;
        p.angle = s.angle;
        p.coord = base.u01(i);
        out.push_back(std::move(p));
      }
      break;
    }
    case MeasureDescriptor::Kind::PeriodicWord: {
      int w = static_cast<int>(mu.word.size());
      if (w == 0) throw std::invalid_argument("sample: empty periodic word");
      for (int i = 0; i < n; ++i) out.push_back(periodic_point(s, mu.word, i % w));
      break;
    }
  }
  return out;
}

BasePoint periodic_point(const BaseSystem& s, const std::vector<int>& word, int phase) {
  BasePoint p;
  p.kind = s.kind;
  switch (s.kind) {
    case BaseKind::PeriodicOrbit:
      p.period = s.period;
      p.index = ((phase % s.period) + s.period) % s.period;
      return p;
    case BaseKind::FullShift:
    case BaseKind::SubshiftFinite: {
      // shift the word so that symbol(0) == word[phase mod |word|]
      int w = static_cast<int>(word.size());
      std::vector<int> rot(word.size());
      for (int i = 0; i < w; ++i) rot[i] = word[(i + phase) % w];
      p.orbit = std::make_shared<ShiftOrbit>(s, std::move(rot));
      return p;
    }
    default:
      throw std::invalid_argument("periodic_point: base has no periodic symbolic orbits");
  }
}

BasePoint conditioned_point(const BaseSystem& s, const std::vector<int>& forced, long long lo,
                            std::uint64_t stream) {
  if (s.kind != BaseKind::FullShift && s.kind != BaseKind::SubshiftFinite)
    throw std::invalid_argument("conditioned_point: needs a shift base");
  BasePoint p;
  p.kind = s.kind;
  CounterRng rng = CounterRng{s.seed}.stream(0xc0d17).stream(stream);
  p.orbit = std::make_shared<ShiftOrbit>(s, rng, forced, lo);
  return p;
}

std::vector<std::vector<int>> enumerate_periodic_orbits(const BaseSystem& s, int max_period) {
  std::vector<std::vector<int>> out;
  if (max_period < 1) return out;
  switch (s.kind) {
    case BaseKind::IrrationalRotation:
      return out;
    case BaseKind::PeriodicOrbit: {
      if (s.period <= max_period) {
        std::vector<int> w(s.period);
        for (int i = 0; i < s.period; ++i) w[i] = i;
        out.push_back(std::move(w));
      }
      return out;
    }
    default:
      break;
  }
  int m = s.alphabet;
  if (std::pow(static_cast<double>(m), max_period) > kMaxEnumeration)
    throw capacity_error("enumerate_periodic_orbits: alphabet^max_period > 1e6");
  for (int p = 1; p <= max_period; ++p) {
    long long total = 1;
    for (int i = 0; i < p; ++i) total *= m;
    for (long long code = 0; code < total; ++code) {
      std::vector<int> w(p);
      long long c = code;
      for (int i = p - 1; i >= 0; --i) {
        w[i] = static_cast<int>(c % m);
        c /= m;
      }
      // canonical: lexicographically least among rotations
      bool canonical = true, primitive = true;
      for (int r = 1; r < p && canonical; ++r) {
        std::vector<int> rot(p);
        for (int i = 0; i < p; ++i) rot[i] = w[(i + r) % p];
        if (rot < w) canonical = false;
        if (rot == w) primitive = false;
      }
      if (!canonical || !primitive) continue;
      if (s.kind == BaseKind::SubshiftFinite) {
        bool ok = true;
        for (int i = 0; i < p && ok; ++i)
          if (!s.transitions(w[i], w[(i + 1) % p])) ok = false;
        if (!ok) continue;
      }
      out.push_back(std::move(w));
    }
  }
  return out;
}

}  // namespace flagdyn

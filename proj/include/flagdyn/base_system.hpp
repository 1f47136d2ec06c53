#pragma once

// Concrete base dynamical systems: periodic orbits, full shifts with product
// measures, finite-type subshifts, and circle rotations. Shift points carry a
// lazy bi-infinite symbol window generated from a counter-based RNG, so a
// point's symbols are a pure function of (seed, orbit id, position).

#include <Eigen/Dense>
#include <cstdint>
#include <memory>
#include <vector>

#include "flagdyn/common.hpp"

namespace flagdyn {

enum class BaseKind { PeriodicOrbit, FullShift, IrrationalRotation, SubshiftFinite };

struct BaseSystem {
  BaseKind kind = BaseKind::FullShift;
  std::uint64_t seed = 0;

  int period = 0;                  // PeriodicOrbit
  int alphabet = 0;                // shifts
  std::vector<double> weights;     // FullShift product measure
  Eigen::MatrixXi transitions;     // SubshiftFinite 0/1 matrix
  double angle = 0.0;              // IrrationalRotation, fraction of a turn

  static BaseSystem periodic_orbit(int period, std::uint64_t seed = 0);
  static BaseSystem full_shift(std::vector<double> weights, std::uint64_t seed = 0);
  static BaseSystem rotation(double angle, std::uint64_t seed = 0);
  static BaseSystem subshift(const Eigen::MatrixXi& transitions, std::uint64_t seed = 0);
  void validate() const;
  int n_symbols() const;
};

// Identity of one bi-infinite symbol path. Symbols are cached contiguously
// around position 0 so access order never changes the sequence.
class ShiftOrbit {
 public:
  ShiftOrbit(const BaseSystem& sys, CounterRng rng);              // random path
  ShiftOrbit(const BaseSystem& sys, std::vector<int> word);       // periodic path
  // random path with symbols forced on window positions [lo, lo+forced.size())
  ShiftOrbit(const BaseSystem& sys, CounterRng rng, std::vector<int> forced, long long lo);
  int symbol(long long pos);
  bool periodic() const { return periodic_; }
  const std::vector<int>& word() const { return word_; }

 private:
  int forced_at(long long pos) const;
  int draw_initial();
  int draw_forward(int prev, long long pos);
  int draw_backward(int next, long long pos);

  BaseKind kind_;
  int alphabet_;
  std::vector<double> weights_;
  Eigen::MatrixXi transitions_;
  CounterRng rng_;
  bool periodic_ = false;
  std::vector<int> word_;
  std::vector<int> forced_;
  long long forced_lo_ = 0;
  std::vector<int> fwd_;  // positions 0,1,2,...
  std::vector<int> bwd_;  // positions -1,-2,...
};

struct BasePoint {
  BaseKind kind = BaseKind::FullShift;
  int index = 0, period = 0;                 // PeriodicOrbit
  double coord = 0.0, angle = 0.0;           // IrrationalRotation
  std::shared_ptr<ShiftOrbit> orbit;         // shifts
  long long offset = 0;

  // Symbol at window position rel (shift variants only).
  int symbol(long long rel = 0) const;
};

BasePoint step(const BasePoint& x);
BasePoint step_inv(const BasePoint& x);
BasePoint step_n(BasePoint x, long long n);  // n may be negative

double base_distance(const BasePoint& x, const BasePoint& y);

struct MeasureDescriptor {
  enum class Kind { Product, PeriodicWord, Lebesgue };
  Kind kind = Kind::Product;
  std::vector<int> word;  // PeriodicWord: symbols (or state indices) of one period

  static MeasureDescriptor product() { return {Kind::Product, {}}; }
  static MeasureDescriptor lebesgue() { return {Kind::Lebesgue, {}}; }
  static MeasureDescriptor periodic_word(std::vector<int> w) {
    return {Kind::PeriodicWord, std::move(w)};
  }
};

// Deterministic sampling given the system seed and the sample index.
std::vector<BasePoint> sample(const BaseSystem& s, const MeasureDescriptor& mu, int n,
                              std::uint64_t stream = 0);

// A point of the periodic orbit given by `word`, phase `phase`.
BasePoint periodic_point(const BaseSystem& s, const std::vector<int>& word, int phase = 0);

// A random-path point with explicit symbols forced on window positions
// [lo, lo + forced.size()); used to sample closures near periodic orbits.
BasePoint conditioned_point(const BaseSystem& s, const std::vector<int>& forced, long long lo,
                            std::uint64_t stream);

// Primitive admissible cyclic words up to rotation, shortest first.
// Guard: alphabet^max_period <= 1e6. Rotations have none.
std::vector<std::vector<int>> enumerate_periodic_orbits(const BaseSystem& s, int max_period);

}  // namespace flagdyn

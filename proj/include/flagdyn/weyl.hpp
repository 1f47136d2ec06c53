#pragma once

// Weyl-chamber bookkeeping for Sl(d,R) / Gl(d,R): chamber vectors (ordered
// spectra), permutation Weyl elements, and parabolic types encoded as subsets
// of the simple roots a_i - a_{i+1} (equivalently: consecutive-block
// partitions of {1,...,d}).

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "flagdyn/common.hpp"

namespace flagdyn {

enum class Variant { Sl, Gl };

struct ChamberVector {
  Eigen::VectorXd entries;  // non-increasing
  Variant variant = Variant::Gl;

  int dim() const { return static_cast<int>(entries.size()); }
  void validate() const;
  std::string str() const;  // 12 significant digits
};

// Sort into the closed positive chamber. For Sl the trace is kept as given
// (callers own the trace-zero bookkeeping; validate() enforces it).
ChamberVector chamber_project(const Eigen::VectorXd& v, Variant variant);

// alpha_{i,i+1}(H) = H[i] - H[i+1], 0-based i in [0, d-2].
double simple_root_eval(int i, const Eigen::VectorXd& H);

// delta_j(H) = H[0] + ... + H[j-1], j in [1, d-1] (j = d allowed for Gl).
double fundamental_weight_eval(int j, const ChamberVector& H);

class WeylElement {
 public:
  WeylElement() = default;
  explicit WeylElement(std::vector<int> images);
  static WeylElement identity(int d);
  static WeylElement longest(int d);  // w0: i -> d-1-i

  int dim() const { return static_cast<int>(perm_.size()); }
  int operator()(int i) const { return perm_[i]; }
  WeylElement inverse() const;
  WeylElement compose(const WeylElement& rhs) const;  // (this∘rhs)(i) = this(rhs(i))
  // (w. v)[i] = v[w^{-1}(i)]; entry i of v moves to position w(i).
  Eigen::VectorXd apply(const Eigen::VectorXd& v) const;
  bool operator==(const WeylElement& o) const { return perm_ == o.perm_; }
  bool operator<(const WeylElement& o) const { return perm_ < o.perm_; }
  const std::vector<int>& images() const { return perm_; }
  std::string str() const;

 private:
  std::vector<int> perm_;
};

class ThetaSet {
 public:
  ThetaSet() = default;
  ThetaSet(int d, std::vector<bool> included);
  static ThetaSet empty(int d);                          // full flags
  static ThetaSet full(int d);                           // Sigma: trivial flag manifold
  static ThetaSet from_blocks(const std::vector<int>& blocks);

  int dim() const { return d_; }
  bool contains(int i) const { return included_[i]; }    // simple root index
  const std::vector<bool>& included() const { return included_; }
  std::vector<int> blocks() const;                       // consecutive block sizes
  std::vector<int> flag_dims() const;                    // proper subspace dims, increasing
  bool is_empty() const;                                 // no simple roots: full flag
  bool is_full() const;
  bool operator==(const ThetaSet& o) const { return d_ == o.d_ && included_ == o.included_; }
  std::string str() const;                               // "blocks=[2,1]"

 private:
  int d_ = 0;
  std::vector<bool> included_;
};

// Theta_H = simple roots vanishing on H within tol.
ThetaSet theta_of(const ChamberVector& H, double tol);

// Dual type Theta* = i(Theta), i = -w0; block sizes reverse.
ThetaSet dual_theta(const ThetaSet& theta);

// W_Theta: permutations preserving each block. Guard: d <= 8.
std::vector<WeylElement> weyl_subgroup(const ThetaSet& theta);

// H1 refines H2 iff Theta_{H1} ⊂ Theta_{H2}; partial order on types.
bool refines(const ThetaSet& theta1, const ThetaSet& theta2);

std::string format_double(double x, int sig_digits);

}  // namespace flagdyn

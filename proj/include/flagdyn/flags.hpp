#pragma once

// Flags of type Theta as orthonormal frames, the induced group action,
// forgetful projections, transversality margins, metric, and the fixed-point
// components of a (multiplicative-Jordan decomposed) element on a flag
// manifold.

#include <Eigen/Dense>

#include "flagdyn/decomp.hpp"
#include "flagdyn/weyl.hpp"

namespace flagdyn {

struct Flag {
  ThetaSet type;
  Eigen::MatrixXd frame;  // d x d orthonormal; first dims[i] columns span V_i

  int dim() const { return type.dim(); }
  void validate(double tol = 1e-10) const;
};

// Orthonormalizes the given frame (QR); nested spans are preserved.
Flag make_flag(const ThetaSet& type, const Eigen::MatrixXd& frame);

// Line spanned by v, completed to a frame; type blocks=[1, d-1].
Flag flag_from_line(const Eigen::VectorXd& v);

// Full flag (type empty) from a frame.
Flag full_flag(const Eigen::MatrixXd& frame);

Flag act(const Eigen::MatrixXd& g, const Flag& b);
inline Flag act(const GroupElement& g, const Flag& b) { return act(g.m, b); }

// Forget subspaces: coarser must contain b.type (fewer flag levels).
Flag project(const Flag& b, const ThetaSet& coarser);

// Smallest singular value of [basis(V_i) | basis(W_{d-i})] minimized over
// paired levels; in [0, sqrt(2)]; 0 iff some pair fails to span.
double transversal_margin(const Flag& b, const Flag& bstar);
bool transversal(const Flag& b, const Flag& bstar, double tol = 1e-8);

// max over levels of the projector gap ||P_i - Q_i||_2 (= sin of the largest
// principal angle).
double flag_distance(const Flag& a, const Flag& b);

// ---- fixed points of an element on F_Theta ----

struct FixedComponent {
  WeylElement coset_rep;      // w with exponent = w^{-1} (log moduli)
  Eigen::MatrixXi assignment; // (gaps x classes): dims drawn from each modulus class
  Flag representative;
  Eigen::VectorXd exponent;   // length d
  bool is_attractor = false;  // exponent non-increasing
  bool is_repeller = false;   // exponent non-decreasing
  int manifold_dim = 0;

  // Data for membership tests / sampling.
  std::vector<Eigen::MatrixXd> class_bases;    // orthonormal per modulus class
  std::vector<Eigen::MatrixXd> prefix_bases;   // orthonormal basis of V_1+...+V_c

  bool contains(const Flag& b, double tol = 1e-6) const;
  Flag sample(SeqRng& rng) const;  // random flag inside the component
};

std::vector<FixedComponent> fixed_point_components(const JordanData& j, const ThetaSet& theta);

}  // namespace flagdyn

#pragma once

// Group-element decompositions: Iwasawa (KAN via QR with positive diagonal),
// polar/Cartan log singular values, and the multiplicative-Jordan data
// actually needed downstream: log-moduli plus the real invariant subspace for
// each modulus class (generalized eigenspaces grouped by |eigenvalue|).

#include <Eigen/Dense>

#include "flagdyn/weyl.hpp"

namespace flagdyn {

struct GroupElement {
  Eigen::MatrixXd m;
  Variant variant = Variant::Gl;

  GroupElement() = default;
  GroupElement(Eigen::MatrixXd mat, Variant var = Variant::Gl)
      : m(std::move(mat)), variant(var) {}
  int dim() const { return static_cast<int>(m.rows()); }
  void validate() const;  // square, sigma_min/sigma_max > 1e-12
};

struct IwasawaFactors {
  Eigen::MatrixXd k;  // orthogonal
  Eigen::VectorXd a;  // positive diagonal of A
  Eigen::MatrixXd n;  // unit upper triangular
};

IwasawaFactors iwasawa(const Eigen::MatrixXd& g);

// log A-part of the Iwasawa decomposition.
Eigen::VectorXd a_of(const Eigen::MatrixXd& g);

// Sorted log singular values (Cartan projection a+(g)).
ChamberVector polar_aplus(const Eigen::MatrixXd& g, Variant variant = Variant::Gl);

struct ModulusGroup {
  double log_modulus = 0.0;
  int multiplicity = 0;
  Eigen::MatrixXd basis;  // d x multiplicity, orthonormal, invariant under g
  double residual = 0.0;  // ||(I - P) g P|| / ||g||
};

struct JordanData {
  Eigen::MatrixXd matrix;      // the decomposed element
  ChamberVector log_moduli;    // descending, with multiplicity
  std::vector<ModulusGroup> groups;  // modulus descending; multiplicities sum to d
  bool degraded = false;       // some invariance residual above threshold
  Variant variant = Variant::Gl;

  ThetaSet modulus_type(double tol = 1e-9) const { return theta_of(log_moduli, tol); }
};

// tol clusters eigenvalues whose |log moduli| differ by at most tol.
JordanData jordan_multiplicative(const Eigen::MatrixXd& g, double tol = 1e-9,
                                 Variant variant = Variant::Gl);

}  // namespace flagdyn

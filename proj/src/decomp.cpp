#include "flagdyn/decomp.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <complex>

namespace flagdyn {

namespace {

constexpr double kSingularRatio = 1e-12;
constexpr double kInvarianceTol = 1e-8;

using Cplx = std::complex<double>;

void check_invertible(const Eigen::MatrixXd& g) {
  if (g.rows() != g.cols() || g.rows() == 0)
    throw std::invalid_argument("decomp: matrix not square");
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(g);
  const auto& s = svd.singularValues();
  if (s[s.size() - 1] <= kSingularRatio * s[0])
    throw std::invalid_argument("decomp: singular matrix");
}

// Swap adjacent diagonal entries k, k+1 of a complex Schur form in place.
void schur_swap(Eigen::MatrixXcd& T, Eigen::MatrixXcd& Q, int k) {
  Cplx t11 = T(k, k), t12 = T(k, k + 1), t22 = T(k + 1, k + 1);
  Eigen::Matrix2cd G;
  double r = std::hypot(std::abs(t12), std::abs(t22 - t11));
  if (std::abs(t22 - t11) < 1e-300) return;  // equal values: order immaterial
  if (std::abs(t12) < 1e-300 * std::abs(t22 - t11)) {
    G << 0, 1, 1, 0;  // already decoupled: plain transposition
  } else {
    Cplx c = t12 / r, s = (t22 - t11) / r;
    G << c, -std::conj(s), s, std::conj(c);
  }
  T.middleCols(k, 2) = (T.middleCols(k, 2) * G).eval();
  T.middleRows(k, 2) = (G.adjoint() * T.middleRows(k, 2)).eval();
  Q.middleCols(k, 2) = (Q.middleCols(k, 2) * G).eval();
  T(k + 1, k) = 0.0;
}

// Bubble the positions with label `target` to the front, preserving relative
// order of everything else.
void schur_bring_front(Eigen::MatrixXcd& T, Eigen::MatrixXcd& Q, std::vector<int>& labels,
                       int target, int count) {
  int placed = 0;
  for (int i = 0; i < static_cast<int>(labels.size()) && placed < count; ++i) {
    if (labels[i] != target) continue;
    for (int k = i; k > placed; --k) {
      schur_swap(T, Q, k - 1);
      std::swap(labels[k - 1], labels[k]);
    }
    ++placed;
  }
}

Eigen::MatrixXd realify(const Eigen::MatrixXcd& cols, int want) {
  Eigen::MatrixXd stacked(cols.rows(), 2 * cols.cols());
  stacked << cols.real(), cols.imag();
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(stacked);
  Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(cols.rows(), want);
  return q;
}

}  // namespace

void GroupElement::validate() const { check_invertible(m); }

IwasawaFactors iwasawa(const Eigen::MatrixXd& g) {
  check_invertible(g);
  int d = static_cast<int>(g.rows());
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  Eigen::MatrixXd k = qr.householderQ();
  Eigen::MatrixXd r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (int i = 0; i < d; ++i) {
    if (r(i, i) < 0) {
      r.row(i) = -r.row(i);
      k.col(i) = -k.col(i);
    }
  }
  IwasawaFactors out;
  out.k = std::move(k);
  out.a = r.diagonal();
  out.n = Eigen::MatrixXd::Identity(d, d);
  for (int i = 0; i < d; ++i) out.n.row(i).tail(d - i) = r.row(i).tail(d - i) / r(i, i);
  return out;
}

Eigen::VectorXd a_of(const Eigen::MatrixXd& g) {
  return iwasawa(g).a.array().log().matrix();
}

ChamberVector polar_aplus(const Eigen::MatrixXd& g, Variant variant) {
  check_invertible(g);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(g);
  Eigen::VectorXd logs = svd.singularValues().array().log().matrix();
  ChamberVector out = chamber_project(logs, variant);
  return out;
}

JordanData jordan_multiplicative(const Eigen::MatrixXd& g, double tol, Variant variant) {
  check_invertible(g);
  if (tol <= 0) throw std::invalid_argument("jordan: tol must be positive");
  int d = static_cast<int>(g.rows());

  Eigen::ComplexSchur<Eigen::MatrixXcd> schur(g.cast<Cplx>(), /*computeU=*/true);
  if (schur.info() != Eigen::Success) throw decomposition_error("jordan: schur failed");
  Eigen::MatrixXcd T0 = schur.matrixT(), Q0 = schur.matrixU();

  // Cluster eigenvalues by log-modulus (chain merge within tol).
  std::vector<double> lm(d);
  for (int i = 0; i < d; ++i) lm[i] = std::log(std::abs(T0(i, i)));
  std::vector<int> order(d);
  for (int i = 0; i < d; ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](int a, int b) { return lm[a] > lm[b]; });
  std::vector<int> label(d, -1);
  int nclusters = 0;
  for (int r = 0; r < d; ++r) {
    if (r == 0 || lm[order[r - 1]] - lm[order[r]] > tol) ++nclusters;
    label[order[r]] = nclusters - 1;
  }

  JordanData out;
  out.matrix = g;
  out.variant = variant;
  double gnorm = g.norm();
  Eigen::VectorXd all_logs(d);
  for (int i = 0; i < d; ++i) all_logs[i] = lm[i];
  out.log_moduli = chamber_project(all_logs, Variant::Gl);

  for (int c = 0; c < nclusters; ++c) {
    int mult = static_cast<int>(std::count(label.begin(), label.end(), c));
    Eigen::MatrixXcd T = T0, Q = Q0;
    std::vector<int> labels = label;
    schur_bring_front(T, Q, labels, c, mult);

    ModulusGroup grp;
    grp.multiplicity = mult;
    double acc = 0.0;
    for (int i = 0; i < mult; ++i) acc += std::log(std::abs(T(i, i)));
    grp.log_modulus = acc / mult;
    grp.basis = realify(Q.leftCols(mult), mult);
    Eigen::MatrixXd gw = g * grp.basis;
    grp.residual = (gw - grp.basis * (grp.basis.transpose() * gw)).norm() / gnorm;
    if (grp.residual > kInvarianceTol) out.degraded = true;
    out.groups.push_back(std::move(grp));
  }
  std::sort(out.groups.begin(), out.groups.end(),
            [](const ModulusGroup& a, const ModulusGroup& b) {
              return a.log_modulus > b.log_modulus;
            });
  return out;
}

}  // namespace flagdyn

#include "flagdyn/flags.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

namespace flagdyn {

namespace {

Eigen::MatrixXd orthonormalize(const Eigen::MatrixXd& m) {
  int d = static_cast<int>(m.rows());
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(m);
  Eigen::MatrixXd q = qr.householderQ();
  Eigen::MatrixXd r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (int i = 0; i < d; ++i)
    if (r(i, i) < 0) q.col(i) = -q.col(i);
  return q;
}

// Singular values of B1^T B2 for orthonormal blocks (cosines of principal
// angles), descending.
Eigen::VectorXd principal_cosines(const Eigen::MatrixXd& b1, const Eigen::MatrixXd& b2) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(b1.transpose() * b2);
  return svd.singularValues();
}

}  // namespace

void Flag::validate(double tol) const {
  if (frame.rows() != dim() || frame.cols() != dim())
    throw std::invalid_argument("flag: frame dimension mismatch");
  Eigen::MatrixXd gram = frame.transpose() * frame;
  if ((gram - Eigen::MatrixXd::Identity(dim(), dim())).norm() > tol)
    throw std::invalid_argument("flag: frame not orthonormal");
}

Flag make_flag(const ThetaSet& type, const Eigen::MatrixXd& frame) {
  if (frame.rows() != type.dim() || frame.cols() != type.dim())
    throw std::invalid_argument("make_flag: frame must be d x d");
  Eigen::FullPivLU<Eigen::MatrixXd> lu(frame);
  if (lu.rank() < type.dim()) throw std::invalid_argument("make_flag: frame not full rank");
  return Flag{type, orthonormalize(frame)};
}

Flag flag_from_line(const Eigen::VectorXd& v) {
  int d = static_cast<int>(v.size());
  if (d < 2 || v.norm() == 0) throw std::invalid_argument("flag_from_line: bad vector");
  // Complete with identity columns, dropping e_j for the dominant |v_j|.
  int jmax = 0;
  for (int i = 1; i < d; ++i)
    if (std::abs(v[i]) > std::abs(v[jmax])) jmax = i;
  Eigen::MatrixXd m(d, d);
  m.col(0) = v;
  int col = 1;
  for (int j = 0; j < d; ++j)
    if (j != jmax) m.col(col++) = Eigen::VectorXd::Unit(d, j);
  return make_flag(ThetaSet::from_blocks({1, d - 1}), m);
}

Flag full_flag(const Eigen::MatrixXd& frame) {
  return make_flag(ThetaSet::empty(static_cast<int>(frame.rows())), frame);
}

Flag act(const Eigen::MatrixXd& g, const Flag& b) {
  return Flag{b.type, orthonormalize(g * b.frame)};
}

Flag project(const Flag& b, const ThetaSet& coarser) {
  if (coarser.dim() != b.dim()) throw std::invalid_argument("project: dim mismatch");
  if (!refines(b.type, coarser))
    throw std::invalid_argument("project: target type must be coarser");
  return Flag{coarser, b.frame};
}

double transversal_margin(const Flag& b, const Flag& bstar) {
  if (b.dim() != bstar.dim()) throw std::invalid_argument("transversal: dim mismatch");
  if (!(dual_theta(b.type) == bstar.type))
    throw std::invalid_argument("transversal: types not dual");
  int d = b.dim();
  auto dims = b.type.flag_dims();
  if (dims.empty()) return std::sqrt(2.0);  // trivial flag manifold
  double margin = std::sqrt(2.0);
  for (int di : dims) {
    Eigen::MatrixXd m(d, d);
    m.leftCols(di) = b.frame.leftCols(di);
    m.rightCols(d - di) = bstar.frame.leftCols(d - di);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
    margin = std::min(margin, svd.singularValues()[d - 1]);
  }
  return margin;
}

bool transversal(const Flag& b, const Flag& bstar, double tol) {
  return transversal_margin(b, bstar) > tol;
}

double flag_distance(const Flag& a, const Flag& b) {
  if (!(a.type == b.type)) throw std::invalid_argument("flag_distance: type mismatch");
  double dist = 0.0;
  for (int di : a.type.flag_dims()) {
    // ||P - Q||_2 = sin of the largest principal angle, computed without
    // cancellation as the norm of (I - P) restricted to the second subspace.
    Eigen::MatrixXd b1 = a.frame.leftCols(di), b2 = b.frame.leftCols(di);
    Eigen::MatrixXd resid = b2 - b1 * (b1.transpose() * b2);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(resid);
    dist = std::max(dist, std::min(1.0, svd.singularValues()[0]));
  }
  return dist;
}

// ---- fixed point components ----

namespace {

// Row sums = gap sizes, column sums = class multiplicities. Emitted in an
// order whose first element is the greedy (attractor) assignment.
void enumerate_assignments(const std::vector<int>& gaps, const std::vector<int>& mults,
                           std::vector<Eigen::MatrixXi>& out) {
  int L = static_cast<int>(gaps.size()), C = static_cast<int>(mults.size());
  Eigen::MatrixXi cur = Eigen::MatrixXi::Zero(L, C);
  std::vector<int> left(mults.begin(), mults.end());
  out.clear();
  std::function<void(int)> row = [&](int l) {
    if (l == L) {
      out.push_back(cur);
      return;
    }
    std::function<void(int, int)> cols = [&](int c, int need) {
      if (c == C) {
        if (need == 0) row(l + 1);
        return;
      }
      int maxtake = std::min(left[c], need);
      for (int take = maxtake; take >= 0; --take) {
        cur(l, c) = take;
        left[c] -= take;
        cols(c + 1, need - take);
        left[c] += take;
        cur(l, c) = 0;
      }
    };
    cols(0, gaps[l]);
  };
  row(0);
}

}  // namespace

bool FixedComponent::contains(const Flag& b, double tol) const {
  if (!(b.type == representative.type)) return false;
  auto dims = b.type.flag_dims();
  int L = static_cast<int>(dims.size());
  int C = static_cast<int>(class_bases.size());
  for (int l = 0; l < L; ++l) {
    Eigen::MatrixXd bl = b.frame.leftCols(dims[l]);
    for (int c = 0; c < C; ++c) {
      // required dim(U_l ∩ (V_1+..+V_{c+1})), exactly
      int want = 0;
      for (int ll = 0; ll <= l; ++ll)
        for (int cc = 0; cc <= c; ++cc) want += assignment(ll, cc);
      Eigen::VectorXd cos = principal_cosines(bl, prefix_bases[c]);
      int near_one = 0;
      for (int i = 0; i < cos.size(); ++i)
        if (cos[i] >= 1.0 - tol) ++near_one;
      if (near_one != want) return false;
    }
  }
  return true;
}

Flag FixedComponent::sample(SeqRng& rng) const {
  int d = representative.dim();
  int C = static_cast<int>(class_bases.size());
  std::vector<Eigen::MatrixXd> mixed(C);
  for (int c = 0; c < C; ++c) {
    int m = static_cast<int>(class_bases[c].cols());
    Eigen::MatrixXd gauss(m, m);
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < m; ++j) {
        double u1 = std::max(rng.u01(), 1e-12), u2 = rng.u01();
        gauss(i, j) = std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
      }
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(gauss);
    Eigen::MatrixXd o = qr.householderQ();
    mixed[c] = class_bases[c] * o;
  }
  // Assemble columns following the assignment, gap by gap.
  Eigen::MatrixXd frame(d, d);
  std::vector<int> used(C, 0);
  int col = 0;
  int L = assignment.rows();
  for (int l = 0; l < L; ++l)
    for (int c = 0; c < C; ++c)
      for (int t = 0; t < assignment(l, c); ++t) frame.col(col++) = mixed[c].col(used[c]++);
  return make_flag(representative.type, frame);
}

std::vector<FixedComponent> fixed_point_components(const JordanData& j, const ThetaSet& theta) {
  int d = j.log_moduli.dim();
  if (theta.dim() != d) throw std::invalid_argument("fixed_point_components: dim mismatch");
  auto dims = theta.flag_dims();
  std::vector<int> gaps;
  {
    int prev = 0;
    for (int di : dims) {
      gaps.push_back(di - prev);
      prev = di;
    }
    gaps.push_back(d - prev);
  }
  std::vector<int> mults;
  std::vector<double> mods;
  for (const auto& g : j.groups) {
    mults.push_back(g.multiplicity);
    mods.push_back(g.log_modulus);
  }
  int C = static_cast<int>(mults.size());

  std::vector<Eigen::MatrixXi> assignments;
  enumerate_assignments(gaps, mults, assignments);
  if (assignments.size() > 50000)
    throw capacity_error("fixed_point_components: too many components");

  // Shared prefix bases V_1+...+V_c.
  std::vector<Eigen::MatrixXd> prefixes(C);
  {
    int acc = 0;
    Eigen::MatrixXd cat(d, d);
    for (int c = 0; c < C; ++c) {
      cat.middleCols(acc, mults[c]) = j.groups[c].basis;
      acc += mults[c];
      Eigen::HouseholderQR<Eigen::MatrixXd> qr(cat.leftCols(acc));
      prefixes[c] = qr.householderQ() * Eigen::MatrixXd::Identity(d, acc);
    }
  }

  // Class start offsets in the sorted-descending index range.
  std::vector<int> class_start(C, 0);
  for (int c = 1; c < C; ++c) class_start[c] = class_start[c - 1] + mults[c - 1];

  std::vector<FixedComponent> out;
  for (const auto& asg : assignments) {
    FixedComponent fc;
    fc.assignment = asg;
    fc.class_bases.reserve(C);
    for (const auto& g : j.groups) fc.class_bases.push_back(g.basis);
    fc.prefix_bases = prefixes;

    std::vector<int> perm(d);
    Eigen::VectorXd expo(d);
    Eigen::MatrixXd frame(d, d);
    std::vector<int> used(C, 0);
    int pos = 0;
    int L = asg.rows();
    for (int l = 0; l < L; ++l) {
      for (int c = 0; c < C; ++c) {
        for (int t = 0; t < asg(l, c); ++t) {
          perm[pos] = class_start[c] + used[c];
          expo[pos] = mods[c];
          frame.col(pos) = j.groups[c].basis.col(used[c]);
          ++used[c];
          ++pos;
        }
      }
    }
    fc.coset_rep = WeylElement(perm);
    fc.exponent = expo;
    fc.representative = make_flag(theta, frame);
    fc.is_attractor = true;
    fc.is_repeller = true;
    for (int i = 0; i + 1 < d; ++i) {
      if (expo[i] < expo[i + 1] - 1e-15) fc.is_attractor = false;
      if (expo[i] > expo[i + 1] + 1e-15) fc.is_repeller = false;
    }
    int mdim = 0;
    for (int c = 0; c < C; ++c) {
      int sq = 0;
      for (int l = 0; l < L; ++l) sq += asg(l, c) * asg(l, c);
      mdim += (mults[c] * mults[c] - sq) / 2;
    }
    fc.manifold_dim = mdim;
    out.push_back(std::move(fc));
  }
  return out;
}

}  // namespace flagdyn

#include "flagdyn/weyl.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

namespace flagdyn {

namespace {
constexpr double kSlTraceTol = 1e-12;
constexpr int kMaxWeylDim = 8;
}  // namespace

std::string format_double(double x, int sig_digits) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*g", sig_digits, x);
  return buf;
}

void ChamberVector::validate() const {
  if (entries.size() == 0) throw std::invalid_argument("chamber vector: empty");
  for (int i = 0; i + 1 < entries.size(); ++i) {
    if (entries[i] < entries[i + 1])
      throw std::invalid_argument("chamber vector: entries not non-increasing");
  }
  if (variant == Variant::Sl && std::abs(entries.sum()) > kSlTraceTol)
    throw std::invalid_argument("chamber vector: sl variant requires zero trace");
}

std::string ChamberVector::str() const {
  std::string s = "(";
  for (int i = 0; i < entries.size(); ++i) {
    if (i) s += ", ";
    s += format_double(entries[i], 12);
  }
  return s + ")";
}

ChamberVector chamber_project(const Eigen::VectorXd& v, Variant variant) {
  ChamberVector out;
  out.entries = v;
  out.variant = variant;
  std::sort(out.entries.begin(), out.entries.end(), std::greater<double>());
  return out;
}

double simple_root_eval(int i, const Eigen::VectorXd& H) {
  if (i < 0 || i + 1 >= H.size()) throw std::invalid_argument("simple_root_eval: index");
  return H[i] - H[i + 1];
}

double fundamental_weight_eval(int j, const ChamberVector& H) {
  int d = H.dim();
  int jmax = H.variant == Variant::Gl ? d : d - 1;
  if (j < 1 || j > jmax) throw std::invalid_argument("fundamental_weight_eval: index");
  return H.entries.head(j).sum();
}

WeylElement::WeylElement(std::vector<int> images) : perm_(std::move(images)) {
  std::vector<bool> seen(perm_.size(), false);
  for (int p : perm_) {
    if (p < 0 || p >= static_cast<int>(perm_.size()) || seen[p])
      throw std::invalid_argument("weyl element: not a permutation");
    seen[p] = true;
  }
}

WeylElement WeylElement::identity(int d) {
  std::vector<int> im(d);
  std::iota(im.begin(), im.end(), 0);
  return WeylElement(std::move(im));
}

WeylElement WeylElement::longest(int d) {
  std::vector<int> im(d);
  for (int i = 0; i < d; ++i) im[i] = d - 1 - i;
  return WeylElement(std::move(im));
}

WeylElement WeylElement::inverse() const {
  std::vector<int> im(perm_.size());
  for (int i = 0; i < static_cast<int>(perm_.size()); ++i) im[perm_[i]] = i;
  return WeylElement(std::move(im));
}

WeylElement WeylElement::compose(const WeylElement& rhs) const {
  if (dim() != rhs.dim()) throw std::invalid_argument("weyl compose: dim mismatch");
  std::vector<int> im(perm_.size());
  for (int i = 0; i < static_cast<int>(perm_.size()); ++i) im[i] = perm_[rhs.perm_[i]];
  return WeylElement(std::move(im));
}

Eigen::VectorXd WeylElement::apply(const Eigen::VectorXd& v) const {
  if (v.size() != dim()) throw std::invalid_argument("weyl apply: dim mismatch");
  Eigen::VectorXd out(v.size());
  for (int i = 0; i < dim(); ++i) out[perm_[i]] = v[i];
  return out;
}

std::string WeylElement::str() const {
  std::string s = "[";
  for (size_t i = 0; i < perm_.size(); ++i) {
    if (i) s += " ";
    s += std::to_string(perm_[i]);
  }
  return s + "]";
}

ThetaSet::ThetaSet(int d, std::vector<bool> included) : d_(d), included_(std::move(included)) {
  if (d < 1 || static_cast<int>(included_.size()) != d - 1)
    throw std::invalid_argument("theta set: need d-1 flags");
}

ThetaSet ThetaSet::empty(int d) { return ThetaSet(d, std::vector<bool>(d - 1, false)); }
ThetaSet ThetaSet::full(int d) { return ThetaSet(d, std::vector<bool>(d - 1, true)); }

ThetaSet ThetaSet::from_blocks(const std::vector<int>& blocks) {
  int d = std::accumulate(blocks.begin(), blocks.end(), 0);
  if (d < 1) throw std::invalid_argument("theta set: empty block list");
  std::vector<bool> inc(d - 1, true);
  int pos = 0;
  for (size_t b = 0; b + 1 < blocks.size(); ++b) {
    if (blocks[b] < 1) throw std::invalid_argument("theta set: non-positive block");
    pos += blocks[b];
    inc[pos - 1] = false;  // boundary between blocks: root excluded
  }
  if (!blocks.empty() && blocks.back() < 1)
    throw std::invalid_argument("theta set: non-positive block");
  return ThetaSet(d, std::move(inc));
}

std::vector<int> ThetaSet::blocks() const {
  std::vector<int> out;
  int cur = 1;
  for (int i = 0; i < d_ - 1; ++i) {
    if (included_[i]) {
      ++cur;
    } else {
      out.push_back(cur);
      cur = 1;
    }
  }
  out.push_back(cur);
  return out;
}

std::vector<int> ThetaSet::flag_dims() const {
  std::vector<int> out;
  int acc = 0;
  auto bl = blocks();
  for (size_t i = 0; i + 1 < bl.size(); ++i) {
    acc += bl[i];
    out.push_back(acc);
  }
  return out;
}

bool ThetaSet::is_empty() const {
  return std::none_of(included_.begin(), included_.end(), [](bool b) { return b; });
}
bool ThetaSet::is_full() const {
  return std::all_of(included_.begin(), included_.end(), [](bool b) { return b; });
}

std::string ThetaSet::str() const {
  std::string s = "blocks=[";
  auto bl = blocks();
  for (size_t i = 0; i < bl.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(bl[i]);
  }
  return s + "]";
}

ThetaSet theta_of(const ChamberVector& H, double tol) {
  if (tol < 0) throw std::invalid_argument("theta_of: negative tol");
  int d = H.dim();
  std::vector<bool> inc(d - 1);
  for (int i = 0; i < d - 1; ++i) inc[i] = simple_root_eval(i, H.entries) <= tol;
  return ThetaSet(d, std::move(inc));
}

ThetaSet dual_theta(const ThetaSet& theta) {
  std::vector<bool> inc(theta.included().rbegin(), theta.included().rend());
  return ThetaSet(theta.dim(), std::move(inc));
}

std::vector<WeylElement> weyl_subgroup(const ThetaSet& theta) {
  int d = theta.dim();
  if (d > kMaxWeylDim)
    throw capacity_error("weyl_subgroup: d > 8 (" + std::to_string(d) + ")");
  auto bl = theta.blocks();
  std::vector<WeylElement> out;
  // Cartesian product of per-block permutations, lexicographic order.
  std::vector<std::vector<std::vector<int>>> per_block;
  for (int b : bl) {
    std::vector<int> base(b);
    std::iota(base.begin(), base.end(), 0);
    std::vector<std::vector<int>> perms;
    do perms.push_back(base);
    while (std::next_permutation(base.begin(), base.end()));
    per_block.push_back(std::move(perms));
  }
  std::vector<size_t> idx(bl.size(), 0);
  while (true) {
    std::vector<int> im(d);
    int off = 0;
    for (size_t b = 0; b < bl.size(); ++b) {
      for (int j = 0; j < bl[b]; ++j) im[off + j] = off + per_block[b][idx[b]][j];
      off += bl[b];
    }
    out.emplace_back(std::move(im));
    size_t k = bl.size();
    while (k > 0) {
      --k;
      if (++idx[k] < per_block[k].size()) break;
      idx[k] = 0;
      if (k == 0) return out;
    }
  }
}

bool refines(const ThetaSet& theta1, const ThetaSet& theta2) {
  if (theta1.dim() != theta2.dim()) throw std::invalid_argument("refines: dim mismatch");
  for (int i = 0; i < theta1.dim() - 1; ++i)
    if (theta1.contains(i) && !theta2.contains(i)) return false;
  return true;
}

}  // namespace flagdyn

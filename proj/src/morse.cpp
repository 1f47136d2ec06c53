#include "flagdyn/morse.hpp"

#include <Eigen/LU>
#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <stdexcept>
#include <string>

namespace flagdyn {

namespace {

constexpr long long kNodeBudget = 5000000;

bool is_p1(int d, const ThetaSet& th) { return d == 2 && th == ThetaSet::empty(2); }
bool is_p2(int d, const ThetaSet& th) {
  return d == 3 && th == ThetaSet::from_blocks({1, 2});
}
bool is_p2_dual(int d, const ThetaSet& th) {
  return d == 3 && th == ThetaSet::from_blocks({2, 1});
}

double dir_distance(const Eigen::Ref<const Eigen::VectorXd>& a,
                    const Eigen::Ref<const Eigen::VectorXd>& b) {
  if (a.size() == 2) return std::abs(a(0) * b(1) - a(1) * b(0));
  Eigen::Vector3d u = a, v = b;
  return u.cross(v).norm();
}

// face-sheet coordinates of the P^2 grid
void p2_axes(int f, int& a, int& b) {
  a = (f == 0) ? 1 : 0;
  b = (f == 2) ? 1 : 2;
}

Eigen::Vector3d p2_dir(int f, double u, double v) {
  int a, b;
  p2_axes(f, a, b);
  Eigen::Vector3d w = Eigen::Vector3d::Zero();
  w(f) = 1.0;
  w(a) = u;
  w(b) = v;
  return w.normalized();
}

// [b1 b2 n] frame: plane flag of type [2,1] with normal n
Flag plane_flag_from_normal(const Eigen::Vector3d& n) {
  Flag line = flag_from_line(n);
  Eigen::Matrix3d fr;
  fr.col(0) = line.frame.col(1);
  fr.col(1) = line.frame.col(2);
  fr.col(2) = line.frame.col(0);
  return make_flag(ThetaSet::from_blocks({2, 1}), fr);
}

struct BaseLayer {
  int states = 0;
  std::vector<std::vector<int>> words;    // symbolic
  std::vector<double> centers;            // rotation
  double halfwidth = 0.0;
  std::vector<Eigen::MatrixXd> mat;       // generator at each state
  std::vector<std::vector<int>> succ;     // successor state ids
};

BaseLayer build_base_layer(const CocycleSystem& c, const ChainGraphConfig& cfg) {
  if (c.reversed) throw std::invalid_argument("chain graph: build on the forward system");
  BaseLayer out;
  switch (c.base.kind) {
    case BaseKind::PeriodicOrbit: {
      out.states = c.base.period;
      out.mat.resize(out.states);
      out.succ.resize(out.states);
      for (int b = 0; b < out.states; ++b) {
        BasePoint p;
        p.kind = BaseKind::PeriodicOrbit;
        p.index = b;
        p.period = c.base.period;
        out.mat[b] = c.A(p);
        out.succ[b] = {(b + 1) % out.states};
      }
      break;
    }
    case BaseKind::FullShift:
    case BaseKind::SubshiftFinite: {
      int L = cfg.word_length;
      int win = c.gen.window();
      if (win < 0) throw std::invalid_argument("chain graph: generator not cylinder-evaluable");
      if (L < win) throw std::invalid_argument("chain graph: word_length below generator window");
      int m = c.base.n_symbols();
      // enumerate admissible words of length L
      std::vector<std::vector<int>> words;
      std::vector<int> cur;
      auto admissible = [&](int prev, int next) {
        if (c.base.kind == BaseKind::FullShift) return true;
        return c.base.transitions(prev, next) != 0;
      };
      std::function<void()> rec = [&]() {
        if (static_cast<int>(cur.size()) == L) {
          words.push_back(cur);
          if (words.size() > 250000) {
            throw capacity_error("chain graph: too many cylinder words");
          }
          return;
        }
        for (int s = 0; s < m; ++s) {
          if (!cur.empty() && !admissible(cur.back(), s)) continue;
          cur.push_back(s);
          rec();
          cur.pop_back();
        }
      };
      rec();
      out.states = static_cast<int>(words.size());
      out.words = words;
      out.mat.resize(out.states);
      out.succ.resize(out.states);
      std::map<std::vector<int>, int> index;
      for (int b = 0; b < out.states; ++b) index[words[b]] = b;
      for (int b = 0; b < out.states; ++b) {
        out.mat[b] = c.gen.at_word(words[b], 0);
        std::vector<int> next(words[b].begin() + 1, words[b].end());
        next.push_back(0);
        for (int s = 0; s < m; ++s) {
          next.back() = s;
          if (!admissible(words[b][L - 1], s)) continue;
          auto it = index.find(next);
          if (it != index.end()) out.succ[b].push_back(it->second);
        }
        if (out.succ[b].empty()) {
          throw decomposition_error("chain graph: dead-end cylinder word");
        }
      }
      break;
    }
    case BaseKind::IrrationalRotation: {
      int Kb = cfg.base_resolution;
      if (Kb < 2) throw std::invalid_argument("chain graph: base_resolution >= 2");
      out.states = Kb;
      out.centers.resize(Kb);
      out.halfwidth = 0.5 / Kb;
      out.mat.resize(Kb);
      for (int b = 0; b < Kb; ++b) {
        out.centers[b] = (b + 0.5) / Kb;
        BasePoint p;
        p.kind = BaseKind::IrrationalRotation;
        p.angle = c.base.angle;
        p.coord = out.centers[b];
        out.mat[b] = c.A(p);
      }
      // successors resolved during edge construction (distance-dependent)
      break;
    }
  }
  return out;
}

double circle_dist(double a, double b) {
  double d = std::abs(a - b);
  d -= std::floor(d);
  return std::min(d, 1.0 - d);
}

struct SccData {
  std::vector<int> comp;  // node -> component id
  int count = 0;
  std::vector<bool> nontrivial;
};

// iterative Tarjan
SccData strongly_connected(const ChainGraph& g) {
  const int n = g.nodes();
  SccData out;
  out.comp.assign(n, -1);
  std::vector<int> index(n, -1), low(n, 0), stack, call_node, call_edge;
  std::vector<bool> on_stack(n, false);
  int next_index = 0;
  std::vector<bool> self_loop(n, false);

  for (int root = 0; root < n; ++root) {
    if (index[root] != -1) continue;
    call_node.push_back(root);
    call_edge.push_back(g.edge_start[root]);
    index[root] = low[root] = next_index++;
    stack.push_back(root);
    on_stack[root] = true;
    while (!call_node.empty()) {
      int u = call_node.back();
      int& e = call_edge.back();
      if (e < g.edge_start[u + 1]) {
        int v = g.edge_to[e++];
        if (v == u) self_loop[u] = true;
        if (index[v] == -1) {
          call_node.push_back(v);
          call_edge.push_back(g.edge_start[v]);
          index[v] = low[v] = next_index++;
          stack.push_back(v);
          on_stack[v] = true;
        } else if (on_stack[v]) {
          low[u] = std::min(low[u], index[v]);
        }
      } else {
        if (low[u] == index[u]) {
          int cid = out.count++;
          int v;
          do {
            v = stack.back();
            stack.pop_back();
            on_stack[v] = false;
            out.comp[v] = cid;
          } while (v != u);
        }
        call_node.pop_back();
        call_edge.pop_back();
        if (!call_node.empty()) {
          int parent = call_node.back();
          low[parent] = std::min(low[parent], low[u]);
        }
      }
    }
  }
  // nontrivial: size >= 2 or a self-loop
  std::vector<int> size(out.count, 0);
  for (int v = 0; v < n; ++v) ++size[out.comp[v]];
  out.nontrivial.assign(out.count, false);
  for (int v = 0; v < n; ++v) {
    if (size[out.comp[v]] >= 2 || self_loop[v]) out.nontrivial[out.comp[v]] = true;
  }
  return out;
}

struct HowardResult {
  double mean = 0.0;
  std::vector<int> cycle;  // local indices
};

// max cycle mean of scalar node weights over a strongly connected subgraph
HowardResult howard_max_mean(const std::vector<std::vector<int>>& adj,
                             const std::vector<double>& s) {
  const int n = static_cast<int>(adj.size());
  std::vector<int> policy(n);
  for (int i = 0; i < n; ++i) {
    if (adj[i].empty()) throw decomposition_error("cycle mean: node without internal edge");
    policy[i] = adj[i][0];
  }
  std::vector<double> eta(n, 0.0), h(n, 0.0);
  std::vector<std::vector<int>> cycles;
  std::vector<double> cycle_eta;

  for (int iter = 0; iter < 10000; ++iter) {
    // evaluate the functional graph of the policy
    cycles.clear();
    cycle_eta.clear();
    std::vector<int> state(n, 0);  // 0 new, 1 in progress, 2 done
    std::vector<int> order;
    for (int start = 0; start < n; ++start) {
      if (state[start] != 0) continue;
      order.clear();
      int u = start;
      while (state[u] == 0) {
        state[u] = 1;
        order.push_back(u);
        u = policy[u];
      }
      if (state[u] == 1) {
        // found a new cycle beginning at u
        auto it = std::find(order.begin(), order.end(), u);
        std::vector<int> cyc(it, order.end());
        double mean = 0.0;
        for (int v : cyc) mean += s[v];
        mean /= cyc.size();
        for (int v : cyc) eta[v] = mean;
        h[cyc[0]] = 0.0;
        for (size_t i = 0; i + 1 < cyc.size(); ++i) {
          // h(pi(v)) = h(v) - (s(v) - eta)
          h[cyc[i + 1]] = h[cyc[i]] - (s[cyc[i]] - mean);
        }
        for (int v : cyc) state[v] = 2;
        cycles.push_back(std::move(cyc));
        cycle_eta.push_back(mean);
      }
      // unwind the tail into the processed region
      for (auto rit = order.rbegin(); rit != order.rend(); ++rit) {
        int v = *rit;
        if (state[v] == 2) continue;
        eta[v] = eta[policy[v]];
        h[v] = s[v] - eta[v] + h[policy[v]];
        state[v] = 2;
      }
    }
    // improve
    bool changed = false;
    for (int u = 0; u < n; ++u) {
      int best = policy[u];
      double best_eta = eta[best];
      double best_val = s[u] - best_eta + h[best];
      for (int v : adj[u]) {
        if (eta[v] > best_eta + 1e-12) {
          best = v;
          best_eta = eta[v];
          best_val = s[u] - best_eta + h[v];
        } else if (eta[v] >= best_eta - 1e-12 && s[u] - eta[v] + h[v] > best_val + 1e-10) {
          best = v;
          best_val = s[u] - eta[v] + h[v];
        }
      }
      if (best != policy[u]) {
        policy[u] = best;
        changed = true;
      }
    }
    if (!changed) {
      HowardResult out;
      size_t arg = 0;
      for (size_t i = 0; i < cycles.size(); ++i) {
        if (cycle_eta[i] > cycle_eta[arg]) arg = i;
      }
      out.mean = cycle_eta[arg];
      out.cycle = cycles[arg];
      return out;
    }
  }
  throw decomposition_error("cycle mean: policy iteration did not settle");
}

std::vector<Eigen::VectorXd> hull_directions(int d, int count) {
  std::vector<Eigen::VectorXd> dirs;
  dirs.reserve(count);
  if (d == 2) {
    for (int k = 0; k < count; ++k) {
      double phi = 2.0 * M_PI * k / count;
      dirs.push_back(Eigen::Vector2d(std::cos(phi), std::sin(phi)));
    }
    return dirs;
  }
  if (d == 3) {
    const double golden = M_PI * (3.0 - std::sqrt(5.0));
    for (int k = 0; k < count; ++k) {
      double z = 1.0 - 2.0 * (k + 0.5) / count;
      double r = std::sqrt(std::max(0.0, 1.0 - z * z));
      dirs.push_back(Eigen::Vector3d(r * std::cos(golden * k), r * std::sin(golden * k), z));
    }
    return dirs;
  }
  SeqRng seq(CounterRng{0x8d17c});
  for (int k = 0; k < count; ++k) {
    Eigen::VectorXd u(d);
    double nrm = 0.0;
    do {
      for (int i = 0; i < d; ++i) {
        // Box-Muller
        double a = std::max(1e-12, seq.u01());
        double b = seq.u01();
        u(i) = std::sqrt(-2.0 * std::log(a)) * std::cos(2.0 * M_PI * b);
      }
      nrm = u.norm();
    } while (nrm < 1e-9);
    dirs.push_back(u / nrm);
  }
  return dirs;
}

}  // namespace

ChainGraph build_chain_graph(const CocycleSystem& c, const ChainGraphConfig& cfg) {
  const int d = c.d;
  const bool p1 = is_p1(d, cfg.theta);
  const bool p2 = is_p2(d, cfg.theta);
  const bool dual = is_p2_dual(d, cfg.theta);
  if (!p1 && !p2 && !dual) {
    throw std::invalid_argument("chain graph: unsupported flag grid " + cfg.theta.str() +
                                " in dimension " + std::to_string(d));
  }
  if (cfg.eps < 0) throw std::invalid_argument("chain graph: eps >= 0");
  const int K = cfg.flag_resolution;
  if (K < 4) throw std::invalid_argument("chain graph: flag_resolution >= 4");

  BaseLayer base = build_base_layer(c, cfg);
  const long long cells = p1 ? K : 3LL * K * K;
  if (static_cast<long long>(base.states) * cells > kNodeBudget) {
    throw capacity_error("chain graph: node budget exceeded");
  }

  ChainGraph g;
  g.d = d;
  g.theta = cfg.theta;
  g.eps = cfg.eps;
  g.base_states = base.states;
  g.cells = static_cast<int>(cells);
  g.base_words = base.words;
  g.base_centers = base.centers;
  g.base_halfwidth = base.halfwidth;

  // grid cells
  g.cell_dir.resize(g.cells);
  g.cell_flag.resize(g.cells);
  g.cell_lift.resize(g.cells);
  g.cell_radius.resize(g.cells);
  if (p1) {
    for (int i = 0; i < K; ++i) {
      double th = (i + 0.5) * M_PI / K;
      Eigen::Vector2d v(std::cos(th), std::sin(th));
      g.cell_dir[i] = v;
      Eigen::Matrix2d fr;
      fr << v(0), -v(1), v(1), v(0);
      g.cell_flag[i] = full_flag(fr);
      g.cell_lift[i] = g.cell_flag[i];
      g.cell_radius[i] = std::sin(0.5 * M_PI / K);
    }
  } else {
    double hstep = 2.0 / K;
    for (int f = 0; f < 3; ++f) {
      for (int i = 0; i < K; ++i) {
        for (int j = 0; j < K; ++j) {
          int id = (f * K + i) * K + j;
          double u = -1.0 + (i + 0.5) * hstep;
          double v = -1.0 + (j + 0.5) * hstep;
          Eigen::Vector3d dir = p2_dir(f, u, v);
          g.cell_dir[id] = dir;
          double rad = 0.0;
          for (int su = -1; su <= 1; su += 2) {
            for (int sv = -1; sv <= 1; sv += 2) {
              Eigen::Vector3d corner = p2_dir(f, u + su * hstep / 2, v + sv * hstep / 2);
              rad = std::max(rad, dir.cross(corner).norm());
            }
          }
          g.cell_radius[id] = rad;
          if (p2) {
            Flag lf = flag_from_line(dir);
            g.cell_flag[id] = lf;
            g.cell_lift[id] = full_flag(lf.frame);
          } else {
            Flag pf = plane_flag_from_normal(dir);
            g.cell_flag[id] = pf;
            g.cell_lift[id] = full_flag(pf.frame);
          }
        }
      }
    }
  }
  g.cell_diameter = 2.0 * *std::max_element(g.cell_radius.begin(), g.cell_radius.end());

  // directions as a matrix for the candidate prefilter
  Eigen::MatrixXd dirs(d, g.cells);
  for (int i = 0; i < g.cells; ++i) dirs.col(i) = g.cell_dir[i];
  const double rmax = *std::max_element(g.cell_radius.begin(), g.cell_radius.end());

  // sample points per cell (center, corners, edge midpoints): the edge test
  // takes the best sample, approximating min over the cell of the image
  // distance without inflating contracting directions
  std::vector<Eigen::MatrixXd> cell_samples(g.cells);
  if (p1) {
    double h = 0.5 * M_PI / K;
    for (int i = 0; i < K; ++i) {
      double th = (i + 0.5) * M_PI / K;
      Eigen::MatrixXd s(2, 3);
      int col = 0;
      for (double o : {-h, 0.0, h}) {
        s.col(col++) = Eigen::Vector2d(std::cos(th + o), std::sin(th + o));
      }
      cell_samples[i] = s;
    }
  } else {
    double h = 1.0 / K;
    for (int f = 0; f < 3; ++f) {
      for (int i = 0; i < K; ++i) {
        for (int j = 0; j < K; ++j) {
          int id = (f * K + i) * K + j;
          double u = -1.0 + (i + 0.5) * 2.0 / K;
          double v = -1.0 + (j + 0.5) * 2.0 / K;
          Eigen::MatrixXd s(3, 9);
          int col = 0;
          for (int du = -1; du <= 1; ++du) {
            for (int dv = -1; dv <= 1; ++dv) {
              s.col(col++) = p2_dir(f, u + du * h, v + dv * h);
            }
          }
          cell_samples[id] = s;
        }
      }
    }
  }

  // per-state matrices acting on cell directions (dual grid uses inverse
  // transpose: the normal of A.P is A^-T n)
  std::vector<Eigen::MatrixXd> act_mat(base.states);
  for (int b = 0; b < base.states; ++b) {
    act_mat[b] = dual ? Eigen::MatrixXd(base.mat[b].partialPivLu().inverse().transpose())
                      : base.mat[b];
  }

  const int n_nodes = g.nodes();
  g.node_weight.resize(n_nodes);
  std::vector<std::vector<int>> adj(n_nodes);

  const bool rotation = c.base.kind == BaseKind::IrrationalRotation;
  parallel_for(n_nodes, 1, [&](int node) {
    int b = g.node_base(node);
    int cell = g.node_cell(node);
    g.node_weight[node] = a_of(base.mat[b] * g.cell_lift[cell].frame);
    const Eigen::MatrixXd& samples = cell_samples[cell];
    const int ns = static_cast<int>(samples.cols());
    Eigen::MatrixXd imgs(d, ns);
    for (int s = 0; s < ns; ++s) {
      imgs.col(s) = (act_mat[b] * samples.col(s)).normalized();
    }
    Eigen::VectorXd maxdot = (dirs.transpose() * imgs).cwiseAbs().rowwise().maxCoeff();

    auto scan_cells = [&](int b2, double base_slack) {
      double rem = g.eps - base_slack;
      if (rem < 0) return;
      double sin_cut = rem + rmax;
      double cos_cut = sin_cut >= 1.0 ? -1.0 : std::sqrt(1.0 - sin_cut * sin_cut);
      for (int cc = 0; cc < g.cells; ++cc) {
        if (maxdot(cc) < cos_cut) continue;
        double dist = dir_distance(imgs.col(0), g.cell_dir[cc]);
        for (int s = 1; s < ns; ++s) {
          dist = std::min(dist, dir_distance(imgs.col(s), g.cell_dir[cc]));
        }
        if (std::max(0.0, dist - g.cell_radius[cc]) <= rem) {
          adj[node].push_back(g.node_id(b2, cc));
        }
      }
    };

    if (!rotation) {
      for (int b2 : base.succ[b]) scan_cells(b2, 0.0);
    } else {
      double img_coord = base.centers[b] + c.base.angle;
      img_coord -= std::floor(img_coord);
      for (int b2 = 0; b2 < base.states; ++b2) {
        double bd = circle_dist(img_coord, base.centers[b2]);
        scan_cells(b2, std::max(0.0, bd - base.halfwidth));
      }
    }
    if (adj[node].empty()) {
      throw decomposition_error("chain graph: node without outgoing edge");
    }
  });

  g.edge_start.assign(n_nodes + 1, 0);
  for (int v = 0; v < n_nodes; ++v) g.edge_start[v + 1] = g.edge_start[v] + adj[v].size();
  g.edge_to.reserve(g.edge_start[n_nodes]);
  for (int v = 0; v < n_nodes; ++v) {
    for (int w : adj[v]) g.edge_to.push_back(w);
  }
  return g;
}

int base_state_of(const ChainGraph& g, const BasePoint& x) {
  switch (x.kind) {
    case BaseKind::PeriodicOrbit:
      return x.index % g.base_states;
    case BaseKind::FullShift:
    case BaseKind::SubshiftFinite: {
      if (g.base_words.empty()) throw std::invalid_argument("base_state_of: not a symbolic graph");
      int L = static_cast<int>(g.base_words[0].size());
      std::vector<int> w(L);
      for (int i = 0; i < L; ++i) w[i] = x.symbol(i);
      for (int b = 0; b < g.base_states; ++b) {
        if (g.base_words[b] == w) return b;
      }
      throw std::invalid_argument("base_state_of: word not in the graph");
    }
    case BaseKind::IrrationalRotation: {
      double coord = x.coord - std::floor(x.coord);
      int b = std::clamp(static_cast<int>(std::floor(coord * g.base_states)), 0,
                         g.base_states - 1);
      return b;
    }
  }
  throw std::invalid_argument("base_state_of: unknown base kind");
}

double distance_to_set(const ChainGraph& g, const MorseSet& m, int base_id, const Flag& f) {
  if (!(f.type == g.theta)) throw std::invalid_argument("distance_to_set: flag type mismatch");
  Eigen::VectorXd dir;
  if (g.d == 2) {
    dir = f.frame.col(0);
  } else if (g.theta == ThetaSet::from_blocks({1, 2})) {
    dir = f.frame.col(0);
  } else {
    dir = f.frame.col(2);  // plane normal
  }
  double best = std::numeric_limits<double>::infinity();
  for (int v : m.nodes) {
    if (g.node_base(v) != base_id) continue;
    int cc = g.node_cell(v);
    double dist = std::max(0.0, dir_distance(dir, g.cell_dir[cc]) - g.cell_radius[cc]);
    best = std::min(best, dist);
  }
  return best;
}

std::vector<MorseSet> morse_sets(const ChainGraph& g) {
  SccData scc = strongly_connected(g);
  const int n = g.nodes();

  // condensation edges (deduped)
  std::vector<std::pair<int, int>> cedges;
  for (int u = 0; u < n; ++u) {
    for (int e = g.edge_start[u]; e < g.edge_start[u + 1]; ++e) {
      int cu = scc.comp[u], cv = scc.comp[g.edge_to[e]];
      if (cu != cv) cedges.emplace_back(cu, cv);
    }
  }
  std::sort(cedges.begin(), cedges.end());
  cedges.erase(std::unique(cedges.begin(), cedges.end()), cedges.end());
  std::vector<std::vector<int>> cadj(scc.count), radj(scc.count);
  std::vector<int> indeg(scc.count, 0);
  for (auto [a, b] : cedges) {
    cadj[a].push_back(b);
    radj[b].push_back(a);
    ++indeg[b];
  }

  // longest-path rank via Kahn
  std::vector<int> rank(scc.count, 0), queue;
  for (int i = 0; i < scc.count; ++i) {
    if (indeg[i] == 0) queue.push_back(i);
  }
  for (size_t qi = 0; qi < queue.size(); ++qi) {
    int u = queue[qi];
    for (int v : cadj[u]) {
      rank[v] = std::max(rank[v], rank[u] + 1);
      if (--indeg[v] == 0) queue.push_back(v);
    }
  }

  // reachability between nontrivial components
  auto reaches_other = [&](int c0, const std::vector<std::vector<int>>& edges) {
    std::vector<int> stack = {c0};
    std::vector<bool> seen(scc.count, false);
    seen[c0] = true;
    while (!stack.empty()) {
      int u = stack.back();
      stack.pop_back();
      for (int v : edges[u]) {
        if (seen[v]) continue;
        seen[v] = true;
        if (scc.nontrivial[v]) return true;
        stack.push_back(v);
      }
    }
    return false;
  };

  std::vector<MorseSet> out;
  for (int cid = 0; cid < scc.count; ++cid) {
    if (!scc.nontrivial[cid]) continue;
    MorseSet m;
    m.rank = rank[cid];
    for (int v = 0; v < n; ++v) {
      if (scc.comp[v] == cid) m.nodes.push_back(v);
    }
    m.is_attractor = !reaches_other(cid, cadj);
    m.is_repeller = !reaches_other(cid, radj);
    // fiber cell counts per base state (node ids are grouped by base state)
    int run = 0, best = 0, prev_base = -1;
    for (int v : m.nodes) {
      int b = g.node_base(v);
      if (b != prev_base) {
        run = 0;
        prev_base = b;
      }
      ++run;
      best = std::max(best, run);
    }
    m.max_fiber_cells = best;
    out.push_back(std::move(m));
  }
  std::sort(out.begin(), out.end(),
            [](const MorseSet& a, const MorseSet& b) { return a.rank < b.rank; });
  return out;
}

SpectrumHull morse_spectrum(const ChainGraph& g, const MorseSet& m, int directions) {
  if (m.nodes.empty()) throw std::invalid_argument("morse_spectrum: empty set");
  if (directions < 2) throw std::invalid_argument("morse_spectrum: directions >= 2");
  const int d = g.d;

  // local induced subgraph
  const int n = static_cast<int>(m.nodes.size());
  std::vector<int> local(g.nodes(), -1);
  for (int i = 0; i < n; ++i) local[m.nodes[i]] = i;
  std::vector<std::vector<int>> adj(n);
  for (int i = 0; i < n; ++i) {
    int u = m.nodes[i];
    for (int e = g.edge_start[u]; e < g.edge_start[u + 1]; ++e) {
      int v = local[g.edge_to[e]];
      if (v >= 0) adj[i].push_back(v);
    }
  }

  SpectrumHull out;
  out.directions = hull_directions(d, directions);
  out.support.resize(out.directions.size());

  double inflation = 0.0;
  for (int i = 0; i < n; ++i) {
    const Eigen::VectorXd& wu = g.node_weight[m.nodes[i]];
    for (int v : adj[i]) {
      inflation = std::max(inflation, (wu - g.node_weight[m.nodes[v]]).norm());
    }
  }
  out.inflation = inflation;

  std::vector<double> s(n);
  for (size_t k = 0; k < out.directions.size(); ++k) {
    const Eigen::VectorXd& u = out.directions[k];
    for (int i = 0; i < n; ++i) s[i] = u.dot(g.node_weight[m.nodes[i]]);
    HowardResult hr = howard_max_mean(adj, s);
    out.support[k] = hr.mean;
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(d);
    std::vector<int> cyc_global;
    for (int i : hr.cycle) {
      mean += g.node_weight[m.nodes[i]];
      cyc_global.push_back(m.nodes[i]);
    }
    mean /= static_cast<double>(hr.cycle.size());
    bool dup = false;
    for (const auto& v : out.vertices) {
      if ((v - mean).norm() <= 1e-9) {
        dup = true;
        break;
      }
    }
    if (!dup) {
      out.vertices.push_back(mean);
      out.cycles.push_back(std::move(cyc_global));
    }
  }
  double defect = -std::numeric_limits<double>::infinity();
  for (size_t k = 0; k < out.directions.size(); ++k) {
    for (const auto& v : out.vertices) {
      defect = std::max(defect, out.directions[k].dot(v) - out.support[k]);
    }
  }
  out.convexity_defect = defect;
  return out;
}

std::vector<PeriodicMorseComponent> periodic_morse(const CocycleSystem& c,
                                                   const std::vector<int>& word,
                                                   const ThetaSet& theta) {
  if (word.empty()) throw std::invalid_argument("periodic_morse: empty word");
  BasePoint x = periodic_point(c.base, word, 0);
  const long long w = static_cast<long long>(word.size());
  ScaledMatrix rho = cocycle_product(c, w, x);
  JordanData jd = jordan_multiplicative(rho.m, 1e-9, Variant::Gl);
  auto comps = fixed_point_components(jd, theta);
  std::vector<PeriodicMorseComponent> out;
  out.reserve(comps.size());
  for (auto& fc : comps) {
    Eigen::VectorXd exp =
        (fc.exponent.array() + rho.log_scale) / static_cast<double>(w);
    out.push_back({std::move(fc), exp});
  }
  return out;
}

namespace {

// two-resolution fiber dimension: cell-count ratio against doubled resolution
int fiber_dim(int cells_low, int cells_high) {
  double r = static_cast<double>(cells_high) / std::max(1, cells_low);
  if (r < 1.5) return 0;
  if (r < 3.0) return 1;
  return 2;
}

struct BundleScan {
  int sets_low = 0, sets_high = 0;
  int att_dim = 0, rep_dim = 0;
  double eps_low = 0.0, eps_high = 0.0;
  bool single = false;  // the attractor set is also the repeller set
};

// Coarse grids leave transient haze between the attractor and the repeller
// (marginal components whose drift is comparable to eps); the attractor and
// repeller flags are immune to it, so the scan keys off those two sets only.
BundleScan scan_bundle(const CocycleSystem& c, const ThetaSet& theta, double eps_cells, int K,
                       int word_length) {
  BundleScan out;
  int att_cells[2] = {0, 0}, rep_cells[2] = {0, 0};
  bool single[2] = {false, false};
  for (int r = 0; r < 2; ++r) {
    int k = K << r;
    ChainGraphConfig cfg;
    cfg.theta = theta;
    cfg.flag_resolution = k;
    cfg.word_length = word_length;
    cfg.base_resolution = 32 << r;
    cfg.eps = 0.0;
    ChainGraph probe = build_chain_graph(c, cfg);  // to learn the cell diameter
    cfg.eps = eps_cells * probe.cell_diameter;
    ChainGraph g = cfg.eps == 0.0 ? std::move(probe) : build_chain_graph(c, cfg);
    (r == 0 ? out.eps_low : out.eps_high) = cfg.eps;
    auto sets = morse_sets(g);
    (r == 0 ? out.sets_low : out.sets_high) = static_cast<int>(sets.size());
    int att = -1, rep = -1, natt = 0, nrep = 0;
    for (size_t i = 0; i < sets.size(); ++i) {
      if (sets[i].is_attractor) {
        att = static_cast<int>(i);
        ++natt;
      }
      if (sets[i].is_repeller) {
        rep = static_cast<int>(i);
        ++nrep;
      }
    }
    if (natt != 1 || nrep != 1) {
      throw ambiguity_error("theta_mo: attractor/repeller not unique (" +
                            std::to_string(natt) + "/" + std::to_string(nrep) +
                            "); refine the grid");
    }
    att_cells[r] = sets[att].max_fiber_cells;
    rep_cells[r] = sets[rep].max_fiber_cells;
    single[r] = att == rep;
  }
  if (single[0] != single[1]) {
    throw ambiguity_error("theta_mo: chain transitivity unstable across resolutions");
  }
  out.att_dim = fiber_dim(att_cells[0], att_cells[1]);
  out.rep_dim = fiber_dim(rep_cells[0], rep_cells[1]);
  out.single = single[0];
  return out;
}

std::string blocks_str(const std::vector<int>& blocks) {
  std::string s = "(";
  for (size_t i = 0; i < blocks.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(blocks[i]);
  }
  return s + ")";
}

}  // namespace

ThetaMoResult theta_mo(const CocycleSystem& c, double eps_cells, int flag_resolution,
                       int word_length) {
  const int d = c.d;
  if (d != 2 && d != 3) {
    throw std::invalid_argument("theta_mo: chain analysis supports d = 2, 3 only");
  }
  ThetaMoResult out;
  if (d == 2) {
    BundleScan s = scan_bundle(c, ThetaSet::empty(2), eps_cells, flag_resolution, word_length);
    out.sets_low = s.sets_low;
    out.sets_high = s.sets_high;
    out.att_dim = s.att_dim;
    out.rep_dim = s.rep_dim;
    out.eps_low = s.eps_low;
    out.eps_high = s.eps_high;
    if (s.single) {
      out.theta = ThetaSet::full(2);
      out.att_dim = out.rep_dim = 1;
      return out;
    }
    if (s.att_dim == 0 && s.rep_dim == 0) {
      out.theta = ThetaSet::empty(2);
      return out;
    }
    throw ambiguity_error("theta_mo: split P^1 bundle with fiber dims " +
                          std::to_string(s.att_dim) + "/" + std::to_string(s.rep_dim));
  }

  BundleScan p = scan_bundle(c, ThetaSet::from_blocks({1, 2}), eps_cells, flag_resolution,
                             word_length);
  BundleScan q = scan_bundle(c, ThetaSet::from_blocks({2, 1}), eps_cells, flag_resolution,
                             word_length);
  out.sets_low = p.sets_low;
  out.sets_high = p.sets_high;
  out.att_dim = p.att_dim;
  out.rep_dim = p.rep_dim;
  out.eps_low = p.eps_low;
  out.eps_high = p.eps_high;

  if (p.single != q.single) {
    throw ambiguity_error("theta_mo: line and plane bundles disagree on chain transitivity");
  }
  if (p.single) {
    out.theta = ThetaSet::full(3);
    return out;
  }
  // top block from the attracting lines, bottom from the repelling ones; the
  // plane bundle sees the same blocks with the roles mirrored
  int k1 = 1 + p.att_dim;
  int ks = 1 + p.rep_dim;
  int k1_dual = 1 + q.rep_dim;
  int ks_dual = 1 + q.att_dim;
  int mid = 3 - k1 - ks;
  if (k1 != k1_dual || ks != ks_dual || mid < 0) {
    throw ambiguity_error("theta_mo: projective estimate " + blocks_str({k1, ks}) +
                          " vs dual estimate " + blocks_str({k1_dual, ks_dual}));
  }
  std::vector<int> blocks = {k1};
  if (mid > 0) blocks.push_back(mid);
  blocks.push_back(ks);
  out.theta = ThetaSet::from_blocks(blocks);
  return out;
}

std::pair<ThetaSet, ThetaSet> theta_mo_bracket(const CocycleSystem& c, int max_period,
                                               const SpectrumEstimate& est) {
  std::vector<bool> roots = est.theta.included();
  for (const auto& word : enumerate_periodic_orbits(c.base, max_period)) {
    SpectrumEstimate sp = periodic_spectrum(c, word);
    const auto& inc = sp.theta.included();
    for (size_t i = 0; i < roots.size(); ++i) roots[i] = roots[i] || inc[i];
  }
  return {ThetaSet(c.d, roots), ThetaSet::full(c.d)};
}

}  // namespace flagdyn

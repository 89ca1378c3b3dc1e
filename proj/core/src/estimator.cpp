#include "ozlab/estimator.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

#include "ozlab/sampler.hpp"
#include "ozlab/union_find.hpp"
#include "ozlab/version.hpp"

namespace oz {
namespace {

constexpr double kPi = 3.14159265358979323846;

std::string g17(double v) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// Flat adjacency of the box graph plus stamped scratch for repeated
// single-source growth without clearing between samples.
struct GrowthScratch {
  Box box;
  int d = 0;
  int n_dirs = 0;
  std::vector<int32_t> neighbor;  // vertex * n_dirs + k, -1 off the box
  std::vector<int32_t> edge_id;
  std::vector<uint8_t> on_bd;
  std::vector<int64_t> visit_stamp, edge_stamp;
  std::vector<uint8_t> edge_open;
  std::vector<int32_t> stack, visited, open_edges;
  int64_t stamp = 0;
  bool hit_boundary = false;

  GrowthScratch(const LatticeSpec& spec, const EdgeIndexer& ix) {
    box = spec.box();
    d = box.d;
    n_dirs = 2 * d;
    auto nv = box.vertex_count();
    neighbor.assign(nv * n_dirs, -1);
    edge_id.assign(nv * n_dirs, -1);
    on_bd.assign(nv, 0);
    visit_stamp.assign(nv, 0);
    edge_stamp.assign(ix.edge_count(), 0);
    edge_open.assign(ix.edge_count(), 0);
    for (int64_t i = 0; i < nv; ++i) {
      Vec v = box.vertex_at(i);
      on_bd[i] = box.on_boundary(v) ? 1 : 0;
      for (int ax = 0; ax < d; ++ax) {
        Vec w = v + Vec::unit(d, ax);
        if (box.contains(w)) {
          int32_t e = ix.id_of(Edge{v, ax});
          neighbor[i * n_dirs + ax] = static_cast<int32_t>(box.index_of(w));
          edge_id[i * n_dirs + ax] = e;
        }
        Vec u = v - Vec::unit(d, ax);
        if (box.contains(u)) {
          int32_t e = ix.id_of(Edge{u, ax});
          neighbor[i * n_dirs + d + ax] = static_cast<int32_t>(box.index_of(u));
          edge_id[i * n_dirs + d + ax] = e;
        }
      }
    }
  }

  // Grows the Bernoulli(p) cluster of `start`, deciding each edge once.
  // Aborts as soon as the cluster touches the box boundary; the visited and
  // open-edge lists are meaningful only when it does not.
  bool grow(Rng& rng, double p, int32_t start) {
    ++stamp;
    visited.clear();
    open_edges.clear();
    stack.clear();
    hit_boundary = false;
    if (on_bd[start]) {
      hit_boundary = true;
      return false;
    }
    visit_stamp[start] = stamp;
    visited.push_back(start);
    stack.push_back(start);
    while (!stack.empty()) {
      int32_t v = stack.back();
      stack.pop_back();
      const int64_t base = static_cast<int64_t>(v) * n_dirs;
      for (int k = 0; k < n_dirs; ++k) {
        int32_t e = edge_id[base + k];
        if (e < 0) continue;
        if (edge_stamp[e] != stamp) {
          edge_stamp[e] = stamp;
          edge_open[e] = rng.bernoulli(p) ? 1 : 0;
          if (edge_open[e]) open_edges.push_back(e);
        }
        if (!edge_open[e]) continue;
        int32_t w = neighbor[base + k];
        if (visit_stamp[w] == stamp) continue;
        visit_stamp[w] = stamp;
        if (on_bd[w]) {
          hit_boundary = true;
          return false;
        }
        visited.push_back(w);
        stack.push_back(w);
      }
    }
    return true;
  }

  bool saw(int32_t idx) const { return visit_stamp[idx] == stamp; }
};

// Cluster of `start` in a fixed configuration, stopping with false as soon
// as the boundary is reached; true when it closes up holding `target`.
bool finite_join(const GrowthScratch& adj, const BondConfig& config,
                 std::vector<int64_t>& visit, int64_t& stamp, std::vector<int32_t>& stack,
                 int32_t start, int32_t target) {
  ++stamp;
  if (adj.on_bd[start]) return false;
  stack.clear();
  visit[start] = stamp;
  stack.push_back(start);
  bool found = (start == target);
  while (!stack.empty()) {
    int32_t v = stack.back();
    stack.pop_back();
    const int64_t base = static_cast<int64_t>(v) * adj.n_dirs;
    for (int k = 0; k < adj.n_dirs; ++k) {
      int32_t e = adj.edge_id[base + k];
      if (e < 0 || !config.open[e]) continue;
      int32_t w = adj.neighbor[base + k];
      if (visit[w] == stamp) continue;
      visit[w] = stamp;
      if (adj.on_bd[w]) return false;
      if (w == target) found = true;
      stack.push_back(w);
    }
  }
  return found;
}

void require_headroom(const Vec& x, const LatticeSpec& spec, int margin) {
  spec.validate();
  if (margin < 1) throw std::invalid_argument("connectivity margin must be positive");
  if (!spec.centered) throw std::invalid_argument("connectivity estimates use a centered box");
  if (x.d != spec.d) throw std::invalid_argument("dimension mismatch between x and the box");
  if (spec.L < 2 * linf(x) + margin)
    throw std::invalid_argument("box leaves too little room around the endpoints");
}

double solve_pivot_tol() { return 1e-10; }

// Gaussian elimination with partial pivoting on a d x d system.
bool solve_square(int d, std::array<std::array<double, kMaxDim>, kMaxDim>& a,
                  std::array<double, kMaxDim>& b, RVec* out) {
  for (int col = 0; col < d; ++col) {
    int piv = col;
    for (int r = col + 1; r < d; ++r)
      if (std::fabs(a[r][col]) > std::fabs(a[piv][col])) piv = r;
    if (std::fabs(a[piv][col]) < solve_pivot_tol()) return false;
    std::swap(a[piv], a[col]);
    std::swap(b[piv], b[col]);
    for (int r = col + 1; r < d; ++r) {
      double f = a[r][col] / a[col][col];
      for (int c = col; c < d; ++c) a[r][c] -= f * a[col][c];
      b[r] -= f * b[col];
    }
  }
  RVec w = RVec::zero(d);
  for (int r = d - 1; r >= 0; --r) {
    double s = b[r];
    for (int c = r + 1; c < d; ++c) s -= a[r][c] * w[c];
    w[r] = s / a[r][r];
  }
  *out = w;
  return true;
}

int span_rank(const std::vector<RVec>& dirs, int d) {
  std::vector<RVec> basis;
  for (const auto& u : dirs) {
    RVec r = u;
    for (const auto& b : basis) {
      double c = dot(r, b);
      for (int i = 0; i < d; ++i) r[i] -= c * b[i];
    }
    double n = norm(r);
    if (n > 1e-8) {
      basis.push_back(r * (1.0 / n));
      if (static_cast<int>(basis.size()) == d) break;
    }
  }
  return static_cast<int>(basis.size());
}

// Bounded polar body requires the directions to surround the origin: no
// closed halfspace may hold them all. With full rank the extreme candidate
// normals are the hyperplanes spanned by d - 1 of the directions.
bool surrounds_origin(const std::vector<RVec>& dirs, int d) {
  const double tol = 1e-9;
  auto one_sided = [&](const RVec& u) {
    bool pos = false, neg = false;
    for (const auto& v : dirs) {
      double s = dot(v, u);
      if (s > tol) pos = true;
      if (s < -tol) neg = true;
      if (pos && neg) return false;
    }
    return true;
  };
  const int n = static_cast<int>(dirs.size());
  if (d == 2) {
    for (int i = 0; i < n; ++i) {
      RVec u = RVec::zero(2);
      u[0] = -dirs[i][1];
      u[1] = dirs[i][0];
      if (one_sided(u)) return false;
    }
    return true;
  }
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      RVec u = RVec::zero(3);
      u[0] = dirs[i][1] * dirs[j][2] - dirs[i][2] * dirs[j][1];
      u[1] = dirs[i][2] * dirs[j][0] - dirs[i][0] * dirs[j][2];
      u[2] = dirs[i][0] * dirs[j][1] - dirs[i][1] * dirs[j][0];
      if (norm(u) < 1e-9) continue;
      if (one_sided(u)) return false;
    }
  return true;
}

std::string vertex_key(const RVec& v) {
  std::string key;
  for (int i = 0; i < v.d; ++i) {
    key += std::to_string(static_cast<long long>(std::llround(v[i] * 1e8)));
    key += ':';
  }
  return key;
}

void polar_vertices_of(EquiDecaySurface& s) {
  const int d = s.d;
  const int n = static_cast<int>(s.dirs.size());
  std::unordered_set<std::string> seen;
  std::vector<int> c(d);
  std::iota(c.begin(), c.end(), 0);
  auto advance = [&]() {
    int i = d - 1;
    while (i >= 0 && c[i] == n - d + i) --i;
    if (i < 0) return false;
    ++c[i];
    for (int j = i + 1; j < d; ++j) c[j] = c[j - 1] + 1;
    return true;
  };
  do {
    std::array<std::array<double, kMaxDim>, kMaxDim> a{};
    std::array<double, kMaxDim> b{};
    for (int r = 0; r < d; ++r) {
      for (int col = 0; col < d; ++col) a[r][col] = s.dirs[c[r]][col];
      b[r] = s.tau[c[r]];
    }
    RVec w;
    if (!solve_square(d, a, b, &w)) continue;
    bool feasible = true;
    for (int j = 0; j < n && feasible; ++j) {
      double slack = s.tau[j] - dot(w, s.dirs[j]);
      if (slack < -1e-9 * std::max(1.0, std::fabs(s.tau[j]))) feasible = false;
    }
    if (!feasible) continue;
    if (seen.insert(vertex_key(w)).second) s.polar_vertices.push_back(w);
  } while (advance());
  if (static_cast<int>(s.polar_vertices.size()) < d + 1)
    throw std::runtime_error("polar vertex enumeration failed to close up");
}

}  // namespace

LatticeSpec connectivity_box(const Vec& x, int margin) {
  if (margin < 2) throw std::invalid_argument("connectivity margin must be at least 2");
  LatticeSpec spec;
  spec.d = x.d;
  spec.L = static_cast<int>(2 * (linf(x) + margin) + 1);
  spec.centered = true;
  spec.validate();
  return spec;
}

ConnectivityRow finite_two_point_mc(const Vec& x, const LatticeSpec& spec,
                                    const RCParams& params, const BoundaryCondition& bc,
                                    long n_samples, uint64_t seed, long thinning,
                                    long burnin, int margin) {
  params.validate();
  require_headroom(x, spec, margin);
  if (n_samples <= 0) throw std::invalid_argument("need a positive sample count");

  ConnectivityRow row;
  row.x = x;
  row.box_side = spec.L;

  const Box box = spec.box();
  const EdgeIndexer ix(box);
  const auto idx0 = static_cast<int32_t>(box.index_of(Vec::zero(spec.d)));
  const auto idxx = static_cast<int32_t>(box.index_of(x));

  if (params.q == 1.0) {
    GrowthScratch scratch(spec, ix);
    Rng rng(seed);
    long hits = 0;
    for (long i = 0; i < n_samples; ++i)
      if (scratch.grow(rng, params.p, idx0) && scratch.saw(idxx)) ++hits;
    row.samples = n_samples;
    row.hits = hits;
    row.estimate = static_cast<double>(hits) / static_cast<double>(n_samples);
    row.stderr_ = std::sqrt(std::max(0.0, row.estimate * (1 - row.estimate) /
                                              static_cast<double>(n_samples)));
    return row;
  }

  GrowthScratch adj(spec, ix);
  std::vector<int64_t> visit(box.vertex_count(), 0);
  std::vector<int32_t> stack;
  int64_t stamp = 0;
  Event event = [&](const BondConfig& config) {
    return finite_join(adj, config, visit, stamp, stack, idx0, idxx);
  };
  EstimateWithCI est = mc_estimate(event, spec, params, bc, n_samples, thinning, burnin, seed);
  row.samples = est.samples;
  row.hits = std::llround(est.estimate * static_cast<double>(est.samples));
  row.estimate = est.estimate;
  row.stderr_ = est.stderr_;
  return row;
}

TauFit tau_fit(const Vec& direction, const std::vector<int64_t>& radii,
               const std::vector<double>& estimates, double alpha) {
  if (radii.size() != estimates.size())
    throw std::invalid_argument("radii and estimates differ in length");
  TauFit fit;
  fit.direction = direction;
  fit.alpha = alpha;
  for (size_t i = 0; i < radii.size(); ++i) {
    if (!(estimates[i] > 0)) continue;
    if (radii[i] <= 0) throw std::invalid_argument("radii must be positive");
    fit.radii.push_back(radii[i]);
    fit.neg_log_g.push_back(-std::log(estimates[i]));
  }
  const int n = static_cast<int>(fit.radii.size());
  if (n < 4) throw std::runtime_error("need at least four resolved radii for a decay fit");

  std::vector<double> xs(n), ys(n);
  for (int i = 0; i < n; ++i) {
    xs[i] = static_cast<double>(fit.radii[i]);
    ys[i] = fit.neg_log_g[i] - alpha * std::log(xs[i]);
  }
  auto line = [&](int skip, double* slope, double* icept) {
    double sw = 0, sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (int i = 0; i < n; ++i) {
      if (i == skip) continue;
      sw += 1;
      sx += xs[i];
      sy += ys[i];
      sxx += xs[i] * xs[i];
      sxy += xs[i] * ys[i];
    }
    double det = sw * sxx - sx * sx;
    if (std::fabs(det) < 1e-12) throw std::runtime_error("degenerate radius set in decay fit");
    *slope = (sw * sxy - sx * sy) / det;
    *icept = (sxx * sy - sx * sxy) / det;
  };
  line(-1, &fit.tau, &fit.intercept);
  std::vector<double> jack(n);
  double mean = 0;
  for (int i = 0; i < n; ++i) {
    double icept;
    line(i, &jack[i], &icept);
    mean += jack[i];
  }
  mean /= n;
  double var = 0;
  for (int i = 0; i < n; ++i) var += (jack[i] - mean) * (jack[i] - mean);
  fit.tau_stderr = std::sqrt(var * (n - 1) / static_cast<double>(n));
  return fit;
}

std::vector<RVec> sphere_grid(int n_theta, int n_phi) {
  if (n_theta < 1 || n_phi < 3) throw std::invalid_argument("sphere grid too coarse");
  std::vector<RVec> dirs;
  dirs.reserve(static_cast<size_t>(n_theta) * n_phi);
  for (int i = 0; i < n_theta; ++i) {
    double theta = kPi * (i + 1) / (n_theta + 1);
    for (int j = 0; j < n_phi; ++j) {
      double phi = 2 * kPi * j / n_phi;
      RVec u = RVec::zero(3);
      u[0] = std::sin(theta) * std::cos(phi);
      u[1] = std::sin(theta) * std::sin(phi);
      u[2] = std::cos(theta);
      dirs.push_back(u);
    }
  }
  return dirs;
}

std::vector<RVec> icosahedral_grid(int level) {
  if (level < 0 || level > 2)
    throw std::invalid_argument("icosahedral refinement levels 0..2 are supported");
  const double gold = (1 + std::sqrt(5.0)) / 2;
  std::vector<RVec> verts;
  for (int s1 = -1; s1 <= 1; s1 += 2)
    for (int s2 = -1; s2 <= 1; s2 += 2) {
      double a = s1, b = s2 * gold;
      double coords[3][3] = {{0, a, b}, {a, b, 0}, {b, 0, a}};
      for (auto& c : coords) {
        RVec u = RVec::zero(3);
        u[0] = c[0];
        u[1] = c[1];
        u[2] = c[2];
        verts.push_back(normalized(u));
      }
    }
  auto dist = [](const RVec& a, const RVec& b) { return norm(a - b); };
  std::vector<std::array<int, 3>> faces;
  const int nb = static_cast<int>(verts.size());
  for (int i = 0; i < nb; ++i)
    for (int j = i + 1; j < nb; ++j)
      for (int k = j + 1; k < nb; ++k)
        if (dist(verts[i], verts[j]) < 1.3 && dist(verts[j], verts[k]) < 1.3 &&
            dist(verts[i], verts[k]) < 1.3)
          faces.push_back({i, j, k});

  std::unordered_map<std::string, int> index_of;
  for (int i = 0; i < nb; ++i) index_of[vertex_key(verts[i])] = i;
  auto midpoint = [&](int a, int b) {
    RVec m = normalized(verts[a] + verts[b]);
    auto key = vertex_key(m);
    auto it = index_of.find(key);
    if (it != index_of.end()) return it->second;
    verts.push_back(m);
    index_of[key] = static_cast<int>(verts.size()) - 1;
    return static_cast<int>(verts.size()) - 1;
  };
  for (int lv = 0; lv < level; ++lv) {
    std::vector<std::array<int, 3>> next;
    next.reserve(faces.size() * 4);
    for (const auto& f : faces) {
      int ab = midpoint(f[0], f[1]);
      int bc = midpoint(f[1], f[2]);
      int ca = midpoint(f[2], f[0]);
      next.push_back({f[0], ab, ca});
      next.push_back({f[1], bc, ab});
      next.push_back({f[2], ca, bc});
      next.push_back({ab, bc, ca});
    }
    faces = std::move(next);
  }
  return verts;
}

std::vector<RVec> circle_grid(int n) {
  if (n < 3) throw std::invalid_argument("circle grid too coarse");
  std::vector<RVec> dirs;
  dirs.reserve(n);
  for (int i = 0; i < n; ++i) {
    double theta = 2 * kPi * i / n;
    RVec u = RVec::zero(2);
    u[0] = std::cos(theta);
    u[1] = std::sin(theta);
    dirs.push_back(u);
  }
  return dirs;
}

EquiDecaySurface equidecay_surface(const std::vector<RVec>& dirs,
                                   const std::vector<double>& tau, bool with_polar) {
  if (dirs.empty() || dirs.size() != tau.size())
    throw std::invalid_argument("need matching direction and decay lists");
  const int d = dirs[0].d;
  if (d != 2 && d != 3) throw std::invalid_argument("equi-decay surfaces support d = 2 and 3");
  if (static_cast<int>(dirs.size()) < 2 * d)
    throw std::invalid_argument("need at least 2d directions");
  EquiDecaySurface s;
  s.d = d;
  s.dirs.reserve(dirs.size());
  for (const auto& u : dirs) {
    if (u.d != d) throw std::invalid_argument("mixed dimensions in the direction list");
    s.dirs.push_back(normalized(u));
  }
  for (double t : tau) {
    if (!(t > 0) || !std::isfinite(t))
      throw std::invalid_argument("decay rates must be positive and finite");
    s.tau.push_back(t);
    s.radius.push_back(1.0 / t);
  }
  if (span_rank(s.dirs, d) < d)
    throw std::invalid_argument("directions span a lower-dimensional set");
  if (!surrounds_origin(s.dirs, d))
    throw std::invalid_argument("directions sit in a halfspace; the polar body is unbounded");
  if (with_polar) polar_vertices_of(s);
  return s;
}

EquiDecaySurface equidecay_surface_grid(int d, int n_theta, int n_phi,
                                        const std::function<double(const RVec&)>& tau_of,
                                        bool with_polar) {
  std::vector<RVec> dirs;
  if (d == 2) {
    dirs = circle_grid(n_theta);
    n_phi = 1;
  } else if (d == 3) {
    dirs = sphere_grid(n_theta, n_phi);
  } else {
    throw std::invalid_argument("equi-decay surfaces support d = 2 and 3");
  }
  std::vector<double> tau;
  tau.reserve(dirs.size());
  for (const auto& u : dirs) tau.push_back(tau_of(u));
  EquiDecaySurface s = equidecay_surface(dirs, tau, with_polar);
  s.n_theta = n_theta;
  s.n_phi = n_phi;
  return s;
}

double support_function(const EquiDecaySurface& s, const RVec& y) {
  if (s.polar_vertices.empty())
    throw std::logic_error("polar body was not built for this surface");
  double best = -std::numeric_limits<double>::infinity();
  for (const auto& w : s.polar_vertices) best = std::max(best, dot(w, y));
  return best;
}

CurvatureReport convexity_curvature_check(const EquiDecaySurface& s, double gap_tol) {
  CurvatureReport rep;
  if (!s.polar_vertices.empty()) {
    rep.convexity_evaluated = true;
    rep.convex = true;
    for (size_t i = 0; i < s.dirs.size(); ++i) {
      double gap = s.tau[i] - support_function(s, s.dirs[i]);
      rep.max_gap = std::max(rep.max_gap, gap);
      if (gap > gap_tol * std::max(1.0, std::fabs(s.tau[i]))) {
        rep.convex = false;
        rep.gap_witness.push_back(static_cast<int>(i));
      }
    }
  }

  if (s.d == 2 && s.n_theta >= 5) {
    rep.curvature_evaluated = true;
    const int n = s.n_theta;
    const double h = 2 * kPi / n;
    for (int i = 0; i < n; ++i) {
      double r = s.radius[i];
      double rp = (s.radius[(i + 1) % n] - s.radius[(i + n - 1) % n]) / (2 * h);
      double rpp = (s.radius[(i + 1) % n] - 2 * r + s.radius[(i + n - 1) % n]) / (h * h);
      double k = (r * r + 2 * rp * rp - r * rpp) / std::pow(r * r + rp * rp, 1.5);
      rep.grid_index.push_back(i);
      rep.curvature.push_back(k);
    }
  } else if (s.d == 3 && s.n_theta >= 3 && s.n_phi >= 5) {
    rep.curvature_evaluated = true;
    const int nt = s.n_theta, np = s.n_phi;
    const double ht = kPi / (nt + 1);
    const double hp = 2 * kPi / np;
    auto point = [&](int i, int j) {
      int idx = i * np + ((j % np) + np) % np;
      return s.dirs[idx] * s.radius[idx];
    };
    auto cross = [](const RVec& a, const RVec& b) {
      RVec u = RVec::zero(3);
      u[0] = a[1] * b[2] - a[2] * b[1];
      u[1] = a[2] * b[0] - a[0] * b[2];
      u[2] = a[0] * b[1] - a[1] * b[0];
      return u;
    };
    for (int i = 1; i + 1 < nt; ++i)
      for (int j = 0; j < np; ++j) {
        RVec c = point(i, j);
        RVec st = (point(i + 1, j) - point(i - 1, j)) * (1 / (2 * ht));
        RVec sp = (point(i, j + 1) - point(i, j - 1)) * (1 / (2 * hp));
        RVec stt = (point(i + 1, j) - c * 2 + point(i - 1, j)) * (1 / (ht * ht));
        RVec spp = (point(i, j + 1) - c * 2 + point(i, j - 1)) * (1 / (hp * hp));
        RVec stp = (point(i + 1, j + 1) - point(i + 1, j - 1) - point(i - 1, j + 1) +
                    point(i - 1, j - 1)) *
                   (1 / (4 * ht * hp));
        double E = dot(st, st), F = dot(st, sp), G = dot(sp, sp);
        RVec nrm = cross(st, sp);
        double nl = norm(nrm);
        if (nl < 1e-12) continue;
        nrm = nrm * (1 / nl);
        double L = dot(stt, nrm), M = dot(stp, nrm), N = dot(spp, nrm);
        double denom = E * G - F * F;
        if (std::fabs(denom) < 1e-15) continue;
        rep.grid_index.push_back(i * np + j);
        rep.curvature.push_back((L * N - M * M) / denom);
      }
  }
  if (rep.curvature_evaluated && !rep.curvature.empty()) {
    auto [lo, hi] = std::minmax_element(rep.curvature.begin(), rep.curvature.end());
    rep.min_curvature = *lo;
    rep.max_curvature = *hi;
    rep.positively_curved = rep.min_curvature > 0;
  }
  return rep;
}

SupermultReport supermultiplicativity_check(const std::vector<std::pair<Vec, Vec>>& pairs,
                                            const LatticeSpec& spec, const RCParams& params,
                                            const BoundaryCondition& bc, bool cutoff,
                                            double tol, std::optional<Vec> base) {
  if (pairs.empty()) throw std::invalid_argument("need at least one point pair");
  spec.validate();
  params.validate();
  const Box box = spec.box();
  const Vec origin = base.value_or(Vec::zero(spec.d));
  if (origin.d != spec.d) throw std::invalid_argument("base dimension mismatch");
  if (!box.contains(origin)) throw std::invalid_argument("box must hold the base point");
  for (const auto& [x, y] : pairs) {
    if (x.d != spec.d || y.d != spec.d)
      throw std::invalid_argument("pair dimension mismatch");
    if (!box.contains(x) || !box.contains(y))
      throw std::invalid_argument("pair points must lie in the box");
  }

  const EdgeIndexer ix(box);
  const auto nv = box.vertex_count();
  std::vector<std::pair<int32_t, int32_t>> edge_ends(ix.edge_count());
  for (int e = 0; e < ix.edge_count(); ++e)
    edge_ends[e] = {static_cast<int32_t>(box.index_of(ix.edges[e].v)),
                    static_cast<int32_t>(box.index_of(ix.edges[e].other()))};
  std::vector<int32_t> bd_vertices;
  for (int64_t i = 0; i < nv; ++i)
    if (box.on_boundary(box.vertex_at(i))) bd_vertices.push_back(static_cast<int32_t>(i));

  struct Probe {
    int32_t a, b;
    double mass = 0;
  };
  std::vector<Probe> probes;
  auto probe_id = [&](const Vec& a, const Vec& b) {
    auto ia = static_cast<int32_t>(box.index_of(a));
    auto ib = static_cast<int32_t>(box.index_of(b));
    if (ia > ib) std::swap(ia, ib);
    for (size_t k = 0; k < probes.size(); ++k)
      if (probes[k].a == ia && probes[k].b == ib) return k;
    probes.push_back({ia, ib, 0});
    return probes.size() - 1;
  };
  struct PairIds {
    size_t total, first, second;
  };
  std::vector<PairIds> ids;
  ids.reserve(pairs.size());
  for (const auto& [x, y] : pairs)
    ids.push_back({probe_id(origin, y), probe_id(origin, x), probe_id(x, y)});

  UnionFind uf(nv);
  std::vector<uint8_t> touched(nv, 0);
  double total_mass = 0;
  enumerate_measure(spec, params, bc, [&](const BondConfig& config, double w) {
    uf.reset();
    for (int e = 0; e < ix.edge_count(); ++e)
      if (config.open[e]) uf.unite(edge_ends[e].first, edge_ends[e].second);
    if (cutoff) {
      std::fill(touched.begin(), touched.end(), 0);
      for (int32_t b : bd_vertices) touched[uf.find(b)] = 1;
    }
    total_mass += w;
    for (auto& pr : probes) {
      int32_t ra = uf.find(pr.a);
      if (ra != uf.find(pr.b)) continue;
      if (cutoff && touched[ra]) continue;
      pr.mass += w;
    }
  });

  SupermultReport rep;
  rep.cutoff = cutoff;
  rep.min_margin = std::numeric_limits<double>::infinity();
  for (size_t k = 0; k < pairs.size(); ++k) {
    SupermultPair out;
    out.x = pairs[k].first;
    out.y = pairs[k].second;
    out.g_total = probes[ids[k].total].mass / total_mass;
    out.g_first = probes[ids[k].first].mass / total_mass;
    out.g_second = probes[ids[k].second].mass / total_mass;
    out.margin = out.g_total - out.g_first * out.g_second;
    rep.min_margin = std::min(rep.min_margin, out.margin);
    rep.pairs.push_back(out);
  }
  rep.ok = rep.min_margin >= -tol;
  return rep;
}

SurfaceTailReport surface_tail_report(const std::vector<Vec>& xs, const LatticeSpec& spec,
                                      const RCParams& params, double delta, long n_samples,
                                      uint64_t seed) {
  params.validate();
  if (params.q != 1.0)
    throw std::invalid_argument("surface tail sampling runs on Bernoulli percolation only");
  if (xs.empty()) throw std::invalid_argument("need at least one displacement");
  if (!(delta > 0)) throw std::invalid_argument("delta must be positive");
  if (n_samples <= 0) throw std::invalid_argument("need a positive sample count");

  const Box box = spec.box();
  const EdgeIndexer ix(box);
  GrowthScratch scratch(spec, ix);

  SurfaceTailReport rep;
  rep.delta = delta;
  for (size_t xi = 0; xi < xs.size(); ++xi) {
    const Vec& x = xs[xi];
    require_headroom(x, spec, kConnectivityMargin);
    SurfaceTailPoint pt;
    pt.x = x;
    pt.phi = phi_psi_oracle(x, spec).phi;
    const double threshold = (1 + delta) * static_cast<double>(pt.phi) - 1e-9;
    const auto idx0 = static_cast<int32_t>(box.index_of(Vec::zero(spec.d)));
    const auto idxx = static_cast<int32_t>(box.index_of(x));
    Rng rng(derive_seed(seed, "surface-tail", xi));
    Cluster cluster;
    for (long i = 0; i < n_samples; ++i) {
      if (!scratch.grow(rng, params.p, idx0) || !scratch.saw(idxx)) continue;
      ++pt.connected;
      cluster.vertices.clear();
      cluster.edges.clear();
      cluster.finite = true;
      for (int32_t v : scratch.visited) cluster.vertices.push_back(box.vertex_at(v));
      for (int32_t e : scratch.open_edges) cluster.edges.push_back(ix.edges[e]);
      std::sort(cluster.vertices.begin(), cluster.vertices.end());
      std::sort(cluster.edges.begin(), cluster.edges.end());
      auto surface = external_boundary_and_surface(cluster, spec);
      if (static_cast<double>(surface.surface.plaquettes.size()) >= threshold) ++pt.heavy;
    }
    if (pt.connected > 0) {
      pt.p_heavy = static_cast<double>(pt.heavy) / static_cast<double>(pt.connected);
      pt.stderr_ = std::sqrt(std::max(0.0, pt.p_heavy * (1 - pt.p_heavy) /
                                               static_cast<double>(pt.connected)));
    }
    rep.points.push_back(pt);
  }

  double sw = 0, sx = 0, sy = 0, sxx = 0, sxy = 0;
  int usable = 0;
  for (const auto& pt : rep.points) {
    if (pt.heavy == 0 || pt.heavy == pt.connected) continue;
    double se_log = pt.stderr_ / pt.p_heavy;
    double w = 1.0 / (se_log * se_log);
    double xphi = static_cast<double>(pt.phi);
    double ylog = std::log(pt.p_heavy);
    sw += w;
    sx += w * xphi;
    sy += w * ylog;
    sxx += w * xphi * xphi;
    sxy += w * xphi * ylog;
    ++usable;
  }
  if (usable < 2) throw std::runtime_error("too few resolved tail points for a slope");
  double det = sw * sxx - sx * sx;
  if (std::fabs(det) < 1e-12) throw std::runtime_error("tail points share one surface size");
  rep.slope = (sw * sxy - sx * sy) / det;
  rep.slope_stderr = std::sqrt(sw / det);
  rep.decreasing = rep.slope + 1.645 * rep.slope_stderr < 0;
  return rep;
}

namespace {

std::ofstream open_csv(const std::string& path, const char* units) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << "# ozlab " << kVersion << "; " << units << '\n';
  return out;
}

inline constexpr int kTableCoords = 3;  // x1..x3 columns; tables carry d <= 3

void put_coords(std::ofstream& out, const Vec& v) {
  for (int i = 0; i < kTableCoords; ++i) out << (i < v.d ? v[i] : 0) << ',';
}

void put_coords(std::ofstream& out, const RVec& v) {
  for (int i = 0; i < kTableCoords; ++i) out << (i < v.d ? g17(v[i]) : "0") << ',';
}

}  // namespace

void write_connectivity_csv(const std::vector<ConnectivityRow>& rows, const std::string& path) {
  auto out = open_csv(path, "lattice coordinates in steps, probabilities dimensionless");
  out << "d,x1,x2,x3,samples,hits,estimate,stderr,box_side,cutoff\n";
  for (const auto& r : rows) {
    out << r.x.d << ',';
    put_coords(out, r.x);
    out << r.samples << ',' << r.hits << ',' << g17(r.estimate) << ',' << g17(r.stderr_) << ','
        << r.box_side << ',' << r.cutoff << '\n';
  }
}

void write_tau_csv(const std::vector<TauFit>& fits, const std::string& path) {
  auto out = open_csv(path, "directions unit-normalized, tau in inverse lattice steps");
  out << "d,dir1,dir2,dir3,alpha,tau,tau_stderr,intercept,n_radii\n";
  for (const auto& f : fits) {
    out << f.direction.d << ',';
    put_coords(out, f.direction);
    out << g17(f.alpha) << ',' << g17(f.tau) << ',' << g17(f.tau_stderr) << ','
        << g17(f.intercept) << ',' << f.radii.size() << '\n';
  }
}

void write_surface_csv(const EquiDecaySurface& s, const std::string& path) {
  auto out = open_csv(path, "tau in inverse lattice steps, radius = 1/tau");
  out << "index,theta_row,phi_col,dir1,dir2,dir3,tau,radius\n";
  for (size_t i = 0; i < s.dirs.size(); ++i) {
    int ti = -1, pj = -1;
    if (s.n_theta > 0) {
      const int np = std::max(1, s.n_phi);
      ti = static_cast<int>(i) / np;
      pj = static_cast<int>(i) % np;
    }
    out << i << ',' << ti << ',' << pj << ',';
    put_coords(out, s.dirs[i]);
    out << g17(s.tau[i]) << ',' << g17(s.radius[i]) << '\n';
  }
}

void write_curvature_csv(const EquiDecaySurface& s, const CurvatureReport& r,
                         const std::string& path) {
  auto out = open_csv(path, "Gaussian curvature of the equi-decay surface, lattice steps");
  out << "index,dir1,dir2,dir3,curvature\n";
  for (size_t k = 0; k < r.curvature.size(); ++k) {
    out << r.grid_index[k] << ',';
    put_coords(out, s.dirs[r.grid_index[k]]);
    out << g17(r.curvature[k]) << '\n';
  }
}

void write_supermult_csv(const SupermultReport& r, const std::string& path) {
  auto out = open_csv(path, "lattice coordinates in steps, probabilities dimensionless");
  out << "cutoff,x1,x2,x3,y1,y2,y3,g_total,g_first,g_second,margin\n";
  for (const auto& pr : r.pairs) {
    out << (r.cutoff ? 1 : 0) << ',';
    put_coords(out, pr.x);
    put_coords(out, pr.y);
    out << g17(pr.g_total) << ',' << g17(pr.g_first) << ',' << g17(pr.g_second) << ','
        << g17(pr.margin) << '\n';
  }
}

std::string estimator_schema() {
  return
      "All CSV files open with a '# ozlab <version>; <units>' comment line,\n"
      "then the column header row.\n"
      "\n"
      "connectivity.csv\n"
      "  d             lattice dimension\n"
      "  x1,x2,x3      displacement coordinates, zero padded beyond d\n"
      "  samples       Monte Carlo samples drawn\n"
      "  hits          samples where 0 and x share a boundary-avoiding cluster\n"
      "  estimate      hits / samples (batch mean for chain dynamics)\n"
      "  stderr        binomial or batch-means standard error\n"
      "  box_side      side of the centered simulation box\n"
      "  cutoff        finiteness surrogate used by the event\n"
      "\n"
      "tau.csv\n"
      "  d             lattice dimension\n"
      "  dir1..dir3    lattice direction of the radius ray, zero padded\n"
      "  alpha         fixed power-law correction exponent (0 = plain fit)\n"
      "  tau           fitted decay rate of -log g(r)\n"
      "  tau_stderr    jackknife standard error over the retained radii\n"
      "  intercept     fitted constant term\n"
      "  n_radii       radii retained by the fit\n"
      "\n"
      "surface.csv\n"
      "  index         grid index, theta-major\n"
      "  theta_row     colatitude row on structured grids, -1 otherwise\n"
      "  phi_col       azimuth column on structured grids, -1 otherwise\n"
      "  dir1..dir3    unit direction, zero padded beyond d\n"
      "  tau           decay rate along the direction\n"
      "  radius        1 / tau, the equi-decay surface radius\n"
      "\n"
      "curvature.csv\n"
      "  index         surface grid index of the interior sample point\n"
      "  dir1..dir3    unit direction of the sample point\n"
      "  curvature     Gaussian (d = 3) or plane-curve (d = 2) curvature\n"
      "\n"
      "supermult.csv\n"
      "  cutoff        1 when events demand boundary-avoiding clusters\n"
      "  x1..x3,y1..y3 the probed pair of points, zero padded\n"
      "  g_total       P(0 and y joined)\n"
      "  g_first       P(0 and x joined)\n"
      "  g_second      P(x and y joined)\n"
      "  margin        g_total - g_first * g_second\n";
}

}  // namespace oz

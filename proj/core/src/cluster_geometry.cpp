#include "ozlab/cluster_geometry.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

#include "json.hpp"
#include "ozlab/union_find.hpp"

namespace oz {

namespace {

constexpr double kTol = 1e-9;

double height(const RVec& th, const Vec& v) { return dot(th, v); }

Box bounding_box(const std::vector<Vec>& cells, int margin) {
  if (cells.empty()) throw std::invalid_argument("empty cell set has no bounding box");
  int d = cells.front().d;
  Vec lo = cells.front(), hi = cells.front();
  for (const Vec& v : cells)
    for (int j = 0; j < d; ++j) {
      lo[j] = std::min(lo[j], v[j]);
      hi[j] = std::max(hi[j], v[j]);
    }
  Box box;
  box.d = d;
  box.lo = lo;
  for (int j = 0; j < d; ++j) {
    box.lo[j] -= margin;
    box.dims[j] = hi[j] - lo[j] + 1 + 2 * margin;
  }
  return box;
}

// Boundary edges of the filled cell set: enclosed complement pockets are
// absorbed first, then edges leaving the filled region are read off.
std::vector<Edge> boundary_of_cells(const std::vector<Vec>& cells) {
  int d = cells.front().d;
  Box box = bounding_box(cells, 1);
  int64_t n = box.vertex_count();
  std::vector<uint8_t> occupied(n, 0), outside(n, 0);
  for (const Vec& v : cells) occupied[box.index_of(v)] = 1;

  std::deque<int64_t> queue;
  for (int64_t i = 0; i < n; ++i)
    if (box.on_boundary(box.vertex_at(i)) && !occupied[i]) {
      outside[i] = 1;
      queue.push_back(i);
    }
  while (!queue.empty()) {
    Vec v = box.vertex_at(queue.front());
    queue.pop_front();
    for (int j = 0; j < d; ++j)
      for (int s = -1; s <= 1; s += 2) {
        Vec w = v;
        w[j] += s;
        if (!box.contains(w)) continue;
        int64_t wi = box.index_of(w);
        if (occupied[wi] || outside[wi]) continue;
        outside[wi] = 1;
        queue.push_back(wi);
      }
  }

  auto filled = [&](const Vec& v) {
    if (!box.contains(v)) return false;
    int64_t i = box.index_of(v);
    return occupied[i] || !outside[i];
  };

  std::vector<Edge> boundary;
  for (int64_t i = 0; i < n; ++i) {
    Vec v = box.vertex_at(i);
    if (!filled(v)) continue;
    for (int j = 0; j < d; ++j)
      for (int s = -1; s <= 1; s += 2) {
        Vec w = v;
        w[j] += s;
        if (filled(w)) continue;
        boundary.push_back(s > 0 ? Edge{v, j} : Edge{w, j});
      }
  }
  std::sort(boundary.begin(), boundary.end());
  return boundary;
}

using VecSet = std::unordered_set<Vec, VecHash>;

VecSet vec_set(const std::vector<Vec>& vs) { return VecSet(vs.begin(), vs.end()); }

}  // namespace

bool Cluster::contains(const Vec& v) const {
  return std::binary_search(vertices.begin(), vertices.end(), v);
}

bool Cluster::has_edge(const Edge& e) const {
  return std::binary_search(edges.begin(), edges.end(), e);
}

void validate_cluster(const Cluster& cluster) {
  if (cluster.vertices.empty()) throw std::invalid_argument("cluster has no vertices");
  if (!std::is_sorted(cluster.vertices.begin(), cluster.vertices.end()))
    throw std::invalid_argument("cluster vertices are not sorted");
  std::unordered_map<Vec, int32_t, VecHash> index;
  for (size_t i = 0; i < cluster.vertices.size(); ++i)
    index.emplace(cluster.vertices[i], static_cast<int32_t>(i));
  UnionFind uf(cluster.vertices.size());
  for (const Edge& e : cluster.edges) {
    auto a = index.find(e.v);
    auto b = index.find(e.other());
    if (a == index.end() || b == index.end())
      throw std::invalid_argument("cluster edge endpoint " + to_string(e) +
                                  " is outside the vertex set");
    uf.unite(a->second, b->second);
  }
  int32_t root = uf.find(0);
  for (size_t i = 1; i < cluster.vertices.size(); ++i)
    if (uf.find(static_cast<int32_t>(i)) != root)
      throw std::invalid_argument("cluster is not connected");
}

const Cluster& Components::at(const Vec& v) const {
  if (!box.contains(v)) throw std::invalid_argument("vertex " + to_string(v) + " is off the box");
  return clusters[label[box.index_of(v)]];
}

Components components(const BondConfig& config, const LatticeSpec& spec) {
  spec.validate();
  Box box = spec.box();
  EdgeIndexer idx(box);
  if (config.open.size() != idx.edges.size())
    throw std::invalid_argument("configuration size does not match box edge count");
  int64_t n = box.vertex_count();
  UnionFind uf(n);
  for (size_t i = 0; i < idx.edges.size(); ++i)
    if (config.open[i])
      uf.unite(static_cast<int32_t>(box.index_of(idx.edges[i].v)),
               static_cast<int32_t>(box.index_of(idx.edges[i].other())));

  Components out;
  out.box = box;
  out.label.assign(n, -1);
  std::vector<int32_t> cluster_of_root(n, -1);
  for (int64_t i = 0; i < n; ++i) {
    int32_t r = uf.find(static_cast<int32_t>(i));
    if (cluster_of_root[r] < 0) {
      cluster_of_root[r] = static_cast<int32_t>(out.clusters.size());
      out.clusters.push_back(Cluster{{}, {}, true});
    }
    int32_t id = cluster_of_root[r];
    out.label[i] = id;
    Vec v = box.vertex_at(i);
    out.clusters[id].vertices.push_back(v);
    if (box.on_boundary(v)) out.clusters[id].finite = false;
  }
  for (size_t i = 0; i < idx.edges.size(); ++i)
    if (config.open[i]) out.clusters[out.label[box.index_of(idx.edges[i].v)]].edges.push_back(idx.edges[i]);
  for (Cluster& c : out.clusters) {
    std::sort(c.vertices.begin(), c.vertices.end());
    std::sort(c.edges.begin(), c.edges.end());
  }
  return out;
}

BoundaryAndSurface external_boundary_and_surface(const Cluster& cluster, const LatticeSpec& spec) {
  spec.validate();
  if (!cluster.finite)
    throw std::invalid_argument("external boundary requires a cluster off the box boundary");
  if (cluster.vertices.empty()) throw std::invalid_argument("cluster has no vertices");
  BoundaryAndSurface out;
  out.boundary = boundary_of_cells(cluster.vertices);
  out.surface.plaquettes.reserve(out.boundary.size());
  for (const Edge& e : out.boundary) out.surface.plaquettes.push_back(dual(e));
  return out;
}

std::vector<std::vector<int32_t>> plaquette_components(const std::vector<Plaquette>& plaquettes) {
  std::unordered_map<Edge, int32_t, EdgeHash> index;
  for (size_t i = 0; i < plaquettes.size(); ++i)
    index.emplace(plaquettes[i].e, static_cast<int32_t>(i));
  UnionFind uf(plaquettes.size());
  for (size_t i = 0; i < plaquettes.size(); ++i)
    for (const Plaquette& nb : plaquette_neighbors(plaquettes[i])) {
      auto it = index.find(nb.e);
      if (it != index.end()) uf.unite(static_cast<int32_t>(i), it->second);
    }
  std::unordered_map<int32_t, int32_t> group_of_root;
  std::vector<std::vector<int32_t>> groups;
  for (size_t i = 0; i < plaquettes.size(); ++i) {
    int32_t r = uf.find(static_cast<int32_t>(i));
    auto [it, fresh] = group_of_root.emplace(r, static_cast<int32_t>(groups.size()));
    if (fresh) groups.emplace_back();
    groups[it->second].push_back(static_cast<int32_t>(i));
  }
  return groups;
}

namespace {

// Column-projection lower bound on the boundary size of any connected cell
// set with the given axis extents.
int64_t projection_bound(int d, const std::array<int64_t, kMaxDim>& ext) {
  if (d == 1) return 2;
  int64_t sum = 0;
  for (int j = 0; j < d; ++j) sum += ext[j];
  int64_t total = 0;
  for (int j = 0; j < d; ++j) total += sum - ext[j] - (d - 2);
  return 2 * total;
}

std::vector<Vec> monotone_path(const Vec& x) {
  std::vector<Vec> cells;
  Vec cur = Vec::zero(x.d);
  cells.push_back(cur);
  for (int j = 0; j < x.d; ++j) {
    int32_t s = x[j] > 0 ? 1 : -1;
    for (int32_t k = 0; k != x[j]; k += s) {
      cur[j] += s;
      cells.push_back(cur);
    }
  }
  return cells;
}

struct PhiSearch {
  int d;
  Vec target;
  Box region;
  int budget;
  int64_t best_phi = 0;
  int64_t best_cells = 0;

  std::vector<Vec> pool;  // current set
  VecSet in_set, listed;
  std::vector<Vec> cand;

  int64_t evaluate() { return static_cast<int64_t>(boundary_of_cells(pool).size()); }

  std::array<int64_t, kMaxDim> extents_with_anchors() const {
    std::array<int64_t, kMaxDim> lo{}, hi{}, ext{};
    for (int j = 0; j < d; ++j) {
      lo[j] = std::min<int64_t>(0, target[j]);
      hi[j] = std::max<int64_t>(0, target[j]);
    }
    for (const Vec& v : pool)
      for (int j = 0; j < d; ++j) {
        lo[j] = std::min<int64_t>(lo[j], v[j]);
        hi[j] = std::max<int64_t>(hi[j], v[j]);
      }
    for (int j = 0; j < d; ++j) ext[j] = hi[j] - lo[j] + 1;
    return ext;
  }

  void dfs(size_t start, int64_t dist_to_target) {
    for (size_t i = start; i < cand.size(); ++i) {
      Vec c = cand[i];
      pool.push_back(c);
      in_set.insert(c);
      int64_t nd = std::min(dist_to_target, l1(c - target));
      do {
        if (static_cast<int>(pool.size()) > budget) break;
        int64_t bound = projection_bound(d, extents_with_anchors());
        if (bound > best_phi) break;
        bool has_target = in_set.count(target) > 0;
        if (has_target) {
          int64_t s = evaluate();
          if (s < best_phi || (s == best_phi && static_cast<int64_t>(pool.size()) < best_cells)) {
            best_phi = std::min(best_phi, s);
            best_cells = static_cast<int64_t>(pool.size());
          }
        }
        // deeper sets only grow; they can still help when the bound leaves
        // room for a better surface or a smaller minimizer
        bool phi_room = bound < best_phi;
        bool psi_room = bound <= best_phi && static_cast<int64_t>(pool.size()) + 1 < best_cells;
        if (!phi_room && !psi_room) break;
        if (!has_target && nd > budget - static_cast<int64_t>(pool.size())) break;
        size_t old = cand.size();
        for (int j = 0; j < d; ++j)
          for (int s2 = -1; s2 <= 1; s2 += 2) {
            Vec w = c;
            w[j] += s2;
            if (!region.contains(w) || in_set.count(w) || listed.count(w)) continue;
            cand.push_back(w);
            listed.insert(w);
          }
        dfs(i + 1, nd);
        for (size_t k = old; k < cand.size(); ++k) listed.erase(cand[k]);
        cand.resize(old);
      } while (false);
      pool.pop_back();
      in_set.erase(c);
    }
  }
};

}  // namespace

PhiPsi phi_psi_oracle(const Vec& x, const LatticeSpec& spec, int radius_cap) {
  spec.validate();
  if (x.d != spec.d) throw std::invalid_argument("dimension mismatch");
  if (radius_cap < 1) throw std::invalid_argument("radius cap must be positive");
  Vec origin = Vec::zero(x.d);
  if (x == origin) return PhiPsi{0, 0};
  constexpr int kBudget = 12;
  if (l1(x) + 1 > kBudget)
    throw std::invalid_argument("displacement " + to_string(x) + " exceeds the oracle budget");

  PhiSearch search;
  search.d = x.d;
  search.target = x;
  search.region = bounding_box({origin, x}, radius_cap);
  search.budget = kBudget;

  std::vector<Vec> seed = monotone_path(x);
  search.pool = seed;
  search.best_phi = search.evaluate();
  search.best_cells = static_cast<int64_t>(seed.size());

  search.pool = {origin};
  search.in_set = vec_set(search.pool);
  search.listed = search.in_set;
  for (int j = 0; j < x.d; ++j)
    for (int s = -1; s <= 1; s += 2) {
      Vec w = origin;
      w[j] += s;
      if (search.region.contains(w) && !search.listed.count(w)) {
        search.cand.push_back(w);
        search.listed.insert(w);
      }
    }
  search.dfs(0, l1(x));

  return PhiPsi{search.best_phi, search.best_cells - 1};
}

namespace {

struct PhiTSearch {
  int d;
  int axis;
  int64_t top;  // strip height along the axis
  Box region;
  int budget;
  int64_t best = 0;

  std::vector<Vec> pool;
  VecSet in_set, listed;
  std::vector<Vec> cand;

  int64_t in_strip_count() {
    int64_t count = 0;
    for (const Edge& e : boundary_of_cells(pool)) {
      double c = plaquette_center(dual(e))[axis];
      if (c >= -kTol && c <= top + kTol) ++count;
    }
    return count;
  }

  int64_t level_bound() const {
    // every strip level carries at least two lateral plaquettes per
    // transverse axis, more when the occupied slice is wider
    int64_t total = 0;
    for (int64_t lv = 0; lv <= top; ++lv) {
      std::array<int64_t, kMaxDim> lo{}, hi{};
      bool seen = false;
      for (const Vec& v : pool) {
        if (v[axis] != lv) continue;
        for (int j = 0; j < d; ++j) {
          if (!seen) {
            lo[j] = hi[j] = v[j];
          } else {
            lo[j] = std::min<int64_t>(lo[j], v[j]);
            hi[j] = std::max<int64_t>(hi[j], v[j]);
          }
        }
        seen = true;
      }
      for (int j = 0; j < d; ++j) {
        if (j == axis) continue;
        total += 2 * (seen ? hi[j] - lo[j] + 1 : 1);
      }
    }
    return total;
  }

  void dfs(size_t start) {
    for (size_t i = start; i < cand.size(); ++i) {
      Vec c = cand[i];
      pool.push_back(c);
      in_set.insert(c);
      do {
        if (static_cast<int>(pool.size()) > budget) break;
        int64_t bound = level_bound();
        if (bound >= best) break;
        int64_t max_level = pool.front()[axis];
        for (const Vec& v : pool) max_level = std::max<int64_t>(max_level, v[axis]);
        if (max_level >= top) best = std::min(best, in_strip_count());
        if (top - max_level > budget - static_cast<int64_t>(pool.size())) break;
        size_t old = cand.size();
        for (int j = 0; j < d; ++j)
          for (int s2 = -1; s2 <= 1; s2 += 2) {
            Vec w = c;
            w[j] += s2;
            if (!region.contains(w) || in_set.count(w) || listed.count(w)) continue;
            cand.push_back(w);
            listed.insert(w);
          }
        dfs(i + 1);
        for (size_t k = old; k < cand.size(); ++k) listed.erase(cand[k]);
        cand.resize(old);
      } while (false);
      pool.pop_back();
      in_set.erase(c);
    }
  }
};

}  // namespace

int64_t phi_t_oracle(const Vec& x, const RVec& t, const LatticeSpec& spec, int budget) {
  spec.validate();
  if (x.d != spec.d || t.d != spec.d) throw std::invalid_argument("dimension mismatch");
  RVec th = normalized(t);
  int axis = cone_axis(th);
  if (th[axis] < 1.0 - 1e-9)
    throw std::invalid_argument("the strip oracle supports axis tilts only");
  int64_t top = x[axis];
  if (top <= 0) return 0;
  if (top + 1 > budget)
    throw std::invalid_argument("strip height " + std::to_string(top) +
                                " exceeds the oracle budget");

  PhiTSearch search;
  search.d = x.d;
  search.axis = axis;
  search.top = top;
  search.budget = budget;
  int rcap = budget;
  Box region;
  region.d = x.d;
  region.lo = Vec::zero(x.d);
  for (int j = 0; j < x.d; ++j) {
    region.lo[j] = j == axis ? -1 : -rcap;
    region.dims[j] = j == axis ? static_cast<int32_t>(top) + 3 : 2 * rcap + 1;
  }
  search.region = region;

  Vec origin = Vec::zero(x.d);
  std::vector<Vec> tube;
  for (int64_t lv = 0; lv <= top; ++lv) {
    Vec v = origin;
    v[axis] = static_cast<int32_t>(lv);
    tube.push_back(v);
  }
  search.pool = tube;
  search.best = search.in_strip_count();

  search.pool = {origin};
  search.in_set = vec_set(search.pool);
  search.listed = search.in_set;
  for (int j = 0; j < x.d; ++j)
    for (int s = -1; s <= 1; s += 2) {
      Vec w = origin;
      w[j] += s;
      if (search.region.contains(w) && !search.listed.count(w)) {
        search.cand.push_back(w);
        search.listed.insert(w);
      }
    }
  search.dfs(0);
  return search.best;
}

namespace {

void require_in_strip(const Cluster& cluster, const RVec& th, double hx, double hy) {
  for (const Vec& v : cluster.vertices) {
    double h = height(th, v);
    if (h < hx - kTol || h > hy + kTol)
      throw std::invalid_argument("cluster leaves the strip at " + to_string(v));
  }
}

Vec step_axis(const RVec& th) {
  int axis = cone_axis(th);
  if (th[axis] <= kTol)
    throw std::invalid_argument("tilt direction has no positive axis component");
  return Vec::unit(th.d, axis);
}

}  // namespace

Cluster restrict_to_strip(const Cluster& cluster, const RVec& t, const Vec& x, const Vec& y) {
  validate_cluster(cluster);
  RVec th = normalized(t);
  double hx = height(th, x), hy = height(th, y);
  if (hx > hy + kTol) throw std::invalid_argument("strip endpoints are height-inverted");
  if (!cluster.contains(x) || !cluster.contains(y))
    throw std::invalid_argument("strip endpoints must belong to the cluster");

  VecSet kept;
  for (const Vec& v : cluster.vertices) {
    double h = height(th, v);
    if (h >= hx - kTol && h <= hy + kTol) kept.insert(v);
  }
  std::unordered_map<Vec, std::vector<Vec>, VecHash> adj;
  for (const Edge& e : cluster.edges) {
    Vec a = e.v, b = e.other();
    if (kept.count(a) && kept.count(b)) {
      adj[a].push_back(b);
      adj[b].push_back(a);
    }
  }
  VecSet reached{x};
  std::deque<Vec> queue{x};
  while (!queue.empty()) {
    Vec v = queue.front();
    queue.pop_front();
    for (const Vec& w : adj[v])
      if (reached.insert(w).second) queue.push_back(w);
  }
  if (!reached.count(y))
    throw std::invalid_argument("strip endpoints are not connected inside the strip");

  Cluster out;
  out.finite = cluster.finite;
  out.vertices.assign(reached.begin(), reached.end());
  std::sort(out.vertices.begin(), out.vertices.end());
  for (const Edge& e : cluster.edges)
    if (reached.count(e.v) && reached.count(e.other())) out.edges.push_back(e);
  std::sort(out.edges.begin(), out.edges.end());
  return out;
}

BreakPointData break_points(const Cluster& cluster, const RVec& t, const Vec& x, const Vec& y) {
  validate_cluster(cluster);
  RVec th = normalized(t);
  double hx = height(th, x), hy = height(th, y);
  if (hx > hy + kTol) throw std::invalid_argument("endpoints are height-inverted");
  if (!cluster.contains(x) || !cluster.contains(y))
    throw std::invalid_argument("endpoints must belong to the cluster");
  require_in_strip(cluster, th, hx, hy);

  BreakPointData data;
  data.u = step_axis(th);
  double hu = height(th, data.u);

  std::vector<std::pair<double, Vec>> by_height;
  by_height.reserve(cluster.vertices.size());
  for (const Vec& v : cluster.vertices) by_height.push_back({height(th, v), v});
  std::sort(by_height.begin(), by_height.end(),
            [](const auto& a, const auto& b) {
              if (a.first != b.first) return a.first < b.first;
              return a.second < b.second;
            });
  VecSet members = vec_set(cluster.vertices);

  for (const auto& [h, b] : by_height) {
    if (h < hx + hu - kTol || h > hy - hu + kTol) continue;
    auto lo = std::lower_bound(by_height.begin(), by_height.end(), h - hu - kTol,
                               [](const auto& a, double key) { return a.first < key; });
    auto hi = std::upper_bound(by_height.begin(), by_height.end(), h + hu + kTol,
                               [](double key, const auto& a) { return key < a.first; });
    if (hi - lo != 3) continue;
    Vec below = b - data.u, above = b + data.u;
    if (!members.count(below) || !members.count(above)) continue;
    VecSet window;
    for (auto it = lo; it != hi; ++it) window.insert(it->second);
    if (window.count(below) && window.count(b) && window.count(above))
      data.break_points.push_back(b);
  }

  VecSet break_set = vec_set(data.break_points);
  for (const Vec& b : data.break_points) {
    if (!break_set.count(b + data.u)) continue;
    Edge bond{b, cone_axis(th)};
    if (!cluster.has_edge(bond))
      throw std::logic_error("bond between break points is not an open cluster edge");
    data.t_bonds.push_back(bond);
  }
  return data;
}

BreakPointData cone_points(const Cluster& cluster, const RVec& t, double eps, const Vec& x,
                           const Vec& y) {
  BreakPointData data = break_points(cluster, t, x, y);
  data.eps = eps;
  RVec th = normalized(t);
  Cone cone(th, eps);

  for (const Vec& b : data.break_points) {
    double hb = height(th, b);
    bool ok = true;
    for (const Vec& v : cluster.vertices) {
      double hv = height(th, v);
      if (hv >= hb - kTol && !cone.contains(v - b)) {
        ok = false;
        break;
      }
      if (hv <= hb + kTol && !cone.contains(b - v)) {
        ok = false;
        break;
      }
    }
    if (ok) data.cone_points.push_back(b);
  }

  VecSet cone_set = vec_set(data.cone_points);
  for (const Edge& bond : data.t_bonds)
    if (cone_set.count(bond.v) && cone_set.count(bond.other())) data.cone_bonds.push_back(bond);
  return data;
}

namespace {

Cluster slice_by_height(const Cluster& cluster, const RVec& th, double lo, double hi,
                        bool finite) {
  Cluster out;
  out.finite = finite;
  VecSet kept;
  for (const Vec& v : cluster.vertices) {
    double h = height(th, v);
    if (h >= lo - kTol && h <= hi + kTol) {
      out.vertices.push_back(v);
      kept.insert(v);
    }
  }
  for (const Edge& e : cluster.edges)
    if (kept.count(e.v) && kept.count(e.other())) out.edges.push_back(e);
  std::sort(out.vertices.begin(), out.vertices.end());
  std::sort(out.edges.begin(), out.edges.end());
  return out;
}

}  // namespace

IrreducibleDecomposition irreducible_decomposition(const Cluster& cluster, const RVec& t,
                                                   double eps, const Vec& x, const Vec& y) {
  BreakPointData data = cone_points(cluster, t, eps, x, y);
  RVec th = normalized(t);
  double hu = height(th, data.u);

  IrreducibleDecomposition decomp;
  decomp.eps = eps;
  if (data.cone_bonds.empty()) {
    decomp.trivial = true;
    decomp.backward = cluster;
    decomp.forward = Cluster{{}, {}, cluster.finite};
    return decomp;
  }

  decomp.cut_bonds = data.cone_bonds;
  std::vector<Vec> bases;
  for (const Edge& bond : data.cone_bonds) bases.push_back(bond.v);
  std::vector<double> hb;
  for (const Vec& b : bases) hb.push_back(height(th, b));

  double bottom = height(th, x), top = height(th, y);
  decomp.backward = slice_by_height(cluster, th, bottom, hb.front(), cluster.finite);
  for (size_t i = 0; i + 1 < bases.size(); ++i) {
    decomp.interior.push_back(
        slice_by_height(cluster, th, hb[i] + hu, hb[i + 1], cluster.finite));
    decomp.displacements.push_back(bases[i + 1] - bases[i]);
  }
  decomp.forward = slice_by_height(cluster, th, hb.back() + hu, top, cluster.finite);
  return decomp;
}

bool reconstructs(const IrreducibleDecomposition& decomp, const Cluster& cluster) {
  std::vector<Vec> vertices = decomp.backward.vertices;
  std::vector<Edge> edges = decomp.backward.edges;
  for (const Cluster& piece : decomp.interior) {
    vertices.insert(vertices.end(), piece.vertices.begin(), piece.vertices.end());
    edges.insert(edges.end(), piece.edges.begin(), piece.edges.end());
  }
  vertices.insert(vertices.end(), decomp.forward.vertices.begin(), decomp.forward.vertices.end());
  edges.insert(edges.end(), decomp.forward.edges.begin(), decomp.forward.edges.end());
  edges.insert(edges.end(), decomp.cut_bonds.begin(), decomp.cut_bonds.end());

  std::sort(vertices.begin(), vertices.end());
  if (std::adjacent_find(vertices.begin(), vertices.end()) != vertices.end()) return false;
  std::sort(edges.begin(), edges.end());
  if (std::adjacent_find(edges.begin(), edges.end()) != edges.end()) return false;
  return vertices == cluster.vertices && edges == cluster.edges;
}

namespace {

// Cone points of the piece with heights inside [lo, hi].
bool has_cone_point_in_range(const Cluster& piece, const RVec& t, double eps, const Vec& x,
                             const Vec& y, double lo, double hi) {
  RVec th = normalized(t);
  BreakPointData data = cone_points(piece, t, eps, x, y);
  for (const Vec& z : data.cone_points) {
    double h = height(th, z);
    if (h >= lo - kTol && h <= hi + kTol) return true;
  }
  return false;
}

bool window_is_clean(const Cluster& piece, const RVec& th, const Vec& anchor, const Vec& mate,
                     double lo, double hi) {
  for (const Vec& v : piece.vertices) {
    double h = height(th, v);
    if (h < lo - kTol || h > hi + kTol) continue;
    if (v != anchor && v != mate) return false;
  }
  return true;
}

}  // namespace

bool piece_irreducible(const Cluster& piece, const RVec& t, double eps, const Vec& x,
                       const Vec& y) {
  validate_cluster(piece);
  if (!piece.contains(x) || !piece.contains(y)) return false;
  RVec th = normalized(t);
  Vec u = step_axis(th);
  double hu = height(th, u);
  double hx = height(th, x), hy = height(th, y);
  Cone cone(th, eps);
  for (const Vec& v : piece.vertices)
    if (!cone.contains(v - x) || !cone.contains(y - v)) return false;
  if (!window_is_clean(piece, th, x, x + u, hx, hx + hu)) return false;
  if (!window_is_clean(piece, th, y, y - u, hy - hu, hy)) return false;
  if (hy - hx < 4 * hu - kTol) return true;
  return !has_cone_point_in_range(piece, t, eps, x, y, hx + 2 * hu, hy - 2 * hu);
}

bool backward_irreducible(const Cluster& piece, const RVec& t, double eps, const Vec& y) {
  validate_cluster(piece);
  if (!piece.contains(y)) return false;
  RVec th = normalized(t);
  Vec u = step_axis(th);
  double hu = height(th, u);
  double hy = height(th, y);
  Cone cone(th, eps);
  for (const Vec& v : piece.vertices)
    if (!cone.contains(y - v)) return false;
  if (!window_is_clean(piece, th, y, y - u, hy - hu, hy)) return false;
  Vec x = *std::min_element(piece.vertices.begin(), piece.vertices.end(),
                            [&](const Vec& a, const Vec& b) {
                              return height(th, a) < height(th, b);
                            });
  double hx = height(th, x);
  if (hy - hx < 3 * hu - kTol) return true;
  return !has_cone_point_in_range(piece, t, eps, x, y, hx + hu, hy - 2 * hu);
}

bool forward_irreducible(const Cluster& piece, const RVec& t, double eps, const Vec& x) {
  validate_cluster(piece);
  if (!piece.contains(x)) return false;
  RVec th = normalized(t);
  Vec u = step_axis(th);
  double hu = height(th, u);
  double hx = height(th, x);
  Cone cone(th, eps);
  for (const Vec& v : piece.vertices)
    if (!cone.contains(v - x)) return false;
  if (!window_is_clean(piece, th, x, x + u, hx, hx + hu)) return false;
  Vec y = *std::max_element(piece.vertices.begin(), piece.vertices.end(),
                            [&](const Vec& a, const Vec& b) {
                              return height(th, a) < height(th, b);
                            });
  double hy = height(th, y);
  if (hy - hx < 3 * hu - kTol) return true;
  return !has_cone_point_in_range(piece, t, eps, x, y, hx + 2 * hu, hy - hu);
}

namespace {

SlabReport classify_impl(const DualSurface& surface, const RVec& t, int N, const Vec& x,
                         double ref) {
  if (N < 2) throw std::invalid_argument("slab width must be at least 2");
  if (!(ref > 0)) throw std::invalid_argument("crossing reference must be positive");
  RVec th = normalized(t);
  double xnorm = l2(x);
  int64_t tN = static_cast<int64_t>(std::floor(xnorm / N)) - 1;
  if (tN < 1) throw std::invalid_argument("slab count is degenerate for this x and N");
  int64_t n_slabs = tN + 1;

  RVec xhat = normalized(RVec::from(x));
  std::vector<double> h(n_slabs + 1);
  for (int64_t i = 0; i <= tN; ++i) {
    Vec yi = Vec::zero(x.d);
    for (int j = 0; j < x.d; ++j)
      yi[j] = static_cast<int32_t>(std::floor(i * static_cast<double>(N) * xhat[j]));
    h[i] = height(th, yi);
  }
  h[n_slabs] = height(th, x);
  for (int64_t i = 0; i < n_slabs; ++i)
    if (!(h[i + 1] > h[i] + kTol))
      throw std::invalid_argument("slab faces are not increasing along the tilt");

  SlabReport rep;
  rep.t = th;
  rep.x = x;
  rep.N = N;
  rep.min_crossing_ref = ref;
  rep.surface = surface;
  rep.slab_plaquettes.assign(n_slabs, {});

  for (size_t idx = 0; idx < surface.plaquettes.size(); ++idx) {
    double c = dot(th, plaquette_center(surface.plaquettes[idx]));
    if (c < h[0] - kTol || c > h[n_slabs] + kTol) continue;
    int64_t s = n_slabs - 1;
    for (int64_t i = 0; i < n_slabs - 1; ++i)
      if (c < h[i + 1] - kTol) {
        s = i;
        break;
      }
    rep.slab_plaquettes[s].push_back(static_cast<int32_t>(idx));
  }

  for (int64_t i = 0; i < n_slabs; ++i) {
    SlabInfo info;
    info.lo = h[i];
    info.hi = h[i + 1];
    info.size = static_cast<int64_t>(rep.slab_plaquettes[i].size());
    std::vector<Plaquette> piece;
    piece.reserve(rep.slab_plaquettes[i].size());
    for (int32_t idx : rep.slab_plaquettes[i]) piece.push_back(surface.plaquettes[idx]);
    auto groups = plaquette_components(piece);
    info.n_components = static_cast<int>(groups.size());
    for (const auto& group : groups) {
      double lo_c = 1e300, hi_c = -1e300;
      for (int32_t g : group) {
        double c = dot(th, plaquette_center(piece[g]));
        lo_c = std::min(lo_c, c);
        hi_c = std::max(hi_c, c);
      }
      if (lo_c <= info.lo + 1.0 + kTol && hi_c >= info.hi - 1.0 - kTol) ++info.n_crossings;
    }
    info.good = info.n_components == 1 && info.n_crossings == 1 &&
                static_cast<double>(info.size) < 2.0 * ref;
    rep.good_count += info.good ? 1 : 0;
    rep.bad_count += info.good ? 0 : 1;
    rep.slabs.push_back(info);
  }
  return rep;
}

}  // namespace

SlabReport classify_slabs(const DualSurface& surface, const RVec& t, int N, const Vec& x,
                          double min_crossing_ref) {
  return classify_impl(surface, t, N, x, min_crossing_ref);
}

SlabReport classify_slabs(const DualSurface& surface, const RVec& t, int N, const Vec& x,
                          const LatticeSpec& spec) {
  RVec xhat = normalized(RVec::from(x));
  Vec step = Vec::zero(x.d);
  for (int j = 0; j < x.d; ++j)
    step[j] = static_cast<int32_t>(std::floor(N * xhat[j]));
  double ref = static_cast<double>(phi_t_oracle(step, t, spec));
  return classify_impl(surface, t, N, x, ref);
}

MarkSequences mark_sequences(SlabReport& report, double M) {
  MarkSequences seq;
  const auto& slabs = report.slabs;
  int64_t n = static_cast<int64_t>(slabs.size());
  std::vector<int64_t> good;
  for (int64_t i = 0; i < n; ++i)
    if (slabs[i].good) good.push_back(i);

  if (!good.empty()) {
    int64_t m = good.front();
    for (;;) {
      seq.m_plus.push_back(m);
      int64_t r = -1;
      double sum = 0;
      for (int64_t k = m; k < n; ++k) {
        sum += static_cast<double>(slabs[k].size);
        if (sum > M * report.N * static_cast<double>(k - m + 1)) {
          r = k;
          break;
        }
      }
      if (r < 0) break;
      seq.r_plus.push_back(r);
      auto it = std::upper_bound(good.begin(), good.end(), r);
      if (it == good.end()) break;
      m = *it;
    }

    m = good.back();
    for (;;) {
      seq.m_minus.push_back(m);
      int64_t r = -1;
      double sum = 0;
      for (int64_t k = m; k >= 0; --k) {
        sum += static_cast<double>(slabs[k].size);
        if (sum > M * report.N * static_cast<double>(m - k + 1)) {
          r = k;
          break;
        }
      }
      if (r < 0) break;
      seq.r_minus.push_back(r);
      auto it = std::lower_bound(good.begin(), good.end(), r);
      if (it == good.begin()) break;
      m = *(it - 1);
    }
  }

  std::vector<int64_t> a = seq.m_plus, b = seq.m_minus;
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  std::vector<int64_t> both;
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(both));
  seq.common = static_cast<int64_t>(both.size());

  report.marks = seq;
  report.M = M;
  return seq;
}

namespace {

std::vector<RVec> transverse_frame(const RVec& th) {
  std::vector<RVec> frame{th};
  for (int j = 0; j < th.d && static_cast<int>(frame.size()) < th.d; ++j) {
    RVec cand = RVec::axis(th.d, j);
    for (const RVec& f : frame) cand = cand - f * dot(f, cand);
    if (norm(cand) > 1e-8) frame.push_back(normalized(cand));
  }
  if (static_cast<int>(frame.size()) != th.d)
    throw std::logic_error("failed to complete the transverse frame");
  return frame;
}

}  // namespace

std::vector<Vec> correct_points(SlabReport& report, const Cluster& cluster, const RVec& t,
                                double eps) {
  validate_cluster(cluster);
  RVec th = normalized(t);
  Cone cone(th, eps);
  std::vector<RVec> frame = transverse_frame(th);
  int d = th.d;
  int64_t n_slabs = static_cast<int64_t>(report.slabs.size());

  // hull corners of the occupied blocks, one list per slab
  std::vector<std::vector<RVec>> corners(n_slabs);
  for (int64_t i = 0; i < n_slabs; ++i) {
    std::unordered_set<std::string> keys;
    for (int32_t idx : report.slab_plaquettes[i]) {
      RVec c = plaquette_center(report.surface.plaquettes[idx]);
      std::string key;
      std::array<int64_t, kMaxDim> block{};
      for (int j = 1; j < d; ++j) {
        block[j] = static_cast<int64_t>(std::floor(dot(frame[j], c) / report.N));
        key += std::to_string(block[j]) + ",";
      }
      if (!keys.insert(key).second) continue;
      int combos = 1 << d;
      for (int mask = 0; mask < combos; ++mask) {
        double a0 = (mask & 1) ? report.slabs[i].hi : report.slabs[i].lo;
        RVec p = frame[0] * a0;
        for (int j = 1; j < d; ++j) {
          double aj = static_cast<double>(block[j] + ((mask >> j) & 1)) * report.N;
          p = p + frame[j] * aj;
        }
        corners[i].push_back(p);
      }
    }
  }

  std::vector<Vec> result;
  for (int64_t i = 0; i < n_slabs; ++i) {
    if (!report.slabs[i].good) continue;
    for (const Vec& z : cluster.vertices) {
      double hz = height(th, z);
      if (hz < report.slabs[i].lo - kTol || hz > report.slabs[i].hi + kTol) continue;
      RVec zr = RVec::from(z);
      bool ok = true;
      for (int64_t j = 0; j < n_slabs && ok; ++j) {
        if (j == i) continue;
        for (const RVec& p : corners[j]) {
          RVec diff = j < i ? zr - p : p - zr;
          if (!cone.contains(diff)) {
            ok = false;
            break;
          }
        }
      }
      if (ok) result.push_back(z);
    }
  }
  std::sort(result.begin(), result.end(), [&](const Vec& a, const Vec& b) {
    double ha = height(th, a), hb = height(th, b);
    if (ha != hb) return ha < hb;
    return a < b;
  });
  result.erase(std::unique(result.begin(), result.end()), result.end());
  report.correct = result;
  report.eps = eps;
  return result;
}

void dump_clusters_jsonl(const std::string& path, const std::vector<Cluster>& clusters) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  for (const Cluster& c : clusters) {
    nlohmann::json j;
    j["d"] = c.vertices.empty() ? 0 : c.vertices.front().d;
    j["finite"] = c.finite;
    auto& jv = j["vertices"] = nlohmann::json::array();
    for (const Vec& v : c.vertices) {
      nlohmann::json coords = nlohmann::json::array();
      for (int k = 0; k < v.d; ++k) coords.push_back(v[k]);
      jv.push_back(coords);
    }
    auto& je = j["edges"] = nlohmann::json::array();
    for (const Edge& e : c.edges) {
      nlohmann::json coords = nlohmann::json::array();
      for (int k = 0; k < e.v.d; ++k) coords.push_back(e.v[k]);
      je.push_back(nlohmann::json::array({coords, e.axis}));
    }
    out << j.dump() << "\n";
  }
  if (!out) throw std::runtime_error("failed writing " + path);
}

std::vector<Cluster> load_clusters_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::vector<Cluster> clusters;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw std::runtime_error(path + ":" + std::to_string(line_no) + ": " + e.what());
    }
    Cluster c;
    int d = j.at("d").get<int>();
    c.finite = j.at("finite").get<bool>();
    for (const auto& coords : j.at("vertices")) {
      Vec v = Vec::zero(d);
      for (int k = 0; k < d; ++k) v[k] = coords.at(k).get<int32_t>();
      c.vertices.push_back(v);
    }
    for (const auto& entry : j.at("edges")) {
      Vec v = Vec::zero(d);
      for (int k = 0; k < d; ++k) v[k] = entry.at(0).at(k).get<int32_t>();
      c.edges.push_back(Edge{v, entry.at(1).get<int>()});
    }
    std::sort(c.vertices.begin(), c.vertices.end());
    std::sort(c.edges.begin(), c.edges.end());
    clusters.push_back(std::move(c));
  }
  return clusters;
}

}  // namespace oz

#include "ozlab/polymer.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include "json.hpp"
#include "ozlab/union_find.hpp"

namespace oz {

void PolymerModel::validate() const {
  size_t m = size.size();
  if (activity.size() != m || incompat.size() != m)
    throw std::invalid_argument("polymer model fields have mismatched lengths");
  if (m > 32) throw std::invalid_argument("polymer model holds more than 32 polymers");
  for (size_t i = 0; i < m; ++i) {
    if (size[i] <= 0) throw std::invalid_argument("polymer sizes must be positive");
    if (!(activity[i] >= 0)) throw std::invalid_argument("activities must be nonnegative");
    if (((incompat[i] >> i) & 1u) == 0)
      throw std::invalid_argument("incompatibility relation must be reflexive");
    if (m < 32 && (incompat[i] >> m) != 0)
      throw std::invalid_argument("incompatibility mask references unknown polymers");
    for (size_t j = 0; j < m; ++j)
      if (((incompat[i] >> j) & 1u) != ((incompat[j] >> i) & 1u))
        throw std::invalid_argument("incompatibility relation must be symmetric");
  }
}

PolymerModel load_polymer_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(path + ": " + e.what());
  }
  PolymerModel model;
  model.size = j.at("sizes").get<std::vector<int64_t>>();
  model.activity = j.at("activities").get<std::vector<double>>();
  model.incompat.assign(model.size.size(), 0);
  for (size_t i = 0; i < model.incompat.size(); ++i) model.incompat[i] |= 1u << i;
  for (const auto& pair : j.at("incompatible")) {
    int a = pair.at(0).get<int>(), b = pair.at(1).get<int>();
    if (a < 0 || b < 0 || a >= model.n() || b >= model.n())
      throw std::runtime_error(path + ": incompatible pair out of range");
    model.incompat[a] |= 1u << b;
    model.incompat[b] |= 1u << a;
  }
  model.validate();
  return model;
}

void save_polymer_model(const PolymerModel& model, const std::string& path) {
  model.validate();
  nlohmann::json j;
  j["sizes"] = model.size;
  j["activities"] = model.activity;
  auto& pairs = j["incompatible"] = nlohmann::json::array();
  for (int a = 0; a < model.n(); ++a)
    for (int b = a + 1; b < model.n(); ++b)
      if (!model.compatible(a, b)) pairs.push_back({a, b});
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << j.dump(2) << "\n";
  if (!out) throw std::runtime_error("failed writing " + path);
}

bool pairwise_compatible(const PolymerModel& model, uint32_t members) {
  for (uint32_t rest = members; rest;) {
    int i = std::countr_zero(rest);
    rest &= rest - 1;
    if (model.incompat[i] & rest) return false;
  }
  return true;
}

bool cluster_connected(const PolymerModel& model, uint32_t members) {
  if (members == 0) return false;
  uint32_t reached = members & ~(members - 1);  // lowest bit
  for (;;) {
    uint32_t grown = reached;
    for (uint32_t rest = reached; rest;) {
      int i = std::countr_zero(rest);
      rest &= rest - 1;
      grown |= model.incompat[i] & members;
    }
    if (grown == reached) break;
    reached = grown;
  }
  return reached == members;
}

namespace {

// Z over compressed masks: Z[m] = Z[m \ v] + z_v Z[m \ N[v]] with v the
// lowest member.
std::vector<double> partition_table(const PolymerModel& model, uint32_t subset,
                                    std::vector<int>& members) {
  members.clear();
  for (uint32_t rest = subset; rest;) {
    members.push_back(std::countr_zero(rest));
    rest &= rest - 1;
  }
  int k = static_cast<int>(members.size());
  std::vector<uint32_t> nbr(k, 0);
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < k; ++j)
      if (!model.compatible(members[i], members[j])) nbr[i] |= 1u << j;
  std::vector<double> z(uint64_t{1} << k, 1.0);
  for (uint32_t mask = 1; mask < z.size(); ++mask) {
    int v = std::countr_zero(mask);
    z[mask] = z[mask & (mask - 1)] + model.activity[members[v]] * z[mask & ~nbr[v]];
  }
  return z;
}

}  // namespace

double partition_direct(const PolymerModel& model, uint32_t subset) {
  model.validate();
  if (model.n() < 32 && (subset >> model.n()) != 0)
    throw std::invalid_argument("subset references unknown polymers");
  if (std::popcount(subset) > kPartitionCap)
    throw std::invalid_argument("subset exceeds the direct partition budget");
  std::vector<int> members;
  return partition_table(model, subset, members).back();
}

ClusterExpansion cluster_logZ(const PolymerModel& model, uint32_t subset) {
  model.validate();
  if (model.n() < 32 && (subset >> model.n()) != 0)
    throw std::invalid_argument("subset references unknown polymers");
  int k = std::popcount(subset);
  if (k > kClusterWeightCap)
    throw std::invalid_argument("subset exceeds the cluster weight budget");

  std::vector<int> members;
  std::vector<double> z = partition_table(model, subset, members);
  std::vector<double> logz(z.size());
  for (size_t m = 0; m < z.size(); ++m) {
    if (!(z[m] > 0)) throw std::logic_error("partition value is not positive");
    logz[m] = std::log(z[m]);
  }

  ClusterExpansion out;
  out.log_z = logz.back();
  for (uint32_t mask = 1; mask < z.size(); ++mask) {
    double theta = 0;
    int bits = std::popcount(mask);
    for (uint32_t sub = mask;; sub = (sub - 1) & mask) {
      double term = logz[sub];
      theta += ((bits - std::popcount(sub)) % 2 == 0) ? term : -term;
      if (sub == 0) break;
    }
    uint32_t expanded = 0;
    for (int i = 0; i < static_cast<int>(members.size()); ++i)
      if ((mask >> i) & 1u) expanded |= 1u << members[i];
    out.clusters.push_back(ClusterWeight{expanded, theta});
  }
  return out;
}

KpReport kp_check(const PolymerModel& model, const std::vector<double>& a,
                  const std::vector<double>& ell, double c8) {
  model.validate();
  if (static_cast<int>(a.size()) != model.n())
    throw std::invalid_argument("weight vector length does not match the model");
  if (!ell.empty() && ell.size() != a.size())
    throw std::invalid_argument("diameter weight length does not match the model");
  for (double w : a)
    if (!(w > 0)) throw std::invalid_argument("weights a must be positive");

  KpReport report;
  report.pass = true;
  for (int s = 0; s < model.n(); ++s) {
    double sum = 0;
    for (int t = 0; t < model.n(); ++t) {
      if (model.compatible(s, t)) continue;
      double tiltexp = ell.empty() ? 0.0 : 0.5 * c8 * ell[t];
      sum += std::exp(a[t] + tiltexp) * std::abs(model.activity[t]);
    }
    report.sums.push_back(sum);
    report.margins.push_back(a[s] - sum);
    if (sum > a[s]) report.pass = false;
  }
  report.worst_margin = *std::min_element(report.margins.begin(), report.margins.end());
  return report;
}

double p0_threshold(double q, double c3, double c8) {
  if (!(q > 0) || !(c3 > 0) || !(c8 > 0))
    throw std::invalid_argument("threshold inputs must be positive");
  return 1.0 / (1.0 + std::exp(c8) / (q * c3) * c8 / (2.0 + c8));
}

namespace {

struct PlaquetteRegion {
  Box box;
  EdgeIndexer idx;
  std::vector<int32_t> nbr;  // degree 6(d-1) slots per edge id, -1 padded
  int degree;

  explicit PlaquetteRegion(const LatticeSpec& spec)
      : box(spec.box()), idx(box), degree(6 * (spec.d - 1)) {
    nbr.assign(static_cast<size_t>(idx.edge_count()) * degree, -1);
    for (int id = 0; id < idx.edge_count(); ++id) {
      auto nbs = plaquette_neighbors(dual(idx.edges[id]));
      int slot = 0;
      for (const Plaquette& p : nbs) {
        int32_t nid = idx.id_of(dual(p));
        if (nid >= 0) nbr[static_cast<size_t>(id) * degree + slot++] = nid;
      }
    }
  }
};

// Anchored connected-set enumeration over edge ids; visit fires once per
// set, after the star count is updated.
template <class Visit>
struct PolymerWalker {
  const PlaquetteRegion& region;
  int max_size;
  Visit& visit;

  std::vector<uint8_t> in_set, listed;
  std::vector<int32_t> cand, pool;
  std::vector<int8_t> vdeg;
  int stars = 0;

  PolymerWalker(const PlaquetteRegion& r, int cap, Visit& v)
      : region(r), max_size(cap), visit(v) {
    in_set.assign(region.idx.edge_count(), 0);
    listed.assign(region.idx.edge_count(), 0);
    vdeg.assign(region.box.vertex_count(), 0);
  }

  void bump(int32_t id, int delta) {
    const Edge& e = region.idx.edges[id];
    int64_t a = region.box.index_of(e.v), b = region.box.index_of(e.other());
    int full = 2 * region.box.d;
    if (delta > 0) {
      if (++vdeg[a] == full) ++stars;
      if (++vdeg[b] == full) ++stars;
    } else {
      if (vdeg[a]-- == full) --stars;
      if (vdeg[b]-- == full) --stars;
    }
  }

  void run(int32_t anchor) {
    pool.push_back(anchor);
    in_set[anchor] = 1;
    listed[anchor] = 1;
    bump(anchor, +1);
    visit(pool, stars);
    if (max_size > 1) {
      for (int j = 0; j < region.degree; ++j) {
        int32_t nid = region.nbr[static_cast<size_t>(anchor) * region.degree + j];
        if (nid >= 0) {
          cand.push_back(nid);
          listed[nid] = 1;
        }
      }
      dfs(0);
    }
    bump(anchor, -1);
  }

  void dfs(size_t start) {
    for (size_t i = start; i < cand.size(); ++i) {
      int32_t id = cand[i];
      pool.push_back(id);
      in_set[id] = 1;
      bump(id, +1);
      visit(pool, stars);
      if (static_cast<int>(pool.size()) < max_size) {
        size_t old = cand.size();
        for (int j = 0; j < region.degree; ++j) {
          int32_t nid = region.nbr[static_cast<size_t>(id) * region.degree + j];
          if (nid >= 0 && !listed[nid]) {
            cand.push_back(nid);
            listed[nid] = 1;
          }
        }
        dfs(i + 1);
        for (size_t k = old; k < cand.size(); ++k) listed[cand[k]] = 0;
        cand.resize(old);
      }
      bump(id, -1);
      in_set[id] = 0;
      pool.pop_back();
    }
  }
};

}  // namespace

std::vector<std::vector<Plaquette>> enumerate_plaquette_polymers(const LatticeSpec& spec,
                                                                 const Plaquette& anchor,
                                                                 int max_size) {
  spec.validate();
  if (max_size < 1 || max_size > kPlaquettePolymerCap)
    throw std::invalid_argument("polymer size budget must lie in [1, 8]");
  PlaquetteRegion region(spec);
  int32_t aid = region.idx.id_of(dual(anchor));
  if (aid < 0) throw std::invalid_argument("anchor plaquette is outside the box");

  std::vector<std::vector<Plaquette>> out;
  auto visit = [&](const std::vector<int32_t>& pool, int) {
    std::vector<Plaquette> polymer;
    polymer.reserve(pool.size());
    for (int32_t id : pool) polymer.push_back(dual(region.idx.edges[id]));
    std::sort(polymer.begin(), polymer.end());
    out.push_back(std::move(polymer));
  };
  PolymerWalker<decltype(visit)> walker(region, max_size, visit);
  walker.run(aid);
  return out;
}

int64_t polymer_norm(const std::vector<Plaquette>& polymer, NormKind kind,
                     const LatticeSpec& spec, int margin) {
  spec.validate();
  if (polymer.empty()) throw std::invalid_argument("polymer has no plaquettes");
  if (margin < 1) throw std::invalid_argument("margin must be positive");

  Box box;
  if (kind == NormKind::free_norm) {
    box = spec.box();
  } else {
    std::vector<Vec> ends;
    for (const Plaquette& p : polymer) {
      ends.push_back(dual(p).v);
      ends.push_back(dual(p).other());
    }
    int d = ends.front().d;
    Vec lo = ends.front(), hi = ends.front();
    for (const Vec& v : ends)
      for (int j = 0; j < d; ++j) {
        lo[j] = std::min(lo[j], v[j]);
        hi[j] = std::max(hi[j], v[j]);
      }
    box.d = d;
    box.lo = lo;
    for (int j = 0; j < d; ++j) {
      box.lo[j] -= margin;
      box.dims[j] = hi[j] - lo[j] + 1 + 2 * margin;
    }
  }

  EdgeIndexer idx(box);
  std::vector<uint8_t> removed(idx.edges.size(), 0);
  for (const Plaquette& p : polymer) {
    int32_t id = idx.id_of(dual(p));
    if (id < 0) throw std::invalid_argument("polymer leaves the analysis box");
    removed[id] = 1;
  }

  int64_t n = box.vertex_count();
  UnionFind uf(n);
  for (size_t i = 0; i < idx.edges.size(); ++i) {
    if (removed[i]) continue;
    uf.unite(static_cast<int32_t>(box.index_of(idx.edges[i].v)),
             static_cast<int32_t>(box.index_of(idx.edges[i].other())));
  }
  if (kind == NormKind::wired_norm) {
    int32_t hub = -1;
    for (int64_t i = 0; i < n; ++i) {
      if (!box.on_boundary(box.vertex_at(i))) continue;
      if (hub < 0)
        hub = static_cast<int32_t>(i);
      else
        uf.unite(hub, static_cast<int32_t>(i));
    }
  }
  std::vector<uint8_t> seen(n, 0);
  int64_t kappa = 0;
  for (int64_t i = 0; i < n; ++i) {
    int32_t r = uf.find(static_cast<int32_t>(i));
    if (!seen[r]) {
      seen[r] = 1;
      ++kappa;
    }
  }
  return kappa - 1;
}

double activity_psi(const std::vector<Plaquette>& polymer, const RCParams& params, NormKind kind,
                    const LatticeSpec& spec) {
  params.validate();
  int64_t norm = polymer_norm(polymer, kind, spec);
  return std::pow((1.0 - params.p) / params.p, static_cast<double>(polymer.size())) *
         std::pow(params.q, static_cast<double>(norm));
}

std::vector<int64_t> PlaquetteCounts::totals() const {
  std::vector<int64_t> out;
  for (const auto& row : by_stars) out.push_back(row[0] + row[1] + row[2]);
  return out;
}

PlaquetteCounts count_plaquette_polymers(int max_size) {
  if (max_size < 2 || max_size > kPlaquettePolymerCap)
    throw std::invalid_argument("polymer size budget must lie in [2, 8]");
  LatticeSpec spec{3, 2 * (max_size + 1) + 1, true};
  PlaquetteRegion region(spec);
  int32_t aid = region.idx.id_of(Edge{Vec::zero(3), 0});
  if (aid < 0) throw std::logic_error("central plaquette missing from the region");

  PlaquetteCounts counts;
  counts.max_size = max_size;
  counts.by_stars.assign(max_size, {0, 0, 0});
  auto visit = [&](const std::vector<int32_t>& pool, int stars) {
    if (stars > 2) throw std::logic_error("star count exceeds the tracked range");
    ++counts.by_stars[pool.size() - 1][stars];
  };
  PolymerWalker<decltype(visit)> walker(region, max_size, visit);
  walker.run(aid);
  return counts;
}

LatticeKpReport lattice_kp_check(const PlaquetteCounts& counts, const RCParams& params,
                                 double c8) {
  params.validate();
  if (!(c8 > 0)) throw std::invalid_argument("c8 must be positive");
  if (counts.max_size < 2 || counts.by_stars.size() != static_cast<size_t>(counts.max_size))
    throw std::invalid_argument("polymer counts are incomplete");

  LatticeKpReport report;
  report.params = params;
  report.c8 = c8;
  report.max_size = counts.max_size;
  report.n_k = counts.totals();

  double ratio = (1.0 - params.p) / params.p;
  double sum = 0;
  for (int k = 1; k <= counts.max_size; ++k) {
    const auto& row = counts.by_stars[k - 1];
    double weighted = 0;
    for (int st = 0; st <= 2; ++st)
      weighted += static_cast<double>(row[st]) * std::pow(params.q, st);
    double a_k = std::pow(ratio, k) * weighted;
    report.a_k.push_back(a_k);
    report.terms.push_back(std::exp(c8 * k) * a_k);
    sum += report.terms.back();
  }
  report.kp_sum = 13.0 * sum;
  report.pass = report.kp_sum <= c8;
  report.c3_hat = static_cast<double>(report.n_k[counts.max_size - 1]) /
                  static_cast<double>(report.n_k[counts.max_size - 2]);
  report.p0 = p0_threshold(params.q, report.c3_hat, c8);
  return report;
}

}  // namespace oz

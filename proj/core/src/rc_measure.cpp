#include "ozlab/rc_measure.hpp"

#include <cmath>
#include <stdexcept>
#include <unordered_map>

#include "ozlab/rng.hpp"
#include "ozlab/union_find.hpp"

namespace oz {

void RCParams::validate() const {
  if (!(q >= 1.0)) throw std::invalid_argument("cluster weight q must be >= 1");
  if (!(p > 0.0) || !(p < 1.0)) throw std::invalid_argument("edge density p must be in (0,1)");
}

BoundaryCondition BoundaryCondition::free_() { return BoundaryCondition{}; }

BoundaryCondition BoundaryCondition::wired() {
  BoundaryCondition bc;
  bc.kind = Kind::wired_bc;
  return bc;
}

BoundaryCondition BoundaryCondition::pinned(std::vector<Edge> open_shell_edges) {
  BoundaryCondition bc;
  bc.kind = Kind::pinned_bc;
  bc.pinned_open = std::move(open_shell_edges);
  return bc;
}

std::string BoundaryCondition::name() const {
  switch (kind) {
    case Kind::free_bc: return "free";
    case Kind::wired_bc: return "wired";
    case Kind::pinned_bc: return "pinned";
  }
  return "?";
}

int BondConfig::count_open() const {
  int n = 0;
  for (uint8_t b : open) n += b;
  return n;
}

BondConfig BondConfig::from_mask(uint64_t mask, int n_edges) {
  BondConfig c;
  c.open.resize(n_edges);
  for (int i = 0; i < n_edges; ++i) c.open[i] = (mask >> i) & 1u;
  return c;
}

uint64_t BondConfig::to_mask() const {
  if (open.size() > 64) throw std::invalid_argument("configuration too large for mask");
  uint64_t m = 0;
  for (size_t i = 0; i < open.size(); ++i)
    if (open[i]) m |= (1ULL << i);
  return m;
}

static void check_box(const Box& box) {
  if (box.d < 1 || box.d > kMaxDim) throw std::invalid_argument("box dimension out of range");
  for (int a = 0; a < box.d; ++a)
    if (box.dims[a] < 1) throw std::invalid_argument("box has an empty extent");
}

QuotientGraph::QuotientGraph(const LatticeSpec& spec, const BoundaryCondition& bc)
    : QuotientGraph(spec.box(), bc) {}

QuotientGraph::QuotientGraph(const Box& box, const BoundaryCondition& bc) {
  check_box(box);
  EdgeIndexer idx(box);
  int64_t nv = box.vertex_count();
  vertex_node.assign(nv, -1);
  if (bc.kind == BoundaryCondition::Kind::wired_bc) {
    bool any_boundary = false;
    int32_t next = 1;
    for (int64_t i = 0; i < nv; ++i) {
      if (box.on_boundary(box.vertex_at(i))) {
        vertex_node[i] = 0;
        any_boundary = true;
      } else {
        vertex_node[i] = next++;
      }
    }
    if (!any_boundary) {
      for (int64_t i = 0; i < nv; ++i) vertex_node[i] -= 1;
      next -= 1;
    }
    n_nodes = next;
  } else {
    for (int64_t i = 0; i < nv; ++i) vertex_node[i] = static_cast<int32_t>(i);
    n_nodes = static_cast<int32_t>(nv);
  }

  edge_nodes.reserve(idx.edges.size());
  for (const Edge& e : idx.edges)
    edge_nodes.push_back({vertex_node[box.index_of(e.v)], vertex_node[box.index_of(e.other())]});

  if (bc.kind == BoundaryCondition::Kind::pinned_bc) {
    std::unordered_map<Vec, int32_t, VecHash> shell;
    for (const Edge& e : bc.pinned_open) {
      bool v_in = box.contains(e.v);
      bool o_in = box.contains(e.other());
      if (v_in == o_in)
        throw std::invalid_argument("pinned edge " + to_string(e) +
                                    " is not on the one-edge outer shell");
      Vec outside = v_in ? e.other() : e.v;
      Vec inside = v_in ? e.v : e.other();
      auto it = shell.find(outside);
      int32_t node;
      if (it == shell.end()) {
        node = n_nodes++;
        shell.emplace(outside, node);
      } else {
        node = it->second;
      }
      fixed_links.push_back({node, vertex_node[box.index_of(inside)]});
    }
  }
}

int QuotientGraph::kappa_of(const BondConfig& config, UnionFind& uf,
                            std::vector<uint8_t>& seen) const {
  uf.reset();
  for (size_t i = 0; i < edge_nodes.size(); ++i)
    if (config.open[i]) uf.unite(edge_nodes[i].first, edge_nodes[i].second);
  for (const auto& [a, b] : fixed_links) uf.unite(a, b);
  std::fill(seen.begin(), seen.end(), 0);
  int count = 0;
  for (int32_t node : vertex_node) {
    int32_t r = uf.find(node);
    if (!seen[r]) {
      seen[r] = 1;
      ++count;
    }
  }
  return count;
}

int kappa(const BondConfig& config, const Box& box, const BoundaryCondition& bc) {
  if (config.open.size() != edges_of_box(box).size())
    throw std::invalid_argument("configuration size does not match box edge count");
  QuotientGraph g(box, bc);
  UnionFind uf(g.n_nodes);
  std::vector<uint8_t> seen(g.n_nodes);
  return g.kappa_of(config, uf, seen);
}

int kappa(const BondConfig& config, const LatticeSpec& spec, const BoundaryCondition& bc) {
  return kappa(config, spec.box(), bc);
}

double rc_weight(const BondConfig& config, const Box& box, const RCParams& params,
                 const BoundaryCondition& bc) {
  params.validate();
  int open = config.count_open();
  int closed = static_cast<int>(config.open.size()) - open;
  int k = kappa(config, box, bc);
  double w = 1.0;
  for (int i = 0; i < open; ++i) w *= params.p;
  for (int i = 0; i < closed; ++i) w *= (1.0 - params.p);
  for (int i = 0; i < k; ++i) w *= params.q;
  return w;
}

double rc_weight(const BondConfig& config, const LatticeSpec& spec, const RCParams& params,
                 const BoundaryCondition& bc) {
  return rc_weight(config, spec.box(), params, bc);
}

void enumerate_measure(const Box& box, const RCParams& params, const BoundaryCondition& bc,
                       const std::function<void(const BondConfig&, double)>& visit) {
  params.validate();
  EdgeIndexer idx(box);
  int m = idx.edge_count();
  if (m > kEnumEdgeCap)
    throw std::invalid_argument("box has " + std::to_string(m) + " edges; enumeration cap is " +
                                std::to_string(kEnumEdgeCap));
  QuotientGraph g(box, bc);
  UnionFind uf(g.n_nodes);
  std::vector<uint8_t> seen(g.n_nodes);

  // log-free weights: powers of p, 1-p, q are precomputed
  std::vector<double> pow_p(m + 1, 1.0), pow_1p(m + 1, 1.0);
  for (int i = 1; i <= m; ++i) {
    pow_p[i] = pow_p[i - 1] * params.p;
    pow_1p[i] = pow_1p[i - 1] * (1.0 - params.p);
  }
  std::vector<double> pow_q(g.n_nodes + 2, 1.0);
  for (size_t i = 1; i < pow_q.size(); ++i) pow_q[i] = pow_q[i - 1] * params.q;

  BondConfig config;
  config.open.assign(m, 0);
  uint64_t total = 1ULL << m;
  for (uint64_t mask = 0; mask < total; ++mask) {
    int open = 0;
    for (int i = 0; i < m; ++i) {
      uint8_t bit = (mask >> i) & 1u;
      config.open[i] = bit;
      open += bit;
    }
    int k = g.kappa_of(config, uf, seen);
    visit(config, pow_p[open] * pow_1p[m - open] * pow_q[k]);
  }
}

void enumerate_measure(const LatticeSpec& spec, const RCParams& params,
                       const BoundaryCondition& bc,
                       const std::function<void(const BondConfig&, double)>& visit) {
  enumerate_measure(spec.box(), params, bc, visit);
}

double exact_probability(const Event& event, const Box& box, const RCParams& params,
                         const BoundaryCondition& bc) {
  double num = 0.0, den = 0.0;
  enumerate_measure(box, params, bc, [&](const BondConfig& c, double w) {
    den += w;
    if (event(c)) num += w;
  });
  return num / den;
}

double exact_probability(const Event& event, const LatticeSpec& spec, const RCParams& params,
                         const BoundaryCondition& bc) {
  return exact_probability(event, spec.box(), params, bc);
}

std::optional<std::pair<BondConfig, BondConfig>> increasing_violation(
    const Event& event, const Box& box) {
  int m = static_cast<int>(edges_of_box(box).size());
  if (m > 20) throw std::invalid_argument("monotonicity check capped at 20 edges");
  uint64_t total = 1ULL << m;
  for (uint64_t mask = 0; mask < total; ++mask) {
    BondConfig lower = BondConfig::from_mask(mask, m);
    if (!event(lower)) continue;
    for (int i = 0; i < m; ++i) {
      if ((mask >> i) & 1u) continue;
      BondConfig upper = BondConfig::from_mask(mask | (1ULL << i), m);
      if (!event(upper)) return std::make_pair(lower, upper);
    }
  }
  return std::nullopt;
}

std::optional<std::pair<BondConfig, BondConfig>> increasing_violation(
    const Event& event, const LatticeSpec& spec) {
  return increasing_violation(event, spec.box());
}

double lower_bernoulli_p(const RCParams& params) {
  return params.p / (params.p + params.q * (1.0 - params.p));
}

static void require_increasing(const Event& event, const Box& box, const char* label) {
  if (auto w = increasing_violation(event, box)) {
    throw std::invalid_argument(std::string(label) +
                                " is not increasing: adding an edge left the event");
  }
}

OrderChainReport sdi_chain_check(const Box& box, const RCParams& params, const Event& event,
                                 const std::vector<BoundaryCondition>& pinned, double tol) {
  params.validate();
  require_increasing(event, box, "event");

  RCParams lower{1.0, lower_bernoulli_p(params)};
  RCParams upper{1.0, params.p};

  OrderChainReport r;
  r.p_bernoulli_lower = exact_probability(event, box, lower, BoundaryCondition::free_());
  r.p_free = exact_probability(event, box, params, BoundaryCondition::free_());
  r.p_wired = exact_probability(event, box, params, BoundaryCondition::wired());
  r.p_bernoulli_upper = exact_probability(event, box, upper, BoundaryCondition::free_());
  for (const auto& bc : pinned) {
    if (bc.kind != BoundaryCondition::Kind::pinned_bc)
      throw std::invalid_argument("sdi chain extras must be pinned boundary conditions");
    r.p_pinned.push_back(exact_probability(event, box, params, bc));
  }

  double margin = r.p_free - r.p_bernoulli_lower;
  margin = std::min(margin, r.p_wired - r.p_free);
  margin = std::min(margin, r.p_bernoulli_upper - r.p_wired);
  for (double pp : r.p_pinned) {
    margin = std::min(margin, pp - r.p_free);
    margin = std::min(margin, r.p_wired - pp);
  }
  r.min_margin = margin;
  r.ok = margin >= -tol;
  return r;
}

OrderChainReport sdi_chain_check(const LatticeSpec& spec, const RCParams& params,
                                 const Event& event,
                                 const std::vector<BoundaryCondition>& pinned, double tol) {
  return sdi_chain_check(spec.box(), params, event, pinned, tol);
}

FkgReport fkg_check(const Box& box, const RCParams& params, const BoundaryCondition& bc,
                    const Event& f, const Event& g, double tol) {
  params.validate();
  require_increasing(f, box, "first event");
  require_increasing(g, box, "second event");
  FkgReport r;
  double num_f = 0, num_g = 0, num_fg = 0, den = 0;
  enumerate_measure(box, params, bc, [&](const BondConfig& c, double w) {
    den += w;
    bool bf = f(c), bg = g(c);
    if (bf) num_f += w;
    if (bg) num_g += w;
    if (bf && bg) num_fg += w;
  });
  r.p_f = num_f / den;
  r.p_g = num_g / den;
  r.p_fg = num_fg / den;
  r.margin = r.p_fg - r.p_f * r.p_g;
  r.ok = r.margin >= -tol;
  return r;
}

FkgReport fkg_check(const LatticeSpec& spec, const RCParams& params,
                    const BoundaryCondition& bc, const Event& f, const Event& g, double tol) {
  return fkg_check(spec.box(), params, bc, f, g, tol);
}

Event random_increasing_event(int n_edges, Rng& rng, int clauses) {
  if (n_edges < 1 || n_edges > 63) throw std::invalid_argument("edge count out of range");
  if (clauses < 1) throw std::invalid_argument("need at least one clause");
  std::vector<uint64_t> masks(static_cast<size_t>(clauses), 0);
  for (auto& m : masks) {
    int size = 1 + static_cast<int>(rng.below(static_cast<uint64_t>(n_edges)));
    while (static_cast<int>(__builtin_popcountll(m)) < size)
      m |= uint64_t{1} << rng.below(static_cast<uint64_t>(n_edges));
  }
  return [masks](const BondConfig& c) {
    uint64_t open = c.to_mask();
    for (uint64_t m : masks)
      if ((open & m) == m) return true;
    return false;
  };
}

}  // namespace oz

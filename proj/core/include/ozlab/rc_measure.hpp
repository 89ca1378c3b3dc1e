#pragma once
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "ozlab/geometry.hpp"

namespace oz {

class Rng;

// Random-cluster parameters. q >= 1 so the FKG machinery applies; q = 1 is
// ordinary Bernoulli percolation.
struct RCParams {
  double q = 1.0;
  double p = 0.5;
  void validate() const;  // throws std::invalid_argument
};

// Boundary conditions on the box graph:
//   free   - the box graph alone
//   wired  - all box-boundary vertices identified into one super vertex
//   pinned - a declared configuration on the one-edge outer shell (edges
//            with exactly one endpoint inside); open shell edges are listed.
struct BoundaryCondition {
  enum class Kind { free_bc, wired_bc, pinned_bc };
  Kind kind = Kind::free_bc;
  std::vector<Edge> pinned_open;

  static BoundaryCondition free_();
  static BoundaryCondition wired();
  static BoundaryCondition pinned(std::vector<Edge> open_shell_edges);
  std::string name() const;
};

// Open/closed flags for the edges of a box, in edges_of_box order.
struct BondConfig {
  std::vector<uint8_t> open;

  int count_open() const;
  static BondConfig from_mask(uint64_t mask, int n_edges);
  uint64_t to_mask() const;  // requires <= 64 edges
};

using Event = std::function<bool(const BondConfig&)>;

// Node graph after applying the boundary condition: every box vertex gets a
// node (boundary vertices collapse to one node under wired), pinned shell
// vertices get extra nodes tied to the box by the declared open shell edges.
// kappa counts components holding at least one box vertex.
struct QuotientGraph {
  int n_nodes = 0;
  std::vector<int32_t> vertex_node;                      // per box vertex index
  std::vector<std::pair<int32_t, int32_t>> edge_nodes;   // per box edge
  std::vector<std::pair<int32_t, int32_t>> fixed_links;  // pinned shell edges

  QuotientGraph(const Box& box, const BoundaryCondition& bc);
  QuotientGraph(const LatticeSpec& spec, const BoundaryCondition& bc);
  int kappa_of(const BondConfig& config, struct UnionFind& uf,
               std::vector<uint8_t>& seen) const;
};

// Number of open components meeting the box, under the given boundary
// condition. Pinned shell edges must lie on the one-edge shell.
// Every entry point takes either a cubic LatticeSpec or an arbitrary Box.
int kappa(const BondConfig& config, const Box& box, const BoundaryCondition& bc);
int kappa(const BondConfig& config, const LatticeSpec& spec, const BoundaryCondition& bc);

// Unnormalized density p^{#open} (1-p)^{#closed} q^{kappa}.
double rc_weight(const BondConfig& config, const Box& box, const RCParams& params,
                 const BoundaryCondition& bc);
double rc_weight(const BondConfig& config, const LatticeSpec& spec, const RCParams& params,
                 const BoundaryCondition& bc);

// Streams every configuration of the box with its unnormalized weight.
// Refuses boxes with more than kEnumEdgeCap edges.
inline constexpr int kEnumEdgeCap = 24;
void enumerate_measure(const Box& box, const RCParams& params, const BoundaryCondition& bc,
                       const std::function<void(const BondConfig&, double)>& visit);
void enumerate_measure(const LatticeSpec& spec, const RCParams& params,
                       const BoundaryCondition& bc,
                       const std::function<void(const BondConfig&, double)>& visit);

// Exact probability of an event by full enumeration.
double exact_probability(const Event& event, const Box& box, const RCParams& params,
                         const BoundaryCondition& bc);
double exact_probability(const Event& event, const LatticeSpec& spec, const RCParams& params,
                         const BoundaryCondition& bc);

// Checks monotonicity of an event by exhaustive single-edge flips; returns
// a violating (lower, upper) pair when the event is not increasing.
std::optional<std::pair<BondConfig, BondConfig>> increasing_violation(
    const Event& event, const Box& box);
std::optional<std::pair<BondConfig, BondConfig>> increasing_violation(
    const Event& event, const LatticeSpec& spec);

// Union of `clauses` random up-sets: the event holds when some clause has
// all its edges open. Increasing by construction.
Event random_increasing_event(int n_edges, Rng& rng, int clauses = 2);

// p_e(q) = p / (p + q(1-p)): the Bernoulli density that is stochastically
// below the free random-cluster measure for q >= 1.
double lower_bernoulli_p(const RCParams& params);

// Exact stochastic-domination chain for one increasing event:
//   P_{p(q)} <= P^f <= P^pi <= P^w <= P_p
// Bernoulli ends computed with q = 1. Pinned entries are optional extras.
struct OrderChainReport {
  double p_bernoulli_lower = 0;
  double p_free = 0;
  std::vector<double> p_pinned;
  double p_wired = 0;
  double p_bernoulli_upper = 0;
  double min_margin = 0;  // smallest gap in the chain (>= -tol when ok)
  bool ok = false;
};

OrderChainReport sdi_chain_check(const Box& box, const RCParams& params, const Event& event,
                                 const std::vector<BoundaryCondition>& pinned = {},
                                 double tol = 1e-12);
OrderChainReport sdi_chain_check(const LatticeSpec& spec, const RCParams& params,
                                 const Event& event,
                                 const std::vector<BoundaryCondition>& pinned = {},
                                 double tol = 1e-12);

// FKG product bound P(fg) >= P(f) P(g) for one pair of increasing events.
struct FkgReport {
  double p_f = 0, p_g = 0, p_fg = 0;
  double margin = 0;  // p_fg - p_f * p_g
  bool ok = false;
};

FkgReport fkg_check(const Box& box, const RCParams& params, const BoundaryCondition& bc,
                    const Event& f, const Event& g, double tol = 1e-12);
FkgReport fkg_check(const LatticeSpec& spec, const RCParams& params,
                    const BoundaryCondition& bc, const Event& f, const Event& g,
                    double tol = 1e-12);

}  // namespace oz

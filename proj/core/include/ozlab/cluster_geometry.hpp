#pragma once
#include <optional>
#include <string>
#include <vector>

#include "ozlab/geometry.hpp"
#include "ozlab/rc_measure.hpp"

namespace oz {

// Open cluster as a standalone geometric object. Vertices and edges are kept
// sorted so set comparisons are cheap.
struct Cluster {
  std::vector<Vec> vertices;
  std::vector<Edge> edges;
  bool finite = false;  // true when no vertex sits on the analysis box boundary

  bool contains(const Vec& v) const;
  bool has_edge(const Edge& e) const;
};

// Throws when the spanned graph is disconnected or an edge endpoint is
// missing from the vertex list.
void validate_cluster(const Cluster& cluster);

struct Components {
  Box box;
  std::vector<int32_t> label;  // per box vertex index, cluster id
  std::vector<Cluster> clusters;

  const Cluster& at(const Vec& v) const;
};

// Union-find labeling of the open configuration; isolated vertices form
// singleton clusters.
Components components(const BondConfig& config, const LatticeSpec& spec);

struct DualSurface {
  std::vector<Plaquette> plaquettes;  // sorted
};

struct BoundaryAndSurface {
  std::vector<Edge> boundary;  // edges from the filled cluster to its outside
  DualSurface surface;         // their dual plaquettes
};

// External boundary of the filled cluster: complement pockets enclosed by
// the cluster are absorbed before the boundary is read off. Rejects
// clusters that touch the analysis box boundary.
BoundaryAndSurface external_boundary_and_surface(const Cluster& cluster, const LatticeSpec& spec);

// Connected components of a plaquette set under shared-(d-2)-cell adjacency;
// returns groups of indices into the input.
std::vector<std::vector<int32_t>> plaquette_components(const std::vector<Plaquette>& plaquettes);

struct PhiPsi {
  int64_t phi = 0;  // minimal dual-surface size over clusters joining 0 and x
  int64_t psi = 0;  // minimal open-edge count among surface minimizers
};

// Exhaustive branch-and-bound reference search; refuses when the minimal
// path no longer fits the vertex budget. For pinning constants, not scale.
PhiPsi phi_psi_oracle(const Vec& x, const LatticeSpec& spec, int radius_cap = 2);

// Minimal number of surface plaquettes inside the strip of heights
// [0, <t,x>] over clusters crossing that strip. Axis-aligned t only.
int64_t phi_t_oracle(const Vec& x, const RVec& t, const LatticeSpec& spec, int budget = 13);

// Strip restriction: vertices with heights between those of x and y, then
// the connected component of x. Throws when y is cut off.
Cluster restrict_to_strip(const Cluster& cluster, const RVec& t, const Vec& x, const Vec& y);

struct BreakPointData {
  Vec u;                          // step axis: unit vector maximizing <t,.>
  std::vector<Vec> break_points;  // increasing along t
  std::vector<Edge> t_bonds;      // {b, b+u} with both ends break points
  std::vector<Vec> cone_points;   // break points with both cluster halves in cones
  std::vector<Edge> cone_bonds;   // t-bonds with both ends cone points
  double eps = 0;
};

// Break points of a strip-confined cluster between x and y: interior
// heights only, and the height window [b-u, b+u] meets the cluster in
// exactly {b-u, b, b+u}.
BreakPointData break_points(const Cluster& cluster, const RVec& t, const Vec& x, const Vec& y);

// Break points whose forward cluster half lies in z + C_eps(t) and backward
// half in z - C_eps(t); fills the cone fields on top of break_points.
BreakPointData cone_points(const Cluster& cluster, const RVec& t, double eps, const Vec& x,
                           const Vec& y);

struct IrreducibleDecomposition {
  Cluster backward;
  std::vector<Cluster> interior;   // between consecutive cone bonds
  Cluster forward;
  std::vector<Edge> cut_bonds;     // the cone bonds removed by the cuts
  std::vector<Vec> displacements;  // b_{i+1} - b_i across interior pieces
  double eps = 0;
  bool trivial = false;            // no cone bond: backward = cluster, forward empty
};

// Cuts the cluster at every cone bond. Pieces partition the vertices; the
// cluster edge set is the disjoint union of piece edges and cut bonds.
IrreducibleDecomposition irreducible_decomposition(const Cluster& cluster, const RVec& t,
                                                   double eps, const Vec& x, const Vec& y);

// Exact reconstruction check: piece vertices tile the cluster and piece
// edges plus cut bonds give back the edge set.
bool reconstructs(const IrreducibleDecomposition& decomp, const Cluster& cluster);

// Standalone irreducibility probes used on decomposition pieces: the piece
// sits inside the endpoint cones and carries no strictly interior cone
// point.
bool piece_irreducible(const Cluster& piece, const RVec& t, double eps, const Vec& x,
                       const Vec& y);
bool backward_irreducible(const Cluster& piece, const RVec& t, double eps, const Vec& y);
bool forward_irreducible(const Cluster& piece, const RVec& t, double eps, const Vec& x);

struct SlabInfo {
  double lo = 0, hi = 0;  // height range along normalized t
  int64_t size = 0;       // plaquettes assigned to the slab
  int n_components = 0;
  int n_crossings = 0;    // components spanning the slab within margin 1
  bool good = false;      // one component, one crossing, size < 2 * reference
};

struct MarkSequences {
  std::vector<int64_t> m_plus, r_plus;    // forward sweep marks
  std::vector<int64_t> m_minus, r_minus;  // backward sweep marks
  int64_t common = 0;                     // good slabs marked in both sweeps
};

struct SlabReport {
  RVec t;  // normalized
  Vec x;
  int N = 0;
  double min_crossing_ref = 0;
  std::vector<SlabInfo> slabs;
  std::vector<std::vector<int32_t>> slab_plaquettes;  // indices into surface
  DualSurface surface;
  int64_t good_count = 0;
  int64_t bad_count = 0;
  double delta = 0, M = 0, eps = 0;  // context recorded by callers
  MarkSequences marks;
  std::vector<Vec> correct;
};

// Slices the surface into floor(|x|/N) slabs along t and labels each one.
// A slab is good when its surface piece is a single crossing of size below
// twice the reference crossing size.
SlabReport classify_slabs(const DualSurface& surface, const RVec& t, int N, const Vec& x,
                          double min_crossing_ref);
// Same, with the reference taken from phi_t_oracle at displacement floor(N x_hat).
SlabReport classify_slabs(const DualSurface& surface, const RVec& t, int N, const Vec& x,
                          const LatticeSpec& spec);

// Alternating mark/overflow sweeps over slab sizes: a fresh mark opens at a
// good slab and the overflow index is the first window whose total surface
// exceeds M * N * length. Fills report.marks and returns it.
MarkSequences mark_sequences(SlabReport& report, double M);

// Cluster points of good slabs whose trailing and leading block hulls fit
// in the respective cones; ordered by height. Fills report.correct.
std::vector<Vec> correct_points(SlabReport& report, const Cluster& cluster, const RVec& t,
                                double eps);

// One cluster per line, vertices and edges as integer arrays.
void dump_clusters_jsonl(const std::string& path, const std::vector<Cluster>& clusters);
std::vector<Cluster> load_clusters_jsonl(const std::string& path);

}  // namespace oz

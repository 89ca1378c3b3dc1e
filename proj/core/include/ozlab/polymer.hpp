#pragma once
#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "ozlab/geometry.hpp"
#include "ozlab/rc_measure.hpp"

namespace oz {

inline constexpr int kPartitionCap = 20;        // direct partition sums
inline constexpr int kClusterWeightCap = 12;    // inclusion-exclusion weights
inline constexpr int kPlaquettePolymerCap = 8;  // lattice enumeration budget

// Abstract polymer model over at most 32 polymers; the incompatibility
// relation is stored as one bitmask per polymer with the diagonal set.
struct PolymerModel {
  std::vector<int64_t> size;
  std::vector<double> activity;
  std::vector<uint32_t> incompat;

  int n() const { return static_cast<int>(size.size()); }
  bool compatible(int a, int b) const { return ((incompat[a] >> b) & 1u) == 0; }
  void validate() const;  // throws std::invalid_argument
};

PolymerModel load_polymer_model(const std::string& path);
void save_polymer_model(const PolymerModel& model, const std::string& path);

// Finite collection of pairwise compatible polymers.
struct Contour {
  uint32_t members = 0;
};

bool pairwise_compatible(const PolymerModel& model, uint32_t members);
// Connected in the incompatibility graph, i.e. not splittable into two
// mutually compatible nonempty parts.
bool cluster_connected(const PolymerModel& model, uint32_t members);

// Sum of contour weights prod(activity) over compatible collections inside
// the subset; the empty contour contributes 1.
double partition_direct(const PolymerModel& model, uint32_t subset);

struct ClusterWeight {
  uint32_t members = 0;
  double theta = 0;
};

struct ClusterExpansion {
  std::vector<ClusterWeight> clusters;  // every nonempty subset of the input
  double log_z = 0;
};

// Inclusion-exclusion weights: theta(S') = sum over T subset S' of
// (-1)^{|S'\T|} log Z(T); their total equals log Z(S) identically.
ClusterExpansion cluster_logZ(const PolymerModel& model, uint32_t subset);

struct KpReport {
  bool pass = false;
  double worst_margin = 0;
  std::vector<double> sums;     // per polymer, over incompatible partners
  std::vector<double> margins;  // a(s) - sum(s)
};

// Convergence condition: for every polymer s,
//   sum over s' incompatible with s of e^{a(s') + (c8/2) ell(s')} |z(s')| <= a(s).
// ell may be empty (treated as zero).
KpReport kp_check(const PolymerModel& model, const std::vector<double>& a,
                  const std::vector<double>& ell, double c8 = 0);

double p0_threshold(double q, double c3, double c8);

// All connected plaquette sets through the anchor, each exactly once, with
// primal edges inside the box. Budget: max_size <= 8.
std::vector<std::vector<Plaquette>> enumerate_plaquette_polymers(const LatticeSpec& spec,
                                                                 const Plaquette& anchor,
                                                                 int max_size);

enum class NormKind { free_norm, wired_norm };

// kappa_#(s) - 1: components after deleting the polymer's primal edges,
// counted in the whole box (free) or with the boundary of a margin box
// identified as one node (wired).
int64_t polymer_norm(const std::vector<Plaquette>& polymer, NormKind kind,
                     const LatticeSpec& spec, int margin = 3);

double activity_psi(const std::vector<Plaquette>& polymer, const RCParams& params, NormKind kind,
                    const LatticeSpec& spec);

// Anchored polymer counts in d = 3 (12-regular plaquette adjacency),
// bucketed by the number of fully surrounded vertices; for sizes <= 8 that
// bucket equals the wired norm exactly.
struct PlaquetteCounts {
  int max_size = 0;
  std::vector<std::array<int64_t, 3>> by_stars;  // index k-1
  std::vector<int64_t> totals() const;
};

PlaquetteCounts count_plaquette_polymers(int max_size);

struct LatticeKpReport {
  RCParams params;
  double c8 = 0;
  int max_size = 0;
  std::vector<int64_t> n_k;
  std::vector<double> a_k;    // activity sums over anchored polymers by size
  std::vector<double> terms;  // e^{c8 k} a_k
  double c3_hat = 0;
  double kp_sum = 0;  // 13 * sum of terms
  double p0 = 0;
  bool pass = false;
};

LatticeKpReport lattice_kp_check(const PlaquetteCounts& counts, const RCParams& params,
                                 double c8);

}  // namespace oz

#pragma once
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "ozlab/cluster_geometry.hpp"
#include "ozlab/rc_measure.hpp"
#include "ozlab/rng.hpp"

namespace oz {

// Monte Carlo estimate of the finite two-point function: the chance that 0
// and x share a cluster staying clear of the simulation-box boundary. The
// boundary-avoidance cutoff stands in for finiteness, so the box must keep
// spare layers around both endpoints.
struct ConnectivityRow {
  Vec x;
  long samples = 0;
  long hits = 0;
  double estimate = 0;
  double stderr_ = 0;
  int box_side = 0;
  std::string cutoff = "avoid-boundary";
};

inline constexpr int kConnectivityMargin = 8;

// Centered box with side 2(|x|_inf + margin) + 1.
LatticeSpec connectivity_box(const Vec& x, int margin = kConnectivityMargin);

// q = 1 runs independent lazy cluster growth from the origin; other q run
// the cluster dynamics chain and read the event every `thinning` sweeps.
// The box must satisfy side >= 2 |x|_inf + margin; shrink the margin only
// for exact cross-checks on enumerable boxes.
ConnectivityRow finite_two_point_mc(const Vec& x, const LatticeSpec& spec,
                                    const RCParams& params, const BoundaryCondition& bc,
                                    long n_samples, uint64_t seed, long thinning = 2,
                                    long burnin = 200, int margin = kConnectivityMargin);

// Least-squares decay rate along one direction: -log g(r) = c + tau r
// (+ alpha log r with alpha held fixed when nonzero). Radii with vanishing
// estimates are dropped; at least four must survive.
struct TauFit {
  Vec direction;
  double tau = 0;
  double tau_stderr = 0;  // jackknife over retained radii
  double intercept = 0;
  double alpha = 0;
  std::vector<int64_t> radii;
  std::vector<double> neg_log_g;
};

TauFit tau_fit(const Vec& direction, const std::vector<int64_t>& radii,
               const std::vector<double>& estimates, double alpha = 0.0);

// Direction grid with decay rates and the polar body
//   K = { w : <w, dir_i> <= tau_i for all i },
// whose vertices certify convexity through the support function. Structured
// grids (colatitude x azimuth for d = 3, uniform angles for d = 2) also
// carry the dimensions needed for curvature differencing.
struct EquiDecaySurface {
  int d = 0;
  int n_theta = 0;  // 0 when the direction set is unstructured
  int n_phi = 0;
  std::vector<RVec> dirs;
  std::vector<double> tau;
  std::vector<double> radius;  // 1 / tau
  std::vector<RVec> polar_vertices;
};

// Requires at least 2d directions spanning R^d; throws when the set is
// degenerate or the polar body fails to close up. Vertex enumeration visits
// all d-subsets, so keep direction counts modest when with_polar is set.
EquiDecaySurface equidecay_surface(const std::vector<RVec>& dirs,
                                   const std::vector<double>& tau, bool with_polar = true);

// Structured grid built from a decay-rate evaluator; d = 2 uses n_theta
// uniform angles (n_phi ignored), d = 3 excludes the poles.
EquiDecaySurface equidecay_surface_grid(int d, int n_theta, int n_phi,
                                        const std::function<double(const RVec&)>& tau_of,
                                        bool with_polar = true);

std::vector<RVec> sphere_grid(int n_theta, int n_phi);
std::vector<RVec> circle_grid(int n);

// Refined icosahedron vertices projected onto S^2: 12, 42, 162 directions
// at levels 0, 1, 2. Well spread for polar bodies; not a differencing grid.
std::vector<RVec> icosahedral_grid(int level);

// max over polar vertices of <w, y>; throws when the polar was not built.
double support_function(const EquiDecaySurface& s, const RVec& y);

// Convexity certificate: the polar support function reproduces tau on the
// grid exactly when tau extends to a convex norm; positive gaps name the
// offending directions. Curvature comes from central differences of the
// radial graph on structured grids (Gaussian curvature for d = 3, plane
// curve curvature for d = 2) at interior grid points.
struct CurvatureReport {
  bool convexity_evaluated = false;
  bool convex = false;
  double max_gap = 0;
  std::vector<int> gap_witness;

  bool curvature_evaluated = false;
  bool positively_curved = false;
  double min_curvature = 0;
  double max_curvature = 0;
  std::vector<int> grid_index;  // surface index per curvature sample
  std::vector<double> curvature;
};

CurvatureReport convexity_curvature_check(const EquiDecaySurface& s, double gap_tol = 1e-7);

// Exact supermultiplicativity of connection probabilities on a small box:
// g(base, y) >= g(base, x) g(x, y) by enumeration, base defaulting to the
// origin. With `cutoff` the events also demand the shared cluster avoid the
// box boundary; that variant is reported but carries no product bound.
struct SupermultPair {
  Vec x, y;
  double g_total = 0;
  double g_first = 0;
  double g_second = 0;
  double margin = 0;  // g_total - g_first * g_second
};

struct SupermultReport {
  bool ok = false;
  bool cutoff = false;
  double min_margin = 0;
  std::vector<SupermultPair> pairs;
};

SupermultReport supermultiplicativity_check(const std::vector<std::pair<Vec, Vec>>& pairs,
                                            const LatticeSpec& spec, const RCParams& params,
                                            const BoundaryCondition& bc, bool cutoff = false,
                                            double tol = 1e-12,
                                            std::optional<Vec> base = std::nullopt);

// Tail of the dual-surface size over finite connections, Bernoulli only:
// for each x, the conditional chance that |S| exceeds (1 + delta) phi(x),
// regressed against phi(x) by weighted least squares on the log scale.
struct SurfaceTailPoint {
  Vec x;
  int64_t phi = 0;
  long connected = 0;
  long heavy = 0;
  double p_heavy = 0;
  double stderr_ = 0;
};

struct SurfaceTailReport {
  double delta = 0;
  double slope = 0;
  double slope_stderr = 0;
  bool decreasing = false;  // slope + 1.645 stderr < 0
  std::vector<SurfaceTailPoint> points;
};

SurfaceTailReport surface_tail_report(const std::vector<Vec>& xs, const LatticeSpec& spec,
                                      const RCParams& params, double delta, long n_samples,
                                      uint64_t seed);

void write_connectivity_csv(const std::vector<ConnectivityRow>& rows, const std::string& path);
void write_tau_csv(const std::vector<TauFit>& fits, const std::string& path);
void write_surface_csv(const EquiDecaySurface& s, const std::string& path);
void write_curvature_csv(const EquiDecaySurface& s, const CurvatureReport& r,
                         const std::string& path);
void write_supermult_csv(const SupermultReport& r, const std::string& path);

// Column documentation for every CSV the estimators emit.
std::string estimator_schema();

}  // namespace oz

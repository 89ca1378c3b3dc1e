#pragma once
#include <vector>

#include "ozlab/rc_measure.hpp"
#include "ozlab/rng.hpp"

namespace oz {

// Cluster dynamics for the random-cluster measure on a box.
//   q = 1        direct Bernoulli resampling (exact in one sweep)
//   integer q    Swendsen-Wang through the Edwards-Sokal coupling
//   real q >= 1  Chayes-Machta (components activated with probability 1/q;
//                edges inside the active region resampled Bernoulli(p))
// Both act on the quotient graph implied by the boundary condition, so the
// invariant measure matches kappa counting exactly.
enum class Dynamics { automatic, bernoulli, swendsen_wang, chayes_machta };

const char* dynamics_name(Dynamics dyn);
Dynamics pick_dynamics(const RCParams& params);  // resolves `automatic`

struct ChainState {
  BondConfig config;
  std::vector<int32_t> component;  // per quotient node, refreshed each sweep
  Rng rng;
  long sweeps = 0;
};

class RCSampler {
 public:
  RCSampler(const LatticeSpec& spec, const RCParams& params, const BoundaryCondition& bc,
            Dynamics dyn = Dynamics::automatic);

  ChainState make_chain(uint64_t seed) const;
  void sweep(ChainState& state) const;
  void run(ChainState& state, long sweeps) const;

  int edge_count() const { return n_edges_; }
  Dynamics dynamics() const { return dyn_; }

 private:
  void relabel(ChainState& state) const;

  RCParams params_;
  Dynamics dyn_;
  int n_edges_ = 0;
  int n_nodes_ = 0;
  int q_int_ = 0;  // used by Swendsen-Wang
  std::vector<std::pair<int32_t, int32_t>> edge_nodes_;
  std::vector<std::pair<int32_t, int32_t>> fixed_links_;
};

// Sampled configuration after a fixed number of sweeps from all-closed.
BondConfig sample_config(const LatticeSpec& spec, const RCParams& params,
                         const BoundaryCondition& bc, long sweeps, uint64_t seed,
                         Dynamics dyn = Dynamics::automatic);

struct EstimateWithCI {
  double estimate = 0;
  double stderr_ = 0;   // batch-means standard error
  long samples = 0;
};

// Pools independent estimates by inverse-variance weights (plain average
// when all errors vanish).
EstimateWithCI merge_estimates(const std::vector<EstimateWithCI>& parts);

// Monte Carlo mean of an event along one chain; one sample every `thinning`
// sweeps after `burnin` sweeps.
EstimateWithCI mc_estimate(const Event& event, const LatticeSpec& spec, const RCParams& params,
                           const BoundaryCondition& bc, long n_samples, long thinning,
                           long burnin, uint64_t seed, Dynamics dyn = Dynamics::automatic);

struct SeriesDiagnostics {
  double mean = 0;
  double variance = 0;
  double tau_int = 1;        // integrated autocorrelation time, floored at 1
  bool degenerate = false;   // zero variance
  bool too_short = false;    // tau_int not resolved by the history length
};

// Windowed integrated autocorrelation time per observable series.
// Requires at least 100 points.
std::vector<SeriesDiagnostics> chain_diagnostics(
    const std::vector<std::vector<double>>& series);

}  // namespace oz

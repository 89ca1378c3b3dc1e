#include "ozlab/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "ozlab/union_find.hpp"

namespace oz {

const char* dynamics_name(Dynamics dyn) {
  switch (dyn) {
    case Dynamics::automatic: return "automatic";
    case Dynamics::bernoulli: return "bernoulli";
    case Dynamics::swendsen_wang: return "swendsen-wang";
    case Dynamics::chayes_machta: return "chayes-machta";
  }
  return "?";
}

Dynamics pick_dynamics(const RCParams& params) {
  if (params.q == 1.0) return Dynamics::bernoulli;
  double r = std::round(params.q);
  if (std::abs(params.q - r) < 1e-12) return Dynamics::swendsen_wang;
  return Dynamics::chayes_machta;
}

RCSampler::RCSampler(const LatticeSpec& spec, const RCParams& params,
                     const BoundaryCondition& bc, Dynamics dyn)
    : params_(params), dyn_(dyn) {
  params_.validate();
  spec.validate();
  if (dyn_ == Dynamics::automatic) dyn_ = pick_dynamics(params_);
  if (dyn_ == Dynamics::bernoulli && params_.q != 1.0)
    throw std::invalid_argument("bernoulli dynamics is exact only at q = 1");
  if (dyn_ == Dynamics::swendsen_wang) {
    double r = std::round(params_.q);
    if (std::abs(params_.q - r) > 1e-9)
      throw std::invalid_argument("swendsen-wang requires integer q");
    q_int_ = static_cast<int>(r);
  }
  QuotientGraph g(spec, bc);
  n_nodes_ = g.n_nodes;
  edge_nodes_ = std::move(g.edge_nodes);
  fixed_links_ = std::move(g.fixed_links);
  n_edges_ = static_cast<int>(edge_nodes_.size());
}

void RCSampler::relabel(ChainState& state) const {
  UnionFind uf(n_nodes_);
  for (int i = 0; i < n_edges_; ++i)
    if (state.config.open[i]) uf.unite(edge_nodes_[i].first, edge_nodes_[i].second);
  for (const auto& [a, b] : fixed_links_) uf.unite(a, b);
  state.component.resize(n_nodes_);
  for (int32_t node = 0; node < n_nodes_; ++node) state.component[node] = uf.find(node);
}

ChainState RCSampler::make_chain(uint64_t seed) const {
  ChainState state{BondConfig{}, {}, Rng(seed), 0};
  state.config.open.assign(n_edges_, 0);
  relabel(state);
  return state;
}

void RCSampler::sweep(ChainState& state) const {
  switch (dyn_) {
    case Dynamics::bernoulli:
      for (int i = 0; i < n_edges_; ++i)
        state.config.open[i] = state.rng.bernoulli(params_.p) ? 1 : 0;
      break;

    case Dynamics::swendsen_wang: {
      // color each current component, then keep same-colored bonds Bernoulli(p)
      std::vector<int32_t> color(n_nodes_, 0);
      for (int32_t node = 0; node < n_nodes_; ++node)
        if (state.component[node] == node)
          color[node] = static_cast<int32_t>(state.rng.below(q_int_));
      for (int i = 0; i < n_edges_; ++i) {
        const auto& [a, b] = edge_nodes_[i];
        bool same = color[state.component[a]] == color[state.component[b]];
        state.config.open[i] = (same && state.rng.bernoulli(params_.p)) ? 1 : 0;
      }
      break;
    }

    case Dynamics::chayes_machta: {
      // activate components with probability 1/q; Bernoulli(p) inside the
      // active region, everything else kept (active-inactive bonds are
      // already closed)
      std::vector<uint8_t> active(n_nodes_, 0);
      double inv_q = 1.0 / params_.q;
      for (int32_t node = 0; node < n_nodes_; ++node)
        if (state.component[node] == node)
          active[node] = state.rng.bernoulli(inv_q) ? 1 : 0;
      for (int i = 0; i < n_edges_; ++i) {
        const auto& [a, b] = edge_nodes_[i];
        if (active[state.component[a]] && active[state.component[b]])
          state.config.open[i] = state.rng.bernoulli(params_.p) ? 1 : 0;
      }
      break;
    }

    case Dynamics::automatic:
      throw std::logic_error("sampler retained unresolved dynamics");
  }
  relabel(state);
  state.sweeps += 1;
}

void RCSampler::run(ChainState& state, long sweeps) const {
  for (long i = 0; i < sweeps; ++i) sweep(state);
}

BondConfig sample_config(const LatticeSpec& spec, const RCParams& params,
                         const BoundaryCondition& bc, long sweeps, uint64_t seed,
                         Dynamics dyn) {
  RCSampler sampler(spec, params, bc, dyn);
  ChainState state = sampler.make_chain(seed);
  sampler.run(state, sweeps);
  return state.config;
}

EstimateWithCI merge_estimates(const std::vector<EstimateWithCI>& parts) {
  if (parts.empty()) throw std::invalid_argument("nothing to merge");
  EstimateWithCI out;
  for (const auto& p : parts) out.samples += p.samples;
  bool all_positive = std::all_of(parts.begin(), parts.end(),
                                  [](const EstimateWithCI& p) { return p.stderr_ > 0; });
  if (all_positive) {
    double wsum = 0, esum = 0;
    for (const auto& p : parts) {
      double w = 1.0 / (p.stderr_ * p.stderr_);
      wsum += w;
      esum += w * p.estimate;
    }
    out.estimate = esum / wsum;
    out.stderr_ = std::sqrt(1.0 / wsum);
  } else {
    double nsum = 0, esum = 0, var = 0;
    for (const auto& p : parts) {
      double n = std::max<double>(1, p.samples);
      nsum += n;
      esum += n * p.estimate;
      var += n * n * p.stderr_ * p.stderr_;
    }
    out.estimate = esum / nsum;
    out.stderr_ = std::sqrt(var) / nsum;
  }
  return out;
}

EstimateWithCI mc_estimate(const Event& event, const LatticeSpec& spec, const RCParams& params,
                           const BoundaryCondition& bc, long n_samples, long thinning,
                           long burnin, uint64_t seed, Dynamics dyn) {
  if (n_samples < 1) throw std::invalid_argument("need at least one sample");
  if (thinning < 1) throw std::invalid_argument("thinning must be at least 1");
  if (burnin < 0) throw std::invalid_argument("burn-in must be nonnegative");
  RCSampler sampler(spec, params, bc, dyn);
  ChainState state = sampler.make_chain(seed);
  sampler.run(state, burnin);

  std::vector<double> vals;
  vals.reserve(n_samples);
  for (long i = 0; i < n_samples; ++i) {
    sampler.run(state, thinning);
    vals.push_back(event(state.config) ? 1.0 : 0.0);
  }

  EstimateWithCI out;
  out.samples = n_samples;
  double mean = 0;
  for (double v : vals) mean += v;
  mean /= n_samples;
  out.estimate = mean;

  long batch = std::max<long>(1, n_samples / 32);
  long n_batches = n_samples / batch;
  if (n_batches >= 2) {
    double acc = 0;
    std::vector<double> bm(n_batches, 0.0);
    for (long j = 0; j < n_batches; ++j) {
      for (long i = j * batch; i < (j + 1) * batch; ++i) bm[j] += vals[i];
      bm[j] /= batch;
      acc += bm[j];
    }
    acc /= n_batches;
    double v = 0;
    for (double b : bm) v += (b - acc) * (b - acc);
    v /= (n_batches - 1);
    out.stderr_ = std::sqrt(v / n_batches);
  } else {
    double v = 0;
    for (double x : vals) v += (x - mean) * (x - mean);
    v = n_samples > 1 ? v / (n_samples - 1) : 0.0;
    out.stderr_ = std::sqrt(v / n_samples);
  }
  return out;
}

std::vector<SeriesDiagnostics> chain_diagnostics(
    const std::vector<std::vector<double>>& series) {
  std::vector<SeriesDiagnostics> out;
  out.reserve(series.size());
  for (const auto& x : series) {
    size_t n = x.size();
    if (n < 100) throw std::invalid_argument("diagnostics need at least 100 points");
    SeriesDiagnostics d;
    double mean = 0;
    for (double v : x) mean += v;
    mean /= n;
    d.mean = mean;
    double c0 = 0;
    for (double v : x) c0 += (v - mean) * (v - mean);
    c0 /= n;
    d.variance = c0;
    if (c0 <= 0) {
      d.degenerate = true;
      d.tau_int = 1.0;
      out.push_back(d);
      continue;
    }
    // Sokal window: smallest W with W >= c * tau(W)
    const double c = 6.0;
    double tau = 1.0;
    bool resolved = false;
    size_t w_max = n / 2;
    for (size_t w = 1; w <= w_max; ++w) {
      double ct = 0;
      for (size_t i = 0; i + w < n; ++i) ct += (x[i] - mean) * (x[i + w] - mean);
      ct /= (n - w);
      tau += 2.0 * ct / c0;
      if (static_cast<double>(w) >= c * tau) {
        resolved = true;
        break;
      }
    }
    d.tau_int = std::max(1.0, tau);
    d.too_short = !resolved;
    out.push_back(d);
  }
  return out;
}

}  // namespace oz

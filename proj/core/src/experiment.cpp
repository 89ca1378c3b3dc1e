#include "ozlab/experiment.hpp"

#include <algorithm>
#include <cctype>
#include <cerrno>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <stdexcept>

#include "ozlab/cluster_geometry.hpp"
#include "ozlab/estimator.hpp"
#include "ozlab/polymer.hpp"
#include "ozlab/rc_measure.hpp"
#include "ozlab/rng.hpp"
#include "ozlab/sampler.hpp"
#include "ozlab/transfer.hpp"
#include "ozlab/version.hpp"

namespace fs = std::filesystem;

namespace oz {
namespace {

std::string g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string hex16(uint64_t v) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string one_line(std::string s) {
  for (auto& c : s)
    if (c == '\n' || c == '\r') c = ';';
  return s;
}

struct RunContext {
  RunConfig cfg;
  std::string subcommand;
  fs::path dir;
  uint64_t master_seed = 0;
  std::string message;
  std::vector<std::string> outputs;
  std::vector<std::pair<std::string, uint64_t>> cells;
  std::vector<std::pair<std::string, std::string>> headline;
};

using Work = std::function<void(RunContext&)>;

void head(RunContext& ctx, const std::string& key, const std::string& value) {
  ctx.headline.emplace_back(key, value);
}

void head(RunContext& ctx, const std::string& key, double value) { head(ctx, key, g17(value)); }

void head(RunContext& ctx, const std::string& key, int64_t value) {
  head(ctx, key, std::to_string(value));
}

uint64_t cell_seed(RunContext& ctx, const std::string& label, const std::string& stream,
                   uint64_t index) {
  uint64_t s = derive_seed(ctx.master_seed, stream, index);
  ctx.cells.emplace_back(label, s);
  return s;
}

// Claims an output name (append-only within the run) and returns its path.
std::string claim(RunContext& ctx, const std::string& name) {
  fs::path p = ctx.dir / name;
  if (fs::exists(p)) throw std::runtime_error(p.string() + " already exists");
  ctx.outputs.push_back(name);
  return p.string();
}

std::ofstream open_data(RunContext& ctx, const std::string& name, const std::string& units) {
  std::string p = claim(ctx, name);
  std::ofstream out(p);
  if (!out) throw std::runtime_error("cannot open " + p + " for writing");
  out << "# ozlab " << kVersion << "; " << units << '\n';
  return out;
}

void write_headline_file(RunContext& ctx) {
  auto out = open_data(ctx, "headline.kv", "headline summary; units follow the source tables");
  for (const auto& kv : ctx.headline) out << kv.first << " = " << kv.second << '\n';
}

void write_manifest(const RunContext& ctx, const std::string& status, double wall,
                    const std::string& error) {
  fs::path p = ctx.dir / "manifest.txt";
  std::ofstream out(p);
  if (!out) throw std::runtime_error("cannot open " + p.string() + " for writing");
  out << "ozlab run manifest\n";
  out << "version: " << kVersion << '\n';
  out << "subcommand: " << ctx.subcommand << '\n';
  out << "rng: " << kRngName << '\n';
  out << "master_seed: " << ctx.master_seed << '\n';
  out << "status: " << status << '\n';
  if (status == "complete") out << "wall_clock_seconds: " << g17(wall) << '\n';
  if (!error.empty()) out << "error: " << one_line(error) << '\n';
  out << "config:\n";
  std::istringstream snap(ctx.cfg.snapshot());
  std::string line;
  while (std::getline(snap, line)) out << "  " << line << '\n';
  if (!ctx.cells.empty()) {
    out << "seeds:\n";
    for (const auto& cs : ctx.cells) out << "  " << cs.first << " = " << cs.second << '\n';
  }
  if (status == "complete") {
    out << "outputs:\n";
    for (const auto& name : ctx.outputs)
      out << "  " << name << " fnv64=" << hex16(fnv64_file((ctx.dir / name).string())) << '\n';
  }
}

BoundaryCondition parse_bc(const RunConfig& cfg, const std::string& key) {
  std::string v = cfg.get_string(key, "free");
  if (v == "free") return BoundaryCondition::free_();
  if (v == "wired") return BoundaryCondition::wired();
  throw ConfigError(cfg.where(key) + ": bc must be 'free' or 'wired', got '" + v + "'");
}

Dynamics parse_dynamics(const RunConfig& cfg, const std::string& key) {
  std::string v = cfg.get_string(key, "auto");
  if (v == "auto") return Dynamics::automatic;
  if (v == "bernoulli") return Dynamics::bernoulli;
  if (v == "sw") return Dynamics::swendsen_wang;
  if (v == "cm") return Dynamics::chayes_machta;
  throw ConfigError(cfg.where(key) + ": dynamics must be auto, bernoulli, sw, or cm");
}

LatticeSpec parse_spec(const RunConfig& cfg) {
  LatticeSpec spec;
  spec.d = static_cast<int>(cfg.get_int("d", 2));
  spec.L = static_cast<int>(cfg.get_int("L", 2));
  spec.centered = cfg.get_bool("centered", false);
  spec.validate();
  return spec;
}

RCParams parse_params(const RunConfig& cfg) {
  RCParams params;
  params.q = cfg.get_double("q", 1.0);
  params.p = cfg.get_double("p", 0.5);
  params.validate();
  return params;
}

void check_range(const RunConfig& cfg, const std::string& key, int64_t v, int64_t lo, int64_t hi) {
  if (v < lo || v > hi)
    throw ConfigError(cfg.where(key) + ": " + key + " must be in [" + std::to_string(lo) + ", " +
                      std::to_string(hi) + "], got " + std::to_string(v));
}

// ---------------------------------------------------------------- enumerate

Work plan_enumerate(RunContext& ctx) {
  const RunConfig& cfg = ctx.cfg;
  cfg.require_known_keys({"out", "seed", "d", "L", "centered", "q", "p", "events", "pairs",
                          "clauses", "tol"});
  LatticeSpec spec = parse_spec(cfg);
  RCParams params = parse_params(cfg);
  int n_edges = static_cast<int>(edges_of_box(spec).size());
  if (n_edges < 1 || n_edges > kEnumEdgeCap)
    throw ConfigError(cfg.path + ": the box has " + std::to_string(n_edges) +
                      " edges; exact enumeration handles 1.." + std::to_string(kEnumEdgeCap));
  int64_t events = cfg.get_int("events", 20);
  int64_t pairs = cfg.get_int("pairs", 20);
  int64_t clauses = cfg.get_int("clauses", 2);
  double tol = cfg.get_double("tol", 1e-12);
  check_range(cfg, "events", events, 1, 10000);
  check_range(cfg, "pairs", pairs, 1, 10000);
  check_range(cfg, "clauses", clauses, 1, 8);
  if (!(tol > 0)) throw ConfigError(cfg.where("tol") + ": tol must be positive");

  return [=](RunContext& c) {
    auto out = open_data(c, "enumerate.csv",
                         "exact probabilities dimensionless; margin >= -tol passes");
    out << "check,index,value,margin,ok\n";
    int chain_pass = 0, fkg_pass = 0;
    double chain_min = 1e300, fkg_min = 1e300;

    LatticeSpec one{1, 2, false};
    Event open_edge = [](const BondConfig& bc) { return bc.open[0] != 0; };
    double exact = exact_probability(open_edge, one, params, BoundaryCondition::free_());
    double formula = params.p / (params.p + params.q * (1.0 - params.p));
    double se_margin = -std::fabs(exact - formula);
    bool se_ok = se_margin >= -tol;
    out << "single-edge,0," << g17(exact) << ',' << g17(se_margin) << ',' << (se_ok ? 1 : 0)
        << '\n';

    Rng ev_rng(cell_seed(c, "events", "enumerate-events", 0));
    for (int64_t i = 0; i < events; ++i) {
      Event f = random_increasing_event(n_edges, ev_rng, static_cast<int>(clauses));
      OrderChainReport rep = sdi_chain_check(spec, params, f, {}, tol);
      chain_pass += rep.ok ? 1 : 0;
      chain_min = std::min(chain_min, rep.min_margin);
      out << "chain," << i << ',' << g17(rep.p_free) << ',' << g17(rep.min_margin) << ','
          << (rep.ok ? 1 : 0) << '\n';
    }
    Rng pair_rng(cell_seed(c, "pairs", "enumerate-pairs", 0));
    for (int64_t i = 0; i < pairs; ++i) {
      Event f = random_increasing_event(n_edges, pair_rng, static_cast<int>(clauses));
      Event g = random_increasing_event(n_edges, pair_rng, static_cast<int>(clauses));
      for (auto kind : {BoundaryCondition::free_(), BoundaryCondition::wired()}) {
        FkgReport rep = fkg_check(spec, params, kind, f, g, tol);
        fkg_pass += rep.ok ? 1 : 0;
        fkg_min = std::min(fkg_min, rep.margin);
        out << "fkg-" << kind.name() << ',' << i << ',' << g17(rep.p_fg) << ','
            << g17(rep.margin) << ',' << (rep.ok ? 1 : 0) << '\n';
      }
    }

    head(c, "n_edges", static_cast<int64_t>(n_edges));
    head(c, "single_edge_ok", static_cast<int64_t>(se_ok ? 1 : 0));
    head(c, "chain_pass", static_cast<int64_t>(chain_pass));
    head(c, "chain_total", events);
    head(c, "chain_min_margin", chain_min);
    head(c, "fkg_pass", static_cast<int64_t>(fkg_pass));
    head(c, "fkg_total", 2 * pairs);
    head(c, "fkg_min_margin", fkg_min);
    c.message = "enumerate: single edge " + std::string(se_ok ? "ok" : "FAILED") + ", chain " +
                std::to_string(chain_pass) + "/" + std::to_string(events) + ", fkg " +
                std::to_string(fkg_pass) + "/" + std::to_string(2 * pairs);
  };
}

// ------------------------------------------------------------------- sample

Work plan_sample(RunContext& ctx) {
  const RunConfig& cfg = ctx.cfg;
  cfg.require_known_keys({"out", "seed", "d", "L", "centered", "q", "p", "bc", "sweeps",
                          "n_configs", "min_edges", "dynamics"});
  LatticeSpec spec = parse_spec(cfg);
  RCParams params = parse_params(cfg);
  BoundaryCondition bc = parse_bc(cfg, "bc");
  Dynamics dyn = parse_dynamics(cfg, "dynamics");
  int64_t sweeps = cfg.get_int("sweeps", 64);
  int64_t n_configs = cfg.get_int("n_configs", 32);
  int64_t min_edges = cfg.get_int("min_edges", 1);
  check_range(cfg, "sweeps", sweeps, 1, 1000000);
  check_range(cfg, "n_configs", n_configs, 1, 100000);
  check_range(cfg, "min_edges", min_edges, 0, 1000000);
  double vertices = std::pow(static_cast<double>(spec.L), spec.d);
  if (vertices > 2e7)
    throw ConfigError(cfg.path + ": box has " + g17(vertices) +
                      " vertices; sampling is capped at 2e7");

  return [=](RunContext& c) {
    auto out = open_data(c, "sample.csv", "edge counts dimensionless");
    out << "config,open_edges,open_fraction,n_clusters,n_finite_kept,largest_vertices\n";
    int n_edges = static_cast<int>(edges_of_box(spec).size());
    std::vector<Cluster> kept;
    double open_total = 0;
    for (int64_t i = 0; i < n_configs; ++i) {
      uint64_t s = cell_seed(c, "sample." + std::to_string(i), "sample",
                             static_cast<uint64_t>(i));
      BondConfig config = sample_config(spec, params, bc, sweeps, s, dyn);
      Components comps = components(config, spec);
      int64_t kept_here = 0, largest = 0;
      for (const auto& cl : comps.clusters) {
        largest = std::max<int64_t>(largest, static_cast<int64_t>(cl.vertices.size()));
        if (cl.finite && static_cast<int64_t>(cl.edges.size()) >= min_edges) {
          kept.push_back(cl);
          ++kept_here;
        }
      }
      int open = config.count_open();
      open_total += open;
      out << i << ',' << open << ',' << g17(static_cast<double>(open) / n_edges) << ','
          << comps.clusters.size() << ',' << kept_here << ',' << largest << '\n';
    }
    dump_clusters_jsonl(claim(c, "clusters.jsonl"), kept);
    head(c, "n_configs", n_configs);
    head(c, "n_clusters_dumped", static_cast<int64_t>(kept.size()));
    head(c, "mean_open_fraction", open_total / (static_cast<double>(n_configs) * n_edges));
    head(c, "dynamics", dynamics_name(dyn == Dynamics::automatic ? pick_dynamics(params) : dyn));
    c.message = "sample: " + std::to_string(n_configs) + " configs, " +
                std::to_string(kept.size()) + " finite clusters dumped";
  };
}

// ---------------------------------------------------------------- decompose

Work plan_decompose(RunContext& ctx) {
  const RunConfig& cfg = ctx.cfg;
  cfg.require_known_keys({"out", "seed", "d", "L", "centered", "input", "eps", "t_axis"});
  LatticeSpec spec = parse_spec(cfg);
  double eps = cfg.get_double("eps", 0.5);
  int64_t t_axis = cfg.get_int("t_axis", 0);
  std::string input = cfg.get_string("input");
  if (!(eps > 0 && eps < 1))
    throw ConfigError(cfg.where("eps") + ": eps must lie strictly between 0 and 1");
  check_range(cfg, "t_axis", t_axis, 0, spec.d - 1);
  if (!fs::exists(input))
    throw ConfigError(cfg.where("input") + ": cluster input file not found: " + input);

  return [=](RunContext& c) {
    std::vector<Cluster> clusters = load_clusters_jsonl(input);
    RVec t = RVec::axis(spec.d, static_cast<int>(t_axis));
    auto out = open_data(c, "decompose.csv", "counts dimensionless, span in lattice steps");
    out << "index,n_vertices,n_edges,span,n_breaks,n_cones,n_pieces,trivial,reconstructed\n";
    int64_t n_recon = 0, n_trivial = 0;
    for (size_t i = 0; i < clusters.size(); ++i) {
      const Cluster& cl = clusters[i];
      validate_cluster(cl);
      auto height = [&](const Vec& v) { return v[static_cast<int>(t_axis)]; };
      Vec x = cl.vertices.front(), y = cl.vertices.front();
      for (const auto& v : cl.vertices) {
        if (height(v) < height(x) || (height(v) == height(x) && v < x)) x = v;
        if (height(v) > height(y) || (height(v) == height(y) && y < v)) y = v;
      }
      int64_t span = height(y) - height(x);
      if (x == y) {
        ++n_recon;
        ++n_trivial;
        out << i << ',' << cl.vertices.size() << ',' << cl.edges.size() << ",0,0,0,1,1,1\n";
        continue;
      }
      BreakPointData bp = cone_points(cl, t, eps, x, y);
      IrreducibleDecomposition dec = irreducible_decomposition(cl, t, eps, x, y);
      bool ok = reconstructs(dec, cl);
      n_recon += ok ? 1 : 0;
      n_trivial += dec.trivial ? 1 : 0;
      int64_t pieces = dec.trivial ? 1 : static_cast<int64_t>(dec.interior.size()) + 2;
      out << i << ',' << cl.vertices.size() << ',' << cl.edges.size() << ',' << span << ','
          << bp.break_points.size() << ',' << bp.cone_points.size() << ',' << pieces << ','
          << (dec.trivial ? 1 : 0) << ',' << (ok ? 1 : 0) << '\n';
    }
    head(c, "n_clusters", static_cast<int64_t>(clusters.size()));
    head(c, "n_reconstructed", n_recon);
    head(c, "n_trivial", n_trivial);
    head(c, "eps", eps);
    head(c, "t_axis", t_axis);
    c.message = "decompose: " + std::to_string(n_recon) + "/" + std::to_string(clusters.size()) +
                " clusters reconstructed exactly";
  };
}

// ------------------------------------------------------------------ polymer

Work plan_polymer(RunContext& ctx) {
  const RunConfig& cfg = ctx.cfg;
  cfg.require_known_keys({"out", "seed", "q", "p", "max_size", "c8"});
  RCParams params = parse_params(cfg);
  int64_t max_size = cfg.get_int("max_size", 6);
  double c8 = cfg.get_double("c8", 1.0);
  check_range(cfg, "max_size", max_size, 2, 8);
  if (!(c8 > 0)) throw ConfigError(cfg.where("c8") + ": c8 must be positive");

  return [=](RunContext& c) {
    PlaquetteCounts counts = count_plaquette_polymers(static_cast<int>(max_size));
    LatticeKpReport rep = lattice_kp_check(counts, params, c8);
    auto out = open_data(c, "polymer.csv",
                         "anchored plaquette-polymer counts dimensionless; term = e^{c8 k} a_k");
    out << "k,n_k,a_k,term\n";
    for (int k = 1; k <= rep.max_size; ++k)
      out << k << ',' << rep.n_k[k - 1] << ',' << g17(rep.a_k[k - 1]) << ','
          << g17(rep.terms[k - 1]) << '\n';
    head(c, "max_size", max_size);
    head(c, "c8", c8);
    head(c, "kp_sum", rep.kp_sum);
    head(c, "kp_margin", c8 - rep.kp_sum);
    head(c, "kp_pass", static_cast<int64_t>(rep.pass ? 1 : 0));
    head(c, "c3_hat", rep.c3_hat);
    head(c, "p0", rep.p0);
    c.message = "polymer: kp_sum = " + g17(rep.kp_sum) + " vs c8 = " + g17(c8) + " (" +
                (rep.pass ? "pass" : "fail") + "), p0 = " + g17(rep.p0);
  };
}

// ----------------------------------------------------------------- transfer

Work plan_transfer(RunContext& ctx) {
  const RunConfig& cfg = ctx.cfg;
  cfg.require_known_keys({"out", "seed", "alphabet", "axis", "radius", "fit_r1", "fit_r2",
                          "transverse_cap"});
  std::string name = cfg.get_string("alphabet", "builtin-d3");
  Alphabet alpha;
  if (name == "builtin-d3") {
    alpha = builtin_alphabet_d3();
  } else if (name == "builtin-d2") {
    alpha = builtin_alphabet_d2();
  } else {
    if (!fs::exists(name))
      throw ConfigError(cfg.where("alphabet") + ": alphabet file not found: " + name);
    try {
      alpha = load_alphabet(name);
    } catch (const std::exception& e) {
      throw ConfigError(cfg.where("alphabet") + ": " + e.what());
    }
  }
  int64_t axis = cfg.get_int("axis", 0);
  double radius = cfg.get_double("radius", 200);
  double r1 = cfg.get_double("fit_r1", 50);
  double r2 = cfg.get_double("fit_r2", 200);
  int64_t cap = cfg.get_int("transverse_cap", 4);
  check_range(cfg, "axis", axis, 0, alpha.d - 1);
  check_range(cfg, "transverse_cap", cap, 0, 64);
  if (!(radius >= 8 && radius <= 100000))
    throw ConfigError(cfg.where("radius") + ": radius must lie in [8, 100000]");
  if (!(r1 >= 1 && r1 < r2 && r2 <= radius))
    throw ConfigError(cfg.path + ": need 1 <= fit_r1 < fit_r2 <= radius");
  RVec t = RVec::axis(alpha.d, static_cast<int>(axis));
  try {
    alpha.validate(t);
  } catch (const std::exception& e) {
    throw ConfigError(cfg.where("alphabet") + ": " + e.what());
  }

  return [=](RunContext& c) {
    Potential pot;
    pot.validate(alpha);
    RenewalMassTable table = renewal_mass(alpha, pot, t, radius);
    if (table.divergent)
      throw std::runtime_error(
          "renewal weights are supercritical (leading eigenvalue >= 1); no decay to fit");
    save_mass_csv(table, claim(c, "mass.csv"), cap);
    PrefactorFit fit = prefactor_fit(table, Vec::unit(alpha.d, static_cast<int>(axis)), r1, r2);
    auto out = open_data(c, "fit.csv", "tau in inverse lattice steps, alpha dimensionless");
    out << "d,axis,r1,r2,tau,alpha,alpha_stderr,log_amplitude,rss,points\n";
    out << alpha.d << ',' << axis << ',' << g17(r1) << ',' << g17(r2) << ',' << g17(fit.tau)
        << ',' << g17(fit.alpha) << ',' << g17(fit.alpha_stderr) << ','
        << g17(fit.log_amplitude) << ',' << g17(fit.rss) << ',' << fit.points << '\n';
    head(c, "alphabet", name);
    head(c, "n_symbols", static_cast<int64_t>(alpha.n()));
    head(c, "tau", fit.tau);
    head(c, "alpha_hat", fit.alpha);
    head(c, "alpha_stderr", fit.alpha_stderr);
    head(c, "fit_points", static_cast<int64_t>(fit.points));
    c.message = "transfer: alpha_hat = " + g17(fit.alpha) + " +- " + g17(fit.alpha_stderr) +
                ", tau = " + g17(fit.tau);
  };
}

// ---------------------------------------------------------------------- fit

Work plan_fit(RunContext& ctx) {
  const RunConfig& cfg = ctx.cfg;
  cfg.require_known_keys({"out", "seed", "d", "q", "p", "bc", "axes", "radii", "samples",
                          "margin", "thinning", "burnin", "alpha"});
  int d = static_cast<int>(cfg.get_int("d", 2));
  if (d < 1 || d > kMaxDim)
    throw ConfigError(cfg.where("d") + ": d must be in [1, " + std::to_string(kMaxDim) + "]");
  RCParams params = parse_params(cfg);
  BoundaryCondition bc = parse_bc(cfg, "bc");
  std::vector<int64_t> axes = cfg.get_int_list("axes", {0});
  std::vector<int64_t> radii = cfg.get_int_list("radii", {1, 2, 3, 4});
  std::vector<int64_t> samples = cfg.get_int_list("samples", {100000});
  int64_t margin = cfg.get_int("margin", kConnectivityMargin);
  int64_t thinning = cfg.get_int("thinning", 2);
  int64_t burnin = cfg.get_int("burnin", 200);
  double alpha = cfg.get_double("alpha", 0.0);
  for (int64_t a : axes) check_range(cfg, "axes", a, 0, d - 1);
  if (radii.size() < 4)
    throw ConfigError(cfg.where("radii") + ": a decay fit needs at least four radii");
  for (size_t i = 0; i < radii.size(); ++i) {
    check_range(cfg, "radii", radii[i], 1, 5000);
    if (i && radii[i] <= radii[i - 1])
      throw ConfigError(cfg.where("radii") + ": radii must be strictly increasing");
  }
  if (samples.size() != 1 && samples.size() != radii.size())
    throw ConfigError(cfg.where("samples") +
                      ": samples must be one count or one count per radius");
  for (int64_t s : samples) check_range(cfg, "samples", s, 100, 2000000000);
  check_range(cfg, "margin", margin, 1, 64);
  check_range(cfg, "thinning", thinning, 1, 10000);
  check_range(cfg, "burnin", burnin, 0, 1000000);
  int64_t worst_L = 2 * (radii.back() + margin) + 1;
  if (std::pow(static_cast<double>(worst_L), d) > 1e8)
    throw ConfigError(cfg.path + ": largest radius needs a box of side " +
                      std::to_string(worst_L) + "; that exceeds the 1e8 vertex cap");

  return [=](RunContext& c) {
    std::vector<ConnectivityRow> rows;
    std::vector<TauFit> fits;
    for (int64_t a : axes) {
      std::vector<double> estimates;
      for (size_t i = 0; i < radii.size(); ++i) {
        Vec x = Vec::unit(d, static_cast<int>(a)) * static_cast<int32_t>(radii[i]);
        int64_t n = samples[samples.size() == 1 ? 0 : i];
        uint64_t s = cell_seed(c, "conn." + std::to_string(a) + "." + std::to_string(radii[i]),
                               "conn-axis" + std::to_string(a), static_cast<uint64_t>(i));
        LatticeSpec spec = connectivity_box(x, static_cast<int>(margin));
        ConnectivityRow row = finite_two_point_mc(x, spec, params, bc, n, s, thinning, burnin,
                                                  static_cast<int>(margin));
        estimates.push_back(row.estimate);
        rows.push_back(row);
      }
      fits.push_back(tau_fit(Vec::unit(d, static_cast<int>(a)), radii, estimates, alpha));
    }
    write_connectivity_csv(rows, claim(c, "connectivity.csv"));
    write_tau_csv(fits, claim(c, "tau.csv"));
    {
      std::string p = claim(c, "schema.txt");
      std::ofstream out(p);
      if (!out) throw std::runtime_error("cannot open " + p + " for writing");
      out << "ozlab " << kVersion << " output schema\n\n" << estimator_schema();
    }
    std::string msg = "fit:";
    for (size_t k = 0; k < fits.size(); ++k) {
      head(c, "tau.axis" + std::to_string(axes[k]), fits[k].tau);
      head(c, "tau_stderr.axis" + std::to_string(axes[k]), fits[k].tau_stderr);
      msg += std::string(k ? "," : "") + " tau(e" + std::to_string(axes[k]) + ") = " +
             g17(fits[k].tau) + " +- " + g17(fits[k].tau_stderr);
    }
    head(c, "n_rows", static_cast<int64_t>(rows.size()));
    c.message = msg;
  };
}

using Planner = Work (*)(RunContext&);

const std::vector<std::pair<std::string, Planner>>& planners() {
  static const std::vector<std::pair<std::string, Planner>> table = {
      {"enumerate", plan_enumerate}, {"sample", plan_sample},   {"decompose", plan_decompose},
      {"polymer", plan_polymer},     {"transfer", plan_transfer}, {"fit", plan_fit},
  };
  return table;
}

}  // namespace

std::vector<std::string> known_subcommands() {
  std::vector<std::string> names;
  for (const auto& p : planners()) names.push_back(p.first);
  return names;
}

uint64_t fnv64_bytes(const std::string& bytes) {
  uint64_t h = 14695981039346656037ull;
  for (unsigned char b : bytes) {
    h ^= b;
    h *= 1099511628211ull;
  }
  return h;
}

uint64_t fnv64_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path + " for checksumming");
  std::ostringstream buf;
  buf << in.rdbuf();
  return fnv64_bytes(buf.str());
}

RunResult run_experiment(const std::string& subcommand, const std::string& config_path,
                         std::optional<uint64_t> seed_override,
                         std::optional<std::string> out_override) {
  RunResult res;
  try {
    Planner planner = nullptr;
    for (const auto& p : planners())
      if (p.first == subcommand) planner = p.second;
    if (!planner) {
      std::string names;
      for (const auto& p : planners()) names += (names.empty() ? "" : ", ") + p.first;
      throw ConfigError("unknown subcommand '" + subcommand + "' (expected one of: " + names +
                        ")");
    }

    RunContext ctx;
    ctx.cfg = load_config(config_path);
    ctx.subcommand = subcommand;
    ctx.master_seed = seed_override ? *seed_override
                                    : static_cast<uint64_t>(ctx.cfg.get_int("seed", 1));
    std::string out_dir =
        out_override ? *out_override : ctx.cfg.get_string("out", "runs/" + subcommand);

    Work work = planner(ctx);

    ctx.dir = out_dir;
    if (fs::exists(ctx.dir / "manifest.txt"))
      throw ConfigError(out_dir +
                        ": manifest.txt already present; run directories are append-only, "
                        "pick a fresh output directory");
    fs::create_directories(ctx.dir);

    auto t0 = std::chrono::steady_clock::now();
    write_manifest(ctx, "running", 0, "");
    try {
      work(ctx);
      write_headline_file(ctx);
    } catch (const std::exception& e) {
      for (const auto& name : ctx.outputs) {
        std::error_code ec;
        fs::remove(ctx.dir / name, ec);
      }
      double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      ctx.outputs.clear();
      write_manifest(ctx, "failed", wall, e.what());
      throw;
    }
    double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    write_manifest(ctx, "complete", wall, "");

    res.message = ctx.message;
    res.run_dir = out_dir;
    res.outputs = ctx.outputs;
  } catch (const ConfigError& e) {
    res.exit_code = kExitConfig;
    res.message = e.what();
  } catch (const std::invalid_argument& e) {
    res.exit_code = kExitConfig;
    res.message = e.what();
  } catch (const std::exception& e) {
    res.exit_code = kExitRuntime;
    res.message = e.what();
  }
  return res;
}

ManifestInfo read_manifest(const std::string& run_dir) {
  fs::path p = fs::path(run_dir) / "manifest.txt";
  std::ifstream in(p);
  if (!in)
    throw ConfigError(run_dir + ": no manifest.txt; not a run directory (outputs without a "
                      "manifest are invalid)");
  std::string line;
  if (!std::getline(in, line) || line != "ozlab run manifest")
    throw ConfigError(p.string() + ": corrupt manifest: unexpected first line");
  ManifestInfo m;
  int section = 0;  // 0 top level, 1 config, 2 seeds, 3 outputs
  int lineno = 1;
  auto corrupt = [&](const std::string& what) -> ConfigError {
    return ConfigError(p.string() + ":" + std::to_string(lineno) + ": corrupt manifest: " + what);
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    if (line == "config:") {
      section = 1;
      continue;
    }
    if (line == "seeds:") {
      section = 2;
      continue;
    }
    if (line == "outputs:") {
      section = 3;
      continue;
    }
    if (line.rfind("  ", 0) == 0) {
      std::string body = line.substr(2);
      if (section == 1) {
        size_t eq = body.find(" = ");
        if (eq == std::string::npos) throw corrupt("bad config line");
        m.config.emplace_back(body.substr(0, eq), body.substr(eq + 3));
      } else if (section == 2) {
        size_t eq = body.find(" = ");
        if (eq == std::string::npos) throw corrupt("bad seed line");
        errno = 0;
        char* end = nullptr;
        uint64_t s = std::strtoull(body.c_str() + eq + 3, &end, 10);
        if (errno != 0 || *end != '\0') throw corrupt("bad seed value");
        m.cell_seeds.emplace_back(body.substr(0, eq), s);
      } else if (section == 3) {
        size_t at = body.rfind(" fnv64=");
        if (at == std::string::npos) throw corrupt("bad output line");
        errno = 0;
        char* end = nullptr;
        uint64_t sum = std::strtoull(body.c_str() + at + 7, &end, 16);
        if (errno != 0 || *end != '\0') throw corrupt("bad checksum");
        m.checksums.emplace_back(body.substr(0, at), sum);
      } else {
        throw corrupt("indented line outside a section");
      }
      continue;
    }
    section = 0;
    size_t colon = line.find(": ");
    if (colon == std::string::npos) throw corrupt("expected 'key: value'");
    std::string key = line.substr(0, colon), value = line.substr(colon + 2);
    if (key == "version") {
      m.version = value;
    } else if (key == "subcommand") {
      m.subcommand = value;
    } else if (key == "rng") {
      m.rng = value;
    } else if (key == "status") {
      m.status = value;
    } else if (key == "error") {
      m.error = value;
    } else if (key == "master_seed") {
      errno = 0;
      char* end = nullptr;
      m.master_seed = std::strtoull(value.c_str(), &end, 10);
      if (errno != 0 || *end != '\0') throw corrupt("bad master_seed");
    } else if (key == "wall_clock_seconds") {
      errno = 0;
      char* end = nullptr;
      m.wall_clock_seconds = std::strtod(value.c_str(), &end);
      if (errno != 0 || *end != '\0') throw corrupt("bad wall_clock_seconds");
    }
  }
  if (m.version.empty() || m.subcommand.empty() || m.status.empty() || m.rng.empty())
    throw ConfigError(p.string() + ": corrupt manifest: missing required fields");
  return m;
}

std::string emit_report(const std::string& run_dir) {
  if (!fs::is_directory(run_dir)) throw ConfigError(run_dir + ": no such run directory");
  ManifestInfo m = read_manifest(run_dir);
  if (m.status != "complete")
    throw ConfigError(run_dir + ": run status is '" + m.status + "'" +
                      (m.error.empty() ? "" : " (" + m.error + ")") +
                      "; only complete runs can be reported");

  std::ostringstream out;
  out << "ozlab report\n";
  out << "run: " << run_dir << '\n';
  out << "subcommand: " << m.subcommand << '\n';
  out << "version: " << m.version << '\n';
  out << "rng: " << m.rng << '\n';
  out << "master_seed: " << m.master_seed << '\n';
  out << "wall_clock_seconds: " << g17(m.wall_clock_seconds) << '\n';
  out << "parameters:\n";
  for (const auto& kv : m.config) out << "  " << kv.first << " = " << kv.second << '\n';

  out << "headline:\n";
  bool have_headline = false;
  for (const auto& cs : m.checksums)
    if (cs.first == "headline.kv") have_headline = true;
  if (!have_headline)
    throw ConfigError(run_dir + ": manifest lists no headline.kv; outputs are corrupt");
  {
    std::ifstream hl(fs::path(run_dir) / "headline.kv");
    if (!hl) throw ConfigError(run_dir + ": headline.kv is missing; outputs are corrupt");
    std::string line;
    while (std::getline(hl, line)) {
      if (line.empty() || line[0] == '#') continue;
      out << "  " << line << '\n';
    }
  }

  out << "files:\n";
  for (const auto& cs : m.checksums) {
    fs::path fp = fs::path(run_dir) / cs.first;
    if (!fs::exists(fp))
      throw ConfigError(run_dir + ": output " + cs.first + " is missing; outputs are corrupt");
    uint64_t sum = fnv64_file(fp.string());
    if (sum != cs.second)
      throw ConfigError(run_dir + ": checksum mismatch for " + cs.first +
                        "; outputs are corrupt");
    out << "  " << cs.first << " fnv64=" << hex16(sum) << " ok\n";
  }
  if (!m.cell_seeds.empty()) {
    out << "seeds: " << m.cell_seeds.size() << " cells recorded in the manifest\n";
  }

  std::string text = out.str();
  std::ofstream rp(fs::path(run_dir) / "report.txt");
  if (!rp) throw std::runtime_error("cannot write report.txt");
  rp << text;
  return text;
}

}  // namespace oz

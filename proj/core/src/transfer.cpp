#include "ozlab/transfer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include "json.hpp"
#include "ozlab/version.hpp"

namespace oz {

namespace {

constexpr double kAxisTol = 1e-9;

int axis_of(const RVec& t) {
  RVec th = normalized(t);
  int axis = cone_axis(th);
  if (th[axis] < 1.0 - kAxisTol)
    throw std::invalid_argument("renewal supports axis tilts only");
  return axis;
}

}  // namespace

void Alphabet::validate(const RVec& t) const {
  if (d < 1 || d > kMaxDim) throw std::invalid_argument("alphabet dimension out of range");
  if (disp.empty()) throw std::invalid_argument("alphabet has no symbols");
  if (xi.size() != disp.size())
    throw std::invalid_argument("alphabet weight table length mismatch");
  RVec th = normalized(t);
  for (size_t s = 0; s < disp.size(); ++s) {
    if (disp[s].d != d) throw std::invalid_argument("symbol displacement dimension mismatch");
    if (dot(th, disp[s]) < 1.0 - kAxisTol)
      throw std::invalid_argument("symbol displacement has forward height below 1");
    if (!std::isfinite(xi[s])) throw std::invalid_argument("symbol weight is not finite");
  }
}

void Potential::validate(const Alphabet& alpha) const {
  if (memory != 1 && memory != 2)
    throw std::invalid_argument("potential memory depth must be 1 or 2");
  if (memory == 1) {
    if (!xi2.empty()) throw std::invalid_argument("memoryless potential carries a pair table");
    return;
  }
  size_t n = static_cast<size_t>(alpha.n());
  if (xi2.size() != n) throw std::invalid_argument("pair table row count mismatch");
  for (const auto& row : xi2) {
    if (row.size() != n) throw std::invalid_argument("pair table column count mismatch");
    for (double v : row)
      if (!std::isfinite(v)) throw std::invalid_argument("pair table entry is not finite");
  }
}

double symbol_weight(const Alphabet& alpha, const Potential& pot, int prev, int next) {
  double xi = alpha.xi[next];
  if (pot.memory == 2 && prev >= 0) xi += pot.xi2[prev][next];
  return std::exp(xi);
}

std::vector<double> ruelle_apply(const std::vector<double>& f, const Alphabet& alpha,
                                 const Potential& pot) {
  pot.validate(alpha);
  int n = alpha.n();
  if (pot.memory == 1) {
    if (f.size() != 1) throw std::invalid_argument("memoryless f must have a single entry");
    double total = 0;
    for (int s = 0; s < n; ++s) total += std::exp(alpha.xi[s]);
    return {total * f[0]};
  }
  if (static_cast<int>(f.size()) != n)
    throw std::invalid_argument("f must be indexed by the previous symbol");
  std::vector<double> out(n, 0.0);
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b) out[a] += symbol_weight(alpha, pot, a, b) * f[b];
  return out;
}

namespace {

struct PowerResult {
  double lambda = 0;
  std::vector<double> vec;
  int iterations = 0;
  double residual = 0;
};

PowerResult power_iterate(const std::vector<std::vector<double>>& m, std::vector<double> v,
                          double tol, int max_iter) {
  size_t n = m.size();
  double vmax = *std::max_element(v.begin(), v.end());
  if (!(vmax > 0)) throw std::invalid_argument("start vector must have a positive entry");
  for (double& x : v) x /= vmax;

  PowerResult res;
  std::vector<double> w(n);
  for (int it = 1; it <= max_iter; ++it) {
    for (size_t i = 0; i < n; ++i) {
      double acc = 0;
      for (size_t j = 0; j < n; ++j) acc += m[i][j] * v[j];
      w[i] = acc;
    }
    double lambda = *std::max_element(w.begin(), w.end());
    if (!(lambda > 0)) throw std::runtime_error("transfer operator annihilates the start vector");
    double resid = 0;
    for (size_t i = 0; i < n; ++i) resid = std::max(resid, std::abs(w[i] - lambda * v[i]));
    for (size_t i = 0; i < n; ++i) v[i] = w[i] / lambda;
    if (resid <= tol * lambda) {
      res.lambda = lambda;
      res.vec = v;
      res.iterations = it;
      res.residual = resid;
      return res;
    }
  }
  throw std::runtime_error("power iteration did not converge");
}

}  // namespace

EigReport leading_eig(const Alphabet& alpha, const Potential& pot, double tol, int max_iter) {
  pot.validate(alpha);
  int n = alpha.n();
  if (n == 0) throw std::invalid_argument("alphabet has no symbols");

  EigReport report;
  if (pot.memory == 1) {
    double total = 0;
    for (int s = 0; s < n; ++s) total += std::exp(alpha.xi[s]);
    if (!(total > 0)) throw std::invalid_argument("operator has zero total weight");
    report.lambda = total;
    report.h = {1.0};
    report.nu = {1.0};
    return report;
  }

  std::vector<std::vector<double>> m(n, std::vector<double>(n));
  std::vector<std::vector<double>> mt(n, std::vector<double>(n));
  double total = 0;
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b) {
      m[a][b] = symbol_weight(alpha, pot, a, b);
      mt[b][a] = m[a][b];
      total += m[a][b];
    }
  if (!(total > 0)) throw std::invalid_argument("operator has zero total weight");

  // restarts from different corners expose multiplicity > 1
  std::vector<std::vector<double>> starts;
  starts.push_back(std::vector<double>(n, 1.0));
  std::vector<double> e0(n, 1e-12);
  e0[0] = 1.0;
  starts.push_back(e0);
  std::vector<double> e1(n, 1e-12);
  e1[n - 1] = 1.0;
  starts.push_back(e1);

  std::vector<PowerResult> runs;
  for (const auto& s : starts) runs.push_back(power_iterate(m, s, tol, max_iter));

  report.lambda = runs[0].lambda;
  report.h = runs[0].vec;
  report.iterations = runs[0].iterations;
  report.residual = runs[0].residual;
  double agree = std::max(1e-8, 1e3 * tol);
  for (const auto& r : runs) {
    if (std::abs(r.lambda - report.lambda) > agree * std::max(1.0, report.lambda))
      report.degenerate = true;
    for (int i = 0; i < n; ++i)
      if (std::abs(r.vec[i] - report.h[i]) > 1e-6) report.degenerate = true;
  }

  PowerResult left = power_iterate(mt, std::vector<double>(n, 1.0), tol, max_iter);
  double sum = 0;
  for (double x : left.vec) sum += x;
  report.nu = left.vec;
  for (double& x : report.nu) x /= sum;
  return report;
}

Alphabet tilt(const Alphabet& alpha, const TiltVector& v) {
  if (v.v.d != alpha.d) throw std::invalid_argument("tilt dimension mismatch");
  Alphabet out = alpha;
  for (int s = 0; s < alpha.n(); ++s) out.xi[s] += dot(v.v, alpha.disp[s]);
  return out;
}

double RenewalMassTable::mass_at(const Vec& x) const {
  if (x.d != d) throw std::invalid_argument("dimension mismatch");
  int64_t level = x[axis];
  if (level < 0 || level >= static_cast<int64_t>(level_mass.size())) return 0.0;
  int64_t w = t_halfwidth * level;
  int64_t idx = 0, stride = 1;
  for (int j = 0; j < d; ++j) {
    if (j == axis) continue;
    if (std::abs(static_cast<int64_t>(x[j])) > w) return 0.0;
    idx += (x[j] + w) * stride;
    stride *= 2 * w + 1;
  }
  return level_mass[level][idx];
}

RenewalMassTable renewal_mass(const Alphabet& alpha, const Potential& pot, const RVec& t,
                              double radius) {
  alpha.validate(t);
  pot.validate(alpha);
  int axis = axis_of(t);
  if (!(radius >= 0)) throw std::invalid_argument("radius must be nonnegative");
  int64_t levels = static_cast<int64_t>(std::floor(radius));
  int n = alpha.n();
  int d = alpha.d;

  std::vector<int64_t> height(n);
  std::vector<std::array<int64_t, kMaxDim>> step(n);
  int64_t hmax = 1, mt = 0;
  for (int s = 0; s < n; ++s) {
    height[s] = alpha.disp[s][axis];
    if (height[s] < 1) throw std::invalid_argument("symbol height below 1 along the axis");
    hmax = std::max(hmax, height[s]);
    for (int j = 0; j < d; ++j) {
      step[s][j] = alpha.disp[s][j];
      if (j != axis) mt = std::max(mt, std::abs(step[s][j]));
    }
  }

  auto cells = [&](int64_t level) {
    int64_t w = mt * level, c = 1;
    for (int j = 0; j < d - 1; ++j) c *= 2 * w + 1;
    return c;
  };
  int64_t total_cells = 0;
  for (int64_t lv = 0; lv <= levels; ++lv) total_cells += cells(lv);
  if (total_cells > 300'000'000)
    throw std::invalid_argument("radius exceeds the renewal memory budget");

  RenewalMassTable table;
  table.d = d;
  table.axis = axis;
  table.radius = radius;
  table.t_halfwidth = mt;
  table.level_mass.assign(levels + 1, {});
  table.level_mass[0] = {1.0};

  EigReport eig = leading_eig(alpha, pot);
  table.divergent = eig.lambda >= 1.0;

  // state[l mod (hmax+1)]: per-cell per-last-symbol accumulations
  std::vector<std::vector<double>> state(hmax + 1);
  state[0] = {};  // level 0 has no last symbol; the empty word is implicit

  std::vector<int64_t> tr_axes;
  for (int j = 0; j < d; ++j)
    if (j != axis) tr_axes.push_back(j);

  auto cell_index = [&](const std::array<int64_t, kMaxDim>& x, int64_t w) -> int64_t {
    int64_t idx = 0, stride = 1;
    for (int64_t j : tr_axes) {
      if (std::abs(x[j]) > w) return -1;
      idx += (x[j] + w) * stride;
      stride *= 2 * w + 1;
    }
    return idx;
  };

  std::vector<std::array<int64_t, kMaxDim>> coords_buf;
  for (int64_t lv = 1; lv <= levels; ++lv) {
    int64_t w = mt * lv;
    int64_t nc = cells(lv);
    auto& cur = state[lv % (hmax + 1)];
    cur.assign(static_cast<size_t>(nc) * n, 0.0);

    for (int b = 0; b < n; ++b) {
      int64_t prev_lv = lv - height[b];
      if (prev_lv < 0) continue;
      if (prev_lv == 0) {
        std::array<int64_t, kMaxDim> x{};
        for (int64_t j : tr_axes) x[j] = step[b][j];
        int64_t idx = cell_index(x, w);
        if (idx >= 0) cur[idx * n + b] += symbol_weight(alpha, pot, -1, b);
        continue;
      }
      const auto& prev = state[prev_lv % (hmax + 1)];
      int64_t pw = mt * prev_lv;
      int64_t pnc = cells(prev_lv);
      // walk the previous slab coordinates
      std::array<int64_t, kMaxDim> y{};
      for (int64_t j : tr_axes) y[j] = -pw;
      for (int64_t pidx = 0; pidx < pnc; ++pidx) {
        double acc = 0;
        if (pot.memory == 1) {
          for (int c = 0; c < n; ++c) acc += prev[pidx * n + c];
          acc *= std::exp(alpha.xi[b]);
        } else {
          for (int c = 0; c < n; ++c)
            acc += prev[pidx * n + c] * symbol_weight(alpha, pot, c, b);
        }
        if (acc != 0) {
          std::array<int64_t, kMaxDim> x{};
          for (int64_t j : tr_axes) x[j] = y[j] + step[b][j];
          int64_t idx = cell_index(x, w);
          if (idx < 0) throw std::logic_error("renewal step left the transverse slab");
          cur[idx * n + b] += acc;
        }
        for (size_t jj = 0; jj < tr_axes.size(); ++jj) {
          int64_t j = tr_axes[jj];
          if (++y[j] <= pw) break;
          y[j] = -pw;
        }
      }
    }

    auto& out = table.level_mass[lv];
    out.assign(nc, 0.0);
    for (int64_t i = 0; i < nc; ++i)
      for (int b = 0; b < n; ++b) out[i] += cur[i * n + b];
  }
  return table;
}

PrefactorFit prefactor_fit_series(const std::vector<double>& radii,
                                  const std::vector<double>& mass) {
  if (radii.size() != mass.size()) throw std::invalid_argument("series length mismatch");
  size_t n = radii.size();
  if (n < 10) throw std::invalid_argument("prefactor fit needs at least 10 points");
  for (double m : mass)
    if (!(m > 0)) throw std::invalid_argument("prefactor fit needs positive masses");

  // columns: 1, -r, -log r; beta = (logA, tau, alpha)
  double xtx[3][3] = {};
  double xty[3] = {};
  for (size_t i = 0; i < n; ++i) {
    double row[3] = {1.0, -radii[i], -std::log(radii[i])};
    double y = std::log(mass[i]);
    for (int a = 0; a < 3; ++a) {
      xty[a] += row[a] * y;
      for (int b = 0; b < 3; ++b) xtx[a][b] += row[a] * row[b];
    }
  }

  double det = xtx[0][0] * (xtx[1][1] * xtx[2][2] - xtx[1][2] * xtx[2][1]) -
               xtx[0][1] * (xtx[1][0] * xtx[2][2] - xtx[1][2] * xtx[2][0]) +
               xtx[0][2] * (xtx[1][0] * xtx[2][1] - xtx[1][1] * xtx[2][0]);
  if (std::abs(det) < 1e-12) throw std::runtime_error("prefactor design matrix is singular");
  double inv[3][3];
  inv[0][0] = (xtx[1][1] * xtx[2][2] - xtx[1][2] * xtx[2][1]) / det;
  inv[0][1] = (xtx[0][2] * xtx[2][1] - xtx[0][1] * xtx[2][2]) / det;
  inv[0][2] = (xtx[0][1] * xtx[1][2] - xtx[0][2] * xtx[1][1]) / det;
  inv[1][0] = (xtx[1][2] * xtx[2][0] - xtx[1][0] * xtx[2][2]) / det;
  inv[1][1] = (xtx[0][0] * xtx[2][2] - xtx[0][2] * xtx[2][0]) / det;
  inv[1][2] = (xtx[0][2] * xtx[1][0] - xtx[0][0] * xtx[1][2]) / det;
  inv[2][0] = (xtx[1][0] * xtx[2][1] - xtx[1][1] * xtx[2][0]) / det;
  inv[2][1] = (xtx[0][1] * xtx[2][0] - xtx[0][0] * xtx[2][1]) / det;
  inv[2][2] = (xtx[0][0] * xtx[1][1] - xtx[0][1] * xtx[1][0]) / det;

  double beta[3];
  for (int a = 0; a < 3; ++a) {
    beta[a] = 0;
    for (int b = 0; b < 3; ++b) beta[a] += inv[a][b] * xty[b];
  }

  double rss = 0;
  for (size_t i = 0; i < n; ++i) {
    double fit = beta[0] - beta[1] * radii[i] - beta[2] * std::log(radii[i]);
    double r = std::log(mass[i]) - fit;
    rss += r * r;
  }
  double sigma2 = n > 3 ? rss / static_cast<double>(n - 3) : 0.0;

  PrefactorFit fit;
  fit.log_amplitude = beta[0];
  fit.tau = beta[1];
  fit.alpha = beta[2];
  fit.alpha_stderr = std::sqrt(std::max(0.0, sigma2 * inv[2][2]));
  fit.rss = rss;
  fit.points = static_cast<int>(n);
  return fit;
}

PrefactorFit prefactor_fit(const RenewalMassTable& table, const Vec& direction, double r1,
                           double r2) {
  if (direction.d != table.d) throw std::invalid_argument("dimension mismatch");
  if (!(r1 > 0 && r2 >= r1)) throw std::invalid_argument("bad radius range");
  std::vector<double> radii, mass;
  for (int64_t r = static_cast<int64_t>(std::ceil(r1)); r <= static_cast<int64_t>(std::floor(r2));
       ++r) {
    Vec x = direction * static_cast<int32_t>(r);
    double m = table.mass_at(x);
    if (m > 0) {
      radii.push_back(static_cast<double>(r));
      mass.push_back(m);
    }
  }
  return prefactor_fit_series(radii, mass);
}

std::vector<PressurePoint> pressure_surface(const Alphabet& alpha, const Potential& pot,
                                            const std::vector<RVec>& grid) {
  std::vector<PressurePoint> out;
  for (const RVec& v : grid) {
    PressurePoint pt;
    pt.v = v;
    try {
      Alphabet tilted = tilt(alpha, TiltVector{v});
      EigReport eig = leading_eig(tilted, pot);
      pt.log_lambda = std::log(eig.lambda);
      pt.admissible = std::isfinite(pt.log_lambda) && !eig.degenerate;
    } catch (const std::exception&) {
      pt.admissible = false;
    }
    out.push_back(pt);
  }
  return out;
}

RVec mean_displacement(const Alphabet& alpha, const Potential& pot) {
  if (pot.memory != 1)
    throw std::invalid_argument("mean displacement closed form is memoryless only");
  double total = 0;
  RVec acc = RVec::zero(alpha.d);
  for (int s = 0; s < alpha.n(); ++s) {
    double w = std::exp(alpha.xi[s]);
    total += w;
    acc = acc + RVec::from(alpha.disp[s]) * w;
  }
  if (!(total > 0)) throw std::invalid_argument("operator has zero total weight");
  return acc * (1.0 / total);
}

Alphabet alphabet_from_counts(const std::vector<Vec>& displacements,
                              const std::vector<int64_t>& counts, double log_shift) {
  if (displacements.size() != counts.size() || displacements.empty())
    throw std::invalid_argument("displacement and count lists must match and be nonempty");
  Alphabet alpha;
  alpha.d = displacements.front().d;
  for (size_t i = 0; i < displacements.size(); ++i) {
    if (counts[i] <= 0) throw std::invalid_argument("counts must be positive");
    alpha.disp.push_back(displacements[i]);
    alpha.xi.push_back(std::log(static_cast<double>(counts[i])) + log_shift);
  }
  return alpha;
}

namespace {

Alphabet synthetic_alphabet(int d, const std::vector<std::pair<Vec, double>>& table,
                            double decay) {
  Alphabet alpha;
  alpha.d = d;
  for (const auto& [x, p] : table) {
    alpha.disp.push_back(x);
    alpha.xi.push_back(std::log(p) - decay);
  }
  return alpha;
}

Vec v3(int a, int b, int c) {
  Vec v = Vec::zero(3);
  v[0] = a;
  v[1] = b;
  v[2] = c;
  return v;
}

Vec v2(int a, int b) {
  Vec v = Vec::zero(2);
  v[0] = a;
  v[1] = b;
  return v;
}

}  // namespace

Alphabet builtin_alphabet_d3() {
  return synthetic_alphabet(3,
                            {{v3(1, 0, 0), 0.4},
                             {v3(1, 1, 0), 0.125},
                             {v3(1, -1, 0), 0.125},
                             {v3(1, 0, 1), 0.125},
                             {v3(1, 0, -1), 0.125},
                             {v3(1, 1, 1), 0.05},
                             {v3(1, -1, -1), 0.05}},
                            0.4);
}

Alphabet builtin_alphabet_d2() {
  return synthetic_alphabet(2, {{v2(1, 0), 0.5}, {v2(1, 1), 0.25}, {v2(1, -1), 0.25}}, 0.4);
}

Alphabet load_alphabet(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(path + ": " + e.what());
  }
  Alphabet alpha;
  alpha.d = j.at("d").get<int>();
  for (const auto& sym : j.at("symbols")) {
    Vec x = Vec::zero(alpha.d);
    for (int k = 0; k < alpha.d; ++k) x[k] = sym.at("x").at(k).get<int32_t>();
    alpha.disp.push_back(x);
    alpha.xi.push_back(sym.at("xi").get<double>());
  }
  return alpha;
}

void save_alphabet(const Alphabet& alpha, const std::string& path) {
  nlohmann::json j;
  j["d"] = alpha.d;
  auto& syms = j["symbols"] = nlohmann::json::array();
  for (int s = 0; s < alpha.n(); ++s) {
    nlohmann::json sym;
    auto& coords = sym["x"] = nlohmann::json::array();
    for (int k = 0; k < alpha.d; ++k) coords.push_back(alpha.disp[s][k]);
    sym["xi"] = alpha.xi[s];
    syms.push_back(sym);
  }
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << j.dump(2) << "\n";
  if (!out) throw std::runtime_error("failed writing " + path);
}

void save_mass_csv(const RenewalMassTable& table, const std::string& path,
                   int64_t transverse_cap) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << "# ozlab " << kVersion
      << "; renewal mass table, lattice coordinates in steps; mass(0) = 1 is the empty"
         " concatenation\n";
  for (int j = 0; j < table.d; ++j) out << "x" << j + 1 << ",";
  out << "mass\n";
  char buf[64];
  int64_t levels = static_cast<int64_t>(table.level_mass.size());
  std::vector<int64_t> tr;
  for (int j = 0; j < table.d; ++j)
    if (j != table.axis) tr.push_back(j);
  for (int64_t lv = 0; lv < levels; ++lv) {
    int64_t w = std::min(table.t_halfwidth * lv, transverse_cap);
    std::array<int64_t, kMaxDim> x{};
    for (int64_t j : tr) x[j] = -w;
    for (;;) {
      Vec v = Vec::zero(table.d);
      v[table.axis] = static_cast<int32_t>(lv);
      for (int64_t j : tr) v[j] = static_cast<int32_t>(x[j]);
      double m = table.mass_at(v);
      if (m != 0) {
        for (int j = 0; j < table.d; ++j) out << v[j] << ",";
        std::snprintf(buf, sizeof buf, "%.17g", m);
        out << buf << "\n";
      }
      size_t jj = 0;
      for (; jj < tr.size(); ++jj) {
        if (++x[tr[jj]] <= w) break;
        x[tr[jj]] = -w;
      }
      if (jj == tr.size()) break;
    }
  }
  if (!out) throw std::runtime_error("failed writing " + path);
}

}  // namespace oz

#pragma once
#include <cstdint>
#include <string>
#include <vector>

#include "ozlab/geometry.hpp"

namespace oz {

// Finite alphabet of irreducible pieces: displacement and base log-weight
// per symbol. Memory depth 1 uses xi only; depth 2 adds a pair table
// xi2[prev][next] on top of the per-symbol term.
struct Alphabet {
  int d = 0;
  std::vector<Vec> disp;
  std::vector<double> xi;
  int n() const { return static_cast<int>(disp.size()); }
  void validate(const RVec& t) const;  // forward heights >= 1, finite weights
};

struct Potential {
  int memory = 1;                        // 1 or 2
  std::vector<std::vector<double>> xi2;  // memory 2 only: [prev][next]
  void validate(const Alphabet& alpha) const;
};

// e^{xi[next] (+ xi2[prev][next])}; prev = -1 marks the first symbol.
double symbol_weight(const Alphabet& alpha, const Potential& pot, int prev, int next);

// One application of the weighted transfer operator on block-indexed f:
// memory 1 collapses to a single entry, memory 2 indexes by the previous
// symbol, (Lf)[a] = sum_b W(a,b) f[b].
std::vector<double> ruelle_apply(const std::vector<double>& f, const Alphabet& alpha,
                                 const Potential& pot);

struct EigReport {
  double lambda = 0;
  std::vector<double> h;    // right eigenfunction, max-normalized
  std::vector<double> nu;   // left weights, sum-normalized
  int iterations = 0;
  double residual = 0;
  bool degenerate = false;  // restart disagreement: multiplicity > 1
};

EigReport leading_eig(const Alphabet& alpha, const Potential& pot, double tol = 1e-12,
                      int max_iter = 200000);

struct TiltVector {
  RVec v;
};

// Tilted copy: xi(s) += <v, X(s)>.
Alphabet tilt(const Alphabet& alpha, const TiltVector& v);

// Accumulated renewal masses sum over n of nu_n(sum of X = x), stored as
// dense transverse slabs per height level along the axis direction.
struct RenewalMassTable {
  int d = 0;
  int axis = 0;
  double radius = 0;
  int64_t t_halfwidth = 0;  // per-level transverse halfwidth factor
  bool divergent = false;   // leading eigenvalue >= 1 for these weights
  std::vector<std::vector<double>> level_mass;

  // 0 outside the computed range; 1 at x = 0 (empty concatenation).
  double mass_at(const Vec& x) const;
};

// Exact DP over height levels; supports axis tilts with integer forward
// heights >= 1 and memory <= 2.
RenewalMassTable renewal_mass(const Alphabet& alpha, const Potential& pot, const RVec& t,
                              double radius);

struct PrefactorFit {
  double tau = 0;
  double alpha = 0;
  double log_amplitude = 0;
  double alpha_stderr = 0;
  double rss = 0;
  int points = 0;
};

// Least squares for log mass(r x_hat) = logA - tau r - alpha log r over
// integer radii in [r1, r2] with positive mass.
PrefactorFit prefactor_fit(const RenewalMassTable& table, const Vec& direction, double r1,
                           double r2);

PrefactorFit prefactor_fit_series(const std::vector<double>& radii,
                                  const std::vector<double>& mass);

struct PressurePoint {
  RVec v;
  double log_lambda = 0;
  bool admissible = true;
};

std::vector<PressurePoint> pressure_surface(const Alphabet& alpha, const Potential& pot,
                                            const std::vector<RVec>& grid);

// Mean displacement under the tilted eigen-measure (memoryless closed form).
RVec mean_displacement(const Alphabet& alpha, const Potential& pot);

// Builder from empirical piece statistics: weight = log frequency + shift.
Alphabet alphabet_from_counts(const std::vector<Vec>& displacements,
                              const std::vector<int64_t>& counts, double log_shift);

// Bundled synthetic alphabets used by the prefactor verification: unit axis
// heights, symmetric transverse steps, subcritical total weight.
Alphabet builtin_alphabet_d3();
Alphabet builtin_alphabet_d2();

Alphabet load_alphabet(const std::string& path);
void save_alphabet(const Alphabet& alpha, const std::string& path);
void save_mass_csv(const RenewalMassTable& table, const std::string& path,
                   int64_t transverse_cap = 4);

}  // namespace oz

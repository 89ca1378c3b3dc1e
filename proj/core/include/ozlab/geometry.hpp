#pragma once
#include <array>
#include <cstdint>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

namespace oz {

inline constexpr int kMaxDim = 6;

// Integer lattice vector in dimension d (d <= kMaxDim). Unused slots stay 0
// so comparisons and hashing can ignore d beyond validation.
struct Vec {
  int d = 0;
  std::array<int32_t, kMaxDim> c{};

  static Vec zero(int d);
  static Vec unit(int d, int axis);

  int32_t& operator[](int i) { return c[i]; }
  int32_t operator[](int i) const { return c[i]; }

  Vec operator+(const Vec& o) const;
  Vec operator-(const Vec& o) const;
  Vec operator*(int32_t k) const;
  Vec operator-() const;
  bool operator==(const Vec& o) const { return d == o.d && c == o.c; }
  bool operator!=(const Vec& o) const { return !(*this == o); }
  bool operator<(const Vec& o) const;  // lexicographic, for canonical order
};

int64_t l1(const Vec& v);
int64_t linf(const Vec& v);
double l2(const Vec& v);
uint64_t hash_vec(const Vec& v);
std::string to_string(const Vec& v);

struct VecHash {
  size_t operator()(const Vec& v) const { return static_cast<size_t>(hash_vec(v)); }
};

// Real direction vector, same fixed storage.
struct RVec {
  int d = 0;
  std::array<double, kMaxDim> c{};

  static RVec zero(int d);
  static RVec from(const Vec& v);
  static RVec axis(int d, int ax);

  double& operator[](int i) { return c[i]; }
  double operator[](int i) const { return c[i]; }
  RVec operator+(const RVec& o) const;
  RVec operator-(const RVec& o) const;
  RVec operator*(double k) const;
};

double dot(const RVec& a, const RVec& b);
double dot(const RVec& a, const Vec& b);
double norm(const RVec& a);
RVec normalized(const RVec& a);  // throws on zero vector
std::string to_string(const RVec& v);

// Axis-aligned box of lattice vertices: lo + [0,dims) per axis.
struct Box {
  int d = 0;
  Vec lo;
  std::array<int32_t, kMaxDim> dims{};

  int64_t vertex_count() const;
  bool contains(const Vec& v) const;
  // Row-major linear index with axis 0 fastest.
  int64_t index_of(const Vec& v) const;
  Vec vertex_at(int64_t idx) const;
  bool on_boundary(const Vec& v) const;  // some coordinate at lo or lo+dim-1
  Box grown(int margin) const;
};

// Finite box of side L, either at the origin corner or origin-centered.
struct LatticeSpec {
  int d = 2;
  int L = 2;
  bool centered = false;

  Box box() const;
  void validate() const;  // throws std::invalid_argument on bad d or L
};

// Directed representation of the undirected edge {v, v+e_axis}.
struct Edge {
  Vec v;
  int axis = 0;

  Vec other() const;
  bool operator==(const Edge& e) const { return axis == e.axis && v == e.v; }
  bool operator<(const Edge& e) const;
};

uint64_t hash_edge(const Edge& e);
struct EdgeHash {
  size_t operator()(const Edge& e) const { return static_cast<size_t>(hash_edge(e)); }
};
std::string to_string(const Edge& e);

// A plaquette is the (d-1)-cell dual to an edge; the bijection is the
// identity on the underlying (vertex, axis) pair, so dual(dual(e)) == e.
struct Plaquette {
  Edge e;
  bool operator==(const Plaquette& p) const { return e == p.e; }
  bool operator<(const Plaquette& p) const { return e < p.e; }
};

Plaquette dual(const Edge& e);
Edge dual(const Plaquette& p);
RVec plaquette_center(const Plaquette& p);

// Plaquettes adjacent to p in the dual-surface graph: boundaries share a
// (d-2)-cell. Degree is 6(d-1) in the bulk.
std::vector<Plaquette> plaquette_neighbors(const Plaquette& p);

// Edges of the box graph in deterministic order: vertices row-major, axes
// ascending, keeping edges whose far endpoint stays inside.
std::vector<Edge> edges_of_box(const LatticeSpec& spec);
std::vector<Edge> edges_of_box(const Box& box);

// Dense edge-id lookup for a box; id -1 where the edge leaves the box.
struct EdgeIndexer {
  Box box;
  std::vector<Edge> edges;
  std::vector<int32_t> ids;  // box.vertex_count() * d slots

  explicit EdgeIndexer(const Box& b);
  int32_t id_of(const Edge& e) const;  // -1 if absent
  int edge_count() const { return static_cast<int>(edges.size()); }
};

// Cone C_eps(t) = { x : <t_hat, x> >= (1-eps) |x| }.
struct Cone {
  RVec t;       // any nonzero vector; normalized on construction
  double eps;   // in (0,1)

  Cone(const RVec& t_, double eps_);
  bool contains(const RVec& x) const;
  bool contains(const Vec& x) const;
};

// First coordinate axis maximizing <t, e_i>; ties resolved to the lowest
// axis index.
int cone_axis(const RVec& t);

// Index of the half-open slab [iN, (i+1)N) along t_hat containing x;
// nullopt when <t_hat, x> < 0.
std::optional<int64_t> slab_index(const Vec& x, const RVec& t, double N);
std::optional<int64_t> slab_index_of_height(double h, double N);

}  // namespace oz

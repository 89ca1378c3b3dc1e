#include "ozlab/geometry.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace oz {

static void check_dim(int d) {
  if (d < 1 || d > kMaxDim)
    throw std::invalid_argument("dimension must be in [1, " + std::to_string(kMaxDim) + "]");
}

Vec Vec::zero(int d) {
  check_dim(d);
  Vec v;
  v.d = d;
  return v;
}

Vec Vec::unit(int d, int axis) {
  Vec v = zero(d);
  if (axis < 0 || axis >= d) throw std::invalid_argument("axis out of range");
  v.c[axis] = 1;
  return v;
}

Vec Vec::operator+(const Vec& o) const {
  Vec r = *this;
  for (int i = 0; i < d; ++i) r.c[i] += o.c[i];
  return r;
}

Vec Vec::operator-(const Vec& o) const {
  Vec r = *this;
  for (int i = 0; i < d; ++i) r.c[i] -= o.c[i];
  return r;
}

Vec Vec::operator*(int32_t k) const {
  Vec r = *this;
  for (int i = 0; i < d; ++i) r.c[i] *= k;
  return r;
}

Vec Vec::operator-() const {
  Vec r = *this;
  for (int i = 0; i < d; ++i) r.c[i] = -r.c[i];
  return r;
}

bool Vec::operator<(const Vec& o) const {
  for (int i = 0; i < d; ++i)
    if (c[i] != o.c[i]) return c[i] < o.c[i];
  return false;
}

int64_t l1(const Vec& v) {
  int64_t s = 0;
  for (int i = 0; i < v.d; ++i) s += std::abs(static_cast<int64_t>(v.c[i]));
  return s;
}

int64_t linf(const Vec& v) {
  int64_t s = 0;
  for (int i = 0; i < v.d; ++i) s = std::max(s, std::abs(static_cast<int64_t>(v.c[i])));
  return s;
}

double l2(const Vec& v) {
  double s = 0;
  for (int i = 0; i < v.d; ++i) s += static_cast<double>(v.c[i]) * v.c[i];
  return std::sqrt(s);
}

uint64_t hash_vec(const Vec& v) {
  uint64_t h = 0xcbf29ce484222325ULL ^ static_cast<uint64_t>(v.d);
  for (int i = 0; i < v.d; ++i) {
    h ^= static_cast<uint64_t>(static_cast<uint32_t>(v.c[i]));
    h *= 0x100000001b3ULL;
    h ^= h >> 29;
  }
  return h;
}

std::string to_string(const Vec& v) {
  std::ostringstream os;
  os << '(';
  for (int i = 0; i < v.d; ++i) os << (i ? "," : "") << v.c[i];
  os << ')';
  return os.str();
}

RVec RVec::zero(int d) {
  check_dim(d);
  RVec v;
  v.d = d;
  return v;
}

RVec RVec::from(const Vec& v) {
  RVec r = zero(v.d);
  for (int i = 0; i < v.d; ++i) r.c[i] = v.c[i];
  return r;
}

RVec RVec::axis(int d, int ax) {
  RVec r = zero(d);
  r.c[ax] = 1.0;
  return r;
}

RVec RVec::operator+(const RVec& o) const {
  RVec r = *this;
  for (int i = 0; i < d; ++i) r.c[i] += o.c[i];
  return r;
}

RVec RVec::operator-(const RVec& o) const {
  RVec r = *this;
  for (int i = 0; i < d; ++i) r.c[i] -= o.c[i];
  return r;
}

RVec RVec::operator*(double k) const {
  RVec r = *this;
  for (int i = 0; i < d; ++i) r.c[i] *= k;
  return r;
}

double dot(const RVec& a, const RVec& b) {
  double s = 0;
  for (int i = 0; i < a.d; ++i) s += a.c[i] * b.c[i];
  return s;
}

double dot(const RVec& a, const Vec& b) {
  double s = 0;
  for (int i = 0; i < a.d; ++i) s += a.c[i] * b.c[i];
  return s;
}

double norm(const RVec& a) { return std::sqrt(dot(a, a)); }

RVec normalized(const RVec& a) {
  double n = norm(a);
  if (n == 0.0) throw std::invalid_argument("zero direction vector");
  return a * (1.0 / n);
}

std::string to_string(const RVec& v) {
  std::ostringstream os;
  os << '(';
  for (int i = 0; i < v.d; ++i) os << (i ? "," : "") << v.c[i];
  os << ')';
  return os.str();
}

int64_t Box::vertex_count() const {
  int64_t n = 1;
  for (int i = 0; i < d; ++i) n *= dims[i];
  return n;
}

bool Box::contains(const Vec& v) const {
  for (int i = 0; i < d; ++i) {
    int32_t x = v.c[i] - lo.c[i];
    if (x < 0 || x >= dims[i]) return false;
  }
  return true;
}

int64_t Box::index_of(const Vec& v) const {
  int64_t idx = 0, stride = 1;
  for (int i = 0; i < d; ++i) {
    idx += static_cast<int64_t>(v.c[i] - lo.c[i]) * stride;
    stride *= dims[i];
  }
  return idx;
}

Vec Box::vertex_at(int64_t idx) const {
  Vec v = Vec::zero(d);
  for (int i = 0; i < d; ++i) {
    v.c[i] = lo.c[i] + static_cast<int32_t>(idx % dims[i]);
    idx /= dims[i];
  }
  return v;
}

bool Box::on_boundary(const Vec& v) const {
  for (int i = 0; i < d; ++i) {
    int32_t x = v.c[i] - lo.c[i];
    if (x == 0 || x == dims[i] - 1) return true;
  }
  return false;
}

Box Box::grown(int margin) const {
  Box b = *this;
  for (int i = 0; i < d; ++i) {
    b.lo.c[i] -= margin;
    b.dims[i] += 2 * margin;
  }
  return b;
}

Box LatticeSpec::box() const {
  validate();
  Box b;
  b.d = d;
  b.lo = Vec::zero(d);
  for (int i = 0; i < d; ++i) {
    b.dims[i] = L;
    if (centered) b.lo.c[i] = -(L / 2);
  }
  return b;
}

void LatticeSpec::validate() const {
  check_dim(d);
  if (L < 1) throw std::invalid_argument("box side L must be >= 1");
  double count = std::pow(static_cast<double>(L), d);
  if (count > 4e9) throw std::invalid_argument("box too large");
}

Vec Edge::other() const {
  Vec w = v;
  w.c[axis] += 1;
  return w;
}

bool Edge::operator<(const Edge& e) const {
  if (v != e.v) return v < e.v;
  return axis < e.axis;
}

uint64_t hash_edge(const Edge& e) {
  return hash_vec(e.v) * 0x9e3779b97f4a7c15ULL + static_cast<uint64_t>(e.axis + 1);
}

std::string to_string(const Edge& e) {
  return to_string(e.v) + "+e" + std::to_string(e.axis);
}

Plaquette dual(const Edge& e) { return Plaquette{e}; }
Edge dual(const Plaquette& p) { return p.e; }

RVec plaquette_center(const Plaquette& p) {
  RVec c = RVec::from(p.e.v);
  c.c[p.e.axis] += 0.5;
  return c;
}

std::vector<Plaquette> plaquette_neighbors(const Plaquette& p) {
  // Two plaquettes are adjacent when their boundaries share a (d-2)-cell.
  // Each of the 2(d-1) sides of p is shared with one parallel and two
  // perpendicular plaquettes.
  const Vec& v = p.e.v;
  int a = p.e.axis;
  int d = v.d;
  std::vector<Plaquette> out;
  out.reserve(6 * (d - 1));
  for (int j = 0; j < d; ++j) {
    if (j == a) continue;
    Vec ej = Vec::unit(d, j);
    Vec ea = Vec::unit(d, a);
    out.push_back(Plaquette{Edge{v + ej, a}});
    out.push_back(Plaquette{Edge{v - ej, a}});
    out.push_back(Plaquette{Edge{v, j}});
    out.push_back(Plaquette{Edge{v + ea, j}});
    out.push_back(Plaquette{Edge{v - ej, j}});
    out.push_back(Plaquette{Edge{v - ej + ea, j}});
  }
  return out;
}

std::vector<Edge> edges_of_box(const Box& box) {
  std::vector<Edge> edges;
  int64_t n = box.vertex_count();
  for (int64_t i = 0; i < n; ++i) {
    Vec v = box.vertex_at(i);
    for (int a = 0; a < box.d; ++a) {
      Edge e{v, a};
      if (box.contains(e.other())) edges.push_back(e);
    }
  }
  return edges;
}

std::vector<Edge> edges_of_box(const LatticeSpec& spec) {
  return edges_of_box(spec.box());
}

EdgeIndexer::EdgeIndexer(const Box& b) : box(b), edges(edges_of_box(b)) {
  ids.assign(static_cast<size_t>(box.vertex_count()) * box.d, -1);
  for (size_t k = 0; k < edges.size(); ++k) {
    int64_t vi = box.index_of(edges[k].v);
    ids[static_cast<size_t>(vi) * box.d + edges[k].axis] = static_cast<int32_t>(k);
  }
}

int32_t EdgeIndexer::id_of(const Edge& e) const {
  if (!box.contains(e.v) || !box.contains(e.other())) return -1;
  return ids[static_cast<size_t>(box.index_of(e.v)) * box.d + e.axis];
}

Cone::Cone(const RVec& t_, double eps_) : t(normalized(t_)), eps(eps_) {
  if (!(eps > 0.0) || !(eps < 1.0)) throw std::invalid_argument("cone eps must be in (0,1)");
}

bool Cone::contains(const RVec& x) const {
  return dot(t, x) >= (1.0 - eps) * norm(x) - 1e-12;
}

bool Cone::contains(const Vec& x) const { return contains(RVec::from(x)); }

int cone_axis(const RVec& t) {
  if (norm(t) == 0.0) throw std::invalid_argument("zero direction vector");
  int best = 0;
  for (int i = 1; i < t.d; ++i)
    if (t.c[i] > t.c[best]) best = i;
  return best;
}

std::optional<int64_t> slab_index_of_height(double h, double N) {
  if (N <= 0.0) throw std::invalid_argument("slab width must be positive");
  if (h < 0.0) return std::nullopt;
  return static_cast<int64_t>(std::floor(h / N));
}

std::optional<int64_t> slab_index(const Vec& x, const RVec& t, double N) {
  RVec th = normalized(t);
  return slab_index_of_height(dot(th, x), N);
}

}  // namespace oz

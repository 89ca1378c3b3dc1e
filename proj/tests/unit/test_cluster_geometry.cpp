#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <set>
#include <vector>

#include "doctest.h"
#include "ozlab/cluster_geometry.hpp"
#include "ozlab/sampler.hpp"

using namespace oz;

namespace {

Cluster make_cluster(std::vector<Vec> vertices, std::vector<Edge> edges, bool finite = true) {
  Cluster c;
  c.vertices = std::move(vertices);
  c.edges = std::move(edges);
  c.finite = finite;
  std::sort(c.vertices.begin(), c.vertices.end());
  std::sort(c.edges.begin(), c.edges.end());
  return c;
}

Cluster line_cluster(int d, int n) {
  std::vector<Vec> vs;
  std::vector<Edge> es;
  for (int i = 0; i <= n; ++i) vs.push_back(Vec::unit(d, 0) * i);
  for (int i = 0; i < n; ++i) es.push_back(Edge{Vec::unit(d, 0) * i, 0});
  return make_cluster(std::move(vs), std::move(es));
}

std::vector<int> axis_coords(const std::vector<Vec>& pts) {
  std::vector<int> out;
  for (const Vec& p : pts) out.push_back(p[0]);
  return out;
}

BondConfig config_with_open(const LatticeSpec& spec, const std::vector<Edge>& open) {
  EdgeIndexer idx(spec.box());
  BondConfig c;
  c.open.assign(idx.edge_count(), 0);
  for (const Edge& e : open) {
    int id = idx.id_of(e);
    REQUIRE(id >= 0);
    c.open[id] = 1;
  }
  return c;
}

}  // namespace

TEST_CASE("component extraction") {
  LatticeSpec spec{3, 5, true};
  BondConfig closed;
  closed.open.assign(edges_of_box(spec).size(), 0);
  auto comps = components(closed, spec);
  CHECK(comps.clusters.size() == 125);
  for (const auto& c : comps.clusters) {
    CHECK(c.vertices.size() == 1);
    CHECK(c.finite == !spec.box().on_boundary(c.vertices[0]));
  }

  BondConfig open;
  open.open.assign(edges_of_box(spec).size(), 1);
  auto all = components(open, spec);
  CHECK(all.clusters.size() == 1);
  CHECK_FALSE(all.clusters[0].finite);

  auto one = components(config_with_open(spec, {Edge{Vec::zero(3), 0}}), spec);
  const Cluster& at0 = one.at(Vec::zero(3));
  CHECK(at0.vertices.size() == 2);
  CHECK(at0.edges.size() == 1);
  CHECK(at0.finite);
  CHECK(at0.contains(Vec::unit(3, 0)));
  CHECK(one.at(Vec::unit(3, 1)).vertices.size() == 1);
}

TEST_CASE("cluster validation") {
  validate_cluster(line_cluster(3, 4));
  Cluster disconnected = make_cluster({Vec::zero(2), Vec::unit(2, 0) * 2}, {});
  CHECK_THROWS_AS(validate_cluster(disconnected), std::invalid_argument);
  Cluster dangling = make_cluster({Vec::zero(2)}, {Edge{Vec::zero(2), 0}});
  CHECK_THROWS_AS(validate_cluster(dangling), std::invalid_argument);
}

TEST_CASE("external boundary of small clusters") {
  LatticeSpec spec{3, 9, true};
  Cluster point = make_cluster({Vec::zero(3)}, {});
  auto bs = external_boundary_and_surface(point, spec);
  CHECK(bs.boundary.size() == 6);
  CHECK(bs.surface.plaquettes.size() == 6);
  CHECK(plaquette_components(bs.surface.plaquettes).size() == 1);

  Cluster domino = make_cluster({Vec::zero(3), Vec::unit(3, 0)}, {Edge{Vec::zero(3), 0}});
  CHECK(external_boundary_and_surface(domino, spec).surface.plaquettes.size() == 10);

  Cluster infinite = line_cluster(3, 2);
  infinite.finite = false;
  CHECK_THROWS_AS(external_boundary_and_surface(infinite, spec), std::invalid_argument);
}

TEST_CASE("hole of a ring is filled") {
  LatticeSpec spec{2, 9, true};
  std::vector<Vec> vs;
  std::vector<Edge> es;
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 3; ++b)
      if (a != 1 || b != 1) {
        Vec v = Vec::zero(2);
        v[0] = a;
        v[1] = b;
        vs.push_back(v);
      }
  auto at = [](int a, int b) {
    Vec v = Vec::zero(2);
    v[0] = a;
    v[1] = b;
    return v;
  };
  es = {Edge{at(0, 0), 0}, Edge{at(1, 0), 0}, Edge{at(2, 0), 1}, Edge{at(2, 1), 1},
        Edge{at(1, 2), 0}, Edge{at(0, 2), 0}, Edge{at(0, 0), 1}, Edge{at(0, 1), 1}};
  Cluster ring = make_cluster(vs, es);
  auto bs = external_boundary_and_surface(ring, spec);
  CHECK(bs.boundary.size() == 12);
  for (const Edge& e : bs.boundary) {
    bool v_in = ring.contains(e.v), o_in = ring.contains(e.other());
    CHECK(v_in != o_in);
    // no boundary edge reaches into the hole
    CHECK(e.v != at(1, 1));
    CHECK(e.other() != at(1, 1));
  }
}

TEST_CASE("phi psi oracle values") {
  LatticeSpec d3{3, 9, true}, d2{2, 9, true};
  auto zero = phi_psi_oracle(Vec::zero(3), d3);
  CHECK(zero.phi == 0);
  CHECK(zero.psi == 0);
  auto e1d3 = phi_psi_oracle(Vec::unit(3, 0), d3);
  CHECK(e1d3.phi == 10);
  CHECK(e1d3.psi == 1);
  auto e1d2 = phi_psi_oracle(Vec::unit(2, 0), d2);
  CHECK(e1d2.phi == 6);
  CHECK(e1d2.psi == 1);
  auto diag = phi_psi_oracle(Vec::unit(3, 0) + Vec::unit(3, 1), d3);
  CHECK(diag.phi == 14);
  CHECK(diag.psi == 2);
}

TEST_CASE("phi grows linearly with l1 distance on the axis") {
  LatticeSpec d3{3, 11, true};
  LatticeSpec d2{2, 11, true};
  for (int n = 0; n <= 2; ++n) {
    CHECK(phi_psi_oracle(Vec::unit(3, 0) * n, d3).phi == (n == 0 ? 0 : 4 * (n + 1) + 2));
    CHECK(phi_psi_oracle(Vec::unit(2, 0) * n, d2).phi == (n == 0 ? 0 : 2 * (n + 1) + 2));
  }
}

TEST_CASE("phi sandwich and subadditivity on oracle pairs") {
  LatticeSpec d2{2, 11, true};
  std::vector<Vec> xs;
  for (int a = 0; a <= 2; ++a)
    for (int b = 0; b <= 1; ++b)
      if (a + b > 0 && a + b <= 3) {
        Vec v = Vec::zero(2);
        v[0] = a;
        v[1] = b;
        xs.push_back(v);
      }
  double c2 = 12.0;  // empirical slack for desk-scale x
  for (const Vec& x : xs) {
    auto pp = phi_psi_oracle(x, d2);
    CHECK(pp.psi >= 1);
    CHECK((double)pp.phi / (double)pp.psi <= c2);
    CHECK((double)pp.phi / (double)pp.psi >= 1.0 / c2);
    CHECK((double)pp.phi <= 8.0 * (double)l1(x) + 8.0);
  }
  for (const Vec& x : xs)
    for (const Vec& y : xs) {
      if (l1(x + y) > 3) continue;
      auto s = phi_psi_oracle(x + y, d2);
      CHECK(s.phi <= phi_psi_oracle(x, d2).phi + phi_psi_oracle(y, d2).phi);
    }
}

TEST_CASE("phi_t oracle values") {
  LatticeSpec d3{3, 9, true}, d2{2, 9, true};
  RVec t = RVec::axis(3, 0);
  CHECK(phi_t_oracle(Vec::unit(3, 0), t, d3) == 8);
  CHECK(phi_t_oracle(Vec::unit(3, 0) * 2, t, d3) == 12);
  CHECK(phi_t_oracle(Vec::zero(3), t, d3) == 0);
  CHECK(phi_t_oracle(Vec::unit(2, 0), RVec::axis(2, 0), d2) == 4);
  CHECK(phi_t_oracle(Vec::unit(3, 0) * 2, t, d3) >= phi_t_oracle(Vec::unit(3, 0), t, d3));
}

TEST_CASE("break points of a line") {
  RVec t = RVec::axis(3, 0);
  Cluster line = line_cluster(3, 5);
  Vec x0 = Vec::zero(3), x5 = Vec::unit(3, 0) * 5;
  auto bp = break_points(line, t, x0, x5);
  CHECK(bp.u == Vec::unit(3, 0));
  CHECK(axis_coords(bp.break_points) == std::vector<int>{1, 2, 3, 4});
  CHECK(bp.t_bonds.size() == 3);
  for (size_t i = 0; i + 1 < bp.break_points.size(); ++i)
    CHECK(dot(t, bp.break_points[i]) < dot(t, bp.break_points[i + 1]));

  Cluster two = make_cluster({x0, Vec::unit(3, 0)}, {Edge{x0, 0}});
  CHECK(break_points(two, t, x0, Vec::unit(3, 0)).break_points.empty());
}

TEST_CASE("a side spur disqualifies nearby break points") {
  RVec t = RVec::axis(3, 0);
  Cluster spur = line_cluster(3, 5);
  spur.vertices.push_back(Vec::unit(3, 0) * 2 + Vec::unit(3, 1));
  spur.edges.push_back(Edge{Vec::unit(3, 0) * 2, 1});
  std::sort(spur.vertices.begin(), spur.vertices.end());
  std::sort(spur.edges.begin(), spur.edges.end());
  auto bp = break_points(spur, t, Vec::zero(3), Vec::unit(3, 0) * 5);
  // the spur vertex shares the height window of 1e1, 2e1 and 3e1
  CHECK(axis_coords(bp.break_points) == std::vector<int>{4});
}

TEST_CASE("cone points on the axis accept every eps") {
  RVec t = RVec::axis(3, 0);
  Cluster line = line_cluster(3, 5);
  Vec x0 = Vec::zero(3), x5 = Vec::unit(3, 0) * 5;
  for (double eps : {0.1, 0.3, 0.5, 0.7, 0.9}) {
    auto cp = cone_points(line, t, eps, x0, x5);
    CHECK(cp.cone_points.size() == 4);
    CHECK(cp.cone_bonds.size() == 3);
  }
}

TEST_CASE("a blob behind a candidate rejects it for narrow cones") {
  RVec t = RVec::axis(3, 0);
  Cluster c = line_cluster(3, 6);
  Vec a = Vec::unit(3, 0);
  for (int k = 1; k <= 3; ++k) {
    c.vertices.push_back(a + Vec::unit(3, 1) * k);
    c.edges.push_back(Edge{a + Vec::unit(3, 1) * (k - 1), 1});
  }
  std::sort(c.vertices.begin(), c.vertices.end());
  std::sort(c.edges.begin(), c.edges.end());
  Vec x0 = Vec::zero(3), x6 = Vec::unit(3, 0) * 6;
  auto narrow = cone_points(c, t, 0.25, x0, x6);
  auto wide = cone_points(c, t, 0.9, x0, x6);
  CHECK(axis_coords(narrow.cone_points) == std::vector<int>{5});
  CHECK(axis_coords(wide.cone_points) == std::vector<int>{3, 4, 5});
  // nesting
  for (const Vec& z : narrow.cone_points)
    CHECK(std::find(wide.cone_points.begin(), wide.cone_points.end(), z) !=
          wide.cone_points.end());
}

TEST_CASE("decomposition of the line cluster") {
  RVec t = RVec::axis(3, 0);
  Cluster line = line_cluster(3, 5);
  Vec x0 = Vec::zero(3), x5 = Vec::unit(3, 0) * 5;
  auto dec = irreducible_decomposition(line, t, 0.3, x0, x5);
  CHECK_FALSE(dec.trivial);
  CHECK(dec.cut_bonds.size() == 3);
  CHECK(dec.interior.size() == 2);
  CHECK(dec.backward.vertices.size() == 2);
  CHECK(dec.forward.vertices.size() == 2);
  REQUIRE(dec.displacements.size() == 2);
  for (const Vec& d : dec.displacements) CHECK(d == Vec::unit(3, 0));
  CHECK(reconstructs(dec, line));
  for (const Cluster& piece : dec.interior) {
    CHECK(piece.vertices.size() == 1);
    CHECK(piece.edges.empty());
  }
}

TEST_CASE("decomposition without cone bonds is trivial") {
  RVec t = RVec::axis(3, 0);
  Cluster two = make_cluster({Vec::zero(3), Vec::unit(3, 0)}, {Edge{Vec::zero(3), 0}});
  auto dec = irreducible_decomposition(two, t, 0.5, Vec::zero(3), Vec::unit(3, 0));
  CHECK(dec.trivial);
  CHECK(dec.interior.empty());
  CHECK(reconstructs(dec, two));
}

TEST_CASE("sampled clusters decompose and reconstruct with nested cone sets") {
  LatticeSpec spec{2, 11, true};
  RCParams params{1.5, 0.55};
  RVec t = RVec::axis(2, 0);
  std::vector<double> eps_grid = {0.2, 0.4, 0.6, 0.8};
  int n_checked = 0;
  for (int rep = 0; rep < 40; ++rep) {
    BondConfig cfg = sample_config(spec, params, BoundaryCondition::free_(), 30,
                                   derive_seed(404, "decomp-mini", rep));
    for (const Cluster& cl : components(cfg, spec).clusters) {
      if (!cl.finite || cl.vertices.size() < 2) continue;
      Vec x = cl.vertices[0], y = cl.vertices[0];
      for (const Vec& v : cl.vertices) {
        if (dot(t, v) < dot(t, x) - 1e-9 || (dot(t, v) == dot(t, x) && v < x)) x = v;
        if (dot(t, v) > dot(t, y) + 1e-9 || (dot(t, v) == dot(t, y) && y < v)) y = v;
      }
      size_t prev = 0;
      bool first = true;
      for (double eps : eps_grid) {
        auto dec = irreducible_decomposition(cl, t, eps, x, y);
        CHECK(reconstructs(dec, cl));
        auto cp = cone_points(cl, t, eps, x, y);
        if (!first) CHECK(cp.cone_points.size() >= prev);
        prev = cp.cone_points.size();
        first = false;
      }
      ++n_checked;
    }
  }
  CHECK(n_checked > 100);
}

TEST_CASE("slab classification of a straight tube") {
  LatticeSpec spec{3, 41, true};
  Cluster line = line_cluster(3, 15);
  auto bs = external_boundary_and_surface(line, spec);
  CHECK(bs.surface.plaquettes.size() == 66);
  RVec t = RVec::axis(3, 0);
  Vec x = Vec::unit(3, 0) * 15;
  auto rep = classify_slabs(bs.surface, t, 5, x, spec);
  CHECK(rep.min_crossing_ref == doctest::Approx(24.0));
  REQUIRE(rep.slabs.size() == 3);
  CHECK(rep.good_count == 3);
  CHECK(rep.bad_count == 0);
  CHECK(rep.slabs[0].size == 20);
  CHECK(rep.slabs[2].size == 24);
  for (const auto& s : rep.slabs) {
    CHECK(s.n_components == 1);
    CHECK(s.n_crossings == 1);
  }
}

TEST_CASE("a doubled crossing makes its slab bad") {
  LatticeSpec spec{3, 41, true};
  Cluster line = line_cluster(3, 15);
  auto bs = external_boundary_and_surface(line, spec);
  RVec t = RVec::axis(3, 0);

  Cluster parallel;
  Vec pb = Vec::unit(3, 0) * 10 + Vec::unit(3, 1) * 5;
  for (int i = 0; i <= 5; ++i) parallel.vertices.push_back(pb + Vec::unit(3, 0) * i);
  for (int i = 0; i < 5; ++i) parallel.edges.push_back(Edge{pb + Vec::unit(3, 0) * i, 0});
  parallel.finite = true;
  std::sort(parallel.vertices.begin(), parallel.vertices.end());
  std::sort(parallel.edges.begin(), parallel.edges.end());

  DualSurface doubled = bs.surface;
  for (const Plaquette& p : external_boundary_and_surface(parallel, spec).surface.plaquettes) {
    double c = dot(normalized(t), plaquette_center(p));
    if (c >= 10.0 && c < 15.0) doubled.plaquettes.push_back(p);
  }
  std::sort(doubled.plaquettes.begin(), doubled.plaquettes.end());

  auto rep = classify_slabs(doubled, t, 5, Vec::unit(3, 0) * 15, spec);
  REQUIRE(rep.slabs.size() == 3);
  CHECK(rep.slabs[0].good);
  CHECK(rep.slabs[1].good);
  CHECK_FALSE(rep.slabs[2].good);
  CHECK(rep.slabs[2].n_crossings == 2);
}

TEST_CASE("correct points of the tube require wide cones") {
  LatticeSpec spec{3, 41, true};
  Cluster line = line_cluster(3, 15);
  auto bs = external_boundary_and_surface(line, spec);
  RVec t = RVec::axis(3, 0);
  Vec x = Vec::unit(3, 0) * 15;
  auto rep = classify_slabs(bs.surface, t, 5, x, spec);

  auto narrow = correct_points(rep, line, t, 0.5);
  CHECK(axis_coords(narrow) == std::vector<int>{0, 15});
  auto mid = correct_points(rep, line, t, 0.75);
  CHECK(mid.size() == 10);
  auto wide = correct_points(rep, line, t, 0.9);
  CHECK(axis_coords(wide) ==
        std::vector<int>{0, 1, 2, 3, 4, 6, 7, 8, 9, 11, 12, 13, 14, 15});
  // monotone in eps
  for (const Vec& z : narrow) CHECK(std::find(mid.begin(), mid.end(), z) != mid.end());
  for (const Vec& z : mid) CHECK(std::find(wide.begin(), wide.end(), z) != wide.end());
}

TEST_CASE("a bad slab and its heavy block shrink the correct set") {
  LatticeSpec spec{3, 41, true};
  Cluster line = line_cluster(3, 15);
  auto bs = external_boundary_and_surface(line, spec);
  RVec t = RVec::axis(3, 0);
  Vec x = Vec::unit(3, 0) * 15;

  Cluster blob;
  Vec base = Vec::unit(3, 0) * 11 + Vec::unit(3, 1) * 10;
  for (int i = 0; i < 3; ++i) blob.vertices.push_back(base + Vec::unit(3, 0) * i);
  for (int i = 0; i < 2; ++i) blob.edges.push_back(Edge{base + Vec::unit(3, 0) * i, 0});
  blob.finite = true;
  std::sort(blob.vertices.begin(), blob.vertices.end());
  std::sort(blob.edges.begin(), blob.edges.end());

  DualSurface merged = bs.surface;
  for (const Plaquette& p : external_boundary_and_surface(blob, spec).surface.plaquettes)
    merged.plaquettes.push_back(p);
  std::sort(merged.plaquettes.begin(), merged.plaquettes.end());

  auto rep = classify_slabs(merged, t, 5, x, spec);
  CHECK(rep.bad_count == 1);
  CHECK_FALSE(rep.slabs[2].good);

  auto pts = correct_points(rep, line, t, 0.9);
  CHECK(axis_coords(pts) == std::vector<int>{0, 1, 2, 3, 4, 6, 7, 8});

  auto rep_clean = classify_slabs(bs.surface, t, 5, x, spec);
  auto clean = correct_points(rep_clean, line, t, 0.9);
  for (const Vec& z : pts) CHECK(std::find(clean.begin(), clean.end(), z) != clean.end());
  CHECK(pts.size() < clean.size());
}

TEST_CASE("mark sequences agree on a clean tube") {
  LatticeSpec spec{3, 41, true};
  Cluster line = line_cluster(3, 15);
  auto bs = external_boundary_and_surface(line, spec);
  RVec t = RVec::axis(3, 0);
  auto rep = classify_slabs(bs.surface, t, 5, Vec::unit(3, 0) * 15, spec);
  auto marks = mark_sequences(rep, 40.0);
  CHECK_FALSE(marks.m_plus.empty());
  CHECK_FALSE(marks.m_minus.empty());
  CHECK(marks.common >= 1);
}

TEST_CASE("strip restriction drops vertices outside the endpoint heights") {
  RVec t = RVec::axis(3, 0);
  Cluster c = line_cluster(3, 4);
  Vec behind = Vec::zero(3);
  behind[0] = -1;
  c.vertices.push_back(behind);
  c.edges.push_back(Edge{behind, 0});
  std::sort(c.vertices.begin(), c.vertices.end());
  std::sort(c.edges.begin(), c.edges.end());
  Cluster inside = restrict_to_strip(c, t, Vec::zero(3), Vec::unit(3, 0) * 4);
  CHECK(inside.vertices.size() == 5);
  CHECK_FALSE(inside.contains(behind));
  validate_cluster(inside);
}

TEST_CASE("cluster dumps round trip through jsonl") {
  LatticeSpec spec{2, 9, true};
  RCParams params{2.0, 0.6};
  std::vector<Cluster> kept;
  for (int rep = 0; rep < 5; ++rep) {
    BondConfig cfg = sample_config(spec, params, BoundaryCondition::free_(), 25,
                                   derive_seed(405, "jsonl", rep));
    for (const Cluster& cl : components(cfg, spec).clusters)
      if (cl.finite && cl.edges.size() >= 1) kept.push_back(cl);
  }
  REQUIRE(kept.size() > 0);
  std::string path = "cluster_round_trip.jsonl";
  std::filesystem::remove(path);
  dump_clusters_jsonl(path, kept);
  auto back = load_clusters_jsonl(path);
  REQUIRE(back.size() == kept.size());
  for (size_t i = 0; i < back.size(); ++i) {
    CHECK(back[i].vertices == kept[i].vertices);
    CHECK(back[i].edges == kept[i].edges);
    CHECK(back[i].finite == kept[i].finite);
  }
  std::filesystem::remove(path);
}

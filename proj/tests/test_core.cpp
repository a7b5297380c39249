#include <catch2/catch_amalgamated.hpp>

#include "glop/core.hpp"
#include "glop/rng.hpp"
#include "glop/shpp.hpp"

using namespace glop;

namespace {

RoutingInstance square_instance() {
  RoutingInstance inst;
  inst.coords = {{0, 0}, {1, 0}, {1, 1}, {0, 1}};
  return inst;
}

RoutingInstance random_tsp(int n, std::uint64_t seed) {
  RoutingInstance inst;
  Rng rng(seed);
  inst.coords.resize(n);
  for (auto& p : inst.coords) p = {rng.uniform(), rng.uniform()};
  return inst;
}

ShppTask task_from_points(std::vector<Point> pts) {
  ShppTask t;
  t.raw = std::move(pts);
  t.nodes.resize(t.raw.size());
  std::iota(t.nodes.begin(), t.nodes.end(), 0);
  std::vector<int> id(t.size());
  std::iota(id.begin(), id.end(), 0);
  t.length = path_coords_length(t.raw, id);
  return t;
}

}  // namespace

TEST_CASE("tour_length on unit square perimeter") {
  auto inst = square_instance();
  Tour t{{0, 1, 2, 3}};
  REQUIRE(tour_length(inst, t) == Catch::Approx(4.0));
}

TEST_CASE("tour_length on 2-node instance doubles the distance") {
  RoutingInstance inst;
  inst.coords = {{0, 0}, {0.3, 0.4}};
  Tour t{{0, 1}};
  REQUIRE(tour_length(inst, t) == Catch::Approx(1.0));
}

TEST_CASE("tour_length matches independent edge-sum oracle") {
  auto inst = random_tsp(7, 42);
  Rng rng(7);
  Tour t{rng.permutation(7)};
  double oracle = 0.0;
  for (int i = 0; i < 7; ++i) {
    const Point& a = inst.coords[t.order[i]];
    const Point& b = inst.coords[t.order[(i + 1) % 7]];
    oracle += std::hypot(a.x - b.x, a.y - b.y);
  }
  REQUIRE(tour_length(inst, t) == Catch::Approx(oracle).epsilon(1e-12));
}

TEST_CASE("tour_length rejects invalid permutations") {
  auto inst = square_instance();
  REQUIRE_THROWS_AS(tour_length(inst, Tour{{0, 1, 2, 2}}), ValidationError);
  REQUIRE_THROWS_AS(tour_length(inst, Tour{{0, 1, 2}}), ValidationError);
}

TEST_CASE("tour_length invariant under rotation and reversal") {
  auto inst = random_tsp(11, 5);
  Rng rng(6);
  Tour t{rng.permutation(11)};
  double base = tour_length(inst, t);
  for (int shift = 1; shift < 11; shift += 3) {
    Tour rot = t;
    std::rotate(rot.order.begin(), rot.order.begin() + shift, rot.order.end());
    REQUIRE(tour_length(inst, rot) == Catch::Approx(base).epsilon(1e-12));
  }
  Tour rev = t;
  std::reverse(rev.order.begin(), rev.order.end());
  REQUIRE(tour_length(inst, rev) == Catch::Approx(base).epsilon(1e-12));
}

TEST_CASE("shpp_length basics") {
  SECTION("two-node path is the direct distance") {
    auto t = task_from_points({{0, 0}, {3, 4}});
    REQUIRE(shpp_length(t, PathOrder{{0, 1}}) == Catch::Approx(5.0));
  }
  SECTION("collinear middle node adds nothing") {
    auto t = task_from_points({{0, 0}, {0.5, 0.5}, {1, 1}});
    REQUIRE(shpp_length(t, PathOrder{{0, 1, 2}}) == Catch::Approx(std::sqrt(2.0)));
  }
  SECTION("random 6-node path matches brute recomputation") {
    Rng rng(9);
    std::vector<Point> pts(6);
    for (auto& p : pts) p = {rng.uniform(), rng.uniform()};
    auto t = task_from_points(pts);
    std::vector<int> order = {0, 3, 2, 4, 1, 5};
    double oracle = 0.0;
    for (int i = 0; i + 1 < 6; ++i)
      oracle += euclid(pts[order[i]], pts[order[i + 1]]);
    REQUIRE(shpp_length(t, PathOrder{order}) == Catch::Approx(oracle).epsilon(1e-12));
  }
  SECTION("endpoint mismatch rejected") {
    auto t = task_from_points({{0, 0}, {1, 0}, {1, 1}});
    REQUIRE_THROWS_AS(shpp_length(t, PathOrder{{1, 0, 2}}), ValidationError);
  }
  SECTION("path length at least the endpoint distance") {
    Rng rng(10);
    for (int rep = 0; rep < 50; ++rep) {
      std::vector<Point> pts(8);
      for (auto& p : pts) p = {rng.uniform(), rng.uniform()};
      auto t = task_from_points(pts);
      auto interior = rng.permutation(6);
      std::vector<int> order = {0};
      for (int v : interior) order.push_back(v + 1);
      order.push_back(7);
      REQUIRE(shpp_length(t, PathOrder{order}) >= euclid(pts[0], pts[7]) - 1e-12);
    }
  }
}

TEST_CASE("validate partitions") {
  RoutingInstance inst;
  inst.kind = ProblemKind::CVRP;
  inst.coords = {{0.5, 0.5}, {0, 0}, {1, 0}, {1, 1}};
  inst.demands = {0, 3, 4, 5};
  inst.capacity = 8;

  SECTION("valid partition passes") {
    Partition p{{{0, 1, 3, 0}, {0, 2, 0}}};
    REQUIRE(validate(inst, p).empty());
  }
  SECTION("capacity excess reported") {
    Partition p{{{0, 1, 2, 3, 0}}};  // load 12 > 8
    auto v = validate(inst, p);
    REQUIRE_FALSE(v.empty());
    REQUIRE(v[0].find("capacity") != std::string::npos);
  }
  SECTION("missing node reported") {
    Partition p{{{0, 1, 0}, {0, 2, 0}}};
    auto v = validate(inst, p);
    REQUIRE_FALSE(v.empty());
    REQUIRE(v[0].find("coverage") != std::string::npos);
  }
  SECTION("prize shortfall reported") {
    RoutingInstance pc;
    pc.kind = ProblemKind::PCTSP;
    pc.coords = inst.coords;
    pc.prizes = {0, 0.3, 0.4, 0.5};
    pc.penalties = {0, 0.1, 0.1, 0.1};
    pc.prize_min = 1.0;
    auto v = validate(pc, Partition{{{0, 1, 0}}});
    REQUIRE_FALSE(v.empty());
    REQUIRE(v[0].find("prize") != std::string::npos);
    REQUIRE(validate(pc, Partition{{{0, 1, 2, 3, 0}}}).empty());
  }
}

TEST_CASE("validate agrees with invariants under random mutation") {
  Rng rng(77);
  RoutingInstance inst;
  inst.kind = ProblemKind::CVRP;
  inst.coords.resize(9);
  inst.demands.assign(9, 0.0);
  for (int i = 0; i < 9; ++i) {
    inst.coords[i] = {rng.uniform(), rng.uniform()};
    if (i > 0) inst.demands[i] = 1.0 + rng.uniform_index(3);
  }
  inst.capacity = 10.0;
  // valid partition: nodes 1..8 split in two
  Partition good{{{0, 1, 2, 3, 4, 0}, {0, 5, 6, 7, 8, 0}}};
  REQUIRE(validate(inst, good).empty());
  for (int rep = 0; rep < 200; ++rep) {
    Partition bad = good;
    int mode = static_cast<int>(rng.uniform_index(3));
    auto& s = bad.subsets[rng.uniform_index(2)];
    if (mode == 0) {
      s.erase(s.begin() + 1 + rng.uniform_index(s.size() - 2));  // drop a node
    } else if (mode == 1) {
      s.insert(s.begin() + 1, bad.subsets[0][1]);  // duplicate a node
    } else {
      s[1 + rng.uniform_index(s.size() - 2)] = 0;  // interior depot
    }
    REQUIRE_FALSE(validate(inst, bad).empty());
  }
}

TEST_CASE("rng derivation is path-deterministic and order-independent") {
  Rng a(123);
  Rng b(123);
  REQUIRE(a.child(5).next_u64() == b.child(5).next_u64());
  // sibling creation order does not matter
  Rng c(123);
  auto c9 = c.child(9);
  auto c5 = c.child(5);
  REQUIRE(c5.next_u64() == b.child(5).next_u64());
  REQUIRE(c9.next_u64() == b.child(9).next_u64());
  // different paths decorrelate
  REQUIRE(a.child(1).next_u64() != a.child(2).next_u64());
  // nested paths
  REQUIRE(Rng(123).child(3).child(4).next_u64() == Rng(123).child(3).child(4).next_u64());
}

TEST_CASE("rng uniform stays in range and permutations are valid") {
  Rng rng(99);
  for (int i = 0; i < 1000; ++i) {
    double u = rng.uniform();
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
  }
  auto p = rng.permutation(257);
  REQUIRE(is_permutation_of_all(p, 257));
}

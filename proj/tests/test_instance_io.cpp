#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <sstream>

#include "glop/instance_io.hpp"

using namespace glop;

TEST_CASE("uniform TSP generation") {
  SECTION("single node lands in the unit square") {
    DatasetSpec spec{ProblemKind::TSP, 1, 1, 7};
    auto v = generate_uniform_tsp(spec);
    REQUIRE(v.size() == 1);
    REQUIRE(v[0].size() == 1);
    REQUIRE(v[0].coords[0].x >= 0.0);
    REQUIRE(v[0].coords[0].x < 1.0);
  }
  SECTION("different seeds differ, same seed reproduces bitwise") {
    DatasetSpec a{ProblemKind::TSP, 1000, 1, 1};
    DatasetSpec b{ProblemKind::TSP, 1000, 1, 2};
    auto ia = generate_uniform_tsp(a), ib = generate_uniform_tsp(b);
    bool same = true;
    for (int i = 0; i < 1000 && same; ++i)
      same = ia[0].coords[i].x == ib[0].coords[i].x && ia[0].coords[i].y == ib[0].coords[i].y;
    REQUIRE_FALSE(same);
    auto ia2 = generate_uniform_tsp(a);
    for (int i = 0; i < 1000; ++i) {
      REQUIRE(ia[0].coords[i].x == ia2[0].coords[i].x);
      REQUIRE(ia[0].coords[i].y == ia2[0].coords[i].y);
    }
  }
  SECTION("mean nearest-neighbor distance agrees with a Monte-Carlo estimate") {
    // Oracle: empirical NN distance from an independently seeded sampler.
    auto nn_mean = [](const RoutingInstance& inst) {
      double acc = 0.0;
      int n = inst.size();
      for (int i = 0; i < n; ++i) {
        double best = 1e18;
        for (int j = 0; j < n; ++j)
          if (j != i) best = std::min(best, euclid(inst.coords[i], inst.coords[j]));
        acc += best;
      }
      return acc / n;
    };
    Rng oracle_rng(987654);
    double oracle_acc = 0.0, oracle_sq = 0.0;
    const int oracle_reps = 32;
    for (int r = 0; r < oracle_reps; ++r) {
      RoutingInstance inst;
      Rng c = oracle_rng.child(r);
      inst.coords.resize(1000);
      for (auto& p : inst.coords) p = {c.uniform(), c.uniform()};
      double m = nn_mean(inst);
      oracle_acc += m;
      oracle_sq += m * m;
    }
    double mu = oracle_acc / oracle_reps;
    double sigma = std::sqrt(oracle_sq / oracle_reps - mu * mu);

    DatasetSpec spec{ProblemKind::TSP, 1000, 128, 2024};
    auto insts = generate_uniform_tsp(spec);
    double acc = 0.0;
    for (const auto& inst : insts) acc += nn_mean(inst);
    double mean = acc / insts.size();
    REQUIRE(std::abs(mean - mu) <= 3.0 * sigma + 1e-6);
  }
}

TEST_CASE("PCTSP generation") {
  SECTION("prizes bounded by 3K^n/n") {
    DatasetSpec spec{ProblemKind::PCTSP, 500, 4, 3};
    spec.kn = 9.0;
    for (const auto& inst : generate_pctsp(spec)) {
      for (double b : inst.prizes) {
        REQUIRE(b >= 0.0);
        REQUIRE(b <= 3.0 * 9.0 / 500.0);
      }
      REQUIRE(validate(inst).empty());
    }
  }
  SECTION("K^1K default = 12 bounds prizes by 0.036") {
    DatasetSpec spec{ProblemKind::PCTSP, 1000, 2, 4};
    for (const auto& inst : generate_pctsp(spec))
      for (double b : inst.prizes) REQUIRE(b <= 0.036 + 1e-15);
  }
  SECTION("feasibility: total prize covers prize_min") {
    DatasetSpec spec{ProblemKind::PCTSP, 500, 8, 5};
    for (const auto& inst : generate_pctsp(spec)) {
      double total = 0.0;
      for (double b : inst.prizes) total += b;
      REQUIRE(total >= inst.prize_min);
    }
  }
}

TEST_CASE("CVRP generation") {
  DatasetSpec spec{ProblemKind::CVRP, 1000, 3, 11};
  spec.capacity = 200.0;
  auto insts = generate_cvrp(spec);
  SECTION("instances validate") {
    for (const auto& inst : insts) REQUIRE(validate(inst).empty());
  }
  SECTION("pigeonhole vehicle lower bound is at least ceil(total/C)") {
    for (const auto& inst : insts) {
      double total = 0.0;
      for (double d : inst.demands) total += d;
      REQUIRE(std::ceil(total / inst.capacity) >= 1.0);
      REQUIRE(total / inst.capacity > 1.0);  // 1000 customers never fit one vehicle
    }
  }
  SECTION("fixed seed regenerates byte-identically") {
    auto again = generate_cvrp(spec);
    for (std::size_t i = 0; i < insts.size(); ++i) {
      REQUIRE(insts[i].demands == again[i].demands);
      for (int j = 0; j <= 1000; ++j) {
        REQUIRE(insts[i].coords[j].x == again[i].coords[j].x);
        REQUIRE(insts[i].coords[j].y == again[i].coords[j].y);
      }
    }
  }
}

TEST_CASE("TSPLIB round-trip and normalization") {
  SECTION("hand-written EUC_2D file parses") {
    std::string text =
        "NAME : toy\nTYPE : TSP\nDIMENSION : 3\nEDGE_WEIGHT_TYPE : EUC_2D\n"
        "NODE_COORD_SECTION\n1 0.0 0.0\n2 3.0 0.0\n3 0.0 4.0\nEOF\n";
    auto inst = parse_tsplib(text);
    REQUIRE(inst.size() == 3);
    REQUIRE(inst.coords[1].x == Catch::Approx(3.0));
  }
  SECTION("write then parse a generated TSP200 is identity") {
    DatasetSpec spec{ProblemKind::TSP, 200, 1, 5};
    auto inst = generate_uniform_tsp(spec)[0];
    auto back = parse_tsplib(write_tsplib(inst));
    REQUIRE(back.size() == 200);
    for (int i = 0; i < 200; ++i) {
      REQUIRE(back.coords[i].x == Catch::Approx(inst.coords[i].x).margin(1e-9));
      REQUIRE(back.coords[i].y == Catch::Approx(inst.coords[i].y).margin(1e-9));
    }
  }
  SECTION("normalization maps [10,20]x[5,10] so that x spans [0,1]") {
    std::string text =
        "DIMENSION : 4\nEDGE_WEIGHT_TYPE : EUC_2D\nNODE_COORD_SECTION\n"
        "1 10 5\n2 20 5\n3 10 10\n4 20 10\nEOF\n";
    auto inst = parse_tsplib(text, /*normalize=*/true);
    // oracle: min-max with range max(10,5)=10 -> x in {0,1}, y in {0,0.5}
    REQUIRE(inst.coords[0].x == Catch::Approx(0.0));
    REQUIRE(inst.coords[1].x == Catch::Approx(1.0));
    REQUIRE(inst.coords[3].y == Catch::Approx(0.5));
  }
  SECTION("explicit full matrix parses and is used for lengths") {
    std::string text =
        "DIMENSION : 3\nEDGE_WEIGHT_TYPE : EXPLICIT\nEDGE_WEIGHT_FORMAT : FULL_MATRIX\n"
        "EDGE_WEIGHT_SECTION\n0 1 2\n1 0 3\n2 3 0\nEOF\n";
    auto inst = parse_tsplib(text);
    REQUIRE(inst.has_matrix());
    REQUIRE(tour_length(inst, Tour{{0, 1, 2}}) == Catch::Approx(6.0));
  }
  SECTION("unsupported edge weight type rejected loudly") {
    std::string text = "DIMENSION : 2\nEDGE_WEIGHT_TYPE : GEO\nNODE_COORD_SECTION\n1 0 0\n2 1 1\nEOF\n";
    REQUIRE_THROWS_AS(parse_tsplib(text), IoError);
  }
}

TEST_CASE("results JSON-lines round trip") {
  std::vector<ResultRecord> recs = {
      {"tsp500-0", "ri", 18.4, 0.02, 7, "digest-a"},
      {"tsp500-1", "glop", 17.1, 0.35, 7, "digest-b"},
  };
  std::ostringstream out;
  write_results(out, recs);
  std::string text = out.str();
  REQUIRE(std::count(text.begin(), text.end(), '\n') == 2);
  std::istringstream in(text);
  auto back = read_results(in);
  REQUIRE(back == recs);

  std::ostringstream empty;
  write_results(empty, {});
  REQUIRE(empty.str().empty());
}

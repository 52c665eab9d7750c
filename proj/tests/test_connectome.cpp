#include <doctest.h>

#include "neuroagg/analysis.hpp"
#include "neuroagg/connectome.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

using namespace neuroagg;
using namespace neuroagg::connectome;

namespace {

Connectome parse(const std::string& s, std::size_t V = 0) {
  std::istringstream in(s);
  return parse_edge_list(in, V);
}

std::string error_of(const std::string& s) {
  try {
    parse(s);
  } catch (const std::exception& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST_CASE("edge list parsing") {
  const auto c = parse("# comment\nsource,target,weight\n0,1,0.5\n1,2,2\n2,1,2\n0,1,0.25\n");
  CHECK(c.V == 3);
  REQUIRE(c.edges.size() == 2);
  CHECK(c.weight(0, 1) == 0.75);  // duplicates in one direction are summed
  CHECK(c.weight(2, 1) == 2.0);   // reverse listing of the same edge
  CHECK(c.weight(0, 2) == 0.0);
  CHECK(parse("source,target,weight\n0,1,1\n", 4).V == 4);
}

TEST_CASE("edge list errors name the line") {
  CHECK(error_of("a,b,c\n0,1,1\n").find("line 1") != std::string::npos);
  CHECK(error_of("source,target,weight\n0,0,1\n").find("line 2") != std::string::npos);
  CHECK(error_of("source,target,weight\n0,1,-1\n").find("line 2") != std::string::npos);
  CHECK(error_of("source,target,weight\n0,1,1\n1,0,2\n").find("conflicting") != std::string::npos);
  CHECK(error_of("source,target,weight\n0,x,1\n").find("line 2") != std::string::npos);
  CHECK_THROWS(parse("source,target,weight\n0,5,1\n", 3));
}

TEST_CASE("metadata and save round trip") {
  auto c = parse("source,target,weight\n0,1,0.1\n1,2,0.3333333333333333\n");
  std::istringstream meta("index,label,x,y,z\n0,hippocampus,1,2,3\n1,cortex,0,0,0\n2,thalamus,0,1,0\n");
  parse_metadata(meta, c);
  CHECK(c.labels[0] == "hippocampus");
  CHECK(c.resolve("cortex") == 1u);
  CHECK(c.resolve("2") == 2u);
  CHECK_FALSE(c.resolve("nowhere"));
  REQUIRE(c.coords.size() == 3);
  CHECK(c.coords[0][2] == 3.0);
  std::ostringstream out;
  save_edge_list(c, out);
  const auto back = parse(out.str());
  CHECK(back.weight(1, 2) == c.weight(1, 2));  // shortest round-trip formatting
}

TEST_CASE("generators") {
  const auto a = generate_small_world(83, 4, 0.1, 7);
  const auto b = generate_small_world(83, 4, 0.1, 7);
  CHECK(a.V == 83);
  CHECK(a.edges.size() == 83 * 2);  // rewiring keeps the edge count
  REQUIRE(a.edges.size() == b.edges.size());
  for (std::size_t e = 0; e < a.edges.size(); ++e) {
    CHECK(a.edges[e].i == b.edges[e].i);
    CHECK(a.edges[e].j == b.edges[e].j);
    CHECK(a.edges[e].w == b.edges[e].w);
    CHECK(a.edges[e].w >= 0.5);
    CHECK(a.edges[e].w < 1.5);
  }
  const auto ring = generate_small_world(10, 4, 0.0, 1);
  CHECK(ring.weight(0, 1) > 0);
  CHECK(ring.weight(0, 2) > 0);
  CHECK(ring.weight(0, 3) == 0);
  CHECK_THROWS(generate_small_world(10, 3, 0.1, 1));

  const auto path = generate_path(5, 2.0);
  CHECK(path.edges.size() == 4);
  CHECK(hop_distances(path, 0) == std::vector<int>{0, 1, 2, 3, 4});
  const auto star = generate_star({1.0, 2.0, 3.0});
  CHECK(star.V == 4);
  CHECK(star.weight(0, 3) == 3.0);
  CHECK(hop_distances(star, 1) == std::vector<int>{1, 0, 2, 2});
}

TEST_CASE("Laplacian") {
  const auto path = generate_path(6, 1.0);
  const GraphLaplacian L(path);
  CHECK(L.dense());
  CHECK(L.entry(0, 0) == 1.0);
  CHECK(L.entry(1, 1) == 2.0);
  CHECK(L.entry(1, 2) == -1.0);
  const auto spec = laplacian_spectrum(L);
  for (std::size_t k = 0; k < 6; ++k)
    CHECK(spec[k] == doctest::Approx(2 - 2 * std::cos(std::numbers::pi * k / 6.0)).epsilon(1e-12));
  CHECK(algebraic_connectivity(L) == doctest::Approx(2 - 2 * std::cos(std::numbers::pi / 6.0)));

  // sparse and dense application agree; rows sum to zero
  const auto g = generate_small_world(120, 6, 0.2, 3);
  const GraphLaplacian S(g);
  CHECK_FALSE(S.dense());
  const auto D = S.to_dense();
  std::vector<double> x(120), y(120);
  for (std::size_t j = 0; j < 120; ++j) x[j] = std::sin(0.3 * j);
  S.apply(x.data(), y.data());
  for (std::size_t r = 0; r < 120; ++r) {
    double ref = 0, row = 0;
    for (std::size_t c = 0; c < 120; ++c) {
      ref += D[r * 120 + c] * x[c];
      row += D[r * 120 + c];
    }
    CHECK(y[r] == doctest::Approx(ref).epsilon(1e-12));
    CHECK(std::fabs(row) < 1e-12);
  }
}

TEST_CASE("diffusion schedules") {
  CHECK(diffusion_coefficient(diffusion::Constant{0.02}, 1) == 0.02);
  CHECK(diffusion_coefficient(diffusion::Constant{0.02}, 7) == 0.02);
  CHECK(diffusion_coefficient(diffusion::CubeInverse{0.8}, 1) == 0.8);
  CHECK(diffusion_coefficient(diffusion::CubeInverse{0.8}, 2) == 0.1);
}

TEST_CASE("single node network reduces to the local model") {
  Connectome one;
  one.V = 1;
  one.labels = {"0"};
  const KineticParameters p;
  auto v = ModelVariant::defaults(ModelTag::InVivoConstMonomer);
  const NetworkModel net(one, p, v, {clearance::Constant{500.0}}, diffusion::Constant{0.01}, 30);
  const LocalModel loc(p, v, clearance::Constant{500.0}, 30);
  std::vector<double> y(30), dn(30), dl(30);
  y[0] = p.m_0;
  for (std::size_t i = 2; i <= 30; ++i) y[i - 1] = 1e-9 / i;
  net.rhs(0.0, y, dn);
  loc.rhs(0.0, y, dl);
  for (std::size_t k = 0; k < 30; ++k) CHECK(dn[k] == doctest::Approx(dl[k]).epsilon(1e-13));
}

TEST_CASE("network model layout, transport and invasion order") {
  const auto path = generate_path(3, 1.0);
  KineticParameters p;
  auto v = ModelVariant::defaults(ModelTag::InVivoConstMonomer);
  v.k_n_zeroed = true;
  const NetworkModel m(path, p, v, {clearance::Constant{1000.0}}, diffusion::Constant{0.5}, 10);
  CHECK(m.dim() == 30);
  CHECK(m.index(2, 1) == 4);
  auto y = m.initial_state(0, 1e-9);
  CHECK(y[m.index(1, 2)] == p.m_0);
  CHECK(y[m.index(2, 0)] == 1e-9);
  std::vector<double> dy(30);
  m.rhs(0.0, y, dy);
  CHECK(dy[m.index(1, 0)] == 0.0);  // monomer held
  CHECK(dy[m.index(2, 1)] == doctest::Approx(0.5e-9));  // dimers arrive at the neighbour
  CHECK(dy[m.index(2, 2)] == 0.0);

  const double thr = 0.5 * analysis::fixed_point_moments(p, 1000.0).M_2;
  solver::IntegrationConfig cfg;
  cfg.abs_tol = 1e-14 * p.m_0;
  cfg.output_times = {0.05};
  const NetworkModel fast(path, p, v, {clearance::Constant{1000.0}}, diffusion::Constant{0.01}, 100);
  const auto tr = solver::integrate(
      [&](double t, std::span<const double> yy, std::span<double> d) { fast.rhs(t, yy, d); },
      fast.initial_state(0, p.m_0), 0.0, 0.05, cfg, fast.invasion_events(thr));
  const auto order = invasion_order(tr, fast, thr);
  REQUIRE(order.size() == 3);
  CHECK(order[0].node == 0);
  CHECK(order[0].time == 0.0);
  CHECK(order[0].rank == 1);
  CHECK(order[1].node == 1);
  CHECK(order[2].node == 2);
  CHECK(*order[1].time < *order[2].time);

  std::ostringstream csv;
  write_node_csv(csv, tr, fast);
  CHECK(csv.str().rfind("t,node,M,P\n", 0) == 0);

  CHECK_THROWS(NetworkModel(path, p, ModelVariant::defaults(ModelTag::InVitroClosed), {clearance::Constant{0.0}},
                            diffusion::Constant{0.01}, 10));
}

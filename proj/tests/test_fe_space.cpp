#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "magfe/fe_space.hpp"
#include "oracles.hpp"

using namespace magfe;

namespace {

Mesh single_triangle() {
  return Mesh({{0, 0}, {1, 0}, {0, 1}}, {{0, 1, 2}}, {1}, {{{0, 1}, 1}, {{1, 2}, 1}, {{2, 0}, 1}});
}

Mesh skewed_square(int n) {
  return transform_vertices(generate_unit_square(n),
                            [](const Vec2& p) { return Vec2{p.x + 0.2 * p.y, 0.9 * p.y + 0.1 * p.x * p.x}; });
}

// L2 norm of (discrete - f) over the mesh using the independent Duffy rule.
template <class F>
double l2_error(const FESpace& space, const CoefficientVector& c, F&& f) {
  double sum = 0.0;
  const auto rule = oracle::duffy_rule(8);
  for (std::size_t t = 0; t < space.num_elements(); ++t) {
    const auto& map = space.element_map(t);
    for (const auto& [xi, w] : rule) {
      const double d = eval_field(space, c, t, xi) - f(map(xi));
      sum += 2.0 * map.area * w * d * d;
    }
  }
  return std::sqrt(sum);
}

}  // namespace

TEST(BuildSpace, FreeDofCounts) {
  EXPECT_EQ(build_space(generate_unit_square(1), 1, {1}).num_free(), 0u);
  EXPECT_EQ(build_space(generate_unit_square(2), 1, {1}).num_free(), 1u);
  const auto tri = build_space(single_triangle(), 2, {});
  EXPECT_EQ(tri.num_dofs(), 6u);
  EXPECT_EQ(tri.num_free(), 6u);
  EXPECT_EQ(tri.local_size(), 6u);
}

TEST(BuildSpace, DimensionFormula) {
  const auto mesh = generate_unit_square(3);
  const std::size_t nv = 16, ne = 3 * 9 + 2 * 3, nt = 18;
  for (int p = 1; p <= max_space_degree; ++p) {
    const auto space = build_space(mesh, p, {1});
    const std::size_t interior = static_cast<std::size_t>((p - 1) * (p - 2) / 2);
    EXPECT_EQ(space.local_size(), static_cast<std::size_t>((p + 1) * (p + 2) / 2));
    EXPECT_EQ(space.num_dofs(), nv + ne * static_cast<std::size_t>(p - 1) + nt * interior);
    // boundary: 12 vertices + 12 edges with p-1 nodes each
    EXPECT_EQ(space.num_dofs() - space.num_free(), 12u + 12u * static_cast<std::size_t>(p - 1));
  }
}

TEST(BuildSpace, UnknownTagRejected) {
  EXPECT_THROW(build_space(generate_unit_square(2), 2, {1, 5}), InvalidArgument);
  EXPECT_THROW(build_space(generate_unit_square(2), 0, {1}), InvalidArgument);
}

TEST(BuildSpace, ConstrainedExactlyOnDirichletEdges) {
  // two boundary tags: bottom edge tag 2, rest tag 1
  const auto sq = generate_unit_square(2);
  auto boundary = sq.boundary_edges();
  for (auto& be : boundary)
    if (sq.vertex(be.vertices[0]).y == 0.0 && sq.vertex(be.vertices[1]).y == 0.0) be.tag = 2;
  const Mesh mesh(sq.vertices(), sq.triangles(), sq.regions(), boundary);
  const auto space = build_space(mesh, 3, {2});
  for (std::size_t d = 0; d < space.num_dofs(); ++d)
    EXPECT_EQ(space.is_constrained(d), space.dof_node(d).y == 0.0) << d;
}

TEST(BuildSpace, SharedDofsAreConforming) {
  const auto space = build_space(skewed_square(3), 4, {1});
  for (std::size_t t = 0; t < space.num_elements(); ++t) {
    const auto dofs = space.element_dofs(t);
    for (std::size_t i = 0; i < dofs.size(); ++i) {
      const Vec2 x = space.element_map(t)(space.basis().node(i));
      const Vec2 node = space.dof_node(static_cast<std::size_t>(dofs[i]));
      EXPECT_NEAR(x.x, node.x, 1e-14);
      EXPECT_NEAR(x.y, node.y, 1e-14);
    }
  }
}

TEST(EvalBasis, LagrangeDuality) {
  for (int p = 1; p <= max_space_degree; ++p) {
    const auto space = build_space(single_triangle(), p, {});
    for (std::size_t j = 0; j < space.local_size(); ++j) {
      const auto b = eval_basis(space, 0, space.basis().node(j));
      for (std::size_t i = 0; i < space.local_size(); ++i) EXPECT_NEAR(b.values[i], i == j ? 1.0 : 0.0, 1e-13);
    }
  }
}

TEST(EvalBasis, PartitionOfUnityAndZeroCurlSum) {
  const auto space = build_space(skewed_square(2), 3, {1});
  std::mt19937 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    double x = u(rng), y = u(rng);
    if (x + y > 1.0) {
      x = 1.0 - x;
      y = 1.0 - y;
    }
    const auto b = eval_basis(space, static_cast<std::size_t>(trial) % space.num_elements(), {x, y});
    double sum = 0.0;
    Vec2 curl{};
    for (std::size_t i = 0; i < b.values.size(); ++i) {
      sum += b.values[i];
      curl += b.curls[i];
    }
    EXPECT_NEAR(sum, 1.0, 1e-13);
    EXPECT_NEAR(curl.x, 0.0, 1e-12);
    EXPECT_NEAR(curl.y, 0.0, 1e-12);
  }
  EXPECT_THROW(eval_basis(space, space.num_elements(), {0.2, 0.2}), InvalidArgument);
}

TEST(EvalBasis, CurlMatchesFiniteDifferences) {
  const auto space = build_space(skewed_square(2), 3, {});
  const std::size_t t = 5;
  const Vec2 xi{0.21, 0.33};
  const auto b = eval_basis(space, t, xi);
  const auto& map = space.element_map(t);
  const double h = 1e-6;
  for (std::size_t i = 0; i < space.local_size(); ++i) {
    const auto value_at = [&](const Vec2& x) { return eval_basis(space, t, map.to_reference(x)).values[i]; };
    const Vec2 x = map(xi);
    const double dx = (value_at(x + Vec2{h, 0}) - value_at(x - Vec2{h, 0})) / (2 * h);
    const double dy = (value_at(x + Vec2{0, h}) - value_at(x - Vec2{0, h})) / (2 * h);
    EXPECT_NEAR(b.curls[i].x, dy, 1e-6 * (1.0 + std::abs(dy)));
    EXPECT_NEAR(b.curls[i].y, -dx, 1e-6 * (1.0 + std::abs(dx)));
  }
}

TEST(Interpolate, ReproducesQuarticWithDegreeFour) {
  const auto f = [](const Vec2& p) { return p.x * (1.0 - p.x) * p.y * (1.0 - p.y); };
  const auto square = build_space(generate_unit_square(3), 4, {1});
  const auto c = interpolate(square, f);
  std::mt19937 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    double x = u(rng), y = u(rng);
    if (x + y > 1.0) {
      x = 1.0 - x;
      y = 1.0 - y;
    }
    const std::size_t t = static_cast<std::size_t>(trial) % square.num_elements();
    EXPECT_NEAR(eval_field(square, c, t, {x, y}), f(square.element_map(t)({x, y})), 1e-12);
  }
}

TEST(Interpolate, ZeroFunctionAndBoundaryCheck) {
  const auto space = build_space(generate_unit_square(2), 2, {1});
  const auto zero = interpolate(space, [](const Vec2&) { return 0.0; });
  for (double v : zero.values) EXPECT_EQ(v, 0.0);
  EXPECT_THROW(interpolate(space, [](const Vec2& p) { return p.x; }), BoundaryCompatibilityError);
  EXPECT_NO_THROW(interpolate(space, [](const Vec2& p) { return 1e-13 * p.x; }));
}

TEST(Interpolate, ConvergesAtOptimalRate) {
  const auto f = [](const Vec2& p) { return std::sin(std::numbers::pi * p.x) * std::sin(std::numbers::pi * p.y); };
  for (int p = 1; p <= 3; ++p) {
    std::vector<double> errors;
    auto mesh = generate_unit_square(2);
    for (int level = 0; level < 4; ++level) {
      const auto space = build_space(mesh, p, {1});
      errors.push_back(l2_error(space, interpolate(space, f), f));
      mesh = refine_uniform(mesh);
    }
    const double eoc = std::log2(errors[2] / errors[3]);
    EXPECT_NEAR(eoc, p + 1, 0.2) << "p=" << p;
  }
}

TEST(EvalCurlField, SimpleFields) {
  const auto free = build_space(skewed_square(2), 2, {});
  const auto zero = CoefficientVector{std::vector<double>(free.num_free(), 0.0)};
  const auto cy = interpolate(free, [](const Vec2& p) { return p.y; });
  const auto cx = interpolate(free, [](const Vec2& p) { return p.x; });
  for (std::size_t t = 0; t < free.num_elements(); ++t) {
    const Vec2 xi{0.3, 0.2};
    const Vec2 b0 = eval_curl_field(free, zero, t, xi);
    EXPECT_EQ(b0.x, 0.0);
    EXPECT_EQ(b0.y, 0.0);
    const Vec2 by = eval_curl_field(free, cy, t, xi);
    EXPECT_NEAR(by.x, 1.0, 1e-12);
    EXPECT_NEAR(by.y, 0.0, 1e-12);
    const Vec2 bx = eval_curl_field(free, cx, t, xi);
    EXPECT_NEAR(bx.x, 0.0, 1e-12);
    EXPECT_NEAR(bx.y, -1.0, 1e-12);
  }
  EXPECT_THROW(eval_curl_field(free, CoefficientVector{{1.0}}, 0, {0.1, 0.1}), InvalidArgument);
}

TEST(CurlNorm, DiscreteNormEqualsExactL2Norm) {
  std::mt19937 rng(17);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int k = 1; k <= 3; ++k) {
    const auto space = build_space(skewed_square(2), k + 1, {1});
    const auto& rule = rule_for_degree(2 * k);
    for (int trial = 0; trial < 10; ++trial) {
      CoefficientVector c{std::vector<double>(space.num_free())};
      for (auto& v : c.values) v = u(rng);
      double discrete = 0.0, exact = 0.0;
      for (std::size_t t = 0; t < space.num_elements(); ++t) {
        const auto& map = space.element_map(t);
        for (std::size_t q = 0; q < rule.size(); ++q) {
          const Vec2 b = eval_curl_field(space, c, t, rule.points[q]);
          discrete += rule.weights[q] * map.area * dot(b, b);
        }
        for (const auto& [xi, w] : oracle::duffy_rule(k + 2)) {
          const Vec2 b = eval_curl_field(space, c, t, xi);
          exact += 2.0 * map.area * w * dot(b, b);
        }
      }
      EXPECT_NEAR(discrete, exact, 1e-12 * exact);
      EXPECT_GT(exact, 0.0);
    }
  }
}

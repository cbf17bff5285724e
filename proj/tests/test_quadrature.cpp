#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "magfe/quadrature.hpp"

using namespace magfe;

namespace {

double factorial(int n) { return n <= 1 ? 1.0 : n * factorial(n - 1); }

// Exact integral of x^p y^q over the reference triangle.
double monomial_integral(int p, int q) { return factorial(p) * factorial(q) / factorial(p + q + 2); }

double rule_monomial(const QuadratureRule& rule, int p, int q) {
  double sum = 0.0;
  for (std::size_t j = 0; j < rule.size(); ++j)
    sum += rule.weights[j] * std::pow(rule.points[j].x, p) * std::pow(rule.points[j].y, q);
  return 0.5 * sum;  // weights sum to one, reference area is 1/2
}

}  // namespace

TEST(Quadrature, StoredRulesArePositiveAndNormalized) {
  for (const auto& rule : stored_rules()) {
    double sum = 0.0;
    for (double w : rule.weights) {
      EXPECT_GT(w, 0.0);
      sum += w;
    }
    EXPECT_NEAR(sum, 1.0, 1e-14) << "degree " << rule.degree;
    for (const auto& x : rule.points) {
      EXPECT_GE(x.x, 0.0);
      EXPECT_GE(x.y, 0.0);
      EXPECT_LE(x.x + x.y, 1.0 + 1e-15);
    }
  }
}

TEST(Quadrature, DeclaredExactness) {
  for (const auto& rule : stored_rules())
    for (int p = 0; p <= rule.degree; ++p)
      for (int q = 0; p + q <= rule.degree; ++q) {
        const double exact = monomial_integral(p, q);
        EXPECT_NEAR(rule_monomial(rule, p, q), exact, 1e-13 * exact) << "degree " << rule.degree << " x^" << p << " y^" << q;
      }
}

TEST(Quadrature, LowOrderRules) {
  const auto& r1 = rule_for_degree(1);
  ASSERT_EQ(r1.size(), 1u);
  EXPECT_DOUBLE_EQ(r1.points[0].x, 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(r1.points[0].y, 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(r1.weights[0], 1.0);

  const auto& r2 = rule_for_degree(2);
  ASSERT_EQ(r2.size(), 3u);
  for (std::size_t j = 0; j < 3; ++j) {
    EXPECT_DOUBLE_EQ(r2.weights[j], 1.0 / 3.0);
    const auto& x = r2.points[j];
    // each point is the midpoint of one reference edge
    const bool on_edge = x.x == 0.0 || x.y == 0.0 || x.x + x.y == 1.0;
    EXPECT_TRUE(on_edge);
  }
  EXPECT_NEAR(rule_monomial(r2, 2, 0), 1.0 / 12.0, 1e-15);
  EXPECT_NEAR(rule_monomial(r2, 1, 1), 1.0 / 24.0, 1e-15);

  EXPECT_EQ(&rule_for_degree(0), &rule_for_degree(1));
}

TEST(Quadrature, SelectionIsSmallestSufficientAndStable) {
  EXPECT_EQ(rule_for_degree(3).degree, 4);
  EXPECT_EQ(rule_for_degree(7).degree, 8);
  EXPECT_EQ(&rule_for_degree(5), &rule_for_degree(5));
  try {
    rule_for_degree(max_rule_degree + 1);
    FAIL();
  } catch (const UnsupportedDegree& e) {
    EXPECT_EQ(e.max_degree(), 8);
  }
}

TEST(DiscreteInnerProduct, Basics) {
  const auto mesh = generate_unit_square(4);
  const auto one = [](const Vec2&) { return 1.0; };
  EXPECT_NEAR(discrete_inner_product(mesh, rule_for_degree(1), one, one), 1.0, 1e-13);
  const auto x = [](const Vec2& p) { return p.x; };
  const auto y = [](const Vec2& p) { return p.y; };
  EXPECT_NEAR(discrete_inner_product(mesh, rule_for_degree(2), x, y), 0.25, 1e-13);
}

TEST(DiscreteInnerProduct, PiecewiseLinearProductsMatchClosedForm) {
  // Random P1 data per element; closed form: int l_i l_j = |T| (1 + delta_ij) / 12.
  const auto mesh = transform_vertices(refine_uniform(generate_unit_square(3)),
                                       [](const Vec2& p) { return Vec2{p.x + 0.1 * p.y * p.y, 1.3 * p.y}; });
  std::mt19937 rng(11);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  std::vector<std::array<double, 3>> u(mesh.num_triangles()), v(mesh.num_triangles());
  for (auto& a : u) a = {dist(rng), dist(rng), dist(rng)};
  for (auto& a : v) a = {dist(rng), dist(rng), dist(rng)};

  double exact = 0.0;
  for (std::size_t t = 0; t < mesh.num_triangles(); ++t) {
    const double area = mesh.signed_area(t);
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) exact += u[t][i] * v[t][j] * area * (i == j ? 2.0 : 1.0) / 12.0;
  }
  const auto p1 = [&mesh](const std::vector<std::array<double, 3>>& c) {
    return [&mesh, &c](std::size_t t, const Vec2& x) {
      const Vec2 xi = element_map(mesh, t).to_reference(x);
      return c[t][0] * (1.0 - xi.x - xi.y) + c[t][1] * xi.x + c[t][2] * xi.y;
    };
  };
  for (int d : {2, 4, 8}) {
    const double value = discrete_inner_product(mesh, rule_for_degree(d), p1(u), p1(v));
    EXPECT_NEAR(value, exact, 1e-12 * std::abs(exact)) << d;
  }
}

TEST(DiscreteInnerProduct, VectorValuedFunctions) {
  const auto mesh = generate_unit_square(2);
  const auto f = [](const Vec2& p) { return Vec2{p.x, 1.0}; };
  const auto g = [](const Vec2& p) { return Vec2{1.0, p.y}; };
  // int x + y = 1
  EXPECT_NEAR(discrete_inner_product(mesh, rule_for_degree(1), f, g), 1.0, 1e-14);
}

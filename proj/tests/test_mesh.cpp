#include <gtest/gtest.h>

#include <random>

#include "magfe/mesh.hpp"

using namespace magfe;

TEST(GenerateUnitSquare, Counts) {
  const auto m1 = generate_unit_square(1);
  EXPECT_EQ(m1.num_vertices(), 4u);
  EXPECT_EQ(m1.num_triangles(), 2u);
  EXPECT_EQ(m1.boundary_edges().size(), 4u);

  const auto m2 = generate_unit_square(2);
  EXPECT_EQ(m2.num_vertices(), 9u);
  EXPECT_EQ(m2.num_triangles(), 8u);
  EXPECT_EQ(m2.boundary_edges().size(), 8u);
  EXPECT_EQ(m2.region_set(), std::set<int>{1});
  EXPECT_EQ(m2.boundary_tags(), std::set<int>{1});
}

TEST(GenerateUnitSquare, AreaIsOne) {
  for (int n : {1, 2, 3, 4, 7, 16}) EXPECT_NEAR(generate_unit_square(n).total_area(), 1.0, 1e-14) << n;
}

TEST(GenerateUnitSquare, DiagonalRunsLowerLeftToUpperRight) {
  const auto m = generate_unit_square(1);
  // both triangles contain vertices 0 (0,0) and 3 (1,1)
  for (const auto& tri : m.triangles()) {
    EXPECT_NE(std::find(tri.begin(), tri.end(), 0), tri.end());
    EXPECT_NE(std::find(tri.begin(), tri.end(), 3), tri.end());
  }
}

TEST(GenerateUnitSquare, RejectsZero) { EXPECT_THROW(generate_unit_square(0), InvalidArgument); }

TEST(RefineUniform, CountsAreaAndTags) {
  const auto coarse = generate_unit_square(1);
  const auto fine = refine_uniform(coarse);
  EXPECT_EQ(fine.num_triangles(), 8u);
  EXPECT_EQ(fine.region_set(), std::set<int>{1});
  EXPECT_NEAR(fine.total_area(), 1.0, 1e-14);
  EXPECT_NEAR(fine.max_edge_length(), 0.5 * coarse.max_edge_length(), 1e-15);
  EXPECT_EQ(fine.boundary_edges().size(), 8u);
}

TEST(RefineUniform, ShapeRegularityIsPreserved) {
  // an irregular two-region mesh
  Mesh m({{0, 0}, {3, 0.2}, {1.1, 2.3}, {3.4, 2.9}}, {{0, 1, 2}, {1, 3, 2}}, {4, 7},
         {{{0, 1}, 1}, {{1, 3}, 2}, {{3, 2}, 1}, {{2, 0}, 3}});
  const auto fine = refine_uniform(m);
  EXPECT_EQ(fine.region_set(), (std::set<int>{4, 7}));
  EXPECT_EQ(fine.boundary_tags(), (std::set<int>{1, 2, 3}));
  for (std::size_t t = 0; t < m.num_triangles(); ++t)
    for (std::size_t c = 0; c < 4; ++c) {
      EXPECT_NEAR(radius_ratio(fine, 4 * t + c), radius_ratio(m, t), 1e-12 * radius_ratio(m, t));
      EXPECT_EQ(fine.region(4 * t + c), m.region(t));
    }
  EXPECT_NEAR(fine.total_area(), m.total_area(), 1e-14 * m.total_area());
}

TEST(RefineUniform, RepeatedRefinementMultipliesByFour) {
  auto m = generate_unit_square(3);
  for (int level = 0; level < 3; ++level) {
    const auto next = refine_uniform(m);
    EXPECT_EQ(next.num_triangles(), 4 * m.num_triangles());
    EXPECT_NEAR(next.total_area(), 1.0, 1e-14);
    m = next;
  }
}

TEST(MeshValidation, RejectsClockwiseAndDegenerate) {
  EXPECT_THROW(Mesh({{0, 0}, {1, 0}, {0, 1}}, {{0, 2, 1}}, {1}, {{{0, 2}, 1}, {{2, 1}, 1}, {{1, 0}, 1}}),
               InvalidArgument);
  EXPECT_THROW(Mesh({{0, 0}, {1, 0}, {2, 1e-20}, {0, 1}}, {{0, 1, 2}}, {1}, {}), InvalidArgument);
}

TEST(MeshValidation, RejectsMissingOrSpuriousBoundaryEdges) {
  const std::vector<Vec2> v = {{0, 0}, {1, 0}, {0, 1}};
  EXPECT_NO_THROW(Mesh(v, {{0, 1, 2}}, {1}, {{{0, 1}, 1}, {{1, 2}, 1}, {{2, 0}, 1}}));
  EXPECT_THROW(Mesh(v, {{0, 1, 2}}, {1}, {{{0, 1}, 1}, {{1, 2}, 1}}), InvalidArgument);
  const auto sq = generate_unit_square(1);
  auto boundary = sq.boundary_edges();
  boundary.push_back({{0, 3}, 1});  // interior diagonal
  EXPECT_THROW(Mesh(sq.vertices(), sq.triangles(), sq.regions(), boundary), InvalidArgument);
}

TEST(MeshValidation, RejectsOutOfRangeIndices) {
  EXPECT_THROW(Mesh({{0, 0}, {1, 0}, {0, 1}}, {{0, 1, 3}}, {1}, {}), InvalidArgument);
}

TEST(MeshIo, RoundTripIsExact) {
  const auto square = generate_unit_square(1);
  EXPECT_EQ(parse_mesh(serialize_mesh(square)), square);

  std::mt19937 rng(7);
  std::uniform_real_distribution<double> jitter(-0.05, 0.05);
  const auto m = transform_vertices(generate_unit_square(5), [&](const Vec2& x) {
    return Vec2{x.x + jitter(rng) / 7.0, x.y + jitter(rng) / 3.0};
  });
  const auto parsed = parse_mesh(serialize_mesh(m));
  EXPECT_EQ(parsed, m);
}

TEST(MeshIo, CommentsAndBlankLinesAreIgnored) {
  const std::string text =
      "# header comment\n\n$Nodes 3\n1 0 0  # origin\n2 1 0\n3 0 1\n$Triangles 1\n1 1 2 3 5\n"
      "$BoundaryEdges 3\n1 1 2 1\n2 2 3 1\n\n3 3 1 2\n";
  const auto m = parse_mesh(text);
  EXPECT_EQ(m.num_triangles(), 1u);
  EXPECT_EQ(m.region(0), 5);
  EXPECT_EQ(m.boundary_tags(), (std::set<int>{1, 2}));
}

TEST(MeshIo, TruncatedTrianglesBlockReportsLine) {
  const std::string text =
      "$Nodes 4\n1 0 0\n2 1 0\n3 1 1\n4 0 1\n$Triangles 2\n1 1 2 3 1\n$BoundaryEdges 4\n1 1 2 1\n";
  try {
    parse_mesh(text);
    FAIL() << "expected parse error";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 8u);
  }
}

TEST(MeshIo, ZeroIndexIsRejected) {
  const std::string text = "$Nodes 3\n1 0 0\n2 1 0\n3 0 1\n$Triangles 1\n1 0 2 3 1\n$BoundaryEdges 0\n";
  try {
    parse_mesh(text);
    FAIL() << "expected parse error";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 6u);
  }
}

TEST(MeshIo, MalformedHeaderAndIds) {
  EXPECT_THROW(parse_mesh("$Vertices 3\n"), ParseError);
  EXPECT_THROW(parse_mesh("$Nodes x\n"), ParseError);
  EXPECT_THROW(parse_mesh("$Nodes 2\n1 0 0\n3 1 0\n"), ParseError);
  EXPECT_THROW(parse_mesh("$Nodes 1\n1 0 0 9\n"), ParseError);
  EXPECT_THROW(parse_mesh(""), ParseError);
}

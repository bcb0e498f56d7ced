#include "doctest.h"
#include "test_util.hpp"

#include "hemo/error.hpp"
#include "hemo/mesh_fem.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <fstream>
#include <functional>
#include <numbers>
#include <set>

using namespace hemo;

namespace {

TriMesh right_triangle() {
  TriMesh m;
  m.vertices = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}};
  m.faces = {{0, 1, 2}};
  return m;
}

void write_text(const std::filesystem::path& p, const std::string& s) {
  std::ofstream(p) << s;
}

ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("no error raised");
  return ErrorKind::InvalidArgument;
}

}  // namespace

TEST_CASE("load_mesh reads a single triangle") {
  const auto p = test::tmp_path("tri.off");
  write_text(p, "OFF\n3 1 0\n0 0 0\n1 0 0\n0 1 0\n3 0 1 2\n");
  const TriMesh m = load_mesh(p);
  CHECK(m.num_vertices() == 3);
  CHECK(m.num_faces() == 1);
}

TEST_CASE("load_mesh rejects a short vertex list") {
  const auto p = test::tmp_path("short.off");
  write_text(p, "OFF\n4 1 0\n0 0 0\n1 0 0\n0 1 0\n3 0 1 2\n");
  CHECK(kind_of([&] { load_mesh(p); }) == ErrorKind::MalformedFile);
}

TEST_CASE("load_mesh rejects a zero-area face") {
  const auto p = test::tmp_path("flat.off");
  write_text(p, "OFF\n3 1 0\n0 0 0\n1 0 0\n2 0 0\n3 0 1 2\n");
  CHECK(kind_of([&] { load_mesh(p); }) == ErrorKind::DegenerateFace);
}

TEST_CASE("save and load round trip") {
  const TriMesh m = make_icosphere(1);
  const auto p = test::tmp_path("ico1.off");
  save_mesh(p, m);
  const TriMesh r = load_mesh(p);
  REQUIRE(r.num_vertices() == m.num_vertices());
  CHECK(r.faces == m.faces);
  for (std::size_t i = 0; i < m.num_vertices(); ++i) CHECK((r.vertices[i] - m.vertices[i]).norm() == 0.0);
}

TEST_CASE("icosphere counts and Euler characteristic") {
  const TriMesh m = make_icosphere(2);
  CHECK(m.num_vertices() == 162);
  CHECK(m.num_faces() == 320);
  // count undirected edges independently of the library helper
  std::set<std::pair<int, int>> edges;
  for (const auto& f : m.faces)
    for (int k = 0; k < 3; ++k) edges.insert(std::minmax(f[k], f[(k + 1) % 3]));
  CHECK(edges.size() == m.num_edges());
  CHECK(static_cast<long>(m.num_vertices()) - static_cast<long>(edges.size()) + static_cast<long>(m.num_faces()) == 2);
}

TEST_CASE("consistent and lumped mass on the unit right triangle") {
  const TriMesh m = right_triangle();
  const Eigen::MatrixXd c = mass_matrix(m, false).to_dense();
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) CHECK(std::abs(c(i, j) - (i == j ? 1.0 / 12 : 1.0 / 24)) < 1e-12);
  const SparseSym l = mass_matrix(m, true);
  CHECK(l.nnz() == 3);
  for (int i = 0; i < 3; ++i) CHECK(std::abs(l.coeff(i, i) - 1.0 / 6) < 1e-12);
}

TEST_CASE("stiffness on the unit right triangle") {
  const Eigen::MatrixXd g = stiffness_matrix(right_triangle()).to_dense();
  Eigen::Matrix3d expected;
  expected << 1, -0.5, -0.5, -0.5, 0.5, 0, -0.5, 0, 0.5;
  CHECK((g - expected).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("stiffness on an equilateral triangle uses cot 60") {
  TriMesh m;
  m.vertices = {{0, 0, 0}, {1, 0, 0}, {0.5, std::sqrt(3.0) / 2, 0}};
  m.faces = {{0, 1, 2}};
  const Eigen::MatrixXd g = stiffness_matrix(m).to_dense();
  const double off = -1.0 / (2.0 * std::sqrt(3.0));
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      if (i != j) CHECK(std::abs(g(i, j) - off) < 1e-12);
}

TEST_CASE("matrix invariants on assorted meshes") {
  for (const TriMesh& m : {make_icosphere(2), make_grid_mesh(9, 1.0), make_icosphere(1, 3.0)}) {
    const SparseSym c = mass_matrix(m, false), l = mass_matrix(m, true), g = stiffness_matrix(m);
    CHECK(c.asymmetry() < 1e-12);
    CHECK(g.asymmetry() < 1e-12);
    CHECK(test::rel_err(l.diagonal().sum(), m.total_area()) < 1e-10);
    // lumped entries are the row sums of the consistent matrix
    const Eigen::VectorXd rows = c.to_dense().rowwise().sum();
    CHECK((rows - l.diagonal()).cwiseAbs().maxCoeff() < 1e-12 * rows.maxCoeff());
    CHECK((g * Eigen::VectorXd::Ones(static_cast<Eigen::Index>(m.num_vertices()))).cwiseAbs().maxCoeff() < 1e-10);
    if (m.num_vertices() <= 200) {
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(g.to_dense());
      CHECK(es.eigenvalues().minCoeff() >= -1e-10);
    }
  }
}

TEST_CASE("column indices strictly increase within each row") {
  const SparseSym g = stiffness_matrix(make_icosphere(2));
  const auto off = g.row_offsets();
  const auto col = g.col_indices();
  for (std::size_t r = 0; r + 1 < off.size(); ++r)
    for (int k = off[r] + 1; k < off[r + 1]; ++k) CHECK(col[static_cast<std::size_t>(k)] > col[static_cast<std::size_t>(k - 1)]);
}

TEST_CASE("lumped mass trace converges to the sphere area") {
  double prev_err = 1.0;
  for (int s = 1; s <= 3; ++s) {
    const double err = std::abs(mass_matrix(make_icosphere(s), true).diagonal().sum() - 4 * std::numbers::pi) / (4 * std::numbers::pi);
    CHECK(err < prev_err);
    prev_err = err;
  }
  CHECK(prev_err < 0.02);
}

TEST_CASE("sparse matrix binary round trip") {
  const SparseSym g = stiffness_matrix(make_icosphere(1));
  const auto p = test::tmp_path("g.ssym");
  write_sparse(p, g);
  const SparseSym r = read_sparse(p);
  REQUIRE(r.dim() == g.dim());
  REQUIRE(r.nnz() == g.nnz());
  CHECK(std::equal(r.values().begin(), r.values().end(), g.values().begin()));
  CHECK(std::equal(r.col_indices().begin(), r.col_indices().end(), g.col_indices().begin()));
  CHECK(r.symmetric());
}

TEST_CASE("sparse matrix reader rejects bad magic and truncation") {
  const SparseSym g = stiffness_matrix(make_icosphere(1));
  const auto p = test::tmp_path("bad.ssym");
  write_sparse(p, g);
  {
    std::fstream f(p, std::ios::in | std::ios::out | std::ios::binary);
    f.write("XXXX", 4);
  }
  CHECK(kind_of([&] { read_sparse(p); }) == ErrorKind::VersionMismatch);
  write_sparse(p, g);
  std::filesystem::resize_file(p, std::filesystem::file_size(p) - 8);
  CHECK(kind_of([&] { read_sparse(p); }) == ErrorKind::MalformedFile);
}

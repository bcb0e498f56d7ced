#pragma once

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include <array>
#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

namespace hemo {

// Triangulated surface. Vertices are 3D points in arbitrary length units;
// faces are vertex-index triples. Open surfaces are allowed (natural boundary
// conditions follow from the assembly).
struct TriMesh {
  std::vector<Eigen::Vector3d> vertices;
  std::vector<std::array<int, 3>> faces;

  std::size_t num_vertices() const { return vertices.size(); }
  std::size_t num_faces() const { return faces.size(); }

  double face_area(std::size_t f) const;
  double total_area() const;
  double mean_edge_length() const;
  std::size_t num_edges() const;

  // Throws DegenerateFace / MalformedFile when an invariant does not hold.
  void validate() const;
};

// Symmetric sparse matrix in compressed-row storage.
class SparseSym {
 public:
  using Matrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;
  using Triplet = Eigen::Triplet<double>;

  SparseSym() = default;
  SparseSym(Matrix m, bool symmetric);

  static SparseSym from_triplets(std::size_t n, const std::vector<Triplet>& triplets,
                                 bool symmetric = true);
  static SparseSym identity(std::size_t n);
  static SparseSym diagonal(const Eigen::VectorXd& d);

  std::size_t dim() const { return static_cast<std::size_t>(m_.rows()); }
  std::size_t nnz() const { return static_cast<std::size_t>(m_.nonZeros()); }
  bool symmetric() const { return symmetric_; }

  std::span<const int> row_offsets() const {
    return {m_.outerIndexPtr(), static_cast<std::size_t>(m_.outerSize()) + 1};
  }
  std::span<const int> col_indices() const { return {m_.innerIndexPtr(), nnz()}; }
  std::span<const double> values() const { return {m_.valuePtr(), nnz()}; }

  const Matrix& matrix() const { return m_; }

  double coeff(std::size_t i, std::size_t j) const;
  Eigen::VectorXd operator*(const Eigen::VectorXd& x) const { return m_ * x; }
  double quadratic_form(const Eigen::VectorXd& x) const;
  Eigen::VectorXd diagonal() const;
  Eigen::MatrixXd to_dense() const { return Eigen::MatrixXd(m_); }

  // Max |A_ij - A_ji| relative to max |A_ij|; zero for an exactly symmetric matrix.
  double asymmetry() const;

 private:
  Matrix m_;
  bool symmetric_ = true;
};

SparseSym operator+(const SparseSym& a, const SparseSym& b);
SparseSym operator*(double s, const SparseSym& a);

// Mesh I/O (ASCII OFF).
TriMesh load_mesh(const std::filesystem::path& path);
void save_mesh(const std::filesystem::path& path, const TriMesh& mesh);

// Mesh generators used by tests, presets and the benchmark harness.
TriMesh make_icosphere(int subdivisions, double radius = 1.0);
// Planar regular grid on [-half_extent, half_extent]^2 with n x n vertices.
TriMesh make_grid_mesh(int n, double half_extent);

// FEM inner-product matrices for linear (hat) elements.
SparseSym mass_matrix(const TriMesh& mesh, bool lumped);
SparseSym stiffness_matrix(const TriMesh& mesh);

// Binary "SSYM" serialization (little-endian).
void write_sparse(const std::filesystem::path& path, const SparseSym& a);
SparseSym read_sparse(const std::filesystem::path& path);

}  // namespace hemo

#pragma once

#include "hemo/mesh_fem.hpp"
#include "hemo/rng.hpp"

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include <cstdint>
#include <span>
#include <vector>

namespace hemo {

// Hyperparameters of the Matern-type SPDE prior, one (kappa, tau) pair per
// hemodynamic component. Only the smoothness beta = 2 is supported.
struct PriorSpec {
  std::vector<double> kappa;
  std::vector<double> tau;
  double beta = 2.0;

  static PriorSpec uniform(int num_components, double kappa, double tau);
  int num_components() const { return static_cast<int>(kappa.size()); }
  void validate() const;
};

// Sparse Cholesky factor with fill-reducing (AMD) ordering:
//   P A P^T = L L^T.
class CholFactor {
 public:
  using LowerMatrix = Eigen::SparseMatrix<double>;  // column-major
  using Permutation = Eigen::PermutationMatrix<Eigen::Dynamic, Eigen::Dynamic, int>;

  CholFactor(Permutation p, LowerMatrix l);

  std::size_t dim() const { return static_cast<std::size_t>(l_.rows()); }
  double log_determinant() const { return logdet_; }
  const LowerMatrix& lower() const { return l_; }
  const Permutation& permutation() const { return p_; }

  Eigen::VectorXd solve(const Eigen::VectorXd& b) const;
  // x = P^T L^{-T} z, so that z ~ N(0, I) gives x ~ N(0, A^{-1}).
  Eigen::VectorXd apply_inverse_transpose_factor(const Eigen::VectorXd& z) const;

 private:
  Permutation p_;
  LowerMatrix l_;
  double logdet_ = 0.0;
};

CholFactor sparse_cholesky(const SparseSym& a);

// Q = tau^2 (kappa^2 C + G)^T C^{-1} (kappa^2 C + G) with C the lumped
// (diagonal) mass matrix.
SparseSym precision_from_fem(const SparseSym& lumped_mass, const SparseSym& stiffness, double kappa,
                             double tau);
SparseSym precision_matrix(const TriMesh& mesh, const PriorSpec& spec, int component);

// Block-diagonal stacking, component-major: index (j, v) -> j * V + v.
SparseSym block_precision(std::span<const SparseSym> blocks);

// Precision for all components of spec, already block-stacked.
SparseSym full_precision(const SparseSym& lumped_mass, const SparseSym& stiffness, const PriorSpec& spec);

double marginal_variance(const PriorSpec& spec, int component);

// Draw with precision Q; deterministic given seed.
Eigen::VectorXd sample_field(const SparseSym& q, std::uint64_t seed);
Eigen::VectorXd sample_field(const CholFactor& factor, Rng& rng);

}  // namespace hemo

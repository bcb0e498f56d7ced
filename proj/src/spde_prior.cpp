#include "hemo/spde_prior.hpp"

#include "hemo/error.hpp"

#include <Eigen/OrderingMethods>
#include <Eigen/SparseCholesky>

#include <cmath>
#include <numbers>
#include <string>

namespace hemo {

PriorSpec PriorSpec::uniform(int num_components, double kappa, double tau) {
  PriorSpec s;
  s.kappa.assign(static_cast<std::size_t>(num_components), kappa);
  s.tau.assign(static_cast<std::size_t>(num_components), tau);
  return s;
}

void PriorSpec::validate() const {
  if (kappa.size() != tau.size() || kappa.empty())
    throw Error(ErrorKind::DimensionMismatch, "kappa and tau must have the same nonzero length");
  for (std::size_t j = 0; j < kappa.size(); ++j)
    if (!(kappa[j] > 0.0) || !(tau[j] > 0.0))
      throw Error(ErrorKind::NonPositiveHyperparameter,
                  "component " + std::to_string(j) + ": kappa=" + std::to_string(kappa[j]) +
                      " tau=" + std::to_string(tau[j]));
  if (beta != 2.0) throw Error(ErrorKind::InvalidArgument, "only beta = 2 is supported");
}

// ------------------------------------------------------------- Cholesky

CholFactor::CholFactor(Permutation p, LowerMatrix l) : p_(std::move(p)), l_(std::move(l)) {
  for (Eigen::Index i = 0; i < l_.rows(); ++i) logdet_ += 2.0 * std::log(l_.coeff(i, i));
}

Eigen::VectorXd CholFactor::solve(const Eigen::VectorXd& b) const {
  Eigen::VectorXd y = p_ * b;
  l_.triangularView<Eigen::Lower>().solveInPlace(y);
  l_.transpose().triangularView<Eigen::Upper>().solveInPlace(y);
  return p_.transpose() * y;
}

Eigen::VectorXd CholFactor::apply_inverse_transpose_factor(const Eigen::VectorXd& z) const {
  Eigen::VectorXd y = z;
  l_.transpose().triangularView<Eigen::Upper>().solveInPlace(y);
  return p_.transpose() * y;
}

CholFactor sparse_cholesky(const SparseSym& a) {
  Eigen::SparseMatrix<double> m(a.matrix());
  Eigen::SimplicialLLT<Eigen::SparseMatrix<double>, Eigen::Lower, Eigen::AMDOrdering<int>> llt(m);
  if (llt.info() != Eigen::Success)
    throw Error(ErrorKind::FactorizationFailure,
                "matrix of dimension " + std::to_string(a.dim()) + " is not positive definite");
  CholFactor::LowerMatrix l = llt.matrixL();
  for (Eigen::Index i = 0; i < l.rows(); ++i)
    if (!(l.coeff(i, i) > 0.0) || !std::isfinite(l.coeff(i, i)))
      throw Error(ErrorKind::FactorizationFailure, "non-positive pivot at " + std::to_string(i));
  return CholFactor(llt.permutationP(), std::move(l));
}

// ----------------------------------------------------------- precision

SparseSym precision_from_fem(const SparseSym& lumped_mass, const SparseSym& stiffness, double kappa,
                             double tau) {
  if (!(kappa > 0.0) || !(tau > 0.0))
    throw Error(ErrorKind::NonPositiveHyperparameter,
                "kappa=" + std::to_string(kappa) + " tau=" + std::to_string(tau));
  if (lumped_mass.dim() != stiffness.dim())
    throw Error(ErrorKind::DimensionMismatch, "mass and stiffness dimensions differ");
  const Eigen::VectorXd c = lumped_mass.diagonal();
  if ((c.array() <= 0.0).any())
    throw Error(ErrorKind::NonPositiveHyperparameter, "lumped mass has a non-positive entry");

  const SparseSym::Matrix k = kappa * kappa * lumped_mass.matrix() + stiffness.matrix();
  const Eigen::VectorXd c_inv = c.cwiseInverse();
  SparseSym::Matrix scaled = c_inv.asDiagonal() * k;
  SparseSym::Matrix q = (tau * tau) * (k.transpose() * scaled);
  // The product is symmetric up to rounding; average with the transpose so
  // the stored matrix is symmetric to the last bit.
  SparseSym::Matrix qt = q.transpose();
  SparseSym::Matrix sym = 0.5 * (q + qt);
  return SparseSym(std::move(sym), true);
}

SparseSym precision_matrix(const TriMesh& mesh, const PriorSpec& spec, int component) {
  spec.validate();
  if (component < 0 || component >= spec.num_components())
    throw Error(ErrorKind::DimensionMismatch, "component index " + std::to_string(component));
  return precision_from_fem(mass_matrix(mesh, true), stiffness_matrix(mesh),
                            spec.kappa[static_cast<std::size_t>(component)],
                            spec.tau[static_cast<std::size_t>(component)]);
}

SparseSym block_precision(std::span<const SparseSym> blocks) {
  if (blocks.empty()) throw Error(ErrorKind::DimensionMismatch, "no blocks");
  if (blocks.size() == 1) return blocks.front();
  const std::size_t v = blocks.front().dim();
  std::vector<SparseSym::Triplet> t;
  std::size_t total = 0;
  for (const auto& b : blocks) {
    if (b.dim() != v)
      throw Error(ErrorKind::DimensionMismatch,
                  "block of dimension " + std::to_string(b.dim()) + ", expected " + std::to_string(v));
    total += b.nnz();
  }
  t.reserve(total);
  for (std::size_t j = 0; j < blocks.size(); ++j) {
    const auto& m = blocks[j].matrix();
    const int off = static_cast<int>(j * v);
    for (Eigen::Index r = 0; r < m.outerSize(); ++r)
      for (SparseSym::Matrix::InnerIterator it(m, r); it; ++it)
        t.emplace_back(off + static_cast<int>(it.row()), off + static_cast<int>(it.col()), it.value());
  }
  return SparseSym::from_triplets(v * blocks.size(), t);
}

SparseSym full_precision(const SparseSym& lumped_mass, const SparseSym& stiffness, const PriorSpec& spec) {
  spec.validate();
  std::vector<SparseSym> blocks;
  for (int j = 0; j < spec.num_components(); ++j)
    blocks.push_back(precision_from_fem(lumped_mass, stiffness, spec.kappa[static_cast<std::size_t>(j)],
                                        spec.tau[static_cast<std::size_t>(j)]));
  return block_precision(blocks);
}

double marginal_variance(const PriorSpec& spec, int component) {
  spec.validate();
  const auto j = static_cast<std::size_t>(component);
  const double beta = spec.beta;
  return std::tgamma(beta - 1.0) /
         (std::tgamma(beta) * 4.0 * std::numbers::pi * std::pow(spec.kappa[j], 2.0 * (beta - 1.0)) *
          spec.tau[j] * spec.tau[j]);
}

// -------------------------------------------------------------- sampling

Eigen::VectorXd sample_field(const CholFactor& factor, Rng& rng) {
  std::normal_distribution<double> normal;
  Eigen::VectorXd z(static_cast<Eigen::Index>(factor.dim()));
  for (auto& x : z) x = normal(rng);
  return factor.apply_inverse_transpose_factor(z);
}

Eigen::VectorXd sample_field(const SparseSym& q, std::uint64_t seed) {
  Rng rng(seed);
  return sample_field(sparse_cholesky(q), rng);
}

}  // namespace hemo

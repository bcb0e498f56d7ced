#pragma once

#include "hemo/simulator.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>

namespace hemo {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Observed BOLD data: one time series of length M per vertex (row).
struct BoldDataset {
  RowMatrix Y;  // V x M
  double t_r = 0.72;

  std::size_t num_vertices() const { return static_cast<std::size_t>(Y.rows()); }
  int num_timepoints() const { return static_cast<int>(Y.cols()); }
  // Throws on non-finite samples, M < 2, V < 1, or a vertex-count mismatch
  // when expected_vertices > 0.
  void validate(std::size_t expected_vertices = 0) const;
};

enum class Coordinates : std::uint8_t { Constrained = 0, Unconstrained = 1 };

// V x J hemodynamic parameter field, in theta or theta-tilde coordinates.
struct ParamField {
  RowMatrix values;
  Coordinates coords = Coordinates::Unconstrained;
  HrfModel model;

  std::size_t num_vertices() const { return static_cast<std::size_t>(values.rows()); }
  int num_components() const { return static_cast<int>(values.cols()); }

  ParamField to_constrained() const;
  ParamField to_unconstrained() const;
  // Component-major stacking: entry (v, j) -> j * V + v.
  Eigen::VectorXd stacked() const;
  static ParamField from_stacked(const Eigen::VectorXd& x, std::size_t V, const HrfModel& model,
                                 Coordinates coords = Coordinates::Unconstrained);
};

void write_dataset(const std::filesystem::path& path, const BoldDataset& data);
BoldDataset read_dataset(const std::filesystem::path& path);

void write_field(const std::filesystem::path& path, const ParamField& field);
// The file does not carry the HRF model; the caller supplies it.
ParamField read_field(const std::filesystem::path& path, const HrfModel& model);

}  // namespace hemo

#include "binary_io.hpp"
#include "hemo/dataset.hpp"
#include "hemo/error.hpp"

#include <cmath>
#include <string>

namespace hemo {

namespace {
constexpr std::uint32_t kDatasetVersion = 1;
}

void BoldDataset::validate(std::size_t expected_vertices) const {
  if (Y.rows() < 1) throw Error(ErrorKind::MalformedFile, "dataset has no vertices");
  if (Y.cols() < 2) throw Error(ErrorKind::MalformedFile, "dataset needs at least 2 time points");
  if (!(t_r > 0.0)) throw Error(ErrorKind::MalformedFile, "dataset t_r must be positive");
  if (!Y.allFinite()) throw Error(ErrorKind::MalformedFile, "dataset contains non-finite samples");
  if (expected_vertices > 0 && num_vertices() != expected_vertices)
    throw Error(ErrorKind::DimensionMismatch, "dataset has " + std::to_string(num_vertices()) +
                                                  " vertices, mesh has " + std::to_string(expected_vertices));
}

ParamField ParamField::to_constrained() const {
  if (coords == Coordinates::Constrained) return *this;
  ParamField out = *this;
  out.coords = Coordinates::Constrained;
  for (Eigen::Index v = 0; v < values.rows(); ++v)
    for (Eigen::Index j = 0; j < values.cols(); ++j)
      out.values(v, j) = inverse_transform_component(model.bounds[static_cast<std::size_t>(j)], values(v, j));
  return out;
}

ParamField ParamField::to_unconstrained() const {
  if (coords == Coordinates::Unconstrained) return *this;
  ParamField out = *this;
  out.coords = Coordinates::Unconstrained;
  for (Eigen::Index v = 0; v < values.rows(); ++v)
    for (Eigen::Index j = 0; j < values.cols(); ++j)
      out.values(v, j) = transform_component(model.bounds[static_cast<std::size_t>(j)], values(v, j));
  return out;
}

Eigen::VectorXd ParamField::stacked() const {
  const Eigen::Index V = values.rows();
  Eigen::VectorXd x(values.size());
  for (Eigen::Index j = 0; j < values.cols(); ++j) x.segment(j * V, V) = values.col(j);
  return x;
}

ParamField ParamField::from_stacked(const Eigen::VectorXd& x, std::size_t V, const HrfModel& model,
                                    Coordinates coords) {
  const auto n = static_cast<Eigen::Index>(V);
  if (n == 0 || x.size() % n != 0) throw Error(ErrorKind::DimensionMismatch, "stacked vector length");
  ParamField f;
  f.model = model;
  f.coords = coords;
  f.values.resize(n, x.size() / n);
  for (Eigen::Index j = 0; j < f.values.cols(); ++j) f.values.col(j) = x.segment(j * n, n);
  return f;
}

// "HBLD", u32 version, u64 V, u64 M, f64 t_r, f64 samples (row-major)
void write_dataset(const std::filesystem::path& path, const BoldDataset& data) {
  detail::BinaryWriter w(path);
  w.magic("HBLD");
  w.put<std::uint32_t>(kDatasetVersion);
  w.put<std::uint64_t>(static_cast<std::uint64_t>(data.Y.rows()));
  w.put<std::uint64_t>(static_cast<std::uint64_t>(data.Y.cols()));
  w.put<double>(data.t_r);
  w.put_array(data.Y.data(), static_cast<std::size_t>(data.Y.size()));
  w.close();
}

BoldDataset read_dataset(const std::filesystem::path& path) {
  detail::BinaryReader r(path);
  if (!r.magic("HBLD")) throw Error(ErrorKind::VersionMismatch, "not an HBLD dataset: " + path.string());
  const auto version = r.get<std::uint32_t>();
  if (version != kDatasetVersion)
    throw Error(ErrorKind::VersionMismatch, "dataset version " + std::to_string(version) + " in " + path.string());
  const auto V = r.get<std::uint64_t>();
  const auto M = r.get<std::uint64_t>();
  BoldDataset d;
  d.t_r = r.get<double>();
  r.require_remaining(V * M * 8);
  d.Y.resize(static_cast<Eigen::Index>(V), static_cast<Eigen::Index>(M));
  r.get_array(d.Y.data(), static_cast<std::size_t>(V * M));
  r.expect_end();
  d.validate();
  return d;
}

// "HFLD", u64 V, u64 J, u8 coordinate flag, f64 values (row-major)
void write_field(const std::filesystem::path& path, const ParamField& field) {
  detail::BinaryWriter w(path);
  w.magic("HFLD");
  w.put<std::uint64_t>(static_cast<std::uint64_t>(field.values.rows()));
  w.put<std::uint64_t>(static_cast<std::uint64_t>(field.values.cols()));
  w.put<std::uint8_t>(static_cast<std::uint8_t>(field.coords));
  w.put_array(field.values.data(), static_cast<std::size_t>(field.values.size()));
  w.close();
}

ParamField read_field(const std::filesystem::path& path, const HrfModel& model) {
  detail::BinaryReader r(path);
  if (!r.magic("HFLD")) throw Error(ErrorKind::VersionMismatch, "not an HFLD field: " + path.string());
  const auto V = r.get<std::uint64_t>();
  const auto J = r.get<std::uint64_t>();
  const auto flag = r.get<std::uint8_t>();
  if (flag > 1) throw Error(ErrorKind::MalformedFile, "bad coordinate flag in " + path.string());
  if (static_cast<int>(J) != model.num_params())
    throw Error(ErrorKind::DimensionMismatch, "field has J=" + std::to_string(J) + ", model expects " +
                                                  std::to_string(model.num_params()));
  r.require_remaining(V * J * 8);
  ParamField f;
  f.model = model;
  f.coords = static_cast<Coordinates>(flag);
  f.values.resize(static_cast<Eigen::Index>(V), static_cast<Eigen::Index>(J));
  r.get_array(f.values.data(), static_cast<std::size_t>(V * J));
  r.expect_end();
  return f;
}

}  // namespace hemo

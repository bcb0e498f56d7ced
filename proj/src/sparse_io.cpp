#include "binary_io.hpp"
#include "hemo/error.hpp"
#include "hemo/mesh_fem.hpp"

#include <cstdint>
#include <vector>

namespace hemo {

// Layout: "SSYM", u64 dim, u64 nnz, u64 offsets[dim+1], u64 indices[nnz], f64 values[nnz].
void write_sparse(const std::filesystem::path& path, const SparseSym& a) {
  detail::BinaryWriter w(path);
  w.magic("SSYM");
  w.put<std::uint64_t>(a.dim());
  w.put<std::uint64_t>(a.nnz());
  for (int o : a.row_offsets()) w.put<std::uint64_t>(static_cast<std::uint64_t>(o));
  for (int c : a.col_indices()) w.put<std::uint64_t>(static_cast<std::uint64_t>(c));
  for (double v : a.values()) w.put<double>(v);
  w.close();
}

SparseSym read_sparse(const std::filesystem::path& path) {
  detail::BinaryReader r(path);
  if (!r.magic("SSYM")) throw Error(ErrorKind::VersionMismatch, "not an SSYM file: " + path.string());
  const auto n = r.get<std::uint64_t>();
  const auto nnz = r.get<std::uint64_t>();
  r.require_remaining((n + 1) * 8 + nnz * 16);
  std::vector<SparseSym::Triplet> t;
  t.reserve(nnz);
  std::vector<std::uint64_t> offsets(n + 1), indices(nnz);
  r.get_array(offsets.data(), offsets.size());
  r.get_array(indices.data(), indices.size());
  if (offsets.front() != 0 || offsets.back() != nnz)
    throw Error(ErrorKind::MalformedFile, "inconsistent row offsets in " + path.string());
  for (std::uint64_t row = 0; row < n; ++row) {
    if (offsets[row + 1] < offsets[row])
      throw Error(ErrorKind::MalformedFile, "decreasing row offsets in " + path.string());
    for (std::uint64_t k = offsets[row]; k < offsets[row + 1]; ++k) {
      if (indices[k] >= n || (k > offsets[row] && indices[k] <= indices[k - 1]))
        throw Error(ErrorKind::MalformedFile, "bad column index in " + path.string());
      t.emplace_back(static_cast<int>(row), static_cast<int>(indices[k]), 0.0);
    }
  }
  for (auto& tr : t) tr = SparseSym::Triplet(tr.row(), tr.col(), r.get<double>());
  r.expect_end();
  SparseSym a = SparseSym::from_triplets(n, t, false);
  return SparseSym(a.matrix(), a.asymmetry() <= 1e-12);
}

}  // namespace hemo

#include "hemo/mesh_fem.hpp"

#include "hemo/error.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <utility>

namespace hemo {

namespace {

constexpr double kDegenerateTol = 1e-12;

double triangle_area(const Eigen::Vector3d& a, const Eigen::Vector3d& b, const Eigen::Vector3d& c) {
  return 0.5 * (b - a).cross(c - a).norm();
}

}  // namespace

double TriMesh::face_area(std::size_t f) const {
  const auto& t = faces[f];
  return triangle_area(vertices[t[0]], vertices[t[1]], vertices[t[2]]);
}

double TriMesh::total_area() const {
  double s = 0.0;
  for (std::size_t f = 0; f < faces.size(); ++f) s += face_area(f);
  return s;
}

double TriMesh::mean_edge_length() const {
  if (faces.empty()) return 0.0;
  double s = 0.0;
  for (const auto& t : faces)
    for (int k = 0; k < 3; ++k) s += (vertices[t[k]] - vertices[t[(k + 1) % 3]]).norm();
  return s / (3.0 * static_cast<double>(faces.size()));
}

std::size_t TriMesh::num_edges() const {
  std::set<std::pair<int, int>> edges;
  for (const auto& t : faces)
    for (int k = 0; k < 3; ++k) {
      int a = t[k], b = t[(k + 1) % 3];
      edges.emplace(std::min(a, b), std::max(a, b));
    }
  return edges.size();
}

void TriMesh::validate() const {
  const int nv = static_cast<int>(vertices.size());
  for (std::size_t f = 0; f < faces.size(); ++f) {
    const auto& t = faces[f];
    for (int k = 0; k < 3; ++k)
      if (t[k] < 0 || t[k] >= nv)
        throw Error(ErrorKind::MalformedFile,
                    "face " + std::to_string(f) + " references vertex " + std::to_string(t[k]) +
                        " outside [0, " + std::to_string(nv) + ")");
    if (t[0] == t[1] || t[1] == t[2] || t[0] == t[2])
      throw Error(ErrorKind::DegenerateFace, "face " + std::to_string(f) + " repeats a vertex");
  }
  const double h = mean_edge_length();
  for (std::size_t f = 0; f < faces.size(); ++f)
    if (!(face_area(f) > kDegenerateTol * h * h))
      throw Error(ErrorKind::DegenerateFace, "face " + std::to_string(f) + " has zero area");
}

// ---------------------------------------------------------------- SparseSym

SparseSym::SparseSym(Matrix m, bool symmetric) : m_(std::move(m)), symmetric_(symmetric) {
  m_.makeCompressed();
}

SparseSym SparseSym::from_triplets(std::size_t n, const std::vector<Triplet>& triplets,
                                   bool symmetric) {
  Matrix m(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  m.setFromTriplets(triplets.begin(), triplets.end());
  return SparseSym(std::move(m), symmetric);
}

SparseSym SparseSym::identity(std::size_t n) { return diagonal(Eigen::VectorXd::Ones(n)); }

SparseSym SparseSym::diagonal(const Eigen::VectorXd& d) {
  std::vector<Triplet> t;
  t.reserve(static_cast<std::size_t>(d.size()));
  for (Eigen::Index i = 0; i < d.size(); ++i) t.emplace_back(i, i, d[i]);
  return from_triplets(static_cast<std::size_t>(d.size()), t);
}

double SparseSym::coeff(std::size_t i, std::size_t j) const {
  return m_.coeff(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
}

double SparseSym::quadratic_form(const Eigen::VectorXd& x) const { return x.dot(m_ * x); }

Eigen::VectorXd SparseSym::diagonal() const { return m_.diagonal(); }

double SparseSym::asymmetry() const {
  double scale = 0.0, diff = 0.0;
  for (Eigen::Index r = 0; r < m_.outerSize(); ++r)
    for (Matrix::InnerIterator it(m_, r); it; ++it) {
      scale = std::max(scale, std::abs(it.value()));
      diff = std::max(diff, std::abs(it.value() - m_.coeff(it.col(), it.row())));
    }
  return scale > 0.0 ? diff / scale : 0.0;
}

SparseSym operator+(const SparseSym& a, const SparseSym& b) {
  if (a.dim() != b.dim())
    throw Error(ErrorKind::DimensionMismatch, "sparse sum of dimensions " + std::to_string(a.dim()) +
                                                  " and " + std::to_string(b.dim()));
  return SparseSym(SparseSym::Matrix(a.matrix() + b.matrix()), a.symmetric() && b.symmetric());
}

SparseSym operator*(double s, const SparseSym& a) {
  return SparseSym(SparseSym::Matrix(s * a.matrix()), a.symmetric());
}

// ----------------------------------------------------------------- OFF I/O

namespace {

// Reads the next non-empty, non-comment line.
bool next_line(std::istream& in, std::string& line) {
  while (std::getline(in, line)) {
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    if (line.find_first_not_of(" \t\r") != std::string::npos) return true;
  }
  return false;
}

}  // namespace

TriMesh load_mesh(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::MalformedFile, "cannot open mesh " + path.string());
  const std::string where = " in " + path.string();
  std::string line;
  if (!next_line(in, line)) throw Error(ErrorKind::MalformedFile, "empty file" + where);

  std::istringstream header(line);
  std::string tag;
  header >> tag;
  if (tag.rfind("OFF", 0) != 0) throw Error(ErrorKind::MalformedFile, "missing OFF header" + where);
  long long nv = -1, nf = -1, ne = 0;
  if (!(header >> nv)) {
    if (!next_line(in, line)) throw Error(ErrorKind::MalformedFile, "missing counts" + where);
    header = std::istringstream(line);
    header >> nv;
  }
  if (!(header >> nf)) throw Error(ErrorKind::MalformedFile, "missing face count" + where);
  header >> ne;
  if (nv < 0 || nf < 0) throw Error(ErrorKind::MalformedFile, "negative counts" + where);

  TriMesh mesh;
  mesh.vertices.reserve(static_cast<std::size_t>(nv));
  for (long long i = 0; i < nv; ++i) {
    if (!next_line(in, line))
      throw Error(ErrorKind::MalformedFile, "header declares " + std::to_string(nv) +
                                                " vertices but file has " + std::to_string(i) + where);
    std::istringstream ls(line);
    Eigen::Vector3d p;
    if (!(ls >> p.x() >> p.y() >> p.z()))
      throw Error(ErrorKind::MalformedFile, "bad vertex line " + std::to_string(i) + where);
    mesh.vertices.push_back(p);
  }
  mesh.faces.reserve(static_cast<std::size_t>(nf));
  for (long long i = 0; i < nf; ++i) {
    if (!next_line(in, line))
      throw Error(ErrorKind::MalformedFile, "header declares " + std::to_string(nf) +
                                                " faces but file has " + std::to_string(i) + where);
    std::istringstream ls(line);
    int k = 0;
    std::array<int, 3> t{};
    if (!(ls >> k >> t[0] >> t[1] >> t[2]) || k != 3)
      throw Error(ErrorKind::MalformedFile, "face " + std::to_string(i) + " is not a triangle" + where);
    mesh.faces.push_back(t);
  }
  // A vertex line that was counted as a face (too few vertices declared) or
  // extra geometry means the header counts are wrong.
  if (next_line(in, line))
    throw Error(ErrorKind::MalformedFile, "content beyond declared counts" + where);
  mesh.validate();
  return mesh;
}

void save_mesh(const std::filesystem::path& path, const TriMesh& mesh) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::MalformedFile, "cannot write mesh " + path.string());
  out.precision(17);
  out << "OFF\n" << mesh.num_vertices() << ' ' << mesh.num_faces() << ' ' << mesh.num_edges() << '\n';
  for (const auto& p : mesh.vertices) out << p.x() << ' ' << p.y() << ' ' << p.z() << '\n';
  for (const auto& t : mesh.faces) out << "3 " << t[0] << ' ' << t[1] << ' ' << t[2] << '\n';
}

// -------------------------------------------------------------- generators

TriMesh make_icosphere(int subdivisions, double radius) {
  const double phi = (1.0 + std::sqrt(5.0)) / 2.0;
  TriMesh mesh;
  mesh.vertices = {{-1, phi, 0}, {1, phi, 0},  {-1, -phi, 0}, {1, -phi, 0},
                   {0, -1, phi}, {0, 1, phi},  {0, -1, -phi}, {0, 1, -phi},
                   {phi, 0, -1}, {phi, 0, 1},  {-phi, 0, -1}, {-phi, 0, 1}};
  mesh.faces = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11},
                {1, 5, 9},  {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
                {3, 9, 4},  {3, 4, 2},  {3, 2, 6},   {3, 6, 8},  {3, 8, 9},
                {4, 9, 5},  {2, 4, 11}, {6, 2, 10},  {8, 6, 7},  {9, 8, 1}};
  for (auto& v : mesh.vertices) v.normalize();

  for (int level = 0; level < subdivisions; ++level) {
    std::map<std::pair<int, int>, int> midpoint;
    auto mid = [&](int a, int b) {
      auto key = std::make_pair(std::min(a, b), std::max(a, b));
      if (auto it = midpoint.find(key); it != midpoint.end()) return it->second;
      Eigen::Vector3d p = (mesh.vertices[a] + mesh.vertices[b]).normalized();
      mesh.vertices.push_back(p);
      const int id = static_cast<int>(mesh.vertices.size()) - 1;
      midpoint.emplace(key, id);
      return id;
    };
    std::vector<std::array<int, 3>> next;
    next.reserve(mesh.faces.size() * 4);
    for (const auto& t : mesh.faces) {
      const int a = mid(t[0], t[1]), b = mid(t[1], t[2]), c = mid(t[2], t[0]);
      next.push_back({t[0], a, c});
      next.push_back({t[1], b, a});
      next.push_back({t[2], c, b});
      next.push_back({a, b, c});
    }
    mesh.faces = std::move(next);
  }
  for (auto& v : mesh.vertices) v *= radius;
  return mesh;
}

TriMesh make_grid_mesh(int n, double half_extent) {
  TriMesh mesh;
  const double h = 2.0 * half_extent / (n - 1);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) mesh.vertices.emplace_back(-half_extent + j * h, -half_extent + i * h, 0.0);
  auto id = [n](int i, int j) { return i * n + j; };
  for (int i = 0; i + 1 < n; ++i)
    for (int j = 0; j + 1 < n; ++j) {
      // alternate the diagonal to keep the mesh isotropic on average
      if ((i + j) % 2 == 0) {
        mesh.faces.push_back({id(i, j), id(i, j + 1), id(i + 1, j + 1)});
        mesh.faces.push_back({id(i, j), id(i + 1, j + 1), id(i + 1, j)});
      } else {
        mesh.faces.push_back({id(i, j), id(i, j + 1), id(i + 1, j)});
        mesh.faces.push_back({id(i, j + 1), id(i + 1, j + 1), id(i + 1, j)});
      }
    }
  return mesh;
}

// ---------------------------------------------------------------- assembly

SparseSym mass_matrix(const TriMesh& mesh, bool lumped) {
  mesh.validate();
  const std::size_t n = mesh.num_vertices();
  std::vector<SparseSym::Triplet> t;
  t.reserve(mesh.num_faces() * (lumped ? 3 : 9));
  for (std::size_t f = 0; f < mesh.num_faces(); ++f) {
    const double area = mesh.face_area(f);
    const auto& tri = mesh.faces[f];
    for (int a = 0; a < 3; ++a) {
      if (lumped) {
        // row sum of the consistent element matrix: A/6 + 2 * A/12
        t.emplace_back(tri[a], tri[a], area / 3.0);
        continue;
      }
      for (int b = 0; b < 3; ++b) t.emplace_back(tri[a], tri[b], a == b ? area / 6.0 : area / 12.0);
    }
  }
  return SparseSym::from_triplets(n, t);
}

SparseSym stiffness_matrix(const TriMesh& mesh) {
  mesh.validate();
  const std::size_t n = mesh.num_vertices();
  std::vector<SparseSym::Triplet> t;
  t.reserve(mesh.num_faces() * 9);
  for (std::size_t f = 0; f < mesh.num_faces(); ++f) {
    const auto& tri = mesh.faces[f];
    const double area = mesh.face_area(f);
    // e[k] is the edge opposite vertex k; grad(phi_k) = n x e[k] / (2A), so
    // the element entry A * grad(phi_a) . grad(phi_b) = e[a] . e[b] / (4A).
    std::array<Eigen::Vector3d, 3> e;
    for (int k = 0; k < 3; ++k) e[k] = mesh.vertices[tri[(k + 2) % 3]] - mesh.vertices[tri[(k + 1) % 3]];
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b) t.emplace_back(tri[a], tri[b], e[a].dot(e[b]) / (4.0 * area));
  }
  return SparseSym::from_triplets(n, t);
}

}  // namespace hemo

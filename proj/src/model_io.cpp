#include "binary_io.hpp"
#include "hemo/error.hpp"
#include "hemo/model_io.hpp"

#include <string>

namespace hemo {

namespace {

constexpr std::uint32_t kModelVersion = 1;
constexpr std::uint8_t kSummaryTag = 1;
constexpr std::uint8_t kFlowTag = 2;

void put_networks(detail::BinaryWriter& w, const std::vector<const Mlp*>& nets) {
  w.put<std::uint32_t>(static_cast<std::uint32_t>(nets.size()));
  for (const Mlp* net : nets) {
    w.put<std::uint32_t>(static_cast<std::uint32_t>(net->layers.size()));
    w.put<std::uint8_t>(static_cast<std::uint8_t>(net->activation));
    for (const auto& l : net->layers) {
      w.put<std::uint32_t>(static_cast<std::uint32_t>(l.W.rows()));
      w.put<std::uint32_t>(static_cast<std::uint32_t>(l.W.cols()));
      for (Eigen::Index r = 0; r < l.W.rows(); ++r)
        for (Eigen::Index c = 0; c < l.W.cols(); ++c) w.put<double>(l.W(r, c));
      w.put_array(l.b.data(), static_cast<std::size_t>(l.b.size()));
    }
  }
}

std::vector<Mlp> get_networks(detail::BinaryReader& r) {
  const auto count = r.get<std::uint32_t>();
  if (count > 1024) throw Error(ErrorKind::MalformedFile, "implausible network count in " + r.path().string());
  std::vector<Mlp> nets(count);
  for (auto& net : nets) {
    const auto layers = r.get<std::uint32_t>();
    if (layers == 0 || layers > 64) throw Error(ErrorKind::MalformedFile, "implausible layer count in " + r.path().string());
    const auto act = r.get<std::uint8_t>();
    if (act > static_cast<std::uint8_t>(Activation::Softplus))
      throw Error(ErrorKind::MalformedFile, "unknown activation code in " + r.path().string());
    net.activation = static_cast<Activation>(act);
    for (std::uint32_t l = 0; l < layers; ++l) {
      const auto rows = r.get<std::uint32_t>();
      const auto cols = r.get<std::uint32_t>();
      r.require_remaining((static_cast<std::uint64_t>(rows) * cols + rows) * sizeof(double));
      DenseLayer layer{Eigen::MatrixXd(rows, cols), Eigen::VectorXd(rows)};
      for (Eigen::Index i = 0; i < layer.W.rows(); ++i)
        for (Eigen::Index j = 0; j < layer.W.cols(); ++j) layer.W(i, j) = r.get<double>();
      r.get_array(layer.b.data(), rows);
      if (!net.layers.empty() && net.layers.back().W.rows() != layer.W.cols())
        throw Error(ErrorKind::MalformedFile, "layer shapes do not chain in " + r.path().string());
      net.layers.push_back(std::move(layer));
    }
  }
  return nets;
}

void read_header(detail::BinaryReader& r, std::uint8_t expected_tag) {
  if (!r.magic("HFNN")) throw Error(ErrorKind::VersionMismatch, "not an HFNN model: " + r.path().string());
  const auto version = r.get<std::uint32_t>();
  if (version != kModelVersion)
    throw Error(ErrorKind::VersionMismatch, "model version " + std::to_string(version) + " in " + r.path().string());
  const auto tag = r.get<std::uint8_t>();
  if (tag != expected_tag)
    throw Error(ErrorKind::VersionMismatch, "model type tag " + std::to_string(tag) + " in " + r.path().string());
}

}  // namespace

void save_summary(const std::filesystem::path& path, const SummaryModel& model) {
  detail::BinaryWriter w(path);
  w.magic("HFNN");
  w.put<std::uint32_t>(kModelVersion);
  w.put<std::uint8_t>(kSummaryTag);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(model.M));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(model.J));
  put_networks(w, {&model.net});
  w.close();
}

SummaryModel load_summary(const std::filesystem::path& path) {
  detail::BinaryReader r(path);
  read_header(r, kSummaryTag);
  SummaryModel m;
  m.M = static_cast<int>(r.get<std::uint32_t>());
  m.J = static_cast<int>(r.get<std::uint32_t>());
  auto nets = get_networks(r);
  r.expect_end();
  if (nets.size() != 1) throw Error(ErrorKind::MalformedFile, "summary model must hold one network");
  m.net = std::move(nets[0]);
  if (m.net.input_dim() != m.encoding_dim() || m.net.output_dim() != m.J)
    throw Error(ErrorKind::MalformedFile, "summary network shape disagrees with its header");
  return m;
}

void save_flow(const std::filesystem::path& path, const FlowModel& model) {
  detail::BinaryWriter w(path);
  w.magic("HFNN");
  w.put<std::uint32_t>(kModelVersion);
  w.put<std::uint8_t>(kFlowTag);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(model.J));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(model.num_bins));
  w.put<double>(model.tail_bound);
  std::vector<const Mlp*> nets;
  for (const auto& c : model.conditioners) nets.push_back(&c);
  put_networks(w, nets);
  w.close();
}

FlowModel load_flow(const std::filesystem::path& path) {
  detail::BinaryReader r(path);
  read_header(r, kFlowTag);
  FlowModel m;
  m.J = static_cast<int>(r.get<std::uint32_t>());
  m.num_bins = static_cast<int>(r.get<std::uint32_t>());
  m.tail_bound = r.get<double>();
  m.conditioners = get_networks(r);
  r.expect_end();
  try {
    m.validate();
  } catch (const Error& e) {
    throw Error(ErrorKind::MalformedFile, std::string("flow model: ") + e.what());
  }
  return m;
}

}  // namespace hemo

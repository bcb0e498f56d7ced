#include "hemo/cli.hpp"

#include "csv.hpp"
#include "hemo/baselines.hpp"
#include "hemo/bench.hpp"
#include "hemo/bootstrap.hpp"
#include "hemo/calibration.hpp"
#include "hemo/config.hpp"
#include "hemo/dataset.hpp"
#include "hemo/downstream.hpp"
#include "hemo/error.hpp"
#include "hemo/map_solver.hpp"
#include "hemo/model_io.hpp"
#include "hemo/parallel.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <functional>
#include <map>
#include <ostream>
#include <string>

namespace hemo {

namespace fs = std::filesystem;

namespace {

struct Context {
  RunConfig config;
  std::uint64_t seed = 0;
  fs::path out;
  std::ostream& log;
};

const fs::path& need(const fs::path& p, const std::string& key) {
  if (p.empty()) throw Error(ErrorKind::InvalidArgument, "config key '" + key + "' is required for this command");
  if (!fs::exists(p)) throw Error(ErrorKind::MalformedFile, "config key '" + key + "': no such file " + p.string());
  return p;
}

void write_field_csv(const fs::path& path, const ParamField& field) {
  auto out = detail::open_csv(path, "vertex,component,value");
  for (Eigen::Index v = 0; v < field.values.rows(); ++v)
    for (Eigen::Index j = 0; j < field.values.cols(); ++j)
      out << v << ',' << j << ',' << detail::num(field.values(v, j)) << '\n';
}

TrainedModels load_models(const RunConfig& c) {
  TrainedModels m;
  m.summary = load_summary(need(c.summary_model, "summary_model"));
  m.flow = load_flow(need(c.flow_model, "flow_model"));
  if (m.summary.J != c.model.num_params() || m.flow.J != c.model.num_params())
    throw Error(ErrorKind::DimensionMismatch, "trained models do not match the configured HRF model");
  if (m.summary.M != c.sim.M)
    throw Error(ErrorKind::DimensionMismatch, "summary network expects M=" + std::to_string(m.summary.M) +
                                                  ", config has M=" + std::to_string(c.sim.M));
  return m;
}

BoldDataset load_data(const RunConfig& c) { return read_dataset(need(c.dataset, "dataset")); }

TriMesh load_mesh_checked(const RunConfig& c, const BoldDataset& data) {
  const TriMesh mesh = mesh_from_config(c);
  data.validate(mesh.num_vertices());
  return mesh;
}

void cmd_simulate(Context& ctx) {
  const SyntheticExperiment ex = simulate_experiment(ctx.config, ctx.seed);
  save_mesh(ctx.out / "mesh.off", ex.mesh);
  write_dataset(ctx.out / "data.hbld", ex.data);
  write_field(ctx.out / "truth.hfld", ex.truth);
  write_field_csv(ctx.out / "truth.csv", ex.truth.to_constrained());
  ctx.log << "simulated " << ex.data.Y.rows() << " series of length " << ex.data.Y.cols() << '\n';
}

void cmd_calibrate(Context& ctx) {
  const BoldDataset data = load_data(ctx.config);
  Rng rng(ctx.seed);
  const CalibrationResult r =
      calibrate(data, ctx.config.calibration_bounds, ctx.config.calibration, ctx.config.model, rng);
  auto out = detail::open_csv(ctx.out / "calibration.csv", "evaluation,lambda_min,lambda_max,a_min,a_max,sigma2,loss");
  for (std::size_t i = 0; i < r.history.size(); ++i) {
    const auto& s = r.history[i];
    out << i << ',' << detail::num(s.nu.lambda_min) << ',' << detail::num(s.nu.lambda_max) << ','
        << detail::num(s.nu.a_min) << ',' << detail::num(s.nu.a_max) << ',' << detail::num(s.nu.sigma2) << ','
        << detail::num(s.loss) << '\n';
  }
  std::ofstream cfg(ctx.out / "calibrated.cfg", std::ios::trunc);
  cfg << "# best of " << r.history.size() << " evaluations, loss " << detail::num(r.best_loss) << '\n'
      << "sim.lambda_min = " << detail::num(r.best.lambda_min) << '\n'
      << "sim.lambda_max = " << detail::num(r.best.lambda_max) << '\n'
      << "sim.a_min = " << detail::num(r.best.a_min) << '\n'
      << "sim.a_max = " << detail::num(r.best.a_max) << '\n'
      << "sim.sigma2 = " << detail::num(r.best.sigma2) << '\n';
  if (!cfg) throw Error(ErrorKind::MalformedFile, "cannot write calibrated.cfg");
}

void cmd_train(Context& ctx) {
  const TrainedModels m = train_models(ctx.config, ctx.seed);
  save_summary(ctx.out / "summary.hfnn", m.summary);
  save_flow(ctx.out / "flow.hfnn", m.flow);
  auto out = detail::open_csv(ctx.out / "training.csv", "network,iteration,batch_loss");
  for (std::size_t i = 0; i < m.summary_report.batch_losses.size(); ++i)
    out << "summary," << i << ',' << detail::num(m.summary_report.batch_losses[i]) << '\n';
  for (std::size_t i = 0; i < m.flow_report.batch_losses.size(); ++i)
    out << "flow," << i << ',' << detail::num(m.flow_report.batch_losses[i]) << '\n';
  ctx.log << "summary held-out loss " << m.summary_report.initial_loss << " -> " << m.summary_report.final_loss
          << "; flow held-out loss " << m.flow_report.initial_loss << " -> " << m.flow_report.final_loss << '\n';
}

void cmd_estimate(Context& ctx) {
  const BoldDataset data = load_data(ctx.config);
  const TriMesh mesh = load_mesh_checked(ctx.config, data);
  const TrainedModels m = load_models(ctx.config);
  const HyperparamSelection sel = estimate_field(ctx.config, mesh, data, m);
  const ParamField theta = sel.map.field.to_constrained();
  write_field(ctx.out / "estimate.hfld", theta);
  write_field_csv(ctx.out / "estimate.csv", theta);
  auto ev = detail::open_csv(ctx.out / "evidence.csv", "kappa,tau,ok,evidence,selected,error");
  for (const auto& p : sel.grid)
    ev << detail::num(p.kappa) << ',' << detail::num(p.tau) << ',' << p.ok << ',' << (p.ok ? detail::num(p.evidence) : "")
       << ',' << (p.kappa == sel.kappa && p.tau == sel.tau) << ',' << '"' << p.error << '"' << '\n';
  auto nt = detail::open_csv(ctx.out / "newton.csv", "iteration,objective,grad_norm,step,damping");
  for (const auto& h : sel.map.history)
    nt << h.iteration << ',' << detail::num(h.objective) << ',' << detail::num(h.grad_norm) << ','
       << detail::num(h.step) << ',' << detail::num(h.damping) << '\n';
  ctx.log << "selected kappa=" << sel.kappa << " tau=" << sel.tau << " after " << sel.map.iterations
          << " Newton iterations\n";
}

void cmd_baseline(Context& ctx) {
  const BoldDataset data = load_data(ctx.config);
  const SummaryModel summary = load_summary(need(ctx.config.summary_model, "summary_model"));
  const ParamField mpm = mpm_estimate(data, summary, ctx.config.model);
  write_field(ctx.out / "mpm.hfld", mpm);
  write_field_csv(ctx.out / "mpm.csv", mpm);
  if (ctx.config.model.variant == HrfVariant::OneParameter) {
    const ParamField jm =
        jointmap_field(data, ctx.config.model, std::sqrt(ctx.config.sim.sigma2), ctx.config.jointmap);
    write_field(ctx.out / "jointmap.hfld", jm);
    write_field_csv(ctx.out / "jointmap.csv", jm);
  }
}

void cmd_uq(Context& ctx) {
  const BoldDataset data = load_data(ctx.config);
  const TriMesh mesh = load_mesh_checked(ctx.config, data);
  const TrainedModels m = load_models(ctx.config);
  const int J = ctx.config.model.num_params();
  const SparseSym Q = full_precision(mass_matrix(mesh, true), stiffness_matrix(mesh),
                                     PriorSpec::uniform(J, ctx.config.kappa, ctx.config.tau));
  const FlowLikelihood lik(m.flow);
  const EstimationPipeline pipeline = [&](const BoldDataset& d) {
    const RowMatrix T = summary_forward_batch(m.summary, d.Y);
    return newton_map(initial_field(T, ctx.config.model), T, lik, Q, ctx.config.newton).field;
  };
  Rng rng(ctx.seed);
  const IntervalField iv = double_bootstrap_intervals(data, pipeline, ctx.config.bootstrap, rng);
  auto out = detail::open_csv(ctx.out / "intervals.csv", "vertex,component,estimate,lower,upper,flagged");
  for (Eigen::Index v = 0; v < iv.lower.rows(); ++v)
    for (Eigen::Index j = 0; j < iv.lower.cols(); ++j)
      out << v << ',' << j << ',' << detail::num(iv.estimate(v, j)) << ',' << detail::num(iv.lower(v, j)) << ','
          << detail::num(iv.upper(v, j)) << ',' << static_cast<int>(iv.flagged(v, j)) << '\n';
  auto lv = detail::open_csv(ctx.out / "uq_levels.csv", "component,alpha0,alpha_hat");
  for (std::size_t j = 0; j < iv.alpha_hat.size(); ++j)
    lv << j << ',' << detail::num(iv.alpha0) << ',' << detail::num(iv.alpha_hat[j]) << '\n';
  if (iv.degenerate) ctx.log << "warning: zero bootstrap spread at some vertices (flagged in intervals.csv)\n";
}

void cmd_deconvolve(Context& ctx) {
  const BoldDataset data = load_data(ctx.config);
  const ParamField field = read_field(need(ctx.config.field, "field"), ctx.config.model).to_constrained();
  if (field.values.rows() != data.Y.rows())
    throw Error(ErrorKind::DimensionMismatch, "field and dataset have different vertex counts");
  BoldDataset out;
  out.t_r = data.t_r;
  out.Y.resize(data.Y.rows(), data.Y.cols());
  parallel_for(static_cast<std::size_t>(data.Y.rows()), [&](std::size_t i) {
    const auto v = static_cast<Eigen::Index>(i);
    const Eigen::VectorXd y = data.Y.row(v).transpose();
    const Eigen::VectorXd th = field.values.row(v).transpose();
    const double power =
        ctx.config.signal_power > 0.0 ? ctx.config.signal_power : default_signal_power(y, ctx.config.sim.sigma2);
    out.Y.row(v) = wiener_deconvolve(y, ctx.config.model, std::span<const double>(th.data(), static_cast<std::size_t>(th.size())),
                                     ctx.config.sim.sigma2, power, data.t_r)
                       .transpose();
  });
  write_dataset(ctx.out / "deconvolved.hbld", out);
}

void cmd_connect(Context& ctx) {
  const BoldDataset data = load_data(ctx.config);
  const GcResult r = seed_connectivity(data, ctx.config.roi, ctx.config.lag, ctx.config.fdr_q);
  auto out = detail::open_csv(ctx.out / "connectivity.csv", "vertex,F,pvalue,significant,singular");
  for (std::size_t i = 0; i < r.vertices.size(); ++i)
    out << r.vertices[i] << ',' << detail::num(r.F[i]) << ',' << detail::num(r.pvalue[i]) << ',' << r.significant[i]
        << ',' << r.singular[i] << '\n';
}

void cmd_popstats(Context& ctx) {
  const auto& paths = ctx.config.population_fields;
  if (paths.size() < 2) throw Error(ErrorKind::InvalidArgument, "config key 'population_fields' needs at least two files");
  Eigen::MatrixXd fields;
  for (std::size_t i = 0; i < paths.size(); ++i) {
    const ParamField f = read_field(need(paths[i], "population_fields"), ctx.config.model).to_unconstrained();
    if (i == 0) fields.resize(static_cast<Eigen::Index>(paths.size()), f.values.rows());
    if (f.values.rows() != fields.cols())
      throw Error(ErrorKind::DimensionMismatch, paths[i].string() + " has a different vertex count");
    fields.row(static_cast<Eigen::Index>(i)) = f.values.col(0).transpose();
  }
  const int K = std::min(ctx.config.kl_components, static_cast<int>(fields.rows()) - 1);
  const KlDecomposition kl = kl_decompose(fields, K);
  auto mean = detail::open_csv(ctx.out / "kl_mean.csv", "vertex,mean,variance");
  const Eigen::VectorXd var = kl.pointwise_variance();
  for (Eigen::Index v = 0; v < kl.mean.size(); ++v)
    mean << v << ',' << detail::num(kl.mean[v]) << ',' << detail::num(var[v]) << '\n';
  auto ev = detail::open_csv(ctx.out / "kl_eigenvalues.csv", "component,eigenvalue");
  for (Eigen::Index k = 0; k < kl.eigenvalues.size(); ++k) ev << k << ',' << detail::num(kl.eigenvalues[k]) << '\n';
  auto ef = detail::open_csv(ctx.out / "kl_eigenfunctions.csv", "component,vertex,value");
  for (Eigen::Index k = 0; k < kl.eigenfunctions.rows(); ++k)
    for (Eigen::Index v = 0; v < kl.eigenfunctions.cols(); ++v)
      ef << k << ',' << v << ',' << detail::num(kl.eigenfunctions(k, v)) << '\n';
  auto sc = detail::open_csv(ctx.out / "kl_scores.csv", "subject,component,score");
  for (Eigen::Index i = 0; i < kl.scores.rows(); ++i)
    for (Eigen::Index k = 0; k < kl.scores.cols(); ++k) sc << i << ',' << k << ',' << detail::num(kl.scores(i, k)) << '\n';
}

void cmd_bench(Context& ctx) {
  const BenchResult r = run_bench(ctx.config, ctx.seed);
  write_bench_csv(ctx.out / "bench.csv", r);
  for (const auto& row : r.rows)
    ctx.log << row.method << " component " << row.component << ": MSE " << row.mse << ", bias " << row.bias << '\n';
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Spatial hemodynamic response estimation from BOLD time series", "hemo"};
  app.fallthrough();
  app.require_subcommand(1);
  fs::path config_path, out_dir = ".";
  std::uint64_t seed = 0;
  unsigned threads = 0;
  app.add_option("--config", config_path, "key = value configuration file");
  app.add_option("--seed", seed, "master random seed")->required();
  app.add_option("--threads", threads, "maximum worker threads (0 = all cores)");
  app.add_option("--out", out_dir, "output directory");

  const std::map<std::string, std::pair<std::string, void (*)(Context&)>> commands{
      {"simulate", {"synthetic dataset and ground-truth field", cmd_simulate}},
      {"calibrate", {"fit simulator hyperparameters to a dataset's spectrum", cmd_calibrate}},
      {"train", {"train the summary network and the conditional flow", cmd_train}},
      {"estimate", {"MAP field with evidence-based prior selection", cmd_estimate}},
      {"baseline", {"MPM and JointMAP estimates", cmd_baseline}},
      {"uq", {"double-bootstrap pointwise intervals", cmd_uq}},
      {"deconvolve", {"Wiener deconvolution with an estimated field", cmd_deconvolve}},
      {"connect", {"seed-based Granger connectivity with FDR control", cmd_connect}},
      {"popstats", {"Karhunen-Loeve decomposition of subject fields", cmd_popstats}},
      {"bench", {"synthetic comparison of all estimators", cmd_bench}},
  };
  for (const auto& [name, entry] : commands) app.add_subcommand(name, entry.first);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return 1;
  }

  std::string name;
  for (const auto* sub : app.get_subcommands()) name = sub->get_name();
  try {
    set_max_threads(threads);
    Context ctx{RunConfig::defaults(), seed, out_dir, out};
    if (!config_path.empty()) {
      const KeyValueConfig kv = KeyValueConfig::parse_file(config_path);
      ctx.config = RunConfig::from(kv);
      for (const auto& key : kv.unused_keys()) err << "warning: unknown config key '" << key << "'\n";
    }
    fs::create_directories(out_dir);
    commands.at(name).second(ctx);
    return 0;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return is_numerical(e.kind()) ? 3 : 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }
}

}  // namespace hemo

// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits non-zero if any criterion fails. Optional arguments select criteria
// by number, e.g. `acceptance 1 2 9`.

#include "hemo/bench.hpp"
#include "hemo/bootstrap.hpp"
#include "hemo/config.hpp"
#include "hemo/downstream.hpp"
#include "hemo/flow.hpp"
#include "hemo/map_solver.hpp"
#include "hemo/mesh_fem.hpp"
#include "hemo/rng.hpp"
#include "hemo/simulator.hpp"
#include "hemo/spde_prior.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <iterator>
#include <numbers>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

using namespace hemo;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double x) {
  std::ostringstream s;
  s.precision(4);
  s << x;
  return s.str();
}

TriMesh rect_mesh(int nx, int ny) {
  TriMesh m;
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i) m.vertices.emplace_back(i, j, 0.0);
  for (int j = 0; j + 1 < ny; ++j)
    for (int i = 0; i + 1 < nx; ++i) {
      const int a = j * nx + i, b = a + 1, c = a + nx, d = c + 1;
      m.faces.push_back({a, b, d});
      m.faces.push_back({a, d, c});
    }
  return m;
}

HrfModel model_for(int J) { return J == 1 ? HrfModel::one_parameter() : HrfModel::two_parameter(); }

RowMatrix random_rows(Eigen::Index V, int J, Rng& rng, double scale) {
  std::normal_distribution<double> n;
  RowMatrix r(V, J);
  for (Eigen::Index i = 0; i < r.size(); ++i) r.data()[i] = scale * n(rng);
  return r;
}

ParamField field_of(const RowMatrix& values, const HrfModel& model) {
  ParamField f;
  f.model = model;
  f.values = values;
  return f;
}

// Default architecture with randomized output layers, so the flow is far from
// the identity.
FlowModel random_flow(int J, Rng& rng) {
  FlowModel f = FlowModel::create(J, rng);
  std::normal_distribution<double> n(0.0, 0.3);
  for (auto& c : f.conditioners) {
    auto& out = c.layers.back();
    for (Eigen::Index i = 0; i < out.W.size(); ++i) out.W.data()[i] = n(rng);
    for (Eigen::Index i = 0; i < out.b.size(); ++i) out.b.data()[i] = n(rng);
  }
  return f;
}

double correlation(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  const Eigen::VectorXd x = a.array() - a.mean(), y = b.array() - b.mean();
  return x.dot(y) / (x.norm() * y.norm());
}

Eigen::VectorXd white(int M, Rng& rng) {
  std::normal_distribution<double> n;
  Eigen::VectorXd v(M);
  for (auto& x : v) x = n(rng);
  return v;
}

// 1. FEM matrices against hand-computed values.
Outcome fem_oracles() {
  TriMesh tri;
  tri.vertices = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}};
  tri.faces = {{0, 1, 2}};
  const Eigen::MatrixXd C = mass_matrix(tri, false).to_dense();
  const Eigen::MatrixXd L = mass_matrix(tri, true).to_dense();
  const Eigen::MatrixXd G = stiffness_matrix(tri).to_dense();
  Eigen::Matrix3d C_ref, G_ref;
  C_ref << 2, 1, 1, 1, 2, 1, 1, 1, 2;
  C_ref /= 24.0;
  G_ref << 1, -0.5, -0.5, -0.5, 0.5, 0, -0.5, 0, 0.5;
  const Eigen::Matrix3d L_ref = Eigen::Vector3d::Constant(1.0 / 6.0).asDiagonal();
  const double err = std::max({(C - C_ref).cwiseAbs().maxCoeff(), (G - G_ref).cwiseAbs().maxCoeff(),
                               (L - L_ref).cwiseAbs().maxCoeff()});
  const double trace = mass_matrix(make_icosphere(3), true).diagonal().sum();
  const double trace_err = std::abs(trace - 4 * std::numbers::pi) / (4 * std::numbers::pi);
  return {err < 1e-12 && trace_err < 0.02,
          "max triangle error " + fmt(err) + ", lumped trace " + fmt(trace) + " (rel. err " + fmt(trace_err) + ")"};
}

// 2. Analytic gradients against central differences.
Outcome gradient_fidelity() {
  const TriMesh mesh = rect_mesh(5, 4);
  const auto V = static_cast<Eigen::Index>(mesh.num_vertices());
  const SparseSym C = mass_matrix(mesh, true), G = stiffness_matrix(mesh);
  double worst_flow = 0.0, worst_post = 0.0;
  for (int instance = 0; instance < 100; ++instance) {
    const int J = 1 + instance % 2;
    Rng rng(derive_seed(2, 1, static_cast<std::uint64_t>(instance)));
    const FlowModel flow = random_flow(J, rng);
    std::uniform_real_distribution<double> hp(0.3, 3.0);
    const SparseSym Q = full_precision(C, G, PriorSpec::uniform(J, hp(rng), hp(rng)));
    const RowMatrix T = random_rows(V, J, rng, 1.0);
    const ParamField x = field_of(random_rows(V, J, rng, 0.7), model_for(J));

    // flow_grad_context at one (u, context) pair per instance
    const std::vector<double> u(T.row(0).begin(), T.row(0).end());
    const std::vector<double> c(x.values.row(0).begin(), x.values.row(0).end());
    const Eigen::VectorXd g = flow_grad_context(flow, u, c);
    Eigen::VectorXd fd(J);
    const double h = 1e-6;
    for (int k = 0; k < J; ++k) {
      std::vector<double> p = c, q = c;
      p[static_cast<std::size_t>(k)] += h;
      q[static_cast<std::size_t>(k)] -= h;
      fd[k] = (flow_logpdf(flow, u, p) - flow_logpdf(flow, u, q)) / (2 * h);
    }
    worst_flow = std::max(worst_flow, (fd - g).lpNorm<Eigen::Infinity>() / g.lpNorm<Eigen::Infinity>());

    const FlowLikelihood lik(flow);
    const Eigen::VectorXd pg = posterior_gradient(x, T, lik, Q);
    const Eigen::VectorXd s = x.stacked();
    Eigen::VectorXd pfd(s.size());
    for (Eigen::Index i = 0; i < s.size(); ++i) {
      Eigen::VectorXd p = s, q = s;
      p[i] += h;
      q[i] -= h;
      pfd[i] = (neg_log_posterior(ParamField::from_stacked(p, mesh.num_vertices(), x.model), T, lik, Q) -
                neg_log_posterior(ParamField::from_stacked(q, mesh.num_vertices(), x.model), T, lik, Q)) /
               (2 * h);
    }
    worst_post = std::max(worst_post, (pfd - pg).lpNorm<Eigen::Infinity>() / pg.lpNorm<Eigen::Infinity>());
  }
  return {worst_flow < 1e-4 && worst_post < 1e-4,
          "worst relative error: flow " + fmt(worst_flow) + ", posterior " + fmt(worst_post)};
}

// Trapezoid rule for the J = 1 density over [-8, 8].
double density_mass(const FlowModel& flow, double context) {
  const int n = 4001;
  Eigen::MatrixXd U(1, n), Cx = Eigen::MatrixXd::Constant(1, n, context);
  for (int i = 0; i < n; ++i) U(0, i) = -8.0 + 16.0 * i / (n - 1);
  const Eigen::VectorXd p = flow_logp_batch(flow, U, Cx).array().exp();
  const double h = 16.0 / (n - 1);
  return h * (p.sum() - 0.5 * (p[0] + p[n - 1]));
}

// 3. Normalization of the conditional density before and after training.
Outcome flow_normalization() {
  Rng rng(3);
  FlowModel flow = FlowModel::create(1, rng);
  std::uniform_real_distribution<double> ctx(-2.0, 2.0);
  std::vector<double> contexts;
  for (int i = 0; i < 10; ++i) contexts.push_back(ctx(rng));

  double worst_before = 0.0;
  for (double c : contexts) worst_before = std::max(worst_before, std::abs(density_mass(flow, c) - 1.0));

  // A skewed conditional target so training moves well away from the identity.
  const int N = 4000;
  std::normal_distribution<double> nd;
  RowMatrix S(N, 1), Cx(N, 1);
  for (int i = 0; i < N; ++i) {
    Cx(i, 0) = ctx(rng);
    const double e = nd(rng);
    S(i, 0) = 0.8 * Cx(i, 0) + 0.4 * e + 0.3 * e * e;
  }
  AdamConfig adam;
  adam.learning_rate = 1e-3;
  adam.iterations = 200;
  TrainingReport report;
  flow = train_flow_on_pairs(S, Cx, adam, rng, &report);
  double worst_after = 0.0;
  for (double c : contexts) worst_after = std::max(worst_after, std::abs(density_mass(flow, c) - 1.0));
  return {worst_before < 1e-2 && worst_after < 1e-2 && report.final_loss < report.initial_loss,
          "max |mass - 1|: before " + fmt(worst_before) + ", after " + fmt(worst_after) + " (held-out loss " +
              fmt(report.initial_loss) + " -> " + fmt(report.final_loss) + ")"};
}

double gaussian_logpdf(const Eigen::VectorXd& t, const Eigen::MatrixXd& S) {
  const Eigen::LLT<Eigen::MatrixXd> llt(S);
  const Eigen::MatrixXd L = llt.matrixL();
  const double logdet = 2.0 * L.diagonal().array().log().sum();
  return -0.5 * t.dot(llt.solve(t)) - 0.5 * logdet -
         0.5 * static_cast<double>(t.size()) * std::log(2 * std::numbers::pi);
}

// 4. Newton and the Laplace evidence with a Gaussian likelihood.
Outcome newton_oracle() {
  const double sd = 0.6;
  const GaussianLikelihood lik(1, sd);
  const HrfModel model = model_for(1);
  Rng rng(4);

  const TriMesh sphere = make_icosphere(3, 100.0);
  const auto V = static_cast<Eigen::Index>(sphere.num_vertices());
  const SparseSym Q = full_precision(mass_matrix(sphere, true), stiffness_matrix(sphere), PriorSpec::uniform(1, 5e-2, 20.0));
  const RowMatrix T = random_rows(V, 1, rng, 1.0);
  NewtonOptions o;
  o.tol = 1e-10;
  const NewtonResult r = newton_map(initial_field(T, model), T, lik, Q, o);
  // (Q + I / sd^2) x = T / sd^2
  const SparseSym A = Q + SparseSym::diagonal(Eigen::VectorXd::Constant(V, 1.0 / (sd * sd)));
  const Eigen::VectorXd ridge = Eigen::MatrixXd(A.to_dense()).ldlt().solve(Eigen::VectorXd(T.col(0)) / (sd * sd));
  const double newton_err = (r.field.stacked() - ridge).lpNorm<Eigen::Infinity>() / ridge.lpNorm<Eigen::Infinity>();

  const TriMesh grid = rect_mesh(6, 5);
  const SparseSym Qs = full_precision(mass_matrix(grid, true), stiffness_matrix(grid), PriorSpec::uniform(1, 1.0, 1.0));
  const RowMatrix Ts = random_rows(30, 1, rng, 1.0);
  const NewtonResult rs = newton_map(initial_field(Ts, model), Ts, lik, Qs, o);
  const double ev = laplace_evidence(rs.field, Ts, lik, Qs);
  const Eigen::MatrixXd S = Qs.to_dense().inverse() + sd * sd * Eigen::MatrixXd::Identity(30, 30);
  const double exact = gaussian_logpdf(Eigen::VectorXd(Ts.col(0)), S);
  const double ev_err = std::abs(ev - exact) / std::abs(exact);
  return {newton_err < 1e-8 && r.iterations <= 2 && ev_err < 1e-6,
          "V=642: " + std::to_string(r.iterations) + " iterations, rel. error " + fmt(newton_err) +
              "; V=30 evidence rel. error " + fmt(ev_err)};
}

RunConfig bench_config(const std::string& text) { return RunConfig::from(KeyValueConfig::parse_string(text)); }

// 5. One-parameter synthetic comparison.
Outcome one_parameter_ordering() {
  const RunConfig c = bench_config(
      "mesh_subdivisions = 4\nmesh_radius = 100\nhrf = one\nM = 400\nsim.sigma2 = 0.05\nkappa = 5e-3\ntau = 100\n"
      "train.pairs = 20000\ntrain.summary.iterations = 3000\ntrain.flow.iterations = 3000\n"
      "bench.jointmap_vertices = 100\n");
  const BenchResult r = run_bench(c, 5);
  const double ours = r.find("Ours")->mse, mpm = r.find("MPM")->mse, jm = r.find("JointMAP")->mse;
  return {ours < mpm && mpm < jm && ours <= 0.05,
          "MSE Ours " + fmt(ours) + ", MPM " + fmt(mpm) + ", JointMAP " + fmt(jm) + " (" +
              std::to_string(r.find("JointMAP")->vertices) + " vertices)"};
}

// 6. Two-parameter synthetic comparison with bootstrap intervals.
Outcome two_parameter_identifiability() {
  const RunConfig c = bench_config(
      "mesh_subdivisions = 3\nmesh_radius = 100\nhrf = two\nM = 400\nsim.sigma2 = 0.05\nkappa = 5e-2\ntau = 100\n"
      "kappa_grid = 1e-2, 2.5e-2, 5e-2, 1e-1, 2e-1\n"
      "train.pairs = 20000\ntrain.summary.iterations = 3000\ntrain.flow.iterations = 3000\n"
      "bench.uq = true\nuq.B = 20\nuq.R = 5\n");
  const BenchResult r = run_bench(c, 6);
  const BenchRow* first = r.find("Ours", 0);
  const BenchRow* second = r.find("Ours", 1);
  return {first->mse < 0.01 && second->interval_length > 0.6,
          "theta_1 MSE " + fmt(first->mse) + "; theta_2 mean interval length " + fmt(second->interval_length) +
              " (needs > 0.6), coverage " + fmt(second->coverage)};
}

// 7. Coverage of the double bootstrap on the mean of white noise.
Outcome bootstrap_coverage() {
  BootstrapOptions o;
  o.outer = 50;
  o.inner = 20;
  o.block_length = 1;
  const double mu = 0.3;
  const EstimationPipeline mean_field = [](const BoldDataset& d) {
    ParamField f;
    f.model = HrfModel::one_parameter();
    f.values = d.Y.rowwise().mean();
    return f;
  };
  int covered = 0, total = 0;
  for (std::uint64_t rep = 0; rep < 200; ++rep) {
    Rng data_rng(derive_seed(7, 1, rep));
    std::normal_distribution<double> n(mu, 1.0);
    BoldDataset d;
    d.t_r = 1.0;
    d.Y.resize(4, 100);
    for (auto& v : d.Y.reshaped()) v = n(data_rng);
    Rng rng(derive_seed(7, 2, rep));
    const IntervalField iv = double_bootstrap_intervals(d, mean_field, o, rng);
    for (Eigen::Index v = 0; v < 4; ++v) {
      covered += iv.lower_unconstrained(v, 0) <= mu && mu <= iv.upper_unconstrained(v, 0);
      ++total;
    }
  }
  const double coverage = static_cast<double>(covered) / total;
  return {coverage >= 0.90 && coverage <= 0.99,
          "coverage " + fmt(coverage) + " over " + std::to_string(total) + " intervals (200 replicates)"};
}

// 8. Granger F test size and power.
Outcome granger_size_power() {
  const int M = 400, lag = 1;
  int rejections = 0;
  for (int i = 0; i < 10000; ++i) {
    Rng rng(derive_seed(8, 1, static_cast<std::uint64_t>(i)));
    const Eigen::VectorXd x = white(M, rng), y = white(M, rng);
    rejections += granger_f(x, y, lag).pvalue < 0.05;
  }
  const double size = rejections / 10000.0;
  int detected = 0;
  for (int i = 0; i < 1000; ++i) {
    Rng rng(derive_seed(8, 2, static_cast<std::uint64_t>(i)));
    const Eigen::VectorXd src = white(M, rng), noise = white(M, rng);
    Eigen::VectorXd tgt(M);
    tgt[0] = noise[0];
    for (int t = 1; t < M; ++t) tgt[t] = 0.8 * src[t - 1] + noise[t];
    detected += granger_f(src, tgt, lag).pvalue < 1e-3;
  }
  const double power = detected / 1000.0;
  return {size >= 0.04 && size <= 0.06 && power >= 0.99,
          "null rejection rate " + fmt(size) + ", power at p < 1e-3 " + fmt(power)};
}

// 9. Noiseless Wiener deconvolution of circularly convolved spike trains.
Outcome wiener_recovery() {
  const HrfModel m = HrfModel::one_parameter();
  const int M = 400;
  const double tr = 0.72;
  double worst = 1.0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    Rng rng(derive_seed(9, seed));
    const double theta = 0.5 + 2.0 * uniform01(rng);
    Eigen::VectorXd s = Eigen::VectorXd::Zero(M);
    for (int i = 0; i < M; ++i)
      if (uniform01(rng) < 0.2) s[i] = 0.5 + uniform01(rng);
    const HrfKernel h(m, std::vector<double>{theta});
    Eigen::VectorXd y = Eigen::VectorXd::Zero(M);
    for (int i = 0; i < M; ++i)
      if (s[i] != 0.0)
        for (int j = 0; j < M; ++j) y[(i + j) % M] += h(j * tr) * s[i];
    const Eigen::VectorXd est = wiener_deconvolve(y, m, std::vector<double>{theta}, 0.0, 1.0, tr);
    worst = std::min(worst, correlation(est, s));
  }
  return {worst > 0.99, "minimum correlation " + fmt(worst) + " over 100 instances"};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// 10. Every CLI command twice with the same seed.
Outcome cli_determinism() {
  const fs::path root = fs::path(HEMO_ACCEPTANCE_TMP) / "determinism";
  fs::remove_all(root);
  const fs::path in = root / "in";
  fs::create_directories(in);
  {
    std::ofstream cfg(in / "run.cfg");
    cfg << "mesh_subdivisions = 1\nM = 64\nsim.sigma2 = 0.1\nkappa = 0.05\ntau = 10\n"
           "kappa_grid = 0.05\ntau_grid = 10, 20\n"
           "train.pairs = 300\ntrain.summary.iterations = 30\ntrain.flow.iterations = 30\n"
           "calibrate.budget = 20\ncalibrate.simulations = 20\n"
           "uq.B = 10\nuq.R = 5\njointmap.rounds = 2\nbench.uq = true\n"
           "dataset = data.hbld\nsummary_model = summary.hfnn\nflow_model = flow.hfnn\nfield = estimate.hfld\n"
           "connect.roi = 0, 1\npopulation_fields = truth.hfld, estimate.hfld, mpm.hfld\n";
  }
  const std::vector<std::string> commands{"simulate", "calibrate", "train", "estimate", "baseline",
                                          "uq", "deconvolve", "connect", "popstats", "bench"};
  auto run = [&](const std::string& cmd, const fs::path& out) {
    const std::string line = std::string("\"") + HEMO_CLI_PATH + "\" " + cmd + " --seed 10 --config \"" +
                             (in / "run.cfg").string() + "\" --out \"" + out.string() + "\" > \"" +
                             (root / (cmd + ".log")).string() + "\" 2>&1";
    return std::system(line.c_str());
  };
  int files = 0;
  std::vector<std::string> problems;
  for (const auto& cmd : commands) {
    // The first run writes into the input directory, feeding later commands.
    const std::set<fs::path> before = [&] {
      std::set<fs::path> s;
      for (const auto& e : fs::directory_iterator(in)) s.insert(e.path().filename());
      return s;
    }();
    if (run(cmd, in) != 0) {
      problems.push_back(cmd + " failed");
      continue;
    }
    const fs::path again = root / "rerun" / cmd;
    if (run(cmd, again) != 0) {
      problems.push_back(cmd + " failed on rerun");
      continue;
    }
    int produced = 0;
    for (const auto& e : fs::directory_iterator(again)) {
      ++produced;
      ++files;
      const fs::path name = e.path().filename();
      if (slurp(e.path()) != slurp(in / name)) problems.push_back(cmd + ": " + name.string() + " differs");
      if (before.count(name)) problems.push_back(cmd + ": overwrote input " + name.string());
    }
    if (produced == 0) problems.push_back(cmd + " wrote nothing");
  }
  std::string detail = std::to_string(commands.size()) + " commands, " + std::to_string(files) + " files compared";
  for (const auto& p : problems) detail += "; " + p;
  return {problems.empty(), detail};
}

struct Criterion {
  int number;
  const char* name;
  std::function<Outcome()> run;
  double time_limit_s;  // 0: none stated
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> all{
      {1, "FEM oracle suite", fem_oracles, 1.0},
      {2, "gradient fidelity", gradient_fidelity, 30.0},
      {3, "flow normalization", flow_normalization, 10.0},
      {4, "Newton and evidence oracle", newton_oracle, 0.0},
      {5, "one-parameter MSE ordering", one_parameter_ordering, 7200.0},
      {6, "two-parameter identifiability", two_parameter_identifiability, 0.0},
      {7, "double-bootstrap coverage", bootstrap_coverage, 600.0},
      {8, "Granger size and power", granger_size_power, 0.0},
      {9, "Wiener recovery", wiener_recovery, 0.0},
      {10, "CLI determinism", cli_determinism, 0.0},
  };
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));

  int failures = 0;
  for (const auto& c : all) {
    if (!selected.empty() && !selected.count(c.number)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (c.time_limit_s > 0 && secs > c.time_limit_s) {
      o.pass = false;
      o.detail += "; exceeded " + fmt(c.time_limit_s) + " s";
    }
    failures += !o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << c.number << " (" << c.name << "): " << o.detail
              << " [" << fmt(secs) << " s]" << std::endl;
  }
  return failures == 0 ? 0 : 1;
}

// Command-line front end: built-in experiment reproductions (example1,
// robot, pipeline) and ad-hoc constrained fits on CSV data. Every command
// honors --seed; emitted files are byte-identical across runs unless
// --timings adds wall-clock columns.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "gpcon/bench.hpp"
#include "gpcon/csv.hpp"
#include "gpcon/mathfn.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string default_out_dir() {
  const char* env = std::getenv("GPCON_OUT_DIR");
  return env ? env : "gpcon_out";
}

std::ofstream open_out(const fs::path& dir, const std::string& name) {
  fs::create_directories(dir);
  std::ofstream out(dir / name, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + (dir / name).string());
  return out;
}

struct CommonFlags {
  std::string out = default_out_dir();
  std::uint64_t seed = 0;
  bool timings = false;
  int verbosity = 1;
};

void add_common(CLI::App* cmd, CommonFlags& flags) {
  cmd->add_option("--out", flags.out, "output directory")
      ->envname("GPCON_OUT_DIR");
  cmd->add_option("--seed", flags.seed, "base seed (64-bit)");
  cmd->add_flag("--timings", flags.timings,
                "include wall-clock columns in output files (breaks "
                "byte-identical reproducibility)");
  cmd->add_option("-v,--verbosity", flags.verbosity, "0 = quiet");
}

int cmd_example1(const CommonFlags& flags, bool noisy, double p_target,
                 int max_sites, int k_samples) {
  const gpcon::Example1Output out =
      gpcon::run_example1(noisy, p_target, flags.seed, max_sites, k_samples);

  auto grid = open_out(flags.out, "grid.csv");
  gpcon::write_csv_row(grid, {"x", "f_true", "unc_mean", "unc_lo", "unc_hi",
                              "con_mean", "con_lo", "con_hi", "con_mode"});
  for (Eigen::Index i = 0; i < out.grid.size(); ++i)
    gpcon::write_csv_row(
        grid, {gpcon::format_double(out.grid[i]),
               gpcon::format_double(out.f_true[i]),
               gpcon::format_double(out.unc_mean[i]),
               gpcon::format_double(out.unc_lo[i]),
               gpcon::format_double(out.unc_hi[i]),
               gpcon::format_double(out.con_mean[i]),
               gpcon::format_double(out.con_lo[i]),
               gpcon::format_double(out.con_hi[i]),
               gpcon::format_double(out.con_mode[i])});

  auto sites = open_out(flags.out, "sites.csv");
  gpcon::write_csv_row(sites, {"entry", "kind", "x"});
  for (const auto& [entry, x] : out.sites)
    gpcon::write_csv_row(sites,
                         {std::to_string(entry),
                          entry == 0 ? "bound" : "derivative",
                          gpcon::format_double(x[0])});

  auto metrics = open_out(flags.out, "metrics.csv");
  gpcon::write_csv_row(metrics, {"variant", "q2", "pva", "awoci",
                                 "log10_p_c_given_y", "n_v"});
  gpcon::write_csv_row(metrics,
                       {"unconstrained", gpcon::format_double(out.q2_unc),
                        gpcon::format_double(out.pva_unc),
                        gpcon::format_double(out.awoci_unc), "", "0"});
  gpcon::write_csv_row(
      metrics,
      {"constrained", gpcon::format_double(out.q2_con),
       gpcon::format_double(out.pva_con), gpcon::format_double(out.awoci_con),
       gpcon::format_double(out.log10_p_c_given_y),
       std::to_string(out.n_sites_bound + out.n_sites_mono)});

  auto trace = open_out(flags.out, "trace.csv");
  gpcon::write_trace_csv(trace, out.trace, flags.timings);

  if (flags.verbosity > 0)
    std::cout << "example1: " << out.n_sites_bound << " boundedness + "
              << out.n_sites_mono << " monotonicity sites, Q2 "
              << out.q2_unc << " -> " << out.q2_con << ", AWoCI "
              << out.awoci_unc << " -> " << out.awoci_con << "\n";
  return 0;
}

int run_table_experiment(const gpcon::ExperimentConfig& config,
                         const CommonFlags& flags) {
  const auto records = gpcon::run_experiment(config);
  auto csv = open_out(flags.out, "records.csv");
  gpcon::write_records_csv(csv, records, flags.timings);
  auto js = open_out(flags.out, "records.json");
  gpcon::write_records_json(js, config, records, flags.timings);

  int failures = 0;
  for (const auto& r : records) failures += r.failed ? 1 : 0;
  if (flags.verbosity > 0) {
    const auto agg = gpcon::aggregate_mean(records);
    std::cout << gpcon::variant_name(config.variant) << ": mean Q2 "
              << agg.q2_value << ", PVA " << agg.pva_value << ", AWoCI "
              << agg.awoci_value << ", N_v " << agg.n_v;
    if (!std::isnan(agg.log10_p_c_given_y))
      std::cout << ", log10 p(C|Y) " << agg.log10_p_c_given_y;
    std::cout << " (" << failures << " failed)\n";
  }
  return failures == static_cast<int>(records.size()) ? 1 : 0;
}

gpcon::OperatorSet parse_constraints(const std::string& path, int n_x) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error(path + ": cannot open");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw std::runtime_error(path + ": " + e.what());
  }
  auto bound_value = [&](const json& j, const char* key, double fallback) {
    if (!j.contains(key)) return fallback;
    const auto& v = j.at(key);
    if (v.is_string()) {
      const std::string s = v.get<std::string>();
      if (s == "inf" || s == "+inf") return gpcon::kInf;
      if (s == "-inf") return -gpcon::kInf;
      throw std::runtime_error(path + ": bad bound literal '" + s + "'");
    }
    return v.get<double>();
  };
  std::vector<gpcon::OperatorEntry> entries;
  for (const auto& c : doc.value("constraints", json::array())) {
    const std::string kind = c.value("kind", "");
    gpcon::SubOperator op = gpcon::SubOperator::identity();
    if (kind == "derivative") {
      const int axis = c.value("axis", 0);  // 1-based in the file
      if (axis < 1 || axis > n_x)
        throw std::runtime_error(path + ": axis must be in 1.." +
                                 std::to_string(n_x));
      op = gpcon::SubOperator::partial(axis - 1);
    } else if (kind != "identity") {
      throw std::runtime_error(path + ": kind must be identity|derivative");
    }
    const double lo = bound_value(c, "lower", -gpcon::kInf);
    const double hi = bound_value(c, "upper", gpcon::kInf);
    entries.push_back({op, gpcon::BoundPair::constants(lo, hi),
                       Eigen::MatrixXd(0, n_x)});
  }
  return gpcon::OperatorSet(std::move(entries), n_x);
}

int cmd_fit(const CommonFlags& flags, const std::string& data_path,
            const std::string& constraints_path,
            const std::string& predict_path, double p_target,
            const std::string& kernel_name, double noise_var, bool noiseless,
            int n_candidates, int k_samples, int max_sites) {
  const gpcon::CsvTable data = gpcon::read_csv(data_path);
  if (data.header.size() < 2)
    throw std::runtime_error(data_path + ": need input columns plus y");
  const int n_x = static_cast<int>(data.header.size()) - 1;
  gpcon::TrainingSet train;
  train.X = data.values.leftCols(n_x);
  train.y = data.values.rightCols(1);
  train.noise_var = noiseless ? 1e-6 : std::max(noise_var, 0.0);

  const gpcon::CsvTable query = gpcon::read_csv(predict_path);
  if (static_cast<int>(query.header.size()) != n_x)
    throw std::runtime_error(predict_path + ": expected " +
                             std::to_string(n_x) + " input columns");
  const Eigen::MatrixXd x_query = query.values;

  gpcon::HyperParams init;
  init.kernel.family = kernel_name == "rbf" ? gpcon::KernelFamily::RBF
                                            : gpcon::KernelFamily::Matern52;
  init.kernel.variance = std::max(
      (train.y.array() - train.y.mean()).square().mean(), 1e-8);
  init.kernel.lengthscales.resize(n_x);
  Eigen::VectorXd lo(n_x), hi(n_x);
  for (int i = 0; i < n_x; ++i) {
    lo[i] = train.X.col(i).minCoeff();
    hi[i] = train.X.col(i).maxCoeff();
    if (!(hi[i] > lo[i])) hi[i] = lo[i] + 1.0;
    init.kernel.lengthscales[i] = 0.3 * (hi[i] - lo[i]);
  }
  init.noise_var = noiseless ? 1e-6 : (noise_var > 0.0 ? noise_var : 0.01);
  gpcon::MleOptions mle;
  mle.estimate_noise = !noiseless && noise_var <= 0.0;
  mle.seed = gpcon::mix_seed(flags.seed, 1);
  const gpcon::HyperParams hyper = gpcon::mle_fit(train, init, mle);

  const gpcon::OperatorSet opset = parse_constraints(constraints_path, n_x);

  Eigen::VectorXd mean, sd, p025, p975;
  gpcon::PlacementTrace trace;
  if (opset.empty()) {
    const gpcon::DataFactor f = gpcon::factor(train, hyper);
    auto [m, cov] = gpcon::predict(train, hyper, f, x_query);
    mean = std::move(m);
    sd = cov.diagonal().cwiseMax(0.0).cwiseSqrt();
    const double z = gpcon::norm_quantile(0.975);
    p025 = mean - z * sd;
    p975 = mean + z * sd;
  } else {
    gpcon::ConstrainedGP cgp =
        gpcon::ConstrainedGP::assemble(train, hyper, opset, 1e-6);
    gpcon::PlacementConfig pc;
    pc.p_target = p_target;
    pc.max_sites = max_sites;
    pc.domain_lo = lo;
    pc.domain_hi = hi;
    gpcon::Rng cand_rng(gpcon::mix_seed(flags.seed, 2));
    pc.candidates.resize(n_candidates, n_x);
    for (int r = 0; r < n_candidates; ++r)
      for (int c = 0; c < n_x; ++c)
        pc.candidates(r, c) = cand_rng.uniform(lo[c], hi[c]);
    pc.base_seed = gpcon::mix_seed(flags.seed, 3);

    auto placed = gpcon::place_per_suboperator(cgp, pc);
    if (!placed.trace.error.empty())
      throw std::runtime_error("placement: " + placed.trace.error);
    cgp = std::move(placed.model);
    trace = std::move(placed.trace);

    cgp.refresh_c_samples(k_samples, gpcon::mix_seed(flags.seed, 4));
    gpcon::Rng sample_rng(gpcon::mix_seed(flags.seed, 5));
    const Eigen::MatrixXd draws =
        cgp.sample_posterior(x_query, k_samples, sample_rng);
    mean = draws.rowwise().mean();
    sd.resize(x_query.rows());
    p025.resize(x_query.rows());
    p975.resize(x_query.rows());
    for (Eigen::Index i = 0; i < x_query.rows(); ++i) {
      const Eigen::VectorXd row = draws.row(i).transpose();
      sd[i] = std::sqrt((row.array() - mean[i]).square().sum() /
                        (row.size() - 1));
      p025[i] = gpcon::empirical_quantile(row, 0.025);
      p975[i] = gpcon::empirical_quantile(row, 0.975);
    }
  }

  auto pred = open_out(flags.out, "predictions.csv");
  std::vector<std::string> header = query.header;
  header.insert(header.end(), {"mean", "sd", "p025", "p975"});
  gpcon::write_csv_row(pred, header);
  for (Eigen::Index i = 0; i < x_query.rows(); ++i) {
    std::vector<std::string> row;
    for (int c = 0; c < n_x; ++c)
      row.push_back(gpcon::format_double(x_query(i, c)));
    row.push_back(gpcon::format_double(mean[i]));
    row.push_back(gpcon::format_double(sd[i]));
    row.push_back(gpcon::format_double(p025[i]));
    row.push_back(gpcon::format_double(p975[i]));
    gpcon::write_csv_row(pred, row);
  }
  auto tr = open_out(flags.out, "trace.csv");
  gpcon::write_trace_csv(tr, trace, flags.timings);

  if (flags.verbosity > 0)
    std::cout << "fit: " << train.size() << " observations, "
              << x_query.rows() << " predictions written to " << flags.out
              << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Gaussian process regression under linear-operator "
               "inequality constraints"};
  app.require_subcommand(1);
  app.set_config("--config");

  CommonFlags ex1_flags, robot_flags, pipe_flags, fit_flags;

  auto* ex1 = app.add_subcommand("example1",
                                 "1-d boundedness + monotonicity illustration");
  bool noisy = false;
  double ex1_p_target = 0.99;
  int ex1_max_sites = 40, ex1_samples = 10000;
  ex1->add_flag("--noisy,!--noiseless", noisy,
                "fit 50 noisy observations instead of 7 exact ones");
  ex1->add_option("--p-target", ex1_p_target, "target constraint probability");
  ex1->add_option("--max-sites", ex1_max_sites, "site cap");
  ex1->add_option("--samples", ex1_samples, "posterior draws");
  add_common(ex1, ex1_flags);

  auto* robot = app.add_subcommand("robot", "4-d arm emulation benchmark");
  int robot_reps = 10, robot_train = 40, robot_max_sites = 80;
  std::string robot_variant = "constrained";
  robot->add_option("--replications", robot_reps, "replications");
  robot->add_option("--variant", robot_variant,
                    "unconstrained|constrained|moment1|moment2|corrfree");
  robot->add_option("--n-train", robot_train, "training points");
  robot->add_option("--max-sites", robot_max_sites, "site cap");
  add_common(robot, robot_flags);

  auto* pipe = app.add_subcommand("pipeline",
                                  "pressure-capacity benchmark");
  int pipe_reps = 5, pipe_nx = 3, pipe_nc = 2, pipe_train = 15;
  int pipe_max_sites = 40;
  std::string pipe_variant = "constrained";
  pipe->add_option("--replications", pipe_reps, "replications");
  pipe->add_option("--variant", pipe_variant,
                   "unconstrained|constrained|moment1|moment2|corrfree");
  pipe->add_option("--nx", pipe_nx, "input dimension (1..5)");
  pipe->add_option("--nc", pipe_nc, "number of derivative constraints");
  pipe->add_option("--n-train", pipe_train, "training points");
  pipe->add_option("--max-sites", pipe_max_sites, "site cap");
  add_common(pipe, pipe_flags);

  auto* fit = app.add_subcommand("fit", "constrained fit on CSV data");
  std::string data_path, constraints_path, predict_path;
  std::string fit_kernel = "matern52";
  double fit_p_target = 0.9, fit_noise = -1.0;
  bool fit_noiseless = false;
  int fit_candidates = 1000, fit_samples = 10000, fit_max_sites = 60;
  fit->add_option("--data", data_path, "training CSV (last column = y)")
      ->required();
  fit->add_option("--constraints", constraints_path,
                  "JSON constraint spec")
      ->required();
  fit->add_option("--predict", predict_path, "query-point CSV")->required();
  fit->add_option("--p-target", fit_p_target, "target constraint probability");
  fit->add_option("--kernel", fit_kernel, "rbf|matern52")
      ->check(CLI::IsMember({"rbf", "matern52"}));
  fit->add_option("--noise-var", fit_noise,
                  "fix the noise variance instead of estimating it");
  fit->add_flag("--noiseless", fit_noiseless,
                "treat observations as exact (nugget only)");
  fit->add_option("--candidates", fit_candidates, "search-set size");
  fit->add_option("--samples", fit_samples, "posterior draws");
  fit->add_option("--max-sites", fit_max_sites, "site cap");
  add_common(fit, fit_flags);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (ex1->parsed())
      return cmd_example1(ex1_flags, noisy, ex1_p_target, ex1_max_sites,
                          ex1_samples);
    if (robot->parsed()) {
      auto config = gpcon::robot_config(
          robot_reps, gpcon::parse_variant(robot_variant), robot_flags.seed,
          robot_train);
      config.n_v_max = robot_max_sites;
      return run_table_experiment(config, robot_flags);
    }
    if (pipe->parsed()) {
      auto config = gpcon::pipeline_config(
          pipe_nx, pipe_nc, pipe_train, pipe_reps,
          gpcon::parse_variant(pipe_variant), pipe_flags.seed);
      config.n_v_max = pipe_max_sites;
      return run_table_experiment(config, pipe_flags);
    }
    if (fit->parsed())
      return cmd_fit(fit_flags, data_path, constraints_path, predict_path,
                     fit_p_target, fit_kernel, fit_noise, fit_noiseless,
                     fit_candidates, fit_samples, fit_max_sites);
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

#include "ntk/experiments.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include "ntk/data_io.hpp"
#include "ntk/function_space.hpp"

namespace ntk {

namespace {

constexpr const char* kVersion = "0.1.0";

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

double to_double(const std::string& key, const std::string& s) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ConfigError(key, "expected a number, got '" + s + "'");
  }
}

long long to_int(const std::string& key, const std::string& s) {
  try {
    std::size_t used = 0;
    const long long v = std::stoll(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ConfigError(key, "expected an integer, got '" + s + "'");
  }
}

template <class T>
std::string join(const std::vector<T>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += ",";
    if constexpr (std::is_floating_point_v<T>) {
      s += format_double(v[i]);
    } else {
      s += std::to_string(v[i]);
    }
  }
  return s;
}

std::vector<Eigen::Index> positive_widths(const Config& c, const std::string& key,
                                          const std::vector<long long>& fallback) {
  std::vector<Eigen::Index> out;
  for (long long w : c.get_ints(key, fallback)) {
    if (w < 1) throw ConfigError(key, "widths must be positive");
    out.push_back(static_cast<Eigen::Index>(w));
  }
  if (out.empty()) throw ConfigError(key, "at least one width is required");
  return out;
}

void require(bool ok, const std::string& key, const std::string& what) {
  if (!ok) throw ConfigError(key, what);
}

Nonlinearity nonlinearity_of(const Config& c) {
  const auto name = c.get_string("nonlinearity", "relu");
  try {
    return Nonlinearity::parse(name);
  } catch (const ArgumentError& e) {
    throw ConfigError("nonlinearity", e.what());
  }
}

std::vector<double> gamma_grid(long long count) {
  std::vector<double> g;
  for (long long k = 0; k < count; ++k) g.push_back(-std::numbers::pi + 2 * std::numbers::pi * k / count);
  return g;
}

Architecture make_arch(Eigen::Index n0, Eigen::Index width, int depth, double beta, const Nonlinearity& nl) {
  std::vector<Eigen::Index> widths{n0};
  for (int l = 1; l < depth; ++l) widths.push_back(width);
  widths.push_back(1);
  return Architecture{widths, beta, nl};
}

struct Manifest {
  std::string command;
  const Config* config;
  const RunContext* ctx;
  Json datasets = Json::array();
  Json outputs = Json::array();

  void output(const std::filesystem::path& p) { outputs.push_back(p.filename().string()); }

  void write(const Json& summary) const {
    Json doc = {{"command", command},
                {"config", config->resolved()},
                {"seed", ctx->seed},
                {"full", ctx->full},
                {"datasets", datasets},
                {"outputs", outputs},
                {"summary", summary},
                {"versions",
                 {{"ntk", kVersion},
                  {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                                std::to_string(EIGEN_MINOR_VERSION)},
                  {"compiler", __VERSION__}}}};
    write_json(ctx->out_dir / "manifest.json", doc);
  }
};

// Empirical NTK between x0 = (1, 0) and the grid points (cos g, sin g).
template <class T>
Vector ntk_curve(const BasicNetworkParams<T>& params, const EmpiricalMeasure& curve_points) {
  const Matrix g = empirical_ntk(params, curve_points).entries.matrix();
  return g.row(0).tail(g.cols() - 1).transpose();
}

template <class T>
Json run_ntk_convergence(const Config& c, const RunContext& ctx, Manifest& man) {
  const int depth = static_cast<int>(c.get_int("depth", 4));
  const double beta = c.get_double("beta", 0.1);
  const auto nl = nonlinearity_of(c);
  const auto widths = positive_widths(c, "widths", ctx.full ? std::vector<long long>{500, 10000}
                                                            : std::vector<long long>{500, 4000});
  const long long seeds = c.get_int("seeds", 10);
  const long long steps = c.get_int("steps", 200);
  const double lr = c.get_double("lr", 1.0);
  const long long train_size = c.get_int("train_size", 16);
  const long long grid = c.get_int("grid", 128);
  c.check_consumed();
  require(depth >= 1, "depth", "must be at least 1");
  require(seeds >= 1, "seeds", "must be at least 1");
  require(steps >= 0, "steps", "must be non-negative");
  require(lr > 0, "lr", "must be positive");
  require(train_size >= 1, "train_size", "must be positive");
  require(grid >= 2, "grid", "must be at least 2");

  auto train_set = gaussian_dataset(static_cast<int>(train_size), 2, RngStream(ctx.seed, 0));
  Matrix target(train_size, 1);
  for (Eigen::Index i = 0; i < train_size; ++i) target(i, 0) = train_set.points(i, 0) * train_set.points(i, 1);
  man.datasets.push_back(train_set.manifest());
  const auto train_measure = train_set.measure();

  const auto gammas = gamma_grid(grid);
  std::vector<double> all_angles{0.0};
  all_angles.insert(all_angles.end(), gammas.begin(), gammas.end());
  const EmpiricalMeasure curve_points(circle_points(all_angles));
  const EmpiricalMeasure anchor(circle_points({0.0}));
  const auto limit_stack = ntk_stack(anchor, depth, beta, nl);
  const Vector limit = cross_kernel(limit_stack, anchor, circle_points(gammas)).theta[depth - 1].col(0);

  const auto curves_path = ctx.out_dir / "ntk_curves.csv";
  const auto drift_path = ctx.out_dir / "ntk_drift.csv";
  CsvWriter curves(curves_path, {"width", "seed", "t", "gamma", "value", "limit_value"});
  CsvWriter drift_csv(drift_path, {"width", "seed", "drift", "loss_start", "loss_end"});
  man.output(curves_path);
  man.output(drift_path);
  for (std::size_t k = 0; k < gammas.size(); ++k) {
    curves.row({std::string("inf"), std::string(""), 0.0, gammas[k], limit(k), limit(k)});
  }

  Json per_width = Json::array();
  std::vector<Vector> variance_at_init;
  for (auto width : widths) {
    const auto arch = make_arch(2, width, depth, beta, nl);
    std::vector<Vector> c0, c1;
    std::vector<double> drifts;
    for (long long s = 0; s < seeds; ++s) {
      auto params = init_params<T>(arch, RngStream(ctx.seed, 1 + static_cast<std::uint64_t>(s)));
      const auto initial = params;
      c0.push_back(ntk_curve(params, curve_points));
      auto traj = train(params, train_measure, TrainingDirection::least_squares(target),
                        {.step_size = lr, .steps = static_cast<int>(steps), .record_every = static_cast<int>(std::max(1LL, steps)),
                         .record_outputs = false});
      c1.push_back(ntk_curve(params, curve_points));
      drifts.push_back(ntk_drift(initial, params, train_measure));
      drift_csv.row({(long long)width, s, drifts.back(), traj.snapshots.front().loss, traj.snapshots.back().loss});
      for (std::size_t k = 0; k < gammas.size(); ++k) {
        curves.row({(long long)width, s, 0.0, gammas[k], c0.back()(k), limit(k)});
        curves.row({(long long)width, s, steps * lr, gammas[k], c1.back()(k), limit(k)});
      }
    }
    Vector mean0 = Vector::Zero(grid), mean1 = Vector::Zero(grid), var0 = Vector::Zero(grid);
    for (long long s = 0; s < seeds; ++s) {
      mean0 += c0[s] / double(seeds);
      mean1 += c1[s] / double(seeds);
    }
    for (long long s = 0; s < seeds; ++s) var0 += (c0[s] - mean0).cwiseAbs2() / double(std::max(1LL, seeds - 1));
    variance_at_init.push_back(var0);
    per_width.push_back({{"width", width},
                         {"median_drift", median(drifts)},
                         {"drifts", drifts},
                         {"init_mean_sup_rel_error",
                          (mean0 - limit).cwiseAbs().maxCoeff() / limit.cwiseAbs().maxCoeff()},
                         {"mean_inflation", (mean1 - mean0).mean()},
                         {"inflated_fraction", ((mean1 - mean0).array() > 0).cast<double>().mean()},
                         {"mean_init_variance", var0.mean()}});
  }
  Json summary = {{"widths", per_width}};
  if (widths.size() >= 2) {
    const auto& narrow = variance_at_init.front();
    const auto& wide = variance_at_init.back();
    summary["variance_lower_fraction"] = (wide.array() < narrow.array()).cast<double>().mean();
  }
  return summary;
}

template <class T>
Json run_pca_convergence(const Config& c, const RunContext& ctx, Manifest& man);

}  // namespace

double median(std::vector<double> v) {
  if (v.empty()) throw ArgumentError("median of an empty list");
  std::sort(v.begin(), v.end());
  const auto n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

Config Config::parse(const std::string& text, const std::string& origin) {
  Config c;
  std::stringstream ss(text);
  std::string line;
  int lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(line, origin + ":" + std::to_string(lineno) + ": expected 'key = value'");
    }
    const auto key = trim(line.substr(0, eq));
    if (key.empty()) throw ConfigError("", origin + ":" + std::to_string(lineno) + ": empty key");
    if (c.values_.count(key)) throw ConfigError(key, origin + ":" + std::to_string(lineno) + ": duplicate key");
    c.values_[key] = trim(line.substr(eq + 1));
  }
  return c;
}

Config Config::from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ArgumentError("cannot read config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), path.string());
}

void Config::set(const std::string& key, const std::string& value) { values_[key] = value; }

const std::string* Config::raw(const std::string& key) const {
  used_.insert(key);
  auto it = values_.find(key);
  return it == values_.end() ? nullptr : &it->second;
}

std::string Config::get_string(const std::string& key, const std::string& fallback) const {
  const auto* r = raw(key);
  return resolved_[key] = r ? *r : fallback;
}

double Config::get_double(const std::string& key, double fallback) const {
  const auto* r = raw(key);
  const double v = r ? to_double(key, *r) : fallback;
  resolved_[key] = format_double(v);
  return v;
}

long long Config::get_int(const std::string& key, long long fallback) const {
  const auto* r = raw(key);
  const long long v = r ? to_int(key, *r) : fallback;
  resolved_[key] = std::to_string(v);
  return v;
}

bool Config::get_bool(const std::string& key, bool fallback) const {
  const auto* r = raw(key);
  bool v = fallback;
  if (r) {
    if (*r == "true" || *r == "1" || *r == "yes") {
      v = true;
    } else if (*r == "false" || *r == "0" || *r == "no") {
      v = false;
    } else {
      throw ConfigError(key, "expected true/false, got '" + *r + "'");
    }
  }
  resolved_[key] = v ? "true" : "false";
  return v;
}

std::vector<double> Config::get_doubles(const std::string& key, const std::vector<double>& fallback) const {
  const auto* r = raw(key);
  std::vector<double> v = fallback;
  if (r) {
    v.clear();
    for (const auto& item : split_list(*r)) v.push_back(to_double(key, item));
  }
  resolved_[key] = join(v);
  return v;
}

std::vector<long long> Config::get_ints(const std::string& key, const std::vector<long long>& fallback) const {
  const auto* r = raw(key);
  std::vector<long long> v = fallback;
  if (r) {
    v.clear();
    for (const auto& item : split_list(*r)) v.push_back(to_int(key, item));
  }
  resolved_[key] = join(v);
  return v;
}

void Config::check_consumed() const {
  for (const auto& [key, value] : values_) {
    if (!used_.count(key)) throw ConfigError(key, "unknown key for this command");
  }
}

Json Config::resolved() const {
  Json j = Json::object();
  for (const auto& [k, v] : resolved_) j[k] = v;
  return j;
}

Json cmd_ntk_convergence(const Config& config, const RunContext& ctx) {
  Manifest man{"ntk_convergence", &config, &ctx};
  const auto dtype = config.get_string("dtype", "f32");
  Json summary;
  if (dtype == "f32") {
    summary = run_ntk_convergence<float>(config, ctx, man);
  } else if (dtype == "f64") {
    summary = run_ntk_convergence<double>(config, ctx, man);
  } else {
    throw ConfigError("dtype", "expected f32 or f64, got '" + dtype + "'");
  }
  man.write(summary);
  return summary;
}

Json cmd_kernel_regression(const Config& c, const RunContext& ctx) {
  Manifest man{"kernel_regression", &c, &ctx};
  const int depth = static_cast<int>(c.get_int("depth", 4));
  const double beta = c.get_double("beta", 0.1);
  const auto nl = nonlinearity_of(c);
  const auto widths = positive_widths(c, "widths", {50, 1000});
  const long long seeds = c.get_int("seeds", 10);
  const long long steps = c.get_int("steps", 1000);
  const double lr = c.get_double("lr", 1.0);
  const long long grid = c.get_int("grid", 128);
  const double offset = c.get_double("train_offset", 0.0);
  const auto targets = c.get_doubles("targets", {0.5, -0.3, 0.2, -0.4});
  const auto dtype = c.get_string("dtype", "f64");
  c.check_consumed();
  require(depth >= 1, "depth", "must be at least 1");
  require(seeds >= 1, "seeds", "must be at least 1");
  require(steps >= 0, "steps", "must be non-negative");
  require(lr > 0, "lr", "must be positive");
  require(grid >= 2, "grid", "must be at least 2");
  require(targets.size() >= 1, "targets", "at least one target is required");
  require(dtype == "f64" || dtype == "f32", "dtype", "expected f32 or f64");

  const int n = static_cast<int>(targets.size());
  auto train_set = circle_dataset(n, offset);
  const Matrix fstar = Eigen::Map<const Vector>(targets.data(), n);
  train_set.targets = fstar;
  man.datasets.push_back(train_set.manifest());
  const auto measure = train_set.measure();

  const auto gammas = gamma_grid(grid);
  const Matrix queries = circle_points(gammas);
  const auto stack = ntk_stack(measure, depth, beta, nl);
  const auto reg = regression_limit(stack.theta_gram(), stack.sigma_gram(depth), FunctionOnData(fstar));
  const auto pred = reg.predict(stack, measure, queries);
  const Vector sd = pred.variance.cwiseMax(0.0).cwiseSqrt();

  const auto limit_path = ctx.out_dir / "regression_limit.csv";
  CsvWriter lim(limit_path, {"gamma", "mean", "std", "p10", "p50", "p90"});
  man.output(limit_path);
  for (Eigen::Index k = 0; k < grid; ++k) {
    const double m = pred.mean(k, 0);
    lim.row({gammas[k], m, sd(k), m - kZ90 * sd(k), m, m + kZ90 * sd(k)});
  }

  const auto nets_path = ctx.out_dir / "regression_nets.csv";
  CsvWriter nets(nets_path, {"width", "seed", "gamma", "value"});
  man.output(nets_path);
  Json per_width = Json::array();
  for (auto width : widths) {
    const auto arch = make_arch(2, width, depth, beta, nl);
    long long inside = 0, total = 0;
    double max_train_error = 0.0;
    for (long long s = 0; s < seeds; ++s) {
      const RngStream stream(ctx.seed, 1 + static_cast<std::uint64_t>(s));
      auto run = [&](auto params) {
        train(params, measure, TrainingDirection::least_squares(fstar),
              {.step_size = lr, .steps = static_cast<int>(steps), .record_every = static_cast<int>(std::max(1LL, steps)),
               .record_outputs = false});
        max_train_error = std::max(max_train_error, (forward(params, measure.points()).output() - fstar).cwiseAbs().maxCoeff());
        return forward(params, queries).output();
      };
      const Matrix curve = dtype == "f64" ? run(init_params<double>(arch, stream)) : run(init_params<float>(arch, stream));
      for (Eigen::Index k = 0; k < grid; ++k) {
        nets.row({(long long)width, s, gammas[k], curve(k, 0)});
        const double lo = pred.mean(k, 0) - kZ90 * sd(k), hi = pred.mean(k, 0) + kZ90 * sd(k);
        inside += curve(k, 0) >= lo && curve(k, 0) <= hi;
        ++total;
      }
    }
    per_width.push_back({{"width", width},
                         {"max_train_error", max_train_error},
                         {"band_fraction", static_cast<double>(inside) / static_cast<double>(total)}});
  }
  Json summary = {{"widths", per_width}, {"limit_jitter", reg.jitter()}};
  man.write(summary);
  return summary;
}

namespace {

template <class T>
Json run_pca_convergence(const Config& c, const RunContext& ctx, Manifest& man) {
  const int depth = static_cast<int>(c.get_int("depth", 4));
  const double beta = c.get_double("beta", 0.1);
  const auto nl = nonlinearity_of(c);
  const auto widths = positive_widths(c, "widths", ctx.full ? std::vector<long long>{100, 1000, 10000}
                                                            : std::vector<long long>{100, 1000});
  const long long seeds = c.get_int("seeds", 2);
  const long long steps = c.get_int("steps", 1000);
  const double lr = c.get_double("lr", 1.0);
  const long long batch = c.get_int("batch", 512);
  const long long every = c.get_int("record_every", 10);
  const auto images = c.get_string("images", "data/mnist-5k/images-idx3-ubyte");
  const auto labels = c.get_string("labels", "data/mnist-5k/labels-idx1-ubyte");
  const auto fallback = c.get_string("fallback", "none");
  c.check_consumed();
  require(depth >= 1, "depth", "must be at least 1");
  require(seeds >= 1, "seeds", "must be at least 1");
  require(steps >= 0, "steps", "must be non-negative");
  require(lr > 0, "lr", "must be positive");
  require(batch >= 3, "batch", "must be at least 3");
  require(every >= 1, "record_every", "must be positive");
  require(fallback == "none" || fallback == "gaussian", "fallback", "expected none or gaussian");

  LabeledDataset data;
  if (std::filesystem::exists(images) && std::filesystem::exists(labels)) {
    auto full = load_idx(images, labels);
    require(full.size() >= batch, "batch", "larger than the dataset");
    data = sample_rows(full, batch, RngStream(ctx.seed, 0));
  } else if (fallback == "gaussian") {
    data = gaussian_dataset(static_cast<int>(batch), 784, RngStream(ctx.seed, 0));
  } else {
    throw ConfigError("images", "MNIST files not found (" + images + ", " + labels + ") and fallback = none");
  }
  man.datasets.push_back(data.manifest());
  const auto measure = data.measure();
  const auto stack = ntk_stack(measure, depth, beta, nl);
  const PiOperator op(stack.theta_gram());
  const auto pca = kernel_pca(op, 3);
  const double l2 = pca.eigenvalues(1);

  const auto pca_path = ctx.out_dir / "pca_eigenvalues.csv";
  CsvWriter eig(pca_path, {"index", "eigenvalue"});
  for (int i = 0; i < 3; ++i) eig.row({(long long)i + 1, pca.eigenvalues(i)});
  const auto comp_path = ctx.out_dir / "pca_components.csv";
  CsvWriter comp(comp_path, {"point", "label", "f1", "f2", "f3"});
  for (Eigen::Index i = 0; i < measure.size(); ++i) {
    const long long label = data.labels.empty() ? -1 : data.labels[i];
    comp.row({(long long)i, label, pca.components[0].values()(i, 0), pca.components[1].values()(i, 0),
              pca.components[2].values()(i, 0)});
  }
  man.output(pca_path);
  man.output(comp_path);

  const auto traj_path = ctx.out_dir / "pca_trajectories.csv";
  CsvWriter traj_csv(traj_path, {"width", "seed", "step", "t", "g_norm", "h_norm", "analytic_g"});
  man.output(traj_path);

  // Limit dynamics from f0 = 0.
  const FunctionOnData zero(Matrix::Zero(measure.size(), 1));
  const auto exact_target = zero + 0.5 * pca.components[1];
  std::vector<double> times;
  for (long long s = 0; s <= steps; s += every) times.push_back(s * lr);
  const auto exact = kernel_gd_exact(op, zero, exact_target, times);
  double exact_g_error = 0.0, exact_h_max = 0.0;
  for (std::size_t k = 0; k < times.size(); ++k) {
    const auto d = decompose_along(exact[k] - exact_target, pca.components[1]);
    const double analytic = 0.5 * std::exp(-l2 * times[k]);
    exact_g_error = std::max(exact_g_error, std::abs(d.g.norm() - analytic) / analytic);
    exact_h_max = std::max(exact_h_max, d.h.norm());
    traj_csv.row({std::string("inf"), std::string(""), (long long)(k * every), times[k], d.g.norm(), d.h.norm(), analytic});
  }

  Json per_width = Json::array();
  for (auto width : widths) {
    const auto arch = make_arch(measure.input_dim(), width, depth, beta, nl);
    std::vector<double> max_h;
    for (long long s = 0; s < seeds; ++s) {
      auto params = init_params<T>(arch, RngStream(ctx.seed, 1 + static_cast<std::uint64_t>(s)));
      const FunctionOnData f0(forward(params, measure.points()).output());
      const auto fstar = f0 + 0.5 * pca.components[1];
      double worst = 0.0;
      auto record = [&](const TrainSnapshot& snap) {
        const auto d = decompose_along(FunctionOnData(snap.outputs) - fstar, pca.components[1]);
        worst = std::max(worst, d.h.norm());
        traj_csv.row({(long long)width, s, (long long)snap.step, snap.t, d.g.norm(), d.h.norm(),
                      0.5 * std::exp(-l2 * snap.t)});
      };
      train(params, measure, TrainingDirection::least_squares(fstar.values()),
            {.step_size = lr, .steps = static_cast<int>(steps), .record_every = static_cast<int>(every)}, {record});
      max_h.push_back(worst);
    }
    per_width.push_back({{"width", width}, {"max_h", max_h}, {"median_max_h", median(max_h)}});
  }
  return {{"eigenvalues", {pca.eigenvalues(0), pca.eigenvalues(1), pca.eigenvalues(2)}},
          {"ratio_12", pca.eigenvalues(0) / pca.eigenvalues(1)},
          {"ratio_23", pca.eigenvalues(1) / pca.eigenvalues(2)},
          {"exact_g_max_rel_error", exact_g_error},
          {"exact_h_max", exact_h_max},
          {"widths", per_width}};
}

}  // namespace

Json cmd_pca_convergence(const Config& config, const RunContext& ctx) {
  Manifest man{"pca_convergence", &config, &ctx};
  const auto dtype = config.get_string("dtype", "f32");
  Json summary;
  if (dtype == "f32") {
    summary = run_pca_convergence<float>(config, ctx, man);
  } else if (dtype == "f64") {
    summary = run_pca_convergence<double>(config, ctx, man);
  } else {
    throw ConfigError("dtype", "expected f32 or f64, got '" + dtype + "'");
  }
  man.write(summary);
  return summary;
}

Json cmd_pd_certificate(const Config& c, const RunContext& ctx) {
  Manifest man{"pd_certificate", &c, &ctx};
  const auto nl = nonlinearity_of(c);
  const long long n0 = c.get_int("n0", 3);
  const double beta = c.get_double("beta", 0.1);
  const long long order = c.get_int("order", 40);
  const double threshold = c.get_double("threshold", 1e-12);
  const long long points = c.get_int("points", 32);
  c.check_consumed();
  require(n0 >= 2, "n0", "must be at least 2");
  require(points >= 1, "points", "must be positive");

  const auto cert = pd_certificate(nl, static_cast<int>(n0), beta, static_cast<int>(order), threshold);
  const auto sphere = sphere_dataset(static_cast<int>(points), static_cast<int>(n0), RngStream(ctx.seed, 0));
  man.datasets.push_back(sphere.manifest());
  const auto stack = ntk_stack(sphere.measure(), 2, beta, nl);
  const auto gram = stack.theta_gram();
  const double min_eig = min_eigenvalue(gram);
  const double trace = gram.entries.trace();

  std::vector<double> series(cert.series.data(), cert.series.data() + cert.series.size());
  Json report = {{"verdict", to_string(cert.verdict)},
                 {"even_nonzero_count", cert.even_nonzero_count},
                 {"odd_nonzero_count", cert.odd_nonzero_count},
                 {"threshold", cert.threshold},
                 {"series", series},
                 {"gram_min_eig", min_eig},
                 {"gram_trace", trace},
                 {"gram_min_eig_relative", min_eig / (trace / static_cast<double>(points))}};
  const auto path = ctx.out_dir / "pd_certificate.json";
  write_json(path, report);
  man.output(path);
  man.write(report);
  return report;
}

}  // namespace ntk

#include "ntk/finite_net.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace ntk {

namespace {

template <class M>
void activate(const Nonlinearity& nl, const M& pre, M& out) {
  using T = typename M::Scalar;
  if (nl.kind() == NonlinearityKind::relu) {
    out = pre.cwiseMax(T(0));
  } else {
    out = pre.unaryExpr([&](T x) { return static_cast<T>(nl.apply(static_cast<double>(x))); });
  }
}

template <class M>
M activate_dot(const Nonlinearity& nl, const M& pre) {
  using T = typename M::Scalar;
  if (nl.kind() == NonlinearityKind::relu) {
    return pre.unaryExpr([](T x) { return x > T(0) ? T(1) : T(0); });
  }
  return pre.unaryExpr([&](T x) { return static_cast<T>(nl.apply_dot(static_cast<double>(x))); });
}

template <class T>
void check_trace(const BasicNetworkParams<T>& params, const BasicForwardTrace<T>& trace) {
  const int depth = params.arch.depth();
  if (static_cast<int>(trace.act.size()) != depth || static_cast<int>(trace.preact.size()) != depth + 1) {
    throw ArgumentError("forward trace depth does not match the network");
  }
  for (int l = 0; l < depth; ++l) {
    if (trace.act[l].rows() != params.arch.widths[l] ||
        trace.preact[l + 1].rows() != params.arch.widths[l + 1]) {
      throw ArgumentError("forward trace layer " + std::to_string(l) + " does not match the network");
    }
  }
}

}  // namespace

Eigen::Index Architecture::parameter_count() const {
  Eigen::Index p = 0;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) p += (widths[l] + 1) * widths[l + 1];
  return p;
}

void Architecture::validate() const {
  if (widths.size() < 2) throw ArgumentError("architecture needs at least an input and an output width");
  for (std::size_t l = 0; l < widths.size(); ++l) {
    if (widths[l] < 1) {
      throw ArgumentError("width n_" + std::to_string(l) + " must be positive, got " +
                          std::to_string(widths[l]));
    }
  }
  if (!(beta >= 0.0) || !std::isfinite(beta)) throw ArgumentError("beta must be finite and non-negative");
}

template <class T>
Eigen::Index BasicNetworkParams<T>::size() const {
  Eigen::Index p = 0;
  for (std::size_t l = 0; l < weights.size(); ++l) p += weights[l].size() + biases[l].size();
  return p;
}

template <class T>
Vector BasicNetworkParams<T>::flatten() const {
  Vector out(size());
  Eigen::Index at = 0;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    out.segment(at, weights[l].size()) = weights[l].reshaped().template cast<double>();
    at += weights[l].size();
    out.segment(at, biases[l].size()) = biases[l].template cast<double>();
    at += biases[l].size();
  }
  return out;
}

template <class T>
void BasicNetworkParams<T>::assign(const Vector& flat) {
  if (flat.size() != size()) {
    throw ArgumentError("parameter vector has length " + std::to_string(flat.size()) + ", expected " +
                        std::to_string(size()));
  }
  Eigen::Index at = 0;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    weights[l].reshaped() = flat.segment(at, weights[l].size()).template cast<T>();
    at += weights[l].size();
    biases[l] = flat.segment(at, biases[l].size()).template cast<T>();
    at += biases[l].size();
  }
}

template <class T>
double BasicNetworkParams<T>::norm() const {
  double s = 0.0;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    s += weights[l].template cast<double>().squaredNorm() + biases[l].template cast<double>().squaredNorm();
  }
  return std::sqrt(s);
}

template <class T>
void BasicNetworkParams<T>::check_shapes() const {
  arch.validate();
  const int depth = arch.depth();
  if (static_cast<int>(weights.size()) != depth || static_cast<int>(biases.size()) != depth) {
    throw ArgumentError("parameter count per layer does not match depth " + std::to_string(depth));
  }
  for (int l = 0; l < depth; ++l) {
    if (weights[l].rows() != arch.widths[l + 1] || weights[l].cols() != arch.widths[l] ||
        biases[l].size() != arch.widths[l + 1]) {
      throw ArgumentError("layer " + std::to_string(l) + " parameters have the wrong shape");
    }
  }
}

template <class T>
BasicNetworkParams<T> init_params(const Architecture& arch, const RngStream& rng) {
  arch.validate();
  BasicNetworkParams<T> p;
  p.arch = arch;
  for (int l = 0; l < arch.depth(); ++l) {
    typename BasicNetworkParams<T>::Mat w(arch.widths[l + 1], arch.widths[l]);
    typename BasicNetworkParams<T>::Vec b(arch.widths[l + 1]);
    auto ws = rng.substream(2 * static_cast<std::uint64_t>(l));
    auto bs = rng.substream(2 * static_cast<std::uint64_t>(l) + 1);
    ws.fill_normal(std::span<T>(w.data(), static_cast<std::size_t>(w.size())));
    bs.fill_normal(std::span<T>(b.data(), static_cast<std::size_t>(b.size())));
    p.weights.push_back(std::move(w));
    p.biases.push_back(std::move(b));
  }
  return p;
}

template <class T>
BasicForwardTrace<T> forward(const BasicNetworkParams<T>& params, const Matrix& batch) {
  const auto& arch = params.arch;
  if (batch.cols() != arch.input_dim()) {
    throw ArgumentError("batch has " + std::to_string(batch.cols()) + " columns, network expects n0 = " +
                        std::to_string(arch.input_dim()));
  }
  const int depth = arch.depth();
  BasicForwardTrace<T> tr;
  tr.preact.resize(depth + 1);
  tr.act.resize(depth);
  tr.act[0] = batch.transpose().template cast<T>();
  const T beta = static_cast<T>(arch.beta);
  for (int l = 0; l < depth; ++l) {
    const T scale = static_cast<T>(1.0 / std::sqrt(static_cast<double>(arch.widths[l])));
    auto& pre = tr.preact[l + 1];
    pre.noalias() = scale * (params.weights[l] * tr.act[l]);
    pre.colwise() += beta * params.biases[l];
    if (l + 1 < depth) activate(arch.nl, pre, tr.act[l + 1]);
  }
  return tr;
}

template <class T>
BasicSensitivityTrace<T> sensitivities(const BasicNetworkParams<T>& params,
                                       const BasicForwardTrace<T>& trace, const Matrix& cotangent) {
  check_trace(params, trace);
  const auto& arch = params.arch;
  const int depth = arch.depth();
  if (cotangent.rows() != trace.samples() || cotangent.cols() != arch.output_dim()) {
    throw ArgumentError("cotangent must be " + std::to_string(trace.samples()) + " x " +
                        std::to_string(arch.output_dim()));
  }
  BasicSensitivityTrace<T> s;
  s.d.resize(depth + 1);
  s.d[depth] = cotangent.transpose().template cast<T>();
  for (int l = depth - 1; l >= 1; --l) {
    const T scale = static_cast<T>(1.0 / std::sqrt(static_cast<double>(arch.widths[l])));
    s.d[l].noalias() = scale * (params.weights[l].transpose() * s.d[l + 1]);
    s.d[l].array() *= activate_dot(arch.nl, trace.preact[l]).array();
  }
  return s;
}

template <class T>
BasicGradient<T> gradient(const BasicNetworkParams<T>& params, const BasicForwardTrace<T>& trace,
                          const BasicSensitivityTrace<T>& sens) {
  check_trace(params, trace);
  const auto& arch = params.arch;
  const double m = static_cast<double>(trace.samples());
  BasicGradient<T> g;
  for (int l = 0; l < arch.depth(); ++l) {
    const T ws = static_cast<T>(1.0 / (std::sqrt(static_cast<double>(arch.widths[l])) * m));
    g.weights.emplace_back(ws * (sens.d[l + 1] * trace.act[l].transpose()));
    g.biases.emplace_back(static_cast<T>(arch.beta / m) * sens.d[l + 1].rowwise().sum());
  }
  return g;
}

template <class T>
BackwardResult<T> backward(const BasicNetworkParams<T>& params, const BasicForwardTrace<T>& trace,
                           const Matrix& cotangent) {
  BackwardResult<T> r;
  r.sensitivities = sensitivities(params, trace, cotangent);
  r.gradient = gradient(params, trace, r.sensitivities);
  return r;
}

template <class T>
KernelGram empirical_ntk(const BasicNetworkParams<T>& params, const EmpiricalMeasure& measure) {
  params.check_shapes();
  const auto& arch = params.arch;
  const int depth = arch.depth();
  const Eigen::Index n = measure.size(), k_out = arch.output_dim();
  const auto trace = forward(params, measure.points());

  // sens[k].d[l]: directions seeded with e_k at every sample.
  std::vector<std::vector<Matrix>> dirs(k_out);
  for (Eigen::Index k = 0; k < k_out; ++k) {
    Matrix seed = Matrix::Zero(n, k_out);
    seed.col(k).setOnes();
    auto s = sensitivities(params, trace, seed);
    dirs[k].resize(depth + 1);
    for (int l = 1; l <= depth; ++l) dirs[k][l] = s.d[l].template cast<double>();
  }

  Matrix theta = Matrix::Zero(n * k_out, n * k_out);
  const double beta2 = arch.beta * arch.beta;
  for (int l = 0; l < depth; ++l) {
    const Matrix a = trace.act[l].template cast<double>();
    Matrix act_gram = (a.transpose() * a) / static_cast<double>(arch.widths[l]);
    act_gram.array() += beta2;
    for (Eigen::Index k = 0; k < k_out; ++k) {
      for (Eigen::Index kp = 0; kp < k_out; ++kp) {
        const Matrix dd = dirs[k][l + 1].transpose() * dirs[kp][l + 1];
        for (Eigen::Index i = 0; i < n; ++i)
          for (Eigen::Index j = 0; j < n; ++j) theta(i * k_out + k, j * k_out + kp) += act_gram(i, j) * dd(i, j);
      }
    }
  }

  KernelGram g;
  g.entries = SymMatrix(theta);
  g.n_out = k_out;
  g.scalar_block = k_out == 1;
  g.kind = GramKind::theta_empirical;
  g.level = depth;
  g.widths = arch.widths;
  return g;
}

template <class T>
double ntk_drift(const BasicNetworkParams<T>& earlier, const BasicNetworkParams<T>& later,
                 const EmpiricalMeasure& measure) {
  if (earlier.arch.widths != later.arch.widths) throw ArgumentError("ntk_drift: architectures differ");
  return relative_frobenius(empirical_ntk(later, measure).entries.matrix(),
                            empirical_ntk(earlier, measure).entries.matrix());
}

TrainingDirection TrainingDirection::least_squares(Matrix target) {
  TrainingDirection d;
  d.kind_ = Kind::least_squares;
  d.target_ = std::move(target);
  return d;
}

TrainingDirection TrainingDirection::custom(Provider provider) {
  if (!provider) throw ArgumentError("custom training direction needs a provider");
  TrainingDirection d;
  d.kind_ = Kind::custom;
  d.provider_ = std::move(provider);
  return d;
}

Matrix TrainingDirection::operator()(double t, const Matrix& outputs) const {
  if (kind_ == Kind::least_squares) {
    if (target_.rows() != outputs.rows() || target_.cols() != outputs.cols()) {
      throw ArgumentError("least-squares target is " + std::to_string(target_.rows()) + " x " +
                          std::to_string(target_.cols()) + ", outputs are " +
                          std::to_string(outputs.rows()) + " x " + std::to_string(outputs.cols()));
    }
    return target_ - outputs;
  }
  Matrix d = provider_(t, outputs);
  if (d.rows() != outputs.rows() || d.cols() != outputs.cols()) {
    throw ArgumentError("training direction returned a matrix of the wrong shape");
  }
  return d;
}

template <class T>
Trajectory train(BasicNetworkParams<T>& params, const EmpiricalMeasure& measure,
                 const TrainingDirection& direction, const TrainOptions& options,
                 const std::vector<Recorder>& recorders) {
  params.check_shapes();
  if (!(options.step_size > 0.0)) throw ArgumentError("step_size must be positive");
  if (options.steps < 0) throw ArgumentError("steps must be non-negative");
  if (options.record_every < 1) throw ArgumentError("record_every must be at least 1");
  const auto& arch = params.arch;
  const double m = static_cast<double>(measure.size());
  const double lr = options.step_size;

  if (direction.kind() == TrainingDirection::Kind::least_squares &&
      (direction.target().rows() != measure.size() || direction.target().cols() != arch.output_dim())) {
    throw ArgumentError("least-squares target must be " + std::to_string(measure.size()) + " x " +
                        std::to_string(arch.output_dim()));
  }

  Trajectory traj;
  for (int step = 0;; ++step) {
    const double t = step * lr;
    auto trace = forward(params, measure.points());
    const Matrix out = trace.output();
    if (!out.allFinite()) throw DivergenceError(step);

    if (step % options.record_every == 0 || step == options.steps) {
      TrainSnapshot snap;
      snap.step = step;
      snap.t = t;
      if (direction.kind() == TrainingDirection::Kind::least_squares) {
        snap.residual = std::sqrt((direction.target() - out).squaredNorm() / m);
        snap.loss = 0.5 * snap.residual * snap.residual;
      } else {
        snap.residual = snap.loss = std::numeric_limits<double>::quiet_NaN();
      }
      if (options.record_outputs) snap.outputs = out;
      if (options.record_ntk) snap.ntk = empirical_ntk(params, measure);
      if (options.record_param_norm) snap.param_norm = params.norm();
      for (const auto& r : recorders) r(snap);
      traj.snapshots.push_back(std::move(snap));
    }
    if (step == options.steps) break;

    const auto sens = sensitivities(params, trace, direction(t, out));
    for (int l = 0; l < arch.depth(); ++l) {
      const T ws = static_cast<T>(lr / (std::sqrt(static_cast<double>(arch.widths[l])) * m));
      params.weights[l].noalias() += ws * (sens.d[l + 1] * trace.act[l].transpose());
      params.biases[l] += static_cast<T>(lr * arch.beta / m) * sens.d[l + 1].rowwise().sum();
      if (!params.weights[l].allFinite() || !params.biases[l].allFinite()) throw DivergenceError(step + 1);
    }
  }
  return traj;
}

#define NTK_INSTANTIATE(T)                                                                          \
  template struct BasicNetworkParams<T>;                                                            \
  template BasicNetworkParams<T> init_params<T>(const Architecture&, const RngStream&);            \
  template BasicForwardTrace<T> forward<T>(const BasicNetworkParams<T>&, const Matrix&);           \
  template BasicSensitivityTrace<T> sensitivities<T>(const BasicNetworkParams<T>&,                 \
                                                     const BasicForwardTrace<T>&, const Matrix&);  \
  template BasicGradient<T> gradient<T>(const BasicNetworkParams<T>&, const BasicForwardTrace<T>&, \
                                        const BasicSensitivityTrace<T>&);                          \
  template BackwardResult<T> backward<T>(const BasicNetworkParams<T>&, const BasicForwardTrace<T>&, \
                                         const Matrix&);                                            \
  template KernelGram empirical_ntk<T>(const BasicNetworkParams<T>&, const EmpiricalMeasure&);     \
  template double ntk_drift<T>(const BasicNetworkParams<T>&, const BasicNetworkParams<T>&,         \
                               const EmpiricalMeasure&);                                           \
  template Trajectory train<T>(BasicNetworkParams<T>&, const EmpiricalMeasure&,                    \
                               const TrainingDirection&, const TrainOptions&,                      \
                               const std::vector<Recorder>&);

NTK_INSTANTIATE(double)
NTK_INSTANTIATE(float)

#undef NTK_INSTANTIATE

}  // namespace ntk

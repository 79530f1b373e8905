#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "ntk/limit_kernel.hpp"
#include "ntk/nonlinearity.hpp"
#include "ntk/numerics.hpp"

namespace ntk {

/// Layer widths n_0..n_L, bias scale beta and the hidden nonlinearity.
struct Architecture {
  std::vector<Eigen::Index> widths;
  double beta = 0.1;
  Nonlinearity nl = Nonlinearity::relu();

  int depth() const noexcept { return static_cast<int>(widths.size()) - 1; }
  Eigen::Index input_dim() const { return widths.front(); }
  Eigen::Index output_dim() const { return widths.back(); }
  /// P = sum_l (n_l + 1) n_{l+1}.
  Eigen::Index parameter_count() const;
  void validate() const;
};

/// W^(l) is n_{l+1} x n_l, b^(l) has length n_{l+1}, for l = 0..L-1.
template <class T>
struct BasicNetworkParams {
  using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;
  using Vec = Eigen::Matrix<T, Eigen::Dynamic, 1>;

  Architecture arch;
  std::vector<Mat> weights;
  std::vector<Vec> biases;

  Eigen::Index size() const;
  /// Layer by layer: W^(l) column-major, then b^(l).
  Vector flatten() const;
  void assign(const Vector& flat);
  double norm() const;
  void check_shapes() const;
};

using NetworkParams = BasicNetworkParams<double>;
using NetworkParamsF32 = BasicNetworkParams<float>;

template <class T>
BasicNetworkParams<T> init_params(const Architecture& arch, const RngStream& rng);

/// Samples are columns. preact[l] = alpha~^(l) for l = 1..L (preact[0] is
/// empty); act[l] = alpha^(l) for l = 0..L-1 with act[0] = x.
template <class T>
struct BasicForwardTrace {
  using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;
  std::vector<Mat> preact;
  std::vector<Mat> act;

  Eigen::Index samples() const { return act.front().cols(); }
  /// f_theta on the batch, M x n_L.
  Matrix output() const { return preact.back().transpose().template cast<double>(); }
};

/// Back-propagated directions, samples as columns. d[l] sits at the
/// preactivation alpha~^(l), l = 1..L; d[L] is the output cotangent and
/// d[l] = sigma'(alpha~^(l)) * (W^(l) / sqrt(n_l))^T d[l+1] below it.
template <class T>
struct BasicSensitivityTrace {
  using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;
  std::vector<Mat> d;
};

template <class T>
struct BasicGradient {
  std::vector<typename BasicNetworkParams<T>::Mat> weights;
  std::vector<typename BasicNetworkParams<T>::Vec> biases;
};

template <class T>
BasicForwardTrace<T> forward(const BasicNetworkParams<T>& params, const Matrix& batch);

/// `cotangent` is M x n_L, one row per sample.
template <class T>
BasicSensitivityTrace<T> sensitivities(const BasicNetworkParams<T>& params,
                                       const BasicForwardTrace<T>& trace, const Matrix& cotangent);

/// grad W^(l) = mean_i d^(l+1)(x_i) alpha^(l)(x_i)^T / sqrt(n_l), grad b^(l) = beta mean_i d^(l+1)(x_i).
template <class T>
BasicGradient<T> gradient(const BasicNetworkParams<T>& params, const BasicForwardTrace<T>& trace,
                          const BasicSensitivityTrace<T>& sens);

template <class T>
struct BackwardResult {
  BasicSensitivityTrace<T> sensitivities;
  BasicGradient<T> gradient;
};

template <class T>
BackwardResult<T> backward(const BasicNetworkParams<T>& params, const BasicForwardTrace<T>& trace,
                           const Matrix& cotangent);

/// Empirical NTK Gram on the dataset by layerwise inner products; entries
/// indexed i * n_L + k. Accumulated in double.
template <class T>
KernelGram empirical_ntk(const BasicNetworkParams<T>& params, const EmpiricalMeasure& measure);

/// Relative Frobenius distance of the empirical NTK at `later` from the one at `earlier`.
template <class T>
double ntk_drift(const BasicNetworkParams<T>& earlier, const BasicNetworkParams<T>& later,
                 const EmpiricalMeasure& measure);

/// d_t as a function of time and the network outputs on the dataset (N x n_L).
class TrainingDirection {
 public:
  enum class Kind { least_squares, custom };
  using Provider = std::function<Matrix(double t, const Matrix& outputs)>;

  static TrainingDirection least_squares(Matrix target);
  static TrainingDirection custom(Provider provider);

  Kind kind() const noexcept { return kind_; }
  const Matrix& target() const { return target_; }
  Matrix operator()(double t, const Matrix& outputs) const;

 private:
  Kind kind_ = Kind::custom;
  Matrix target_;
  Provider provider_;
};

struct TrainOptions {
  double step_size = 1.0;
  int steps = 0;
  /// Snapshot cadence; step 0 and the final step are always recorded.
  int record_every = 1;
  bool record_outputs = true;
  bool record_ntk = false;
  bool record_param_norm = false;
};

struct TrainSnapshot {
  int step = 0;
  double t = 0.0;
  /// 0.5 ||f - f*||^2 on the dataset (least squares only, NaN otherwise).
  double loss = 0.0;
  /// ||f - f*||_{p_in} (least squares only).
  double residual = 0.0;
  Matrix outputs;
  std::optional<KernelGram> ntk;
  std::optional<double> param_norm;
};

using Recorder = std::function<void(const TrainSnapshot&)>;

struct Trajectory {
  std::vector<TrainSnapshot> snapshots;
};

/// Explicit Euler on the parameter flow, full batch. Throws DivergenceError
/// with the step index when a parameter becomes non-finite.
template <class T>
Trajectory train(BasicNetworkParams<T>& params, const EmpiricalMeasure& measure,
                 const TrainingDirection& direction, const TrainOptions& options,
                 const std::vector<Recorder>& recorders = {});

}  // namespace ntk

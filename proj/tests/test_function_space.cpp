#include <doctest.h>

#include <cmath>
#include <limits>
#include <numbers>

#include "ntk/data_io.hpp"
#include "ntk/function_space.hpp"

using namespace ntk;

namespace {

KernelGram gram_of(const Matrix& m) {
  KernelGram g;
  g.entries = SymMatrix(m);
  g.kind = GramKind::theta_limit;
  return g;
}

Matrix random_psd(RngStream& rng, Eigen::Index n, Eigen::Index rank) {
  Matrix a = standard_normal(rng, n * rank).reshaped(n, rank);
  return a * a.transpose();
}

FunctionOnData random_function(RngStream& rng, Eigen::Index n, Eigen::Index k = 1) {
  return FunctionOnData(standard_normal(rng, n * k).reshaped(n, k));
}

double sup(const FunctionOnData& a, const FunctionOnData& b) {
  return (a.values() - b.values()).cwiseAbs().maxCoeff();
}

struct CircleTask {
  EmpiricalMeasure data = circle_dataset(4).measure();
  KernelStack stack = ntk_stack(data, 4, 0.1, Nonlinearity::relu());
  PiOperator op{stack.theta_gram()};
  FunctionOnData f0{Matrix::Zero(4, 1)};
  FunctionOnData fstar{(Matrix(4, 1) << 0.5, -0.3, 0.2, -0.4).finished()};
};

}  // namespace

TEST_CASE("seminorm and inner product") {
  FunctionOnData f((Matrix(2, 2) << 1, 2, 3, 4).finished());
  CHECK(f.norm() == doctest::Approx(std::sqrt(30.0 / 2)));
  CHECK(inner(f, f) == doctest::Approx(15.0));
  CHECK(FunctionOnData::from_flat(f.flat(), 2).values() == f.values());
  CHECK(f.flat()(1) == 2.0);
  CHECK_THROWS_AS(inner(f, FunctionOnData(Matrix::Zero(3, 2))), ArgumentError);
}

TEST_CASE("Pi operator") {
  RngStream rng(1);
  SUBCASE("N times identity acts as the identity") {
    PiOperator op(gram_of(5.0 * Matrix::Identity(5, 5)));
    auto f = random_function(rng, 5);
    CHECK(sup(pi_apply(op, f), f) <= 1e-15);
    CHECK(pi_apply(op, FunctionOnData(Matrix::Zero(5, 1))).values().isZero());
  }
  SUBCASE("self-adjoint in the p_in inner product") {
    PiOperator op(gram_of(random_psd(rng, 9, 4)));
    auto f = random_function(rng, 9), g = random_function(rng, 9);
    CHECK(std::abs(inner(pi_apply(op, f), g) - inner(f, pi_apply(op, g))) <= 1e-12);
    CHECK(inner(pi_apply(op, f), f) >= -1e-12);
  }
  SUBCASE("scalar block with several outputs acts per output") {
    const Matrix k = random_psd(rng, 6, 6);
    auto g = gram_of(k);
    g.n_out = 2;
    PiOperator op(g);
    auto f = random_function(rng, 6, 2);
    CHECK((pi_apply(op, f).values() - k * f.values() / 6.0).cwiseAbs().maxCoeff() <= 1e-13);
  }
  CHECK_THROWS_AS(pi_apply(PiOperator(gram_of(Matrix::Identity(3, 3))), FunctionOnData(Matrix::Zero(4, 1))),
                  ArgumentError);
}

TEST_CASE("exact kernel gradient descent") {
  CircleTask task;
  const double lmin = sym_eig(task.op.matrix()).values(3);
  auto out = kernel_gd_exact(task.op, task.f0, task.fstar, {0.0, 1e6 / lmin});
  CHECK(out[0].values() == task.f0.values());
  CHECK(sup(out[1], task.fstar) <= 1e-8);
}

TEST_CASE("null-space component persists") {
  RngStream rng(2);
  PiOperator op(gram_of(random_psd(rng, 8, 3)));
  auto f0 = random_function(rng, 8), fstar = random_function(rng, 8);
  const auto spec = sym_eig(op.matrix());
  auto ft = kernel_gd_exact(op, f0, fstar, {1e9});
  const Vector diff0 = (f0 - fstar).flat(), difft = (ft[0] - fstar).flat();
  for (int i = 3; i < 8; ++i) {
    CHECK(std::abs(spec.vectors.col(i).dot(difft) - spec.vectors.col(i).dot(diff0)) <= 1e-10);
  }
  for (int i = 0; i < 3; ++i) CHECK(std::abs(spec.vectors.col(i).dot(difft)) <= 1e-10);
}

TEST_CASE("exact solution matches Euler and Euler is first order") {
  CircleTask task;
  auto exact = kernel_gd_exact(task.op, task.f0, task.fstar, {2.0})[0];
  auto euler = kernel_gd_euler(task.op, task.f0, task.fstar, {.dt = 1e-3, .steps = 2000});
  CHECK(!euler.warning);
  CHECK(sup(exact, euler.final_state) <= 1e-6);

  std::vector<double> errs;
  for (double dt : {4e-3, 2e-3, 1e-3}) {
    auto e = kernel_gd_euler(task.op, task.f0, task.fstar, {.dt = dt, .steps = std::lround(2.0 / dt)});
    errs.push_back(sup(exact, e.final_state) / dt);
  }
  // Error constant C = err / dt is stable as dt halves.
  CHECK(errs[1] / errs[0] == doctest::Approx(1.0).epsilon(0.02));
  CHECK(errs[2] / errs[1] == doctest::Approx(1.0).epsilon(0.02));
}

TEST_CASE("Euler trajectories") {
  CircleTask task;
  auto still = kernel_gd_euler(task.op, task.fstar, task.fstar, {.dt = 0.01, .steps = 50, .keep_every = 10});
  CHECK(still.final_state.values() == task.fstar.values());
  CHECK(still.states.size() == 6);
  for (double r : still.residuals) CHECK(r == 0.0);

  auto run = kernel_gd_euler(task.op, task.f0, task.fstar, {.dt = 0.05, .steps = 400});
  for (std::size_t s = 1; s < run.residuals.size(); ++s) CHECK(run.residuals[s] <= run.residuals[s - 1]);

  const double lmax = sym_eig(task.op.matrix()).values(0);
  CHECK_THROWS_AS(kernel_gd_euler(task.op, task.f0, task.fstar, {.dt = 2.5 / lmax, .steps = 200}), IntegratorError);
  CHECK_THROWS_AS(kernel_gd_euler(task.op, task.f0, task.fstar, {.dt = 0.0, .steps = 1}), ArgumentError);
}

TEST_CASE("spectral trajectory identity") {
  CircleTask task;
  RngStream rng(3);
  auto f0 = random_function(rng, 4);
  const auto spec = sym_eig(task.op.matrix());
  const Vector c0 = spec.vectors.transpose() * (f0 - task.fstar).flat();
  for (double t : {0.5, 1.0, 3.0, 10.0}) {
    auto ft = kernel_gd_exact(task.op, f0, task.fstar, {t})[0];
    const Vector ct = spec.vectors.transpose() * (ft - task.fstar).flat();
    for (int i = 0; i < 4; ++i) {
      // p_in norm of mode i is |c| / sqrt(N).
      CHECK(std::abs(std::abs(ct(i)) - std::exp(-spec.values(i) * t) * std::abs(c0(i))) / 2 <= 1e-8);
    }
  }
}

TEST_CASE("exact dynamics are affine in the initial function") {
  CircleTask task;
  RngStream rng(4);
  const double t = 1.7;
  auto run = [&](const FunctionOnData& f0) { return kernel_gd_exact(task.op, f0, task.fstar, {t})[0]; };
  auto offset = run(FunctionOnData(Matrix::Zero(4, 1)));
  for (int trial = 0; trial < 3; ++trial) {
    auto f = random_function(rng, 4), g = random_function(rng, 4);
    const double a = 0.3 + trial, b = -1.1 + 0.5 * trial;
    auto lhs = run(a * f + b * g);
    auto rhs = a * run(f) + b * run(g) + (1 - a - b) * offset;
    CHECK(sup(lhs, rhs) <= 1e-12);
  }
}

TEST_CASE("regression limit") {
  CircleTask task;
  auto sigma = task.stack.sigma_gram(4);
  auto theta = task.stack.theta_gram();
  auto reg = regression_limit(theta, sigma, task.fstar);
  CHECK(reg.jitter() == doctest::Approx(1e-10 * theta.entries.trace() / 4));

  SUBCASE("interpolation and vanishing variance on the data") {
    auto p = reg.predict(task.stack, task.data, task.data.points());
    CHECK((p.mean - task.fstar.values()).cwiseAbs().maxCoeff() <= 1e-6);
    CHECK(p.variance.maxCoeff() <= 1e-8);
  }
  SUBCASE("Theta replaced by Sigma: GP posterior variance vanishes") {
    auto r = regression_limit(sigma, sigma, task.fstar, {.jitter = 0.0});
    const Matrix& s = sigma.entries.matrix();
    auto p = r.predict(s, s, s.diagonal());
    CHECK(p.variance.cwiseAbs().maxCoeff() <= 1e-12);
  }
  SUBCASE("mean equals the long-time dynamics on a query grid") {
    std::vector<double> angles;
    for (int k = 0; k < 64; ++k) angles.push_back(2 * std::numbers::pi * k / 64);
    const Matrix q = circle_points(angles);
    auto p = reg.predict(task.stack, task.data, q);
    const auto ck = cross_kernel(task.stack, task.data, q);
    const double lmin = sym_eig(task.op.matrix()).values(3);
    auto dyn = kernel_gd_exact_at(task.op, ck.theta[3], Matrix::Zero(64, 1), task.f0, task.fstar, {1e6 / lmin});
    CHECK((p.mean - dyn[0]).cwiseAbs().maxCoeff() <= 1e-6);
    CHECK(p.variance.minCoeff() >= -1e-10);
  }
  SUBCASE("non-zero initial function") {
    Matrix y0(4, 1);
    y0 << 0.1, 0.2, -0.3, 0.05;
    auto r = regression_limit(theta, sigma, task.fstar, {.f0_on_data = y0});
    const Matrix& t = theta.entries.matrix();
    auto p = r.predict(t, sigma.entries.matrix(), sigma.entries.matrix().diagonal(), y0);
    CHECK((p.mean - task.fstar.values()).cwiseAbs().maxCoeff() <= 1e-6);
    CHECK_THROWS_AS(r.predict(t, sigma.entries.matrix(), sigma.entries.matrix().diagonal()), ArgumentError);
  }
  SUBCASE("singular Gram without jitter surfaces as a solver error") {
    RngStream rng(5);
    auto sing = gram_of(random_psd(rng, 4, 2));
    CHECK_THROWS_AS(regression_limit(sing, sing, task.fstar, {.jitter = 0.0}), NotPositiveDefinite);
  }
}

TEST_CASE("kernel PCA") {
  RngStream rng(6);
  SUBCASE("constructed spectrum") {
    Matrix a = standard_normal(rng, 36).reshaped(6, 6);
    Matrix q = Eigen::HouseholderQR<Matrix>(a).householderQ();
    Vector lam(6);
    lam << 5, 3, 2, 1, 0.5, 0.1;
    PiOperator op(gram_of(6.0 * q * lam.asDiagonal() * q.transpose()));
    auto r = kernel_pca(op, 4);
    CHECK((r.eigenvalues - lam.head(4)).cwiseAbs().maxCoeff() <= 1e-12);
    for (int i = 0; i < 4; ++i) {
      CHECK(sup(pi_apply(op, r.components[i]), r.eigenvalues(i) * r.components[i]) <= 1e-8);
      for (int j = 0; j < 4; ++j) CHECK(std::abs(inner(r.components[i], r.components[j]) - (i == j)) <= 1e-8);
    }
  }
  SUBCASE("near-constant kernel gives a near-constant first component") {
    Matrix k = Matrix::Constant(10, 10, 1.0) + 0.01 * random_psd(rng, 10, 10) / 10;
    auto r = kernel_pca(PiOperator(gram_of(k)), 2);
    const Vector c = r.components[0].values().col(0);
    CHECK((c.array() - 1.0).abs().maxCoeff() < 0.05);
  }
  SUBCASE("power-iteration path for large N") {
    const Eigen::Index n = kPowerIterationThreshold + 50;
    Matrix low = standard_normal(rng, n * 5).reshaped(n, 5);
    Vector scale(5);
    scale << 10, 5, 3, 2, 1;
    Matrix k = low * scale.asDiagonal() * low.transpose();
    PiOperator op(gram_of(k));
    auto r = kernel_pca(op, 3);
    const auto ref = sym_eig(op.matrix());
    for (int i = 0; i < 3; ++i) {
      CHECK(std::abs(r.eigenvalues(i) - ref.values(i)) <= 1e-8 * ref.values(0));
      CHECK(sup(pi_apply(op, r.components[i]), r.eigenvalues(i) * r.components[i]) <= 1e-8);
      CHECK(std::abs(r.components[i].norm() - 1.0) <= 1e-8);
    }
  }
  CHECK_THROWS_AS(kernel_pca(PiOperator(gram_of(Matrix::Identity(3, 3))), 4), ArgumentError);
}

TEST_CASE("decomposition along a component") {
  RngStream rng(7);
  auto c = random_function(rng, 5);
  auto d = decompose_along(2.5 * c, c);
  CHECK(d.h.values().cwiseAbs().maxCoeff() <= 1e-15);
  Matrix ortho(5, 1);
  ortho << 1, -1, 0, 0, 0;
  Matrix base(5, 1);
  base << 1, 1, 7, 0, 0;
  auto o = decompose_along(FunctionOnData(ortho), FunctionOnData(base));
  CHECK(o.g.values().isZero());
  auto f = random_function(rng, 5);
  auto s = decompose_along(f, c);
  const Matrix recombined = (s.g + s.h).values();
  CHECK((recombined - f.values()).cwiseAbs().maxCoeff() <= 4 * std::numeric_limits<double>::epsilon() *
                                                                f.values().cwiseAbs().maxCoeff());
  CHECK_THROWS_AS(decompose_along(f, FunctionOnData(Matrix::Zero(5, 1))), ArgumentError);
}

TEST_CASE("second principal direction decays at its own rate") {
  auto data = circle_dataset(16, 0.1).measure();
  auto stack = ntk_stack(data, 4, 0.1, Nonlinearity::relu());
  PiOperator op(stack.theta_gram());
  auto pca = kernel_pca(op, 3);
  RngStream rng(8);
  auto f0 = random_function(rng, 16);
  auto fstar = f0 + 0.5 * pca.components[1];
  const double l2 = pca.eigenvalues(1);
  std::vector<double> times;
  for (int k = 0; k <= 20; ++k) times.push_back(k * 0.5 / l2);
  auto traj = kernel_gd_exact(op, f0, fstar, times);
  for (std::size_t k = 0; k < times.size(); ++k) {
    auto d = decompose_along(traj[k] - fstar, pca.components[1]);
    const double expected = 0.5 * std::exp(-l2 * times[k]);
    CHECK(std::abs(d.g.norm() - expected) <= 1e-6 * expected);
    CHECK(d.h.norm() <= 1e-8);
  }
}

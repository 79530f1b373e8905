#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "ntk/data_io.hpp"
#include "ntk/finite_net.hpp"
#include "oracles.hpp"

using namespace ntk;

namespace {

double rel_close(double a, double b) {
  const double scale = std::max(std::abs(a), std::abs(b));
  return scale < 1e-12 ? 0.0 : std::abs(a - b) / scale;
}

Architecture arch(std::vector<Eigen::Index> widths, Nonlinearity nl = Nonlinearity::relu(),
                  double beta = 0.1) {
  return Architecture{std::move(widths), beta, std::move(nl)};
}

}  // namespace

TEST_CASE("parameter shapes and initialization") {
  auto a = arch({2, 3, 1});
  CHECK(a.parameter_count() == 13);
  auto p = init_params<double>(a, RngStream(1));
  CHECK(p.weights[0].rows() == 3);
  CHECK(p.weights[0].cols() == 2);
  CHECK(p.weights[1].rows() == 1);
  CHECK(p.weights[1].cols() == 3);
  CHECK(p.biases[0].size() == 3);
  CHECK(p.biases[1].size() == 1);
  CHECK(p.size() == 13);
  CHECK(p.flatten() == init_params<double>(a, RngStream(1)).flatten());
  CHECK(p.flatten() != init_params<double>(a, RngStream(2)).flatten());

  auto q = p;
  q.assign(2.0 * p.flatten());
  CHECK(q.weights[1](0, 2) == 2.0 * p.weights[1](0, 2));

  CHECK_THROWS_AS(init_params<double>(arch({2}), RngStream(1)), ArgumentError);
  CHECK_THROWS_AS(init_params<double>(arch({2, 0, 1}), RngStream(1)), ArgumentError);
}

TEST_CASE("pooled initial entries are standard normal") {
  auto p = init_params<double>(arch({1000, 999, 1}), RngStream(77));
  const Vector v = p.flatten();
  REQUIRE(v.size() >= 1000000);
  const double mean = v.mean();
  const double var = (v.array() - mean).square().mean();
  CHECK(std::abs(mean) < 0.005);
  CHECK(std::abs(var - 1.0) < 0.01);
}

TEST_CASE("f32 parameters are the rounded f64 draws") {
  auto a = arch({3, 5, 2});
  auto d = init_params<double>(a, RngStream(9));
  auto f = init_params<float>(a, RngStream(9));
  CHECK((d.flatten() - f.flatten()).cwiseAbs().maxCoeff() <= 1e-6 * d.flatten().cwiseAbs().maxCoeff());
}

TEST_CASE("forward pass examples") {
  auto p = init_params<double>(arch({3, 1}), RngStream(3));
  Matrix x(2, 3);
  x << 0.2, -1.0, 0.5, 1.5, 0.0, -0.7;

  SUBCASE("zero weights, unit bias") {
    p.weights[0].setZero();
    p.biases[0].setOnes();
    auto out = forward(p, x).output();
    CHECK(out(0, 0) == doctest::Approx(0.1).epsilon(1e-15));
    CHECK(out(1, 0) == doctest::Approx(0.1).epsilon(1e-15));
  }
  SUBCASE("affine depth-1 formula") {
    auto out = forward(p, x).output();
    for (int i = 0; i < 2; ++i) {
      const double ref = p.weights[0].row(0).dot(x.row(i)) / std::sqrt(3.0) + 0.1 * p.biases[0](0);
      CHECK(std::abs(out(i, 0) - ref) <= 1e-15);
    }
  }
  SUBCASE("zero input and zero biases through relu") {
    auto q = init_params<double>(arch({3, 8, 8, 2}), RngStream(4));
    for (auto& b : q.biases) b.setZero();
    CHECK(forward(q, Matrix::Zero(1, 3)).output().cwiseAbs().maxCoeff() == 0.0);
  }
  CHECK_THROWS_AS(forward(p, Matrix::Zero(2, 4)), ArgumentError);
}

TEST_CASE("backward examples") {
  auto p = init_params<double>(arch({3, 4, 2}), RngStream(5));
  Matrix x(3, 3);
  x << 0.2, -1.0, 0.5, 1.5, 0.0, -0.7, 0.3, 0.3, 0.3;
  auto tr = forward(p, x);
  auto zero = backward(p, tr, Matrix::Zero(3, 2));
  for (int l = 0; l < 2; ++l) {
    CHECK(zero.gradient.weights[l].cwiseAbs().maxCoeff() == 0.0);
    CHECK(zero.gradient.biases[l].cwiseAbs().maxCoeff() == 0.0);
  }
  CHECK_THROWS_AS(backward(p, tr, Matrix::Zero(2, 2)), ArgumentError);

  auto lin = init_params<double>(arch({3, 2}), RngStream(6));
  Matrix one(1, 3);
  one << 0.4, -0.1, 2.0;
  Matrix e1(1, 2);
  e1 << 1, 0;
  auto g = backward(lin, forward(lin, one), e1).gradient;
  CHECK((g.weights[0].row(0) - one.row(0) / std::sqrt(3.0)).cwiseAbs().maxCoeff() <= 1e-16);
  CHECK(g.weights[0].row(1).cwiseAbs().maxCoeff() == 0.0);
  CHECK(g.biases[0](0) == doctest::Approx(0.1));
  CHECK(g.biases[0](1) == 0.0);
}

TEST_CASE("sensitivity recursion holds entrywise") {
  auto p = init_params<double>(arch({2, 5, 4, 3}, Nonlinearity::tanh()), RngStream(10));
  RngStream rng(11);
  Matrix x = standard_normal(rng, 8).reshaped(4, 2);
  Matrix cot = standard_normal(rng, 12).reshaped(4, 3);
  auto tr = forward(p, x);
  auto s = sensitivities(p, tr, cot);
  CHECK(s.d[3] == cot.transpose());
  for (int l = 2; l >= 1; --l) {
    for (Eigen::Index i = 0; i < 4; ++i) {
      for (Eigen::Index a = 0; a < p.arch.widths[l]; ++a) {
        double acc = 0;
        for (Eigen::Index b = 0; b < p.arch.widths[l + 1]; ++b) acc += p.weights[l](b, a) * s.d[l + 1](b, i);
        const double z = tr.preact[l](a, i);
        const double ref = (1 - std::tanh(z) * std::tanh(z)) * acc / std::sqrt(double(p.arch.widths[l]));
        CHECK(std::abs(s.d[l](a, i) - ref) <= 1e-12 * std::max(1.0, std::abs(ref)));
      }
    }
  }
}

TEST_CASE("gradient matches central finite differences") {
  for (const auto& nl : {Nonlinearity::relu(), Nonlinearity::erf(), Nonlinearity::tanh()}) {
    CAPTURE(nl.name());
    auto p = init_params<double>(arch({2, 3, 3, 1}, nl), RngStream(21));
    RngStream rng(22);
    Matrix x = standard_normal(rng, 10).reshaped(5, 2);
    Matrix y = standard_normal(rng, 5).reshaped(5, 1);
    // Loss C = (1 / 2M) sum_i (f(x_i) - y_i)^2; its gradient is the
    // parameter gradient seeded with the residual.
    auto loss = [&](const NetworkParams& q) {
      return 0.5 * (forward(q, x).output() - y).squaredNorm() / 5.0;
    };
    auto tr = forward(p, x);
    auto g = backward(p, tr, tr.output() - y).gradient;
    NetworkParams flat_g = p;
    for (int l = 0; l < 3; ++l) {
      flat_g.weights[l] = g.weights[l];
      flat_g.biases[l] = g.biases[l];
    }
    const Vector analytic = flat_g.flatten();
    const Vector theta = p.flatten();
    const double h = 1e-5;
    for (Eigen::Index k = 0; k < theta.size(); ++k) {
      NetworkParams plus = p, minus = p;
      Vector tp = theta, tm = theta;
      tp(k) += h;
      tm(k) -= h;
      plus.assign(tp);
      minus.assign(tm);
      const double fd = (loss(plus) - loss(minus)) / (2 * h);
      CAPTURE(k);
      CHECK(rel_close(analytic(k), fd) <= 1e-6);
    }
  }
}

TEST_CASE("empirical NTK equals the brute-force Jacobian product") {
  for (Eigen::Index n_out : {1, 2}) {
    for (const auto& nl : {Nonlinearity::relu(), Nonlinearity::erf()}) {
      auto p = init_params<double>(arch({2, 3, 3, n_out}, nl), RngStream(31 + n_out));
      RngStream rng(40);
      EmpiricalMeasure m(standard_normal(rng, 12).reshaped(6, 2));
      const Matrix j = oracle::brute_jacobian(p, m.points());
      const Matrix ref = j * j.transpose();
      const auto g = empirical_ntk(p, m);
      CHECK(g.kind == GramKind::theta_empirical);
      CHECK(g.n_out == n_out);
      CHECK((g.full() - ref).cwiseAbs().maxCoeff() <= 1e-10 * std::max(1.0, ref.cwiseAbs().maxCoeff()));
    }
  }
}

TEST_CASE("depth-1 empirical NTK equals Sigma^(1) for any parameters") {
  auto data = circle_dataset(7, 0.2).measure();
  auto limit = sigma_stack(data, 1, 0.1, Nonlinearity::relu());
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    auto p = init_params<double>(arch({2, 3}), RngStream(seed));
    auto g = empirical_ntk(p, data);
    Matrix ref = Matrix::Zero(21, 21);
    for (int i = 0; i < 7; ++i)
      for (int j = 0; j < 7; ++j)
        for (int k = 0; k < 3; ++k) ref(3 * i + k, 3 * j + k) = limit.sigma[0](i, j);
    CHECK((g.full() - ref).cwiseAbs().maxCoeff() <= 1e-12);
  }
  auto a = init_params<double>(arch({2, 1}), RngStream(1));
  auto b = init_params<double>(arch({2, 1}), RngStream(2));
  CHECK(ntk_drift(a, b, data) <= 1e-15);
}

TEST_CASE("empirical NTK is symmetric PSD") {
  auto data = gaussian_dataset(12, 3, RngStream(50)).measure();
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    auto p = init_params<double>(arch({3, 16, 16, 2}), RngStream(seed));
    auto g = empirical_ntk(p, data);
    const Matrix f = g.full();
    CHECK(f == f.transpose());
    CHECK(min_eigenvalue(g) >= -1e-10 * f.trace() / f.rows());
  }
}

TEST_CASE("training with a zero direction leaves parameters unchanged") {
  auto p = init_params<double>(arch({2, 6, 1}), RngStream(60));
  const Vector before = p.flatten();
  auto data = circle_dataset(4).measure();
  auto dir = TrainingDirection::custom([](double, const Matrix& f) { return Matrix::Zero(f.rows(), f.cols()); });
  auto traj = train(p, data, dir, {.step_size = 1.0, .steps = 5});
  CHECK(p.flatten() == before);
  CHECK(traj.snapshots.size() == 6);
  CHECK(std::isnan(traj.snapshots[0].loss));
  CHECK(ntk_drift(p, p, data) == 0.0);
}

TEST_CASE("linear model flow against the exponential solution") {
  auto p = init_params<double>(arch({3, 1}), RngStream(70));
  Matrix x(1, 3);
  x << 0.6, -0.2, 1.1;
  EmpiricalMeasure m(x);
  const double y = 0.8;
  const double f0 = forward(p, x).output()(0, 0);
  const double theta = x.squaredNorm() / 3 + 0.01;
  auto err_at_t1 = [&](double lr) {
    auto q = p;
    const int steps = static_cast<int>(std::lround(1.0 / lr));
    auto traj = train(q, m, TrainingDirection::least_squares(Matrix::Constant(1, 1, y)),
                      {.step_size = lr, .steps = steps, .record_every = steps});
    const double f_euler = traj.snapshots.back().outputs(0, 0);
    // Euler on a linear model is the discrete geometric recursion exactly.
    CHECK(std::abs(f_euler - (y + std::pow(1 - lr * theta, steps) * (f0 - y))) <= 1e-12);
    return std::abs(f_euler - (y + std::exp(-theta) * (f0 - y)));
  };
  const double e1 = err_at_t1(1e-2), e2 = err_at_t1(5e-3), e3 = err_at_t1(2.5e-3);
  CHECK(e1 < 1e-2);
  CHECK(e1 / e2 == doctest::Approx(2.0).epsilon(0.05));
  CHECK(e2 / e3 == doctest::Approx(2.0).epsilon(0.05));
}

TEST_CASE("divergence is reported with the step index") {
  auto p = init_params<double>(arch({2, 1}), RngStream(80));
  auto data = circle_dataset(4).measure();
  try {
    train(p, data, TrainingDirection::least_squares(Matrix::Ones(4, 1)), {.step_size = 1e308, .steps = 50});
    FAIL("expected divergence");
  } catch (const DivergenceError& e) {
    CHECK(e.step() >= 1);
    CHECK(e.step() <= 50);
  }
  auto fresh = init_params<double>(arch({2, 1}), RngStream(80));
  CHECK_THROWS_AS(train(fresh, data, TrainingDirection::least_squares(Matrix::Ones(4, 1)), {.step_size = 0.0}),
                  ArgumentError);
  CHECK_THROWS_AS(train(fresh, data, TrainingDirection::least_squares(Matrix::Ones(3, 1)), {.steps = 1}),
                  ArgumentError);
}

TEST_CASE("recorders see every snapshot") {
  auto p = init_params<double>(arch({2, 8, 1}), RngStream(81));
  auto data = circle_dataset(4).measure();
  std::vector<int> seen;
  auto traj = train(p, data, TrainingDirection::least_squares(Matrix::Zero(4, 1)),
                    {.step_size = 0.5, .steps = 7, .record_every = 3, .record_ntk = true, .record_param_norm = true},
                    {[&](const TrainSnapshot& s) { seen.push_back(s.step); }});
  CHECK(seen == std::vector<int>{0, 3, 6, 7});
  CHECK(traj.snapshots[2].t == doctest::Approx(3.0));
  CHECK(traj.snapshots[1].ntk.has_value());
  CHECK(*traj.snapshots[3].param_norm == doctest::Approx(p.norm()));
}

TEST_CASE("wide network trained on four circle points converges") {
  auto p = init_params<double>(arch({2, 4000, 4000, 4000, 1}), RngStream(2018));
  auto data = circle_dataset(4).measure();
  Matrix target(4, 1);
  target << 0.5, -0.3, 0.2, -0.4;
  auto traj = train(p, data, TrainingDirection::least_squares(target),
                    {.step_size = 1.0, .steps = 1000, .record_outputs = false});
  // Below ~1e-12 the residual is f64 round-off and no longer ordered.
  const double floor = 1e-12;
  for (std::size_t s = 2; s < traj.snapshots.size() && traj.snapshots[s - 1].residual > floor; ++s) {
    CAPTURE(s);
    CHECK(traj.snapshots[s].residual < traj.snapshots[s - 1].residual);
  }
  CHECK(traj.snapshots.back().residual < 1e-3);
}

TEST_CASE("mean empirical NTK of wide nets approaches the limit Gram") {
  auto data = circle_dataset(8).measure();
  const Matrix limit = ntk_stack(data, 4, 0.1, Nonlinearity::relu()).theta[3];
  const int seeds = 10;
  Matrix sum = Matrix::Zero(8, 8), sum2 = Matrix::Zero(8, 8);
  for (int s = 0; s < seeds; ++s) {
    auto p = init_params<float>(arch({2, 4000, 4000, 4000, 1}), RngStream(500, s));
    const Matrix g = empirical_ntk(p, data).entries.matrix();
    sum += g;
    sum2 += g.cwiseProduct(g);
  }
  const Matrix mean = sum / seeds;
  const Matrix var = (sum2 / seeds - mean.cwiseProduct(mean)) * (double(seeds) / (seeds - 1));
  const Matrix se = (var / seeds).cwiseSqrt();
  for (int i = 0; i < 8; ++i)
    for (int j = 0; j < 8; ++j) {
      CAPTURE(i);
      CAPTURE(j);
      CHECK(std::abs(mean(i, j) - limit(i, j)) <= 3 * se(i, j));
    }
}

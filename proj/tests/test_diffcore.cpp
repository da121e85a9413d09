#include <doctest.h>

#include <cmath>

#include "equiaug/gradcheck.hpp"
#include "equiaug/mlp.hpp"
#include "equiaug/optimizer.hpp"
#include "equiaug/tape.hpp"

using namespace equiaug;
using namespace equiaug::diff;

namespace {

// Loss used by the gradient-oracle checks: full-batch mse of an MLP whose
// parameters are injected from a flat matrix list.
scalar_t mlp_loss_at(const MlpNetwork& shape, const std::vector<Matrix>& params,
                     const Matrix& inputs, const Matrix& targets) {
  MlpNetwork net = shape;
  std::size_t k = 0;
  for (MlpLayer& layer : net.layers) {
    layer.w = params[k++];
    layer.b = params[k++];
  }
  return mse_value(mlp_forward(net, inputs), targets);
}

std::vector<Matrix> param_copies(const MlpNetwork& net) {
  std::vector<Matrix> out;
  for (const MlpLayer& layer : net.layers) {
    out.push_back(layer.w);
    out.push_back(layer.b);
  }
  return out;
}

}  // namespace

TEST_CASE("tape primitives compute hand values") {
  Tape t;
  Matrix a(2, 2);
  a << 1.0, 2.0, 3.0, 4.0;
  Matrix b(2, 2);
  b << 5.0, 6.0, 7.0, 8.0;
  const NodeId na = t.constant(a);
  const NodeId nb = t.constant(b);

  CHECK(t.value(t.add(na, nb))(1, 1) == 12.0);
  CHECK(t.value(t.mul(na, nb))(0, 1) == 12.0);
  CHECK(t.value(t.matmul(na, nb))(0, 0) == 19.0);
  CHECK(t.value(t.tanh(na))(0, 0) == doctest::Approx(std::tanh(1.0)));
  CHECK(t.value(t.square(na))(1, 0) == 9.0);
  CHECK(t.value(t.mean(na))(0, 0) == 2.5);

  Matrix c(1, 2);
  c << -1.0, 2.0;
  const NodeId nc = t.constant(c);
  CHECK(t.value(t.relu(nc))(0, 0) == 0.0);
  CHECK(t.value(t.relu(nc))(0, 1) == 2.0);

  // Row and scalar broadcasting.
  const NodeId row = t.constant(Matrix::Constant(1, 2, 10.0));
  CHECK(t.value(t.add(na, row))(1, 0) == 13.0);
  const NodeId scalar_node = t.constant(2.0);
  CHECK(t.value(t.mul(na, scalar_node))(1, 1) == 8.0);
}

TEST_CASE("tape rejects bad shapes and non-scalar losses") {
  Tape t;
  const NodeId a = t.constant(Matrix::Ones(2, 3));
  const NodeId b = t.constant(Matrix::Ones(3, 3));
  CHECK_THROWS_AS(t.add(a, b), std::invalid_argument);
  CHECK_THROWS_AS(t.matmul(a, a), std::invalid_argument);
  CHECK_THROWS_AS(t.backward(a), std::invalid_argument);
}

TEST_CASE("backward: loss = x^2 at x=3 gives adjoint 6") {
  Tape t;
  const NodeId x = t.constant(3.0);
  const NodeId loss = t.square(x);
  t.backward(loss);
  CHECK(t.adjoint(x)(0, 0) == doctest::Approx(6.0));
  CHECK(t.adjoint(loss)(0, 0) == 1.0);
}

TEST_CASE("backward: constant loss leaves parameters with zero adjoints") {
  Tape t;
  const NodeId p = t.constant(Matrix::Ones(2, 2));
  const NodeId loss = t.mean(t.constant(Matrix::Ones(3, 3)));
  t.backward(loss);
  CHECK(t.adjoint(p).isZero(0.0));
}

TEST_CASE("mse examples and symmetry") {
  Matrix pred(1, 2);
  pred << 1.0, 1.0;
  Matrix target = Matrix::Zero(1, 2);
  CHECK(mse_value(pred, target) == doctest::Approx(2.0));
  CHECK(mse_value(pred, pred) == 0.0);

  Matrix p2(2, 2), t2(2, 2);
  p2 << 1.0, 0.0, 0.0, 1.0;
  t2.setZero();
  CHECK(mse_value(p2, t2) == doctest::Approx(1.0));

  Rng rng(3);
  const Matrix x = rng.uniform_matrix(4, 3, -1.0, 1.0);
  const Matrix y = rng.uniform_matrix(4, 3, -1.0, 1.0);
  CHECK(mse_value(x, y) == doctest::Approx(mse_value(y, x)));

  Tape t;
  const NodeId loss = mse(t, t.constant(p2), t.constant(t2));
  CHECK(t.value_scalar(loss) == doctest::Approx(1.0));
  CHECK_THROWS_AS(mse(t, t.constant(p2), t.constant(Matrix::Zero(1, 2))),
                  std::invalid_argument);
}

TEST_CASE("mlp_init: determinism, zero biases, dimension chaining") {
  const MlpNetwork a = mlp_init(2, {4}, 2, 7);
  const MlpNetwork b = mlp_init(2, {4}, 2, 7);
  REQUIRE(a.layers.size() == 2);
  CHECK(a.layers[0].w == b.layers[0].w);
  CHECK(a.layers[1].w == b.layers[1].w);
  CHECK(a.layers[0].b.isZero(0.0));
  CHECK(a.layers[1].b.isZero(0.0));

  const MlpNetwork c = mlp_init(3, {8, 8}, 3, 1);
  REQUIRE(c.layers.size() == 3);
  CHECK(c.layers[0].w.rows() == 3);
  CHECK(c.layers[0].w.cols() == 8);
  CHECK(c.layers[1].w.rows() == 8);
  CHECK(c.layers[1].w.cols() == 8);
  CHECK(c.layers[2].w.rows() == 8);
  CHECK(c.layers[2].w.cols() == 3);
  CHECK(c.layers[2].act == Activation::identity);

  CHECK_THROWS_AS(mlp_init(0, {4}, 2, 7), std::invalid_argument);
  CHECK_THROWS_AS(mlp_init(2, {0}, 2, 7), std::invalid_argument);
}

TEST_CASE("mlp_forward: identity, zero and hand-computed tanh cases") {
  MlpNetwork id_net;
  id_net.input_dim = 2;
  id_net.output_dim = 2;
  id_net.layers.push_back({Matrix::Identity(2, 2), Matrix::Zero(1, 2),
                           Activation::identity});
  Vector in(2);
  in << 1.0, 2.0;
  CHECK(mlp_forward(id_net, in) == in);

  MlpNetwork zero_net = mlp_init(2, {4}, 2, 5);
  for (MlpLayer& layer : zero_net.layers) layer.w.setZero();
  CHECK(mlp_forward(zero_net, in).isZero(0.0));

  MlpNetwork tiny;
  tiny.input_dim = 1;
  tiny.output_dim = 1;
  tiny.layers.push_back({Matrix::Ones(1, 1), Matrix::Zero(1, 1), Activation::tanh});
  tiny.layers.push_back({Matrix::Ones(1, 1), Matrix::Zero(1, 1), Activation::identity});
  Vector half(1);
  half << 0.5;
  CHECK(mlp_forward(tiny, half)[0] == doctest::Approx(0.462117).epsilon(1e-5));

  CHECK_THROWS_AS(mlp_forward(tiny, in), std::invalid_argument);
}

TEST_CASE("mlp_forward is pure: identical inputs give bit-identical outputs") {
  const MlpNetwork net = mlp_init(3, {8}, 2, 11);
  Rng rng(2);
  const Matrix x = rng.uniform_matrix(5, 3, -1.0, 1.0);
  CHECK(mlp_forward(net, x) == mlp_forward(net, x));
}

TEST_CASE("analytic MLP gradients match central finite differences") {
  Rng rng(17);
  for (int trial = 0; trial < 10; ++trial) {
    const int depth = 1 + static_cast<int>(rng.below(3));
    std::vector<int> hidden;
    for (int k = 0; k < depth; ++k) hidden.push_back(2 + static_cast<int>(rng.below(15)));
    const int in_dim = 2 + static_cast<int>(rng.below(3));
    const int out_dim = 1 + static_cast<int>(rng.below(3));
    MlpNetwork net = mlp_init(in_dim, hidden, out_dim, rng.next_u64());

    const Matrix inputs = rng.uniform_matrix(6, in_dim, -1.0, 1.0);
    const Matrix targets = rng.uniform_matrix(6, out_dim, -1.0, 1.0);

    Tape t;
    const MlpOnTape params = mlp_on_tape(t, net);
    const NodeId loss = mse(t, mlp_forward(t, net, params, t.constant(inputs)),
                            t.constant(targets));
    t.backward(loss);
    const std::vector<Matrix> analytic = mlp_grads(t, params);

    const auto loss_fn = [&](const std::vector<Matrix>& p) {
      return mlp_loss_at(net, p, inputs, targets);
    };
    const std::vector<Matrix> numeric = finite_diff_grad(loss_fn, param_copies(net), 1e-5);
    CHECK(max_relative_error(analytic, numeric) < 1e-4);
  }
}

TEST_CASE("broadcast gradients agree with finite differences") {
  Rng rng(23);
  const Matrix big = rng.uniform_matrix(4, 3, -1.0, 1.0);
  const Matrix row = rng.uniform_matrix(1, 3, 0.5, 1.5);

  const auto loss_fn = [&](const std::vector<Matrix>& p) {
    Tape t;
    const NodeId loss =
        t.mean(t.square(t.mul(t.add(t.constant(big), t.constant(p[0])), t.constant(p[1]))));
    return t.value_scalar(loss);
  };

  Tape t;
  const NodeId r = t.constant(row);
  const NodeId s = t.constant(Matrix::Constant(1, 1, 0.7));
  const NodeId loss = t.mean(t.square(t.mul(t.add(t.constant(big), r), s)));
  t.backward(loss);

  const auto numeric = finite_diff_grad(loss_fn, {row, Matrix::Constant(1, 1, 0.7)}, 1e-6);
  CHECK(max_relative_error({t.adjoint(r), t.adjoint(s)}, numeric) < 1e-6);
}

TEST_CASE("optimizer: plain gradient-descent examples") {
  Matrix p = Matrix::Constant(1, 1, 1.0);
  Optimizer opt({.learning_rate = 0.1, .plain_sgd = true});

  opt.step({&p}, {Matrix::Zero(1, 1)});
  CHECK(p(0, 0) == 1.0);

  opt.step({&p}, {Matrix::Constant(1, 1, 2.0)});
  CHECK(p(0, 0) == doctest::Approx(0.8));

  CHECK_THROWS_AS(opt.step({&p}, {Matrix::Zero(2, 2)}), std::invalid_argument);
}

TEST_CASE("optimizer: doubling the rate doubles the plain-mode move") {
  Rng rng(4);
  const Matrix grad = rng.uniform_matrix(3, 2, -1.0, 1.0);
  Matrix p1 = Matrix::Zero(3, 2);
  Matrix p2 = Matrix::Zero(3, 2);
  Optimizer a({.learning_rate = 0.125, .plain_sgd = true});
  Optimizer b({.learning_rate = 0.25, .plain_sgd = true});
  a.step({&p1}, {grad});
  b.step({&p2}, {grad});
  CHECK(p2 == Matrix(2.0 * p1));
}

TEST_CASE("optimizer: quadratic loss converges") {
  auto run = [](bool plain) {
    Matrix p = Matrix::Zero(1, 1);
    Optimizer opt({.learning_rate = plain ? 0.1 : 1e-2, .plain_sgd = plain});
    for (int k = 0; k < 10000; ++k) {
      const Matrix grad = Matrix::Constant(1, 1, 2.0 * (p(0, 0) - 3.0));
      opt.step({&p}, {grad});
      if (std::abs(p(0, 0) - 3.0) < 1e-3) break;
    }
    return p(0, 0);
  };
  CHECK(run(true) == doctest::Approx(3.0).epsilon(1e-3));
  CHECK(run(false) == doctest::Approx(3.0).epsilon(1e-3));
}

TEST_CASE("finite_diff_grad oracle behaviour") {
  const auto square_loss = [](const std::vector<Matrix>& p) {
    return p[0](0, 0) * p[0](0, 0);
  };
  const auto g = finite_diff_grad(square_loss, {Matrix::Constant(1, 1, 2.0)}, 1e-5);
  CHECK(g[0](0, 0) == doctest::Approx(4.0).epsilon(1e-6));

  const auto const_loss = [](const std::vector<Matrix>&) { return 1.0; };
  const auto gz = finite_diff_grad(const_loss, {Matrix::Ones(2, 2)}, 1e-5);
  CHECK(gz[0].isZero(0.0));

  const auto abs_loss = [](const std::vector<Matrix>& p) { return std::abs(p[0](0, 0)); };
  const auto ga = finite_diff_grad(abs_loss, {Matrix::Zero(1, 1)}, 1e-5);
  CHECK(ga[0](0, 0) == 0.0);

  CHECK_THROWS_AS(finite_diff_grad(square_loss, {Matrix::Ones(1, 1)}, 0.0),
                  std::invalid_argument);
  const auto nan_loss = [](const std::vector<Matrix>&) {
    return std::numeric_limits<scalar_t>::quiet_NaN();
  };
  CHECK_THROWS_AS(finite_diff_grad(nan_loss, {Matrix::Ones(1, 1)}, 1e-5), NumericalError);
}

TEST_CASE("weight JSON round-trips exactly") {
  const MlpNetwork net = mlp_init(3, {5, 4}, 2, 99);
  const auto path = std::filesystem::temp_directory_path() / "equiaug_mlp_test.json";
  save_mlp(net, path);
  const MlpNetwork back = load_mlp(path);
  REQUIRE(back.layers.size() == net.layers.size());
  CHECK(back.input_dim == net.input_dim);
  CHECK(back.output_dim == net.output_dim);
  for (std::size_t k = 0; k < net.layers.size(); ++k) {
    CHECK(back.layers[k].w == net.layers[k].w);
    CHECK(back.layers[k].b == net.layers[k].b);
    CHECK(back.layers[k].act == net.layers[k].act);
  }
  std::filesystem::remove(path);
}

TEST_CASE("frozen forward with split input matches whole-input forward") {
  const MlpNetwork net = mlp_init(6, {8}, 4, 31);
  Rng rng(8);
  const Matrix lead = rng.uniform_matrix(5, 4, -1.0, 1.0);
  const Matrix trail = rng.uniform_matrix(5, 2, -1.0, 1.0);
  Matrix whole(5, 6);
  whole.leftCols(4) = lead;
  whole.rightCols(2) = trail;

  Tape t;
  const NodeId out = mlp_forward_frozen(t, net, t.constant(lead), trail);
  CHECK((t.value(out) - mlp_forward(net, whole)).cwiseAbs().maxCoeff() < 1e-12);
}

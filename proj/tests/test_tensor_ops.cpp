#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "spectral/nn.hpp"
#include "spectral/ops.hpp"

using namespace spectral;

TEST_CASE("sinusoidal positional encoding") {
  SUBCASE("position zero interleave") {
    auto pe = ops::sinusoidal_positional_encoding(1, 4);
    CHECK(pe.at(0, 0) == 0.0);
    CHECK(pe.at(0, 1) == 1.0);
    CHECK(pe.at(0, 2) == 0.0);
    CHECK(pe.at(0, 3) == 1.0);
  }
  SUBCASE("row one of a 2x2 table") {
    auto pe = ops::sinusoidal_positional_encoding(2, 2);
    CHECK(pe.at(1, 0) == doctest::Approx(std::sin(1.0)).epsilon(1e-12));
    CHECK(pe.at(1, 1) == doctest::Approx(std::cos(1.0)).epsilon(1e-12));
  }
  SUBCASE("entries bounded by [-1, 1]") {
    auto pe = ops::sinusoidal_positional_encoding(37, 10);
    for (std::size_t i = 0; i < pe.size(); ++i) {
      CHECK(pe[i] <= 1.0);
      CHECK(pe[i] >= -1.0);
    }
  }
  SUBCASE("odd model_dim rejected") {
    CHECK_THROWS_AS(ops::sinusoidal_positional_encoding(4, 5), ValidationError);
  }
  SUBCASE("deterministic") {
    auto a = ops::sinusoidal_positional_encoding(8, 6);
    auto b = ops::sinusoidal_positional_encoding(8, 6);
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);
  }
}

TEST_CASE("softmax vector") {
  SUBCASE("symmetry") {
    auto s = ops::softmax({0.0, 0.0});
    CHECK(s[0] == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(s[1] == doctest::Approx(0.5).epsilon(1e-15));
  }
  SUBCASE("shift invariance for constant vectors") {
    for (double c : {-17.0, 0.0, 3.25, 901.0}) {
      auto s = ops::softmax({c, c, c, c});
      for (double x : s) CHECK(x == doctest::Approx(0.25).epsilon(1e-13));
    }
  }
  SUBCASE("direct evaluation") {
    auto s = ops::softmax({1.0, 2.0});
    CHECK(s[0] == doctest::Approx(0.2689414213699951).epsilon(1e-12));
    CHECK(s[1] == doctest::Approx(0.7310585786300049).epsilon(1e-12));
  }
  SUBCASE("entries positive, sum one") {
    auto s = ops::softmax({-4.0, 2.0, 0.5, 11.0, -0.25});
    double sum = 0.0;
    for (double x : s) {
      CHECK(x > 0.0);
      sum += x;
    }
    CHECK(std::abs(sum - 1.0) < 1e-12);
  }
  SUBCASE("shift invariance on random vector") {
    std::vector<double> v = {0.3, -1.2, 2.2, 0.0};
    auto a = ops::softmax(v);
    for (auto& x : v) x += 7.5;
    auto b = ops::softmax(v);
    for (std::size_t i = 0; i < v.size(); ++i)
      CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-12));
  }
  SUBCASE("empty rejected") {
    CHECK_THROWS_AS(ops::softmax({}), ValidationError);
  }
}

TEST_CASE("scaled sigmoid") {
  CHECK(ops::scaled_sigmoid_value(0.0) == doctest::Approx(45.025).epsilon(1e-13));
  CHECK(std::abs(ops::scaled_sigmoid_value(-30.0) - 0.05) < 1e-10);
  CHECK(std::abs(ops::scaled_sigmoid_value(30.0) - 90.0) < 1e-10);
  for (double z : {-700.0, -3.0, 0.0, 5.5, 700.0}) {
    double y = ops::scaled_sigmoid_value(z);
    CHECK(y > 0.05);
    CHECK(y < 90.0);
  }
  CHECK_THROWS_AS(ops::scaled_sigmoid_value(0.0, 2.0, 1.0), ValidationError);
}

TEST_CASE("cosine distance oracle values") {
  CHECK(ops::cosine_distance({1, 2, 3}, {1, 2, 3}) ==
        doctest::Approx(0.0).epsilon(1e-15));
  CHECK(ops::cosine_distance({1, 0}, {0, 1}) == doctest::Approx(1.0));
  CHECK(ops::cosine_distance({1, -2}, {-1, 2}) == doctest::Approx(2.0));
  // invariance under positive scaling
  CHECK(ops::cosine_distance({0.2, 0.7, -0.1}, {1.0, 0.3, 0.4}) ==
        doctest::Approx(
            ops::cosine_distance({2.0, 7.0, -1.0}, {0.5, 0.15, 0.2}))
            .epsilon(1e-12));
  CHECK_THROWS_AS(ops::cosine_distance({0, 0}, {1, 0}), ValidationError);
}

namespace {

// Hand-unrolled single-head attention for the L=2, d=2 oracle.
void attention_oracle_2x2(const double x[2][2], double out[2][2],
                          double weights[2][2]) {
  double scale = 1.0 / std::sqrt(2.0);
  double s[2][2];
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j)
      s[i][j] = (x[i][0] * x[j][0] + x[i][1] * x[j][1]) * scale;
  for (int i = 0; i < 2; ++i) {
    double mx = std::max(s[i][0], s[i][1]);
    double e0 = std::exp(s[i][0] - mx), e1 = std::exp(s[i][1] - mx);
    weights[i][0] = e0 / (e0 + e1);
    weights[i][1] = e1 / (e0 + e1);
    for (int j = 0; j < 2; ++j)
      out[i][j] = weights[i][0] * x[0][j] + weights[i][1] * x[1][j];
  }
}

void set_identity(const Linear& lin) {
  auto W = lin.weight();
  std::size_t n = W->value.rows();
  W->value.fill(0.0);
  for (std::size_t i = 0; i < n; ++i) W->value.at(i, i) = 1.0;
  lin.bias()->value.fill(0.0);
}

}  // namespace

TEST_CASE("multi-head self-attention") {
  SUBCASE("single token attends to itself") {
    ParameterSet params;
    auto rng = make_rng(7);
    EncoderLayerConfig cfg{4, 2, 2, 8, 0.0};
    TransformerEncoderLayer layer(params, "l", cfg, rng);
    auto x = make_leaf(Tensor::from_matrix(1, 4, {0.3, -1.0, 0.5, 2.0}));
    Tensor w;
    auto y = layer.attention(x, 1, 1, &w);
    CHECK(w.rows() == 2);  // one row per head
    CHECK(w.at(0, 0) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(w.at(1, 0) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(y->value.rows() == 1);
    CHECK(y->value.cols() == 4);
  }

  SUBCASE("attention rows sum to one") {
    ParameterSet params;
    auto rng = make_rng(11);
    EncoderLayerConfig cfg{8, 4, 2, 16, 0.0};
    TransformerEncoderLayer layer(params, "l", cfg, rng);
    std::normal_distribution<double> g(0.0, 1.0);
    Tensor xin({6 * 2, 8});
    for (std::size_t i = 0; i < xin.size(); ++i) xin[i] = g(rng);
    Tensor w;
    layer.attention(make_leaf(xin), 2, 6, &w);
    for (std::size_t r = 0; r < w.rows(); ++r) {
      double s = 0.0;
      for (std::size_t c = 0; c < w.cols(); ++c) s += w.at(r, c);
      CHECK(std::abs(s - 1.0) < 1e-12);
    }
  }

  SUBCASE("permutation equivariance without positional encoding") {
    ParameterSet params;
    auto rng = make_rng(13);
    EncoderLayerConfig cfg{6, 3, 2, 12, 0.0};
    TransformerEncoderLayer layer(params, "l", cfg, rng);
    std::normal_distribution<double> g(0.0, 1.0);
    Tensor xin({4, 6});
    for (std::size_t i = 0; i < xin.size(); ++i) xin[i] = g(rng);
    auto y = layer.attention(make_leaf(xin), 1, 4);
    // reverse the row order
    Tensor xperm({4, 6});
    for (std::size_t i = 0; i < 4; ++i)
      for (std::size_t j = 0; j < 6; ++j) xperm.at(i, j) = xin.at(3 - i, j);
    auto yperm = layer.attention(make_leaf(xperm), 1, 4);
    for (std::size_t i = 0; i < 4; ++i)
      for (std::size_t j = 0; j < 6; ++j)
        CHECK(yperm->value.at(i, j) ==
              doctest::Approx(y->value.at(3 - i, j)).epsilon(1e-12));
  }

  SUBCASE("hand-unrolled oracle at L=2, d=2 with identity projections") {
    ParameterSet params;
    auto rng = make_rng(17);
    EncoderLayerConfig cfg{2, 1, 2, 4, 0.0};
    TransformerEncoderLayer layer(params, "l", cfg, rng);
    set_identity(layer.query_proj());
    set_identity(layer.key_proj());
    set_identity(layer.value_proj());
    set_identity(layer.out_proj());
    double xr[2][2] = {{1.0, 0.0}, {0.0, 1.0}};
    auto x = make_leaf(Tensor::from_matrix(2, 2, {1, 0, 0, 1}));
    Tensor w;
    auto y = layer.attention(x, 1, 2, &w);
    double expect[2][2], ew[2][2];
    attention_oracle_2x2(xr, expect, ew);
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) {
        CHECK(y->value.at(i, j) == doctest::Approx(expect[i][j]).epsilon(1e-14));
        CHECK(w.at(i, j) == doctest::Approx(ew[i][j]).epsilon(1e-14));
      }
  }
}

TEST_CASE("transformer encoder layer") {
  ParameterSet params;
  auto rng = make_rng(23);
  EncoderLayerConfig cfg{8, 2, 4, 16, 0.2};
  TransformerEncoderLayer layer(params, "enc", cfg, rng);
  std::normal_distribution<double> g(0.0, 1.0);
  Tensor xin({5, 8});
  for (std::size_t i = 0; i < xin.size(); ++i) xin[i] = g(rng);

  SUBCASE("inference determinism and shape preservation") {
    ForwardCtx eval{false, nullptr};
    auto a = layer.forward(make_leaf(xin), 1, 5, eval);
    auto b = layer.forward(make_leaf(xin), 1, 5, eval);
    CHECK(a->value.rows() == 5);
    CHECK(a->value.cols() == 8);
    for (std::size_t i = 0; i < a->value.size(); ++i)
      CHECK(a->value[i] == b->value[i]);  // bitwise identical
  }

  SUBCASE("dropout active only in training mode") {
    auto tr1 = make_rng(1), tr2 = make_rng(2);
    ForwardCtx t1{true, &tr1}, t2{true, &tr2};
    auto a = layer.forward(make_leaf(xin), 1, 5, t1);
    auto b = layer.forward(make_leaf(xin), 1, 5, t2);
    bool differs = false;
    for (std::size_t i = 0; i < a->value.size(); ++i)
      if (a->value[i] != b->value[i]) differs = true;
    CHECK(differs);
  }
}

TEST_CASE("batch norm eval mode is an affine map of running stats") {
  ParameterSet params;
  BatchNorm1d bn(params, "bn", 3);
  params.at("bn.run_mean")->value = Tensor::from_vector({1.0, -2.0, 0.5});
  params.at("bn.run_var")->value = Tensor::from_vector({4.0, 1.0, 0.25});
  params.at("bn.gamma")->value = Tensor::from_vector({2.0, 1.0, 3.0});
  params.at("bn.beta")->value = Tensor::from_vector({0.0, 1.0, -1.0});
  auto x = make_leaf(Tensor::from_matrix(2, 3, {1, -2, 0.5, 3, 0, 1.5}));
  auto y = bn.forward(x, false);
  // row 0 equals the running mean -> output is exactly beta
  CHECK(y->value.at(0, 0) == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(y->value.at(0, 1) == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(y->value.at(0, 2) == doctest::Approx(-1.0).epsilon(1e-9));
  // deterministic affine: manual recomputation
  CHECK(y->value.at(1, 0) ==
        doctest::Approx(2.0 * (3.0 - 1.0) / std::sqrt(4.0 + 1e-5)).epsilon(1e-9));
}

TEST_CASE("loss oracle values") {
  SUBCASE("huber per-sample branches") {
    auto p1 = make_leaf(Tensor::from_vector({0.5}), true);
    CHECK(ops::huber_loss(p1, Tensor::from_vector({0.0}), 1.0)->scalar() ==
          doctest::Approx(0.125).epsilon(1e-15));
    auto p2 = make_leaf(Tensor::from_vector({2.0}), true);
    CHECK(ops::huber_loss(p2, Tensor::from_vector({0.0}), 1.0)->scalar() ==
          doctest::Approx(1.5).epsilon(1e-15));
    auto p3 = make_leaf(Tensor::from_vector({1.0}), true);
    CHECK(ops::huber_loss(p3, Tensor::from_vector({0.0}), 1.0)->scalar() ==
          doctest::Approx(0.5).epsilon(1e-15));
  }
  SUBCASE("smooth l1 branches at delta 0.1") {
    auto a0 = make_leaf(Tensor::from_vector({1.0}), true);
    CHECK(ops::smooth_l1_loss(a0, Tensor::from_vector({1.0}))->scalar() == 0.0);
    auto a1 = make_leaf(Tensor::from_vector({0.05}), true);
    CHECK(ops::smooth_l1_loss(a1, Tensor::from_vector({0.0}))->scalar() ==
          doctest::Approx(0.0125).epsilon(1e-15));
    auto a2 = make_leaf(Tensor::from_vector({1.0}), true);
    CHECK(ops::smooth_l1_loss(a2, Tensor::from_vector({0.0}))->scalar() ==
          doctest::Approx(0.95).epsilon(1e-15));
  }
  SUBCASE("kl of batch softmax") {
    // softmax of log-probabilities recovers the probabilities
    Tensor t = Tensor::from_vector({std::log(0.5), std::log(0.5)});
    auto s = make_leaf(
        Tensor::from_vector({std::log(0.9), std::log(0.1)}), true);
    double kl = ops::kl_batch_softmax(t, s)->scalar();
    CHECK(kl == doctest::Approx(0.5 * std::log(0.5 / 0.9) +
                                0.5 * std::log(0.5 / 0.1))
                    .epsilon(1e-12));
    // identical predictions -> zero
    auto same = make_leaf(Tensor::from_vector({0.8, -0.2, 0.1}), true);
    CHECK(ops::kl_batch_softmax(same->value, same)->scalar() ==
          doctest::Approx(0.0).epsilon(1e-15));
    // degenerate batch rejected
    auto one = make_leaf(Tensor::from_vector({1.0}), true);
    CHECK_THROWS_AS(ops::kl_batch_softmax(Tensor::from_vector({1.0}), one),
                    ValidationError);
  }
  SUBCASE("huber continuity at the threshold") {
    double eps = 1e-9;
    auto lo = make_leaf(Tensor::from_vector({1.0 - eps}), true);
    auto hi = make_leaf(Tensor::from_vector({1.0 + eps}), true);
    Tensor zero = Tensor::from_vector({0.0});
    double below = ops::huber_loss(lo, zero, 1.0)->scalar();
    double above = ops::huber_loss(hi, zero, 1.0)->scalar();
    CHECK(std::abs(below - above) < 1e-8);
    // derivative continuity: grad approaches delta from both sides
    backward(ops::huber_loss(lo, zero, 1.0));
    backward(ops::huber_loss(hi, zero, 1.0));
    CHECK(std::abs(lo->grad[0] - hi->grad[0]) < 1e-8);
  }
}

TEST_CASE("scaled sigmoid keeps outputs strictly inside the range") {
  auto x = make_leaf(Tensor::from_vector({-1e6, -30, 0, 30, 1e6}), true);
  auto y = ops::scaled_sigmoid(x, 0.05, 90.0);
  for (std::size_t i = 0; i < y->value.size(); ++i) {
    CHECK(y->value[i] > 0.05);
    CHECK(y->value[i] < 90.0);
  }
}

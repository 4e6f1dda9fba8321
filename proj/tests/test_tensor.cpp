#include <doctest.h>

#include <cmath>
#include <limits>

#include "oracles.hpp"
#include "rnl/ops.hpp"
#include "rnl/random.hpp"

using namespace rnl;

TEST_SUITE("tensor-core") {
  TEST_CASE("shape invariants are enforced on construction") {
    CHECK_THROWS_AS(Tensor<double>(Shape{2, 0}), DimensionError);
    CHECK_THROWS_AS(Tensor<double>(Shape{}), DimensionError);
    CHECK_THROWS_AS(Tensor<double>(Shape{2, 2}, std::vector<double>{1, 2, 3}), DimensionError);
    Tensor<float> t({2, 3, 4});
    CHECK(t.size() == 24);
    CHECK(element_count(t.shape()) == t.size());
  }

  TEST_CASE("flatten and unflatten round trip bit-exactly") {
    const auto x = oracle::random_clip(2, 3, 4, 5, 1);
    const Tensor<double> flat = x.flatten();
    CHECK(flat.shape() == Shape{24, 5});
    CHECK(FeatureClip<double>::unflatten(flat, 2, 3, 4) == x);
    CHECK_THROWS_AS(FeatureClip<double>::unflatten(flat, 2, 3, 5), DimensionError);
  }

  TEST_CASE("matmul small cases") {
    const Tensor<double> eye({2, 2}, {1, 0, 0, 1});
    const Tensor<double> m({2, 2}, {1, 2, 3, 4});
    CHECK(matmul(eye, m) == m);
    const Tensor<double> proj({2, 2}, {1, 0, 0, 0});
    const Tensor<double> b({2, 2}, {5, 6, 7, 8});
    CHECK(matmul(proj, b) == Tensor<double>({2, 2}, {5, 6, 0, 0}));
  }

  TEST_CASE("matmul matches the triple loop") {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      Rng rng(seed);
      const auto a = random_uniform<double>({3, 4}, rng);
      const auto b = random_uniform<double>({4, 2}, rng);
      CHECK(oracle::max_rel_err(matmul(a, b), oracle::matmul(a, b)) <= 1e-12);
    }
  }

  TEST_CASE("matmul shape mismatch names both shapes") {
    const Tensor<double> a({2, 3}), b({2, 3});
    try {
      (void)matmul(a, b);
      FAIL("expected a dimension error");
    } catch (const DimensionError& e) {
      const std::string msg = e.what();
      CHECK(msg.find("(2,3)") != std::string::npos);
    }
  }

  TEST_CASE("matmul is bilinear") {
    Rng rng(3);
    const auto a = random_uniform<double>({4, 5}, rng);
    const auto a2 = random_uniform<double>({4, 5}, rng);
    const auto b = random_uniform<double>({5, 3}, rng);
    CHECK(oracle::max_rel_err(matmul(add(a, a2), b), add(matmul(a, b), matmul(a2, b))) <= 1e-10);
  }

  TEST_CASE("softmax rows") {
    const auto u = softmax_rows(Tensor<double>({1, 3}, {0, 0, 0}));
    for (double v : u.data()) CHECK(v == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
    const auto big = softmax_rows(Tensor<double>({1, 2}, {1000, 0}));
    CHECK(big[0] == 1.0);
    CHECK(big[1] == doctest::Approx(0.0));
    CHECK(all_finite(big));
  }

  TEST_CASE("softmax rows sum to one including logits of magnitude 1e3") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      Rng rng(seed);
      const double mag = seed % 2 ? 1e3 : 3.0;
      const auto a = random_uniform<double>({5, 7}, rng, -mag, mag);
      const auto s64 = softmax_rows(a);
      const auto s32 = softmax_rows(a.cast<float>());
      for (std::size_t i = 0; i < 5; ++i) {
        double r64 = 0, r32 = 0;
        for (std::size_t j = 0; j < 7; ++j) {
          r64 += s64.at(i, j);
          r32 += s32.at(i, j);
          CHECK(s64.at(i, j) >= 0.0);
          CHECK(s64.at(i, j) <= 1.0);
        }
        CHECK(std::abs(r64 - 1.0) <= 1e-12);
        CHECK(std::abs(r32 - 1.0) <= 1e-6);
      }
    }
  }

  TEST_CASE("elementwise ops and broadcasting") {
    CHECK(relu(Tensor<double>({3}, {-1, 0, 2})) == Tensor<double>({3}, {0, 0, 2}));
    Rng rng(4);
    const auto a = random_uniform<double>({6, 4}, rng);
    const auto row = random_uniform<double>({1, 4}, rng);
    const auto sum = add(a, row);
    for (std::size_t i = 0; i < 6; ++i) {
      for (std::size_t j = 0; j < 4; ++j) CHECK(sum.at(i, j) == a.at(i, j) + row.at(0, j));
    }
    CHECK(hadamard(a, Tensor<double>({6, 4}, 1.0)) == a);
    CHECK(add(a, Tensor<double>({1, 4}, 0.0)) == a);
    CHECK(add(a, Tensor<double>({6, 4}, 0.0)) == a);
    CHECK(scale(a, 2.0)[5] == 2.0 * a[5]);
    CHECK(transpose2d(a).at(2, 5) == a.at(5, 2));
    CHECK_THROWS_AS(add(a, Tensor<double>({6, 3})), DimensionError);
    CHECK_THROWS_AS(hadamard(a, Tensor<double>({4, 6})), DimensionError);
    CHECK(broadcast_shape({1, 4}, {6, 1}) == Shape{6, 4});
  }

  TEST_CASE("conv1x1") {
    const auto x = oracle::random_clip(2, 3, 3, 4, 5);
    Tensor<double> eye({4, 4});
    for (std::size_t i = 0; i < 4; ++i) eye.at(i, i) = 1.0;
    CHECK(conv1x1(x, eye) == x);

    const Tensor<double> bias({3}, {0.5, -1.0, 2.0});
    const auto b = conv1x1(x, Tensor<double>({4, 3}), std::optional<Tensor<double>>(bias));
    for (std::size_t i = 0; i < x.positions(); ++i) {
      for (std::size_t k = 0; k < 3; ++k) CHECK(b.tensor()[i * 3 + k] == bias[k]);
    }

    Rng rng(6);
    const auto w = random_uniform<double>({4, 3}, rng);
    const auto y = conv1x1(x, w);
    CHECK(oracle::max_rel_err(y.flatten(), oracle::matmul(x.flatten(), w)) <= 1e-12);
    CHECK_THROWS_AS(conv1x1(x, Tensor<double>({3, 3})), DimensionError);
  }

  TEST_CASE("batch norm inference") {
    const auto x = oracle::random_clip(2, 2, 2, 3, 7);
    BatchNormParams<double> id = BatchNormParams<double>::identity(3);
    id.eps = 0.0;
    CHECK(batch_norm_inference(x, id) == x);

    BatchNormParams<double> zero = BatchNormParams<double>::identity(3, 0.0);
    zero.beta = Tensor<double>({3}, {1, 2, 3});
    const auto out = batch_norm_inference(x, zero);
    for (std::size_t i = 0; i < x.positions(); ++i) {
      for (std::size_t c = 0; c < 3; ++c) CHECK(out.tensor()[i * 3 + c] == zero.beta[c]);
    }

    Rng rng(8);
    BatchNormParams<double> bn{random_uniform<double>({3}, rng), random_uniform<double>({3}, rng),
                               random_uniform<double>({3}, rng), random_uniform<double>({3}, rng, 0.1, 2.0), 1e-5};
    const auto got = batch_norm_inference(x, bn);
    for (std::size_t i = 0; i < x.positions(); ++i) {
      for (std::size_t c = 0; c < 3; ++c) {
        const double want = (x.tensor()[i * 3 + c] - bn.mean[c]) / std::sqrt(bn.var[c] + bn.eps) * bn.gamma[c] + bn.beta[c];
        CHECK(std::abs(got.tensor()[i * 3 + c] - want) <= 1e-6 * std::max(1.0, std::abs(want)));
      }
    }

    bn.var[1] = -0.5;
    CHECK_THROWS_AS(batch_norm_inference(x, bn), ArgumentError);
  }

  TEST_CASE("float storage accumulates in double") {
    // 1 + 1e-8 * 1e4 terms: a float accumulator would lose every small term.
    Tensor<float> a({1, 10001}, 1e-8f);
    a[0] = 1.0f;
    Tensor<float> b({10001, 1}, 1.0f);
    CHECK(matmul(a, b)[0] == doctest::Approx(1.0001).epsilon(1e-6));
  }

  TEST_CASE("library ops reject non-finite results") {
    const Tensor<double> huge({1, 1}, {1e200});
    CHECK_THROWS_AS(matmul(huge, huge), ContractError);
  }
}

#include <doctest.h>

#include <cmath>
#include <limits>

#include "oracles.hpp"
#include "rnl/similarity.hpp"

using namespace rnl;

namespace {

double row_sum(const Tensor<double>& w, std::size_t i) {
  double s = 0.0;
  for (std::size_t j = 0; j < w.extent(1); ++j) s += w.at(i, j);
  return s;
}

}  // namespace

TEST_SUITE("similarity") {
  TEST_CASE("zero embeddings give uniform gaussian weights") {
    const auto a = normalize(affinity(Tensor<double>({5, 3}, 0.0), SimilarityForm::gaussian));
    for (double v : a.w.data()) CHECK(v == doctest::Approx(0.2).epsilon(1e-15));
  }

  TEST_CASE("cosine of antiparallel and orthonormal rows") {
    const Tensor<double> e({2, 2}, {1, 2, -1, -2});
    const auto a = affinity(e, SimilarityForm::cosine);
    CHECK(a.w.at(0, 1) == 0.0);
    CHECK(a.w.at(0, 0) == doctest::Approx(1.0).epsilon(1e-15));

    const Tensor<double> eye({3, 3}, {1, 0, 0, 0, 1, 0, 0, 0, 1});
    const auto o = affinity(eye, SimilarityForm::cosine);
    for (std::size_t i = 0; i < 3; ++i)
      for (std::size_t j = 0; j < 3; ++j) CHECK(o.w.at(i, j) == (i == j ? 1.0 : 0.0));
  }

  TEST_CASE("cosine treats zero rows as unrelated") {
    const Tensor<double> e({2, 2}, {0, 0, 1, 1});
    const auto a = affinity(e, SimilarityForm::cosine);
    CHECK(a.w.at(0, 0) == 0.0);
    CHECK(a.w.at(0, 1) == 0.0);
  }

  TEST_CASE("dot affinity matches pairwise inner products") {
    Rng rng(31);
    const auto e = random_uniform<double>({12, 5}, rng);
    const auto a = affinity(e, SimilarityForm::dot);
    CHECK(oracle::max_rel_err(a.w, oracle::matmul(e, transpose2d(e))) <= 1e-12);
    const auto n = normalize(a);
    for (std::size_t i = 0; i < n.w.size(); ++i) CHECK(n.w[i] == a.w[i] / 12.0);
  }

  TEST_CASE("normalizing twice is a contract error") {
    const auto a = normalize(affinity(Tensor<double>({4, 2}, 1.0), SimilarityForm::dot));
    CHECK_THROWS_AS(normalize(a), ContractError);
  }

  TEST_CASE("constant embeddings with P = 4 give 0.25 for gaussian") {
    const auto a = normalize(affinity(Tensor<double>({4, 3}, 0.7), SimilarityForm::gaussian));
    for (double v : a.w.data()) CHECK(v == doctest::Approx(0.25).epsilon(1e-15));
  }

  TEST_CASE("gaussian rows sum to one at large logits") {
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
      Rng rng(seed);
      const double mag = seed % 3 == 0 ? 30.0 : 1.0;  // logits up to c * mag^2
      const auto e = random_uniform<double>({9, 4}, rng, -mag, mag);
      const auto a = normalize(affinity(e, SimilarityForm::gaussian));
      CHECK(all_finite(a.w));
      for (std::size_t i = 0; i < 9; ++i) CHECK(std::abs(row_sum(a.w, i) - 1.0) <= 1e-12);
    }
  }

  TEST_CASE("raw matrices are symmetric") {
    Rng rng(32);
    const auto e = random_uniform<double>({10, 3}, rng);
    for (auto form : {SimilarityForm::gaussian, SimilarityForm::dot, SimilarityForm::cosine}) {
      const auto a = affinity(e, form);
      for (std::size_t i = 0; i < 10; ++i)
        for (std::size_t j = 0; j < 10; ++j) CHECK(a.w.at(i, j) == a.w.at(j, i));
    }
  }

  TEST_CASE("cosine range and scale invariance") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      Rng rng(seed + 100);
      auto e = random_uniform<double>({8, 4}, rng);
      const auto a = affinity(e, SimilarityForm::cosine);
      for (double v : a.w.data()) {
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
      }
      for (std::size_t i = 0; i < 8; ++i) {
        const double k = rng.uniform(0.01, 100.0);
        for (std::size_t c = 0; c < 4; ++c) e.at(i, c) *= k;
      }
      CHECK(oracle::max_rel_err(affinity(e, SimilarityForm::cosine).w, a.w, 1e-12) <= 1e-12);
    }
  }

  TEST_CASE("attention rows") {
    Rng rng(33);
    const auto a = normalize(affinity(random_uniform<double>({12, 3}, rng), SimilarityForm::gaussian));
    const auto row = attention_row(a, 5, {2, 3, 2});
    CHECK(row.tensor().shape() == Shape{2, 3, 2, 1});
    for (std::size_t j = 0; j < 12; ++j) CHECK(row.tensor()[j] == a.w.at(5, j));
    CHECK_THROWS_AS(attention_row(a, 12, {2, 3, 2}), ArgumentError);
    CHECK_THROWS_AS(attention_row(a, 0, {2, 2, 2}), DimensionError);
  }

  TEST_CASE("non-finite embeddings are rejected") {
    Tensor<double> e({3, 2}, 1.0);
    e[3] = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(affinity(e, SimilarityForm::dot), ArgumentError);
    e[3] = std::numeric_limits<double>::infinity();
    CHECK_THROWS_AS(affinity(e, SimilarityForm::gaussian), ArgumentError);
    CHECK_THROWS_AS(affinity(Tensor<double>({3}), SimilarityForm::dot), DimensionError);
    CHECK(parse_similarity_form("cosine") == SimilarityForm::cosine);
    CHECK_THROWS_AS(parse_similarity_form("l2"), ArgumentError);
  }
}

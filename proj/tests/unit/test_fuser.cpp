#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "airtrack/fuser.hpp"
#include "airtrack/rng.hpp"

namespace airtrack {
namespace {

FusionConfig two_way(double wk, double wv) {
  FusionConfig cfg;
  cfg.weights = {{"kin", wk}, {"vis", wv}};
  cfg.normalize_weights();
  return cfg;
}

TEST(Normalize, ExpNegScaledAtZeroIsOne) {
  EXPECT_EQ(normalize(0.0, {NormalizerKind::kExpNegScaled, 3.0}), 1.0);
}

TEST(Normalize, LikelihoodRatioMidpoint) {
  EXPECT_EQ(normalize(2.5, {NormalizerKind::kLikelihoodRatio, 2.5}), 0.5);
}

TEST(Normalize, ReferenceScalesAtGate) {
  const NormalizerSpec spec{NormalizerKind::kLikelihoodRatio, 100.0, true};
  EXPECT_EQ(normalize(RawScore{0.01, 0.01}, spec), 0.5);
  EXPECT_EQ(normalize(RawScore{100.0, std::nullopt}, spec), 0.5);
}

TEST(Normalize, IdentityClamps) {
  EXPECT_EQ(normalize(1.7, {NormalizerKind::kIdentity}), 1.0);
  EXPECT_EQ(normalize(-0.2, {NormalizerKind::kIdentity}), 0.0);
  EXPECT_EQ(normalize(0.3, {NormalizerKind::kIdentity}), 0.3);
}

TEST(Normalize, DistanceMonotone) {
  Rng rng(2);
  const NormalizerSpec spec{NormalizerKind::kExpNegScaled, 7.0};
  for (int i = 0; i < 1000; ++i) {
    const double a = rng.uniform(0, 50), b = rng.uniform(0, 50);
    if (a <= b) {
      EXPECT_GE(normalize(a, spec), normalize(b, spec));
    }
    const double v = normalize(a, spec);
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
  }
}

TEST(Normalize, RejectsNonFinite) {
  EXPECT_THROW(normalize(std::numeric_limits<double>::quiet_NaN(), {NormalizerKind::kExpNegScaled}), Error);
  EXPECT_THROW(normalize(std::numeric_limits<double>::infinity(), {NormalizerKind::kIdentity}), Error);
  EXPECT_THROW(normalize(-1.0, {NormalizerKind::kLikelihoodRatio}), Error);
}

TEST(Fuse, EqualWeightsGiveArithmeticMean) {
  EXPECT_DOUBLE_EQ(fuse({{"kin", 0.8}, {"vis", 0.6}}, two_way(0.5, 0.5)), 0.7);
  EXPECT_EQ(fuse({{"kin", 1.0}, {"vis", 1.0}}, two_way(1, 1)), 1.0);
}

TEST(Fuse, DegenerateWeighting) {
  EXPECT_EQ(fuse({{"kin", 0.37}, {"vis", 0.9}}, two_way(1, 0)), 0.37);
}

TEST(Fuse, MissingComparatorThrows) {
  try {
    fuse({{"kin", 0.5}}, two_way(0.5, 0.5));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kMissingComparator);
  }
}

TEST(Fuse, ConvexAndPermutationInvariant) {
  Rng rng(12);
  for (int i = 0; i < 500; ++i) {
    const double a = rng.uniform(), b = rng.uniform(), c = rng.uniform();
    const double wa = rng.uniform(0, 3), wb = rng.uniform(0, 3), wc = rng.uniform(0.01, 3);
    FusionConfig cfg;
    cfg.weights = {{"a", wa}, {"b", wb}, {"c", wc}};
    cfg.normalize_weights();
    const double f = fuse({{"a", a}, {"b", b}, {"c", c}}, cfg);
    EXPECT_GE(f, std::min({a, b, c}) - 1e-15);
    EXPECT_LE(f, std::max({a, b, c}) + 1e-15);
    FusionConfig renamed;
    renamed.weights = {{"z", wa}, {"y", wb}, {"x", wc}};
    renamed.normalize_weights();
    EXPECT_NEAR(fuse({{"z", a}, {"y", b}, {"x", c}}, renamed), f, 1e-15);
  }
}

TEST(FusionConfig, WeightValidation) {
  FusionConfig cfg;
  cfg.weights = {{"a", 0.0}};
  EXPECT_THROW(cfg.normalize_weights(), Error);
  cfg.weights = {{"a", -1.0}, {"b", 2.0}};
  EXPECT_THROW(cfg.normalize_weights(), Error);
  cfg.weights = {{"a", 1.0}, {"b", 3.0}};
  cfg.normalize_weights();
  EXPECT_DOUBLE_EQ(cfg.weights["a"], 0.25);
}

TEST(FusedLogScore, EndpointsAndMonotone) {
  EXPECT_EQ(fused_log_score(1.0, 1e-6), 0.0);
  EXPECT_EQ(fused_log_score(0.0, 1e-6), std::log(1e-6));
  Rng rng(6);
  for (int i = 0; i < 500; ++i) {
    const double a = rng.uniform(), b = rng.uniform();
    if (a <= b) {
      EXPECT_LE(fused_log_score(a, 1e-6), fused_log_score(b, 1e-6));
    }
  }
}

TEST(NormalizerKind, RoundTripsThroughText) {
  for (auto k : {NormalizerKind::kLikelihoodRatio, NormalizerKind::kExpNegScaled, NormalizerKind::kIdentity}) {
    EXPECT_EQ(parse_normalizer_kind(to_string(k)), k);
  }
  EXPECT_THROW(parse_normalizer_kind("softmax"), Error);
}

}  // namespace
}  // namespace airtrack

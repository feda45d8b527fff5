#include <gtest/gtest.h>

#include <cmath>

#include "surfcomm/qec.hpp"
#include "support/qec_oracle.hpp"

using namespace surfcomm;

using oracle::scan_distance;

TEST(RequiredLogicalRate, KnownValues) {
  EXPECT_EQ(required_logical_rate(1e12, 0.5), 0.5e-12);
  EXPECT_EQ(required_logical_rate(1, 0.5), 0.5);
  EXPECT_NEAR(required_logical_rate(1e6, 0.9), 1e-7, 1e-22);
}

TEST(RequiredLogicalRate, RejectsDegenerateInputs) {
  EXPECT_THROW(required_logical_rate(0, 0.5), InvalidArgument);
  EXPECT_THROW(required_logical_rate(10, 0.0), InvalidArgument);
  EXPECT_THROW(required_logical_rate(10, 1.0), InvalidArgument);
}

TEST(ChooseDistance, FixedPointOfModel) {
  QecConfig cfg;
  const double p = cfg.p_th / 10;
  EXPECT_EQ(choose_distance(cfg, p, model_logical_rate(cfg, p, 5)), 5);
  EXPECT_EQ(choose_distance(cfg, p, model_logical_rate(cfg, p, 17)), 17);
}

TEST(ChooseDistance, MatchesLinearScanOracle) {
  QecConfig cfg;
  EXPECT_EQ(choose_distance(cfg, 1e-8, 0.5e-12), scan_distance(cfg.A, cfg.p_th, 1e-8, 0.5e-12));
  EXPECT_EQ(choose_distance(cfg, 1e-8, 0.5e-12), 3);
  EXPECT_EQ(choose_distance(cfg, 1e-3, 0.5e-12), 21);
  EXPECT_EQ(choose_distance(cfg, 1e-5, 0.5e-12), 7);
  for (int i = 0; i < 10; ++i) {
    for (int j = 0; j < 10; ++j) {
      const double p_P = std::pow(10.0, -9.0 + 6.9 * i / 9.0);
      const double p_L = std::pow(10.0, -20.0 + 17.0 * j / 9.0);
      EXPECT_EQ(choose_distance(cfg, p_P, p_L), scan_distance(cfg.A, cfg.p_th, p_P, p_L))
          << p_P << " " << p_L;
    }
  }
}

TEST(ChooseDistance, MonotoneOverGrid) {
  QecConfig cfg;
  for (int i = 0; i < 10; ++i) {
    for (int j = 0; j < 10; ++j) {
      const double p_P = std::pow(10.0, -9.0 + 6.0 * i / 9.0);
      const double p_L = std::pow(10.0, -20.0 + 17.0 * j / 9.0);
      const int d = choose_distance(cfg, p_P, p_L);
      EXPECT_EQ(d % 2, 1);
      EXPECT_GE(d, 3);
      EXPECT_GE(choose_distance(cfg, p_P, p_L * 1e-6), d);
      EXPECT_GE(choose_distance(cfg, p_P * 1.5, p_L), d);
    }
  }
}

TEST(ChooseDistance, ModelStrictlyDecreasesWithDistance) {
  QecConfig cfg;
  for (double p : {1e-9, 1e-6, 1e-3, 9e-3})
    for (int d = 3; d < 40; d += 2)
      EXPECT_LT(model_logical_rate(cfg, p, d + 2), model_logical_rate(cfg, p, d));
}

TEST(ChooseDistance, AtOrAboveThresholdIsUncorrectable) {
  QecConfig cfg;
  EXPECT_THROW(choose_distance(cfg, 1e-2, 1e-10), UncorrectableTechnology);
  EXPECT_THROW(choose_distance(cfg, 0.5, 1e-10), UncorrectableTechnology);
  EXPECT_THROW(choose_distance(cfg, 0.0099999, 1e-300), UncorrectableTechnology);
  // The bracket search must not overshoot a valid distance just below the cap.
  QecConfig capped;
  capped.max_distance = 21;
  EXPECT_EQ(choose_distance(capped, 1e-3, 0.5e-12), 21);
  EXPECT_THROW(choose_distance(capped, 1e-3, 0.5e-13), UncorrectableTechnology);
}

TEST(TileFootprint, PlanarAndDoubleDefect) {
  QecConfig cfg;
  EXPECT_EQ(tile_footprint(cfg, Encoding::Planar, 3), 25);
  EXPECT_EQ(tile_footprint(cfg, Encoding::Planar, 5), 81);
  for (int d = 3; d < 30; d += 2)
    EXPECT_EQ(tile_footprint(cfg, Encoding::DoubleDefect, d),
              2 * tile_footprint(cfg, Encoding::Planar, d));
  EXPECT_THROW(tile_footprint(cfg, Encoding::Planar, 4), InvalidArgument);
}

TEST(FactoryPlan, RatioArithmetic) {
  QecConfig cfg;
  EXPECT_EQ(factory_plan(48, Encoding::DoubleDefect, cfg).magic_factories, 1);
  EXPECT_EQ(factory_plan(48, Encoding::DoubleDefect, cfg).magic_tiles(), 12);
  EXPECT_EQ(factory_plan(1, Encoding::DoubleDefect, cfg).magic_factories, 1);
  EXPECT_EQ(factory_plan(480, Encoding::DoubleDefect, cfg).magic_factories, 10);
  EXPECT_EQ(factory_plan(49, Encoding::DoubleDefect, cfg).magic_factories, 2);
  EXPECT_EQ(factory_plan(480, Encoding::DoubleDefect, cfg).epr_factories, 0);
  EXPECT_EQ(factory_plan(480, Encoding::Planar, cfg).epr_factories, 10);
}

TEST(QecConfig, JsonRoundTripAndPartialOverride) {
  QecConfig c;
  c.A = 0.1;
  c.syndrome_cycle_seconds = 2e-6;
  nlohmann::json j = c;
  auto back = j.get<QecConfig>();
  EXPECT_EQ(back.A, 0.1);
  EXPECT_EQ(back.syndrome_cycle_seconds, 2e-6);
  auto partial = nlohmann::json{{"p_th", 0.02}}.get<QecConfig>();
  EXPECT_EQ(partial.p_th, 0.02);
  EXPECT_EQ(partial.A, QecConfig{}.A);
}

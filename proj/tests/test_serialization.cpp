#include <gtest/gtest.h>

#include "fixtures.hpp"

using namespace predmarket;

TEST(MarketJson, RoundTripIsLossless) {
  Rng rng(1);
  Market m = fixture::random_mixed_market(3, 6, rng);
  m.add(BettingFunction::specialized(BoxDomain{{{0, -INFINITY, 0.1}}}, BettingFunction::constant({0.1, 0.2, 0.7})),
        1.0 / 3.0);
  const auto j = market_to_json(m);
  const Market back = market_from_json(Json::parse(j.dump()));
  ASSERT_EQ(back.size(), m.size());
  EXPECT_EQ(back.class_count(), 3u);
  EXPECT_EQ(back.budgets(), m.budgets());
  for (std::size_t i = 0; i < m.size(); ++i) EXPECT_EQ(to_descriptor(back[i].bettor), to_descriptor(m[i].bettor));
  EXPECT_EQ(market_to_json(back).dump(), j.dump());
}

TEST(MarketJson, KernelReferencesShared) {
  const Dataset train = sample_sinusoid(5, 3);
  const Market m = make_kernel_market(train, {KernelKind::rbf, 0.2});
  const auto j = market_to_json(m);
  EXPECT_EQ(j.at("references").size(), 5u);
  const Market back = market_from_json(j);
  const Dataset probe = sample_sinusoid(20, 4);
  for (const auto& x : probe.instances())
    EXPECT_EQ(solve_price(back, x).price.vector(), solve_price(m, x).price.vector());
}

TEST(MarketJson, RejectsWrongFormatOrVersion) {
  Json j = market_to_json(Market(2));
  j["version"] = 99;
  EXPECT_THROW(market_from_json(j), SpecError);
  j = market_to_json(Market(2));
  j["format"] = "predmarket.forest";
  EXPECT_THROW(market_from_json(j), SpecError);
  EXPECT_THROW(market_from_json(Json::parse(R"({"format":"predmarket.market","version":1})")), SpecError);
}

TEST(ForestJson, RoundTrip) {
  const auto [d, spec] = synth_gaussian_pair(4, 0.2, 120, 5);
  const Forest f = train_forest(d, 6, 2);
  const Forest back = forest_from_json(Json::parse(forest_to_json(f).dump()));
  ASSERT_EQ(back.size(), f.size());
  for (std::size_t t = 0; t < f.size(); ++t) {
    ASSERT_EQ(back[t].nodes().size(), f[t].nodes().size());
    for (std::size_t i = 0; i < f[t].nodes().size(); ++i) {
      const auto &a = f[t].nodes()[i], &b = back[t].nodes()[i];
      EXPECT_EQ(a.feature, b.feature);
      EXPECT_EQ(a.threshold, b.threshold);
      EXPECT_EQ(a.left, b.left);
      EXPECT_EQ(a.right, b.right);
      EXPECT_EQ(a.counts, b.counts);
    }
  }
}

TEST(ForestJson, RejectsBrokenNodeLists) {
  auto j = Json::parse(R"({"format":"predmarket.forest","version":1,"class_count":2,"feature_count":1,
                           "trees":[[{"split":[0,0.5]},{"counts":[1,0]}]]})");
  EXPECT_THROW(forest_from_json(j), SpecError);
  j["trees"] = Json::parse(R"([[{"counts":[1,0]},{"counts":[0,1]}]])");
  EXPECT_THROW(forest_from_json(j), SpecError);
}

TEST(GaussianJson, RoundTrip) {
  const auto [d, spec] = synth_gaussian_pair(3, 0.1, 4, 1);
  const auto j = gaussian_spec_to_json(spec);
  EXPECT_EQ(j.at("mu0"), Json::parse("[0.0,0.0,0.0]"));
  const auto back = gaussian_spec_from_json(Json::parse(j.dump()));
  EXPECT_EQ(back.mu1, spec.mu1);
  EXPECT_EQ(back.dim, 3u);
}

TEST(Descriptor, SeventeenDigitNumbers) {
  EXPECT_EQ(format_number(0.1), "0.10000000000000001");
  EXPECT_EQ(std::strtod(format_number(1.0 / 3.0).c_str(), nullptr), 1.0 / 3.0);
  EXPECT_EQ(format_number(INFINITY), "inf");
  EXPECT_EQ(format_number(-INFINITY), "-inf");
}

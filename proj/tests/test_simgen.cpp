#include "test_support.hpp"

#include <ctpglm/simgen.hpp>

#include <gtest/gtest.h>

using namespace ctpglm;

namespace {

ScenarioConfig base(std::size_t nodes, std::size_t roads, std::size_t periods, std::uint64_t seed)
{
	ScenarioConfig cfg;
	cfg.nodes = nodes;
	cfg.roads = roads;
	cfg.periods = periods;
	cfg.seed = seed;
	return cfg;
}

std::pair<double, double> attack_rate(const Scenario& sc)
{
	double ones = 0, total = 0;
	for (auto r : sc.network.existing_roads())
		for (int y : sc.panel.outcomes[r]) {
			ones += y;
			total += 1;
		}
	return {ones / total, total};
}

} // namespace

TEST(Simgen, ZeroCoefficientsGiveFairCoins)
{
	auto sc = generate_scenario(base(50, 100, 100, 1));
	for (auto r : sc.network.existing_roads())
		for (double p : sc.probabilities[r])
			EXPECT_EQ(p, 0.5);
	auto [rate, n] = attack_rate(sc);
	EXPECT_EQ(n, 10000.0);
	EXPECT_LT(std::abs(rate - 0.5), 3.0 * std::sqrt(0.25 / n));
}

TEST(Simgen, VeryNegativeInterceptGivesNoAttacks)
{
	auto cfg = base(30, 60, 20, 2);
	cfg.truth.mu = -8.0;
	EXPECT_EQ(attack_rate(generate_scenario(cfg)).first, 0.0);
}

TEST(Simgen, NegativeLagSuppressesRepeats)
{
	auto cfg = base(100, 400, 60, 3);
	cfg.truth.tau = {-2.0};
	auto sc = generate_scenario(cfg);
	double after_one = 0, repeats = 0;
	for (auto r : sc.network.existing_roads())
		for (std::size_t t = 1; t < cfg.periods; ++t)
			if (sc.panel.outcomes[r][t - 1] == 1) {
				after_one += 1;
				repeats += sc.panel.outcomes[r][t];
			}
	const double p = 0.02275013194817920720028264;
	ASSERT_GT(after_one, 5000);
	EXPECT_LT(std::abs(repeats / after_one - p), 3.0 * std::sqrt(p * (1 - p) / after_one));
}

TEST(Simgen, ConditionalFrequenciesMatchProbit)
{
	auto cfg = base(60, 200, 50, 4);
	cfg.truth.mu = -0.3;
	cfg.truth.tau = {0.9};
	auto sc = generate_scenario(cfg);
	for (int prev : {0, 1}) {
		double n = 0, ones = 0;
		for (auto r : sc.network.existing_roads())
			for (std::size_t t = 1; t < cfg.periods; ++t)
				if (sc.panel.outcomes[r][t - 1] == prev) {
					n += 1;
					ones += sc.panel.outcomes[r][t];
				}
		double p = normal::cdf(-0.3 + 0.9 * prev);
		EXPECT_LT(std::abs(ones / n - p), 3.0 * std::sqrt(p * (1 - p) / n)) << prev;
	}
}

TEST(Simgen, SameSeedSameScenario)
{
	auto cfg = base(12, 20, 4, 9);
	cfg.truth.alpha = {0.3};
	cfg.truth.gamma = {-0.2};
	cfg.truth.delta = {0.5, 0.1};
	auto a = generate_scenario(cfg), b = generate_scenario(cfg);
	EXPECT_EQ(to_json(a.network).dump(), to_json(b.network).dump());
	EXPECT_EQ(panel_to_csv(a.network, a.panel), panel_to_csv(b.network, b.panel));
	EXPECT_EQ(a.probabilities, b.probabilities);
	cfg.seed = 10;
	auto c = generate_scenario(cfg);
	EXPECT_NE(to_json(a.network).dump(), to_json(c.network).dump());
}

TEST(Simgen, NetworkShapes)
{
	auto cfg = base(20, 19, 1, 5);
	auto sc = generate_scenario(cfg);
	EXPECT_TRUE(is_connected(sc.network));
	EXPECT_EQ(sc.network.road_count(), 19u);
	EXPECT_EQ(sc.network.node_id(0), "n00");
	for (auto r : sc.network.existing_roads()) {
		EXPECT_GE(sc.network.road(r).length, 0.5);
		EXPECT_LE(sc.network.road(r).length, 2.0);
	}
	cfg.family = NetworkFamily::Grid;
	cfg.grid_rows = 3;
	cfg.grid_cols = 4;
	auto grid = generate_scenario(cfg);
	EXPECT_EQ(grid.network.node_count(), 12u);
	EXPECT_EQ(grid.network.road_count(), 3u * 3 + 2 * 4);
	EXPECT_EQ(grid.network.node_id(5), "r1c1");
	EXPECT_THROW(generate_scenario(base(10, 5, 1, 1)), DataError);
	auto sparse = base(30, 29, 1, 1);
	sparse.max_retries = 1;
	EXPECT_THROW(generate_scenario(sparse), DataError);
}

TEST(Simgen, InjectedBetweennessIsAFixedPoint)
{
	auto cfg = base(6, 9, 5, 3);
	cfg.truth.mu = -0.6;
	cfg.truth.delta = {0.8};
	BetweennessInjection inj;
	inj.repair_wait = 3.0;
	cfg.betweenness = inj;
	auto sc = generate_scenario(cfg);
	ASSERT_EQ(sc.betweenness.size(), sc.network.road_count());
	EXPECT_EQ(sc.network.covariate_names().edge_global[0], "canadian_betweenness");
	std::vector<double> p(sc.network.road_count());
	for (auto r : sc.network.existing_roads()) {
		EXPECT_EQ(sc.network.road(r).global[0], sc.betweenness[r]);
		p[r] = sc.probabilities[r][0];
	}
	CanadianBetweennessOptions o;
	o.repair_wait = 3.0;
	auto again = canadian_betweenness(sc.network.with_block_probabilities(p), o).value;
	for (auto r : sc.network.existing_roads())
		EXPECT_NEAR(normal::cdf(-0.6 + 0.8 * again[r]), p[r], 1e-8);
}

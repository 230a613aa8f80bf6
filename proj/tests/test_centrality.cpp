#include "oracles.hpp"
#include "test_support.hpp"

#include <ctpglm/centrality.hpp>

#include <gtest/gtest.h>

#include <random>

using namespace ctpglm;
using testing_support::canonical;

namespace {

RoadNetwork path_graph(std::size_t n)
{
	std::vector<std::string> ids;
	std::vector<std::tuple<std::string, std::string, double>> roads;
	for (std::size_t i = 0; i < n; ++i)
		ids.push_back(std::string(1, static_cast<char>('A' + i)));
	for (std::size_t i = 0; i + 1 < n; ++i)
		roads.emplace_back(ids[i], ids[i + 1], 1.0);
	return oracle::make_network(ids, roads);
}

RoadNetwork cycle4() { return oracle::make_network({"A", "B", "C", "D"}, {{"A", "B", 1}, {"B", "C", 1}, {"C", "D", 1}, {"D", "A", 1}}); }

CanadianBetweennessOptions wait(double xr)
{
	CanadianBetweennessOptions o;
	o.repair_wait = xr;
	return o;
}

} // namespace

TEST(Centrality, Closeness)
{
	auto path = closeness(path_graph(3));
	EXPECT_DOUBLE_EQ(path[1], 1.0);
	EXPECT_DOUBLE_EQ(path[0], 2.0 / 3.0);
	auto star = closeness(oracle::make_network({"H", "A", "B", "C", "D"}, {{"H", "A", 1}, {"H", "B", 1}, {"H", "C", 1}, {"H", "D", 1}}));
	EXPECT_DOUBLE_EQ(star[0], 1.0);
	EXPECT_DOUBLE_EQ(star[1], 4.0 / 7.0);
	auto two = closeness(oracle::make_network({"A", "B"}, {{"A", "B", 5}}));
	EXPECT_DOUBLE_EQ(two[0], 0.2);
	EXPECT_DOUBLE_EQ(two[1], 0.2);
	auto split = oracle::make_network({"A", "B", "C"}, {{"A", "B", 1}});
	try {
		closeness(split);
		FAIL();
	} catch (const DataError& e) {
		EXPECT_NE(std::string(e.what()).find("C"), std::string::npos);
	}
}

TEST(Centrality, NodeBetweenness)
{
	auto path = node_betweenness(path_graph(3));
	EXPECT_DOUBLE_EQ(path[1], 1.0);
	EXPECT_DOUBLE_EQ(path[0], 0.0);
	for (double b : node_betweenness(cycle4()))
		EXPECT_DOUBLE_EQ(b, 1.0 / 6.0);
	for (double b : node_betweenness(oracle::make_network({"A", "B", "C"}, {{"A", "B", 1}, {"B", "C", 1}, {"A", "C", 1}})))
		EXPECT_EQ(b, 0.0);
}

TEST(Centrality, EdgeBetweenness)
{
	auto net = path_graph(4);
	auto eb = edge_betweenness(net);
	EXPECT_DOUBLE_EQ(eb[net.road_index("BC")], 1.0 / 3.0);
	EXPECT_EQ(eb[net.road_index("AB")], 0.0);
	for (double b : edge_betweenness(oracle::make_network({"A", "B", "C"}, {{"A", "B", 1}, {"B", "C", 1}, {"A", "C", 1}})))
		EXPECT_EQ(b, 0.0);
	// Only pairs disjoint from the road's endpoints count, and on a 4-cycle
	// those pairs are adjacent, so no geodesic uses the road.
	for (double b : edge_betweenness(cycle4()))
		EXPECT_EQ(b, 0.0);
}

TEST(Centrality, BridgeBetweenness)
{
	// two triangles {A,B,C} and {D,E,F} joined by C-D
	auto net = oracle::make_network({"A", "B", "C", "D", "E", "F"},
		{{"A", "B", 1}, {"B", "C", 1}, {"A", "C", 1}, {"C", "D", 1}, {"D", "E", 1}, {"E", "F", 1}, {"D", "F", 1}});
	auto eb = edge_betweenness(net);
	const double a = 3, b = 3;
	EXPECT_DOUBLE_EQ(eb[net.road_index("CD")], 2.0 * (a - 1) * (b - 1) / (5.0 * 4.0));
}

TEST(CentralityProperty, MatchesEnumerationOracle)
{
	std::mt19937_64 rng(99);
	for (int trial = 0; trial < 80; ++trial) {
		std::size_t n = 3 + trial % 5;
		auto net = oracle::random_network(rng, n, 1 + trial % 4, 0);
		auto [node, edge] = oracle::betweenness_by_enumeration(net);
		auto nb = node_betweenness(net);
		auto eb = edge_betweenness(net);
		for (std::size_t v = 0; v < n; ++v) {
			EXPECT_NEAR(nb[v], node[v], 1e-12);
			EXPECT_GE(nb[v], 0.0);
			EXPECT_LE(nb[v], 1.0 + 1e-12);
		}
		for (auto r : net.existing_roads())
			EXPECT_NEAR(eb[r], edge[r], 1e-12);
	}
}

TEST(Canadian, SinglePairCanonical)
{
	auto net = canonical();
	auto w = PairWeights::weighted({{net.node_index("A"), net.node_index("D"), 1.0}});
	auto cb = canadian_betweenness(net, w);
	EXPECT_NEAR(cb.value[net.road_index("AC")], 0.0, 1e-12);
	EXPECT_NEAR(cb.value[net.road_index("BD")], 0.9, 1e-12);
	EXPECT_TRUE(cb.skipped.empty());
}

TEST(Canadian, TwoNodesWaitIsTheOnlyRecourse)
{
	auto net = oracle::make_network({"A", "B"}, {{"A", "B", 1.3}});
	auto cb = canadian_betweenness(net, wait(7.0));
	EXPECT_NEAR(cb.value[0], 7.0, 1e-12);
}

TEST(Canadian, EqualWeightsAgreeWithDeltaDistance)
{
	auto net = canonical();
	auto cb = canadian_betweenness(net, wait(4.0));
	for (auto r : net.existing_roads()) {
		double sum = 0.0;
		for (NodeIndex k = 0; k < 4; ++k)
			for (NodeIndex l = 0; l < k; ++l)
				sum += delta_distance(net, net.node_id(k), net.node_id(l), r, 4.0);
		EXPECT_NEAR(cb.value[r], sum / 6.0, 1e-12) << net.road_label(r);
		EXPECT_GE(cb.value[r], 0.0);
	}
	EXPECT_NEAR(cb.value[net.road_index("CD")], 0.95833333333333333, 1e-12);
}

TEST(Canadian, UnreachablePairsAreSkipped)
{
	auto net = oracle::make_network({"A", "B", "C"}, {{"A", "B", 1}});
	auto cb = canadian_betweenness(net, wait(2.0));
	EXPECT_EQ(cb.skipped.size(), 2u);
	EXPECT_NEAR(cb.value[0], 2.0 / 2.0, 1e-12);
}

TEST(Canadian, SampledAgreesWithExact)
{
	auto net = canonical();
	auto exact = canadian_betweenness(net, wait(4.0));
	auto opts = wait(4.0);
	opts.mode = BetweennessMode::monte_carlo(100000, 17);
	opts.threads = 4;
	auto mc = canadian_betweenness(net, opts);
	for (auto r : net.existing_roads()) {
		EXPECT_LT(std::abs(mc.value[r] - exact.value[r]), std::max(3.0 * mc.standard_error[r], 1e-12)) << net.road_label(r);
	}
}

TEST(Canadian, ThreadCountDoesNotChangeResults)
{
	std::mt19937_64 rng(4);
	auto net = oracle::random_network(rng, 7, 4, 4);
	for (auto mode : {BetweennessMode::exact(), BetweennessMode::monte_carlo(500, 8)}) {
		auto opts = wait(3.0);
		opts.mode = mode;
		auto one = canadian_betweenness(net, opts);
		opts.threads = 5;
		auto many = canadian_betweenness(net, opts);
		EXPECT_EQ(one.value, many.value);
		EXPECT_EQ(one.standard_error, many.standard_error);
	}
}

TEST(CanadianProperty, ScalingLengthsScalesValues)
{
	std::mt19937_64 rng(12);
	for (int trial = 0; trial < 20; ++trial) {
		auto net = oracle::random_network(rng, 5, 2, 3);
		auto data = net.data();
		const double c = 2.5;
		for (auto& r : data.roads)
			r.length *= c;
		RoadNetwork scaled(data);
		auto a = canadian_betweenness(net, wait(1.2));
		auto b = canadian_betweenness(scaled, wait(1.2 * c));
		auto ca = closeness(net), cs = closeness(scaled);
		for (auto r : net.existing_roads())
			EXPECT_NEAR(b.value[r], c * a.value[r], 1e-9 * (1 + a.value[r]));
		for (std::size_t v = 0; v < ca.size(); ++v)
			EXPECT_NEAR(1.0 / cs[v], c / ca[v], 1e-12);
		auto top = static_cast<std::size_t>(std::max_element(a.value.begin(), a.value.end()) - a.value.begin());
		for (auto r : net.existing_roads())
			if (a.value[r] < a.value[top] - 1e-9) {
				EXPECT_LT(b.value[r], b.value[top]);
			}
	}
}

TEST(Canadian, ReportCollectsEverything)
{
	auto net = canonical();
	auto rep = centrality_report(net, PairWeights::equal(net), wait(4.0));
	EXPECT_EQ(rep.degree, (std::vector<std::size_t>{2, 3, 3, 2}));
	EXPECT_NEAR(rep.closeness[1], 1.25, 1e-12);
	EXPECT_NEAR(rep.node_betweenness[1], 1.0 / 3.0, 1e-12);
	EXPECT_EQ(rep.canadian.value.size(), net.road_count());
}

TEST(Canadian, BeyondGuardNeedsSampling)
{
	std::mt19937_64 rng(6);
	auto net = oracle::random_network(rng, 8, 8, 12);
	auto opts = wait(2.0);
	opts.guard = 3;
	EXPECT_THROW(canadian_betweenness(net, opts), NumericalError);
	opts.mode = BetweennessMode::monte_carlo(50, 1);
	auto mc = canadian_betweenness(net, opts);
	for (auto r : net.existing_roads())
		EXPECT_GE(mc.value[r], 0.0);
}

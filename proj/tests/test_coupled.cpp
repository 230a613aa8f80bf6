#include "test_support.hpp"

#include <ctpglm/coupled.hpp>
#include <ctpglm/simgen.hpp>

#include <gtest/gtest.h>

using namespace ctpglm;

namespace {

ScenarioConfig small_scenario(double delta_b, std::uint64_t seed)
{
	ScenarioConfig cfg;
	cfg.nodes = 6;
	cfg.roads = 9;
	cfg.periods = 40;
	cfg.truth.mu = -0.6;
	cfg.truth.delta = {delta_b};
	cfg.seed = seed;
	BetweennessInjection inj;
	inj.repair_wait = 3.0;
	cfg.betweenness = inj;
	return cfg;
}

CoupledOptions loop_options()
{
	CoupledOptions o;
	o.repair_wait = 3.0;
	return o;
}

} // namespace

TEST(Coupled, IrrelevantBetweennessConvergesToPlainFit)
{
	auto cfg = small_scenario(0.0, 1);
	auto sc = generate_scenario(cfg);
	ModelSpec spec;
	spec.betweenness_slot = 0;
	spec.betweenness_coefficient = 0.0;
	auto opts = loop_options();
	opts.damping = 0.0;
	auto state = fit_coupled(sc.network, spec, sc.panel, opts);
	EXPECT_TRUE(state.converged);
	EXPECT_LE(state.iteration, 2u);
	auto plain = fit_model(sc.network, spec, build_stacked_design(sc.network, spec, sc.panel));
	auto d = build_stacked_design(sc.network, spec, sc.panel);
	auto p = per_road_mean(sc.network, d, predict(plain, d));
	for (auto r : sc.network.existing_roads())
		EXPECT_NEAR(state.probabilities[r], p[r], 1e-6);
}

TEST(Coupled, InfiniteToleranceStopsAfterOneIteration)
{
	auto sc = generate_scenario(small_scenario(0.5, 2));
	ModelSpec spec;
	spec.betweenness_slot = 0;
	auto opts = loop_options();
	opts.tol = kInfinity;
	auto state = fit_coupled(sc.network, spec, sc.panel, opts);
	EXPECT_EQ(state.iteration, 1u);
	EXPECT_TRUE(state.converged);
	auto step = coupled_step(sc.network, spec, sc.panel, std::vector<double>(sc.network.road_count(), 0.0), opts);
	for (auto r : sc.network.existing_roads())
		EXPECT_DOUBLE_EQ(state.probabilities[r], 0.5 * step.fitted[r]);
}

TEST(Coupled, FixedPointIsSelfConsistent)
{
	auto sc = generate_scenario(small_scenario(0.8, 3));
	ModelSpec spec;
	spec.betweenness_slot = 0;
	auto opts = loop_options();
	auto state = fit_coupled(sc.network, spec, sc.panel, opts);
	ASSERT_TRUE(state.converged);
	EXPECT_LE(self_consistency_gap(sc.network, spec, sc.panel, state, opts), opts.tol);
	for (double p : state.probabilities) {
		EXPECT_GE(p, 0.0);
		EXPECT_LE(p, 1.0);
	}
	EXPECT_EQ(state.history.size(), state.iteration);
}

TEST(Coupled, SampledTrajectoryIsReproducible)
{
	auto sc = generate_scenario(small_scenario(0.8, 4));
	ModelSpec spec;
	spec.betweenness_slot = 0;
	auto opts = loop_options();
	opts.mode = BetweennessMode::monte_carlo(200, 7);
	opts.threads = 3;
	auto a = fit_coupled(sc.network, spec, sc.panel, opts);
	opts.threads = 1;
	auto b = fit_coupled(sc.network, spec, sc.panel, opts);
	EXPECT_EQ(a.history, b.history);
	EXPECT_EQ(a.probabilities, b.probabilities);
	EXPECT_EQ(trajectory_csv(a), trajectory_csv(b));
}

TEST(Coupled, BetweennessIsRelabelingEquivariant)
{
	auto sc = generate_scenario(small_scenario(0.8, 5));
	auto data = sc.network.data();
	auto rev = data;
	std::reverse(rev.roads.begin(), rev.roads.end());
	RoadNetwork permuted(rev);
	DeploymentPanel panel = sc.panel;
	std::reverse(panel.outcomes.begin(), panel.outcomes.end());
	ModelSpec spec;
	spec.betweenness_slot = 0;
	auto opts = loop_options();
	auto a = fit_coupled(sc.network, spec, sc.panel, opts);
	auto b = fit_coupled(permuted, spec, panel, opts);
	const std::size_t R = sc.network.road_count();
	for (std::size_t r = 0; r < R; ++r) {
		EXPECT_NEAR(a.betweenness[r], b.betweenness[R - 1 - r], 1e-12);
		EXPECT_NEAR(a.probabilities[r], b.probabilities[R - 1 - r], 1e-8);
	}
}

TEST(Coupled, Errors)
{
	auto sc = generate_scenario(small_scenario(0.8, 3));
	ModelSpec spec;
	auto opts = loop_options();
	EXPECT_THROW(fit_coupled(sc.network, spec, sc.panel, opts), DataError);
	spec.betweenness_slot = 0;
	opts.damping = 1.0;
	EXPECT_THROW(fit_coupled(sc.network, spec, sc.panel, opts), DataError);

	auto data = testing_support::canonical().data();
	data.covariate_names.edge_global = {"b"};
	data.intersections.push_back({"E", {}, {}});
	Road de;
	de.from = "D";
	de.to = "E";
	data.roads.push_back(de);
	for (auto& r : data.roads)
		r.global = {0.0};
	RoadNetwork pendant(data);
	DeploymentPanel panel{{"t1", "t2"}, {{1, 0}, {0, 0}, {0, 1}, {1, 1}, {0, 0}, {1, 0}}};
	CoupledOptions inf_wait;
	try {
		fit_coupled(pendant, spec, panel, inf_wait);
		FAIL();
	} catch (const NumericalError& e) {
		EXPECT_NE(std::string(e.what()).find("iteration 1"), std::string::npos);
		EXPECT_NE(std::string(e.what()).find("--xr"), std::string::npos);
	}
}

TEST(Coupled, RecoversGeneratingProbabilitiesOnCanonicalNetwork)
{
	auto data = testing_support::canonical().data();
	data.covariate_names.edge_global = {"canadian_betweenness"};
	for (auto& r : data.roads)
		r.global = {0.0};
	RoadNetwork net(data);
	const double mu = -0.8, delta_b = 0.3, xr = 4.0;
	const std::size_t R = net.road_count();

	// generating fixed point, by plain iteration
	CanadianBetweennessOptions cb;
	cb.repair_wait = xr;
	std::vector<double> truth(R, 0.0);
	double change = 1.0;
	for (int it = 0; it < 200 && change > 1e-14; ++it) {
		auto b = canadian_betweenness(net.with_block_probabilities(truth), cb).value;
		change = 0.0;
		for (std::size_t r = 0; r < R; ++r) {
			double next = normal::cdf(mu + delta_b * b[r]);
			change = std::max(change, std::abs(next - truth[r]));
			truth[r] = next;
		}
	}
	ASSERT_LE(change, 1e-14);

	ModelSpec spec;
	spec.betweenness_slot = 0;
	CoupledOptions opts;
	opts.repair_wait = xr;
	const std::size_t periods = 100;
	std::vector<std::vector<double>> est(R);
	std::mt19937_64 rng(12);
	std::uniform_real_distribution<double> u;
	for (int rep = 0; rep < 100; ++rep) {
		DeploymentPanel panel;
		for (std::size_t t = 0; t < periods; ++t)
			panel.periods.push_back("t" + std::to_string(1000 + t));
		panel.outcomes.assign(R, std::vector<int>(periods, 0));
		for (std::size_t t = 0; t < periods; ++t)
			for (std::size_t r = 0; r < R; ++r)
				panel.outcomes[r][t] = u(rng) < truth[r];
		FixedPointState state;
		try {
			state = fit_coupled(net, spec, panel, opts);
		} catch (const NumericalError&) {
			continue;
		}
		if (!state.converged)
			continue;
		for (std::size_t r = 0; r < R; ++r)
			est[r].push_back(state.probabilities[r]);
	}
	// the loop carries no convergence guarantee, so a few replications may not settle
	const double n = static_cast<double>(est[0].size());
	ASSERT_GE(n, 90.0);
	for (std::size_t r = 0; r < R; ++r) {
		double m = 0.0, v = 0.0;
		for (double p : est[r])
			m += p / n;
		for (double p : est[r])
			v += (p - m) * (p - m) / (n - 1.0);
		EXPECT_LT(std::abs(m - truth[r]), 3.0 * std::sqrt(v / n)) << net.road_label(r) << " truth " << truth[r] << " mean " << m;
	}
}

#pragma once

#include "centrality.hpp"
#include "glm.hpp"

#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

namespace ctpglm {

enum class NetworkFamily
{
	Random, // n nodes, m distinct roads chosen uniformly, redrawn until connected
	Grid	// rows x cols lattice
};

struct TrueCoefficients
{
	double mu = 0.0;
	std::vector<double> alpha, beta, gamma, delta, tau;
};

/// Generates a betweenness covariate in one edge-global slot from the generating probabilities.
struct BetweennessInjection
{
	std::size_t slot = 0;
	double repair_wait = kInfinity;
	BetweennessMode mode;
	std::size_t threads = 1;
	std::size_t max_iter = 500;
	double tol = 1e-10;
	double damping = 0.5;
};

struct ScenarioConfig
{
	NetworkFamily family = NetworkFamily::Random;
	std::size_t nodes = 6;
	std::size_t roads = 8;
	std::size_t grid_rows = 3;
	std::size_t grid_cols = 3;
	double min_length = 0.5;
	double max_length = 2.0;
	TrueCoefficients truth; // block sizes set the covariate dimensions
	std::size_t periods = 1;
	std::uint64_t seed = 0;
	std::size_t max_retries = 1000;
	std::optional<BetweennessInjection> betweenness;
};

struct Scenario
{
	RoadNetwork network;
	DeploymentPanel panel;
	std::vector<std::vector<double>> probabilities; // [road][period]
	std::vector<double> betweenness;				// empty unless injected
};

namespace detail {

inline std::string padded(const std::string& prefix, std::size_t i, std::size_t count)
{
	std::string s = std::to_string(i);
	std::string width = std::to_string(count > 0 ? count - 1 : 0);
	if (s.size() < width.size())
		s.insert(0, width.size() - s.size(), '0');
	return prefix + s;
}

inline std::vector<std::pair<std::size_t, std::size_t>> random_pairs(std::size_t n, std::size_t m, std::mt19937_64& rng)
{
	std::vector<std::pair<std::size_t, std::size_t>> all;
	for (std::size_t i = 0; i < n; ++i)
		for (std::size_t j = i + 1; j < n; ++j)
			all.emplace_back(i, j);
	// partial Fisher-Yates with explicit draws, so the stream is library-independent
	for (std::size_t k = 0; k < m; ++k) {
		std::uniform_int_distribution<std::size_t> pick(k, all.size() - 1);
		std::swap(all[k], all[pick(rng)]);
	}
	all.resize(m);
	std::sort(all.begin(), all.end());
	return all;
}

/// Linear predictor without lag terms, per road.
inline std::vector<double> base_predictor(const RoadNetwork& network, const TrueCoefficients& t)
{
	std::vector<double> eta(network.road_count(), 0.0);
	for (auto r : network.existing_roads()) {
		const auto& road = network.road(r);
		const auto& a = network.node(network.from(r));
		const auto& b = network.node(network.to(r));
		double v = t.mu;
		for (std::size_t k = 0; k < t.alpha.size(); ++k)
			v += (a.local[k] + b.local[k]) * t.alpha[k];
		for (std::size_t k = 0; k < t.beta.size(); ++k)
			v += (a.global[k] + b.global[k]) * t.beta[k];
		for (std::size_t k = 0; k < t.gamma.size(); ++k)
			v += road.local[k] * t.gamma[k];
		for (std::size_t k = 0; k < t.delta.size(); ++k)
			v += road.global[k] * t.delta[k];
		eta[r] = v;
	}
	return eta;
}

} // namespace detail

/**
 * Synthetic network, covariates and deployment panel from a known probit
 * model with lags. Outcomes before the first period are taken as 0.
 *
 * With a betweenness injection, the slot holds Canadian betweenness at the
 * fixed point of p = Phi(eta + delta_B * B(p)), ignoring lags, found by damped
 * iteration from p = 0.
 */
inline Scenario generate_scenario(const ScenarioConfig& cfg)
{
	const auto& t = cfg.truth;
	if (cfg.betweenness && cfg.betweenness->slot >= t.delta.size())
		throw DataError("betweenness slot outside the edge-global block");
	if (cfg.betweenness && !(cfg.betweenness->damping >= 0.0 && cfg.betweenness->damping < 1.0))
		throw DataError("injection damping must lie in [0, 1)");
	if (cfg.periods == 0)
		throw DataError("scenario needs at least one period");
	if (!(cfg.min_length > 0.0 && cfg.max_length >= cfg.min_length))
		throw DataError("invalid road length range");
	std::mt19937_64 rng(cfg.seed);
	std::uniform_real_distribution<double> unif(0.0, 1.0);
	std::normal_distribution<double> gauss(0.0, 1.0);

	NetworkData data;
	auto name_block = [](const std::string& prefix, std::size_t k) {
		std::vector<std::string> names;
		for (std::size_t i = 1; i <= k; ++i)
			names.push_back(prefix + std::to_string(i));
		return names;
	};
	data.covariate_names = {name_block("x", t.alpha.size()), name_block("z", t.beta.size()), name_block("xe", t.gamma.size()),
							name_block("ze", t.delta.size())};
	if (cfg.betweenness)
		data.covariate_names.edge_global[cfg.betweenness->slot] = "canadian_betweenness";

	std::vector<std::pair<std::size_t, std::size_t>> pairs;
	std::size_t n = 0;
	if (cfg.family == NetworkFamily::Grid) {
		if (cfg.grid_rows == 0 || cfg.grid_cols == 0)
			throw DataError("grid dimensions must be positive");
		n = cfg.grid_rows * cfg.grid_cols;
		for (std::size_t i = 0; i < cfg.grid_rows; ++i)
			for (std::size_t j = 0; j < cfg.grid_cols; ++j) {
				std::size_t v = i * cfg.grid_cols + j;
				if (j + 1 < cfg.grid_cols)
					pairs.emplace_back(v, v + 1);
				if (i + 1 < cfg.grid_rows)
					pairs.emplace_back(v, v + cfg.grid_cols);
			}
		for (std::size_t v = 0; v < n; ++v)
			data.intersections.push_back(
				{"r" + detail::padded("", v / cfg.grid_cols, cfg.grid_rows) + "c" + detail::padded("", v % cfg.grid_cols, cfg.grid_cols), {}, {}});
	} else {
		n = cfg.nodes;
		if (n < 2)
			throw DataError("random networks need at least two nodes");
		if (cfg.roads + 1 < n || cfg.roads > n * (n - 1) / 2)
			throw DataError("cannot place " + std::to_string(cfg.roads) + " roads on " + std::to_string(n) + " connected nodes");
		for (std::size_t v = 0; v < n; ++v)
			data.intersections.push_back({detail::padded("n", v, n), {}, {}});
		bool connected = false;
		for (std::size_t attempt = 0; attempt < cfg.max_retries && !connected; ++attempt) {
			pairs = detail::random_pairs(n, cfg.roads, rng);
			std::vector<std::size_t> parent(n);
			for (std::size_t v = 0; v < n; ++v)
				parent[v] = v;
			std::function<std::size_t(std::size_t)> find = [&](std::size_t v) {
				return parent[v] == v ? v : parent[v] = find(parent[v]);
			};
			std::size_t components = n;
			for (auto [a, b] : pairs)
				if (find(a) != find(b)) {
					parent[find(a)] = find(b);
					--components;
				}
			connected = components == 1;
		}
		if (!connected)
			throw DataError("no connected network after " + std::to_string(cfg.max_retries) + " attempts");
	}
	for (auto& node : data.intersections) {
		for (std::size_t k = 0; k < t.alpha.size(); ++k)
			node.local.push_back(gauss(rng));
		for (std::size_t k = 0; k < t.beta.size(); ++k)
			node.global.push_back(gauss(rng));
	}
	for (auto [a, b] : pairs) {
		Road road;
		road.from = data.intersections[a].id;
		road.to = data.intersections[b].id;
		road.length = cfg.min_length + (cfg.max_length - cfg.min_length) * unif(rng);
		for (std::size_t k = 0; k < t.gamma.size(); ++k)
			road.local.push_back(gauss(rng));
		for (std::size_t k = 0; k < t.delta.size(); ++k)
			road.global.push_back(gauss(rng));
		data.roads.push_back(std::move(road));
	}
	if (cfg.betweenness)
		for (auto& road : data.roads)
			road.global[cfg.betweenness->slot] = 0.0;

	Scenario sc;
	sc.network = RoadNetwork(std::move(data));
	const std::size_t R = sc.network.road_count();

	if (cfg.betweenness) {
		const auto& inj = *cfg.betweenness;
		const double coef = t.delta[inj.slot];
		auto eta0 = detail::base_predictor(sc.network, t);
		std::vector<double> p(R, 0.0), b(R, 0.0);
		CanadianBetweennessOptions opts;
		opts.repair_wait = inj.repair_wait;
		opts.mode = inj.mode;
		opts.threads = inj.threads;
		bool done = false;
		for (std::size_t it = 0; it < inj.max_iter && !done; ++it) {
			auto net_p = sc.network.with_block_probabilities(p);
			b = canadian_betweenness(net_p, opts).value;
			double change = 0.0;
			for (auto r : sc.network.existing_roads()) {
				if (!std::isfinite(b[r]))
					throw NumericalError("generating betweenness is infinite; use a finite repair wait");
				double next = (1.0 - inj.damping) * normal::cdf(eta0[r] + coef * b[r]) + inj.damping * p[r];
				change = std::max(change, std::abs(next - p[r]));
				p[r] = next;
			}
			done = change < inj.tol;
		}
		if (!done)
			throw NumericalError("generating betweenness did not reach a fixed point in " + std::to_string(inj.max_iter) +
								 " iterations; the recourse policy can switch discontinuously, try a smaller coefficient or another seed");
		sc.network = sc.network.with_edge_global(inj.slot, b);
		sc.betweenness = b;
	}

	auto eta = detail::base_predictor(sc.network, t);
	const std::size_t T = cfg.periods;
	for (std::size_t s = 0; s < T; ++s)
		sc.panel.periods.push_back(detail::padded("t", s + 1, T + 1));
	sc.panel.outcomes.assign(R, std::vector<int>(T, -1));
	sc.probabilities.assign(R, std::vector<double>(T, 0.0));
	for (std::size_t s = 0; s < T; ++s)
		for (auto r : sc.network.existing_roads()) {
			double v = eta[r];
			for (std::size_t k = 1; k <= t.tau.size(); ++k)
				if (s >= k)
					v += t.tau[k - 1] * sc.panel.outcomes[r][s - k];
			double p = normal::cdf(v);
			sc.probabilities[r][s] = p;
			sc.panel.outcomes[r][s] = unif(rng) < p ? 1 : 0;
		}
	return sc;
}

inline ModelSpec model_spec_for(const TrueCoefficients& t)
{
	ModelSpec spec;
	spec.lags = t.tau.size();
	return spec;
}

} // namespace ctpglm

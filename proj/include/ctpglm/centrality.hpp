#pragma once

#include "ctp.hpp"
#include "netmodel.hpp"
#include "parallel.hpp"
#include "routing.hpp"

#include <cstdint>
#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <random>
#include <string>
#include <vector>

namespace ctpglm {

namespace detail {

inline void require_connected(const RoadNetwork& network, const char* what)
{
	if (is_connected(network))
		return;
	auto dist = shortest_distances(network, 0);
	std::string missing;
	for (NodeIndex v = 0; v < network.node_count(); ++v)
		if (!std::isfinite(dist[v]))
			missing += (missing.empty() ? "" : ",") + network.node_id(0) + "->" + network.node_id(v);
	throw DataError(std::string(what) + " requires a connected network; unreachable pairs include " + missing);
}

inline double betweenness_divisor(std::size_t n)
{
	return n >= 3 ? static_cast<double>((n - 1) * (n - 2)) : 1.0;
}

} // namespace detail

/// Closeness C_C(i) = (n-1) / sum_k d(i,k).
inline std::vector<double> closeness(const RoadNetwork& network)
{
	detail::require_connected(network, "closeness");
	const std::size_t n = network.node_count();
	std::vector<double> out(n, 0.0);
	if (n < 2)
		return out;
	for (NodeIndex i = 0; i < n; ++i) {
		auto dist = shortest_distances(network, i);
		double total = 0.0;
		for (NodeIndex k = 0; k < n; ++k)
			if (k != i)
				total += dist[k];
		out[i] = static_cast<double>(n - 1) / total;
	}
	return out;
}

/// Geodesic node betweenness over ordered pairs, normalized by (n-1)(n-2).
inline std::vector<double> node_betweenness(const RoadNetwork& network)
{
	detail::require_connected(network, "node betweenness");
	const std::size_t n = network.node_count();
	std::vector<double> out(n, 0.0);
	for (NodeIndex i = 0; i < n; ++i)
		for (NodeIndex j = 0; j < n; ++j) {
			if (i == j)
				continue;
			auto count = geodesic_count(network, i, j);
			for (NodeIndex k = 0; k < n; ++k)
				if (k != i && k != j)
					out[k] += count->node_paths[k] / count->paths;
		}
	for (auto& v : out)
		v /= detail::betweenness_divisor(n);
	return out;
}

/// Geodesic edge betweenness; source and target range over nodes other than the road's endpoints.
inline std::vector<double> edge_betweenness(const RoadNetwork& network)
{
	detail::require_connected(network, "edge betweenness");
	const std::size_t n = network.node_count();
	std::vector<double> out(network.road_count(), 0.0);
	for (NodeIndex i = 0; i < n; ++i)
		for (NodeIndex j = 0; j < n; ++j) {
			if (i == j)
				continue;
			auto count = geodesic_count(network, i, j);
			for (auto r : network.existing_roads()) {
				if (network.from(r) == i || network.to(r) == i || network.from(r) == j || network.to(r) == j)
					continue;
				out[r] += count->road_paths[r] / count->paths;
			}
		}
	for (auto& v : out)
		v /= detail::betweenness_divisor(n);
	return out;
}

struct PairWeight
{
	NodeIndex source;
	NodeIndex dest;
	double weight = 1.0;
};

/// Source-destination pairs entering Canadian betweenness and the normalizing divisor.
struct PairWeights
{
	std::vector<PairWeight> pairs;
	double divisor = 1.0;

	/// Every unordered pair {k, l} with l < k in node order, travelled k -> l, divided by (n-1)(n-2).
	static PairWeights equal(const RoadNetwork& network)
	{
		PairWeights w;
		for (NodeIndex k = 0; k < network.node_count(); ++k)
			for (NodeIndex l = 0; l < k; ++l)
				w.pairs.push_back({k, l, 1.0});
		w.divisor = detail::betweenness_divisor(network.node_count());
		return w;
	}

	/// Explicit pairs (e.g. trip counts); the result is their weighted mean.
	static PairWeights weighted(std::vector<PairWeight> pairs)
	{
		PairWeights w;
		w.pairs = std::move(pairs);
		w.divisor = 0.0;
		for (const auto& p : w.pairs) {
			if (!(p.weight >= 0.0))
				throw DataError("pair weights must be non-negative");
			w.divisor += p.weight;
		}
		if (!(w.divisor > 0.0))
			throw DataError("pair weights must have a positive sum");
		return w;
	}
};

struct BetweennessMode
{
	std::size_t samples = 0; // 0 = exact
	std::uint64_t seed = 0;

	bool sampled() const { return samples > 0; }
	static BetweennessMode exact() { return {}; }
	static BetweennessMode monte_carlo(std::size_t samples, std::uint64_t seed) { return {samples, seed}; }
};

struct CanadianBetweennessOptions
{
	double repair_wait = kInfinity;
	BetweennessMode mode;
	std::size_t guard = kDefaultStochasticGuard;
	std::size_t threads = 1;
};

struct CanadianBetweenness
{
	std::vector<double> value;			// per road; 0 for roads that do not exist
	std::vector<double> standard_error; // 0 in exact mode
	std::vector<std::string> skipped;	// pairs left out because the open scenario is unreachable
	BetweennessMode mode;
};

/**
 * Canadian betweenness: for each road, the weighted sum over pairs of the
 * expected extra recourse cost when the road is blocked (discovered only at an
 * endpoint) versus open, divided by the pair divisor.
 *
 * Sampled mode estimates each expectation from the same set of realizations
 * for every road and pair.
 */
inline CanadianBetweenness canadian_betweenness(const RoadNetwork& network, const PairWeights& weights,
												const CanadianBetweennessOptions& opts = {})
{
	const std::size_t R = network.road_count();
	const std::size_t M = opts.mode.samples;
	const bool sampled = opts.mode.sampled();
	const auto& roads = network.existing_roads();
	auto stochastic = uncertain_roads(network);

	std::map<NodeIndex, std::vector<std::size_t>> by_dest;
	for (std::size_t p = 0; p < weights.pairs.size(); ++p) {
		const auto& pw = weights.pairs[p];
		if (pw.source >= network.node_count() || pw.dest >= network.node_count() || pw.source == pw.dest)
			throw DataError("invalid source-destination pair");
		by_dest[pw.dest].push_back(p);
	}
	std::vector<NodeIndex> dests;
	for (auto& [d, ps] : by_dest)
		dests.push_back(d);

	// common realizations: row m holds blocked flags for every road
	std::vector<char> draws;
	if (sampled) {
		draws.assign(M * R, 0);
		std::mt19937_64 rng(opts.mode.seed);
		std::uniform_real_distribution<double> unif(0.0, 1.0);
		for (std::size_t m = 0; m < M; ++m)
			for (RoadIndex r = 0; r < R; ++r) {
				double u = unif(rng);
				const auto& road = network.road(r);
				draws[m * R + r] = road.exists && road.stochastic && u < road.block_probability;
			}
	}

	// per pair and road: exact delta, or the pair's per-sample deltas folded into per-dest sums
	std::vector<double> pair_delta(weights.pairs.size() * R, 0.0);
	std::vector<char> pair_skipped(weights.pairs.size() * R, 0);
	std::vector<std::vector<double>> dest_samples(dests.size());

	parallel_for(dests.size(), opts.threads, [&](std::size_t di) {
		const NodeIndex dest = dests[di];
		const auto& pairs = by_dest.at(dest);
		std::optional<RecourseSolver> shared;
		if (sampled)
			dest_samples[di].assign(M * R, 0.0);
		std::vector<char> blocked(R, 0), uncertain(R, 0);
		std::vector<double> diffs(M);
		for (auto e : roads) {
			std::vector<RoadIndex> tracked = stochastic;
			if (!network.road(e).stochastic)
				tracked.push_back(e);
			const bool exact_policy = tracked.size() <= opts.guard;
			if (!sampled)
				detail::check_guard(tracked.size(), opts.guard);
			std::optional<RecourseSolver> own;
			RecourseSolver* solver = nullptr;
			if (exact_policy) {
				if (network.road(e).stochastic) {
					if (!shared)
						shared.emplace(network, dest, stochastic, opts.repair_wait);
					solver = &*shared;
				} else {
					own.emplace(network, dest, tracked, opts.repair_wait);
					solver = &*own;
				}
			} else {
				std::fill(uncertain.begin(), uncertain.end(), 0);
				for (auto r : tracked)
					uncertain[r] = 1;
			}
			for (auto p : pairs) {
				const NodeIndex src = weights.pairs[p].source;
				const double scale = weights.pairs[p].weight / weights.divisor;
				if (!sampled) {
					double open = solver->expected_cost(src, {{e, RoadState::Open}});
					if (!std::isfinite(open)) {
						pair_skipped[p * R + e] = 1;
						continue;
					}
					double closed = solver->expected_cost(src, {{e, RoadState::Blocked}});
					pair_delta[p * R + e] = std::max(0.0, closed - open);
					continue;
				}
				bool skip = false;
				for (std::size_t m = 0; m < M && !skip; ++m) {
					std::copy(draws.begin() + static_cast<std::ptrdiff_t>(m * R), draws.begin() + static_cast<std::ptrdiff_t>((m + 1) * R),
							  blocked.begin());
					blocked[e] = 0;
					double open = exact_policy ? solver->realized_cost(src, blocked)
											   : replanning_cost(network, src, dest, opts.repair_wait, blocked, uncertain);
					if (!std::isfinite(open)) {
						skip = true;
						break;
					}
					blocked[e] = 1;
					double closed = exact_policy ? solver->realized_cost(src, blocked)
												 : replanning_cost(network, src, dest, opts.repair_wait, blocked, uncertain);
					diffs[m] = closed - open;
				}
				if (skip) {
					pair_skipped[p * R + e] = 1;
					continue;
				}
				for (std::size_t m = 0; m < M; ++m)
					dest_samples[di][m * R + e] += scale * diffs[m];
			}
		}
	});

	CanadianBetweenness out;
	out.mode = opts.mode;
	out.value.assign(R, 0.0);
	out.standard_error.assign(R, 0.0);
	std::set<std::size_t> skipped_pairs;
	for (std::size_t p = 0; p < weights.pairs.size(); ++p)
		for (RoadIndex r = 0; r < R; ++r)
			if (pair_skipped[p * R + r])
				skipped_pairs.insert(p);
	for (auto p : skipped_pairs)
		out.skipped.push_back(network.node_id(weights.pairs[p].source) + "->" + network.node_id(weights.pairs[p].dest));

	if (!sampled) {
		for (std::size_t p = 0; p < weights.pairs.size(); ++p) {
			const double scale = weights.pairs[p].weight / weights.divisor;
			for (auto r : roads)
				if (!pair_skipped[p * R + r])
					out.value[r] += scale * pair_delta[p * R + r];
		}
		return out;
	}
	std::vector<double> totals(M);
	for (auto r : roads) {
		for (std::size_t m = 0; m < M; ++m) {
			double t = 0.0;
			for (std::size_t di = 0; di < dests.size(); ++di)
				t += dest_samples[di][m * R + r];
			totals[m] = t;
		}
		double mean = 0.0;
		for (double t : totals)
			mean += t;
		mean /= static_cast<double>(M);
		double ss = 0.0;
		for (double t : totals)
			ss += (t - mean) * (t - mean);
		out.value[r] = mean;
		out.standard_error[r] = M > 1 ? std::sqrt(ss / static_cast<double>(M - 1) / static_cast<double>(M)) : 0.0;
		if (!std::isfinite(mean))
			out.standard_error[r] = kInfinity;
	}
	return out;
}

inline CanadianBetweenness canadian_betweenness(const RoadNetwork& network, const CanadianBetweennessOptions& opts = {})
{
	return canadian_betweenness(network, PairWeights::equal(network), opts);
}

struct CentralityReport
{
	std::vector<std::size_t> degree;
	std::vector<double> closeness;
	std::vector<double> node_betweenness;
	std::vector<double> edge_betweenness;
	CanadianBetweenness canadian;
};

inline CentralityReport centrality_report(const RoadNetwork& network, const PairWeights& weights,
										  const CanadianBetweennessOptions& opts = {})
{
	CentralityReport rep;
	for (NodeIndex v = 0; v < network.node_count(); ++v)
		rep.degree.push_back(network.incident(v).size());
	rep.closeness = closeness(network);
	rep.node_betweenness = node_betweenness(network);
	rep.edge_betweenness = edge_betweenness(network);
	rep.canadian = canadian_betweenness(network, weights, opts);
	return rep;
}

} // namespace ctpglm

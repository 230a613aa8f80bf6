#pragma once

#include "centrality.hpp"
#include "glm.hpp"

#include <cmath>
#include <optional>
#include <string>
#include <vector>

namespace ctpglm {

enum class ResponseMode
{
	Stacked,  // one row per road and period from the K-th on
	AnyPeriod // one row per road, response "ever deployed"
};

struct CoupledOptions
{
	double tol = 1e-6;
	std::size_t max_iter = 100;
	double damping = 0.5;
	BetweennessMode mode;
	double repair_wait = kInfinity;
	std::optional<PairWeights> weights; // default: equal weights over all pairs
	std::size_t guard = kDefaultStochasticGuard;
	std::size_t threads = 1;
	ResponseMode response = ResponseMode::Stacked;
	std::size_t oscillation_window = 5;
};

struct FixedPointState
{
	std::size_t iteration = 0;
	std::vector<double> probabilities; // per road; 0 for roads that do not exist
	std::vector<double> betweenness;   // B used in the last fit
	std::optional<Coefficients> coefficients;
	double max_delta = kInfinity;
	bool converged = false;
	std::vector<std::pair<std::size_t, double>> history;
	std::vector<std::string> skipped_pairs;
};

struct CoupledStep
{
	std::vector<double> betweenness;
	Coefficients coefficients;
	std::vector<double> fitted; // per-road mean of fitted probabilities
	std::vector<std::string> skipped_pairs;
};

/// Betweenness under `p`, injected into the model and refitted.
inline CoupledStep coupled_step(const RoadNetwork& network, const ModelSpec& spec, const DeploymentPanel& panel,
								const std::vector<double>& p, const CoupledOptions& opts)
{
	if (!spec.betweenness_slot)
		throw DataError("coupled fitting needs a betweenness slot in the edge-global block");
	auto net_p = network.with_block_probabilities(p);
	CanadianBetweennessOptions cb_opts;
	cb_opts.repair_wait = opts.repair_wait;
	cb_opts.mode = opts.mode;
	cb_opts.guard = opts.guard;
	cb_opts.threads = opts.threads;
	auto cb = canadian_betweenness(net_p, opts.weights ? *opts.weights : PairWeights::equal(net_p), cb_opts);
	for (auto r : network.existing_roads())
		if (!std::isfinite(cb.value[r]))
			throw NumericalError("canadian betweenness of road " + network.road_label(r) +
								 " is infinite; supply a finite repair wait (--xr)");
	auto net_b = net_p.with_edge_global(*spec.betweenness_slot, cb.value);
	Design d = opts.response == ResponseMode::AnyPeriod ? build_any_period_design(net_b, spec, panel)
														: build_stacked_design(net_b, spec, panel);
	auto coef = fit_model(net_b, spec, d);
	auto fitted = per_road_mean(net_b, d, predict(coef, d));
	return {std::move(cb.value), std::move(coef), std::move(fitted), std::move(cb.skipped)};
}

/**
 * Alternates betweenness under the current probabilities with a probit refit,
 * starting from p = 0, until the largest probability change drops below tol.
 */
inline FixedPointState fit_coupled(const RoadNetwork& network, const ModelSpec& spec, const DeploymentPanel& panel,
								   const CoupledOptions& opts = {})
{
	if (!(opts.damping >= 0.0 && opts.damping < 1.0))
		throw DataError("damping must lie in [0, 1)");
	if (opts.max_iter == 0)
		throw DataError("max_iter must be positive");
	if (std::isnan(opts.tol) || opts.tol < 0.0)
		throw DataError("tolerance must be non-negative");
	FixedPointState state;
	state.probabilities.assign(network.road_count(), 0.0);
	std::size_t rising = 0;
	for (std::size_t m = 1; m <= opts.max_iter; ++m) {
		CoupledStep step;
		try {
			step = coupled_step(network, spec, panel, state.probabilities, opts);
		} catch (const NumericalError& e) {
			throw NumericalError("iteration " + std::to_string(m) + ": " + e.what());
		} catch (const DataError& e) {
			throw DataError("iteration " + std::to_string(m) + ": " + e.what());
		}
		double delta = 0.0;
		std::vector<double> next(network.road_count(), 0.0);
		for (auto r : network.existing_roads()) {
			next[r] = (1.0 - opts.damping) * step.fitted[r] + opts.damping * state.probabilities[r];
			delta = std::max(delta, std::abs(next[r] - state.probabilities[r]));
		}
		if (m > 1 && delta >= state.max_delta)
			++rising;
		else
			rising = 0;
		state.iteration = m;
		state.probabilities = std::move(next);
		state.betweenness = std::move(step.betweenness);
		state.coefficients = std::move(step.coefficients);
		state.skipped_pairs = std::move(step.skipped_pairs);
		state.max_delta = delta;
		state.history.emplace_back(m, delta);
		if (delta < opts.tol) {
			state.converged = true;
			break;
		}
		if (rising >= opts.oscillation_window)
			throw NumericalError("fixed-point iteration oscillates (max change did not decrease for " +
								 std::to_string(opts.oscillation_window) + " iterations at iteration " + std::to_string(m) +
								 "); increase the damping");
	}
	return state;
}

/// Largest probability change one further damped iteration would make from `state`.
inline double self_consistency_gap(const RoadNetwork& network, const ModelSpec& spec, const DeploymentPanel& panel,
								   const FixedPointState& state, const CoupledOptions& opts = {})
{
	auto step = coupled_step(network, spec, panel, state.probabilities, opts);
	double gap = 0.0;
	for (auto r : network.existing_roads()) {
		double next = (1.0 - opts.damping) * step.fitted[r] + opts.damping * state.probabilities[r];
		gap = std::max(gap, std::abs(next - state.probabilities[r]));
	}
	return gap;
}

inline std::string trajectory_csv(const FixedPointState& state)
{
	std::string out = "iteration,max_delta\n";
	for (const auto& [m, d] : state.history)
		out += std::to_string(m) + "," + csv::format(d) + "\n";
	return out;
}

} // namespace ctpglm

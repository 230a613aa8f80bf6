#pragma once

#include "netmodel.hpp"
#include "routing.hpp"

#include <json.hpp>

#include <bit>
#include <cstdint>
#include <map>
#include <random>
#include <unordered_map>
#include <vector>

namespace ctpglm {

/// What the traveller knows about an uncertain road.
enum class Knowledge : std::uint8_t
{
	Unknown,
	Open,
	Blocked
};

enum class RoadState : std::uint8_t
{
	Open,
	Blocked
};

/// Realized road states hidden from the traveller until revealed at an endpoint.
using ForcedStates = std::map<RoadIndex, RoadState>;

inline constexpr std::size_t kDefaultStochasticGuard = 14;

struct CtpQuery
{
	std::string source;
	std::string dest;
	double repair_wait = kInfinity; // x_r
	ForcedStates forced;
	std::size_t guard_max_stochastic = kDefaultStochasticGuard;
};

struct CtpAction
{
	enum class Kind
	{
		Traverse,
		Wait,
		Arrived,
		Stuck
	};
	Kind kind = Kind::Stuck;
	RoadIndex road = 0;
};

inline std::string describe(const RoadNetwork& network, const CtpAction& a)
{
	switch (a.kind) {
	case CtpAction::Kind::Traverse: return "traverse " + network.road_label(a.road);
	case CtpAction::Kind::Wait: return "wait " + network.road_label(a.road);
	case CtpAction::Kind::Arrived: return "arrived";
	case CtpAction::Kind::Stuck: return "stuck";
	}
	return "stuck";
}

struct CtpSolution
{
	double expected_cost = kInfinity;
	CtpAction first_action;
	std::map<std::string, std::string> policy; // knowledge-state key -> action
	std::size_t node_expansions = 0;
};

/**
 * Knowledge over the tracked roads as two bit masks. `blocked` is a subset of
 * `known`; a known road outside `blocked` is open.
 */
struct KnowledgeKey
{
	std::uint64_t known = 0;
	std::uint64_t blocked = 0;
	bool operator==(const KnowledgeKey&) const = default;
};

struct KnowledgeKeyHash
{
	std::size_t operator()(const KnowledgeKey& k) const noexcept
	{
		std::uint64_t h = k.known * 0x9E3779B97F4A7C15ull ^ (k.blocked + 0x632BE59BD9B4E019ull + (k.known << 6) + (k.known >> 2));
		return static_cast<std::size_t>(h ^ (h >> 31));
	}
};

/**
 * Expected-cost-optimal recourse policy toward one destination.
 *
 * The traveller is uncertain about the tracked roads; each is blocked
 * independently with its prior probability (block_probability for stochastic
 * roads, 0 for deterministic ones). Arriving at a node reveals every incident
 * tracked road. Traversing an open road costs its length; a road known blocked
 * can be crossed after waiting, for repair_wait + length.
 *
 * Values are memoized per knowledge state. Within one knowledge state the
 * problem is a deterministic shortest path whose terminals are the destination
 * and the nodes that would reveal something new, so each state is one
 * Dijkstra sweep outward from those terminals.
 */
class RecourseSolver
{
public:
	RecourseSolver(const RoadNetwork& network, NodeIndex dest, std::vector<RoadIndex> tracked, double repair_wait)
		: net_(&network), dest_(dest), tracked_(std::move(tracked)), repair_wait_(repair_wait)
	{
		if (tracked_.size() > 63)
			throw NumericalError("recourse solver supports at most 63 uncertain roads");
		std::sort(tracked_.begin(), tracked_.end());
		tracked_.erase(std::unique(tracked_.begin(), tracked_.end()), tracked_.end());
		slot_.assign(network.road_count(), -1);
		prior_.resize(tracked_.size());
		for (std::size_t t = 0; t < tracked_.size(); ++t) {
			const auto& road = network.road(tracked_[t]);
			if (!road.exists)
				throw DataError("road " + network.road_label(tracked_[t]) + " does not exist");
			slot_[tracked_[t]] = static_cast<int>(t);
			prior_[t] = road.stochastic ? road.block_probability : 0.0;
		}
		node_mask_.assign(network.node_count(), 0);
		for (NodeIndex v = 0; v < network.node_count(); ++v)
			for (const auto& inc : network.incident(v))
				if (slot_[inc.road] >= 0)
					node_mask_[v] |= bit(slot_[inc.road]);
	}

	const RoadNetwork& network() const { return *net_; }
	NodeIndex destination() const { return dest_; }
	const std::vector<RoadIndex>& tracked() const { return tracked_; }
	std::size_t expansions() const { return expansions_; }
	std::size_t states() const { return levels_.size(); }

	/// Belief-optimal expected cost from `source` with nothing yet known.
	double belief_cost(NodeIndex source) { return arrive_belief(source, {}); }

	/**
	 * Expected cost of following the belief-optimal policy when the roads in
	 * `forced` take their given states; other tracked roads follow their priors.
	 */
	double expected_cost(NodeIndex source, const ForcedStates& forced)
	{
		set_world(forced);
		world_memo_.clear();
		if (source == dest_)
			return 0.0;
		return arrive_world(source, {});
	}

	/// Cost of the policy for one full realization; `blocked[r]` is indexed by road.
	double realized_cost(NodeIndex source, const std::vector<char>& blocked)
	{
		KnowledgeKey key;
		NodeIndex cur = source;
		double cost = 0.0;
		for (;;) {
			if (cur == dest_)
				return cost;
			key = reveal_realized(cur, key, blocked);
			const Level& lv = level(key);
			if (!std::isfinite(lv.value[cur]))
				return kInfinity;
			while (!lv.terminal[cur]) {
				auto r = static_cast<RoadIndex>(lv.next[cur]);
				cost += step_cost(r, key);
				cur = net_->other_end(r, cur);
			}
		}
	}

	/// Action chosen at `loc` given knowledge `key`; `loc` must have no unknown incident roads.
	CtpAction action(NodeIndex loc, KnowledgeKey key)
	{
		if (loc == dest_)
			return {CtpAction::Kind::Arrived, 0};
		const Level& lv = level(key);
		if (!std::isfinite(lv.value[loc]) || lv.next[loc] < 0)
			return {CtpAction::Kind::Stuck, 0};
		auto r = static_cast<RoadIndex>(lv.next[loc]);
		int t = slot_[r];
		bool blocked = t >= 0 && (key.blocked & bit(t));
		return {blocked ? CtpAction::Kind::Wait : CtpAction::Kind::Traverse, r};
	}

	/// First action under the most probable revelation at the source (ties resolve to open).
	CtpAction first_action(NodeIndex source, const ForcedStates& forced)
	{
		set_world(forced);
		if (source == dest_)
			return {CtpAction::Kind::Arrived, 0};
		KnowledgeKey key;
		std::uint64_t unknown = node_mask_[source];
		key.known |= unknown;
		for (std::size_t t = 0; t < tracked_.size(); ++t)
			if (unknown & bit(t)) {
				bool blocked = world_forced_known_ & bit(t) ? (world_forced_blocked_ & bit(t)) != 0 : prior_[t] > 0.5;
				if (blocked)
					key.blocked |= bit(t);
			}
		return action(source, key);
	}

	std::string state_key(NodeIndex loc, KnowledgeKey key) const
	{
		std::string s = net_->node_id(loc) + "|";
		for (std::size_t t = 0; t < tracked_.size(); ++t) {
			if (t)
				s += ",";
			char c = !(key.known & bit(t)) ? 'U' : (key.blocked & bit(t)) ? 'B' : 'O';
			s += net_->road_label(tracked_[t]) + "=" + c;
		}
		return s;
	}

	/// Every decision state reachable under `forced` and the priors, with its action.
	std::map<std::string, std::string> policy_table(NodeIndex source, const ForcedStates& forced)
	{
		set_world(forced);
		std::map<std::string, std::string> out;
		if (source == dest_)
			return out;
		std::set<std::pair<NodeIndex, std::pair<std::uint64_t, std::uint64_t>>> visited;
		std::vector<std::pair<NodeIndex, KnowledgeKey>> pending;
		auto push_reveals = [&](NodeIndex v, KnowledgeKey key) {
			for (auto& [k, p] : world_outcomes(v, key))
				if (visited.insert({v, {k.known, k.blocked}}).second)
					pending.push_back({v, k});
		};
		push_reveals(source, {});
		while (!pending.empty()) {
			auto [cur, key] = pending.back();
			pending.pop_back();
			const Level& lv = level(key);
			for (;;) {
				out[state_key(cur, key)] = describe(*net_, action(cur, key));
				if (cur == dest_ || !std::isfinite(lv.value[cur]) || lv.next[cur] < 0)
					break;
				cur = net_->other_end(static_cast<RoadIndex>(lv.next[cur]), cur);
				if (lv.terminal[cur]) {
					if (cur == dest_)
						out[state_key(cur, key)] = "arrived";
					else
						push_reveals(cur, key);
					break;
				}
			}
		}
		return out;
	}

private:
	struct Level
	{
		std::vector<double> value;
		std::vector<std::int32_t> next; // road taken from each regular node, -1 at terminals
		std::vector<char> terminal;		// destination or a node with unknown incident roads
	};

	static std::uint64_t bit(std::size_t t) { return std::uint64_t{1} << t; }

	double step_cost(RoadIndex r, KnowledgeKey key) const
	{
		double len = net_->road(r).length;
		int t = slot_[r];
		if (t >= 0 && (key.blocked & bit(t)))
			return repair_wait_ + len;
		return len;
	}

	const Level& level(KnowledgeKey key)
	{
		if (auto it = levels_.find(key); it != levels_.end())
			return it->second;
		Level lv = compute_level(key);
		return levels_.emplace(key, std::move(lv)).first->second;
	}

	Level compute_level(KnowledgeKey key)
	{
		const std::size_t n = net_->node_count();
		Level lv;
		lv.value.assign(n, kInfinity);
		lv.next.assign(n, -1);
		lv.terminal.assign(n, 0);
		for (NodeIndex v = 0; v < n; ++v) {
			if (v == dest_) {
				lv.terminal[v] = 1;
				lv.value[v] = 0.0;
			} else if (node_mask_[v] & ~key.known) {
				lv.terminal[v] = 1;
				lv.value[v] = reveal_belief(v, key);
			}
		}
		using Entry = std::pair<double, NodeIndex>;
		std::priority_queue<Entry, std::vector<Entry>, std::greater<>> queue;
		for (NodeIndex v = 0; v < n; ++v)
			if (lv.terminal[v] && std::isfinite(lv.value[v]))
				queue.push({lv.value[v], v});
		std::vector<char> settled(n, 0);
		std::vector<NodeIndex> successor(n, n);
		while (!queue.empty()) {
			auto [d, u] = queue.top();
			queue.pop();
			if (settled[u] || d != lv.value[u])
				continue;
			settled[u] = 1;
			++expansions_;
			for (const auto& inc : net_->incident(u)) {
				auto w = inc.neighbor;
				if (lv.terminal[w] || settled[w])
					continue;
				double c = step_cost(inc.road, key);
				if (!std::isfinite(c))
					continue;
				double cand = d + c;
				double cur = lv.value[w];
				bool better = cand < cur - 1e-12 * std::max(1.0, std::abs(cand));
				if (!better && std::isfinite(cur) && std::abs(cand - cur) <= 1e-12 * std::max(1.0, std::abs(cand)))
					better = net_->node_id(u) < net_->node_id(successor[w]) ||
							 (u == successor[w] && inc.road < static_cast<RoadIndex>(lv.next[w]));
				if (better) {
					lv.value[w] = cand;
					lv.next[w] = static_cast<std::int32_t>(inc.road);
					successor[w] = u;
					queue.push({cand, w});
				}
			}
		}
		return lv;
	}

	/// Revelation outcomes at node v under the prior, with their probabilities.
	double reveal_belief(NodeIndex v, KnowledgeKey key)
	{
		std::uint64_t unknown = node_mask_[v] & ~key.known;
		std::vector<std::size_t> slots;
		for (std::size_t t = 0; t < tracked_.size(); ++t)
			if (unknown & bit(t))
				slots.push_back(t);
		double total = 0.0;
		for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << slots.size()); ++mask) {
			double prob = 1.0;
			KnowledgeKey next = key;
			next.known |= unknown;
			for (std::size_t i = 0; i < slots.size(); ++i) {
				bool blocked = mask & bit(i);
				prob *= blocked ? prior_[slots[i]] : 1.0 - prior_[slots[i]];
				if (blocked)
					next.blocked |= bit(slots[i]);
			}
			if (prob == 0.0)
				continue;
			double v_next = level(next).value[v];
			if (!std::isfinite(v_next))
				return kInfinity;
			total += prob * v_next;
		}
		return total;
	}

	double arrive_belief(NodeIndex v, KnowledgeKey key)
	{
		if (v == dest_)
			return 0.0;
		if (node_mask_[v] & ~key.known)
			return reveal_belief(v, key);
		return level(key).value[v];
	}

	void set_world(const ForcedStates& forced)
	{
		world_forced_known_ = 0;
		world_forced_blocked_ = 0;
		for (const auto& [r, state] : forced) {
			if (r >= slot_.size() || slot_[r] < 0)
				throw DataError("forced road " + std::to_string(r) + " is not tracked by the solver");
			world_forced_known_ |= bit(slot_[r]);
			if (state == RoadState::Blocked)
				world_forced_blocked_ |= bit(slot_[r]);
		}
	}

	std::vector<std::pair<KnowledgeKey, double>> world_outcomes(NodeIndex v, KnowledgeKey key) const
	{
		std::uint64_t unknown = node_mask_[v] & ~key.known;
		std::vector<std::size_t> slots;
		for (std::size_t t = 0; t < tracked_.size(); ++t)
			if (unknown & bit(t))
				slots.push_back(t);
		std::vector<std::pair<KnowledgeKey, double>> out;
		for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << slots.size()); ++mask) {
			double prob = 1.0;
			KnowledgeKey next = key;
			next.known |= unknown;
			for (std::size_t i = 0; i < slots.size(); ++i) {
				std::size_t t = slots[i];
				bool blocked = mask & bit(i);
				if (world_forced_known_ & bit(t))
					prob *= (((world_forced_blocked_ & bit(t)) != 0) == blocked) ? 1.0 : 0.0;
				else
					prob *= blocked ? prior_[t] : 1.0 - prior_[t];
				if (blocked)
					next.blocked |= bit(t);
			}
			if (prob > 0.0)
				out.push_back({next, prob});
		}
		return out;
	}

	double arrive_world(NodeIndex v, KnowledgeKey key)
	{
		if (v == dest_)
			return 0.0;
		double total = 0.0;
		for (auto& [next, prob] : world_outcomes(v, key)) {
			double w = world_value(v, next);
			if (!std::isfinite(w))
				return kInfinity;
			total += prob * w;
		}
		return total;
	}

	/// Expected cost under the world model from a state with nothing unknown at `loc`.
	double world_value(NodeIndex loc, KnowledgeKey key)
	{
		std::uint64_t memo_key = key.known * 1000003ull ^ key.blocked * 0x9E3779B97F4A7C15ull ^ loc;
		auto range = world_memo_.equal_range(memo_key);
		for (auto it = range.first; it != range.second; ++it)
			if (std::get<0>(it->second) == loc && std::get<1>(it->second) == key)
				return std::get<2>(it->second);

		double result;
		const Level& lv = level(key);
		if (!std::isfinite(lv.value[loc])) {
			result = kInfinity;
		} else {
			double cost = 0.0;
			NodeIndex cur = loc;
			while (!lv.terminal[cur]) {
				auto r = static_cast<RoadIndex>(lv.next[cur]);
				cost += step_cost(r, key);
				cur = net_->other_end(r, cur);
			}
			result = cur == dest_ ? cost : cost + arrive_world(cur, key);
		}
		world_memo_.emplace(memo_key, std::make_tuple(loc, key, result));
		return result;
	}

	KnowledgeKey reveal_realized(NodeIndex v, KnowledgeKey key, const std::vector<char>& blocked) const
	{
		std::uint64_t unknown = node_mask_[v] & ~key.known;
		key.known |= unknown;
		for (std::size_t t = 0; t < tracked_.size(); ++t)
			if ((unknown & bit(t)) && blocked[tracked_[t]])
				key.blocked |= bit(t);
		return key;
	}

	const RoadNetwork* net_;
	NodeIndex dest_;
	std::vector<RoadIndex> tracked_;
	double repair_wait_;
	std::vector<int> slot_;
	std::vector<double> prior_;
	std::vector<std::uint64_t> node_mask_;
	std::unordered_map<KnowledgeKey, Level, KnowledgeKeyHash> levels_;
	std::unordered_multimap<std::uint64_t, std::tuple<NodeIndex, KnowledgeKey, double>> world_memo_;
	std::uint64_t world_forced_known_ = 0;
	std::uint64_t world_forced_blocked_ = 0;
	std::size_t expansions_ = 0;
};

/// Existing stochastic roads plus every forced road.
inline std::vector<RoadIndex> uncertain_roads(const RoadNetwork& network, const ForcedStates& forced = {})
{
	std::set<RoadIndex> out;
	for (auto r : network.existing_roads())
		if (network.road(r).stochastic)
			out.insert(r);
	for (const auto& [r, state] : forced) {
		if (r >= network.road_count() || !network.road(r).exists)
			throw DataError("forced road does not exist");
		out.insert(r);
	}
	return {out.begin(), out.end()};
}

namespace detail {

inline void check_guard(std::size_t tracked, std::size_t guard)
{
	if (tracked > guard)
		throw NumericalError("exact recourse solve needs " + std::to_string(tracked) + " uncertain roads, guard is " +
							 std::to_string(guard));
}

} // namespace detail

/// Exact expected cost, first action and policy table for one query.
inline CtpSolution solve_exact(const RoadNetwork& network, const CtpQuery& query)
{
	const NodeIndex src = network.node_index(query.source), dst = network.node_index(query.dest);
	auto tracked = uncertain_roads(network, query.forced);
	detail::check_guard(tracked.size(), query.guard_max_stochastic);
	RecourseSolver solver(network, dst, tracked, query.repair_wait);
	CtpSolution sol;
	sol.expected_cost = solver.expected_cost(src, query.forced);
	if (tracked.empty())
		sol.expected_cost = shortest_distances(network, src)[dst]; // same summation order as dijkstra()
	sol.first_action = solver.first_action(src, query.forced);
	sol.policy = solver.policy_table(src, query.forced);
	sol.node_expansions = solver.expansions();
	return sol;
}

/**
 * Re-planning traveller used beyond the exact guard: at every node it routes
 * as if unknown roads were open and known-blocked roads cost a repair wait,
 * takes one step, and replans after each revelation.
 */
inline double replanning_cost(const RoadNetwork& network, NodeIndex source, NodeIndex dest, double repair_wait,
							  const std::vector<char>& blocked, const std::vector<char>& uncertain)
{
	std::vector<char> known(network.road_count(), 0);
	auto reveal = [&](NodeIndex v) {
		for (const auto& inc : network.incident(v))
			known[inc.road] = 1;
	};
	auto cost_of = [&](RoadIndex r) {
		double len = network.road(r).length;
		if (uncertain[r] && known[r] && blocked[r])
			return repair_wait + len;
		return len;
	};
	NodeIndex cur = source;
	double total = 0.0;
	const std::size_t step_cap = 4 * network.node_count() * (network.road_count() + 1) + 16;
	for (std::size_t step = 0; step < step_cap; ++step) {
		if (cur == dest)
			return total;
		reveal(cur);
		auto dist = shortest_distances(network, dest, cost_of);
		if (!std::isfinite(dist[cur]))
			return kInfinity;
		std::optional<Incidence> best;
		for (const auto& inc : network.incident(cur)) {
			double c = cost_of(inc.road);
			if (!std::isfinite(c) || !detail::lengths_tie(c + dist[inc.neighbor], dist[cur]))
				continue;
			if (!best || network.node_id(inc.neighbor) < network.node_id(best->neighbor))
				best = inc;
		}
		if (!best)
			return kInfinity;
		total += cost_of(best->road);
		cur = best->neighbor;
	}
	return kInfinity;
}

struct SimulationResult
{
	double mean = kInfinity;
	double standard_error = kInfinity;
	double unreachable_fraction = 0.0;
	std::size_t realizations = 0;
	bool exact_policy = true;
};

namespace detail {

/// Draws one realization: forced roads take their state, other stochastic roads are Bernoulli(p).
inline void draw_realization(const RoadNetwork& network, const std::vector<RoadIndex>& uncertain, const ForcedStates& forced,
							 std::mt19937_64& rng, std::vector<char>& blocked)
{
	std::uniform_real_distribution<double> unif(0.0, 1.0);
	std::fill(blocked.begin(), blocked.end(), 0);
	for (auto r : uncertain) {
		double u = unif(rng);
		if (auto it = forced.find(r); it != forced.end())
			blocked[r] = it->second == RoadState::Blocked;
		else
			blocked[r] = network.road(r).stochastic && u < network.road(r).block_probability;
	}
}

inline SimulationResult summarize_costs(const std::vector<double>& costs)
{
	SimulationResult res;
	res.realizations = costs.size();
	std::size_t unreachable = 0;
	double sum = 0.0;
	for (double c : costs) {
		if (!std::isfinite(c))
			++unreachable;
		else
			sum += c;
	}
	res.unreachable_fraction = static_cast<double>(unreachable) / static_cast<double>(costs.size());
	if (unreachable)
		return res;
	res.mean = sum / static_cast<double>(costs.size());
	double ss = 0.0;
	for (double c : costs)
		ss += (c - res.mean) * (c - res.mean);
	res.standard_error = costs.size() > 1 ? std::sqrt(ss / static_cast<double>(costs.size() - 1) / static_cast<double>(costs.size())) : 0.0;
	return res;
}

} // namespace detail

/// Monte Carlo cost of the exact policy (or the re-planning traveller past the guard).
inline SimulationResult simulate_policy(const RoadNetwork& network, const CtpQuery& query, std::size_t realizations, std::uint64_t seed)
{
	if (realizations == 0)
		throw DataError("simulate_policy needs at least one realization");
	const NodeIndex src = network.node_index(query.source), dst = network.node_index(query.dest);
	auto tracked = uncertain_roads(network, query.forced);
	const bool exact = tracked.size() <= query.guard_max_stochastic;
	std::optional<RecourseSolver> solver;
	if (exact)
		solver.emplace(network, dst, tracked, query.repair_wait);
	std::vector<char> uncertain(network.road_count(), 0);
	for (auto r : tracked)
		uncertain[r] = 1;

	std::mt19937_64 rng(seed);
	std::vector<char> blocked(network.road_count(), 0);
	std::vector<double> costs;
	costs.reserve(realizations);
	for (std::size_t i = 0; i < realizations; ++i) {
		detail::draw_realization(network, tracked, query.forced, rng, blocked);
		costs.push_back(exact ? solver->realized_cost(src, blocked)
							  : replanning_cost(network, src, dst, query.repair_wait, blocked, uncertain));
	}
	auto res = detail::summarize_costs(costs);
	res.exact_policy = exact;
	return res;
}

/**
 * Expected extra cost from source to dest when `road` is blocked but only
 * discovered at an endpoint, relative to the road being open. Other stochastic
 * roads keep their priors.
 */
inline double delta_distance(const RoadNetwork& network, std::string_view source, std::string_view dest, RoadIndex road,
							 double repair_wait, std::size_t guard = kDefaultStochasticGuard)
{
	const NodeIndex src = network.node_index(source), dst = network.node_index(dest);
	if (road >= network.road_count() || !network.road(road).exists)
		throw DataError("delta_distance: road does not exist");
	auto tracked = uncertain_roads(network, {{road, RoadState::Open}});
	detail::check_guard(tracked.size(), guard);
	RecourseSolver solver(network, dst, tracked, repair_wait);
	double open = solver.expected_cost(src, {{road, RoadState::Open}});
	if (!std::isfinite(open))
		throw DataError("destination '" + std::string(dest) + "' unreachable with road " + network.road_label(road) + " open");
	double blocked = solver.expected_cost(src, {{road, RoadState::Blocked}});
	return std::max(0.0, blocked - open);
}

inline nlohmann::json to_json(const RoadNetwork& network, const CtpSolution& sol)
{
	nlohmann::json j;
	j["expected_cost"] = std::isfinite(sol.expected_cost) ? nlohmann::json(sol.expected_cost) : nlohmann::json("inf");
	j["first_action"] = describe(network, sol.first_action);
	j["policy"] = sol.policy;
	j["node_expansions"] = sol.node_expansions;
	return j;
}

} // namespace ctpglm

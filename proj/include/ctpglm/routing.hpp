#pragma once

#include "netmodel.hpp"

#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <queue>
#include <set>
#include <string>
#include <vector>

namespace ctpglm {

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

/// Relative tolerance used when deciding whether two path lengths tie.
inline constexpr double kGeodesicTolerance = 1e-9;

struct PathResult
{
	double distance = kInfinity;
	std::vector<std::string> path;
	bool reachable = false;
};

namespace detail {

inline bool lengths_tie(double a, double b) { return std::abs(a - b) <= kGeodesicTolerance * std::max(std::abs(a), std::abs(b)); }

} // namespace detail

/**
 * Single-source shortest distances over existing roads, skipping those whose
 * entry in `blocked` is set. `cost` maps a road to its traversal cost; an
 * infinite cost removes the road.
 */
inline std::vector<double> shortest_distances(const RoadNetwork& network, NodeIndex source,
											  const std::function<double(RoadIndex)>& cost)
{
	std::vector<double> dist(network.node_count(), kInfinity);
	std::vector<char> finished(network.node_count(), 0);
	using Entry = std::pair<double, NodeIndex>;
	std::priority_queue<Entry, std::vector<Entry>, std::greater<>> active;
	dist[source] = 0.0;
	active.push({0.0, source});
	while (!active.empty()) {
		auto [d, u] = active.top();
		active.pop();
		if (finished[u])
			continue;
		finished[u] = 1;
		for (const auto& inc : network.incident(u)) {
			double c = cost(inc.road);
			if (!std::isfinite(c))
				continue;
			double cand = d + c;
			if (cand < dist[inc.neighbor]) {
				dist[inc.neighbor] = cand;
				active.push({cand, inc.neighbor});
			}
		}
	}
	return dist;
}

inline std::vector<double> shortest_distances(const RoadNetwork& network, NodeIndex source, const std::vector<char>& blocked = {})
{
	return shortest_distances(network, source, [&](RoadIndex r) {
		return (!blocked.empty() && blocked[r]) ? kInfinity : network.road(r).length;
	});
}

namespace detail {

/// Road is a shortest-path DAG arc u -> v given distances from the source.
inline bool on_geodesic(const std::vector<double>& dist, NodeIndex u, NodeIndex v, double length)
{
	return std::isfinite(dist[u]) && dist[u] < dist[v] && lengths_tie(dist[u] + length, dist[v]);
}

/// Lexicographically smallest node sequence among the shortest paths source -> target.
inline std::vector<NodeIndex> smallest_geodesic(const RoadNetwork& network, NodeIndex source, NodeIndex target,
												const std::vector<double>& dist, const std::function<double(RoadIndex)>& cost)
{
	const std::size_t n = network.node_count();
	// nodes from which target is reachable along DAG arcs
	std::vector<char> reaches(n, 0);
	std::vector<NodeIndex> stack{target};
	reaches[target] = 1;
	while (!stack.empty()) {
		auto v = stack.back();
		stack.pop_back();
		for (const auto& inc : network.incident(v)) {
			auto u = inc.neighbor;
			double c = cost(inc.road);
			if (!reaches[u] && std::isfinite(c) && on_geodesic(dist, u, v, c)) {
				reaches[u] = 1;
				stack.push_back(u);
			}
		}
	}
	std::vector<NodeIndex> path{source};
	NodeIndex cur = source;
	while (cur != target) {
		std::optional<NodeIndex> best;
		for (const auto& inc : network.incident(cur)) {
			double c = cost(inc.road);
			if (!reaches[inc.neighbor] || !std::isfinite(c) || !on_geodesic(dist, cur, inc.neighbor, c))
				continue;
			if (!best || network.node_id(inc.neighbor) < network.node_id(*best))
				best = inc.neighbor;
		}
		cur = *best;
		path.push_back(cur);
	}
	return path;
}

} // namespace detail

/**
 * Dijkstra from `source` treating `blocked` roads as absent. Every node gets a
 * PathResult; ties between shortest paths resolve to the lexicographically
 * smallest node-id sequence.
 */
inline std::map<std::string, PathResult> dijkstra(const RoadNetwork& network, std::string_view source,
												  const std::set<RoadIndex>& blocked = {})
{
	const NodeIndex src = network.node_index(source);
	auto cost = [&](RoadIndex r) { return blocked.count(r) ? kInfinity : network.road(r).length; };
	auto dist = shortest_distances(network, src, cost);
	std::map<std::string, PathResult> out;
	for (NodeIndex v = 0; v < network.node_count(); ++v) {
		PathResult res;
		if (std::isfinite(dist[v])) {
			res.reachable = true;
			res.distance = dist[v];
			for (auto n : detail::smallest_geodesic(network, src, v, dist, cost))
				res.path.push_back(network.node_id(n));
		}
		out.emplace(network.node_id(v), std::move(res));
	}
	return out;
}

inline constexpr std::size_t kEnumerationRoadLimit = 12;

/// Every simple path source -> dest avoiding `blocked`, sorted by distance then node sequence.
inline std::vector<PathResult> enumerate_paths(const RoadNetwork& network, std::string_view source, std::string_view dest,
											   const std::set<RoadIndex>& blocked = {})
{
	if (network.existing_roads().size() > kEnumerationRoadLimit)
		throw DataError("path enumeration limited to " + std::to_string(kEnumerationRoadLimit) + " existing roads");
	const NodeIndex src = network.node_index(source), dst = network.node_index(dest);
	std::vector<PathResult> out;
	std::vector<char> on_path(network.node_count(), 0);
	std::vector<NodeIndex> path{src};
	on_path[src] = 1;
	std::function<void(NodeIndex, double)> extend = [&](NodeIndex u, double dist) {
		if (u == dst) {
			PathResult res{dist, {}, true};
			for (auto n : path)
				res.path.push_back(network.node_id(n));
			out.push_back(std::move(res));
			return;
		}
		for (const auto& inc : network.incident(u)) {
			if (blocked.count(inc.road) || on_path[inc.neighbor])
				continue;
			on_path[inc.neighbor] = 1;
			path.push_back(inc.neighbor);
			extend(inc.neighbor, dist + network.road(inc.road).length);
			path.pop_back();
			on_path[inc.neighbor] = 0;
		}
	};
	extend(src, 0.0);
	std::sort(out.begin(), out.end(), [](const PathResult& a, const PathResult& b) {
		if (a.distance != b.distance)
			return a.distance < b.distance;
		return a.path < b.path;
	});
	return out;
}

struct GeodesicCount
{
	double distance = 0.0;
	double paths = 0.0;				// |A_ij|
	std::vector<double> node_paths; // |A_ij(k)| per node (endpoints carry the full count)
	std::vector<double> road_paths; // |A_ij({k,l})| per road
};

/// Shortest-path counts between two distinct nodes; nullopt when dest is unreachable.
inline std::optional<GeodesicCount> geodesic_count(const RoadNetwork& network, NodeIndex source, NodeIndex dest)
{
	if (source == dest)
		throw DataError("geodesic_count requires distinct endpoints");
	auto dist = shortest_distances(network, source);
	if (!std::isfinite(dist[dest]))
		return std::nullopt;
	const std::size_t n = network.node_count();
	std::vector<NodeIndex> order(n);
	for (std::size_t i = 0; i < n; ++i)
		order[i] = i;
	std::sort(order.begin(), order.end(), [&](NodeIndex a, NodeIndex b) { return dist[a] < dist[b]; });

	std::vector<double> from_source(n, 0.0), to_dest(n, 0.0);
	from_source[source] = 1.0;
	for (auto v : order) {
		if (!std::isfinite(dist[v]) || v == source)
			continue;
		for (const auto& inc : network.incident(v))
			if (detail::on_geodesic(dist, inc.neighbor, v, network.road(inc.road).length))
				from_source[v] += from_source[inc.neighbor];
	}
	to_dest[dest] = 1.0;
	for (auto it = order.rbegin(); it != order.rend(); ++it) {
		auto u = *it;
		if (!std::isfinite(dist[u]) || u == dest)
			continue;
		for (const auto& inc : network.incident(u))
			if (detail::on_geodesic(dist, u, inc.neighbor, network.road(inc.road).length))
				to_dest[u] += to_dest[inc.neighbor];
	}

	GeodesicCount out;
	out.distance = dist[dest];
	out.paths = from_source[dest];
	out.node_paths.assign(n, 0.0);
	out.road_paths.assign(network.road_count(), 0.0);
	for (NodeIndex v = 0; v < n; ++v)
		out.node_paths[v] = from_source[v] * to_dest[v];
	for (auto r : network.existing_roads()) {
		auto a = network.from(r), b = network.to(r);
		double len = network.road(r).length;
		if (detail::on_geodesic(dist, a, b, len))
			out.road_paths[r] = from_source[a] * to_dest[b];
		else if (detail::on_geodesic(dist, b, a, len))
			out.road_paths[r] = from_source[b] * to_dest[a];
	}
	return out;
}

} // namespace ctpglm

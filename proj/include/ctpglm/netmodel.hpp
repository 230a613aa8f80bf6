#pragma once

#include "error.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <queue>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace ctpglm {

using NodeIndex = std::size_t;
using RoadIndex = std::size_t;

struct Intersection
{
	std::string id;
	std::vector<double> local;	// X_i
	std::vector<double> global; // Z_i
};

struct Road
{
	std::string from;
	std::string to;
	double length = 1.0;
	bool exists = true;
	bool stochastic = false;
	double block_probability = 0.0;
	std::vector<double> local;	// X_ij
	std::vector<double> global; // Z_ij
};

struct CovariateNames
{
	std::vector<std::string> node_local;
	std::vector<std::string> node_global;
	std::vector<std::string> edge_local;
	std::vector<std::string> edge_global;
};

/// Unchecked network contents, as read from disk or assembled by a generator.
struct NetworkData
{
	CovariateNames covariate_names;
	std::vector<Intersection> intersections;
	std::vector<Road> roads;
};

enum class Severity
{
	Warning,
	Error
};

struct Diagnostic
{
	Severity severity;
	std::string message;
};

inline bool has_errors(const std::vector<Diagnostic>& diags)
{
	return std::any_of(diags.begin(), diags.end(), [](const Diagnostic& d) { return d.severity == Severity::Error; });
}

namespace detail {

inline std::string pair_key(std::string_view a, std::string_view b)
{
	std::string lo(a), hi(b);
	if (hi < lo)
		std::swap(lo, hi);
	return lo + '\x1f' + hi;
}

} // namespace detail

/// Checks every invariant of the data model. Connectivity problems are warnings.
inline std::vector<Diagnostic> validate(const NetworkData& data)
{
	std::vector<Diagnostic> out;
	auto error = [&](std::string msg) { out.push_back({Severity::Error, std::move(msg)}); };
	auto warning = [&](std::string msg) { out.push_back({Severity::Warning, std::move(msg)}); };

	const auto& names = data.covariate_names;
	std::unordered_map<std::string, std::size_t> index;
	for (std::size_t i = 0; i < data.intersections.size(); ++i) {
		const auto& node = data.intersections[i];
		if (node.id.empty())
			error("intersection #" + std::to_string(i) + " has an empty id");
		if (!index.emplace(node.id, i).second)
			error("duplicate intersection id '" + node.id + "'");
		if (node.local.size() != names.node_local.size())
			error("intersection '" + node.id + "' has " + std::to_string(node.local.size()) + " local covariates, expected " +
				  std::to_string(names.node_local.size()));
		if (node.global.size() != names.node_global.size())
			error("intersection '" + node.id + "' has " + std::to_string(node.global.size()) + " global covariates, expected " +
				  std::to_string(names.node_global.size()));
		for (double v : node.local)
			if (!std::isfinite(v))
				error("intersection '" + node.id + "' has a non-finite local covariate");
		for (double v : node.global)
			if (!std::isfinite(v))
				error("intersection '" + node.id + "' has a non-finite global covariate");
	}

	std::set<std::string> seen_pairs;
	for (std::size_t r = 0; r < data.roads.size(); ++r) {
		const auto& road = data.roads[r];
		const std::string label = "road " + road.from + "-" + road.to;
		bool endpoints_ok = true;
		if (!index.count(road.from)) {
			error(label + " references unknown intersection '" + road.from + "'");
			endpoints_ok = false;
		}
		if (!index.count(road.to)) {
			error(label + " references unknown intersection '" + road.to + "'");
			endpoints_ok = false;
		}
		if (endpoints_ok && road.from == road.to)
			error(label + " is a self-loop");
		if (!seen_pairs.insert(detail::pair_key(road.from, road.to)).second)
			error(label + " duplicates another road between the same intersections");
		if (!(road.length > 0.0) || !std::isfinite(road.length))
			error(label + " has non-positive or non-finite length");
		if (!(road.block_probability >= 0.0 && road.block_probability <= 1.0))
			error(label + " has block_probability outside [0,1]");
		else if (road.stochastic && (road.block_probability == 0.0 || road.block_probability == 1.0))
			warning(label + " is stochastic with degenerate block_probability " + std::to_string(road.block_probability));
		if (road.local.size() != names.edge_local.size())
			error(label + " has " + std::to_string(road.local.size()) + " local covariates, expected " +
				  std::to_string(names.edge_local.size()));
		if (road.global.size() != names.edge_global.size())
			error(label + " has " + std::to_string(road.global.size()) + " global covariates, expected " +
				  std::to_string(names.edge_global.size()));
		for (double v : road.local)
			if (!std::isfinite(v))
				error(label + " has a non-finite local covariate");
		for (double v : road.global)
			if (!std::isfinite(v))
				error(label + " has a non-finite global covariate");
	}
	if (has_errors(out) || data.intersections.empty())
		return out;

	// connectivity over existing roads
	std::vector<std::vector<std::size_t>> adj(data.intersections.size());
	for (const auto& road : data.roads) {
		if (!road.exists)
			continue;
		auto a = index.at(road.from), b = index.at(road.to);
		adj[a].push_back(b);
		adj[b].push_back(a);
	}
	std::vector<char> seen(adj.size(), 0);
	std::queue<std::size_t> queue;
	queue.push(0);
	seen[0] = 1;
	while (!queue.empty()) {
		auto u = queue.front();
		queue.pop();
		for (auto v : adj[u])
			if (!seen[v]) {
				seen[v] = 1;
				queue.push(v);
			}
	}
	std::string unreachable;
	for (std::size_t i = 0; i < adj.size(); ++i)
		if (!seen[i])
			unreachable += (unreachable.empty() ? "" : ",") + data.intersections[i].id;
	if (!unreachable.empty())
		warning("network is not connected; unreachable from '" + data.intersections[0].id + "': " + unreachable);
	return out;
}

struct Incidence
{
	RoadIndex road;
	NodeIndex neighbor;
};

/**
 * Validated, immutable road network. Modified networks are produced as copies
 * through the with_* members.
 */
class RoadNetwork
{
public:
	RoadNetwork() = default;

	explicit RoadNetwork(NetworkData data) : data_(std::move(data))
	{
		auto diags = validate(data_);
		std::string errors;
		for (const auto& d : diags)
			if (d.severity == Severity::Error)
				errors += (errors.empty() ? "" : "; ") + d.message;
		if (!errors.empty())
			throw DataError("invalid network: " + errors);
		build_index();
	}

	const NetworkData& data() const { return data_; }
	const CovariateNames& covariate_names() const { return data_.covariate_names; }

	std::size_t node_count() const { return data_.intersections.size(); }
	std::size_t road_count() const { return data_.roads.size(); }

	const Intersection& node(NodeIndex i) const { return data_.intersections.at(i); }
	const Road& road(RoadIndex r) const { return data_.roads.at(r); }
	const std::string& node_id(NodeIndex i) const { return data_.intersections.at(i).id; }

	std::optional<NodeIndex> find_node(std::string_view id) const
	{
		auto it = node_index_.find(std::string(id));
		if (it == node_index_.end())
			return std::nullopt;
		return it->second;
	}

	NodeIndex node_index(std::string_view id) const
	{
		if (auto idx = find_node(id))
			return *idx;
		throw DataError("unknown intersection '" + std::string(id) + "'");
	}

	NodeIndex from(RoadIndex r) const { return endpoints_.at(r).first; }
	NodeIndex to(RoadIndex r) const { return endpoints_.at(r).second; }
	NodeIndex other_end(RoadIndex r, NodeIndex n) const { return from(r) == n ? to(r) : from(r); }

	/// Existing roads incident to a node, in road-index order.
	std::span<const Incidence> incident(NodeIndex n) const { return adjacency_.at(n); }

	const std::vector<RoadIndex>& existing_roads() const { return existing_; }

	std::optional<RoadIndex> find_road(NodeIndex a, NodeIndex b) const
	{
		auto it = pair_index_.find(detail::pair_key(node_id(a), node_id(b)));
		if (it == pair_index_.end())
			return std::nullopt;
		return it->second;
	}

	std::string road_label(RoadIndex r) const { return road(r).from + "-" + road(r).to; }

	/**
	 * Resolves a road reference. Accepts "A-B" (either orientation) and, when
	 * node ids are unambiguous, the concatenated form "AB".
	 */
	RoadIndex road_index(std::string_view label) const
	{
		std::set<RoadIndex> hits;
		auto try_split = [&](std::string_view a, std::string_view b) {
			auto na = find_node(a), nb = find_node(b);
			if (na && nb)
				if (auto r = find_road(*na, *nb))
					hits.insert(*r);
		};
		for (std::size_t i = 0; i < label.size(); ++i)
			if (label[i] == '-')
				try_split(label.substr(0, i), label.substr(i + 1));
		if (hits.empty())
			for (std::size_t i = 1; i < label.size(); ++i)
				try_split(label.substr(0, i), label.substr(i));
		if (hits.empty())
			throw DataError("unknown road '" + std::string(label) + "'");
		if (hits.size() > 1)
			throw DataError("ambiguous road reference '" + std::string(label) + "'");
		return *hits.begin();
	}

	/// Copy with every road's block probability replaced; roads with p > 0 become stochastic.
	RoadNetwork with_block_probabilities(std::span<const double> p) const
	{
		if (p.size() != road_count())
			throw DataError("block probability vector has wrong length");
		NetworkData copy = data_;
		for (std::size_t r = 0; r < p.size(); ++r) {
			copy.roads[r].block_probability = p[r];
			copy.roads[r].stochastic = p[r] > 0.0;
		}
		return RoadNetwork(std::move(copy));
	}

	/// Copy with one slot of the edge-global covariate block overwritten.
	RoadNetwork with_edge_global(std::size_t slot, std::span<const double> values) const
	{
		if (slot >= data_.covariate_names.edge_global.size())
			throw DataError("edge-global slot " + std::to_string(slot) + " out of range");
		if (values.size() != road_count())
			throw DataError("edge-global column has wrong length");
		NetworkData copy = data_;
		for (std::size_t r = 0; r < values.size(); ++r)
			copy.roads[r].global[slot] = values[r];
		return RoadNetwork(std::move(copy));
	}

	/// Copy with an extra named column appended to the edge-local block.
	RoadNetwork with_edge_local_column(std::string name, std::span<const double> values) const
	{
		if (values.size() != road_count())
			throw DataError("edge-local column has wrong length");
		NetworkData copy = data_;
		copy.covariate_names.edge_local.push_back(std::move(name));
		for (std::size_t r = 0; r < values.size(); ++r)
			copy.roads[r].local.push_back(values[r]);
		return RoadNetwork(std::move(copy));
	}

private:
	void build_index()
	{
		node_index_.clear();
		for (std::size_t i = 0; i < data_.intersections.size(); ++i)
			node_index_.emplace(data_.intersections[i].id, i);
		adjacency_.assign(node_count(), {});
		endpoints_.clear();
		existing_.clear();
		for (std::size_t r = 0; r < data_.roads.size(); ++r) {
			const auto& road = data_.roads[r];
			auto a = node_index_.at(road.from), b = node_index_.at(road.to);
			endpoints_.emplace_back(a, b);
			pair_index_.emplace(detail::pair_key(road.from, road.to), r);
			if (!road.exists)
				continue;
			existing_.push_back(r);
			adjacency_[a].push_back({r, b});
			adjacency_[b].push_back({r, a});
		}
	}

	NetworkData data_;
	std::unordered_map<std::string, NodeIndex> node_index_;
	std::unordered_map<std::string, RoadIndex> pair_index_;
	std::vector<std::pair<NodeIndex, NodeIndex>> endpoints_;
	std::vector<std::vector<Incidence>> adjacency_;
	std::vector<RoadIndex> existing_;
};

inline std::vector<Diagnostic> validate(const RoadNetwork& network) { return validate(network.data()); }

/// Number of existing roads incident to the node.
inline std::size_t degree(const RoadNetwork& network, std::string_view node)
{
	return network.incident(network.node_index(node)).size();
}

inline bool is_connected(const RoadNetwork& network)
{
	if (network.node_count() == 0)
		return true;
	std::vector<char> seen(network.node_count(), 0);
	std::vector<NodeIndex> stack{0};
	seen[0] = 1;
	std::size_t count = 1;
	while (!stack.empty()) {
		auto u = stack.back();
		stack.pop_back();
		for (const auto& inc : network.incident(u))
			if (!seen[inc.neighbor]) {
				seen[inc.neighbor] = 1;
				++count;
				stack.push_back(inc.neighbor);
			}
	}
	return count == network.node_count();
}

// ---------------------------------------------------------------------------
// JSON file format

namespace detail {

inline void reject_unknown_keys(const nlohmann::json& obj, std::initializer_list<std::string_view> allowed, const std::string& where)
{
	if (!obj.is_object())
		throw DataError(where + ": expected a JSON object");
	for (const auto& item : obj.items()) {
		if (std::find(allowed.begin(), allowed.end(), item.key()) == allowed.end())
			throw DataError(where + ": unknown field '" + item.key() + "'");
	}
}

template <typename T>
T json_get(const nlohmann::json& obj, const char* key, const std::string& where, std::optional<T> fallback = std::nullopt)
{
	auto it = obj.find(key);
	if (it == obj.end()) {
		if (fallback)
			return *fallback;
		throw DataError(where + ": missing field '" + key + "'");
	}
	try {
		return it->get<T>();
	} catch (const nlohmann::json::exception& e) {
		throw DataError(where + ": field '" + key + "' has the wrong type");
	}
}

} // namespace detail

inline NetworkData network_data_from_json(const nlohmann::json& j)
{
	using detail::json_get;
	detail::reject_unknown_keys(j, {"covariate_names", "intersections", "roads"}, "network");
	NetworkData data;
	if (auto it = j.find("covariate_names"); it != j.end()) {
		detail::reject_unknown_keys(*it, {"node_local", "node_global", "edge_local", "edge_global"}, "covariate_names");
		using Names = std::vector<std::string>;
		data.covariate_names.node_local = json_get<Names>(*it, "node_local", "covariate_names", Names{});
		data.covariate_names.node_global = json_get<Names>(*it, "node_global", "covariate_names", Names{});
		data.covariate_names.edge_local = json_get<Names>(*it, "edge_local", "covariate_names", Names{});
		data.covariate_names.edge_global = json_get<Names>(*it, "edge_global", "covariate_names", Names{});
	}
	if (!j.contains("intersections") || !j["intersections"].is_array())
		throw DataError("network: missing 'intersections' array");
	if (!j.contains("roads") || !j["roads"].is_array())
		throw DataError("network: missing 'roads' array");
	using Vec = std::vector<double>;
	for (std::size_t i = 0; i < j["intersections"].size(); ++i) {
		const auto& n = j["intersections"][i];
		const std::string where = "intersections[" + std::to_string(i) + "]";
		detail::reject_unknown_keys(n, {"id", "local", "global"}, where);
		data.intersections.push_back({json_get<std::string>(n, "id", where), json_get<Vec>(n, "local", where, Vec{}),
									  json_get<Vec>(n, "global", where, Vec{})});
	}
	for (std::size_t i = 0; i < j["roads"].size(); ++i) {
		const auto& r = j["roads"][i];
		const std::string where = "roads[" + std::to_string(i) + "]";
		detail::reject_unknown_keys(r, {"from", "to", "length", "exists", "stochastic", "block_probability", "local", "global"}, where);
		Road road;
		road.from = json_get<std::string>(r, "from", where);
		road.to = json_get<std::string>(r, "to", where);
		road.length = json_get<double>(r, "length", where);
		road.exists = json_get<bool>(r, "exists", where, true);
		road.stochastic = json_get<bool>(r, "stochastic", where, false);
		road.block_probability = json_get<double>(r, "block_probability", where, 0.0);
		road.local = json_get<Vec>(r, "local", where, Vec{});
		road.global = json_get<Vec>(r, "global", where, Vec{});
		data.roads.push_back(std::move(road));
	}
	return data;
}

inline nlohmann::json to_json(const NetworkData& data)
{
	nlohmann::json j;
	const auto& names = data.covariate_names;
	j["covariate_names"] = {{"node_local", names.node_local},
							{"node_global", names.node_global},
							{"edge_local", names.edge_local},
							{"edge_global", names.edge_global}};
	j["intersections"] = nlohmann::json::array();
	for (const auto& n : data.intersections)
		j["intersections"].push_back({{"id", n.id}, {"local", n.local}, {"global", n.global}});
	j["roads"] = nlohmann::json::array();
	for (const auto& r : data.roads)
		j["roads"].push_back({{"from", r.from},
							  {"to", r.to},
							  {"length", r.length},
							  {"exists", r.exists},
							  {"stochastic", r.stochastic},
							  {"block_probability", r.block_probability},
							  {"local", r.local},
							  {"global", r.global}});
	return j;
}

inline nlohmann::json to_json(const RoadNetwork& network) { return to_json(network.data()); }

inline nlohmann::json read_json_file(const std::filesystem::path& path)
{
	std::ifstream in(path);
	if (!in)
		throw DataError("cannot open '" + path.string() + "'");
	try {
		return nlohmann::json::parse(in);
	} catch (const nlohmann::json::parse_error& e) {
		throw DataError("parse error in '" + path.string() + "': " + e.what());
	}
}

inline void write_text_file(const std::filesystem::path& path, const std::string& text)
{
	std::ofstream out(path, std::ios::binary);
	if (!out)
		throw DataError("cannot write '" + path.string() + "'");
	out << text;
}

/// Parses without the invariant checks; see validate().
inline NetworkData read_network_data(const std::filesystem::path& path)
{
	return network_data_from_json(read_json_file(path));
}

inline RoadNetwork load_network(const std::filesystem::path& path)
{
	try {
		return RoadNetwork(read_network_data(path));
	} catch (const DataError& e) {
		throw DataError(path.string() + ": " + e.what());
	}
}

inline void save_network(const RoadNetwork& network, const std::filesystem::path& path)
{
	write_text_file(path, to_json(network).dump(2) + "\n");
}

} // namespace ctpglm

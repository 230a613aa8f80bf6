#pragma once

#include <ctpglm/bayes.hpp>
#include <ctpglm/centrality.hpp>
#include <ctpglm/coupled.hpp>
#include <ctpglm/ctp.hpp>
#include <ctpglm/elicit.hpp>
#include <ctpglm/glm.hpp>
#include <ctpglm/netmodel.hpp>
#include <ctpglm/routing.hpp>
#include <ctpglm/simgen.hpp>

#include <CLI11.hpp>
#include <json.hpp>
#include <openssl/evp.h>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace ctpglm::cli {

inline constexpr const char* kVersion = "1.0.0";

class UsageError : public std::runtime_error
{
public:
	using std::runtime_error::runtime_error;
};

inline std::string sha256_file(const std::filesystem::path& path)
{
	std::ifstream in(path, std::ios::binary);
	if (!in)
		throw DataError("cannot open '" + path.string() + "'");
	EVP_MD_CTX* ctx = EVP_MD_CTX_new();
	EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
	char buf[1 << 15];
	while (in) {
		in.read(buf, sizeof buf);
		EVP_DigestUpdate(ctx, buf, static_cast<std::size_t>(in.gcount()));
	}
	unsigned char md[EVP_MAX_MD_SIZE];
	unsigned int len = 0;
	EVP_DigestFinal_ex(ctx, md, &len);
	EVP_MD_CTX_free(ctx);
	std::ostringstream hex;
	for (unsigned int i = 0; i < len; ++i)
		hex << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(md[i]);
	return hex.str();
}

/// 12 significant digits, enough to show values like 1.95 without representation noise.
inline std::string num(double v)
{
	if (std::isinf(v))
		return v > 0 ? "inf" : "-inf";
	std::ostringstream s;
	s << std::setprecision(12) << v;
	return s.str();
}

inline std::vector<std::string> split_list(const std::string& s)
{
	std::vector<std::string> out;
	std::string item;
	std::istringstream in(s);
	while (std::getline(in, item, ','))
		if (!csv::trim(item).empty())
			out.push_back(csv::trim(item));
	return out;
}

inline std::vector<double> parse_doubles(const std::string& s, const std::string& flag)
{
	std::vector<double> out;
	for (const auto& item : split_list(s))
		out.push_back(csv::to_double(item, flag));
	return out;
}

struct Common
{
	std::string out_dir = ".";
	std::size_t threads = 1;
	std::optional<std::uint64_t> seed;
	std::string entropy;
};

/// Tracks one invocation: resolved options, input digests, seed and timing for the manifest.
class Run
{
public:
	Run(CLI::App* sub, const Common& common, std::ostream& out)
		: sub_(sub), common_(common), out_(out), start_(std::chrono::steady_clock::now())
	{
		std::filesystem::create_directories(common.out_dir);
	}

	void input(const std::string& path)
	{
		if (!path.empty())
			inputs_[path] = sha256_file(path);
	}

	std::uint64_t seed()
	{
		if (common_.seed) {
			seed_ = *common_.seed;
			return *seed_;
		}
		if (common_.entropy != "ok")
			throw UsageError(sub_->get_name() + " is randomized: pass --seed (or --entropy ok to draw one)");
		std::random_device rd;
		seed_ = (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
		return *seed_;
	}

	std::filesystem::path path(const std::string& name) const { return std::filesystem::path(common_.out_dir) / name; }

	void write(const std::string& name, const std::string& text) { write_text_file(path(name), text); }

	void write_json(const std::string& name, const nlohmann::json& j) { write(name, j.dump(2) + "\n"); }

	/// Writes manifest.json and prints the summary line followed by the manifest path.
	void finish(const std::string& summary)
	{
		nlohmann::json m;
		m["subcommand"] = sub_->get_name();
		nlohmann::json opts = nlohmann::json::object();
		for (const CLI::Option* opt : sub_->get_options()) {
			if (opt->get_lnames().empty())
				continue;
			const std::string name = opt->get_lnames().front();
			if (name == "help")
				continue;
			if (opt->get_expected_max() == 0) {
				opts[name] = opt->count() > 0;
			} else if (opt->count() > 0) {
				auto res = opt->results();
				if (opt->get_expected_max() > 1)
					opts[name] = res;
				else
					opts[name] = res.back();
			} else {
				auto def = opt->get_default_str();
				opts[name] = def.empty() || def == "{}" ? nlohmann::json(nullptr) : nlohmann::json(def);
			}
		}
		m["options"] = opts;
		m["inputs"] = inputs_;
		m["seed"] = seed_ ? nlohmann::json(*seed_) : nlohmann::json(nullptr);
		m["version"] = kVersion;
		m["duration_seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
		write_json("manifest.json", m);
		out_ << summary << "\n" << "manifest=" << path("manifest.json").string() << "\n";
	}

private:
	CLI::App* sub_;
	const Common& common_;
	std::ostream& out_;
	std::chrono::steady_clock::time_point start_;
	std::map<std::string, std::string> inputs_;
	std::optional<std::uint64_t> seed_;
};

inline void add_common(CLI::App* sub, Common& c, bool randomized)
{
	sub->add_option("--out", c.out_dir, "Output directory");
	sub->add_option("--threads", c.threads, "Worker threads")->check(CLI::PositiveNumber);
	if (randomized) {
		sub->add_option("--seed", c.seed, "Random seed (required unless --entropy ok)");
		sub->add_option("--entropy", c.entropy, "Pass 'ok' to run without --seed using a fresh random seed");
	}
}

struct ModelFlags
{
	std::string blocks = "node_local,node_global,edge_local,edge_global";
	std::size_t lags = 0;
	double ridge = 1e-6;
	std::optional<std::size_t> cb_slot;

	ModelSpec spec() const
	{
		ModelSpec s;
		s.node_local = s.node_global = s.edge_local = s.edge_global = false;
		for (const auto& b : split_list(blocks)) {
			if (b == "node_local")
				s.node_local = true;
			else if (b == "node_global")
				s.node_global = true;
			else if (b == "edge_local")
				s.edge_local = true;
			else if (b == "edge_global")
				s.edge_global = true;
			else
				throw UsageError("unknown covariate block '" + b + "'");
		}
		s.lags = lags;
		s.ridge = ridge;
		s.betweenness_slot = cb_slot;
		return s;
	}
};

inline void add_model_flags(CLI::App* sub, ModelFlags& m, bool with_ridge = true)
{
	sub->add_option("--blocks", m.blocks, "Covariate blocks to include (comma list of node_local,node_global,edge_local,edge_global)");
	sub->add_option("--lags", m.lags, "Lag order K");
	if (with_ridge)
		sub->add_option("--ridge", m.ridge, "Ridge penalty on non-intercept coefficients")->check(CLI::NonNegativeNumber);
}

inline std::vector<std::string> period_order(const std::string& s) { return split_list(s); }

inline std::string road_csv_prefix(const RoadNetwork& net, RoadIndex r) { return net.road(r).from + "," + net.road(r).to; }

inline std::set<RoadIndex> parse_blocked(const RoadNetwork& net, const std::string& list)
{
	std::set<RoadIndex> out;
	for (const auto& item : split_list(list))
		out.insert(net.road_index(item));
	return out;
}

inline ForcedStates parse_forced(const RoadNetwork& net, const std::vector<std::string>& items)
{
	ForcedStates out;
	for (const auto& item : items) {
		auto eq = item.find('=');
		if (eq == std::string::npos)
			throw UsageError("--force expects ROAD=open or ROAD=blocked, got '" + item + "'");
		auto state = item.substr(eq + 1);
		RoadState s;
		if (state == "open")
			s = RoadState::Open;
		else if (state == "blocked")
			s = RoadState::Blocked;
		else
			throw UsageError("--force state must be open or blocked, got '" + state + "'");
		out[net.road_index(item.substr(0, eq))] = s;
	}
	return out;
}

inline double parse_xr(const std::string& s)
{
	if (s == "inf" || s == "infinity")
		return kInfinity;
	double v = csv::to_double(s, "--xr");
	if (!(v >= 0.0))
		throw UsageError("--xr must be non-negative");
	return v;
}

inline PairWeights load_pairs(const RoadNetwork& net, const std::string& path)
{
	auto t = csv::read(path);
	auto cs = t.column("source"), cd = t.column("dest"), cw = t.column("weight");
	std::vector<PairWeight> pairs;
	for (std::size_t i = 0; i < t.rows.size(); ++i)
		pairs.push_back({net.node_index(t.rows[i][cs]), net.node_index(t.rows[i][cd]),
						 csv::to_double(t.rows[i][cw], path + ":" + std::to_string(t.line[i]))});
	return PairWeights::weighted(std::move(pairs));
}

/// Per-road probabilities keyed by period: road_from,road_to,period,probability.
inline std::vector<std::vector<double>> load_period_probabilities(const RoadNetwork& net, const DeploymentPanel& panel,
																  const std::string& path)
{
	auto t = csv::read(path);
	auto cf = t.column("road_from"), ct = t.column("road_to"), cp = t.column("period"), cv = t.column("probability");
	const double nan = std::numeric_limits<double>::quiet_NaN();
	std::vector<std::vector<double>> out(panel.period_count(), std::vector<double>(net.road_count(), nan));
	for (std::size_t i = 0; i < t.rows.size(); ++i) {
		const auto loc = path + ":" + std::to_string(t.line[i]);
		auto r = net.road_index(t.rows[i][cf] + "-" + t.rows[i][ct]);
		auto p = panel.period_index(t.rows[i][cp]);
		out[p][r] = csv::to_double(t.rows[i][cv], loc);
	}
	for (std::size_t p = 0; p < out.size(); ++p)
		for (auto r : net.existing_roads())
			if (std::isnan(out[p][r]))
				throw DataError(path + ": no probability for road " + net.road_label(r) + " in period '" + panel.periods[p] + "'");
	return out;
}

/// Posterior draws written by `update` (one column per coefficient).
inline PosteriorSamples load_samples(const std::string& path)
{
	auto t = csv::read(path);
	PosteriorSamples s;
	s.columns = t.header;
	s.draws.resize(static_cast<Eigen::Index>(t.rows.size()), static_cast<Eigen::Index>(t.header.size()));
	for (std::size_t i = 0; i < t.rows.size(); ++i)
		for (std::size_t k = 0; k < t.header.size(); ++k)
			s.draws(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) =
				csv::to_double(t.rows[i][k], path + ":" + std::to_string(t.line[i]));
	if (t.rows.empty())
		throw DataError(path + ": no draws");
	return s;
}

inline std::string diagnostics_text(const std::vector<Diagnostic>& diags)
{
	std::string out;
	for (const auto& d : diags)
		out += std::string(d.severity == Severity::Error ? "error: " : "warning: ") + d.message + "\n";
	return out;
}

inline std::string warnings_of(const RoadNetwork& net)
{
	return diagnostics_text(validate(net));
}

/**
 * Runs one invocation. args[0] is the program name. Returns the process exit
 * code: 0 success, 1 usage, 2 data or validation, 3 numerical failure.
 */
inline int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err)
{
	CLI::App app{"Road-network risk modelling: Canadian-traveller routing, betweenness and probit deployment models", "ctpglm"};
	app.require_subcommand(1);
	app.set_version_flag("--version", kVersion);
	app.option_defaults()->always_capture_default();

	Common common;
	std::string network_path, panel_path, from, to, blocked, xr = "inf", periods_order;
	std::vector<std::string> forced;
	std::size_t guard = kDefaultStochasticGuard, samples = 0;
	ModelFlags model;

	// validate
	auto* validate_cmd = app.add_subcommand("validate", "Check a network file and report diagnostics");
	validate_cmd->add_option("--network", network_path, "Network JSON file")->required();
	add_common(validate_cmd, common, false);

	// route
	auto* route_cmd = app.add_subcommand("route", "Shortest path with blockages known in advance");
	route_cmd->add_option("--network", network_path, "Network JSON file")->required();
	route_cmd->add_option("--from", from, "Source intersection")->required();
	route_cmd->add_option("--to", to, "Destination intersection (all destinations if omitted)");
	route_cmd->add_option("--blocked", blocked, "Comma list of roads known to be blocked, e.g. BD or B-D");
	add_common(route_cmd, common, false);

	// ctp-solve
	auto* ctp_cmd = app.add_subcommand("ctp-solve", "Optimal routing with recourse when blockages are discovered on arrival");
	ctp_cmd->add_option("--network", network_path, "Network JSON file")->required();
	ctp_cmd->add_option("--from", from, "Source intersection")->required();
	ctp_cmd->add_option("--to", to, "Destination intersection")->required();
	ctp_cmd->add_option("--xr", xr, "Repair wait cost for crossing a blocked road (inf = never)");
	ctp_cmd->add_option("--force", forced, "Fix a road's true state: ROAD=open or ROAD=blocked (repeatable)")->default_str("");
	ctp_cmd->add_option("--guard", guard, "Maximum uncertain roads for the exact solver");
	ctp_cmd->add_option("--samples", samples, "Also estimate the cost by simulating this many realizations");
	add_common(ctp_cmd, common, true);

	// centrality
	std::string pairs_path;
	auto* cent_cmd = app.add_subcommand("centrality", "Closeness, betweenness and Canadian betweenness");
	cent_cmd->add_option("--network", network_path, "Network JSON file")->required();
	cent_cmd->add_option("--xr", xr, "Repair wait cost (inf = never)");
	cent_cmd->add_option("--samples", samples, "Monte Carlo realizations for Canadian betweenness (0 = exact)");
	cent_cmd->add_option("--pairs", pairs_path, "CSV source,dest,weight of weighted pairs (default: all pairs, equal weight)");
	cent_cmd->add_option("--guard", guard, "Maximum uncertain roads for exact solves");
	add_common(cent_cmd, common, true);

	// fit
	std::string period;
	bool any_period = false;
	auto* fit_cmd = app.add_subcommand("fit", "Fit the probit deployment model");
	fit_cmd->add_option("--network", network_path, "Network JSON file")->required();
	fit_cmd->add_option("--panel", panel_path, "Deployment panel CSV (road_from,road_to,period,y)")->required();
	fit_cmd->add_option("--period", period, "Fit a single period (default: all periods from the K-th on)");
	fit_cmd->add_flag("--any-period", any_period, "Response is 1 if the road saw a deployment in any period");
	fit_cmd->add_option("--period-order", periods_order, "Comma list fixing the period order (default: lexicographic)");
	add_model_flags(fit_cmd, model);
	add_common(fit_cmd, common, false);

	// fit-coupled
	double tol = 1e-6, damping = 0.5;
	std::size_t max_iter = 100;
	auto* coupled_cmd = app.add_subcommand("fit-coupled", "Fit the model with Canadian betweenness as a self-consistent covariate");
	coupled_cmd->add_option("--network", network_path, "Network JSON file")->required();
	coupled_cmd->add_option("--panel", panel_path, "Deployment panel CSV")->required();
	coupled_cmd->add_option("--cb-slot", model.cb_slot, "Index in the edge-global block that receives Canadian betweenness")->required();
	coupled_cmd->add_option("--xr", xr, "Repair wait cost (inf = never)");
	coupled_cmd->add_option("--tol", tol, "Stop when no probability changes by more than this");
	coupled_cmd->add_option("--max-iter", max_iter, "Maximum outer iterations");
	coupled_cmd->add_option("--damping", damping, "Weight kept on the previous probabilities, in [0, 1)");
	coupled_cmd->add_option("--samples", samples, "Monte Carlo realizations for betweenness (0 = exact)");
	coupled_cmd->add_option("--guard", guard, "Maximum uncertain roads for exact solves");
	coupled_cmd->add_flag("--any-period", any_period, "Response is 1 if the road saw a deployment in any period");
	coupled_cmd->add_option("--period-order", periods_order, "Comma list fixing the period order");
	add_model_flags(coupled_cmd, model);
	add_common(coupled_cmd, common, true);

	// simulate
	std::string family = "random", mu = "0", alpha, beta, gamma, delta, tau;
	std::size_t nodes = 6, roads = 8, rows = 3, cols = 3, periods = 1;
	std::optional<std::size_t> sim_cb_slot;
	auto* sim_cmd = app.add_subcommand("simulate", "Generate a synthetic network and deployment panel from a known model");
	sim_cmd->add_option("--family", family, "Network family: random or grid")->check(CLI::IsMember({"random", "grid"}));
	sim_cmd->add_option("--nodes", nodes, "Intersections (random family)");
	sim_cmd->add_option("--roads", roads, "Roads (random family)");
	sim_cmd->add_option("--rows", rows, "Grid rows");
	sim_cmd->add_option("--cols", cols, "Grid columns");
	sim_cmd->add_option("--periods", periods, "Periods to simulate");
	sim_cmd->add_option("--mu", mu, "True intercept");
	sim_cmd->add_option("--alpha", alpha, "True node-local coefficients (comma list; sets the block size)");
	sim_cmd->add_option("--beta", beta, "True node-global coefficients");
	sim_cmd->add_option("--gamma", gamma, "True edge-local coefficients");
	sim_cmd->add_option("--delta", delta, "True edge-global coefficients");
	sim_cmd->add_option("--tau", tau, "True lag coefficients");
	sim_cmd->add_option("--cb-slot", sim_cb_slot, "Edge-global slot generated as Canadian betweenness");
	sim_cmd->add_option("--xr", xr, "Repair wait cost for the generated betweenness");
	add_common(sim_cmd, common, true);

	// update
	std::string prior_path;
	double prior_sd = 10.0;
	std::size_t warmup = 2000, draws = 5000;
	auto* update_cmd = app.add_subcommand("update", "Sequential Bayesian updating over the panel's periods");
	update_cmd->add_option("--network", network_path, "Network JSON file")->required();
	update_cmd->add_option("--panel", panel_path, "Deployment panel CSV")->required();
	update_cmd->add_option("--prior", prior_path, "Prior JSON (mean, covariance); default independent normal");
	update_cmd->add_option("--prior-sd", prior_sd, "Standard deviation of the default prior")->check(CLI::PositiveNumber);
	update_cmd->add_option("--warmup", warmup, "Adaptive warm-up iterations per period");
	update_cmd->add_option("--draws", draws, "Kept draws per period")->check(CLI::PositiveNumber);
	update_cmd->add_option("--period-order", periods_order, "Comma list fixing the period order");
	add_model_flags(update_cmd, model, false);
	add_common(update_cmd, common, true);

	// elicit
	std::string assessment_path, expert;
	double sigma2 = 1.0;
	std::size_t reps = 1000;
	auto* elicit_cmd = app.add_subcommand("elicit", "Turn expert road-level beliefs into a coefficient prior");
	elicit_cmd->add_option("--network", network_path, "Network JSON file")->required();
	elicit_cmd->add_option("--assessment", assessment_path, "CSV road_from,road_to,mean,sd,expert_id")->required();
	elicit_cmd->add_option("--expert", expert, "Expert id to use when the file has several");
	elicit_cmd->add_option("--sigma2", sigma2, "Auxiliary noise variance")->check(CLI::PositiveNumber);
	elicit_cmd->add_option("--reps", reps, "Repetitions, the first at the assessed means")->check(CLI::PositiveNumber);
	elicit_cmd->add_option("--blocks", model.blocks, "Covariate blocks to include");
	add_common(elicit_cmd, common, true);

	// predict
	std::string model_path, posterior_path;
	auto* predict_cmd = app.add_subcommand("predict", "Deployment probabilities for the next period");
	predict_cmd->add_option("--network", network_path, "Network JSON file")->required();
	auto* model_opt = predict_cmd->add_option("--model", model_path, "Coefficients JSON from fit or fit-coupled");
	auto* post_opt = predict_cmd->add_option("--posterior", posterior_path, "Posterior draws CSV from update");
	model_opt->excludes(post_opt);
	predict_cmd->add_option("--panel", panel_path, "Deployment panel CSV, required when the model has lags");
	predict_cmd->add_option("--period-order", periods_order, "Comma list fixing the period order");
	add_model_flags(predict_cmd, model, false);
	add_common(predict_cmd, common, false);

	// pool
	std::string sources;
	double eta = 1.0;
	auto* pool_cmd = app.add_subcommand("pool", "Pool per-period predictions with multiplicative weights");
	pool_cmd->add_option("--network", network_path, "Network JSON file")->required();
	pool_cmd->add_option("--sources", sources, "Comma list of prediction CSVs (road_from,road_to,period,probability)")->required();
	pool_cmd->add_option("--panel", panel_path, "Realized outcomes as a deployment panel CSV")->required();
	pool_cmd->add_option("--eta", eta, "Learning rate")->check(CLI::NonNegativeNumber);
	pool_cmd->add_option("--period-order", periods_order, "Comma list fixing the period order");
	add_common(pool_cmd, common, false);

	std::vector<std::string> argv_rest(args.rbegin(), args.rend() - 1);
	try {
		app.parse(argv_rest);
	} catch (const CLI::CallForHelp&) {
		auto* target = app.get_subcommands().empty() ? &app : app.get_subcommands().front();
		out << target->help();
		return 0;
	} catch (const CLI::CallForVersion&) {
		out << kVersion << "\n";
		return 0;
	} catch (const CLI::ParseError& e) {
		err << "error: " << e.what() << "\n";
		return 1;
	}

	CLI::App* sub = app.get_subcommands().front();
	try {
		Run run(sub, common, out);
		auto load = [&](const std::string& path) {
			run.input(path);
			return load_network(path);
		};
		auto load_panel_file = [&](const RoadNetwork& net) {
			run.input(panel_path);
			return load_panel(net, panel_path, period_order(periods_order));
		};

		if (sub == validate_cmd) {
			run.input(network_path);
			auto diags = validate(read_network_data(network_path));
			std::size_t errors = 0, warnings = 0;
			nlohmann::json j;
			j["errors"] = nlohmann::json::array();
			j["warnings"] = nlohmann::json::array();
			for (const auto& d : diags) {
				bool is_err = d.severity == Severity::Error;
				(is_err ? errors : warnings)++;
				j[is_err ? "errors" : "warnings"].push_back(d.message);
			}
			j["valid"] = errors == 0;
			run.write_json("validation.json", j);
			err << diagnostics_text(diags);
			run.finish("valid=" + std::string(errors ? "false" : "true") + " errors=" + std::to_string(errors) +
					   " warnings=" + std::to_string(warnings));
			return errors ? 2 : 0;
		}

		if (sub == route_cmd) {
			auto net = load(network_path);
			auto result = dijkstra(net, from, parse_blocked(net, blocked));
			auto entry = [](const PathResult& r) {
				nlohmann::json e;
				e["reachable"] = r.reachable;
				e["distance"] = r.reachable ? nlohmann::json(r.distance) : nlohmann::json("inf");
				e["path"] = r.path;
				return e;
			};
			nlohmann::json j;
			j["from"] = from;
			std::string summary;
			if (!to.empty()) {
				net.node_index(to);
				const auto& r = result.at(to);
				j["to"] = to;
				j["route"] = entry(r);
				std::string path;
				for (std::size_t i = 0; i < r.path.size(); ++i)
					path += (i ? "," : "") + r.path[i];
				summary = r.reachable ? "distance=" + num(r.distance) + " path=" + path : "reachable=false";
			} else {
				j["routes"] = nlohmann::json::object();
				std::size_t reachable = 0;
				for (const auto& [id, r] : result) {
					j["routes"][id] = entry(r);
					reachable += r.reachable;
				}
				summary = "reachable=" + std::to_string(reachable) + "/" + std::to_string(result.size());
			}
			run.write_json("route.json", j);
			run.finish(summary);
			return 0;
		}

		if (sub == ctp_cmd) {
			auto net = load(network_path);
			CtpQuery q;
			q.source = from;
			q.dest = to;
			q.repair_wait = parse_xr(xr);
			q.forced = parse_forced(net, forced);
			q.guard_max_stochastic = guard;
			auto sol = solve_exact(net, q);
			auto j = to_json(net, sol);
			std::string summary = "expected_cost=" + num(sol.expected_cost) + " first_action=" + describe(net, sol.first_action);
			if (samples > 0) {
				auto sim = simulate_policy(net, q, samples, run.seed());
				j["simulation"] = {{"realizations", sim.realizations},
								   {"mean", std::isfinite(sim.mean) ? nlohmann::json(sim.mean) : nlohmann::json("inf")},
								   {"standard_error", std::isfinite(sim.standard_error) ? nlohmann::json(sim.standard_error)
																						: nlohmann::json("inf")},
								   {"unreachable_fraction", sim.unreachable_fraction}};
				summary += " simulated_mean=" + num(sim.mean) + " se=" + num(sim.standard_error);
			}
			run.write_json("solution.json", j);
			run.finish(summary);
			return 0;
		}

		if (sub == cent_cmd) {
			auto net = load(network_path);
			CanadianBetweennessOptions o;
			o.repair_wait = parse_xr(xr);
			o.guard = guard;
			o.threads = common.threads;
			if (samples > 0)
				o.mode = BetweennessMode::monte_carlo(samples, run.seed());
			PairWeights w = PairWeights::equal(net);
			if (!pairs_path.empty()) {
				run.input(pairs_path);
				w = load_pairs(net, pairs_path);
			}
			auto rep = centrality_report(net, w, o);
			const std::string method = o.mode.sampled() ? "sampled" : "exact";
			std::string roads_csv = "road,edge_betweenness,canadian_betweenness,method,se\n";
			RoadIndex top = 0;
			double top_value = -1.0;
			for (auto r : net.existing_roads()) {
				roads_csv += net.road_label(r) + "," + csv::format(rep.edge_betweenness[r]) + "," +
							 csv::format(rep.canadian.value[r]) + "," + method + "," + csv::format(rep.canadian.standard_error[r]) + "\n";
				if (rep.canadian.value[r] > top_value) {
					top_value = rep.canadian.value[r];
					top = r;
				}
			}
			std::string nodes_csv = "node,degree,closeness,betweenness\n";
			for (NodeIndex v = 0; v < net.node_count(); ++v)
				nodes_csv += net.node_id(v) + "," + std::to_string(rep.degree[v]) + "," + csv::format(rep.closeness[v]) + "," +
							 csv::format(rep.node_betweenness[v]) + "\n";
			run.write("centrality.csv", roads_csv);
			run.write("nodes.csv", nodes_csv);
			for (const auto& s : rep.canadian.skipped)
				err << "warning: pair " << s << " skipped (destination unreachable with the road open)\n";
			run.finish("roads=" + std::to_string(net.existing_roads().size()) + " method=" + method + " max_canadian=" +
					   (net.existing_roads().empty() ? std::string("none") : net.road_label(top) + ":" + num(top_value)) +
					   " skipped_pairs=" + std::to_string(rep.canadian.skipped.size()));
			return 0;
		}

		if (sub == fit_cmd) {
			auto net = load(network_path);
			auto panel = load_panel_file(net);
			auto spec = model.spec();
			if (any_period && !period.empty())
				throw UsageError("--period and --any-period are exclusive");
			Design d = any_period		  ? build_any_period_design(net, spec, panel)
					   : !period.empty() ? build_design(net, spec, panel, period)
										 : build_stacked_design(net, spec, panel);
			auto coef = fit_model(net, spec, d);
			if (coef.fit_info->separation)
				err << "warning: fitted linear predictor exceeds +/-" << kSeparationBound << " (possible separation)\n";
			run.write_json("coefficients.json", to_json(coef));
			run.finish("rows=" + std::to_string(d.rows()) + " log_likelihood=" + num(coef.fit_info->log_likelihood) +
					   " iterations=" + std::to_string(coef.fit_info->iterations) + " mu=" + num(coef.mu));
			return 0;
		}

		if (sub == coupled_cmd) {
			auto net = load(network_path);
			auto panel = load_panel_file(net);
			CoupledOptions o;
			o.tol = tol;
			o.max_iter = max_iter;
			o.damping = damping;
			o.repair_wait = parse_xr(xr);
			o.guard = guard;
			o.threads = common.threads;
			o.response = any_period ? ResponseMode::AnyPeriod : ResponseMode::Stacked;
			if (samples > 0)
				o.mode = BetweennessMode::monte_carlo(samples, run.seed());
			auto state = fit_coupled(net, model.spec(), panel, o);
			run.write_json("coefficients.json", to_json(*state.coefficients));
			run.write("trajectory.csv", trajectory_csv(state));
			std::string probs = "road_from,road_to,probability,canadian_betweenness\n";
			for (auto r : net.existing_roads())
				probs += road_csv_prefix(net, r) + "," + csv::format(state.probabilities[r]) + "," + csv::format(state.betweenness[r]) + "\n";
			run.write("probabilities.csv", probs);
			run.finish("converged=" + std::string(state.converged ? "true" : "false") + " iterations=" +
					   std::to_string(state.iteration) + " max_delta=" + num(state.max_delta));
			return state.converged ? 0 : 3;
		}

		if (sub == sim_cmd) {
			ScenarioConfig cfg;
			cfg.family = family == "grid" ? NetworkFamily::Grid : NetworkFamily::Random;
			cfg.nodes = nodes;
			cfg.roads = roads;
			cfg.grid_rows = rows;
			cfg.grid_cols = cols;
			cfg.periods = periods;
			cfg.truth.mu = csv::to_double(mu, "--mu");
			cfg.truth.alpha = parse_doubles(alpha, "--alpha");
			cfg.truth.beta = parse_doubles(beta, "--beta");
			cfg.truth.gamma = parse_doubles(gamma, "--gamma");
			cfg.truth.delta = parse_doubles(delta, "--delta");
			cfg.truth.tau = parse_doubles(tau, "--tau");
			cfg.seed = run.seed();
			if (sim_cb_slot) {
				BetweennessInjection inj;
				inj.slot = *sim_cb_slot;
				inj.repair_wait = parse_xr(xr);
				inj.threads = common.threads;
				cfg.betweenness = inj;
			}
			auto sc = generate_scenario(cfg);
			save_network(sc.network, run.path("network.json"));
			run.write("panel.csv", panel_to_csv(sc.network, sc.panel));
			std::string probs = "road_from,road_to,period,probability\n";
			std::size_t attacks = 0;
			for (std::size_t t = 0; t < sc.panel.period_count(); ++t)
				for (auto r : sc.network.existing_roads()) {
					probs += road_csv_prefix(sc.network, r) + "," + sc.panel.periods[t] + "," + csv::format(sc.probabilities[r][t]) + "\n";
					attacks += static_cast<std::size_t>(sc.panel.outcomes[r][t]);
				}
			run.write("probabilities.csv", probs);
			run.finish("nodes=" + std::to_string(sc.network.node_count()) + " roads=" + std::to_string(sc.network.road_count()) +
					   " periods=" + std::to_string(sc.panel.period_count()) + " deployments=" + std::to_string(attacks));
			return 0;
		}

		if (sub == update_cmd) {
			auto net = load(network_path);
			auto panel = load_panel_file(net);
			auto spec = model.spec();
			auto columns = design_columns(net, spec);
			GaussianPrior prior = GaussianPrior::isotropic(columns, prior_sd);
			if (!prior_path.empty()) {
				run.input(prior_path);
				prior = gaussian_prior_from_json(read_json_file(prior_path));
				if (!prior.columns.empty() && prior.columns != columns)
					throw DataError("prior columns do not match the model's design columns");
				prior.columns = columns;
			}
			SamplerOptions so;
			so.warmup = warmup;
			so.draws = draws;
			so.seed = run.seed();
			auto res = sequential_update(prior, net, spec, panel, so);
			const auto& final_prior = res.posteriors.back();
			run.write_json("prior.json", to_json(final_prior));
			nlohmann::json steps = nlohmann::json::array();
			for (std::size_t t = 0; t < res.posteriors.size(); ++t)
				steps.push_back({{"period", res.labels[t]}, {"posterior", to_json(res.posteriors[t])}});
			run.write_json("posteriors.json", steps);
			run.write("posterior.csv", samples_csv(res.final_samples));
			std::string summary = "periods=" + std::to_string(res.posteriors.size()) +
								  " acceptance=" + num(res.final_samples.acceptance_rate) + " mean_mu=" + num(final_prior.mean(0));
			run.finish(summary);
			return 0;
		}

		if (sub == elicit_cmd) {
			auto net = load(network_path);
			run.input(assessment_path);
			auto all = load_assessments(net, assessment_path);
			const ExpertAssessment* chosen = nullptr;
			if (expert.empty()) {
				if (all.size() != 1)
					throw UsageError("assessment file has " + std::to_string(all.size()) + " experts; choose one with --expert");
				chosen = &all.front();
			} else {
				for (const auto& a : all)
					if (a.expert_id == expert)
						chosen = &a;
				if (!chosen)
					throw DataError("no assessments from expert '" + expert + "'");
			}
			ElicitConfig cfg;
			cfg.sigma2 = sigma2;
			cfg.repetitions = reps;
			cfg.seed = reps > 1 ? run.seed() : 0;
			auto spec = model.spec();
			spec.lags = 0;
			auto prior = elicit_prior(net, spec, *chosen, cfg);
			run.write_json("prior.json", to_json(prior));
			run.finish("expert=" + chosen->expert_id + " repetitions=" + std::to_string(reps) + " mean_mu=" + num(prior.mean(0)) +
					   " sd_mu=" + num(std::sqrt(prior.covariance(0, 0))));
			return 0;
		}

		if (sub == predict_cmd) {
			auto net = load(network_path);
			if (model_path.empty() == posterior_path.empty())
				throw UsageError("predict needs exactly one of --model or --posterior");
			ModelSpec spec = model.spec();
			std::optional<Coefficients> coef;
			if (!model_path.empty()) {
				run.input(model_path);
				coef = coefficients_from_json(net, read_json_file(model_path));
				spec = coef->spec;
			}
			Design d;
			std::optional<DeploymentPanel> panel;
			if (!panel_path.empty())
				panel = load_panel_file(net);
			if (spec.lags > 0 && !panel)
				throw UsageError("the model has lag terms; pass --panel with the observed history");
			d = panel ? build_next_period_design(net, spec, *panel) : build_covariate_design(net, spec);
			Eigen::VectorXd p;
			if (coef) {
				p = predict(*coef, d);
			} else {
				run.input(posterior_path);
				auto s = load_samples(posterior_path);
				if (s.columns != d.columns)
					throw DataError("posterior columns do not match the design columns for the given blocks and lags");
				p = posterior_predictive(s, d);
			}
			std::string text = "road_from,road_to,probability\n";
			double mean = 0.0;
			for (Eigen::Index i = 0; i < d.rows(); ++i) {
				text += road_csv_prefix(net, d.roads[static_cast<std::size_t>(i)]) + "," + csv::format(p(i)) + "\n";
				mean += p(i);
			}
			run.write("predictions.csv", text);
			run.finish("roads=" + std::to_string(d.rows()) + " mean_probability=" + num(d.rows() ? mean / static_cast<double>(d.rows()) : 0.0));
			return 0;
		}

		if (sub == pool_cmd) {
			auto net = load(network_path);
			auto panel = load_panel_file(net);
			auto files = split_list(sources);
			std::vector<std::vector<std::vector<double>>> src;
			const auto& roads_list = net.existing_roads();
			for (const auto& f : files) {
				run.input(f);
				auto full = load_period_probabilities(net, panel, f);
				std::vector<std::vector<double>> by_period;
				for (const auto& row : full) {
					std::vector<double> v;
					for (auto r : roads_list)
						v.push_back(row[r]);
					by_period.push_back(std::move(v));
				}
				src.push_back(std::move(by_period));
			}
			std::vector<std::vector<int>> outcomes;
			for (std::size_t t = 0; t < panel.period_count(); ++t) {
				std::vector<int> y;
				for (auto r : roads_list)
					y.push_back(panel.outcomes[r][t]);
				outcomes.push_back(std::move(y));
			}
			auto res = pool_predictions(src, outcomes, eta);
			std::string pooled = "road_from,road_to,period,probability\n";
			for (std::size_t t = 0; t < res.pooled.size(); ++t)
				for (std::size_t i = 0; i < roads_list.size(); ++i)
					pooled += road_csv_prefix(net, roads_list[i]) + "," + panel.periods[t] + "," + csv::format(res.pooled[t][i]) + "\n";
			std::string weights = "after_period";
			for (std::size_t k = 0; k < files.size(); ++k)
				weights += ",source" + std::to_string(k + 1);
			weights += "\n";
			for (std::size_t t = 0; t < res.weights.size(); ++t) {
				weights += t == 0 ? std::string("initial") : panel.periods[t - 1];
				for (double w : res.weights[t])
					weights += "," + csv::format(w);
				weights += "\n";
			}
			run.write("pooled.csv", pooled);
			run.write("weights.csv", weights);
			std::string final_w;
			for (std::size_t k = 0; k < res.weights.back().size(); ++k)
				final_w += (k ? "," : "") + num(res.weights.back()[k]);
			run.finish("periods=" + std::to_string(panel.period_count()) + " final_weights=" + final_w);
			return 0;
		}
	} catch (const UsageError& e) {
		err << "error: " << e.what() << "\n";
		return 1;
	} catch (const DataError& e) {
		err << "error: " << e.what() << "\n";
		return 2;
	} catch (const NumericalError& e) {
		err << "error: " << e.what() << "\n";
		return 3;
	} catch (const std::filesystem::filesystem_error& e) {
		err << "error: " << e.what() << "\n";
		return 2;
	} catch (const nlohmann::json::exception& e) {
		err << "error: " << e.what() << "\n";
		return 2;
	}
	return 1;
}

} // namespace ctpglm::cli

#pragma once

#include "csv.hpp"
#include "netmodel.hpp"
#include "normal.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

namespace ctpglm {

struct ModelSpec
{
	bool node_local = true;	 // alpha, on X_i + X_j
	bool node_global = true; // beta, on Z_i + Z_j
	bool edge_local = true;	 // gamma, on X_ij
	bool edge_global = true; // delta, on Z_ij
	std::size_t lags = 0;	 // K
	std::optional<std::size_t> betweenness_slot;
	// Holds the betweenness coefficient at a known value (entered as an offset) instead of estimating it.
	std::optional<double> betweenness_coefficient;
	double ridge = 1e-6;
};

/// Outcome matrix Y[road][period]; entries for roads that do not exist are -1.
struct DeploymentPanel
{
	std::vector<std::string> periods;
	std::vector<std::vector<int>> outcomes;

	std::size_t period_count() const { return periods.size(); }

	std::size_t period_index(std::string_view label) const
	{
		for (std::size_t t = 0; t < periods.size(); ++t)
			if (periods[t] == label)
				return t;
		throw DataError("unknown period '" + std::string(label) + "'");
	}

	int at(RoadIndex r, std::size_t t) const { return outcomes.at(r).at(t); }
};

inline void check_panel(const RoadNetwork& network, const DeploymentPanel& panel)
{
	if (panel.outcomes.size() != network.road_count())
		throw DataError("panel covers " + std::to_string(panel.outcomes.size()) + " roads, network has " +
						std::to_string(network.road_count()));
	for (auto r : network.existing_roads()) {
		if (panel.outcomes[r].size() != panel.periods.size())
			throw DataError("panel row for road " + network.road_label(r) + " has wrong length");
		for (std::size_t t = 0; t < panel.periods.size(); ++t) {
			int y = panel.outcomes[r][t];
			if (y != 0 && y != 1)
				throw DataError("missing or invalid outcome for road " + network.road_label(r) + " in period '" +
								panel.periods[t] + "'");
		}
	}
}

/**
 * Reads `road_from,road_to,period,y`. Periods sort lexicographically unless
 * `period_order` lists them explicitly.
 */
inline DeploymentPanel panel_from_table(const RoadNetwork& network, const csv::Table& table, const std::string& where,
										const std::vector<std::string>& period_order = {})
{
	const auto c_from = table.column("road_from"), c_to = table.column("road_to"), c_period = table.column("period"),
			   c_y = table.column("y");
	std::set<std::string> seen;
	for (const auto& row : table.rows)
		seen.insert(row[c_period]);
	DeploymentPanel panel;
	if (period_order.empty()) {
		panel.periods.assign(seen.begin(), seen.end());
	} else {
		panel.periods = period_order;
		for (const auto& p : seen)
			if (std::find(period_order.begin(), period_order.end(), p) == period_order.end())
				throw DataError(where + ": period '" + p + "' missing from the period order");
	}
	panel.outcomes.assign(network.road_count(), std::vector<int>(panel.periods.size(), -1));
	for (std::size_t i = 0; i < table.rows.size(); ++i) {
		const auto& row = table.rows[i];
		const std::string loc = where + ":" + std::to_string(table.line[i]);
		auto a = network.find_node(row[c_from]), b = network.find_node(row[c_to]);
		std::optional<RoadIndex> r;
		if (a && b)
			r = network.find_road(*a, *b);
		if (!r || !network.road(*r).exists)
			throw DataError(loc + ": unknown road " + row[c_from] + "-" + row[c_to]);
		int y;
		if (row[c_y] == "0")
			y = 0;
		else if (row[c_y] == "1")
			y = 1;
		else
			throw DataError(loc + ": outcome must be 0 or 1");
		auto t = panel.period_index(row[c_period]);
		if (panel.outcomes[*r][t] != -1)
			throw DataError(loc + ": duplicate outcome for road " + network.road_label(*r) + " in period '" + row[c_period] + "'");
		panel.outcomes[*r][t] = y;
	}
	check_panel(network, panel);
	return panel;
}

inline DeploymentPanel load_panel(const RoadNetwork& network, const std::filesystem::path& path,
								  const std::vector<std::string>& period_order = {})
{
	return panel_from_table(network, csv::read(path), path.string(), period_order);
}

inline std::string panel_to_csv(const RoadNetwork& network, const DeploymentPanel& panel)
{
	std::string out = "road_from,road_to,period,y\n";
	for (std::size_t t = 0; t < panel.periods.size(); ++t)
		for (auto r : network.existing_roads())
			out += network.road(r).from + "," + network.road(r).to + "," + panel.periods[t] + "," +
				   std::to_string(panel.outcomes[r][t]) + "\n";
	return out;
}

/// Rows are (road, period) pairs; `offset` carries terms with fixed coefficients.
struct Design
{
	Eigen::MatrixXd x;
	Eigen::VectorXd y;
	Eigen::VectorXd offset;
	std::vector<std::string> columns;
	std::vector<RoadIndex> roads;
	std::vector<std::size_t> periods;

	Eigen::Index rows() const { return x.rows(); }
};

namespace detail {

inline bool fixed_betweenness(const ModelSpec& spec)
{
	return spec.edge_global && spec.betweenness_slot && spec.betweenness_coefficient;
}

inline void check_spec(const RoadNetwork& network, const ModelSpec& spec)
{
	if (spec.betweenness_slot && *spec.betweenness_slot >= network.covariate_names().edge_global.size())
		throw DataError("betweenness slot " + std::to_string(*spec.betweenness_slot) + " outside the edge-global block of size " +
						std::to_string(network.covariate_names().edge_global.size()));
	if (spec.betweenness_slot && !spec.edge_global)
		throw DataError("betweenness slot requires the edge-global block");
	if (!(spec.ridge >= 0.0) || !std::isfinite(spec.ridge))
		throw DataError("ridge penalty must be finite and non-negative");
}

} // namespace detail

inline std::vector<std::string> design_columns(const RoadNetwork& network, const ModelSpec& spec)
{
	const auto& names = network.covariate_names();
	std::vector<std::string> cols{"intercept"};
	if (spec.node_local)
		for (const auto& n : names.node_local)
			cols.push_back("node_local:" + n);
	if (spec.node_global)
		for (const auto& n : names.node_global)
			cols.push_back("node_global:" + n);
	if (spec.edge_local)
		for (const auto& n : names.edge_local)
			cols.push_back("edge_local:" + n);
	if (spec.edge_global)
		for (std::size_t s = 0; s < names.edge_global.size(); ++s)
			if (!(detail::fixed_betweenness(spec) && s == *spec.betweenness_slot))
				cols.push_back("edge_global:" + names.edge_global[s]);
	for (std::size_t k = 1; k <= spec.lags; ++k)
		cols.push_back("lag" + std::to_string(k));
	return cols;
}

namespace detail {

/// Fills one design row; `t` may equal the period count, meaning the next (unobserved) period.
inline double fill_row(const RoadNetwork& network, const ModelSpec& spec, const DeploymentPanel* panel, RoadIndex r,
					   std::size_t t, Eigen::Ref<Eigen::RowVectorXd> row)
{
	const auto& road = network.road(r);
	const auto& a = network.node(network.from(r));
	const auto& b = network.node(network.to(r));
	Eigen::Index c = 0;
	double offset = 0.0;
	row(c++) = 1.0;
	if (spec.node_local)
		for (std::size_t i = 0; i < a.local.size(); ++i)
			row(c++) = a.local[i] + b.local[i];
	if (spec.node_global)
		for (std::size_t i = 0; i < a.global.size(); ++i)
			row(c++) = a.global[i] + b.global[i];
	if (spec.edge_local)
		for (double v : road.local)
			row(c++) = v;
	if (spec.edge_global)
		for (std::size_t s = 0; s < road.global.size(); ++s) {
			if (fixed_betweenness(spec) && s == *spec.betweenness_slot)
				offset += *spec.betweenness_coefficient * road.global[s];
			else
				row(c++) = road.global[s];
		}
	for (std::size_t k = 1; k <= spec.lags; ++k)
		row(c++) = panel->at(r, t - k);
	return offset;
}

inline Design build_rows(const RoadNetwork& network, const ModelSpec& spec, const DeploymentPanel* panel,
						 const std::vector<std::size_t>& periods, bool any_period)
{
	check_spec(network, spec);
	Design d;
	d.columns = design_columns(network, spec);
	const auto& roads = network.existing_roads();
	const auto rows = static_cast<Eigen::Index>(roads.size() * periods.size());
	d.x.resize(rows, static_cast<Eigen::Index>(d.columns.size()));
	d.y = Eigen::VectorXd::Zero(rows);
	d.offset = Eigen::VectorXd::Zero(rows);
	Eigen::Index i = 0;
	for (auto t : periods)
		for (auto r : roads) {
			Eigen::RowVectorXd row(d.x.cols());
			d.offset(i) = fill_row(network, spec, panel, r, t, row);
			d.x.row(i) = row;
			if (panel && any_period) {
				int ever = 0;
				for (std::size_t s = 0; s < panel->period_count(); ++s)
					ever = std::max(ever, panel->at(r, s));
				d.y(i) = ever;
			} else if (panel && t < panel->period_count()) {
				d.y(i) = panel->at(r, t);
			}
			d.roads.push_back(r);
			d.periods.push_back(t);
			++i;
		}
	return d;
}

} // namespace detail

/// One row per existing road for a single period; lag columns read the K preceding periods.
inline Design build_design(const RoadNetwork& network, const ModelSpec& spec, const DeploymentPanel& panel, std::string_view period)
{
	check_panel(network, panel);
	auto t = panel.period_index(period);
	if (t < spec.lags)
		throw DataError("period '" + std::string(period) + "' has " + std::to_string(t) + " earlier periods, " +
						std::to_string(spec.lags) + " lags need more history");
	return detail::build_rows(network, spec, &panel, {t}, false);
}

/// Every period from the K-th on, stacked; the first K periods only condition.
inline Design build_stacked_design(const RoadNetwork& network, const ModelSpec& spec, const DeploymentPanel& panel)
{
	check_panel(network, panel);
	if (spec.lags >= panel.period_count())
		throw DataError("lag order " + std::to_string(spec.lags) + " needs more than " + std::to_string(panel.period_count()) +
						" observed periods");
	std::vector<std::size_t> periods;
	for (std::size_t t = spec.lags; t < panel.period_count(); ++t)
		periods.push_back(t);
	return detail::build_rows(network, spec, &panel, periods, false);
}

/// Static model: one row per road, response 1 if the road saw a deployment in any period.
inline Design build_any_period_design(const RoadNetwork& network, const ModelSpec& spec, const DeploymentPanel& panel)
{
	check_panel(network, panel);
	if (spec.lags > 0)
		throw DataError("the any-period response admits no lag terms");
	if (panel.period_count() == 0)
		throw DataError("panel has no periods");
	return detail::build_rows(network, spec, &panel, {0}, true);
}

/// Rows for the period following the panel, for prediction; the response is left at 0.
inline Design build_next_period_design(const RoadNetwork& network, const ModelSpec& spec, const DeploymentPanel& panel)
{
	check_panel(network, panel);
	if (spec.lags > panel.period_count())
		throw DataError("not enough observed periods for " + std::to_string(spec.lags) + " lags");
	return detail::build_rows(network, spec, &panel, {panel.period_count()}, false);
}

/// Covariate-only rows (no lags, no panel).
inline Design build_covariate_design(const RoadNetwork& network, const ModelSpec& spec)
{
	if (spec.lags > 0)
		throw DataError("lag terms need a deployment panel");
	return detail::build_rows(network, spec, nullptr, {0}, false);
}

/// Gaussian log-prior term: -(1/2)(theta - mean)' precision (theta - mean).
struct GaussianPenalty
{
	Eigen::VectorXd mean;
	Eigen::MatrixXd precision;

	static GaussianPenalty ridge(Eigen::Index dim, double lambda)
	{
		GaussianPenalty p{Eigen::VectorXd::Zero(dim), Eigen::MatrixXd::Identity(dim, dim) * lambda};
		if (dim > 0)
			p.precision(0, 0) = 0.0;
		return p;
	}
};

struct ProbitFit
{
	Eigen::VectorXd theta;
	Eigen::MatrixXd covariance; // inverse of the negative Hessian at theta
	double objective = 0.0;		// penalized log-likelihood
	double log_likelihood = 0.0;
	double gradient_norm = 0.0; // max-abs component
	std::size_t iterations = 0;
	bool converged = false;
	bool separation = false;
};

inline constexpr double kGradientTolerance = 1e-8;
inline constexpr std::size_t kMaxNewtonIterations = 100;
inline constexpr double kSeparationBound = 8.0;
inline constexpr double kSeparationMargin = 5.0;

inline double probit_log_likelihood(const Design& d, const Eigen::VectorXd& theta)
{
	Eigen::VectorXd eta = d.x * theta + d.offset;
	double ll = 0.0;
	for (Eigen::Index i = 0; i < eta.size(); ++i)
		ll += d.y(i) > 0.5 ? normal::log_cdf(eta(i)) : normal::log_cdf(-eta(i));
	return ll;
}

inline Eigen::VectorXd probit_gradient(const Design& d, const Eigen::VectorXd& theta)
{
	Eigen::VectorXd eta = d.x * theta + d.offset;
	Eigen::VectorXd score(eta.size());
	for (Eigen::Index i = 0; i < eta.size(); ++i)
		score(i) = d.y(i) > 0.5 ? normal::mills(eta(i)) : -normal::mills(-eta(i));
	return d.x.transpose() * score;
}

/// Observed information X' W X of the probit log-likelihood.
inline Eigen::MatrixXd probit_information(const Design& d, const Eigen::VectorXd& theta)
{
	Eigen::VectorXd eta = d.x * theta + d.offset;
	Eigen::VectorXd w(eta.size());
	for (Eigen::Index i = 0; i < eta.size(); ++i) {
		double z = d.y(i) > 0.5 ? eta(i) : -eta(i);
		double m = normal::mills(z);
		w(i) = m * (z + m);
	}
	return d.x.transpose() * w.asDiagonal() * d.x;
}

/**
 * Maximizes log-likelihood + log Gaussian penalty by Newton steps on the
 * observed information, halving steps that fail to increase the objective.
 */
inline ProbitFit maximize_probit(const Design& d, const GaussianPenalty& penalty)
{
	const Eigen::Index p = d.x.cols();
	auto objective = [&](const Eigen::VectorXd& th) {
		Eigen::VectorXd diff = th - penalty.mean;
		return probit_log_likelihood(d, th) - 0.5 * diff.dot(penalty.precision * diff);
	};
	ProbitFit fit;
	fit.theta = Eigen::VectorXd::Zero(p);
	if (d.rows() > 0 && p > 0 && d.columns.front() == "intercept" && d.offset.isZero()) {
		double rate = std::clamp(d.y.mean(), 0.01, 0.99);
		fit.theta(0) = normal::quantile(rate);
	}
	double obj = objective(fit.theta);
	Eigen::MatrixXd neg_hessian;
	for (fit.iterations = 0;; ++fit.iterations) {
		Eigen::VectorXd grad = probit_gradient(d, fit.theta) - penalty.precision * (fit.theta - penalty.mean);
		neg_hessian = probit_information(d, fit.theta) + penalty.precision;
		fit.gradient_norm = grad.size() ? grad.cwiseAbs().maxCoeff() : 0.0;
		if (fit.gradient_norm < kGradientTolerance) {
			fit.converged = true;
			break;
		}
		if (fit.iterations == kMaxNewtonIterations)
			break;
		Eigen::LDLT<Eigen::MatrixXd> ldlt(neg_hessian);
		Eigen::VectorXd step = ldlt.solve(grad);
		if (ldlt.info() != Eigen::Success || !step.allFinite())
			throw NumericalError("probit information matrix is singular; reduce covariates or raise the ridge penalty");
		double scale = 1.0;
		bool moved = false;
		for (int half = 0; half < 40; ++half, scale *= 0.5) {
			Eigen::VectorXd cand = fit.theta + scale * step;
			double cobj = objective(cand);
			if (std::isfinite(cobj) && cobj >= obj - 1e-12 * std::abs(obj)) {
				fit.theta = cand;
				obj = cobj;
				moved = true;
				break;
			}
		}
		if (!moved)
			break;
	}
	fit.objective = obj;
	fit.log_likelihood = probit_log_likelihood(d, fit.theta);
	Eigen::LDLT<Eigen::MatrixXd> ldlt(neg_hessian);
	if (ldlt.info() != Eigen::Success || !(ldlt.vectorD().array() > 0.0).all())
		throw NumericalError("probit information matrix is not positive definite at the optimum");
	fit.covariance = ldlt.solve(Eigen::MatrixXd::Identity(p, p));
	if (d.rows() > 0) {
		Eigen::VectorXd eta = d.x * fit.theta + d.offset;
		Eigen::ArrayXd signed_margin = eta.array() * (2.0 * d.y.array() - 1.0);
		// the gradient tolerance halts separated fits near |eta| = 6-7, so a uniformly wide margin also counts
		fit.separation = (eta.cwiseAbs().array() > kSeparationBound).any() || signed_margin.minCoeff() > kSeparationMargin;
	}
	return fit;
}

/// Ridge-penalized probit maximum likelihood (the intercept is not penalized).
inline ProbitFit fit_probit(const Design& d, double ridge)
{
	if (d.rows() == 0)
		throw DataError("probit fit needs at least one row");
	for (Eigen::Index i = 0; i < d.rows(); ++i)
		if (d.y(i) != 0.0 && d.y(i) != 1.0)
			throw DataError("probit responses must be 0 or 1");
	if (ridge == 0.0 && (d.y.minCoeff() == d.y.maxCoeff()))
		throw NumericalError(std::string("every response is ") + (d.y(0) > 0.5 ? "1" : "0") +
							 "; the maximum-likelihood estimate diverges (separation), use a ridge penalty > 0");
	auto fit = maximize_probit(d, GaussianPenalty::ridge(d.x.cols(), ridge));
	if (!fit.converged)
		throw NumericalError("probit fit did not converge after " + std::to_string(fit.iterations) +
							 " Newton iterations (max gradient " + csv::format(fit.gradient_norm) + ")");
	return fit;
}

/// Coefficients split into the model's blocks.
struct Coefficients
{
	ModelSpec spec;
	std::vector<std::string> columns;
	Eigen::VectorXd theta;
	double mu = 0.0;
	std::vector<double> alpha, beta, gamma, delta, tau;
	std::optional<Eigen::MatrixXd> covariance;
	std::optional<ProbitFit> fit_info;
};

inline Coefficients make_coefficients(const RoadNetwork& network, const ModelSpec& spec, const Eigen::VectorXd& theta,
									  std::optional<Eigen::MatrixXd> covariance = std::nullopt)
{
	Coefficients c;
	c.spec = spec;
	c.columns = design_columns(network, spec);
	if (static_cast<std::size_t>(theta.size()) != c.columns.size())
		throw DataError("coefficient vector has " + std::to_string(theta.size()) + " entries, model has " +
						std::to_string(c.columns.size()) + " columns");
	c.theta = theta;
	c.covariance = std::move(covariance);
	const auto& names = network.covariate_names();
	Eigen::Index i = 0;
	c.mu = theta(i++);
	if (spec.node_local)
		for (std::size_t k = 0; k < names.node_local.size(); ++k)
			c.alpha.push_back(theta(i++));
	if (spec.node_global)
		for (std::size_t k = 0; k < names.node_global.size(); ++k)
			c.beta.push_back(theta(i++));
	if (spec.edge_local)
		for (std::size_t k = 0; k < names.edge_local.size(); ++k)
			c.gamma.push_back(theta(i++));
	if (spec.edge_global)
		for (std::size_t k = 0; k < names.edge_global.size(); ++k) {
			if (detail::fixed_betweenness(spec) && k == *spec.betweenness_slot)
				c.delta.push_back(*spec.betweenness_coefficient);
			else
				c.delta.push_back(theta(i++));
		}
	for (std::size_t k = 0; k < spec.lags; ++k)
		c.tau.push_back(theta(i++));
	return c;
}

inline Coefficients fit_model(const RoadNetwork& network, const ModelSpec& spec, const Design& d)
{
	auto fit = fit_probit(d, spec.ridge);
	auto c = make_coefficients(network, spec, fit.theta, fit.covariance);
	c.fit_info = std::move(fit);
	return c;
}

/// Phi(x theta + offset) per row.
inline Eigen::VectorXd predict(const Eigen::VectorXd& theta, const Design& d)
{
	if (d.x.cols() != theta.size())
		throw DataError("design has " + std::to_string(d.x.cols()) + " columns, coefficients have " + std::to_string(theta.size()));
	Eigen::VectorXd eta = d.x * theta + d.offset;
	return eta.unaryExpr([](double v) { return normal::cdf(v); });
}

inline Eigen::VectorXd predict(const Coefficients& c, const Design& d)
{
	if (c.columns != d.columns)
		throw DataError("design columns do not match the fitted model");
	return predict(c.theta, d);
}

/// Per-road mean of row predictions; roads absent from the design get 0.
inline std::vector<double> per_road_mean(const RoadNetwork& network, const Design& d, const Eigen::VectorXd& p)
{
	std::vector<double> sum(network.road_count(), 0.0), count(network.road_count(), 0.0);
	for (Eigen::Index i = 0; i < d.rows(); ++i) {
		sum[d.roads[static_cast<std::size_t>(i)]] += p(i);
		count[d.roads[static_cast<std::size_t>(i)]] += 1.0;
	}
	for (std::size_t r = 0; r < sum.size(); ++r)
		if (count[r] > 0)
			sum[r] /= count[r];
	return sum;
}

inline nlohmann::json to_json(const ModelSpec& spec)
{
	nlohmann::json j;
	j["node_local"] = spec.node_local;
	j["node_global"] = spec.node_global;
	j["edge_local"] = spec.edge_local;
	j["edge_global"] = spec.edge_global;
	j["lags"] = spec.lags;
	j["betweenness_slot"] = spec.betweenness_slot ? nlohmann::json(*spec.betweenness_slot) : nlohmann::json(nullptr);
	j["betweenness_coefficient"] =
		spec.betweenness_coefficient ? nlohmann::json(*spec.betweenness_coefficient) : nlohmann::json(nullptr);
	j["ridge"] = spec.ridge;
	return j;
}

inline ModelSpec model_spec_from_json(const nlohmann::json& j)
{
	detail::reject_unknown_keys(j,
								{"node_local", "node_global", "edge_local", "edge_global", "lags", "betweenness_slot",
								 "betweenness_coefficient", "ridge"},
								"model spec");
	ModelSpec s;
	s.node_local = j.value("node_local", true);
	s.node_global = j.value("node_global", true);
	s.edge_local = j.value("edge_local", true);
	s.edge_global = j.value("edge_global", true);
	s.lags = j.value("lags", std::size_t{0});
	if (j.contains("betweenness_slot") && !j["betweenness_slot"].is_null())
		s.betweenness_slot = j["betweenness_slot"].get<std::size_t>();
	if (j.contains("betweenness_coefficient") && !j["betweenness_coefficient"].is_null())
		s.betweenness_coefficient = j["betweenness_coefficient"].get<double>();
	s.ridge = j.value("ridge", 1e-6);
	return s;
}

inline nlohmann::json matrix_to_json(const Eigen::MatrixXd& m)
{
	auto out = nlohmann::json::array();
	for (Eigen::Index i = 0; i < m.rows(); ++i) {
		auto row = nlohmann::json::array();
		for (Eigen::Index k = 0; k < m.cols(); ++k)
			row.push_back(m(i, k));
		out.push_back(row);
	}
	return out;
}

inline Eigen::MatrixXd matrix_from_json(const nlohmann::json& j, const std::string& what)
{
	if (!j.is_array())
		throw DataError(what + " must be an array of rows");
	const auto rows = static_cast<Eigen::Index>(j.size());
	Eigen::MatrixXd m(rows, rows);
	for (Eigen::Index i = 0; i < rows; ++i) {
		const auto& row = j[static_cast<std::size_t>(i)];
		if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != rows)
			throw DataError(what + " must be square");
		for (Eigen::Index k = 0; k < rows; ++k)
			m(i, k) = row[static_cast<std::size_t>(k)].get<double>();
	}
	return m;
}

inline nlohmann::json to_json(const Coefficients& c)
{
	nlohmann::json j;
	j["spec"] = to_json(c.spec);
	j["columns"] = c.columns;
	j["theta"] = std::vector<double>(c.theta.data(), c.theta.data() + c.theta.size());
	j["blocks"] = {{"mu", c.mu}, {"alpha", c.alpha}, {"beta", c.beta}, {"gamma", c.gamma}, {"delta", c.delta}, {"tau", c.tau}};
	if (c.covariance) {
		j["covariance"] = matrix_to_json(*c.covariance);
		std::vector<double> se;
		for (Eigen::Index i = 0; i < c.covariance->rows(); ++i)
			se.push_back(std::sqrt((*c.covariance)(i, i)));
		j["standard_errors"] = se;
	}
	if (c.fit_info) {
		j["log_likelihood"] = c.fit_info->log_likelihood;
		j["iterations"] = c.fit_info->iterations;
		j["gradient_norm"] = c.fit_info->gradient_norm;
		j["converged"] = c.fit_info->converged;
		j["separation"] = c.fit_info->separation;
	}
	return j;
}

/// Reads coefficients written by to_json and checks them against the network's covariate layout.
inline Coefficients coefficients_from_json(const RoadNetwork& network, const nlohmann::json& j)
{
	if (!j.is_object() || !j.contains("spec") || !j.contains("theta"))
		throw DataError("coefficient file needs 'spec' and 'theta'");
	auto spec = model_spec_from_json(j["spec"]);
	auto values = j["theta"].get<std::vector<double>>();
	Eigen::VectorXd theta = Eigen::Map<Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
	std::optional<Eigen::MatrixXd> cov;
	if (j.contains("covariance"))
		cov = matrix_from_json(j["covariance"], "covariance");
	auto c = make_coefficients(network, spec, theta, cov);
	if (j.contains("columns") && j["columns"].get<std::vector<std::string>>() != c.columns)
		throw DataError("coefficient columns do not match the network covariates");
	return c;
}

} // namespace ctpglm

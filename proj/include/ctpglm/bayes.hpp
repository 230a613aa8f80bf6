#pragma once

#include "glm.hpp"
#include "routing.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace ctpglm {

struct GaussianPrior
{
	Eigen::VectorXd mean;
	Eigen::MatrixXd covariance;
	std::vector<std::string> columns;
	double jitter = 0.0; // added to the diagonal to restore positive definiteness, if any

	Eigen::Index dim() const { return mean.size(); }

	void check() const
	{
		if (covariance.rows() != mean.size() || covariance.cols() != mean.size())
			throw DataError("prior covariance is " + std::to_string(covariance.rows()) + "x" + std::to_string(covariance.cols()) +
							", mean has " + std::to_string(mean.size()) + " entries");
		if (!covariance.isApprox(covariance.transpose(), 1e-10))
			throw DataError("prior covariance is not symmetric");
		Eigen::LLT<Eigen::MatrixXd> llt(covariance);
		if (llt.info() != Eigen::Success)
			throw DataError("prior covariance is not positive definite");
	}

	Eigen::MatrixXd precision() const { return covariance.llt().solve(Eigen::MatrixXd::Identity(dim(), dim())); }

	static GaussianPrior isotropic(std::vector<std::string> columns, double sd)
	{
		const auto d = static_cast<Eigen::Index>(columns.size());
		return {Eigen::VectorXd::Zero(d), Eigen::MatrixXd::Identity(d, d) * sd * sd, std::move(columns), 0.0};
	}
};

struct SamplerOptions
{
	std::size_t warmup = 2000;
	std::size_t draws = 5000;
	std::uint64_t seed = 0;
};

struct PosteriorSamples
{
	Eigen::MatrixXd draws; // S x dim
	std::vector<std::string> columns;
	double acceptance_rate = 0.0;
	std::uint64_t seed = 0;
	std::vector<double> effective_sample_size;

	Eigen::VectorXd mean() const { return draws.colwise().mean().transpose(); }

	/// Monte Carlo standard error of each coordinate's mean, from its effective sample size.
	Eigen::VectorXd mc_standard_error() const
	{
		Eigen::VectorXd se(draws.cols());
		for (Eigen::Index k = 0; k < draws.cols(); ++k) {
			Eigen::VectorXd c = draws.col(k).array() - draws.col(k).mean();
			double var = draws.rows() > 1 ? c.squaredNorm() / static_cast<double>(draws.rows() - 1) : 0.0;
			se(k) = std::sqrt(var / std::max(effective_sample_size[static_cast<std::size_t>(k)], 1.0));
		}
		return se;
	}
};

/// Geyer's initial positive sequence estimate of the effective sample size.
inline double effective_sample_size(const Eigen::VectorXd& x)
{
	const Eigen::Index n = x.size();
	if (n < 4)
		return static_cast<double>(n);
	Eigen::VectorXd c = x.array() - x.mean();
	const double c0 = c.squaredNorm() / static_cast<double>(n);
	if (!(c0 > 0.0))
		return static_cast<double>(n);
	auto rho = [&](Eigen::Index lag) { return c.head(n - lag).dot(c.tail(n - lag)) / static_cast<double>(n) / c0; };
	double sum = 0.0;
	for (Eigen::Index k = 0; 2 * k + 1 < n; ++k) {
		double pair = rho(2 * k) + rho(2 * k + 1);
		if (pair <= 0.0)
			break;
		sum += pair;
	}
	double tau = std::max(2.0 * sum - 1.0, 1e-12);
	return std::min(static_cast<double>(n) / tau, static_cast<double>(n) * std::log10(static_cast<double>(n)));
}

/**
 * Adaptive random-walk Metropolis. During warm-up the proposal covariance
 * tracks the chain's empirical covariance (scaled by 2.38^2/d) and a global
 * scale is tuned toward 0.234 acceptance; both are frozen afterwards.
 */
template <typename LogDensity>
PosteriorSamples random_walk_metropolis(LogDensity&& log_density, const Eigen::VectorXd& start, const Eigen::MatrixXd& proposal,
										const SamplerOptions& opts)
{
	const Eigen::Index d = start.size();
	if (opts.draws == 0)
		throw DataError("sampler needs at least one kept draw");
	std::mt19937_64 rng(opts.seed);
	std::normal_distribution<double> gauss(0.0, 1.0);
	std::uniform_real_distribution<double> unif(0.0, 1.0);

	const double base = 2.38 * 2.38 / static_cast<double>(std::max<Eigen::Index>(d, 1));
	Eigen::MatrixXd shape = proposal;
	double log_scale = 0.0;
	Eigen::LLT<Eigen::MatrixXd> chol(shape * base);
	if (chol.info() != Eigen::Success)
		throw NumericalError("proposal covariance is not positive definite");
	Eigen::MatrixXd factor = chol.matrixL();

	Eigen::VectorXd theta = start;
	double logp = log_density(theta);
	if (!std::isfinite(logp))
		throw NumericalError("log density is not finite at the starting point");

	Eigen::VectorXd run_mean = Eigen::VectorXd::Zero(d);
	Eigen::MatrixXd run_m2 = Eigen::MatrixXd::Zero(d, d);
	std::size_t run_n = 0;

	PosteriorSamples out;
	out.seed = opts.seed;
	out.draws.resize(static_cast<Eigen::Index>(opts.draws), d);
	std::size_t accepted = 0;
	const std::size_t total = opts.warmup + opts.draws;
	Eigen::VectorXd z(d);
	for (std::size_t it = 0; it < total; ++it) {
		for (Eigen::Index k = 0; k < d; ++k)
			z(k) = gauss(rng);
		Eigen::VectorXd cand = theta + std::exp(log_scale) * (factor * z);
		double cand_logp = log_density(cand);
		double u = unif(rng);
		bool accept = std::isfinite(cand_logp) && std::log(u) < cand_logp - logp;
		if (accept) {
			theta = cand;
			logp = cand_logp;
		}
		if (it < opts.warmup) {
			// Welford update of the warm-up covariance
			++run_n;
			Eigen::VectorXd delta = theta - run_mean;
			run_mean += delta / static_cast<double>(run_n);
			run_m2 += delta * (theta - run_mean).transpose();
			double gain = 1.0 / std::sqrt(static_cast<double>(it + 1));
			log_scale += gain * ((accept ? 1.0 : 0.0) - 0.234);
			if (run_n >= 200 && run_n % 100 == 0) {
				Eigen::MatrixXd emp = run_m2 / static_cast<double>(run_n - 1);
				emp += 1e-10 * Eigen::MatrixXd::Identity(d, d) * std::max(1.0, emp.diagonal().mean());
				Eigen::LLT<Eigen::MatrixXd> e(emp * base);
				if (e.info() == Eigen::Success)
					factor = e.matrixL();
			}
		} else {
			accepted += accept;
			out.draws.row(static_cast<Eigen::Index>(it - opts.warmup)) = theta.transpose();
		}
	}
	out.acceptance_rate = static_cast<double>(accepted) / static_cast<double>(opts.draws);
	for (Eigen::Index k = 0; k < d; ++k)
		out.effective_sample_size.push_back(effective_sample_size(out.draws.col(k)));
	return out;
}

/// Log prior density up to a constant.
inline double log_prior(const GaussianPrior& prior, const Eigen::MatrixXd& precision, const Eigen::VectorXd& theta)
{
	Eigen::VectorXd diff = theta - prior.mean;
	return -0.5 * diff.dot(precision * diff);
}

/**
 * Posterior draws for the probit model under a Gaussian prior. The chain
 * starts at the posterior mode with the inverse curvature there as proposal.
 */
inline PosteriorSamples sample_posterior(const GaussianPrior& prior, const Design& design, const SamplerOptions& opts)
{
	prior.check();
	if (design.x.cols() != prior.dim())
		throw DataError("design has " + std::to_string(design.x.cols()) + " columns, prior has " + std::to_string(prior.dim()));
	const Eigen::MatrixXd precision = prior.precision();
	GaussianPenalty penalty{prior.mean, precision};
	Eigen::VectorXd start = prior.mean;
	Eigen::MatrixXd proposal = prior.covariance;
	if (design.rows() > 0) {
		auto mode = maximize_probit(design, penalty);
		start = mode.theta;
		proposal = mode.covariance;
	}
	auto target = [&](const Eigen::VectorXd& theta) {
		double lp = log_prior(prior, precision, theta);
		return design.rows() > 0 ? lp + probit_log_likelihood(design, theta) : lp;
	};
	auto out = random_walk_metropolis(target, start, proposal, opts);
	out.columns = prior.columns.empty() ? design.columns : prior.columns;
	return out;
}

/// Gaussian with the draws' mean and covariance; jitter is added only if the covariance is not positive definite.
inline GaussianPrior moment_match(const Eigen::MatrixXd& draws, std::vector<std::string> columns = {})
{
	const Eigen::Index s = draws.rows(), d = draws.cols();
	if (s < 2)
		throw NumericalError("moment matching needs at least two draws");
	GaussianPrior g;
	g.columns = std::move(columns);
	g.mean = draws.colwise().mean().transpose();
	Eigen::MatrixXd centered = draws.rowwise() - g.mean.transpose();
	g.covariance = centered.transpose() * centered / static_cast<double>(s - 1);
	g.covariance = 0.5 * (g.covariance + g.covariance.transpose());
	double jitter = 0.0;
	double scale = std::max(1e-300, g.covariance.diagonal().cwiseAbs().maxCoeff());
	for (int attempt = 0; attempt < 20; ++attempt) {
		Eigen::LLT<Eigen::MatrixXd> llt(g.covariance + jitter * Eigen::MatrixXd::Identity(d, d));
		if (llt.info() == Eigen::Success)
			break;
		jitter = jitter == 0.0 ? 1e-12 * scale : jitter * 10.0;
	}
	g.covariance += jitter * Eigen::MatrixXd::Identity(d, d);
	g.jitter = jitter;
	return g;
}

inline GaussianPrior moment_match(const PosteriorSamples& s) { return moment_match(s.draws, s.columns); }

struct SequentialResult
{
	std::vector<GaussianPrior> posteriors; // moment-matched, one per step
	std::vector<std::string> labels;
	PosteriorSamples final_samples;
};

/**
 * Sequential updating over a list of per-period designs: sample given the
 * current prior, moment-match, and carry the Gaussian forward. A period with
 * no rows passes the prior through unchanged.
 */
inline SequentialResult sequential_update(const GaussianPrior& prior, const std::vector<Design>& periods,
										  const std::vector<std::string>& labels, const SamplerOptions& opts)
{
	if (periods.empty())
		throw DataError("sequential update needs at least one period");
	SequentialResult out;
	out.labels = labels;
	GaussianPrior current = prior;
	bool sampled = false;
	for (std::size_t t = 0; t < periods.size(); ++t) {
		const std::string label = t < labels.size() ? labels[t] : std::to_string(t);
		if (periods[t].rows() == 0) {
			out.posteriors.push_back(current);
			continue;
		}
		try {
			SamplerOptions o = opts;
			o.seed = opts.seed + t;
			out.final_samples = sample_posterior(current, periods[t], o);
		} catch (const NumericalError& e) {
			throw NumericalError("period '" + label + "': " + e.what());
		} catch (const DataError& e) {
			throw DataError("period '" + label + "': " + e.what());
		}
		sampled = true;
		current = moment_match(out.final_samples);
		if (current.columns.empty())
			current.columns = prior.columns;
		out.posteriors.push_back(current);
	}
	if (!sampled) {
		Design empty;
		empty.x.resize(0, prior.dim());
		out.final_samples = sample_posterior(prior, empty, opts);
	}
	return out;
}

/// Sequential updating over the panel's periods (from the K-th on).
inline SequentialResult sequential_update(const GaussianPrior& prior, const RoadNetwork& network, const ModelSpec& spec,
										  const DeploymentPanel& panel, const SamplerOptions& opts)
{
	check_panel(network, panel);
	if (panel.period_count() <= spec.lags)
		throw DataError("panel needs more than " + std::to_string(spec.lags) + " periods");
	std::vector<Design> designs;
	std::vector<std::string> labels;
	for (std::size_t t = spec.lags; t < panel.period_count(); ++t) {
		designs.push_back(build_design(network, spec, panel, panel.periods[t]));
		labels.push_back(panel.periods[t]);
	}
	auto out = sequential_update(prior, designs, labels, opts);
	for (auto& p : out.posteriors)
		p.columns = designs.front().columns;
	out.final_samples.columns = designs.front().columns;
	return out;
}

/// Mean over draws of Phi(x theta + offset), per row.
inline Eigen::VectorXd posterior_predictive(const PosteriorSamples& samples, const Design& design)
{
	if (design.x.cols() != samples.draws.cols())
		throw DataError("design has " + std::to_string(design.x.cols()) + " columns, draws have " +
						std::to_string(samples.draws.cols()));
	Eigen::VectorXd sum = Eigen::VectorXd::Zero(design.rows());
	for (Eigen::Index s = 0; s < samples.draws.rows(); ++s) {
		Eigen::VectorXd eta = design.x * samples.draws.row(s).transpose() + design.offset;
		sum += eta.unaryExpr([](double v) { return normal::cdf(v); });
	}
	return sum / static_cast<double>(samples.draws.rows());
}

struct PoolingResult
{
	std::vector<std::vector<double>> pooled;  // [period][road]
	std::vector<std::vector<double>> weights; // [period + 1][source]; row t is used for period t
	std::vector<std::vector<double>> scores;  // [period][source] Brier score
};

/// Weights proportional to exp(-eta * loss), normalized to sum to 1.
inline std::vector<double> exponential_weights(const std::vector<double>& loss, double eta)
{
	double best = kInfinity;
	for (double l : loss)
		best = std::min(best, l);
	std::vector<double> w(loss.size());
	double total = 0.0;
	for (std::size_t k = 0; k < loss.size(); ++k) {
		w[k] = std::exp(-eta * (loss[k] - best));
		total += w[k];
	}
	for (auto& v : w)
		v /= total;
	return w;
}

/**
 * Multiplicative-weights pooling: each period's prediction is the current
 * convex combination of sources, after which every source's weight is set
 * proportional to exp(-eta * its cumulative Brier score).
 *
 * sources[k][t][r] is source k's probability for road r in period t;
 * outcomes[t][r] the realized 0/1 outcome.
 */
inline PoolingResult pool_predictions(const std::vector<std::vector<std::vector<double>>>& sources,
									  const std::vector<std::vector<int>>& outcomes, double eta = 1.0)
{
	const std::size_t K = sources.size();
	if (K < 2)
		throw DataError("pooling needs at least two sources");
	if (!(eta >= 0.0) || !std::isfinite(eta))
		throw DataError("learning rate must be finite and non-negative");
	const std::size_t T = outcomes.size();
	for (std::size_t k = 0; k < K; ++k) {
		if (sources[k].size() != T)
			throw DataError("source " + std::to_string(k) + " covers " + std::to_string(sources[k].size()) + " periods, outcomes cover " +
							std::to_string(T));
		for (std::size_t t = 0; t < T; ++t) {
			if (sources[k][t].size() != outcomes[t].size())
				throw DataError("source " + std::to_string(k) + " has the wrong number of roads in period " + std::to_string(t));
			for (double p : sources[k][t])
				if (!(p > 0.0 && p < 1.0))
					throw DataError("source probabilities must lie strictly between 0 and 1");
		}
	}
	PoolingResult out;
	std::vector<double> w(K, 1.0 / static_cast<double>(K)), cumulative(K, 0.0);
	out.weights.push_back(w);
	for (std::size_t t = 0; t < T; ++t) {
		const auto& y = outcomes[t];
		std::vector<double> pooled(y.size(), 0.0), score(K, 0.0);
		for (std::size_t k = 0; k < K; ++k)
			for (std::size_t r = 0; r < y.size(); ++r) {
				pooled[r] += w[k] * sources[k][t][r];
				double e = sources[k][t][r] - y[r];
				score[k] += e * e;
			}
		if (!y.empty())
			for (auto& s : score)
				s /= static_cast<double>(y.size());
		for (std::size_t k = 0; k < K; ++k)
			cumulative[k] += score[k];
		w = exponential_weights(cumulative, eta);
		out.pooled.push_back(std::move(pooled));
		out.scores.push_back(std::move(score));
		out.weights.push_back(w);
	}
	return out;
}

inline nlohmann::json to_json(const GaussianPrior& g)
{
	nlohmann::json j;
	j["columns"] = g.columns;
	j["mean"] = std::vector<double>(g.mean.data(), g.mean.data() + g.mean.size());
	j["covariance"] = matrix_to_json(g.covariance);
	if (g.jitter > 0.0)
		j["jitter"] = g.jitter;
	return j;
}

inline GaussianPrior gaussian_prior_from_json(const nlohmann::json& j)
{
	detail::reject_unknown_keys(j, {"columns", "mean", "covariance", "jitter"}, "prior");
	if (!j.contains("mean") || !j.contains("covariance"))
		throw DataError("prior needs 'mean' and 'covariance'");
	GaussianPrior g;
	auto mean = j["mean"].get<std::vector<double>>();
	g.mean = Eigen::Map<Eigen::VectorXd>(mean.data(), static_cast<Eigen::Index>(mean.size()));
	g.covariance = matrix_from_json(j["covariance"], "prior covariance");
	if (j.contains("columns"))
		g.columns = j["columns"].get<std::vector<std::string>>();
	g.jitter = j.value("jitter", 0.0);
	g.check();
	return g;
}

inline std::string samples_csv(const PosteriorSamples& s)
{
	std::string out;
	for (std::size_t k = 0; k < s.columns.size(); ++k)
		out += (k ? "," : "") + s.columns[k];
	out += "\n";
	for (Eigen::Index i = 0; i < s.draws.rows(); ++i) {
		for (Eigen::Index k = 0; k < s.draws.cols(); ++k)
			out += (k ? "," : "") + csv::format(s.draws(i, k));
		out += "\n";
	}
	return out;
}

} // namespace ctpglm

#pragma once

#include "bayes.hpp"
#include "csv.hpp"
#include "glm.hpp"

#include <cmath>
#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

namespace ctpglm {

/// One expert's belief about each road: mean probability and its standard deviation (NaN for absent roads).
struct ExpertAssessment
{
	std::string expert_id;
	std::vector<double> mean;
	std::vector<double> sd;
};

struct BetaParameters
{
	double a;
	double b;
};

/// Beta distribution with the given mean and standard deviation.
inline BetaParameters beta_from_moments(double m, double u)
{
	if (!(m > 0.0 && m < 1.0))
		throw DataError("assessment mean " + csv::format(m) + " outside (0, 1)");
	if (!(u > 0.0))
		throw DataError("assessment uncertainty must be positive");
	double v = u * u;
	if (!(v < m * (1.0 - m)))
		throw DataError("no Beta distribution has mean " + csv::format(m) + " and s.d. " + csv::format(u) +
						" (variance must be below m(1-m))");
	double k = m * (1.0 - m) / v - 1.0;
	return {m * k, (1.0 - m) * k};
}

inline double draw_beta(const BetaParameters& p, std::mt19937_64& rng)
{
	std::gamma_distribution<double> ga(p.a, 1.0), gb(p.b, 1.0);
	double x = ga(rng), y = gb(rng);
	return x / (x + y);
}

inline void check_assessment(const RoadNetwork& network, const ExpertAssessment& a)
{
	if (a.mean.size() != network.road_count() || a.sd.size() != network.road_count())
		throw DataError("assessment does not match the network's roads");
	for (auto r : network.existing_roads()) {
		if (std::isnan(a.mean[r]))
			throw DataError("assessment from '" + a.expert_id + "' is missing road " + network.road_label(r));
		beta_from_moments(a.mean[r], a.sd[r]);
	}
}

/// Reads `road_from,road_to,mean,sd,expert_id`; one assessment per expert, ordered by expert id.
inline std::vector<ExpertAssessment> assessments_from_table(const RoadNetwork& network, const csv::Table& table,
															const std::string& where)
{
	const auto c_from = table.column("road_from"), c_to = table.column("road_to"), c_mean = table.column("mean"),
			   c_sd = table.column("sd"), c_id = table.column("expert_id");
	std::map<std::string, ExpertAssessment> by_expert;
	const double nan = std::numeric_limits<double>::quiet_NaN();
	for (std::size_t i = 0; i < table.rows.size(); ++i) {
		const auto& row = table.rows[i];
		const std::string loc = where + ":" + std::to_string(table.line[i]);
		auto a = network.find_node(row[c_from]), b = network.find_node(row[c_to]);
		std::optional<RoadIndex> r;
		if (a && b)
			r = network.find_road(*a, *b);
		if (!r || !network.road(*r).exists)
			throw DataError(loc + ": unknown road " + row[c_from] + "-" + row[c_to]);
		auto& e = by_expert[row[c_id]];
		if (e.mean.empty()) {
			e.expert_id = row[c_id];
			e.mean.assign(network.road_count(), nan);
			e.sd.assign(network.road_count(), nan);
		}
		if (!std::isnan(e.mean[*r]))
			throw DataError(loc + ": duplicate assessment of road " + network.road_label(*r));
		e.mean[*r] = csv::to_double(row[c_mean], loc);
		e.sd[*r] = csv::to_double(row[c_sd], loc);
	}
	std::vector<ExpertAssessment> out;
	for (auto& [id, e] : by_expert) {
		check_assessment(network, e);
		out.push_back(std::move(e));
	}
	if (out.empty())
		throw DataError(where + ": no assessments");
	return out;
}

inline std::vector<ExpertAssessment> load_assessments(const RoadNetwork& network, const std::filesystem::path& path)
{
	return assessments_from_table(network, csv::read(path), path.string());
}

struct ElicitConfig
{
	double sigma2 = 1.0;
	std::size_t repetitions = 1000; // includes the pass at the assessed means
	std::uint64_t seed = 0;
};

inline constexpr double kElicitClamp = 1e-6;

/**
 * Gaussian prior over the model coefficients from one expert's road-level
 * beliefs. Each repetition regresses probit-transformed probabilities on the
 * design (flat prior, noise variance sigma2); the first repetition uses the
 * assessed means, later ones Beta draws. The equal-weight mixture of the
 * resulting Gaussians is collapsed to its mean and covariance.
 */
inline GaussianPrior elicit_prior(const RoadNetwork& network, const ModelSpec& spec, const ExpertAssessment& assessment,
								  const ElicitConfig& config)
{
	check_assessment(network, assessment);
	if (config.repetitions == 0)
		throw DataError("elicitation needs at least one repetition");
	if (!(config.sigma2 > 0.0) || !std::isfinite(config.sigma2))
		throw DataError("auxiliary variance must be positive");
	if (spec.lags > 0)
		throw DataError("elicited priors cover covariate coefficients only; set lags to 0");
	Design d = build_covariate_design(network, spec);
	const Eigen::Index p = d.x.cols();
	Eigen::MatrixXd xtx = d.x.transpose() * d.x;
	Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(d.x);
	if (qr.rank() < p)
		throw DataError("design is rank deficient (rank " + std::to_string(qr.rank()) + " of " + std::to_string(p) +
						" columns); drop covariates or use a ridge-penalized fit");
	Eigen::LLT<Eigen::MatrixXd> llt(xtx);
	const Eigen::MatrixXd xtx_inv = llt.solve(Eigen::MatrixXd::Identity(p, p));

	std::vector<BetaParameters> beta;
	for (auto r : d.roads)
		beta.push_back(beta_from_moments(assessment.mean[r], assessment.sd[r]));

	std::mt19937_64 rng(config.seed);
	Eigen::MatrixXd means(static_cast<Eigen::Index>(config.repetitions), p);
	Eigen::VectorXd z(d.rows());
	for (std::size_t rep = 0; rep < config.repetitions; ++rep) {
		for (Eigen::Index i = 0; i < d.rows(); ++i) {
			auto r = d.roads[static_cast<std::size_t>(i)];
			double prob = rep == 0 ? assessment.mean[r] : draw_beta(beta[static_cast<std::size_t>(i)], rng);
			prob = std::clamp(prob, kElicitClamp, 1.0 - kElicitClamp);
			z(i) = normal::quantile(prob) - d.offset(i);
		}
		means.row(static_cast<Eigen::Index>(rep)) = llt.solve(d.x.transpose() * z).transpose();
	}
	GaussianPrior g;
	g.columns = d.columns;
	g.mean = means.colwise().mean().transpose();
	Eigen::MatrixXd centered = means.rowwise() - g.mean.transpose();
	g.covariance = config.sigma2 * xtx_inv + centered.transpose() * centered / static_cast<double>(config.repetitions);
	g.covariance = 0.5 * (g.covariance + g.covariance.transpose());
	return g;
}

enum class ExpertCovariateMode
{
	Probability,
	Indicator
};

/// Expert opinion as an edge covariate: the assessed mean, or 1 where it reaches `threshold`.
inline std::vector<double> expert_covariate(const RoadNetwork& network, const ExpertAssessment& assessment, ExpertCovariateMode mode,
											double threshold = 0.5)
{
	if (assessment.mean.size() != network.road_count())
		throw DataError("assessment does not match the network's roads");
	std::vector<double> out(network.road_count(), 0.0);
	for (auto r : network.existing_roads()) {
		double m = assessment.mean[r];
		if (std::isnan(m))
			throw DataError("assessment from '" + assessment.expert_id + "' is missing road " + network.road_label(r));
		out[r] = mode == ExpertCovariateMode::Probability ? m : (m >= threshold ? 1.0 : 0.0);
	}
	return out;
}

} // namespace ctpglm

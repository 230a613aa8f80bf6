#include "test_support.hpp"

#include <ctpglm/elicit.hpp>

#include <gtest/gtest.h>

using namespace ctpglm;
using testing_support::canonical;

namespace {

ExpertAssessment uniform(const RoadNetwork& net, double m, double u, std::string id = "e1")
{
	return {std::move(id), std::vector<double>(net.road_count(), m), std::vector<double>(net.road_count(), u)};
}

RoadNetwork canonical_with_edge_covariate()
{
	auto data = canonical().data();
	data.covariate_names.edge_local = {"w"};
	double w = -1.0;
	for (auto& r : data.roads) {
		r.local = {w};
		w += 0.7;
	}
	return RoadNetwork(data);
}

} // namespace

TEST(Beta, MomentMatching)
{
	auto b = beta_from_moments(0.3, 0.1);
	double mean = b.a / (b.a + b.b);
	double var = b.a * b.b / ((b.a + b.b) * (b.a + b.b) * (b.a + b.b + 1));
	EXPECT_NEAR(mean, 0.3, 1e-14);
	EXPECT_NEAR(var, 0.01, 1e-14);
	EXPECT_THROW(beta_from_moments(0.5, 0.5), DataError);
	EXPECT_THROW(beta_from_moments(1.0, 0.1), DataError);
	EXPECT_THROW(beta_from_moments(0.5, 0.0), DataError);
}

TEST(Elicit, HalfProbabilityGivesZeroIntercept)
{
	auto net = canonical();
	ModelSpec spec;
	ElicitConfig cfg;
	cfg.repetitions = 200;
	auto g = elicit_prior(net, spec, uniform(net, 0.5, 1e-7), cfg);
	EXPECT_NEAR(g.mean(0), 0.0, 1e-5);
	EXPECT_NEAR(std::sqrt(g.covariance(0, 0)), 1.0 / std::sqrt(5.0), 1e-6);
}

TEST(Elicit, HighProbabilityGivesQuantile)
{
	auto net = canonical();
	ElicitConfig cfg;
	cfg.repetitions = 200;
	auto g = elicit_prior(net, ModelSpec{}, uniform(net, 0.975, 1e-7), cfg);
	EXPECT_NEAR(g.mean(0), 1.959963984540054, 1e-4);
}

TEST(Elicit, SingleRepetitionIsClosedForm)
{
	auto net = canonical_with_edge_covariate();
	ModelSpec spec;
	ExpertAssessment a{"e", {0.1, 0.4, 0.35, 0.8, 0.6}, {0.05, 0.1, 0.1, 0.1, 0.2}};
	ElicitConfig cfg;
	cfg.repetitions = 1;
	cfg.sigma2 = 0.7;
	auto g = elicit_prior(net, spec, a, cfg);
	Eigen::MatrixXd x(5, 2);
	Eigen::VectorXd z(5);
	for (int r = 0; r < 5; ++r) {
		x(r, 0) = 1.0;
		x(r, 1) = net.road(r).local[0];
		z(r) = normal::quantile(a.mean[r]);
	}
	Eigen::MatrixXd xtx_inv = (x.transpose() * x).inverse();
	Eigen::VectorXd beta = xtx_inv * x.transpose() * z;
	EXPECT_LT((g.mean - beta).cwiseAbs().maxCoeff(), 1e-12);
	EXPECT_LT((g.covariance - 0.7 * xtx_inv).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Elicit, CollapsesAsUncertaintyVanishes)
{
	auto net = canonical_with_edge_covariate();
	ExpertAssessment a{"e", {0.1, 0.4, 0.35, 0.8, 0.6}, std::vector<double>(5, 1e-7)};
	ElicitConfig cfg;
	cfg.repetitions = 500;
	auto g = elicit_prior(net, ModelSpec{}, a, cfg);
	auto d = build_covariate_design(net, ModelSpec{});
	Eigen::MatrixXd closed = (d.x.transpose() * d.x).inverse();
	EXPECT_LT((g.covariance - closed).cwiseAbs().maxCoeff(), 1e-6);
	EXPECT_NO_THROW(g.check());
}

TEST(Elicit, DeterministicAndMonotone)
{
	auto net = canonical();
	ElicitConfig cfg;
	cfg.repetitions = 300;
	cfg.seed = 11;
	auto a = elicit_prior(net, ModelSpec{}, uniform(net, 0.3, 0.1), cfg);
	auto b = elicit_prior(net, ModelSpec{}, uniform(net, 0.3, 0.1), cfg);
	EXPECT_EQ(a.mean, b.mean);
	EXPECT_EQ(a.covariance, b.covariance);
	double prev = -kInfinity;
	for (double m : {0.1, 0.2, 0.4, 0.6, 0.9}) {
		auto g = elicit_prior(net, ModelSpec{}, uniform(net, m, 0.02), cfg);
		EXPECT_GT(g.mean(0), prev);
		prev = g.mean(0);
	}
}

TEST(Elicit, Errors)
{
	auto net = canonical();
	ElicitConfig cfg;
	cfg.repetitions = 10;
	EXPECT_THROW(elicit_prior(net, ModelSpec{}, uniform(net, 0.5, 0.6), cfg), DataError);
	auto missing = uniform(net, 0.5, 0.1);
	missing.mean[2] = std::numeric_limits<double>::quiet_NaN();
	EXPECT_THROW(elicit_prior(net, ModelSpec{}, missing, cfg), DataError);

	auto data = canonical().data();
	data.covariate_names.edge_local = {"a", "b"};
	for (auto& r : data.roads)
		r.local = {1.0, 2.0}; // collinear with the intercept
	RoadNetwork collinear(data);
	try {
		elicit_prior(collinear, ModelSpec{}, uniform(collinear, 0.5, 0.1), cfg);
		FAIL();
	} catch (const DataError& e) {
		EXPECT_NE(std::string(e.what()).find("rank"), std::string::npos);
	}
}

TEST(Elicit, AssessmentFile)
{
	auto net = canonical();
	std::istringstream in("road_from,road_to,mean,sd,expert_id\n"
						  "A,B,0.2,0.05,bob\nA,C,0.3,0.05,bob\nB,C,0.4,0.05,bob\nB,D,0.5,0.05,bob\nD,C,0.6,0.05,bob\n"
						  "A,B,0.5,0.1,amy\nA,C,0.5,0.1,amy\nB,C,0.5,0.1,amy\nB,D,0.5,0.1,amy\nC,D,0.5,0.1,amy\n");
	auto list = assessments_from_table(net, csv::parse(in, "a.csv"), "a.csv");
	ASSERT_EQ(list.size(), 2u);
	EXPECT_EQ(list[0].expert_id, "amy");
	EXPECT_EQ(list[1].mean[net.road_index("CD")], 0.6);
	std::istringstream partial("road_from,road_to,mean,sd,expert_id\nA,B,0.2,0.05,bob\n");
	EXPECT_THROW(assessments_from_table(net, csv::parse(partial, "p"), "p"), DataError);
}

TEST(ExpertCovariate, Modes)
{
	auto net = canonical();
	ExpertAssessment a{"e", {0.2, 0.8, 0.5, 0.79, 0.81}, std::vector<double>(5, 0.05)};
	EXPECT_EQ(expert_covariate(net, a, ExpertCovariateMode::Probability), a.mean);
	auto half = expert_covariate(net, a, ExpertCovariateMode::Indicator, 0.5);
	EXPECT_EQ(half[0], 0.0);
	EXPECT_EQ(half[1], 1.0);
	EXPECT_EQ(half[2], 1.0);
	auto high = expert_covariate(net, a, ExpertCovariateMode::Indicator, 0.8);
	EXPECT_EQ(high, (std::vector<double>{0, 1, 0, 0, 1}));
	a.mean[3] = std::numeric_limits<double>::quiet_NaN();
	EXPECT_THROW(expert_covariate(net, a, ExpertCovariateMode::Probability), DataError);
	auto extended = net.with_edge_local_column("expert", half);
	EXPECT_EQ(extended.covariate_names().edge_local.back(), "expert");
	EXPECT_EQ(extended.road(1).local.back(), 1.0);
}

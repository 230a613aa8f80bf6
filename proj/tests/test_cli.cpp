#ifdef CTPGLM_HAVE_CLI

#include "test_support.hpp"

#include "cli_support.hpp"

#include <gtest/gtest.h>

#include <fstream>
#include <map>
#include <sstream>

namespace fs = std::filesystem;
using testing_support::data_dir;
using testing_support::scratch;
using namespace cli_support;

namespace {

class CliPipeline : public ::testing::Test
{
protected:
	static fs::path root;
	static fs::path sim;

	static void SetUpTestSuite()
	{
		root = scratch("cli_pipeline");
		sim = root / "sim";
		auto r = cli({"simulate", "--nodes", "6", "--roads", "8", "--periods", "6", "--mu", "-0.5", "--delta", "0.8,0.3", "--tau",
					  "0.5", "--cb-slot", "0", "--xr", "3", "--seed", "4", "--out", sim.string()});
		ASSERT_EQ(r.code, 0) << r.err;
	}

	static std::string network() { return (sim / "network.json").string(); }
	static std::string panel() { return (sim / "panel.csv").string(); }

	/// Runs the command twice into fresh directories and checks the outputs match byte for byte.
	static Invocation twice(const std::string& name, std::vector<std::string> args)
	{
		auto a = root / (name + "_a"), b = root / (name + "_b");
		auto with_out = [&](const fs::path& dir) {
			auto v = args;
			v.push_back("--out");
			v.push_back(dir.string());
			return v;
		};
		auto first = cli(with_out(a));
		auto second = cli(with_out(b));
		EXPECT_EQ(first.code, second.code);
		if (first.code == 0) {
			EXPECT_EQ(outputs(a), outputs(b)) << name;
			EXPECT_EQ(first_line(first.out), first_line(second.out));
		}
		return first;
	}

	/// Replays the run recorded in `dir`'s manifest and checks the outputs match.
	static void replay(const fs::path& dir)
	{
		auto again = dir.string() + "_replay";
		auto args = replay_args(manifest(dir), again);
		auto r = cli(args);
		ASSERT_EQ(r.code, 0) << r.err;
		EXPECT_EQ(outputs(dir), outputs(again)) << dir;
	}
};

fs::path CliPipeline::root;
fs::path CliPipeline::sim;

} // namespace

TEST(Cli, RouteOnCanonicalNetwork)
{
	auto dir = scratch("cli_route");
	auto r = cli({"route", "--network", (data_dir() / "canonical.json").string(), "--from", "A", "--to", "D", "--blocked", "BD", "--out",
				  dir.string()});
	ASSERT_EQ(r.code, 0) << r.err;
	EXPECT_EQ(first_line(r.out), "distance=2 path=A,C,D");
	auto j = nlohmann::json::parse(slurp(dir / "route.json"));
	EXPECT_EQ(j["route"]["path"], (std::vector<std::string>{"A", "C", "D"}));
}

TEST(Cli, CtpSolveOnCanonicalNetwork)
{
	auto dir = scratch("cli_ctp");
	auto net = (data_dir() / "canonical.json").string();
	auto r = cli({"ctp-solve", "--network", net, "--from", "A", "--to", "D", "--out", dir.string()});
	ASSERT_EQ(r.code, 0) << r.err;
	EXPECT_EQ(first_line(r.out), "expected_cost=1.95 first_action=traverse A-B");

	r = cli({"ctp-solve", "--network", net, "--from", "A", "--to", "D", "--xr", "10", "--force", "BD=blocked", "--force",
			 "CD=blocked", "--out", dir.string()});
	ASSERT_EQ(r.code, 0) << r.err;
	EXPECT_EQ(first_line(r.out).substr(0, 18), "expected_cost=12.4");
}

TEST(Cli, ValidateReportsErrorsWithExitTwo)
{
	auto dir = scratch("cli_validate");
	auto ok = cli({"validate", "--network", (data_dir() / "canonical.json").string(), "--out", dir.string()});
	EXPECT_EQ(ok.code, 0) << ok.err;
	EXPECT_EQ(first_line(ok.out).substr(0, 17), "valid=true errors");

	std::ofstream(dir / "bad.json") << R"({"intersections":[{"id":"A"},{"id":"B"}],)"
									<< R"("roads":[{"from":"A","to":"B","length":-1}]})";
	auto bad = cli({"validate", "--network", (dir / "bad.json").string(), "--out", dir.string()});
	EXPECT_EQ(bad.code, 2);
	EXPECT_EQ(first_line(bad.out).substr(0, 11), "valid=false");
	EXPECT_FALSE(bad.err.empty());
}

TEST(Cli, UsageErrorsExitOne)
{
	auto dir = scratch("cli_usage");
	EXPECT_EQ(cli({}).code, 1);
	EXPECT_EQ(cli({"route", "--network", "x.json", "--from", "A", "--bogus"}).code, 1);
	auto r = cli({"simulate", "--nodes", "4", "--roads", "4", "--out", dir.string()});
	EXPECT_EQ(r.code, 1);
	EXPECT_NE(r.err.find("--seed"), std::string::npos);
	auto sampled = cli({"centrality", "--network", (data_dir() / "canonical.json").string(), "--samples", "100", "--out", dir.string()});
	EXPECT_EQ(sampled.code, 1);
	auto force = cli({"ctp-solve", "--network", (data_dir() / "canonical.json").string(), "--from", "A", "--to", "D", "--force", "BD",
					  "--out", dir.string()});
	EXPECT_EQ(force.code, 1);
}

TEST(Cli, DataAndNumericalErrors)
{
	auto dir = scratch("cli_errors");
	auto missing = cli({"route", "--network", (dir / "none.json").string(), "--from", "A", "--out", dir.string()});
	EXPECT_EQ(missing.code, 2);
	auto unknown = cli({"route", "--network", (data_dir() / "canonical.json").string(), "--from", "Q", "--out", dir.string()});
	EXPECT_EQ(unknown.code, 2);
	EXPECT_NE(unknown.err.find("Q"), std::string::npos);
	auto guard = cli({"ctp-solve", "--network", (data_dir() / "canonical.json").string(), "--from", "A", "--to", "D", "--guard", "0",
					  "--out", dir.string()});
	EXPECT_EQ(guard.code, 3);
}

TEST(Cli, HelpMatchesSnapshots)
{
	const fs::path snaps = fs::path(CTPGLM_SOURCE_DIR) / "tests" / "snapshots";
	auto main_help = cli({"--help"});
	EXPECT_EQ(main_help.code, 0);
	EXPECT_EQ(main_help.out, slurp(snaps / "main.txt"));
	for (std::string sub : {"validate", "route", "ctp-solve", "centrality", "fit", "fit-coupled", "simulate", "update", "elicit",
							"predict", "pool"}) {
		auto r = cli({sub, "--help"});
		EXPECT_EQ(r.code, 0) << sub;
		EXPECT_EQ(r.out, slurp(snaps / (sub + ".txt"))) << sub;
	}
}

TEST_F(CliPipeline, SimulateIsReproducible)
{
	auto r = twice("simulate", {"simulate", "--family", "grid", "--rows", "3", "--cols", "3", "--periods", "3", "--mu", "-0.3",
								"--gamma", "0.5", "--tau", "0.4", "--seed", "11"});
	ASSERT_EQ(r.code, 0) << r.err;
	EXPECT_EQ(first_line(r.out).substr(0, 17), "nodes=9 roads=12 ");
	replay(root / "simulate_a");
}

TEST_F(CliPipeline, EntropyRunsReplayFromTheManifest)
{
	auto dir = root / "entropy";
	auto r = cli({"simulate", "--nodes", "5", "--roads", "6", "--periods", "2", "--mu", "0.2", "--entropy", "ok", "--out",
				  dir.string()});
	ASSERT_EQ(r.code, 0) << r.err;
	ASSERT_FALSE(manifest(dir)["seed"].is_null());
	replay(dir);
}

TEST_F(CliPipeline, CentralityExactAndSampled)
{
	auto exact = twice("centrality", {"centrality", "--network", network(), "--xr", "3"});
	ASSERT_EQ(exact.code, 0) << exact.err;
	EXPECT_NE(exact.out.find("method=exact"), std::string::npos);
	auto sampled = twice("centrality_mc", {"centrality", "--network", network(), "--xr", "3", "--samples", "200", "--seed", "9",
										   "--threads", "2"});
	ASSERT_EQ(sampled.code, 0) << sampled.err;
	replay(root / "centrality_mc_a");
	auto header = first_line(slurp(root / "centrality_a" / "centrality.csv"));
	EXPECT_NE(header.find("canadian_betweenness"), std::string::npos);
}

TEST_F(CliPipeline, FitPredictAndReplay)
{
	auto fit = twice("fit", {"fit", "--network", network(), "--panel", panel(), "--lags", "1"});
	ASSERT_EQ(fit.code, 0) << fit.err;
	EXPECT_EQ(fit.out.substr(0, 8), "rows=40 ");
	replay(root / "fit_a");

	auto pred = twice("predict", {"predict", "--network", network(), "--model", (root / "fit_a" / "coefficients.json").string(),
								  "--panel", panel()});
	ASSERT_EQ(pred.code, 0) << pred.err;
	EXPECT_EQ(first_line(slurp(root / "predict_a" / "predictions.csv")), "road_from,road_to,probability");

	auto bad_period = cli({"fit", "--network", network(), "--panel", panel(), "--period", "t99", "--out", (root / "x").string()});
	EXPECT_EQ(bad_period.code, 2);
	EXPECT_NE(bad_period.err.find("t99"), std::string::npos);
}

TEST_F(CliPipeline, CoupledFitConvergesAndReplays)
{
	auto r = twice("coupled", {"fit-coupled", "--network", network(), "--panel", panel(), "--cb-slot", "0", "--xr", "3", "--lags", "1"});
	ASSERT_EQ(r.code, 0) << r.err;
	EXPECT_EQ(r.out.substr(0, 15), "converged=true ");
	EXPECT_EQ(first_line(slurp(root / "coupled_a" / "probabilities.csv")), "road_from,road_to,probability,canadian_betweenness");
	replay(root / "coupled_a");

	auto capped = cli({"fit-coupled", "--network", network(), "--panel", panel(), "--cb-slot", "0", "--xr", "3", "--lags", "1",
					   "--max-iter", "2", "--out", (root / "capped").string()});
	EXPECT_EQ(capped.code, 3);
	EXPECT_EQ(capped.out.substr(0, 16), "converged=false ");
}

TEST_F(CliPipeline, UpdateThenPredictFromPosterior)
{
	auto r = twice("update", {"update", "--network", network(), "--panel", panel(), "--lags", "1", "--warmup", "200", "--draws", "300",
							  "--seed", "5"});
	ASSERT_EQ(r.code, 0) << r.err;
	EXPECT_EQ(r.out.substr(0, 10), "periods=5 ");
	replay(root / "update_a");
	auto p = twice("predict_post", {"predict", "--network", network(), "--posterior", (root / "update_a" / "posterior.csv").string(),
									"--panel", panel(), "--lags", "1"});
	ASSERT_EQ(p.code, 0) << p.err;
}

TEST_F(CliPipeline, ElicitFromAssessmentFile)
{
	auto net = ctpglm::load_network(network());
	auto file = root / "assessment.csv";
	{
		std::ofstream a(file);
		a << "road_from,road_to,mean,sd,expert_id\n";
		double m = 0.2;
		for (auto road : net.existing_roads()) {
			a << net.road(road).from << "," << net.road(road).to << "," << m << ",0.05,e1\n";
			a << net.road(road).from << "," << net.road(road).to << "," << 1.0 - m << ",0.1,e2\n";
			m += 0.07;
		}
	}
	auto r = twice("elicit", {"elicit", "--network", network(), "--assessment", file.string(), "--expert", "e2", "--reps", "50",
							  "--seed", "1"});
	ASSERT_EQ(r.code, 0) << r.err;
	EXPECT_EQ(r.out.substr(0, 23), "expert=e2 repetitions=5");
	replay(root / "elicit_a");

	auto prior = root / "elicit_a" / "prior.json";
	auto u = cli({"update", "--network", network(), "--panel", panel(), "--prior", prior.string(), "--warmup", "100", "--draws", "100",
				  "--seed", "2", "--out", (root / "update_elicited").string()});
	EXPECT_EQ(u.code, 0) << u.err;

	auto ambiguous = cli({"elicit", "--network", network(), "--assessment", file.string(), "--reps", "1", "--out",
						  (root / "y").string()});
	EXPECT_NE(ambiguous.code, 0);
}

TEST_F(CliPipeline, PoolTwoSources)
{
	auto net = ctpglm::load_network(network());
	auto flat = root / "flat.csv";
	{
		std::ofstream f(flat);
		f << "road_from,road_to,period,probability\n";
		auto panel_data = ctpglm::load_panel(net, panel());
		for (const auto& period : panel_data.periods)
			for (auto road : net.existing_roads())
				f << net.road(road).from << "," << net.road(road).to << "," << period << ",0.5\n";
	}
	auto sources = (sim / "probabilities.csv").string() + "," + flat.string();
	auto r = twice("pool", {"pool", "--network", network(), "--sources", sources, "--panel", panel(), "--eta", "2"});
	ASSERT_EQ(r.code, 0) << r.err;
	EXPECT_EQ(r.out.substr(0, 10), "periods=6 ");
	auto weights = slurp(root / "pool_a" / "weights.csv");
	EXPECT_EQ(first_line(weights), "after_period,source1,source2");
	replay(root / "pool_a");
}

#endif

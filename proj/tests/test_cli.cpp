#include <gtest/gtest.h>

#include <filesystem>
#include <sstream>

#include "linkring/cli.hpp"
#include "test_util.hpp"

using namespace linkring;

namespace {

struct Run {
  int code;
  std::string out, err;
};

Run run(std::vector<std::string> args, const std::string& stdin_text = "") {
  std::istringstream in(stdin_text);
  std::ostringstream out, err;
  const int code = run_cli(args, in, out, err);
  return {code, out.str(), err.str()};
}

std::string temp_path(const std::string& name) {
  const auto p = std::filesystem::temp_directory_path() / ("linkring_cli_" + name + "_" + std::to_string(::getpid()));
  std::filesystem::remove(p);
  return p.string();
}

std::vector<std::string> lines(const std::string& s) {
  std::vector<std::string> v;
  std::istringstream in(s);
  for (std::string l; std::getline(in, l);) v.push_back(l);
  return v;
}

}  // namespace

TEST(Cli, InverseKinematics) {
  const auto r = run({"ik", "0", "-22"});
  EXPECT_EQ(r.code, 0);
  EXPECT_EQ(r.out, "alpha_left=84.0 alpha_right=84.0\n");
  EXPECT_EQ(run({"ik", "--effector", "B", "0", "-22"}).out, r.out);
}

TEST(Cli, UnreachableTarget) {
  const auto r = run({"ik", "0", "-100"});
  EXPECT_EQ(r.code, 1);
  EXPECT_TRUE(r.out.empty());
  EXPECT_EQ(r.err, "unreachable: (0, -100) is outside the workspace\n");
}

TEST(Cli, NearSingularTargetIsADomainError) {
  const auto r = run({"ik", "0", "-51.45"});
  EXPECT_EQ(r.code, 1);
  EXPECT_EQ(r.err.rfind("error: NearSingular", 0), 0u) << r.err;
}

TEST(Cli, SymmetricForce) {
  const auto r = run({"force"});
  EXPECT_EQ(r.code, 0);
  const auto l = lines(r.out);
  ASSERT_EQ(l.size(), 4u);
  EXPECT_EQ(l[0].rfind("H=22.00 mm", 0), 0u);
  EXPECT_EQ(l[1].rfind("alpha=84.", 0), 0u) << l[1];
  EXPECT_EQ(l[3], "Fn=1.46 N");
  EXPECT_EQ(lines(run({"force", "--depth", "22", "--torque", "0.0588"}).out)[3], "Fn=1.45 N");
  EXPECT_EQ(run({"force", "--depth", "60"}).code, 1);
}

TEST(Cli, UsageErrors) {
  EXPECT_EQ(run({}).code, 2);
  EXPECT_EQ(run({"ik", "0"}).code, 2);
  EXPECT_EQ(run({"ik", "zero", "1"}).code, 2);
  EXPECT_EQ(run({"teleport"}).code, 2);
  EXPECT_EQ(run({"workspace", "--format", "png"}).code, 2);
  EXPECT_EQ(run({"--config", "/nonexistent.json", "ik", "0", "-22"}).code, 2);
  EXPECT_EQ(run({"experiment", "run"}).code, 2);  // --log is required
  const auto help = run({"--help"});
  EXPECT_EQ(help.code, 0);
  EXPECT_NE(help.out.find("workspace"), std::string::npos);
}

TEST(Cli, ConfigFileAndFingerOverrides) {
  EXPECT_EQ(run({"--config", LINKRING_DATA_DIR "/config/default.json", "force"}).out, run({"force"}).out);
  const auto thick = run({"--thickness", "20", "force"});
  EXPECT_EQ(thick.code, 0);
  EXPECT_EQ(thick.out.rfind("H=24.50 mm", 0), 0u);
}

TEST(Cli, WorkspaceCsv) {
  const auto r = run({"workspace", "--resolution", "1", "--bounds", "-3", "3", "-24", "-20"});
  EXPECT_EQ(r.code, 0);
  const auto l = lines(r.out);
  ASSERT_EQ(l.size(), 1u + 6 * 4);
  EXPECT_EQ(l[0], "x_mm,y_mm,class");
  EXPECT_EQ(l[1], "-2.5000,-23.5000,reachable");
  for (std::size_t i = 1; i < l.size(); ++i) EXPECT_NE(l[i].find(",reachable"), std::string::npos);
}

TEST(Cli, WorkspacePgmToFile) {
  const auto path = temp_path("ws.pgm");
  const auto r = run({"workspace", "--format", "pgm", "--resolution", "2", "-o", path});
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find(" reachable of 2100 cells"), std::string::npos) << r.out;
  const auto l = lines(testutil::slurp(path));
  ASSERT_EQ(l.size(), 3u + 35);
  EXPECT_EQ(l[0], "P2");
  EXPECT_EQ(l[1], "60 35");
  EXPECT_EQ(l[2], "255");
  std::filesystem::remove(path);
}

TEST(Cli, PatternPlaySummaryAndWire) {
  const auto r = run({"pattern", "play", "1"});
  EXPECT_EQ(r.code, 0);
  EXPECT_EQ(r.out.rfind("static pattern 1: 180 ticks, 720 frames, 3.580 s, 0 underruns", 0), 0u) << r.out;
  const auto wire = run({"pattern", "play", "1", "--wire"});
  EXPECT_EQ(wire.out, testutil::slurp(LINKRING_FIXTURE_DIR "/static_pattern_1.golden"));
  const auto slip = run({"pattern", "play", "5", "--catalog", "slippage"});
  EXPECT_EQ(slip.code, 0);
  EXPECT_EQ(slip.out.rfind("slippage pattern 5:", 0), 0u);
  const auto file = run({"pattern", "play", "2", "--catalog", LINKRING_DATA_DIR "/catalogs/slippage.json"});
  EXPECT_EQ(file.out, run({"pattern", "play", "2", "--catalog", "slippage"}).out);
  EXPECT_EQ(run({"pattern", "play", "10"}).code, 1);
  EXPECT_EQ(run({"pattern", "play", "1", "--catalog", "/nonexistent.json"}).code, 1);
}

TEST(Cli, HardwareModeNeedsADevice) {
  const auto r = run({"--no-simulate", "pattern", "play", "1"});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("transport.device"), std::string::npos);
}

TEST(Cli, ExperimentRunReadsAnswers) {
  const auto log = temp_path("run.jsonl");
  // Seed 5 on the slippage catalog; two junk lines are re-prompted.
  std::string answers = "x\n9\n";
  const auto s = start_session("P", default_slippage_catalog(), 1, 5, "t");
  for (const auto& t : s.schedule.trials) answers += std::to_string(t.pattern_id) + "\n";
  const auto r =
      run({"--seed", "5", "experiment", "run", "--catalog", "slippage", "--reps", "1", "--fast", "--log", log}, answers);
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.err.find("enter a pattern number"), std::string::npos);
  EXPECT_NE(r.err.find("answer 9 is not a pattern id"), std::string::npos);
  EXPECT_NE(r.out.find("session subject: 5 trials, seed 5"), std::string::npos);
  EXPECT_NE(r.out.find("  mean: 100.0%"), std::string::npos);
  EXPECT_NE(r.out.find("not computed: InsufficientData"), std::string::npos);

  const auto parsed = parse_session_log(testutil::slurp(log));
  ASSERT_EQ(parsed.size(), 1u);
  EXPECT_EQ(parsed[0].schedule, s.schedule);

  const auto rep = run({"report", log});
  EXPECT_EQ(rep.code, 0);
  EXPECT_NE(r.out.find(rep.out), std::string::npos);
  const auto js = run({"report", log, "--json"});
  EXPECT_EQ(js.code, 0);
  EXPECT_EQ(json::parse(js.out)["mean_rate"], 1.0);
  std::filesystem::remove(log);
}

TEST(Cli, ExperimentRunStopsAtEndOfInput) {
  const auto log = temp_path("eof.jsonl");
  const auto r = run({"--seed", "1", "experiment", "run", "--catalog", "slippage", "--fast", "--log", log}, "1\n2\n");
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("input ended after 2 answers"), std::string::npos);
  const auto rep = run({"report", log});
  EXPECT_EQ(rep.code, 1);
  EXPECT_NE(rep.err.find("no complete session"), std::string::npos);
  std::filesystem::remove(log);
}

TEST(Cli, ReportRejectsBrokenLog) {
  const auto log = temp_path("bad.jsonl");
  std::ofstream(log) << "{\"type\":\"schedule\"\n";
  const auto r = run({"report", log});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("log line 1"), std::string::npos);
  std::filesystem::remove(log);
  EXPECT_EQ(run({"report", log}).code, 2);  // missing file is a usage error
}

#include <gtest/gtest.h>
#include <sys/wait.h>

#include <json.hpp>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

const std::string kCli = HITCHIN_CLI;
const std::string kConfigs = CONFIG_DIR;

fs::path scratchDir(const std::string& name) {
  fs::path p = fs::temp_directory_path() / ("hitchin_cli_" + name);
  fs::remove_all(p);
  return p;
}

int run(const std::string& args, const std::string& env = "") {
  std::string cmd = env + (env.empty() ? "" : " ") + kCli + " " + args + " > /dev/null 2>&1";
  int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream s;
  s << f.rdbuf();
  return s.str();
}

json readJson(const fs::path& p) { return json::parse(slurp(p)); }

fs::path writeConfig(const std::string& name, const json& cfg) {
  fs::path dir = fs::temp_directory_path() / "hitchin_cli_configs";
  fs::create_directories(dir);
  fs::path p = dir / (name + ".json");
  std::ofstream(p) << cfg.dump(2);
  return p;
}

// plain CSV: no quoted cells in these outputs
std::vector<std::vector<std::string>> readCsv(const fs::path& p) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(slurp(p));
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::stringstream ls(line);
    std::string c;
    while (std::getline(ls, c, ',')) cells.push_back(c);
    rows.push_back(cells);
  }
  return rows;
}

size_t column(const std::vector<std::vector<std::string>>& csv, const std::string& name) {
  for (size_t i = 0; i < csv[0].size(); ++i)
    if (csv[0][i] == name) return i;
  ADD_FAILURE() << "no column " << name;
  return 0;
}

std::map<std::string, std::string> snapshot(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::directory_iterator(dir)) out[e.path().filename().string()] = slurp(e.path());
  return out;
}

json schottkyBase() {
  return {{"version", 1},
          {"group", {{"builtin", "schottky"}, {"params", {3.0, M_PI / 2}}}},
          {"representation", "irreducible:3"}};
}

}  // namespace

TEST(Cli, UsageExitCodes) {
  EXPECT_EQ(run("--help"), 0);
  EXPECT_EQ(run(""), 2);
  EXPECT_EQ(run("spectrum"), 2);  // --config is required
  EXPECT_EQ(run("nosuchcommand --config x.json"), 2);
  EXPECT_EQ(run("spectrum --config /nonexistent/config.json"), 2);
}

TEST(Cli, MalformedConfigWritesNothing) {
  fs::path out = scratchDir("malformed");
  fs::path bad = fs::temp_directory_path() / "hitchin_cli_bad.json";
  std::ofstream(bad) << "{\"version\": 1, \"group\": ";
  EXPECT_EQ(run("spectrum --config " + bad.string() + " --out " + out.string()), 2);
  EXPECT_FALSE(fs::exists(out));

  json unknown = schottkyBase();
  unknown["T"] = 8;
  unknown["colour"] = "blue";
  EXPECT_EQ(run("spectrum --config " + writeConfig("unknown", unknown).string() + " --out " + out.string()), 2);
  EXPECT_FALSE(fs::exists(out));

  json version = schottkyBase();
  version["T"] = 8;
  version["version"] = 2;
  EXPECT_EQ(run("spectrum --config " + writeConfig("version", version).string() + " --out " + out.string()), 2);

  json nested = schottkyBase();
  nested["T"] = 8;
  nested["hausdorff"] = {{"scales", {1e-2, 1e-4}}};
  EXPECT_EQ(run("hausdorff --config " + writeConfig("scales", nested).string() + " --out " + out.string()), 2);

  json chain = schottkyBase();
  chain["T"] = 8;
  chain["representation"] = "exterior:5*irreducible:4";
  EXPECT_EQ(run("spectrum --config " + writeConfig("chain", chain).string() + " --out " + out.string()), 2);

  json fn = schottkyBase();
  fn["T"] = 8;
  fn["functional"] = {1, 0, 0};
  EXPECT_EQ(run("exponent --config " + writeConfig("functional", fn).string() + " --out " + out.string()), 2);
  EXPECT_FALSE(fs::exists(out));
}

TEST(Cli, CyclicSpectrumIsArithmetic) {
  fs::path out = scratchDir("cyclic");
  ASSERT_EQ(run("spectrum --config " + kConfigs + "/cyclic.json --out " + out.string()), 0);
  auto csv = readCsv(out / "spectrum.csv");
  size_t a1 = column(csv, "alpha_1");
  std::set<double> vals;
  for (size_t i = 1; i < csv.size(); ++i) vals.insert(std::round(std::stod(csv[i][a1]) * 1e6) / 1e6);
  ASSERT_EQ(vals.size(), 11u);  // |n| <= 10 at T = 20, step 2
  double prev = -2;
  for (double v : vals) {
    EXPECT_NEAR(v - prev, 2.0, 1e-9);
    prev = v;
  }
  json m = readJson(out / "manifest.json");
  EXPECT_EQ(m["status"], "ok");
  EXPECT_EQ(m["config"]["classT"], 20);  // defaults are echoed
  EXPECT_EQ(m["config"]["threads"], 1);
  for (const auto& [name, hash] : m["outputs"].items()) EXPECT_TRUE(fs::exists(out / name)) << name;
}

TEST(Cli, LatticeRootsAgree) {
  json cfg = {{"version", 1}, {"group", {{"builtin", "congruenceLevel2"}}}, {"T", 8}};
  fs::path out = scratchDir("lattice_spectrum");
  ASSERT_EQ(run("spectrum --config " + writeConfig("lattice8", cfg).string() + " --out " + out.string()), 0);
  auto csv = readCsv(out / "spectrum.csv");
  size_t a1 = column(csv, "alpha_1"), a2 = column(csv, "alpha_2");
  ASSERT_GT(csv.size(), 100u);
  for (size_t i = 1; i < csv.size(); ++i) EXPECT_NEAR(std::stod(csv[i][a1]), std::stod(csv[i][a2]), 1e-9);
}

TEST(Cli, TooSmallIsInsufficientData) {
  fs::path out = scratchDir("too_small");
  EXPECT_EQ(run("exponent --config " + kConfigs + "/too_small.json --out " + out.string()), 4);
  json m = readJson(out / "manifest.json");
  EXPECT_EQ(m["status"], "insufficient-data");
  EXPECT_EQ(m["partial"], true);
}

TEST(Cli, BudgetCapFromEnvironment) {
  json cfg = schottkyBase();
  cfg["T"] = 18;
  fs::path conf = writeConfig("budget", cfg);
  fs::path out = scratchDir("budget");
  EXPECT_EQ(run("spectrum --config " + conf.string() + " --out " + out.string(), "TOOL_BUDGET_CAP=100"), 3);
  json m = readJson(out / "manifest.json");
  EXPECT_EQ(m["status"], "budget-exceeded");
  EXPECT_EQ(m["partial"], true);
  EXPECT_EQ(m["config"]["elementCap"], 100);
  EXPECT_EQ(readJson(out / "spectrum.json")["partial"], true);
  EXPECT_LE(readCsv(out / "spectrum.csv").size(), 102u);
  EXPECT_EQ(run("spectrum --config " + conf.string() + " --out " + out.string(), "TOOL_BUDGET_CAP=ten"), 2);
}

TEST(Cli, ThreadsDoNotChangeOutputs) {
  json cfg = schottkyBase();
  cfg["T"] = 18;
  fs::path conf = writeConfig("threads", cfg);
  fs::path out = scratchDir("threads");
  ASSERT_EQ(run("spectrum --config " + conf.string() + " --out " + out.string() + " --threads 1"), 0);
  auto one = snapshot(out);
  ASSERT_EQ(run("spectrum --config " + conf.string() + " --out " + out.string() + " --threads 3"), 0);
  auto three = snapshot(out);
  for (const char* f : {"spectrum.csv", "profile.csv", "spectrum.json"}) EXPECT_EQ(one[f], three[f]) << f;
  EXPECT_GT(readCsv(out / "spectrum.csv").size(), 1000u);  // large enough to split
}

TEST(Cli, RerunIsByteIdentical) {
  fs::path out = scratchDir("rerun");
  const std::string args = "positivity --config " + kConfigs + "/schottky_i5.json --out " + out.string();
  ASSERT_EQ(run(args), 0);
  auto first = snapshot(out);
  ASSERT_EQ(run(args), 0);
  EXPECT_EQ(first, snapshot(out));
  json p = readJson(out / "positivity.json");
  EXPECT_EQ(p["allPositive"], true);
  EXPECT_EQ(p["rotationInvariant"], true);
  EXPECT_EQ(p["reversalInvariant"], true);
  EXPECT_GT(p["minMinor"].get<double>(), 1e-10);
  // another seed draws other tuples
  fs::path out2 = scratchDir("rerun_seed");
  ASSERT_EQ(run(args.substr(0, args.find(" --out")) + " --out " + out2.string() + " --seed 4"), 0);
  EXPECT_NE(first["positivity.csv"], slurp(out2 / "positivity.csv"));
}

TEST(Cli, ExponentReports) {
  json lat = {{"version", 1}, {"group", {{"builtin", "congruenceLevel2"}}}, {"T", 12}, {"classT", 11}};
  fs::path out = scratchDir("exponent_lattice");
  ASSERT_EQ(run("exponent --config " + writeConfig("lattice12", lat).string() + " --out " + out.string()), 0);
  json r = readJson(out / "exponent.json");
  EXPECT_NEAR(r["criticalExponent"]["value"].get<double>(), 1.0, 0.1);
  EXPECT_NEAR(r["entropy"]["value"].get<double>(), 1.0, 0.1);
  EXPECT_EQ(slurp(out / "counting.svg").rfind("<svg", 0), 0u);

  json s = schottkyBase();
  s["T"] = 22;
  s["classT"] = 30;
  out = scratchDir("exponent_schottky");
  ASSERT_EQ(run("exponent --config " + writeConfig("schottky22", s).string() + " --out " + out.string()), 0);
  r = readJson(out / "exponent.json");
  EXPECT_LT(r["criticalExponent"]["value"].get<double>(), 0.9);
  EXPECT_LT(r["entropy"]["value"].get<double>(), 0.9);
}

TEST(Cli, RigidityFlagsLattice) {
  fs::path out = scratchDir("rigidity");
  ASSERT_EQ(run("rigidity --config " + kConfigs + "/lattice_rigidity.json --out " + out.string()), 0);
  json r = readJson(out / "rigidity.json");
  EXPECT_EQ(r["bound"], 0.5);
  EXPECT_EQ(r["equalityFlagged"], true);
}

TEST(Cli, DoublePasses) {
  fs::path out = scratchDir("double");
  ASSERT_EQ(run("double --config " + kConfigs + "/schottky.json --out " + out.string()), 0);
  json r = readJson(out / "double.json");
  EXPECT_EQ(r["passes"], true);
  EXPECT_LE(r["reflectionSquareDefect"].get<double>(), 1e-9);
  EXPECT_LE(r["restrictionMaxRelError"].get<double>(), 1e-12);
  EXPECT_EQ(r["positiveTriples"], 100);
}

TEST(Cli, LimitsetAndHausdorffFiles) {
  fs::path out = scratchDir("limitset");
  ASSERT_EQ(run("limitset --config " + kConfigs + "/schottky.json --out " + out.string()), 0);
  json l = readJson(out / "limitset.json");
  EXPECT_GT(l["points"].get<int>(), 1000);
  EXPECT_EQ(readCsv(out / "limitset_chart.csv").size(), l["plotted"].get<size_t>() + 1);

  json bad = schottkyBase();
  bad["T"] = 12;
  bad["limitset"] = {{"chart", {1, 0}}};
  EXPECT_EQ(run("limitset --config " + writeConfig("chart", bad).string() + " --out " + scratchDir("chart").string()), 2);

  out = scratchDir("hausdorff");
  ASSERT_EQ(run("hausdorff --config " + kConfigs + "/schottky.json --out " + out.string()), 0);
  json h = readJson(out / "hausdorff.json");
  EXPECT_EQ(h["tree"]["complete"], true);
  EXPECT_NEAR(h["tree"]["frostman"]["totalMass"].get<double>(), 1.0, 1e-12);
  EXPECT_TRUE(fs::exists(out / "tree.json"));
  EXPECT_TRUE(fs::exists(out / "frostman.csv"));
  EXPECT_EQ(slurp(out / "boxcount.svg").rfind("<svg", 0), 0u);
}

TEST(Cli, AuditStable) {
  fs::path out = scratchDir("audit");
  ASSERT_EQ(run("audit --config " + kConfigs + "/schottky.json --out " + out.string()), 0);
  json a = readJson(out / "audit.json");
  EXPECT_LE(a["omegaMaxDefect"].get<double>(), 1e-9);
  EXPECT_EQ(a["stableWithin0.2"], true);
}

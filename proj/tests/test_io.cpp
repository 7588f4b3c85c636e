#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>

#include "bellstab/io.hpp"

using namespace bellstab;
namespace fs = std::filesystem;

namespace {

const char* kFastConfig = R"({
  "sweep": {"state_mb": [0.5922, 0.1095, 0.1727, 0.1256], "state_dd": [0.71, 0.12, 0.09, 0.08],
            "points": 5, "histogram_samples": 2000},
  "nfp": {"transition_dd": [[0.8, 0.1, 0.05, 0.05], [0.3, 0.4, 0.15, 0.15],
                            [0.4, 0.2, 0.3, 0.1], [0.4, 0.2, 0.1, 0.3]],
          "n_traj_stats": 2000, "n_traj_file": 20}
})";

fs::path scratch(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / ("bellstab_io_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

fs::path write_file(const fs::path& p, const std::string& text) {
  std::ofstream(p) << text;
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(BELLSTAB_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

Json parse(const std::string& s) { return Json::parse(s); }

}  // namespace

TEST(Config, DefaultsRoundTrip) {
  RunConfig c;
  c.seed = 99;
  c.system.fock_dim = 22;
  c.mb.phi_o_rad = 0.5;
  c.nfp.herald_source = HeraldSource::calibrated;
  c.nfp.herald_threshold = 0.1;
  c.calibrate.misreport = CalibrationRates::fixed;
  const Json j = config_to_json(c);
  const RunConfig back = config_from_json(j);
  EXPECT_EQ(config_to_json(back).dump(), j.dump());
  EXPECT_EQ(back.seed, 99u);
  EXPECT_EQ(back.system.fock_dim, 22);
  ASSERT_TRUE(back.mb.phi_o_rad.has_value());
  EXPECT_EQ(*back.mb.phi_o_rad, 0.5);
  EXPECT_NO_THROW(back.validate());
}

TEST(Config, UnknownKeysRejected) {
  EXPECT_THROW(config_from_json(parse(R"({"sed": 1})")), ConfigError);
  EXPECT_THROW(config_from_json(parse(R"({"system": {"chi_c_mhz": 1}})")), ConfigError);
}

TEST(Config, WrongTypesRejected) {
  EXPECT_THROW(config_from_json(parse(R"({"seed": "abc"})")), ConfigError);
  EXPECT_THROW(config_from_json(parse(R"({"system": {"fock_dim": 2.5}})")), ConfigError);
  EXPECT_THROW(config_from_json(parse(R"({"nfp": {"herald_source": "measured"}})")), ConfigError);
  EXPECT_THROW(config_from_json(parse(R"({"calibrate": {"misreport": "none"}})")), ConfigError);
}

TEST(Config, InvalidValuesFailValidation) {
  RunConfig c = config_from_json(parse(R"({"sweep": {"points": 0}})"));
  EXPECT_THROW(c.validate(), ConfigError);
  c = config_from_json(parse(R"({"dd": {"phase_pair_n_rad": 0.0}})"));
  EXPECT_THROW(c.validate(), ConfigError);
  c = config_from_json(parse(R"({"dd": {"phase_pair_n_rad": 0.0, "allow_phase_override": true}})"));
  EXPECT_NO_THROW(c.validate());
}

TEST(Config, MalformedFileIsConfigError) {
  const fs::path d = scratch("malformed");
  EXPECT_THROW(load_config(write_file(d / "bad.json", "{ not json").string()), ConfigError);
  EXPECT_THROW(load_config((d / "missing.json").string()), ConfigError);
}

TEST(Output, FormatNumberRoundTrips) {
  EXPECT_EQ(format_number(0.1), "0.1");
  EXPECT_EQ(format_number(0.25), "0.25");
  EXPECT_EQ(format_number(-3.0), "-3");
  EXPECT_EQ(format_number(std::numeric_limits<double>::quiet_NaN()), "nan");
  const double x = 1.0 / 3.0;
  EXPECT_EQ(std::strtod(format_number(x).c_str(), nullptr), x);
}

TEST(Output, CsvWriterLayout) {
  const fs::path d = scratch("csv");
  {
    CsvWriter w(d / "t.csv", {"a", "b"});
    w.row({1.0, 0.5});
  }
  EXPECT_EQ(slurp(d / "t.csv"), "a,b\n1,0.5\n");
}

TEST(Output, SvgIsWellFormed) {
  const std::string svg = render_svg("t", "x", "y", {PlotSeries{"s", {0.0, 1.0}, {0.0, 1.0}, true}});
  EXPECT_EQ(svg.rfind("<svg", 0), 0u);
  EXPECT_NE(svg.find("</svg>"), std::string::npos);
}

TEST(Cli, PrintConfigEmitsValidJson) {
  const fs::path d = scratch("print");
  const std::string cmd = std::string(BELLSTAB_CLI_PATH) + " print-config --seed 5 > " + (d / "c.json").string();
  ASSERT_EQ(std::system(cmd.c_str()), 0);
  const RunConfig c = config_from_json(Json::parse(slurp(d / "c.json")));
  EXPECT_EQ(c.seed, 5u);
}

TEST(Cli, ConfigErrorsExitWithTwo) {
  const fs::path d = scratch("errors");
  EXPECT_EQ(run_cli("--bogus print-config"), 2);
  EXPECT_EQ(run_cli("--config " + write_file(d / "k.json", R"({"unknown": 1})").string() + " print-config"), 2);
  EXPECT_EQ(run_cli("--config " + write_file(d / "v.json", R"({"system": {"eta": 0}})").string() + " print-config"), 2);
  EXPECT_EQ(run_cli("nfp --scheme xy"), 2);
}

TEST(Cli, SeededRunsAreByteIdentical) {
  const fs::path d = scratch("determinism");
  const std::string cfg = write_file(d / "fast.json", kFastConfig).string();
  for (const char* w : {"1", "2"}) {
    const std::string out = (d / (std::string("w") + w)).string();
    for (const char* cmd : {"threshold-sweep --scheme mb", "nfp --scheme dd"}) {
      ASSERT_EQ(run_cli("--config " + cfg + " --workers " + w + " --out " + out + " " + cmd), 0) << cmd;
    }
  }
  for (const char* f : {"sweep_mb.csv", "histogram_mb.csv", "nfp_dd.csv", "nfp_dd_mc.csv", "nfp_dd_trajectories.csv"}) {
    const std::string a = slurp(d / "w1" / f);
    EXPECT_FALSE(a.empty()) << f;
    EXPECT_EQ(a, slurp(d / "w2" / f)) << f;
  }
  // A different seed changes the sampled output.
  const std::string other = (d / "s2").string();
  ASSERT_EQ(run_cli("--config " + cfg + " --seed 777 --out " + other + " nfp --scheme dd"), 0);
  EXPECT_NE(slurp(d / "w1" / "nfp_dd_trajectories.csv"), slurp(fs::path(other) / "nfp_dd_trajectories.csv"));
}

TEST(Cli, SinglePointSweep) {
  const fs::path d = scratch("single");
  const std::string cfg = write_file(d / "one.json", R"({"sweep": {"state_mb": [0.6, 0.1, 0.2, 0.1],
      "points": 1, "histogram_samples": 100}})").string();
  ASSERT_EQ(run_cli("--config " + cfg + " --out " + d.string() + " threshold-sweep --scheme mb"), 0);
  std::ifstream in(d / "sweep_mb.csv");
  std::string line;
  int rows = 0;
  while (std::getline(in, line)) ++rows;
  EXPECT_EQ(rows, 2);  // header and one grid point
  const Json manifest = Json::parse(slurp(d / "threshold_sweep_mb_manifest.json"));
  EXPECT_EQ(manifest["command"], "threshold_sweep");
}

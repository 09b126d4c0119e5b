#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "anosov/lab.hpp"

using namespace anosov;
using namespace anosov::lab;

namespace {

std::filesystem::path scratch(const std::string& name) {
  const auto p = std::filesystem::temp_directory_path() / ("anosov_lab_test_" + name);
  std::filesystem::remove_all(p);
  return p;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

bool has_diag(const std::vector<Diagnostic>& d, const std::string& path, const std::string& text = "") {
  for (const auto& x : d)
    if (x.path == path && x.message.find(text) != std::string::npos) return true;
  return false;
}

LabConfig config(const json& j, const std::filesystem::path& dir) {
  LabConfig c = load_config(j);
  c.output_dir = dir.string();
  c.threads = 2;
  return c;
}

}  // namespace

TEST(Validate, ShippedConfigsAreClean) {
  int seen = 0;
  for (const auto& f : std::filesystem::directory_iterator(ANOSOV_CONFIG_DIR)) {
    if (f.path().extension() != ".json") continue;
    const auto d = validate(read_json_file(f.path()));
    EXPECT_TRUE(d.empty()) << f.path() << ": " << (d.empty() ? "" : d[0].str());
    ++seen;
  }
  EXPECT_GE(seen, 10);
}

TEST(Validate, Examples) {
  auto d = validate({{"experiment", "horizon"}, {"lattice", {{"disks", {{{"center", {0.5, 0.5}}, {"radius", 0.6}}}}}}});
  EXPECT_TRUE(has_diag(d, "lattice.disks[0].radius", "radius must be < 0.5"));

  d = validate({{"experiment", "model-scan"}, {"scan", {{"tau", -1.0}}}});
  EXPECT_TRUE(has_diag(d, "scan.tau"));

  d = validate({{"experiment", "horizon"}, {"colour", "blue"}, {"scan", {{"spatial", 8}, {"speed", 2}}}});
  EXPECT_TRUE(has_diag(d, "colour", "unknown key"));
  EXPECT_TRUE(has_diag(d, "scan.speed", "unknown key"));

  d = validate({{"experiment", "warp"}});
  EXPECT_TRUE(has_diag(d, "experiment"));
  d = validate(json::object());
  EXPECT_TRUE(has_diag(d, "experiment", "missing"));
  d = validate({{"experiment", "mesh"}, {"mesh", {{"s", 3}}}});
  EXPECT_TRUE(has_diag(d, "mesh.s", "R2 > 1"));
  d = validate({{"experiment", "mesh"}, {"schedule", "sqrt2"}, {"mesh", {{"s", 10}}}});
  EXPECT_TRUE(has_diag(d, "mesh.s", "integer"));
  d = validate({{"experiment", "horizon"}, {"lattice", {{"disks", {{{"center", {0.2, 0.5}}, {"radius", 0.2}},
                                                                   {{"center", {0.5, 0.5}}, {"radius", 0.2}}}}}}});
  EXPECT_TRUE(has_diag(d, "lattice.disks", "disjoint"));
  d = validate({{"experiment", "model-scan"}, {"quotient", {0, 1}}, {"flow", {{"rtol", 0.5}}}});
  EXPECT_TRUE(has_diag(d, "quotient"));
  EXPECT_TRUE(has_diag(d, "flow.rtol"));
  EXPECT_THROW(load_config({{"experiment", "warp"}}), ConfigError);
}

TEST(Run, PeriodicityExample) {
  const auto dir = scratch("periodicity");
  const RunResult r = run(config({{"experiment", "periodicity"}, {"s_values", {3}}}, dir));
  ASSERT_EQ(r.exit_code, 0) << r.message;
  const json j = json::parse(slurp(dir / "periodicity.json"));
  const json& e = j["entries"][0];
  EXPECT_EQ(e["m"], 9);
  EXPECT_EQ(e["n"], 3);
  EXPECT_EQ(e["genus"], 55);
}

TEST(Run, HorizonOnEmptyLatticeIsViolated) {
  const auto dir = scratch("horizon");
  const RunResult r = run(config({{"experiment", "horizon"}, {"lattice", "empty"}, {"horizon", {{"random_rays", 100}}}}, dir));
  ASSERT_EQ(r.exit_code, 0) << r.message;
  const json j = json::parse(slurp(dir / "horizon.json"));
  EXPECT_TRUE(j["violated"].get<bool>());
  EXPECT_FALSE(j["corridor_witness"].is_null());
}

TEST(Run, FlatTorusScanFailsEverywhere) {
  const auto dir = scratch("flat");
  const RunResult r = run(config({{"experiment", "model-scan"},
                                  {"lattice", "empty"},
                                  {"scan", {{"tau", 2.0}, {"spatial", 6}, {"angular", 8}}}},
                                 dir));
  ASSERT_EQ(r.exit_code, 0) << r.message;
  const json j = json::parse(slurp(dir / "cone_scan.json"));
  EXPECT_EQ(j["verdict"], "fail");
  EXPECT_EQ(j["zero_margin_fraction"].get<double>(), 1.0);
  std::istringstream csv(slurp(dir / "cone_scan.csv"));
  std::string line;
  std::getline(csv, line);
  EXPECT_EQ(line, "chart,x1,x2,angle,delta_theta,margin");
  int rows = 0;
  while (std::getline(csv, line)) ++rows;
  EXPECT_EQ(rows, j["samples"].get<int>());
}

TEST(Run, ManifestListsEveryFileWithItsHash) {
  const auto dir = scratch("manifest");
  const RunResult r = run(config({{"experiment", "convergence"}}, dir));
  ASSERT_EQ(r.exit_code, 0) << r.message;
  const json m = json::parse(slurp(dir / "manifest.json"));
  EXPECT_EQ(m["experiment"], "convergence");
  EXPECT_TRUE(m.contains("started_at"));
  EXPECT_EQ(m["config"]["schedule"], "default");
  std::size_t listed = 0;
  for (const auto& f : m["files"]) {
    EXPECT_EQ(f["sha256"], sha256_hex(slurp(dir / f["path"].get<std::string>())));
    ++listed;
  }
  std::size_t on_disk = 0;
  for (const auto& e : std::filesystem::directory_iterator(dir))
    if (e.path().filename() != "manifest.json") ++on_disk;
  EXPECT_EQ(listed, on_disk);
  const std::string csv = slurp(dir / "convergence.csv");
  EXPECT_EQ(csv.rfind("s,sup0,sup1,sup2\n", 0), 0u);
  EXPECT_EQ(csv.find('\r'), std::string::npos);
}

TEST(Run, IdenticalConfigsGiveIdenticalOutputs) {
  const json cfg = {{"experiment", "lyapunov"}, {"sampling", {{"samples", 2}, {"T", {20}}}}, {"rng_seed", 5}};
  const auto a = scratch("det_a"), b = scratch("det_b");
  LabConfig ca = config(cfg, a), cb = config(cfg, b);
  cb.threads = 1;
  const RunResult ra = run(ca), rb = run(cb);
  ASSERT_EQ(ra.exit_code, 0) << ra.message;
  ASSERT_EQ(rb.exit_code, 0) << rb.message;
  ASSERT_EQ(ra.files.size(), rb.files.size());
  for (std::size_t i = 0; i < ra.files.size(); ++i) EXPECT_EQ(ra.files[i].sha256, rb.files[i].sha256);

  const auto c = scratch("det_c");
  LabConfig cc = config(cfg, c);
  cc.rng_seed = 6;
  EXPECT_NE(run(cc).files[0].sha256, ra.files[0].sha256);
}

TEST(Run, ConstructionFailureRemovesOutputs) {
  const auto dir = scratch("coarse");
  const RunResult r =
      run(config({{"experiment", "mesh"}, {"mesh", {{"s", 7}, {"cells_per_unit", 1}}}}, dir));
  EXPECT_EQ(r.exit_code, 3);
  EXPECT_TRUE(std::filesystem::is_empty(dir));
}

TEST(Run, NumericalFailureRemovesOutputs) {
  const auto dir = scratch("numerical");
  LabConfig c = config({{"experiment", "lyapunov"}, {"sampling", {{"samples", 1}, {"T", {50}}}}}, dir);
  c.flow.max_steps = 10;
  const RunResult r = run(c);
  EXPECT_EQ(r.exit_code, 4);
  EXPECT_TRUE(std::filesystem::is_empty(dir));
}

TEST(Run, OutputSetDiscardsUncommittedFiles) {
  const auto dir = scratch("outputset");
  std::filesystem::create_directories(dir);
  {
    lab::detail::OutputSet out(dir);
    out.write("a.csv", "x\n");
    EXPECT_TRUE(std::filesystem::exists(dir / "a.csv"));
  }
  EXPECT_FALSE(std::filesystem::exists(dir / "a.csv"));
}

TEST(Formatting, CsvNumbersRoundTrip) {
  for (double v : {0.1, 1.0 / 3.0, 2.401, 1e-300, -7.25}) EXPECT_EQ(std::stod(csv_number(v)), v);
  EXPECT_EQ(csv_number(std::numeric_limits<double>::infinity()), "inf");
  EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(Config, EchoRoundTrips) {
  const LabConfig c = load_config({{"experiment", "mesh"}, {"mesh", {{"s", 7}}}, {"rng_seed", 9}});
  const json echo = config_to_json(c);
  const LabConfig back = load_config(echo);
  EXPECT_EQ(config_to_json(back), echo);
  EXPECT_EQ(back.rng_seed, 9u);
  EXPECT_EQ(back.disks.size(), 2u);
}

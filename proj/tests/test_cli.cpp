#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "nifti_fixture.hpp"

namespace fs = std::filesystem;

namespace {

const fs::path kDir = fs::temp_directory_path() / "vgflow_test_cli";

int run(const std::string& args) {
  const std::string cmd = std::string(VGFLOW_CLI) + " " + args + " > " + (kDir / "last.log").string() + " 2>&1";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct Setup {
  Setup() {
    fs::remove_all(kDir);
    fs::create_directories(kDir);
  }
};
const Setup setup;

}  // namespace

TEST_CASE("help and unknown subcommands") {
  CHECK(run("--help") == 0);
  CHECK(run("solve --help") == 0);
  CHECK(run("frobnicate") == 2);
  CHECK(run("") == 2);
}

TEST_CASE("user errors exit with status 2") {
  CHECK(run("eval --manifest nowhere.json --output m.json") == 2);
  CHECK(slurp(kDir / "last.log").find("checkpoint") != std::string::npos);

  const auto good = kDir / "ok.nii";
  fixture::write(good, fixture::make_header(16, 32, {4, 4, 4}, {1, 1, 1}), std::vector<float>(64, 0.0f));
  CHECK(run("segment --input " + good.string() + " --output " + (kDir / "m.json").string() +
            " --low 0.9 --high 0.1") == 2);

  fixture::Header bad = fixture::make_header(16, 32, {4, 4, 4}, {1, 1, 1});
  std::memcpy(bad.bytes.data() + 344, "nil\0", 4);
  const auto magic = kDir / "magic.nii";
  fixture::write(magic, bad, std::vector<float>(64, 0.0f));
  CHECK(run("segment --input " + magic.string() + " --output " + (kDir / "m.json").string()) == 2);
  CHECK(slurp(kDir / "last.log").find("magic") != std::string::npos);

  const auto dtype = kDir / "dtype.nii";
  fixture::write(dtype, fixture::make_header(64, 64, {4, 4, 4}, {1, 1, 1}), std::vector<double>(64, 0.0));
  CHECK(run("segment --input " + dtype.string() + " --output " + (kDir / "m.json").string()) == 2);
  CHECK(slurp(kDir / "last.log").find("datatype 64") != std::string::npos);

  CHECK(run("segment --input " + (kDir / "missing.nii").string() + " --output x.json") == 2);
}

TEST_CASE("phantom, segment, graph and solve chain together") {
  const auto nii = kDir / "y.nii", mask = kDir / "y_mask.json", graph = kDir / "y_graph.json",
             flow = kDir / "y_flow.json";
  REQUIRE(run("phantom --output " + nii.string()) == 0);
  REQUIRE(run("segment --input " + nii.string() + " --output " + mask.string()) == 0);
  REQUIRE(run("graph --mask " + mask.string() + " --output " + graph.string()) == 0);
  const auto g = nlohmann::json::parse(slurp(graph));
  CHECK(g["nodes"].size() == 4);
  CHECK(g["edges"].size() == 3);
  CHECK(g.contains("provenance"));
  REQUIRE(run("solve --graph " + graph.string() + " --output " + flow.string() + " --inlet-pressure 15000") == 0);
  const auto f = nlohmann::json::parse(slurp(flow));
  CHECK(f["provenance"]["run_config"]["subcommand"] == "solve");
}

TEST_CASE("config file values sit between flags and defaults") {
  const auto cfg = kDir / "cfg.json";
  std::ofstream(cfg) << R"({"synth": {"networks": 5, "augment_count": 2, "seed": 4}})";
  const auto a = kDir / "cfg_a";
  REQUIRE(run("--config " + cfg.string() + " synth --out " + a.string() + " --augment-count 3") == 0);
  const auto m = nlohmann::json::parse(slurp(a / "manifest.json"));
  CHECK(m["networks"].size() == 5);
  CHECK(m["samples"].size() == 15);
  const auto params = m["provenance"]["run_config"]["params"];
  CHECK(params["seed"] == 4);
  CHECK(params["augment_count"] == 3);
}

TEST_CASE("synth into the same directory is byte-identical") {
  const auto out = kDir / "synth";
  REQUIRE(run("synth --out " + out.string() + " --networks 5 --augment-count 2 --seed 9") == 0);
  const std::string first = slurp(out / "manifest.json");
  const std::string rel = nlohmann::json::parse(first)["samples"][7]["path"].get<std::string>();
  const std::string sample = slurp(out / rel);
  REQUIRE(run("synth --out " + out.string() + " --networks 5 --augment-count 2 --seed 9") == 0);
  CHECK(slurp(out / "manifest.json") == first);
  CHECK(slurp(out / rel) == sample);
  CHECK(!sample.empty());
}

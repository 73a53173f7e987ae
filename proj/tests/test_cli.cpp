#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "json.hpp"
#include "planfactory/datagen.hpp"
#include "planfactory/selector.hpp"
#include "support.hpp"

using namespace planfactory;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    static int counter = 0;
    path = fs::temp_directory_path() /
           ("planfactory_cli_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  fs::path operator/(const std::string& name) const { return path / name; }
};

/// Runs the binary, stdout to `out` when given; returns the exit status.
int run(const std::string& args, const fs::path& out = {}, const std::string& env = {}) {
  std::string cmd = env.empty() ? "" : env + " ";
  cmd += std::string("'") + PLANFACTORY_CLI + "' " + args;
  cmd += out.empty() ? " > /dev/null" : " > '" + out.string() + "'";
  cmd += " 2> /dev/null";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string l; std::getline(in, l);)
    if (!l.empty()) out.push_back(l);
  return out;
}

std::size_t count_ext(const fs::path& dir, const std::string& ext) {
  std::size_t n = 0;
  for (const auto& e : fs::directory_iterator(dir)) n += e.path().extension() == ext;
  return n;
}

}  // namespace

TEST_CASE("cli gen-scenes") {
  TempDir t;
  REQUIRE(run("--workers 1 gen-scenes --seeds 4..6 --out " + (t / "a").string()) == 0);
  CHECK(count_ext(t / "a", ".scene") == 3);
  const auto manifest = lines(slurp(t / "a" / "manifest.txt"));
  CHECK(manifest.size() == count_ext(t / "a", ".scene"));
  for (const auto& l : manifest) CHECK(fs::exists(t / "a" / l.substr(0, l.find(' '))));

  REQUIRE(run("gen-scenes --seeds 4..6 --out " + (t / "b").string()) == 0);
  for (int s = 4; s <= 6; ++s) {
    const std::string name = "scene_" + std::to_string(s) + ".scene";
    CHECK(slurp(t / "a" / name) == slurp(t / "b" / name));
  }

  // The echo is itself a config that reproduces the run.
  REQUIRE(run("--config " + (t / "a" / "config.echo").string() + " gen-scenes --seeds 5 --out " +
              (t / "c").string()) == 0);
  CHECK(slurp(t / "c" / "scene_5.scene") == slurp(t / "a" / "scene_5.scene"));
}

TEST_CASE("cli gen-data and stats") {
  TempDir t;
  const std::string seeds = " gen-data --seeds 21..22 --reverse --relabel --out ";
  REQUIRE(run("--workers 1" + seeds + (t / "a").string()) == 0);
  REQUIRE(run("--workers 2" + seeds + (t / "b").string()) == 0);
  for (const char* f : {"dataset.nmpd", "dataset.jsonl", "seeds.log"}) CHECK(slurp(t / "a" / f) == slurp(t / "b" / f));
  CHECK(lines(slurp(t / "a" / "seeds.log")).size() == 2);

  const auto data = read_dataset(t / "a" / "dataset.nmpd");
  CHECK(data.header.records == data.records.size());
  CHECK(data.records.size() % 2 == 0);

  REQUIRE(run("stats --dataset " + (t / "a" / "dataset.nmpd").string() + " --json " + (t / "s.json").string(),
              t / "s.txt") == 0);
  const auto j = nlohmann::json::parse(slurp(t / "s.json"));
  const auto summary = nlohmann::json::parse(lines(slurp(t / "a" / "dataset.jsonl")).front());
  CHECK(j["records"] == data.records.size());
  CHECK(j["recount_length"] == j["pruned_length"]);
  CHECK(j["recount_workspace"] == j["pruned_workspace"]);
  CHECK(j["kept"] == data.header.kept);
  CHECK(j["push_iterations"] == summary["push_iterations"]);
  CHECK(j["lengths"].size() == data.records.size());
  CHECK(slurp(t / "s.txt").find("records") != std::string::npos);

  write_dataset(t / "empty.nmpd", testing::panda(), {});
  REQUIRE(run("stats --dataset " + (t / "empty.nmpd").string() + " --json " + (t / "e.json").string()) == 0);
  const auto e = nlohmann::json::parse(slurp(t / "e.json"));
  CHECK(e["records"] == 0);
  CHECK(e["kept"] == 0);
  CHECK(e["tight_fraction"] == 0.0);
  CHECK(e["lengths"].empty());
}

TEST_CASE("cli plan, smooth and the seed fallback") {
  TempDir t;
  REQUIRE(run("gen-scenes --seeds 1 --out " + t.path.string()) == 0);
  const auto scene = (t / "scene_1.scene").string();
  REQUIRE(run("plan --scene " + scene + " --seed 3 --out " + (t / "p1.txt").string()) == 0);
  REQUIRE(run("plan --scene " + scene + " --out " + (t / "p2.txt").string(), {}, "PLANFACTORY_SEED=3") == 0);
  CHECK(slurp(t / "p1.txt") == slurp(t / "p2.txt"));
  CHECK(fs::exists(t / "p1.txt.echo"));
  const auto path = Trajectory::parse(slurp(t / "p1.txt"));
  CHECK(path.size() >= 2);

  // A short free path smooths to the fixed length.
  std::ofstream(t / "short.txt") << "0 -0.5 0 -2 0 1.5 0.8\n0.4 -0.3 0 -1.8 0 1.6 0.8\n";
  REQUIRE(run("smooth --path " + (t / "short.txt").string() + " --out " + (t / "s.txt").string()) == 0);
  const auto smooth = Trajectory::parse(slurp(t / "s.txt"));
  CHECK(smooth.size() == 50);
  CHECK(smooth.max_step() <= 0.1 + 1e-9);
}

TEST_CASE("cli exit codes") {
  TempDir t;
  std::ofstream(t / "bad.cfg") << "[Factory]\nspeed = 3\n";
  CHECK(run("--config " + (t / "bad.cfg").string() + " gen-scenes --out " + (t / "x").string()) == 2);
  CHECK(run("gen-scenes --seeds 9..2 --out " + (t / "x").string()) == 2);
  CHECK(run("gen-scenes --out " + (t / "x").string(), {}, "PLANFACTORY_SEED=abc") == 2);
  CHECK(run("frobnicate") == 2);
  CHECK(run("stats --dataset " + (t / "missing.nmpd").string()) == 4);
  CHECK(run("--config " + (t / "missing.cfg").string() + " gen-scenes --out " + (t / "x").string()) == 4);
  std::ofstream(t / "junk.nmpd") << "not a dataset";
  CHECK(run("stats --dataset " + (t / "junk.nmpd").string()) != 0);
  // 5.6 rad in one joint cannot fit 50 waypoints at 0.1 rad.
  std::ofstream(t / "long.txt") << "-2.8 0 0 -2 0 1.5 0\n2.8 0 0 -2 0 1.5 0\n";
  CHECK(run("smooth --path " + (t / "long.txt").string() + " --out " + (t / "o.txt").string()) == 3);
  CHECK(run("--help") == 0);
}

TEST_CASE("cli select") {
  TempDir t;
  const auto& chain = testing::panda();
  const RobotBody body(chain, testing::panda_spheres());
  const JointConfig a = (JointConfig(7) << 0, -0.5, 0, -2, 0, 1.5, 0.8).finished();
  const JointConfig b = (JointConfig(7) << 1.2, -0.5, 0, -2, 0, 1.5, 0.8).finished();
  std::vector<Trajectory> cands = {Trajectory::from_waypoints({a, a}), Trajectory::from_waypoints({b, b})};
  // Obstacle points inside the first candidate's outermost sphere.
  PointCloud cloud;
  const Vec3 inside = place_spheres(testing::panda_spheres(), forward_kinematics(chain, a)).back().center;
  for (int i = 0; i < 20; ++i) cloud.push_back(inside + Vec3(0.001 * i, 0, 0), PointLabel::obstacle);
  cloud.push_back(Vec3(5, 5, 5), PointLabel::robot);
  write_cloud((t / "c.cloud").string(), cloud);
  std::ofstream(t / "cands.txt") << candidates_to_text(cands);

  REQUIRE(run("select --candidates " + (t / "cands.txt").string() + " --cloud " + (t / "c.cloud").string() +
                  " --eps 0.01 --json",
              t / "o.json") == 0);
  const auto j = nlohmann::json::parse(slurp(t / "o.json"));
  const auto expected = select_best(cands, body, ScoringScene{obstacle_points(cloud), 0.01});
  CHECK(j["index"] == 1);
  CHECK(j["index"] == expected.index);
  CHECK(j["scores"] == expected.scores);
  CHECK(j["scores"][0].get<double>() > 0);
}

TEST_CASE("cli augment") {
  TempDir t;
  fs::create_directories(t / "in");
  for (int k = 0; k < 3; ++k) {
    DepthMap d(12, 16);
    for (int r = 0; r < 12; ++r)
      for (int c = 0; c < 16; ++c) d.at(r, c) = 0.01f * static_cast<float>(r + c + k);
    write_depth(t / "in" / ("d" + std::to_string(k) + ".depth"), d);
  }
  std::ofstream(t / "in" / "notes.txt") << "skip me";
  REQUIRE(run("augment --in " + (t / "in").string() + " --out " + (t / "a").string() + " --seed 9") == 0);
  REQUIRE(run("augment --in " + (t / "in").string() + " --out " + (t / "b").string() + " --seed 9") == 0);
  REQUIRE(run("augment --in " + (t / "in").string() + " --out " + (t / "c").string() + " --seed 10") == 0);
  CHECK(count_ext(t / "a", ".depth") == 3);
  bool differs = false;
  for (int k = 0; k < 3; ++k) {
    const std::string name = "d" + std::to_string(k) + ".depth";
    CHECK(slurp(t / "a" / name) == slurp(t / "b" / name));
    differs |= slurp(t / "a" / name) != slurp(t / "c" / name);
    const auto d = read_depth(t / "a" / name);
    CHECK(d.height == 12);
    for (float v : d.data) CHECK((v >= 0.0f && v <= 1.0f));
  }
  CHECK(differs);
  CHECK(run("augment --in " + (t / "nowhere").string() + " --out " + (t / "d").string()) == 4);
}

// planfactory: scene generation, planning, smoothing, dataset production,
// candidate selection, depth augmentation and dataset statistics.

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "planfactory/augment.hpp"
#include "planfactory/binary_io.hpp"
#include "planfactory/datagen.hpp"
#include "planfactory/selector.hpp"

namespace fs = std::filesystem;
using namespace planfactory;

namespace {

enum ExitCode { kOk = 0, kConfigError = 2, kPlannerFailure = 3, kIoFailure = 4 };

class PipelineFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Common {
  std::optional<std::uint64_t> seed;
  int workers = 0;
  double collision_eps = CollisionWorld::kDefaultEps;
  std::string config;
  std::string chain = std::string(PLANFACTORY_DATA_DIR) + "/panda.chain";
  std::string spheres = std::string(PLANFACTORY_DATA_DIR) + "/panda.spheres";

  std::uint64_t global_seed() const {
    if (seed) return *seed;
    if (const char* env = std::getenv("PLANFACTORY_SEED")) {
      try {
        std::size_t used = 0;
        const auto v = std::stoull(env, &used);
        if (used == std::string_view(env).size()) return v;
      } catch (const std::exception&) {
      }
      throw InvalidInput(std::string("PLANFACTORY_SEED is not an unsigned integer: ") + env);
    }
    return 0;
  }

  FactoryConfig factory() const {
    FactoryConfig cfg = config.empty() ? FactoryConfig{} : FactoryConfig::load(config);
    if (workers > 0) cfg.workers = workers;
    return cfg;
  }
};

/// "A..B" inclusive, or a single seed.
std::vector<std::uint64_t> parse_seed_range(const std::string& text) {
  auto number = [&](const std::string& s) {
    if (s.empty() || s.find_first_not_of("0123456789") != std::string::npos)
      throw InvalidInput("bad seed range: " + text);
    return std::stoull(s);
  };
  const auto dots = text.find("..");
  const std::uint64_t a = number(text.substr(0, dots));
  const std::uint64_t b = dots == std::string::npos ? a : number(text.substr(dots + 2));
  if (b < a) throw InvalidInput("seed range is reversed: " + text);
  if (b - a >= 10'000'000) throw InvalidInput("seed range is too large: " + text);
  std::vector<std::uint64_t> out;
  for (std::uint64_t s = a; s <= b; ++s) out.push_back(s);
  return out;
}

void write_text(const fs::path& path, const std::string& text) { write_file(path.string(), text); }

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir.string() + ": " + ec.message());
}

/// Config echo: the full configuration plus the command line that used it.
void write_echo(const fs::path& file, const Common& common, const std::string& command, const FactoryConfig& cfg) {
  write_text(file, "# " + command + "\n# seed " + std::to_string(common.global_seed()) + "\n" + cfg.dump());
}

std::string join_args(int argc, char** argv) {
  std::string s;
  for (int i = 0; i < argc; ++i) {
    if (i) s += ' ';
    s += argv[i];
  }
  return s;
}

int cmd_gen_scenes(const Common& common, const std::string& seeds_text, const fs::path& out,
                   const std::string& command) {
  const FactoryConfig cfg = common.factory();
  const auto seeds = seeds_text.empty() ? std::vector<std::uint64_t>{common.global_seed()} : parse_seed_range(seeds_text);
  ensure_dir(out);
  std::string manifest;
  for (auto s : seeds) {
    const Scene scene = generate_scene(cfg.scenes, s);
    const std::string name = "scene_" + std::to_string(s) + ".scene";
    write_scene(out / name, scene);
    manifest += name + ' ' + std::to_string(s) + ' ' + std::to_string(scene.assets.size()) + ' ' +
                std::to_string(scene.clutter.size()) + '\n';
  }
  write_text(out / "manifest.txt", manifest);
  write_echo(out / "config.echo", common, command, cfg);
  std::cout << "wrote " << seeds.size() << " scenes to " << out.string() << '\n';
  return kOk;
}

int cmd_gen_data(const Common& common, const std::string& seeds_text, const fs::path& out, bool reverse,
                 bool relabel, const std::string& command) {
  FactoryConfig cfg = common.factory();
  if (reverse) cfg.reverse = true;
  if (relabel) cfg.relabel = true;
  const auto chain = KinematicChain::load(common.chain);
  const auto model = SphereModel::load(common.spheres);
  const auto seeds = seeds_text.empty() ? std::vector<std::uint64_t>{common.global_seed()} : parse_seed_range(seeds_text);
  ensure_dir(out);
  const auto result = run_factory(cfg, chain, model, seeds);
  write_dataset(out / "dataset.nmpd", chain, result.records);
  write_text(out / "dataset.jsonl", sidecar_text(result.stats, result.records, chain));
  std::string log;
  for (const auto& l : result.logs) {
    log += std::to_string(l.seed) + (l.produced ? " ok" : " none") + " scenes=" + std::to_string(l.scenes) +
           " unsampleable=" + std::to_string(l.unsampleable) + " plan_failures=" + std::to_string(l.plan_failures) +
           " too_long=" + std::to_string(l.too_long) + " smooth_failures=" + std::to_string(l.smooth_failures) +
           " audit_failures=" + std::to_string(l.audit_failures);
    if (!l.error.empty()) log += " error=" + l.error;
    log += '\n';
  }
  write_text(out / "seeds.log", log);
  write_echo(out / "config.echo", common, command, cfg);
  const auto& st = result.stats;
  std::cout << "seeds " << st.seeds << ", records " << st.records << ", kept " << st.kept << ", pruned length "
            << st.filters.pruned_length << ", pruned workspace " << st.filters.pruned_workspace
            << ", seeds without record " << st.seeds_without_record << '\n';
  if (!seeds.empty() && st.records == 0) throw PipelineFailure("no seed produced a record");
  return kOk;
}

int cmd_plan(const Common& common, const fs::path& scene_path, const fs::path& out, std::optional<long> budget_ms,
             const std::string& command) {
  const FactoryConfig cfg = common.factory();
  const auto chain = KinematicChain::load(common.chain);
  const auto model = SphereModel::load(common.spheres);
  const Scene scene = read_scene(scene_path);
  const CollisionWorld world = scene_world(scene, common.collision_eps);
  Rng rng(common.global_seed());
  PlanningProblem problem;
  try {
    problem = sample_problem(scene, world, chain, model, cfg.problems, rng);
  } catch (const UnsampleableScene& e) {
    throw PipelineFailure(e.what());
  }
  PlannerConfig pc = cfg.planner;
  pc.seed = common.global_seed();
  if (budget_ms) pc.budget = std::chrono::milliseconds(*budget_ms);
  const RobotBody body(chain, model, problem.in_hand);
  const auto result = plan(problem, world, body, pc);
  if (!result.path) throw PipelineFailure("planner found no path");
  const auto traj = Trajectory::from_waypoints(result.path->waypoints);
  write_text(out, traj.to_text());
  write_echo(out.string() + ".echo", common, command, cfg);
  std::cout << "waypoints " << traj.size() << ", cost " << result.path->cost << ", iterations " << result.iterations
            << ", in hand " << (problem.in_hand ? "yes" : "no") << '\n';
  if (problem.in_hand)
    std::cerr << "note: the path was planned with a held object; smooth it with the same object\n";
  return kOk;
}

int cmd_smooth(const Common& common, const fs::path& path_file, const fs::path& scene_path, const fs::path& out,
               const std::string& command) {
  const FactoryConfig cfg = common.factory();
  const auto chain = KinematicChain::load(common.chain);
  const auto model = SphereModel::load(common.spheres);
  cfg.limits.validate(chain.dof());
  const Trajectory raw = Trajectory::parse(read_file(path_file.string()));
  for (const auto& q : raw.waypoints) chain.check_config(q);
  const CollisionWorld world = scene_path.empty() ? CollisionWorld({}, {}, common.collision_eps)
                                                   : scene_world(read_scene(scene_path), common.collision_eps);
  const RobotBody body(chain, model);
  RawPath path{raw.waypoints, raw.cost(), false};
  if (!path_collision_free(path.waypoints, world, body, cfg.smoothing.resolution))
    throw PipelineFailure("input path is not collision-free");
  Rng rng(common.global_seed());
  std::optional<SmoothResult> res;
  try {
    res = smooth_path(path, cfg.limits, world, body, rng, cfg.smoothing);
  } catch (const PathTooLong& e) {
    throw PipelineFailure(e.what());
  }
  if (!res) throw PipelineFailure("every smoothing attempt collided");
  write_text(out, res->trajectory.to_text());
  write_echo(out.string() + ".echo", common, command, cfg);
  std::cout << "waypoints " << res->trajectory.size() << ", cost " << res->trajectory.cost() << " (raw " << path.cost
            << "), mode " << (res->mode == Interpolation::spline ? "spline" : "linear") << '\n';
  return kOk;
}

int cmd_select(const Common& common, const fs::path& candidates_path, const fs::path& cloud_path, double eps,
               bool json) {
  const auto chain = KinematicChain::load(common.chain);
  const auto model = SphereModel::load(common.spheres);
  const auto candidates = parse_candidates(read_file(candidates_path.string()));
  const ScoringScene scene(obstacle_points(read_cloud(cloud_path.string())), eps);
  const RobotBody body(chain, model);
  const auto sel = select_best(candidates, body, scene);
  if (json) {
    nlohmann::json j = {{"index", sel.index}, {"score", sel.score}, {"scores", sel.scores}};
    std::cout << j.dump() << '\n';
  } else {
    std::cout << "index " << sel.index << '\n';
    for (std::size_t i = 0; i < sel.scores.size(); ++i) std::cout << i << ' ' << sel.scores[i] << '\n';
  }
  return kOk;
}

int cmd_augment(const Common& common, const fs::path& in, const fs::path& out, const std::string& command) {
  if (!fs::is_directory(in)) throw IoError("not a directory: " + in.string());
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(in))
    if (e.is_regular_file() && e.path().extension() == ".depth") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  ensure_dir(out);
  const FactoryConfig factory = common.factory();
  const AugmentConfig& cfg = factory.augment;
  const std::uint64_t seed = common.global_seed();
  for (std::size_t i = 0; i < files.size(); ++i) {
    Rng rng(derive_seed(seed, i));
    write_depth(out / files[i].filename(), augment_depth(read_depth(files[i]), cfg, rng));
  }
  write_echo(out / "config.echo", common, command, factory);
  std::cout << "augmented " << files.size() << " depth maps\n";
  return kOk;
}

int cmd_stats(const Common& common, const fs::path& dataset, const std::string& json_out) {
  const FactoryConfig cfg = common.factory();
  const auto chain = KinematicChain::load(common.chain);
  const Dataset data = read_dataset(dataset);
  if (data.header.chain_hash != chain.hash()) std::cerr << "warning: dataset was written for a different chain\n";
  const auto s = summarize(data, chain, cfg.workspace);

  // Placement iterations live in the sidecar written next to the dataset.
  nlohmann::json hist = nlohmann::json::object();
  fs::path sidecar = dataset;
  sidecar.replace_extension(".jsonl");
  if (fs::exists(sidecar)) {
    std::istringstream lines(read_file(sidecar.string()));
    std::string first;
    if (std::getline(lines, first)) {
      auto j = nlohmann::json::parse(first, nullptr, false);
      if (!j.is_discarded() && j.contains("push_iterations")) hist = j["push_iterations"];
    }
  }

  std::vector<double> sorted = s.lengths;
  std::sort(sorted.begin(), sorted.end());
  auto quantile = [&](double q) {
    if (sorted.empty()) return 0.0;
    return sorted[static_cast<std::size_t>(q * static_cast<double>(sorted.size() - 1) + 0.5)];
  };
  std::cout << "records            " << s.records << '\n'
            << "kept               " << s.kept << '\n'
            << "pruned length      " << s.pruned_length << " (recount " << s.recount_length << ")\n"
            << "pruned workspace   " << s.pruned_workspace << " (recount " << s.recount_workspace << ")\n"
            << "tight fraction     " << s.tight_fraction << '\n'
            << "mean task length   " << s.mean_length << " m\n"
            << "mean joint cost    " << s.mean_joint_cost << " rad\n"
            << "task length p50    " << quantile(0.5) << " m, p90 " << quantile(0.9) << " m\n";
  for (const auto& [tag, n] : s.by_tag) std::cout << "tag " << tag << "  " << n << '\n';
  for (auto it = hist.begin(); it != hist.end(); ++it)
    std::cout << "push iterations " << it.key() << "  " << it.value() << '\n';

  nlohmann::json j = {{"records", s.records},
                      {"kept", s.kept},
                      {"pruned_length", s.pruned_length},
                      {"pruned_workspace", s.pruned_workspace},
                      {"recount_length", s.recount_length},
                      {"recount_workspace", s.recount_workspace},
                      {"tight_fraction", s.tight_fraction},
                      {"mean_length", s.mean_length},
                      {"mean_joint_cost", s.mean_joint_cost},
                      {"by_tag", s.by_tag},
                      {"lengths", s.lengths},
                      {"push_iterations", hist}};
  if (!json_out.empty()) write_text(json_out, j.dump(2) + '\n');
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Motion-planning data factory"};
  app.require_subcommand(1);
  app.fallthrough();
  Common common;
  app.add_option("--seed", common.seed, "Global seed (falls back to PLANFACTORY_SEED, then 0)");
  app.add_option("--workers", common.workers, "Worker threads (default: logical cores)")->check(CLI::NonNegativeNumber);
  app.add_option("--config", common.config, "Key-value configuration file");
  app.add_option("--collision-eps", common.collision_eps, "Collision tolerance (m)")->capture_default_str();
  app.add_option("--chain", common.chain, "Kinematic chain file")->capture_default_str();
  app.add_option("--spheres", common.spheres, "Sphere model file")->capture_default_str();

  std::string seeds, out, in, scene, path, candidates, cloud, dataset, json_out;
  bool reverse = false, relabel = false, json = false;
  std::optional<long> budget_ms;
  double eps = 0.01;

  auto* gen_scenes = app.add_subcommand("gen-scenes", "Generate scene files");
  gen_scenes->add_option("--seeds", seeds, "Seed range A..B (inclusive)");
  gen_scenes->add_option("--out", out, "Output directory")->required();

  auto* gen_data = app.add_subcommand("gen-data", "Produce a dataset");
  gen_data->add_option("--seeds", seeds, "Seed range A..B (inclusive)");
  gen_data->add_option("--out", out, "Output directory")->required();
  gen_data->add_flag("--reverse", reverse, "Add reversed copies");
  gen_data->add_flag("--relabel", relabel, "Keep approximate plans with hindsight goals");

  auto* plan_cmd = app.add_subcommand("plan", "Sample a problem in a scene and plan it");
  plan_cmd->add_option("--scene", scene, "Scene file")->required();
  plan_cmd->add_option("--out", out, "Output path file")->required();
  plan_cmd->add_option("--budget-ms", budget_ms, "Wall-clock budget; iteration caps only when absent")
      ->check(CLI::PositiveNumber);

  auto* smooth_cmd = app.add_subcommand("smooth", "Shortcut and resample a path");
  smooth_cmd->add_option("--path", path, "Input path (one waypoint per line)")->required();
  smooth_cmd->add_option("--scene", scene, "Scene file for collision checks");
  smooth_cmd->add_option("--out", out, "Output trajectory file")->required();

  auto* select_cmd = app.add_subcommand("select", "Pick the candidate with the fewest predicted collisions");
  select_cmd->add_option("--candidates", candidates, "Candidate trajectories")->required();
  select_cmd->add_option("--cloud", cloud, "Point cloud file")->required();
  select_cmd->add_option("--eps", eps, "Collision tolerance (m)")->capture_default_str();
  select_cmd->add_flag("--json", json, "Print JSON");

  auto* augment_cmd = app.add_subcommand("augment", "Augment every .depth file in a directory");
  augment_cmd->add_option("--in", in, "Input directory")->required();
  augment_cmd->add_option("--out", out, "Output directory")->required();

  auto* stats_cmd = app.add_subcommand("stats", "Summarize a dataset");
  stats_cmd->add_option("--dataset", dataset, "Dataset file")->required();
  stats_cmd->add_option("--json", json_out, "Also write a JSON summary here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigError;
  }

  const std::string command = join_args(argc, argv);
  try {
    if (*gen_scenes) return cmd_gen_scenes(common, seeds, out, command);
    if (*gen_data) return cmd_gen_data(common, seeds, out, reverse, relabel, command);
    if (*plan_cmd) return cmd_plan(common, scene, out, budget_ms, command);
    if (*smooth_cmd) return cmd_smooth(common, path, scene, out, command);
    if (*select_cmd) return cmd_select(common, candidates, cloud, eps, json);
    if (*augment_cmd) return cmd_augment(common, in, out, command);
    if (*stats_cmd) return cmd_stats(common, dataset, json_out);
  } catch (const InvalidInput& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const PipelineFailure& e) {
    std::cerr << "planning failed: " << e.what() << '\n';
    return kPlannerFailure;
  } catch (const IoError& e) {
    std::cerr << "i/o error: " << e.what() << '\n';
    return kIoFailure;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return kOk;
}

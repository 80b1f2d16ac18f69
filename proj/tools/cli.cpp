#include "cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "pkw/error.hpp"
#include "stages.hpp"

namespace pkw::cli {

namespace {

void report_failure(std::ostream& err, const std::filesystem::path& workspace, const std::string& stage,
                    const std::string& code, const std::string& message) {
  const nlohmann::json record = {{"error", code}, {"stage", stage}, {"message", message}};
  err << record.dump() << '\n';
  std::error_code ec;
  std::filesystem::create_directories(workspace, ec);
  std::ofstream marker(workspace / (stage + ".failed"));
  marker << record.dump(2) << '\n';
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Piano key weir benchmark pipeline: sample, mesh, cloud, label, split, train, eval, bench"};
  app.name("pkwbench");
  app.require_subcommand(1);
  app.fallthrough();

  std::string workspace = "workspace";
  unsigned jobs = std::max(1u, std::thread::hardware_concurrency());
  bool force = false;
  app.add_option("-w,--workspace", workspace, "Workspace directory")
      ->envname("PKWBENCH_WORKSPACE")
      ->capture_default_str();
  app.add_option("-j,--jobs", jobs, "Worker threads for per-geometry stages")
      ->envname("PKWBENCH_JOBS")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  app.add_flag("--force", force, "Overwrite existing artifacts");

  SampleOptions sample;
  auto* cmd_sample = app.add_subcommand("sample", "Draw feasible designs and write the parametric records");
  cmd_sample->add_option("--n", sample.n, "Number of designs")->required();
  cmd_sample->add_option("--seed", sample.seed, "Master seed")->required();
  cmd_sample->add_option("--bound", sample.bounds,
                         "Override a sampling range as name=lo:hi (B_b, T_s, W_i_u, W_i_d in mm; R_B_i ratio)");

  MeshOptions mesh;
  auto* cmd_mesh = app.add_subcommand("mesh", "Build watertight STL meshes and the mesh report");
  cmd_mesh->add_option("--x-segments", mesh.x_segments, "Streamwise subdivisions per ramp")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();

  CloudOptions cloud;
  auto* cmd_cloud = app.add_subcommand("cloud", "Sample unit-cube point clouds from the meshes");
  cmd_cloud->add_option("--points", cloud.points, "Points per cloud")->capture_default_str();
  cmd_cloud->add_option("--seed", cloud.seed, "Master seed")->required();

  LabelOptions label;
  auto* cmd_label = app.add_subcommand("label", "Attach discharge coefficients to every design");
  cmd_label->add_option("--oracle", label.oracle, "synthetic or csv=<path>")->capture_default_str();
  cmd_label->add_option("--sigma", label.sigma, "Noise level of the synthetic oracle")->capture_default_str();
  cmd_label->add_option("--schedule", label.schedule_lps, "Discharges in l/s (default: 19-point schedule)")
      ->delimiter(',');
  cmd_label->add_option("--seed", label.seed, "Master seed")->required();

  SplitOptions split;
  auto* cmd_split = app.add_subcommand("split", "Write a train/val/test assignment");
  cmd_split->add_option("--policy", split.policy, "id | ood-geom:<le2|3to5|ge6> | ood-head:<le90|100to160|ge170> | fraction:<f>")
      ->capture_default_str();
  cmd_split->add_option("--seed", split.seed, "Master seed")->required();

  TrainOptions train;
  auto* cmd_train = app.add_subcommand("train", "Fit a surrogate on a split's training partition");
  cmd_train->add_option("--model", train.model, "tree | forest | gbm | pointnet")->capture_default_str();
  cmd_train->add_option("--split", train.split, "Split name as given to split --policy")->capture_default_str();
  cmd_train->add_option("--seed", train.seed, "Master seed")->required();
  cmd_train->add_option("--trees", train.trees, "Forest trees or boosting stages (0: default)");
  cmd_train->add_option("--depth", train.depth, "Maximum tree depth (negative: model default)");
  cmd_train->add_option("--learning-rate", train.learning_rate, "Boosting learning rate")->capture_default_str();
  cmd_train->add_option("--points", train.points, "Points per cloud for pointnet")->capture_default_str();
  cmd_train->add_option("--epochs", train.epochs, "Maximum pointnet epochs")->capture_default_str();

  EvalOptions eval;
  auto* cmd_eval = app.add_subcommand("eval", "Score a trained model and write a metric CSV");
  cmd_eval->add_option("--model", eval.model, "tree | forest | gbm | pointnet")->capture_default_str();
  cmd_eval->add_option("--split", eval.split, "Split name")->capture_default_str();
  cmd_eval->add_option("--partition", eval.partition, "train | val | test")->capture_default_str();
  cmd_eval->add_option("--points", eval.points, "Points per cloud for pointnet")->capture_default_str();
  cmd_eval->add_flag("--paper-scale", eval.paper_scale, "Report MSE x1e5, R2 x1e2, MAE x1e3, MaxAE x10");

  BenchOptions bench;
  auto* cmd_bench = app.add_subcommand("bench", "Run the full ID, OOD and data-fraction matrix");
  cmd_bench->add_option("--n", bench.n, "Number of designs")->capture_default_str();
  cmd_bench->add_option("--seed", bench.seed, "Master seed")->required();
  cmd_bench->add_option("--oracle", bench.oracle, "synthetic or csv=<path>")->capture_default_str();
  cmd_bench->add_option("--sigma", bench.sigma, "Noise level of the synthetic oracle")->capture_default_str();
  cmd_bench->add_option("--models", bench.models, "Comma-separated models")->delimiter(',');
  cmd_bench->add_option("--points", bench.points, "Points per cloud when pointnet is benchmarked")
      ->capture_default_str();
  cmd_bench->add_option("--epochs", bench.epochs, "Maximum pointnet epochs")->capture_default_str();
  cmd_bench->add_flag("--paper-scale", bench.paper_scale, "Report MSE x1e5, R2 x1e2, MAE x1e3, MaxAE x10");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  const std::string stage = app.get_subcommands().front()->get_name();
  try {
    const Workspace ws(workspace, force);
    const StageContext ctx{ws, jobs, out};
    if (stage == "sample") run_sample(ctx, sample);
    if (stage == "mesh") run_mesh(ctx, mesh);
    if (stage == "cloud") run_cloud(ctx, cloud);
    if (stage == "label") run_label(ctx, label);
    if (stage == "split") run_split(ctx, split);
    if (stage == "train") run_train(ctx, train);
    if (stage == "eval") run_eval(ctx, eval);
    if (stage == "bench") run_bench(ctx, bench);
  } catch (const Error& e) {
    report_failure(err, workspace, stage, std::string(to_string(e.code())), e.what());
    return 1;
  } catch (const std::exception& e) {
    report_failure(err, workspace, stage, "Internal", e.what());
    return 1;
  }
  std::error_code ec;
  std::filesystem::remove(std::filesystem::path(workspace) / (stage + ".failed"), ec);
  return 0;
}

}  // namespace pkw::cli

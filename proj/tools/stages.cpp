#include "stages.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>

#include "pkw/error.hpp"
#include "pkw/hydraulics.hpp"
#include "pkw/model_io.hpp"
#include "pkw/parallel.hpp"
#include "pkw/pointcloud.hpp"
#include "pkw/pointnet.hpp"
#include "pkw/rng.hpp"
#include "pkw/sampler.hpp"
#include "pkw/solidmesh.hpp"
#include "pkw/text.hpp"

namespace pkw::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path manifest_path(const Workspace& ws) { return ws.dir("params") / "manifest.jsonl"; }
fs::path labels_path(const Workspace& ws) { return ws.dir("labels") / "labels.csv"; }
fs::path split_path(const Workspace& ws, std::string_view name) {
  return ws.dir("splits") / (split_file_stem(name) + ".csv");
}
fs::path model_path(const Workspace& ws, std::string_view model, std::string_view split) {
  return ws.dir("models") / (std::string(model) + "-" + split_file_stem(split) + ".wnsm");
}

std::string geometry_id(std::size_t index) {
  std::string digits = std::to_string(index);
  return "g" + std::string(digits.size() < 5 ? 5 - digits.size() : 0, '0') + digits;
}

void apply_bound(DesignSpace& space, const std::string& spec) {
  const auto eq = spec.find('=');
  const auto colon = spec.find(':', eq == std::string::npos ? 0 : eq);
  if (eq == std::string::npos || colon == std::string::npos) {
    throw Error(ErrorCode::InvalidArgument, "bound '" + spec + "' is not name=lo:hi");
  }
  const std::string name = spec.substr(0, eq);
  const auto lo = text::parse_double(spec.substr(eq + 1, colon - eq - 1));
  const auto hi = text::parse_double(spec.substr(colon + 1));
  if (!lo || !hi || !(*lo <= *hi)) throw Error(ErrorCode::InvalidArgument, "bad range in '" + spec + "'");
  for (auto& v : space.variables) {
    if (v.name != name) continue;
    const double unit = name == "R_B_i" ? 1.0 : 1e-3;  // lengths given in mm
    v.lower = *lo * unit;
    v.upper = *hi * unit;
    return;
  }
  throw Error(ErrorCode::InvalidArgument, "unknown variable '" + name + "' (B_b, R_B_i, T_s, W_i_u, W_i_d)");
}

SplitAssignment read_split_file(const Workspace& ws, const std::string& name) {
  const fs::path path = split_path(ws, name);
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "no split '" + name + "' at " + path.string() + "; run split first");
  return read_split(in, name);
}

SplitAssignment compute_split(const DatasetManifest& m, const std::string& policy, std::uint64_t seed) {
  const auto colon = policy.find(':');
  const std::string kind = policy.substr(0, colon);
  const std::string arg = colon == std::string::npos ? "" : policy.substr(colon + 1);
  if (kind == "id" && arg.empty()) return split_id(m, seed);
  if (kind == "ood-geom") {
    if (const auto bin = parse_alpha_bin(arg)) return split_ood_geom(m, *bin, seed);
    throw Error(ErrorCode::InvalidArgument, "alpha bin must be le2, 3to5 or ge6");
  }
  if (kind == "ood-head") {
    if (const auto bin = parse_head_bin(arg)) return split_ood_head(m, *bin, seed);
    throw Error(ErrorCode::InvalidArgument, "discharge bin must be le90, 100to160 or ge170");
  }
  if (kind == "fraction") {
    const auto f = text::parse_double(arg);
    if (!f) throw Error(ErrorCode::InvalidArgument, "fraction needs a number, got '" + arg + "'");
    auto s = subset_fraction(split_id(m, seed), *f, seed);
    s.name = policy;
    return s;
  }
  throw Error(ErrorCode::InvalidArgument, "unknown split policy '" + policy + "'");
}

void gate_split(const DatasetManifest& m, const SplitAssignment& s) {
  const auto c = check_split(m, s);
  const bool by_geometry = s.policy != SplitPolicy::OodHeadQ;
  const bool must_cover = s.policy != SplitPolicy::FractionSubset;
  if (!c.pairs_disjoint || (by_geometry && !c.geometry_disjoint) || (must_cover && !c.covers_labels)) {
    throw Error(ErrorCode::GateFailure, "split '" + s.name + "' leaks or misses samples");
  }
}

void write_split_artifact(const Workspace& ws, const SplitAssignment& s, std::uint64_t seed) {
  std::ostringstream buf;
  write_split(buf, s);
  ws.write_text(split_path(ws, s.name), buf.str(), {"split", seed, {{"policy", s.name}}});
}

// Clouds are thinned with a seed tied to the geometry so training and
// evaluation see the same points.
class CloudCache {
 public:
  CloudCache(const Workspace& ws, const DatasetManifest& m, std::size_t points)
      : ws_(ws), m_(m), points_(points) {}

  const std::vector<Vec3>& get(const std::string& id) {
    if (auto it = cache_.find(id); it != cache_.end()) return it->second;
    const auto* g = m_.find(id);
    if (!g) throw Error(ErrorCode::MissingGeometry, id);
    PointCloud cloud = read_cloud(ws_.root() / g->cloud_path);
    if (cloud.points.size() > points_) cloud = subsample(cloud, points_, text::fnv1a(id));
    return cache_.emplace(id, std::move(cloud.points)).first->second;
  }

 private:
  const Workspace& ws_;
  const DatasetManifest& m_;
  std::size_t points_;
  std::map<std::string, std::vector<Vec3>> cache_;
};

std::vector<CloudExample> cloud_examples(const DatasetManifest& m, const std::vector<PairKey>& keys,
                                         CloudCache& clouds) {
  std::vector<CloudExample> out;
  out.reserve(keys.size());
  for (const auto& k : keys) {
    const auto* label = m.find_label(k);
    if (!label) throw Error(ErrorCode::MissingGeometry, "no label for " + k.geometry_id);
    out.push_back({&clouds.get(k.geometry_id), label->discharge, label->cd});
  }
  return out;
}

json train_config(const TrainOptions& opt) {
  return {{"model", opt.model}, {"split", opt.split}, {"trees", opt.trees}, {"depth", opt.depth},
          {"learning_rate", opt.learning_rate}, {"points", opt.points}, {"epochs", opt.epochs}};
}

AnyModel fit_model(const Workspace& ws, unsigned jobs, const DatasetManifest& m,
                   const SplitAssignment& split, const TrainOptions& opt) {
  if (split.train.empty()) throw Error(ErrorCode::EmptyData, "split '" + split.name + "' has no training pairs");
  if (opt.model == "pointnet") {
    CloudCache clouds(ws, m, opt.points);
    const auto train = cloud_examples(m, split.train, clouds);
    const auto val = cloud_examples(m, split.val, clouds);
    PointNetConfig cfg;
    cfg.max_epochs = opt.epochs;
    return fit_pointnet_mini(train, val, cfg, opt.seed).model;
  }
  const Tabular data = tabular(m, split.train);
  if (opt.model == "tree") {
    TreeParams p;
    p.max_depth = opt.depth;
    return fit_tree(data.x, data.y, p);
  }
  if (opt.model == "forest") {
    ForestParams p;
    if (opt.trees) p.n_trees = opt.trees;
    p.tree.max_depth = opt.depth;
    p.jobs = jobs;
    return fit_forest(data.x, data.y, p, opt.seed);
  }
  if (opt.model == "gbm") {
    GbmParams p;
    if (opt.trees) p.n_stages = opt.trees;
    if (opt.depth >= 0) p.max_depth = opt.depth;
    p.learning_rate = opt.learning_rate;
    return fit_gbm(data.x, data.y, p);
  }
  throw Error(ErrorCode::InvalidArgument, "unknown model '" + opt.model + "' (tree, forest, gbm, pointnet)");
}

std::vector<double> predict_model(const Workspace& ws, const DatasetManifest& m, const AnyModel& model,
                                  const std::vector<PairKey>& keys, std::size_t points) {
  if (const auto* net = std::get_if<PointNetMini>(&model)) {
    CloudCache clouds(ws, m, points);
    std::vector<double> out;
    for (const auto& ex : cloud_examples(m, keys, clouds)) out.push_back(net->predict(*ex.points, ex.discharge));
    return out;
  }
  const Matrix x = tabular(m, keys).x;
  return std::visit(
      [&](const auto& tab) -> std::vector<double> {
        if constexpr (std::is_same_v<std::decay_t<decltype(tab)>, PointNetMini>) {
          return {};
        } else {
          return tab.predict(x);
        }
      },
      model);
}

std::vector<double> targets(const DatasetManifest& m, const std::vector<PairKey>& keys) {
  std::vector<double> y;
  y.reserve(keys.size());
  for (const auto& k : keys) y.push_back(m.find_label(k)->cd);
  return y;
}

const std::vector<PairKey>& partition_of(const SplitAssignment& s, const std::string& name) {
  if (name == "train") return s.train;
  if (name == "val") return s.val;
  if (name == "test") return s.test;
  throw Error(ErrorCode::InvalidArgument, "partition must be train, val or test");
}

std::string metric_csv(const std::vector<MetricRow>& rows, bool paper_scale) {
  std::ostringstream buf;
  write_metric_csv(buf, rows, paper_scale);
  return buf.str();
}

}  // namespace

DatasetManifest load_dataset(const Workspace& ws) {
  const fs::path mp = manifest_path(ws);
  std::ifstream in(mp);
  if (!in) throw Error(ErrorCode::Io, "no manifest at " + mp.string() + "; run sample first");
  DatasetManifest m = read_manifest(in);
  const fs::path lp = labels_path(ws);
  if (fs::exists(lp)) {
    std::ifstream labels(lp);
    for (auto& l : read_labels(labels)) m.add_label(std::move(l));
  }
  m.check();
  return m;
}

void run_sample(const StageContext& ctx, const SampleOptions& opt) {
  if (opt.n == 0) throw Error(ErrorCode::InvalidArgument, "--n must be positive");
  DesignSpace space = DesignSpace::paper_default();
  json bounds = json::object();
  for (const auto& b : opt.bounds) apply_bound(space, b);
  for (const auto& v : space.variables) bounds[v.name] = {v.lower, v.upper};

  BatchOptions batch_opt;
  batch_opt.jobs = ctx.jobs;
  const SampleBatch batch = generate_batch(space, opt.n, opt.seed, batch_opt);

  DatasetManifest m;
  m.provenance = {opt.seed, std::string(kToolVersion), ""};
  std::vector<GeometryRecord> records;
  for (std::size_t i = 0; i < batch.samples.size(); ++i) {
    const std::string id = geometry_id(i);
    records.push_back(make_record(id, space.fixed, batch.samples[i]));
    m.add_geometry({records.back(), "meshes/" + id + ".stl", "clouds/" + id + ".wnpc"});
  }

  const ArtifactMeta meta{"sample", opt.seed, {{"n", opt.n}, {"bounds_m", bounds}}};
  std::ostringstream table, manifest;
  write_parametric_records(table, records);
  write_manifest(manifest, m);
  ctx.ws.write_text(ctx.ws.dir("params") / "records.csv", table.str(), meta);
  ctx.ws.write_text(manifest_path(ctx.ws), manifest.str(), meta);
  ctx.log << "sampled " << records.size() << " designs (" << batch.rejected_count << " rejected, "
          << batch.duplicate_count << " duplicates, " << batch.rounds << " rounds)\n";
}

void run_mesh(const StageContext& ctx, const MeshOptions& opt) {
  const DatasetManifest m = load_dataset(ctx.ws);
  ctx.ws.dir("meshes");
  const auto& geoms = m.geometries();

  struct Row {
    MeshReport report;
    double analytic = 0.0;
    std::string status = "ok";
  };
  std::vector<Row> rows(geoms.size());
  parallel_for(geoms.size(), ctx.jobs, [&](std::size_t i) {
    const auto& g = geoms[i];
    Row& row = rows[i];
    try {
      const TriangleMesh mesh = build_weir_mesh(g.record.derived, g.record.fixed, opt.x_segments);
      row.report = validate_mesh(mesh);
      row.analytic = analytic_volume(g.record.derived, g.record.fixed);
      const fs::path path = ctx.ws.root() / g.mesh_path;
      ctx.ws.claim(path);
      write_stl(path, mesh, g.record.id);
      ctx.ws.write_meta(path, {"mesh", 0, {{"geometry_id", g.record.id}, {"x_segments", opt.x_segments}}});
    } catch (const Error& e) {
      if (e.code() == ErrorCode::ArtifactExists || e.code() == ErrorCode::Io) throw;
      row.status = std::string(to_string(e.code()));
    }
  });

  std::ostringstream report;
  report << "geometry_id,triangles,boundary_edges,nonmanifold_edges,inconsistent_edges,volume_m3,"
            "analytic_volume_m3,volume_rel_error,bbox_ok,status\n";
  std::vector<std::string> failed;
  for (std::size_t i = 0; i < geoms.size(); ++i) {
    const auto& r = rows[i].report;
    const auto& d = geoms[i].record.derived;
    const auto& fixed = geoms[i].record.fixed;
    const double rel = rows[i].analytic > 0.0 ? std::abs(r.signed_volume - rows[i].analytic) / rows[i].analytic : 1.0;
    const double want[3][2] = {{0.0, d.length}, {0.0, fixed.width}, {0.0, fixed.height}};
    bool bbox_ok = true;
    for (int a = 0; a < 3; ++a) {
      bbox_ok = bbox_ok && std::abs(r.bbox[a].lo - want[a][0]) <= 1e-12 && std::abs(r.bbox[a].hi - want[a][1]) <= 1e-12;
    }
    const bool pass = rows[i].status == "ok" && r.watertight && r.n_inconsistent_edges == 0 && rel <= 1e-9 && bbox_ok;
    if (!pass) failed.push_back(geoms[i].record.id);
    report << geoms[i].record.id << ',' << r.n_triangles << ',' << r.n_boundary_edges << ','
           << r.n_nonmanifold_edges << ',' << r.n_inconsistent_edges << ',' << text::format_sig(r.signed_volume, 12)
           << ',' << text::format_sig(rows[i].analytic, 12) << ',' << text::format_sig(rel, 3) << ','
           << (bbox_ok ? "true" : "false") << ',' << (pass ? rows[i].status : rows[i].status == "ok" ? "gate" : rows[i].status)
           << '\n';
  }
  ctx.ws.write_text(ctx.ws.dir("meshes") / "report.csv", report.str(),
                    {"mesh", 0, {{"x_segments", opt.x_segments}, {"geometries", geoms.size()}}});
  ctx.log << "meshed " << geoms.size() - failed.size() << " of " << geoms.size() << " geometries\n";
  if (!failed.empty()) {
    throw Error(ErrorCode::GateFailure, std::to_string(failed.size()) + " meshes failed the watertight/volume gate, first " + failed.front());
  }
}

void run_cloud(const StageContext& ctx, const CloudOptions& opt) {
  const DatasetManifest m = load_dataset(ctx.ws);
  ctx.ws.dir("clouds");
  const auto& geoms = m.geometries();
  parallel_for(geoms.size(), ctx.jobs, [&](std::size_t i) {
    const auto& g = geoms[i];
    const fs::path out = ctx.ws.root() / g.cloud_path;
    ctx.ws.claim(out);
    const TriangleMesh mesh = read_stl(ctx.ws.root() / g.mesh_path);
    const std::uint64_t seed = derive_seed(opt.seed, i);
    PointCloud cloud = normalize_unit_cube(sample_surface(mesh, opt.points, seed));
    cloud.source_geometry_id = g.record.id;
    cloud.seed = seed;
    write_cloud(out, cloud);
    ctx.ws.write_meta(out, {"cloud", seed,
                            {{"geometry_id", g.record.id}, {"points", opt.points}, {"master_seed", opt.seed},
                             {"scale_m", cloud.transform.scale},
                             {"offset_m", {cloud.transform.offset.x, cloud.transform.offset.y, cloud.transform.offset.z}}}});
  });
  ctx.log << "sampled " << geoms.size() << " clouds of " << opt.points << " points\n";
}

void run_label(const StageContext& ctx, const LabelOptions& opt) {
  DatasetManifest m = load_dataset(ctx.ws);
  if (m.geometries().empty()) throw Error(ErrorCode::EmptyData, "manifest has no geometries");
  const std::vector<double> schedule = opt.schedule_lps.empty() ? paper_schedule_lps() : opt.schedule_lps;
  std::vector<LabeledSample> labels;
  json config = {{"oracle", opt.oracle}};

  if (opt.oracle == "synthetic") {
    config["sigma"] = opt.sigma;
    config["schedule_lps"] = schedule;
    const auto& geoms = m.geometries();
    for (std::size_t i = 0; i < geoms.size(); ++i) {
      const auto& rec = geoms[i].record;
      OracleConfig oc{rec.fixed, opt.sigma};
      for (std::size_t j = 0; j < schedule.size(); ++j) {
        LabeledSample l;
        l.geometry_id = rec.id;
        l.discharge = lps_to_m3s(schedule[j]);
        l.cd = synthetic_cd(rec.derived, l.discharge, oc, derive_seed(opt.seed, i * schedule.size() + j));
        l.total_head = head_from_cd(l.cd, rec.derived.crest_length, l.discharge);
        l.source = LabelSource::Synthetic;
        labels.push_back(std::move(l));
      }
    }
  } else if (opt.oracle.rfind("csv=", 0) == 0) {
    const fs::path src = opt.oracle.substr(4);
    std::ifstream in(src);
    if (!in) throw Error(ErrorCode::Io, "cannot open label file " + src.string());
    std::map<std::string, double> lengths;
    for (const auto& g : m.geometries()) lengths[g.record.id] = g.record.derived.crest_length;
    IngestResult res = ingest_labels(in, lengths, m.geometries().front().record.fixed);
    config["source_hash"] = text::hex64(text::fnv1a(Workspace::read_text(src)));
    if (res.duplicates) ctx.log << res.duplicates << " duplicate rows replaced by later rows\n";
    labels = std::move(res.labels);
  } else {
    throw Error(ErrorCode::InvalidArgument, "--oracle must be synthetic or csv=<path>");
  }

  for (const auto& l : labels) m.add_label(l);
  m.check();
  std::ostringstream buf;
  write_labels(buf, labels);
  ctx.ws.write_text(labels_path(ctx.ws), buf.str(), {"label", opt.seed, config});
  ctx.log << "labeled " << labels.size() << " (geometry, discharge) pairs\n";
}

void run_split(const StageContext& ctx, const SplitOptions& opt) {
  const DatasetManifest m = load_dataset(ctx.ws);
  const SplitAssignment s = compute_split(m, opt.policy, opt.seed);
  gate_split(m, s);
  write_split_artifact(ctx.ws, s, opt.seed);
  ctx.log << s.name << ": " << s.train.size() << " train, " << s.val.size() << " val, " << s.test.size()
          << " test pairs\n";
}

void run_train(const StageContext& ctx, const TrainOptions& opt) {
  const DatasetManifest m = load_dataset(ctx.ws);
  const SplitAssignment split = read_split_file(ctx.ws, opt.split);
  const fs::path out = model_path(ctx.ws, opt.model, opt.split);
  ctx.ws.claim(out);
  const AnyModel model = fit_model(ctx.ws, ctx.jobs, m, split, opt);
  write_model(out, model);
  ctx.ws.write_meta(out, {"train", opt.seed, train_config(opt)});
  ctx.log << "trained " << opt.model << " on " << split.train.size() << " pairs -> " << out.string() << '\n';
}

std::vector<MetricRow> run_eval(const StageContext& ctx, const EvalOptions& opt) {
  const DatasetManifest m = load_dataset(ctx.ws);
  const SplitAssignment split = read_split_file(ctx.ws, opt.split);
  const fs::path mp = model_path(ctx.ws, opt.model, opt.split);
  if (!fs::exists(mp)) throw Error(ErrorCode::Io, "no model at " + mp.string() + "; run train first");
  const AnyModel model = read_model(mp);
  const auto& keys = partition_of(split, opt.partition);
  const auto report = metrics(targets(m, keys), predict_model(ctx.ws, m, model, keys, opt.points));
  std::vector<MetricRow> rows = {{opt.split, opt.model, report}};
  const std::string csv = metric_csv(rows, opt.paper_scale);
  const fs::path out = ctx.ws.dir("reports") /
                       ("eval-" + opt.model + "-" + split_file_stem(opt.split) + "-" + opt.partition + ".csv");
  ctx.ws.write_text(out, csv, {"eval", 0, {{"model", opt.model}, {"split", opt.split},
                                            {"partition", opt.partition}, {"paper_scale", opt.paper_scale}}});
  ctx.log << csv;
  return rows;
}

std::vector<std::string> bench_policies() {
  return {"id",
          "ood-geom:le2", "ood-geom:3to5", "ood-geom:ge6",
          "ood-head:le90", "ood-head:100to160", "ood-head:ge170",
          "fraction:0.1", "fraction:0.2", "fraction:0.4", "fraction:0.6", "fraction:0.8", "fraction:1"};
}

std::vector<MetricRow> run_bench(const StageContext& ctx, const BenchOptions& opt) {
  const bool needs_clouds = std::find(opt.models.begin(), opt.models.end(), "pointnet") != opt.models.end();
  run_sample(ctx, {opt.n, opt.seed, {}});
  run_mesh(ctx, {});
  if (needs_clouds) run_cloud(ctx, {opt.points, opt.seed});
  run_label(ctx, {opt.oracle, opt.sigma, {}, opt.seed});

  const DatasetManifest m = load_dataset(ctx.ws);
  std::vector<MetricRow> rows;
  for (const auto& policy : bench_policies()) {
    const SplitAssignment split = compute_split(m, policy, opt.seed);
    gate_split(m, split);
    write_split_artifact(ctx.ws, split, opt.seed);
    for (const auto& name : opt.models) {
      TrainOptions t;
      t.model = name;
      t.split = policy;
      t.seed = opt.seed;
      t.points = opt.points;
      t.epochs = opt.epochs;
      const fs::path out = model_path(ctx.ws, name, policy);
      ctx.ws.claim(out);
      const AnyModel model = fit_model(ctx.ws, ctx.jobs, m, split, t);
      write_model(out, model);
      ctx.ws.write_meta(out, {"train", opt.seed, train_config(t)});
      const auto report = metrics(targets(m, split.test), predict_model(ctx.ws, m, model, split.test, opt.points));
      rows.push_back({policy, name, report});
      ctx.log << policy << ' ' << name << " R2 " << (report.r2 ? text::format_sig(*report.r2, 4) : "undefined") << '\n';
    }
  }
  const json config = {{"n", opt.n}, {"oracle", opt.oracle}, {"sigma", opt.sigma}, {"models", opt.models},
                       {"paper_scale", opt.paper_scale}, {"points", opt.points}, {"epochs", opt.epochs}};
  const std::string csv = metric_csv(rows, opt.paper_scale);
  ctx.ws.write_text(ctx.ws.dir("reports") / "bench.csv", csv, {"bench", opt.seed, config});
  ctx.log << csv;
  return rows;
}

}  // namespace pkw::cli

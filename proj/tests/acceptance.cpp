// Acceptance run: one line per criterion, nonzero exit if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "pkw/dataset.hpp"
#include "pkw/error.hpp"
#include "pkw/geometry.hpp"
#include "pkw/hydraulics.hpp"
#include "pkw/pointcloud.hpp"
#include "pkw/pointnet.hpp"
#include "pkw/rng.hpp"
#include "pkw/sampler.hpp"
#include "pkw/solidmesh.hpp"
#include "pkw/surrogates.hpp"

using namespace pkw;

namespace {

const PkwFixed kFixed{};
constexpr std::uint64_t kSeed = 20240601;

struct Outcome {
  bool pass = false;
  std::string detail;
};

unsigned jobs() { return std::max(1u, std::thread::hardware_concurrency()); }

double rel(double a, double b) {
  const double scale = std::max(std::abs(a), std::abs(b));
  return scale == 0.0 ? 0.0 : std::abs(a - b) / scale;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

// Formula suite. The reference values are re-evaluated here from the
// definitions, not taken from derive.
Outcome formulas() {
  const auto samples = oracle::feasible_designs(10'000, kSeed);
  double worst = 0.0;
  auto track = [&](double a, double b) { worst = std::max(worst, rel(a, b)); };
  for (const auto& s : samples) {
    const auto d = derive(kFixed, s);
    const double wu = kFixed.width / kFixed.units;
    const double bi = s.inlet_overhang_ratio * s.base_length;
    const double bo = s.outlet_overhang_ratio * s.base_length;
    const double b = s.base_length + bi + bo;
    const double alpha = std::atan((s.inlet_width_up - s.inlet_width_down) / (2.0 * (b - s.wall_thickness)));
    const double ts2 = s.wall_thickness / std::cos(alpha);
    const double dts = s.wall_thickness * std::tan(alpha);
    const double ts3 = ts2 - dts;
    track(d.unit_width, wu);
    track(d.inlet_overhang, bi);
    track(d.outlet_overhang, bo);
    track(d.length, b);
    track(d.sidewall_angle, alpha);
    track(d.wall_thickness_transverse, ts2);
    track(d.wall_offset, dts);
    track(d.wall_thickness_corner, ts3);
    track(d.outlet_width_up, wu - s.inlet_width_up - 2.0 * ts3);
    track(d.outlet_width_down, wu - s.inlet_width_down - 2.0 * ts3);
    track(std::cos(d.sidewall_angle) * d.wall_thickness_transverse, d.wall_thickness);
    track(d.wall_thickness_corner + d.wall_offset, d.wall_thickness_transverse);
    track(d.outlet_width_down - d.outlet_width_up, d.inlet_width_up - d.inlet_width_down);
    track(d.crest_length, kFixed.units * d.unit_crest_length);
  }
  // Rectangular degeneracy must be exact.
  bool rectangular = true;
  for (std::size_t i = 0; i < samples.size(); i += 10) {
    auto s = samples[i];
    s.inlet_width_down = s.inlet_width_up;
    const auto d = derive(kFixed, s);
    rectangular = rectangular && d.sidewall_angle == 0.0 && d.wall_offset == 0.0 &&
                  d.wall_thickness_transverse == d.wall_thickness &&
                  d.wall_thickness_corner == d.wall_thickness;
  }
  return {worst <= 1e-12 && rectangular,
          "n=10000 max rel err " + fmt(worst) + " (tol 1e-12), rectangular exact " + (rectangular ? "yes" : "no")};
}

Outcome du_buat() {
  Rng rng(kSeed);
  double worst = 0.0;
  for (int i = 0; i < 10'000; ++i) {
    const double q = rng.uniform(0.01, 0.5), l = rng.uniform(0.5, 10.0), h = rng.uniform(0.01, 0.5);
    const double cd = cd_from_head(q, l, h);
    worst = std::max({worst, rel(discharge_from_cd(cd, l, h), q), rel(head_from_cd(cd, l, q), h)});
  }
  // Hand value: 0.1 / (2/3 * 4 * sqrt(2 * 9.81) * 0.08^1.5).
  const double hand = cd_from_head(0.1, 4.0, 0.08);
  const bool ok = worst <= 1e-12 && std::abs(hand - 0.37415) <= 1e-4;
  return {ok, "round trip max rel err " + fmt(worst) + " (tol 1e-12), c_D(0.1, 4.0, 0.08) = " + fmt(hand) +
                  " (0.37415 +- 1e-4)"};
}

Outcome constraint_gate() {
  const auto space = DesignSpace::paper_default(kFixed);
  const auto batch = generate_batch(space, 1000, kSeed);
  std::size_t passing = 0;
  for (const auto& s : batch.samples) passing += validate(kFixed, s).feasible ? 1 : 0;

  // Push one variable of a mid-range design past each bound in turn.
  const double p = kFixed.height;
  const PkwSample base = symmetric_sample(0.40, 0.5, 0.02, 0.20, 0.14);
  const double width_max = kFixed.unit_width() - 2.0 * base.wall_thickness - 0.03 * p;
  struct Injection {
    std::string expect;
    std::function<void(PkwSample&)> apply;
  };
  const std::vector<Injection> injections = {
      {"B_b>=min", [&](PkwSample& s) { s.base_length = 0.33 * p - 1e-6; }},
      {"B_b<=max", [&](PkwSample& s) { s.base_length = 1.67 * p + 1e-6; }},
      {"R_B_i>=min", [&](PkwSample& s) { s.inlet_overhang_ratio = 0.25 - 1e-6; }},
      {"R_B_i<=max", [&](PkwSample& s) { s.inlet_overhang_ratio = 1.0 + 1e-6; }},
      {"T_s>=min", [&](PkwSample& s) { s.wall_thickness = 0.015 * p - 1e-6; }},
      {"T_s<=max", [&](PkwSample& s) { s.wall_thickness = 0.18 * p + 1e-6; }},
      {"W_i_u>=min", [&](PkwSample& s) { s.inlet_width_up = 0.03 * p - 1e-6; s.inlet_width_down = 0.005; }},
      {"W_i_u<=max", [&](PkwSample& s) { s.inlet_width_up = width_max + 1e-6; }},
      {"W_i_d>=min", [&](PkwSample& s) { s.inlet_width_down = 0.03 * p - 1e-6; }},
      {"W_i_d<=max", [&](PkwSample& s) { s.inlet_width_up = s.inlet_width_down = width_max + 1e-6; }},
      {"W_i_u>=W_i_d", [&](PkwSample& s) { std::swap(s.inlet_width_up, s.inlet_width_down); }},
  };
  std::size_t caught = 0;
  std::string missed;
  for (const auto& inj : injections) {
    PkwSample s = base;
    inj.apply(s);
    const auto rep = validate(kFixed, s);
    const bool hit = !rep.feasible && std::any_of(rep.violations.begin(), rep.violations.end(),
                                                  [&](const Violation& v) { return v.constraint == inj.expect; });
    if (hit) {
      ++caught;
    } else {
      missed += " " + inj.expect;
    }
  }

  const auto stats = enumerate_grid(DesignSpace::screening_grid(kFixed), [](const PkwSample&) {});
  const double ratio = static_cast<double>(stats.feasible) / static_cast<double>(stats.candidates);
  const bool ok = batch.samples.size() == 1000 && passing == 1000 && caught == injections.size() &&
                  ratio >= 0.40 && ratio <= 0.70;
  return {ok, "LHS " + std::to_string(passing) + "/1000 valid, injected " + std::to_string(caught) + "/" +
                  std::to_string(injections.size()) + " caught" + (missed.empty() ? "" : " (missed:" + missed + ")") +
                  ", grid ratio " + std::to_string(stats.feasible) + "/" + std::to_string(stats.candidates) + " = " +
                  fmt(ratio) + " (range [0.40, 0.70])"};
}

Outcome mesh_suite() {
  const auto samples = oracle::feasible_designs(50, kSeed + 4);
  std::size_t good = 0;
  double worst_volume = 0.0, worst_bbox = 0.0;
  for (const auto& s : samples) {
    const auto d = derive(kFixed, s);
    const auto rep = validate_mesh(build_weir_mesh(d, kFixed));
    const double expect[3][2] = {{0.0, d.length}, {0.0, kFixed.width}, {0.0, kFixed.height}};
    double bbox = 0.0;
    for (int a = 0; a < 3; ++a) {
      bbox = std::max({bbox, std::abs(rep.bbox[a].lo - expect[a][0]), std::abs(rep.bbox[a].hi - expect[a][1])});
    }
    const double volume = rel(rep.signed_volume, analytic_volume(d, kFixed));
    worst_bbox = std::max(worst_bbox, bbox);
    worst_volume = std::max(worst_volume, volume);
    if (rep.watertight && rep.n_boundary_edges == 0 && rep.n_nonmanifold_edges == 0 && bbox <= 1e-12 &&
        volume <= 1e-9) {
      ++good;
    }
  }
  const auto d = derive(kFixed, samples.front());
  const double mc = oracle::monte_carlo_volume(build_weir_mesh(d, kFixed), 1'000'000, kSeed);
  const double mc_err = rel(mc, analytic_volume(d, kFixed));
  return {good == 50 && mc_err < 0.005,
          std::to_string(good) + "/50 watertight with bbox err " + fmt(worst_bbox) + " (tol 1e-12), volume rel err " +
              fmt(worst_volume) + " (tol 1e-9), Monte Carlo 1e6 rel err " + fmt(mc_err) + " (tol 0.005)"};
}

Outcome crest_consistency() {
  const auto samples = oracle::feasible_designs(20, kSeed + 5);
  std::size_t consistent = 0;
  double worst = 0.0;
  for (const auto& s : samples) {
    const auto d = derive(kFixed, s);
    const auto trace = oracle::trace_crest_length(build_weir_mesh(d, kFixed, 1), kFixed, d.length, d.wall_thickness);
    if (trace.consistent) ++consistent;
    worst = std::max(worst, rel(trace.length, d.crest_length));
  }
  // The general formula sums the crest pieces in a different order than
  // W_u + 2B, so "exact" is read as agreement to a few ulps.
  double closed_form = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    auto s = samples[i];
    s.inlet_width_down = s.inlet_width_up;
    const auto d = derive(kFixed, s);
    closed_form = std::max(closed_form, rel(d.unit_crest_length, d.unit_width + 2.0 * d.length));
  }
  return {consistent == 20 && worst <= 1e-9 && closed_form <= 1e-15,
          std::to_string(consistent) + "/20 traced, max rel err " + fmt(worst) +
              " (tol 1e-9), rectangular L_u vs W_u + 2B rel err " + fmt(closed_form) + " (tol 1e-15)"};
}

Outcome cloud_suite() {
  const auto samples = oracle::feasible_designs(10, kSeed + 6);
  const std::size_t n = 100'000;
  std::size_t chi_pass = 0;
  double worst_ratio = 0.0;
  double worst_inverse = 0.0;
  bool exact_round_trip = true;
  for (std::size_t g = 0; g < samples.size(); ++g) {
    const auto mesh = build_weir_mesh(derive(kFixed, samples[g]), kFixed);
    std::vector<std::uint32_t> origin;
    const auto cloud = sample_surface(mesh, n, derive_seed(kSeed, g), &origin);
    std::vector<std::size_t> counts(mesh.triangles.size(), 0);
    for (auto t : origin) ++counts[t];
    std::vector<double> prob(mesh.triangles.size());
    double total = 0.0;
    for (std::size_t t = 0; t < prob.size(); ++t) total += prob[t] = triangle_area(mesh, t);
    for (auto& p : prob) p /= total;
    const auto chi = oracle::chi_square(counts, prob, n);
    if (chi.statistic < chi.critical) ++chi_pass;

    const auto unit = normalize_unit_cube(cloud);
    for (std::size_t k = 0; k + 3 < 2000; k += 4) {
      const auto& a = cloud.points;
      const auto& b = unit.points;
      const double before = norm(a[k] - a[k + 1]) / norm(a[k + 2] - a[k + 3]);
      const double after = norm(b[k] - b[k + 1]) / norm(b[k + 2] - b[k + 3]);
      worst_ratio = std::max(worst_ratio, rel(before, after));
    }
    const auto world = denormalize(unit);
    for (std::size_t k = 0; k < n; ++k) worst_inverse = std::max(worst_inverse, norm(world.points[k] - cloud.points[k]));

    // Files hold single precision points, so the exact check is read, write, read.
    std::stringstream first, second;
    write_cloud(first, unit);
    const auto once = read_cloud(first);
    write_cloud(second, once);
    exact_round_trip = exact_round_trip && first.str() == second.str() && read_cloud(second).points == once.points;
  }
  return {chi_pass == 10 && worst_ratio <= 1e-12 && worst_inverse <= 1e-12 && exact_round_trip,
          "chi-square pass " + std::to_string(chi_pass) + "/10 at p=1e-4, distance ratio rel err " + fmt(worst_ratio) +
              " (tol 1e-12), denormalize(normalize) err " + fmt(worst_inverse) + " m (tol 1e-12), file round trip exact " +
              (exact_round_trip ? "yes" : "no")};
}

std::set<std::string> geometry_ids(const std::vector<PairKey>& keys) {
  std::set<std::string> ids;
  for (const auto& k : keys) ids.insert(k.geometry_id);
  return ids;
}

Outcome split_protocol(const DatasetManifest& m) {
  bool ok = true;
  std::string notes;
  const std::size_t n = m.geometries().size();

  const auto id = split_id(m, kSeed);
  const auto c = check_split(m, id);
  const auto tr = geometry_ids(id.train), va = geometry_ids(id.val), te = geometry_ids(id.test);
  const bool id_ok = c.pairs_disjoint && c.geometry_disjoint && c.covers_labels && va.size() == n / 10 &&
                     te.size() == n / 10 && tr.size() == n - 2 * (n / 10);
  ok = ok && id_ok;
  notes += "ID " + std::to_string(tr.size()) + "/" + std::to_string(va.size()) + "/" + std::to_string(te.size()) +
           " geometries, leakage " + (c.geometry_disjoint && c.pairs_disjoint ? "none" : "FOUND");

  // Every design lands in exactly one alpha bin test set.
  std::map<std::string, int> seen;
  for (auto bin : {AlphaBin::UpTo2, AlphaBin::From3To5, AlphaBin::From6}) {
    const auto s = split_ood_geom(m, bin, kSeed);
    const auto chk = check_split(m, s);
    ok = ok && chk.geometry_disjoint && chk.covers_labels;
    for (const auto& g : geometry_ids(s.test)) {
      ++seen[g];
      ok = ok && alpha_bin(m.find(g)->record.derived.sidewall_angle_deg()) == bin;
    }
  }
  const bool alpha_partition =
      seen.size() == n && std::all_of(seen.begin(), seen.end(), [](const auto& kv) { return kv.second == 1; });
  ok = ok && alpha_partition;
  notes += ", alpha bins partition " + std::string(alpha_partition ? "yes" : "no");

  std::vector<std::vector<double>> expected(3);
  for (double q : paper_schedule_lps()) expected[q <= 90 ? 0 : (q >= 170 ? 2 : 1)].push_back(q);
  const HeadBin bins[3] = {HeadBin::UpTo90, HeadBin::From100To160, HeadBin::From170};
  bool heads = true;
  for (int b = 0; b < 3; ++b) {
    const auto s = split_ood_head(m, bins[b], kSeed);
    const auto chk = check_split(m, s);
    std::set<double> q;
    for (const auto& k : s.test) q.insert(k.q_lps());
    heads = heads && chk.pairs_disjoint && chk.covers_labels &&
            std::vector<double>(q.begin(), q.end()) == expected[b] && s.test.size() == n * expected[b].size();
  }
  ok = ok && heads;
  notes += ", head bins match schedule " + std::string(heads ? "yes" : "no");

  bool nested = true;
  std::set<PairKey> previous;
  for (double f : {0.1, 0.2, 0.4, 0.6, 0.8, 1.0}) {
    const auto s = subset_fraction(id, f, kSeed);
    const std::set<PairKey> cur(s.train.begin(), s.train.end());
    nested = nested && std::includes(cur.begin(), cur.end(), previous.begin(), previous.end()) && s.test == id.test;
    previous = cur;
  }
  nested = nested && previous == std::set<PairKey>(id.train.begin(), id.train.end());
  ok = ok && nested;
  notes += ", fractions nested " + std::string(nested ? "yes" : "no");
  return {ok, notes};
}

double forest_r2(const DatasetManifest& m, const SplitAssignment& split) {
  const auto train = tabular(m, split.train);
  const auto test = tabular(m, split.test);
  ForestParams p;
  p.jobs = jobs();
  const auto forest = fit_forest(train.x, train.y, p, kSeed);
  const auto yhat = forest.predict(test.x);
  return metrics(test.y, yhat).r2.value_or(-1e300);
}

Outcome surrogate_protocol(const DatasetManifest& m, double& id_r2) {
  id_r2 = forest_r2(m, split_id(m, kSeed));
  const double geom = forest_r2(m, split_ood_geom(m, AlphaBin::UpTo2, kSeed));
  double worst_head_drop = -1e300;
  std::string heads;
  for (auto bin : {HeadBin::UpTo90, HeadBin::From100To160, HeadBin::From170}) {
    const double r2 = forest_r2(m, split_ood_head(m, bin, kSeed));
    worst_head_drop = std::max(worst_head_drop, id_r2 - r2);
    heads += " " + std::string(to_string(bin)) + "=" + fmt(r2);
  }
  const double geom_drop = id_r2 - geom;
  const bool ok = id_r2 >= 0.95 && geom_drop >= 0.05 && worst_head_drop < geom_drop;
  return {ok, "ID R2 " + fmt(id_r2) + " (min 0.95), OOD-geom le2 R2 " + fmt(geom) + " drop " + fmt(geom_drop) +
                  " (min 0.05), OOD-head R2" + heads + " worst drop " + fmt(worst_head_drop) +
                  " (must be below geom drop)"};
}

Outcome data_efficiency(const DatasetManifest& m) {
  const auto id = split_id(m, kSeed);
  const std::vector<double> fractions = {0.1, 0.2, 0.4, 0.6, 0.8, 1.0};
  std::vector<double> r2;
  std::string curve;
  for (double f : fractions) {
    r2.push_back(forest_r2(m, subset_fraction(id, f, kSeed)));
    curve += " " + fmt(f) + ":" + fmt(r2.back());
  }
  bool monotone = true;
  for (std::size_t i = 1; i < r2.size(); ++i) monotone = monotone && r2[i] >= r2[i - 1] - 0.02;
  const double late = r2[5] - r2[4], early = r2[2] - r2[0];
  return {monotone && late < early, "R2 by fraction" + curve + ", non-decreasing within 0.02 " +
                                        (monotone ? "yes" : "no") + ", gain 0.8->1.0 " + fmt(late) +
                                        " vs 0.1->0.4 " + fmt(early)};
}

std::vector<Vec3> random_cloud(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Vec3> pts(n);
  for (auto& p : pts) p = {rng.uniform(0, 1), rng.uniform(0, 1), rng.uniform(0, 1)};
  return pts;
}

Outcome network_checks(const DatasetManifest& m) {
  const PointNetMini net(kSeed);
  auto cloud = random_cloud(5000, 3);
  const double before = net.predict(cloud, 0.12);
  Rng rng(kSeed);
  rng.shuffle(std::span<Vec3>(cloud));
  const bool invariant = net.predict(cloud, 0.12) == before;

  PointNetMini probe(kSeed + 1);
  const auto a = random_cloud(16, 1), b = random_cloud(16, 2);
  const std::vector<CloudExample> batch = {{&a, 0.08, 0.45}, {&b, 0.2, 0.3}};
  std::vector<double> grad, scratch;
  probe.loss_and_gradient(batch, grad);
  std::size_t agree = 0;
  for (std::size_t i = 0; i < probe.params.size(); ++i) {
    const double theta = probe.params[i];
    const double h = 1e-5 * std::max(1.0, std::abs(theta));
    probe.params[i] = theta + h;
    const double up = probe.loss_and_gradient(batch, scratch);
    probe.params[i] = theta - h;
    const double down = probe.loss_and_gradient(batch, scratch);
    probe.params[i] = theta;
    const double numeric = (up - down) / (2.0 * h);
    const double scale = std::max({std::abs(numeric), std::abs(grad[i]), 1e-8});
    if (std::abs(numeric - grad[i]) <= 1e-4 * scale) ++agree;
  }
  const double agreement = static_cast<double>(agree) / static_cast<double>(probe.params.size());

  const auto id = split_id(m, kSeed);
  const auto train = tabular(m, id.train);
  const auto tree = fit_tree(train.x, train.y, TreeParams{});
  double sink = 0.0;
  const auto timing = time_calls(10'000, [&](std::size_t i) { sink += tree.predict(train.x.row(i % train.x.rows)); });
  const bool ok = invariant && agreement >= 0.99 && timing.median_ms < 1.0 && std::isfinite(sink);
  return {ok, std::string("permutation invariant ") + (invariant ? "yes" : "no") + ", gradient agreement " +
                  fmt(agreement) + " of " + std::to_string(probe.params.size()) +
                  " params (min 0.99 at 1e-4 rel), tree median latency " + fmt(timing.median_ms * 1e3) +
                  " us over 10000 calls (max 1000 us)"};
}

}  // namespace

int main() {
  int failures = 0;
  auto report = [&](int index, const std::string& name, const std::function<Outcome()>& fn, double budget_s) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool in_time = seconds < budget_s;
    const bool pass = o.pass && in_time;
    if (!pass) ++failures;
    std::printf("criterion %2d %s: %s; %s; %.2f s (budget %.0f s)\n", index, pass ? "PASS" : "FAIL", name.c_str(),
                o.detail.c_str(), seconds, budget_s);
    std::fflush(stdout);
  };

  report(1, "formula identities", formulas, 5.0);
  report(2, "head-discharge round trip", du_buat, 60.0);
  report(3, "constraint gate", constraint_gate, 60.0);
  report(4, "mesh suite", mesh_suite, 120.0);
  report(5, "crest length consistency", crest_consistency, 60.0);
  report(6, "point cloud suite", cloud_suite, 120.0);

  DatasetManifest m;
  report(
      7, "split protocol",
      [&] {
        m = fixture::synthetic_manifest(500, kSeed, paper_schedule_lps(), 0.005);
        return split_protocol(m);
      },
      60.0);
  double id_r2 = 0.0;
  report(8, "surrogate protocol", [&] { return surrogate_protocol(m, id_r2); }, 600.0);
  report(9, "data efficiency", [&] { return data_efficiency(m); }, 600.0);
  report(10, "network checks", [&] { return network_checks(m); }, 120.0);

  std::printf("%d of 10 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}

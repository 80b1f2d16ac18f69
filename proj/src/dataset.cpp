#include "pkw/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>
#include <set>

#include <json.hpp>

#include "pkw/error.hpp"
#include "pkw/rng.hpp"
#include "pkw/text.hpp"

namespace pkw {

using nlohmann::json;

PairKey PairKey::of(const std::string& id, double discharge_m3s) {
  return PairKey{id, std::llround(discharge_m3s * 1e6)};
}

void DatasetManifest::add_geometry(GeometryEntry entry) {
  const std::string id = entry.record.id;
  if (by_id_.count(id)) {
    throw Error(ErrorCode::InvalidArgument, "duplicate geometry id '" + id + "'");
  }
  by_id_.emplace(id, geometries_.size());
  geometries_.push_back(std::move(entry));
}

void DatasetManifest::add_label(LabeledSample label) {
  const PairKey key = PairKey::of(label.geometry_id, label.discharge);
  if (const auto it = by_pair_.find(key); it != by_pair_.end()) {
    labels_[it->second] = std::move(label);
    return;
  }
  by_pair_.emplace(key, labels_.size());
  labels_.push_back(std::move(label));
}

const GeometryEntry* DatasetManifest::find(const std::string& id) const {
  const auto it = by_id_.find(id);
  return it == by_id_.end() ? nullptr : &geometries_[it->second];
}

const LabeledSample* DatasetManifest::find_label(const PairKey& key) const {
  const auto it = by_pair_.find(key);
  return it == by_pair_.end() ? nullptr : &labels_[it->second];
}

void DatasetManifest::check() const {
  for (const auto& l : labels_) {
    if (!find(l.geometry_id)) {
      throw Error(ErrorCode::MissingGeometry, "label refers to unknown geometry '" + l.geometry_id + "'");
    }
  }
}

std::string DatasetManifest::label_source_summary() const {
  std::set<std::string> names;
  for (const auto& l : labels_) names.emplace(to_string(l.source));
  std::string out;
  for (const auto& n : names) out += (out.empty() ? "" : ",") + n;
  return out;
}

// ---------------------------------------------------------------------------
// Serialization

void write_manifest(std::ostream& out, const DatasetManifest& m) {
  json prov = {{"record", "provenance"},
               {"master_seed", m.provenance.master_seed},
               {"tool_version", m.provenance.tool_version},
               {"label_sources", m.provenance.label_sources}};
  out << prov.dump() << '\n';
  for (const auto& g : m.geometries()) {
    const auto& r = g.record;
    const auto& d = r.derived;
    json j = {{"record", "geometry"},
              {"geometry_id", r.id},
              {"W", r.fixed.width},
              {"P", r.fixed.height},
              {"N_u", r.fixed.units},
              {"B_b", r.sample.base_length},
              {"R_B_i", r.sample.inlet_overhang_ratio},
              {"R_B_o", r.sample.outlet_overhang_ratio},
              {"T_s", r.sample.wall_thickness},
              {"W_i_u", r.sample.inlet_width_up},
              {"W_i_d", r.sample.inlet_width_down},
              {"derived",
               {{"W_u", d.unit_width},
                {"B_i", d.inlet_overhang},
                {"B_o", d.outlet_overhang},
                {"B", d.length},
                {"alpha_deg", d.sidewall_angle_deg()},
                {"T_s2", d.wall_thickness_transverse},
                {"T_s3", d.wall_thickness_corner},
                {"delta_T_s", d.wall_offset},
                {"W_o_u", d.outlet_width_up},
                {"W_o_d", d.outlet_width_down},
                {"L_u", d.unit_crest_length},
                {"L", d.crest_length}}},
              {"mesh", g.mesh_path},
              {"cloud", g.cloud_path}};
    out << j.dump() << '\n';
  }
}

DatasetManifest read_manifest(std::istream& in) {
  DatasetManifest m;
  std::string line;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (text::trim(line).empty()) continue;
    try {
      const json j = json::parse(line);
      const std::string kind = j.at("record").get<std::string>();
      if (kind == "provenance") {
        m.provenance.master_seed = j.at("master_seed").get<std::uint64_t>();
        m.provenance.tool_version = j.at("tool_version").get<std::string>();
        m.provenance.label_sources = j.at("label_sources").get<std::string>();
      } else if (kind == "geometry") {
        PkwFixed fixed{j.at("W").get<double>(), j.at("P").get<double>(), j.at("N_u").get<int>()};
        PkwSample s{j.at("B_b").get<double>(),  j.at("R_B_i").get<double>(),
                    j.at("R_B_o").get<double>(), j.at("T_s").get<double>(),
                    j.at("W_i_u").get<double>(), j.at("W_i_d").get<double>()};
        m.add_geometry(GeometryEntry{make_record(j.at("geometry_id").get<std::string>(), fixed, s),
                                     j.value("mesh", ""), j.value("cloud", "")});
      } else {
        throw Error(ErrorCode::ParseError, "unknown record type '" + kind + "'");
      }
    } catch (const json::exception& e) {
      throw Error(ErrorCode::ParseError, "manifest line " + std::to_string(row) + ": " + e.what());
    }
  }
  return m;
}

void write_labels(std::ostream& out, const std::vector<LabeledSample>& labels) {
  out << "geometry_id,Q_lps,H_t_m,c_D,source\n";
  for (const auto& l : labels) {
    out << l.geometry_id << ',' << text::format_sig(m3s_to_lps(l.discharge), 9) << ','
        << (l.total_head ? text::format_sig(*l.total_head, 9) : std::string()) << ','
        << text::format_sig(l.cd, 6) << ',' << to_string(l.source) << '\n';
  }
}

std::vector<LabeledSample> read_labels(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::ParseError, "empty labels file");
  const char delim = text::detect_delimiter(line);
  const auto header = text::split(line, delim);
  const std::vector<std::string> expected = {"geometry_id", "Q_lps", "H_t_m", "c_D", "source"};
  if (header != expected) throw Error(ErrorCode::ParseError, "unexpected labels header");
  std::vector<LabeledSample> out;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (text::trim(line).empty()) continue;
    const auto f = text::split(line, delim);
    const std::string where = "labels row " + std::to_string(row);
    if (f.size() != 5) throw Error(ErrorCode::ParseError, where + ": expected 5 fields");
    LabeledSample l;
    l.geometry_id = f[0];
    const auto q = text::parse_double(f[1]);
    const auto cd = text::parse_double(f[3]);
    const auto src = parse_label_source(f[4]);
    if (!q || *q <= 0.0 || !cd || !src) throw Error(ErrorCode::ParseError, where);
    l.discharge = lps_to_m3s(*q);
    if (!f[2].empty()) {
      const auto h = text::parse_double(f[2]);
      if (!h) throw Error(ErrorCode::ParseError, where + ": bad H_t_m");
      l.total_head = *h;
    }
    l.cd = *cd;
    l.source = *src;
    out.push_back(std::move(l));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Splits

std::string_view to_string(Partition p) {
  switch (p) {
    case Partition::Train: return "train";
    case Partition::Val: return "val";
    case Partition::Test: return "test";
  }
  return "train";
}

AlphaBin alpha_bin(double alpha_deg) {
  if (alpha_deg < 3.0) return AlphaBin::UpTo2;
  if (alpha_deg < 6.0) return AlphaBin::From3To5;
  return AlphaBin::From6;
}

HeadBin head_bin(double q_lps) {
  if (q_lps < 95.0) return HeadBin::UpTo90;
  if (q_lps < 165.0) return HeadBin::From100To160;
  return HeadBin::From170;
}

std::string_view to_string(AlphaBin b) {
  switch (b) {
    case AlphaBin::UpTo2: return "le2";
    case AlphaBin::From3To5: return "3to5";
    case AlphaBin::From6: return "ge6";
  }
  return "le2";
}

std::string_view to_string(HeadBin b) {
  switch (b) {
    case HeadBin::UpTo90: return "le90";
    case HeadBin::From100To160: return "100to160";
    case HeadBin::From170: return "ge170";
  }
  return "le90";
}

std::optional<AlphaBin> parse_alpha_bin(std::string_view s) {
  for (auto b : {AlphaBin::UpTo2, AlphaBin::From3To5, AlphaBin::From6}) {
    if (s == to_string(b)) return b;
  }
  return std::nullopt;
}

std::optional<HeadBin> parse_head_bin(std::string_view s) {
  for (auto b : {HeadBin::UpTo90, HeadBin::From100To160, HeadBin::From170}) {
    if (s == to_string(b)) return b;
  }
  return std::nullopt;
}

namespace {

std::vector<std::string> geometry_ids(const DatasetManifest& m) {
  std::vector<std::string> ids;
  ids.reserve(m.geometries().size());
  for (const auto& g : m.geometries()) ids.push_back(g.record.id);
  return ids;
}

void fill_by_geometry(const DatasetManifest& m, const std::map<std::string, Partition>& part,
                      SplitAssignment& split) {
  for (const auto& l : m.labels()) {
    const auto it = part.find(l.geometry_id);
    if (it == part.end()) continue;
    const PairKey key = PairKey::of(l.geometry_id, l.discharge);
    switch (it->second) {
      case Partition::Train: split.train.push_back(key); break;
      case Partition::Val: split.val.push_back(key); break;
      case Partition::Test: split.test.push_back(key); break;
    }
  }
}

}  // namespace

SplitAssignment split_id(const DatasetManifest& m, std::uint64_t seed) {
  auto ids = geometry_ids(m);
  const std::size_t n = ids.size();
  if (n < 10) {
    throw Error(ErrorCode::TooFewGeometries, std::to_string(n) + " geometries, need at least 10");
  }
  Rng rng(seed);
  rng.shuffle(std::span<std::string>(ids));
  const std::size_t n_eval = n / 10;
  const std::size_t n_train = n - 2 * n_eval;
  std::map<std::string, Partition> part;
  for (std::size_t i = 0; i < n; ++i) {
    part[ids[i]] = i < n_train ? Partition::Train
                   : i < n_train + n_eval ? Partition::Val
                                          : Partition::Test;
  }
  SplitAssignment split;
  split.name = "id";
  split.policy = SplitPolicy::IdByGeometry;
  fill_by_geometry(m, part, split);
  return split;
}

SplitAssignment split_ood_geom(const DatasetManifest& m, AlphaBin bin, std::uint64_t seed) {
  std::vector<std::string> train_ids;
  std::map<std::string, Partition> part;
  for (const auto& g : m.geometries()) {
    if (alpha_bin(g.record.derived.sidewall_angle_deg()) == bin) {
      part[g.record.id] = Partition::Test;
    } else {
      train_ids.push_back(g.record.id);
    }
  }
  if (part.empty() || train_ids.empty()) {
    throw Error(ErrorCode::EmptyBin, "alpha bin " + std::string(to_string(bin)) +
                                         " leaves an empty test or training set");
  }
  Rng rng(seed);
  rng.shuffle(std::span<std::string>(train_ids));
  const std::size_t n_val = train_ids.size() / 10;
  for (std::size_t i = 0; i < train_ids.size(); ++i) {
    part[train_ids[i]] = i < n_val ? Partition::Val : Partition::Train;
  }
  SplitAssignment split;
  split.name = "ood-geom:" + std::string(to_string(bin));
  split.policy = SplitPolicy::OodGeomAlpha;
  fill_by_geometry(m, part, split);
  return split;
}

SplitAssignment split_ood_head(const DatasetManifest& m, HeadBin bin, std::uint64_t seed) {
  SplitAssignment split;
  split.name = "ood-head:" + std::string(to_string(bin));
  split.policy = SplitPolicy::OodHeadQ;
  std::vector<PairKey> train;
  for (const auto& l : m.labels()) {
    const PairKey key = PairKey::of(l.geometry_id, l.discharge);
    (head_bin(key.q_lps()) == bin ? split.test : train).push_back(key);
  }
  if (split.test.empty() || train.empty()) {
    throw Error(ErrorCode::EmptyBin, "discharge bin " + std::string(to_string(bin)) +
                                         " leaves an empty test or training set");
  }
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  rng.shuffle(std::span<std::size_t>(order));
  std::vector<bool> is_val(train.size(), false);
  for (std::size_t i = 0; i < train.size() / 10; ++i) is_val[order[i]] = true;
  for (std::size_t i = 0; i < train.size(); ++i) {
    (is_val[i] ? split.val : split.train).push_back(train[i]);
  }
  return split;
}

SplitAssignment subset_fraction(const SplitAssignment& split, double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction <= 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "fraction must lie in (0, 1]");
  }
  std::vector<std::string> ids;
  std::set<std::string> seen;
  for (const auto& k : split.train) {
    if (seen.insert(k.geometry_id).second) ids.push_back(k.geometry_id);
  }
  std::sort(ids.begin(), ids.end());
  Rng rng(seed);
  rng.shuffle(std::span<std::string>(ids));
  const auto keep_n = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::llround(fraction * static_cast<double>(ids.size()))));
  const std::set<std::string> keep(ids.begin(), ids.begin() + std::min(keep_n, ids.size()));

  SplitAssignment out = split;
  out.name = "fraction:" + text::format_sig(fraction, 3);
  out.policy = SplitPolicy::FractionSubset;
  out.train.clear();
  for (const auto& k : split.train) {
    if (keep.count(k.geometry_id)) out.train.push_back(k);
  }
  return out;
}

SplitCheck check_split(const DatasetManifest& m, const SplitAssignment& split) {
  SplitCheck c;
  std::map<PairKey, int> pair_count;
  std::map<std::string, std::set<int>> geometry_parts;
  int part = 0;
  for (const auto* list : {&split.train, &split.val, &split.test}) {
    for (const auto& k : *list) {
      ++pair_count[k];
      geometry_parts[k.geometry_id].insert(part);
    }
    ++part;
  }
  for (const auto& [k, n] : pair_count) c.pairs_disjoint = c.pairs_disjoint && n == 1;
  for (const auto& [id, parts] : geometry_parts) {
    c.geometry_disjoint = c.geometry_disjoint && parts.size() == 1;
  }
  for (const auto& l : m.labels()) {
    c.covers_labels = c.covers_labels && pair_count.count(PairKey::of(l.geometry_id, l.discharge));
  }
  c.covers_labels = c.covers_labels && pair_count.size() == m.labels().size();
  return c;
}

void write_split(std::ostream& out, const SplitAssignment& split) {
  out << "geometry_id,Q_lps,partition\n";
  const Partition parts[] = {Partition::Train, Partition::Val, Partition::Test};
  int i = 0;
  for (const auto* list : {&split.train, &split.val, &split.test}) {
    for (const auto& k : *list) {
      out << k.geometry_id << ',' << text::format_sig(k.q_lps(), 9) << ',' << to_string(parts[i])
          << '\n';
    }
    ++i;
  }
}

SplitAssignment read_split(std::istream& in, const std::string& name) {
  std::string line;
  if (!std::getline(in, line) || text::split(line, ',') !=
                                     std::vector<std::string>{"geometry_id", "Q_lps", "partition"}) {
    throw Error(ErrorCode::ParseError, "split file lacks header geometry_id,Q_lps,partition");
  }
  SplitAssignment split;
  split.name = name;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (text::trim(line).empty()) continue;
    const auto f = text::split(line, ',');
    const auto q = f.size() == 3 ? text::parse_double(f[1]) : std::nullopt;
    if (!q) throw Error(ErrorCode::ParseError, "split row " + std::to_string(row));
    const PairKey key{f[0], std::llround(*q * 1000.0)};
    if (f[2] == "train") {
      split.train.push_back(key);
    } else if (f[2] == "val") {
      split.val.push_back(key);
    } else if (f[2] == "test") {
      split.test.push_back(key);
    } else {
      throw Error(ErrorCode::ParseError, "split row " + std::to_string(row) + ": bad partition");
    }
  }
  return split;
}

Tabular tabular(const DatasetManifest& m, const std::vector<PairKey>& keys) {
  Tabular t;
  t.x = Matrix(keys.size(), kFeatureCount);
  t.y.resize(keys.size());
  for (std::size_t i = 0; i < keys.size(); ++i) {
    const auto* label = m.find_label(keys[i]);
    const auto* geom = m.find(keys[i].geometry_id);
    if (!label || !geom) {
      throw Error(ErrorCode::MissingGeometry, "no label for " + keys[i].geometry_id + " at " +
                                                  text::format_sig(keys[i].q_lps(), 9) + " l/s");
    }
    const auto f = feature_vector(geom->record.derived, label->discharge);
    std::copy(f.begin(), f.end(), t.x.row(i).begin());
    t.y[i] = label->cd;
  }
  return t;
}

// ---------------------------------------------------------------------------
// Statistics

std::optional<double> pearson(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.empty()) {
    throw Error(ErrorCode::ShapeMismatch, "pearson needs two equal non-empty columns");
  }
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx, dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (!(sxx > 0.0) || !(syy > 0.0)) return std::nullopt;
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

CorrelationMatrix pearson(const DatasetManifest& m, const std::vector<std::string>& columns) {
  if (m.labels().size() < 3) throw Error(ErrorCode::EmptyData, "need at least 3 labeled samples");
  const auto& names = feature_names();
  std::vector<std::vector<double>> cols(columns.size());
  std::vector<int> which(columns.size());
  for (std::size_t c = 0; c < columns.size(); ++c) {
    if (columns[c] == "c_D") {
      which[c] = -1;
      continue;
    }
    const auto it = std::find(names.begin(), names.end(), columns[c]);
    if (it == names.end()) throw Error(ErrorCode::InvalidArgument, "unknown column " + columns[c]);
    which[c] = static_cast<int>(it - names.begin());
  }
  for (const auto& l : m.labels()) {
    const auto* g = m.find(l.geometry_id);
    if (!g) throw Error(ErrorCode::MissingGeometry, l.geometry_id);
    const auto f = feature_vector(g->record.derived, l.discharge);
    for (std::size_t c = 0; c < columns.size(); ++c) {
      cols[c].push_back(which[c] < 0 ? l.cd : f[static_cast<std::size_t>(which[c])]);
    }
  }
  CorrelationMatrix out;
  out.names = columns;
  const std::size_t k = columns.size();
  out.values.assign(k * k, std::nullopt);
  out.zero_variance.assign(k, false);
  for (std::size_t i = 0; i < k; ++i) {
    out.zero_variance[i] = !pearson(cols[i], cols[i]).has_value();
  }
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = i; j < k; ++j) {
      std::optional<double> r;
      if (!out.zero_variance[i] && !out.zero_variance[j]) r = i == j ? 1.0 : pearson(cols[i], cols[j]);
      out.values[i * k + j] = r;
      out.values[j * k + i] = r;
    }
  }
  return out;
}

}  // namespace pkw

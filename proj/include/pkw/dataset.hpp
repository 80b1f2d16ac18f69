#pragma once

// Geometry + label manifest, benchmark splits and dataset statistics.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "pkw/geometry.hpp"
#include "pkw/hydraulics.hpp"
#include "pkw/matrix.hpp"

namespace pkw {

// (geometry, discharge) pair; discharges are keyed in integer milli-l/s so
// that values read back from text compare exactly.
struct PairKey {
  std::string geometry_id;
  long long q_millilps = 0;

  static PairKey of(const std::string& id, double discharge_m3s);
  double q_lps() const { return static_cast<double>(q_millilps) * 1e-3; }
  auto operator<=>(const PairKey&) const = default;
};

struct GeometryEntry {
  GeometryRecord record;
  std::string mesh_path;
  std::string cloud_path;
};

struct Provenance {
  std::uint64_t master_seed = 0;
  std::string tool_version;
  std::string label_sources;  // e.g. "synthetic" or "cfd-csv"
};

class DatasetManifest {
 public:
  Provenance provenance;

  void add_geometry(GeometryEntry entry);
  // Replaces an existing label with the same (id, Q).
  void add_label(LabeledSample label);

  const std::vector<GeometryEntry>& geometries() const { return geometries_; }
  const std::vector<LabeledSample>& labels() const { return labels_; }
  const GeometryEntry* find(const std::string& id) const;
  const LabeledSample* find_label(const PairKey& key) const;

  // Throws MissingGeometry if a label points to an unknown geometry.
  void check() const;

  // Summary of label sources, sorted and comma-joined.
  std::string label_source_summary() const;

 private:
  std::vector<GeometryEntry> geometries_;
  std::map<std::string, std::size_t> by_id_;
  std::vector<LabeledSample> labels_;
  std::map<PairKey, std::size_t> by_pair_;
};

// manifest.jsonl: one provenance record, then one record per geometry.
void write_manifest(std::ostream& out, const DatasetManifest& manifest);
DatasetManifest read_manifest(std::istream& in);

// labels.csv: geometry_id,Q_lps,H_t_m,c_D,source (c_D to 6 significant digits).
void write_labels(std::ostream& out, const std::vector<LabeledSample>& labels);
std::vector<LabeledSample> read_labels(std::istream& in);

// Splits --------------------------------------------------------------------

enum class SplitPolicy {
  IdByGeometry,
  OodGeomAlpha,
  OodHeadQ,
  FractionSubset,
};

enum class Partition { Train, Val, Test };

std::string_view to_string(Partition p);

struct SplitAssignment {
  std::string name;
  SplitPolicy policy = SplitPolicy::IdByGeometry;
  std::vector<PairKey> train;
  std::vector<PairKey> val;
  std::vector<PairKey> test;
};

// Bins named after the benchmark labels; edges are [0,3), [3,6), [6,inf) deg.
enum class AlphaBin { UpTo2, From3To5, From6 };
// Edges at 95 and 165 l/s between schedule values.
enum class HeadBin { UpTo90, From100To160, From170 };

AlphaBin alpha_bin(double alpha_deg);
HeadBin head_bin(double q_lps);
std::string_view to_string(AlphaBin b);
std::string_view to_string(HeadBin b);
std::optional<AlphaBin> parse_alpha_bin(std::string_view s);
std::optional<HeadBin> parse_head_bin(std::string_view s);

// 80/10/10 by geometry; val and test get floor(n/10) geometries each.
SplitAssignment split_id(const DatasetManifest& manifest, std::uint64_t seed);
SplitAssignment split_ood_geom(const DatasetManifest& manifest, AlphaBin bin, std::uint64_t seed);
SplitAssignment split_ood_head(const DatasetManifest& manifest, HeadBin bin, std::uint64_t seed);
// Keeps round(fraction * n_train_geometries) (at least one) training
// geometries; subsets for increasing fractions are nested under one seed.
SplitAssignment subset_fraction(const SplitAssignment& split, double fraction, std::uint64_t seed);

struct SplitCheck {
  bool pairs_disjoint = true;     // no (id, Q) in two partitions
  bool geometry_disjoint = true;  // no id in two partitions
  bool covers_labels = true;      // every label in exactly one partition
};

SplitCheck check_split(const DatasetManifest& manifest, const SplitAssignment& split);

// splits/{name}.csv: geometry_id,Q_lps,partition
void write_split(std::ostream& out, const SplitAssignment& split);
SplitAssignment read_split(std::istream& in, const std::string& name);

// Tabular view ------------------------------------------------------------------

// Feature rows (feature_vector order) and c_D targets for the given pairs.
struct Tabular {
  Matrix x;
  std::vector<double> y;
};

Tabular tabular(const DatasetManifest& manifest, const std::vector<PairKey>& keys);

// Statistics ------------------------------------------------------------------

// Product-moment correlation; nullopt when either input has zero variance.
std::optional<double> pearson(const std::vector<double>& x, const std::vector<double>& y);

struct CorrelationMatrix {
  std::vector<std::string> names;
  std::vector<std::optional<double>> values;  // names.size()^2, row-major
  std::vector<bool> zero_variance;

  std::optional<double> at(std::size_t i, std::size_t j) const {
    return values[i * names.size() + j];
  }
};

// Correlations over all labeled rows of the requested columns; names are
// feature names or "c_D". Throws EmptyData with fewer than 3 labels.
CorrelationMatrix pearson(const DatasetManifest& manifest, const std::vector<std::string>& columns);

}  // namespace pkw

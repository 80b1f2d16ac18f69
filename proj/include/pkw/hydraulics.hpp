#pragma once

// Head-discharge relation of a sharp-crested weir line, total head, the
// discharge schedule, and the c_D label providers.

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "pkw/geometry.hpp"

namespace pkw {

inline constexpr double kGravity = 9.81;  // m/s^2

struct FlowCondition {
  double discharge = 0.0;   // Q [m^3/s]
  double depth = 0.0;       // h_t, flow depth above the crest [m]
  double total_head = 0.0;  // H_t [m]
  double velocity = 0.0;    // v, approach velocity [m/s]
};

// v = Q / (W (P + h_t)), H_t = v^2 / 2g + h_t.
FlowCondition total_head(double discharge, double depth, const PkwFixed& fixed);

// c_D = 3 Q / (2 L sqrt(2g) H_t^1.5)
double cd_from_head(double discharge, double crest_length, double total_head);
// Q = 2/3 c_D L sqrt(2g) H_t^1.5
double discharge_from_cd(double cd, double crest_length, double total_head);
// H_t = (3 Q / (2 c_D L sqrt(2g)))^(2/3)
double head_from_cd(double cd, double crest_length, double discharge);

// The 19 simulated discharges, l/s, increasing.
const std::vector<double>& paper_schedule_lps();

inline double lps_to_m3s(double q_lps) { return q_lps * 1e-3; }
inline double m3s_to_lps(double q) { return q * 1e3; }

enum class LabelSource {
  CfdCsv,
  Synthetic,
  Manual,
};

std::string_view to_string(LabelSource source);
// Accepts "cfd-csv", "synthetic", "manual".
std::optional<LabelSource> parse_label_source(std::string_view name);

struct LabeledSample {
  std::string geometry_id;
  double discharge = 0.0;                 // m^3/s
  std::optional<double> total_head;       // m
  double cd = 0.0;
  LabelSource source = LabelSource::Manual;
};

// Normalization ranges of the synthetic oracle, derived from the Table-5 box
// for a given envelope.
struct OracleRanges {
  double length_lo = 0.0;
  double length_hi = 0.0;
  double corner_lo = 0.0;
  double corner_hi = 0.0;
  double outlet_down_lo = 0.0;
  double outlet_down_hi = 0.0;
};

OracleRanges oracle_ranges(const PkwFixed& fixed);

struct OracleConfig {
  PkwFixed fixed;
  double noise_sigma = 0.0;
};

// Fictitious smooth c_D surface for exercising the pipeline; it is not a
// hydraulic model. Throws OutOfRange for Q outside [0.05, 0.25] m^3/s.
double synthetic_cd(const PkwDerived& derived, double discharge, const OracleConfig& config,
                    std::uint64_t seed);

struct IngestResult {
  std::vector<LabeledSample> labels;
  std::size_t duplicates = 0;  // rows replaced by a later row with the same (id, Q)
};

// Reads a delimited label table with columns geometry_id, Q_lps and either
// c_D or a head column (h_t_m or H_t_m). `crest_lengths` maps geometry id to
// L [m]; ids missing from it raise MissingGeometry.
IngestResult ingest_labels(std::istream& in, const std::map<std::string, double>& crest_lengths,
                           const PkwFixed& fixed);

}  // namespace pkw

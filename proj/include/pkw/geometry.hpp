#pragma once

// Type-A piano key weir nomenclature: the fixed envelope, the five sampled
// parameters, and every quantity derived from them.
//
// Frame used throughout the project: x points downstream (0 at the upstream
// crest, B at the downstream crest), y is transverse across the flume, z is
// up from the bed. All lengths are meters, angles radians unless a name says
// otherwise.

#include <array>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace pkw {

struct PkwFixed {
  double width = 1.0;    // W, total weir width
  double height = 0.33;  // P
  int units = 3;         // N_u

  double unit_width() const { return width / units; }
};

struct PkwSample {
  double base_length = 0.0;            // B_b
  double inlet_overhang_ratio = 0.0;   // R_B,i
  double outlet_overhang_ratio = 0.0;  // R_B,o
  double wall_thickness = 0.0;         // T_s, perpendicular to the sidewall
  double inlet_width_up = 0.0;         // W_i,u at x = 0
  double inlet_width_down = 0.0;       // W_i,d at x = B - T_s

  bool operator==(const PkwSample&) const = default;
};

// Builds a sample with symmetric overhangs (R_B,o = R_B,i).
PkwSample symmetric_sample(double base_length, double overhang_ratio, double wall_thickness,
                           double inlet_width_up, double inlet_width_down);

struct PkwDerived {
  double unit_width = 0.0;                 // W_u
  double inlet_overhang = 0.0;             // B_i
  double outlet_overhang = 0.0;            // B_o
  double length = 0.0;                     // B
  double sidewall_angle = 0.0;             // alpha [rad]
  double wall_thickness = 0.0;             // T_s (copied for convenience)
  double wall_thickness_transverse = 0.0;  // T_s,2
  double wall_thickness_corner = 0.0;      // T_s,3
  double wall_offset = 0.0;                // delta T_s
  double inlet_width_up = 0.0;             // W_i,u (copied)
  double inlet_width_down = 0.0;           // W_i,d (copied)
  double outlet_width_up = 0.0;            // W_o,u at x = T_s
  double outlet_width_down = 0.0;          // W_o,d at x = B
  double base_length = 0.0;                // B_b (copied)
  double unit_crest_length = 0.0;          // L_u
  double crest_length = 0.0;               // L

  double sidewall_angle_deg() const;

  bool operator==(const PkwDerived&) const = default;
};

// Evaluates the derived-parameter model. Throws Error with
// DegenerateGeometry when B <= T_s and NonPositiveOutletWidth when either
// outlet width is not positive; InvalidArgument for broken sample invariants.
PkwDerived derive(const PkwFixed& fixed, const PkwSample& sample);

// Half-width of the inlet key (centered on the unit axis) at station x.
double inlet_half_width(const PkwDerived& d, double x);
// Half-width of the outlet key (centered on the unit boundary) at station x.
double outlet_half_width(const PkwDerived& d, double x);

struct CrestLength {
  double unit = 0.0;   // L_u
  double total = 0.0;  // L
};

// Developed mid-thickness crest length: both sidewall centerlines over the
// full streamwise length plus the two transverse crest walls measured
// between sidewall centerlines at their mid-thickness stations.
CrestLength crest_length(const PkwDerived& derived, const PkwFixed& fixed);

struct Violation {
  std::string constraint;
  double actual = 0.0;
  double bound = 0.0;
};

struct ValidationReport {
  bool feasible = true;
  std::vector<Violation> violations;
};

// Slack applied to every inclusive bound so that grid points computed as
// lo + k*step are not rejected by rounding.
inline constexpr double kBoundSlack = 1e-12;

ValidationReport validate(const PkwFixed& fixed, const PkwSample& sample);

inline constexpr std::size_t kFeatureCount = 9;
using FeatureVector = std::array<double, kFeatureCount>;

// Feature names in feature_vector order.
const std::array<std::string_view, kFeatureCount>& feature_names();

// (Q, B_i, B_o, B, alpha[deg], T_s2, T_s3, W_o_u, W_o_d); Q in m^3/s.
FeatureVector feature_vector(const PkwDerived& derived, double discharge);

// Parametric record table ------------------------------------------------

struct GeometryRecord {
  std::string id;
  PkwFixed fixed;
  PkwSample sample;
  PkwDerived derived;
};

GeometryRecord make_record(std::string id, const PkwFixed& fixed, const PkwSample& sample);

// Delimiter-separated table, one row per geometry; lengths in meters with 9
// significant digits, alpha in degrees.
void write_parametric_records(std::ostream& out, const std::vector<GeometryRecord>& records);
// Reads the table back; derived columns are recomputed from the sampled ones.
std::vector<GeometryRecord> read_parametric_records(std::istream& in);

}  // namespace pkw

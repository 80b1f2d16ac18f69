#include "pkw/geometry.hpp"

#include <cmath>
#include <istream>
#include <numbers>
#include <ostream>
#include <string>

#include "pkw/error.hpp"
#include "pkw/text.hpp"

namespace pkw {

PkwSample symmetric_sample(double base_length, double overhang_ratio, double wall_thickness,
                           double inlet_width_up, double inlet_width_down) {
  return PkwSample{base_length, overhang_ratio, overhang_ratio, wall_thickness, inlet_width_up,
                   inlet_width_down};
}

double PkwDerived::sidewall_angle_deg() const { return sidewall_angle * 180.0 / std::numbers::pi; }

PkwDerived derive(const PkwFixed& fixed, const PkwSample& s) {
  if (!(fixed.width > 0.0) || !(fixed.height > 0.0) || fixed.units < 1) {
    throw Error(ErrorCode::InvalidArgument, "fixed envelope must have W > 0, P > 0, N_u >= 1");
  }
  if (!(s.base_length > 0.0) || !(s.wall_thickness > 0.0) || !(s.inlet_width_up > 0.0) ||
      !(s.inlet_width_down > 0.0) || !(s.inlet_overhang_ratio > 0.0) ||
      !(s.outlet_overhang_ratio > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "sample lengths and overhang ratios must be positive");
  }
  if (s.inlet_width_up < s.inlet_width_down) {
    throw Error(ErrorCode::InvalidArgument, "inlet widths require W_i_u >= W_i_d");
  }

  PkwDerived d;
  d.unit_width = fixed.width / fixed.units;
  d.base_length = s.base_length;
  d.inlet_overhang = s.inlet_overhang_ratio * s.base_length;
  d.outlet_overhang = s.outlet_overhang_ratio * s.base_length;
  d.length = s.base_length + d.inlet_overhang + d.outlet_overhang;
  d.wall_thickness = s.wall_thickness;
  d.inlet_width_up = s.inlet_width_up;
  d.inlet_width_down = s.inlet_width_down;
  if (d.length <= s.wall_thickness) {
    throw Error(ErrorCode::DegenerateGeometry, "weir length B must exceed T_s");
  }

  d.sidewall_angle =
      std::atan((s.inlet_width_up - s.inlet_width_down) / (2.0 * (d.length - s.wall_thickness)));
  d.wall_thickness_transverse = s.wall_thickness / std::cos(d.sidewall_angle);
  d.wall_offset = s.wall_thickness * std::tan(d.sidewall_angle);
  d.wall_thickness_corner = d.wall_thickness_transverse - d.wall_offset;
  d.outlet_width_up = d.unit_width - s.inlet_width_up - 2.0 * d.wall_thickness_corner;
  d.outlet_width_down = d.unit_width - s.inlet_width_down - 2.0 * d.wall_thickness_corner;
  if (d.outlet_width_up <= 0.0 || d.outlet_width_down <= 0.0) {
    throw Error(ErrorCode::NonPositiveOutletWidth,
                "outlet widths W_o_u=" + text::format_sig(d.outlet_width_up, 6) +
                    ", W_o_d=" + text::format_sig(d.outlet_width_down, 6));
  }

  const CrestLength crest = crest_length(d, fixed);
  d.unit_crest_length = crest.unit;
  d.crest_length = crest.total;
  return d;
}

double inlet_half_width(const PkwDerived& d, double x) {
  return 0.5 * d.inlet_width_up - x * std::tan(d.sidewall_angle);
}

double outlet_half_width(const PkwDerived& d, double x) {
  return 0.5 * d.outlet_width_up + (x - d.wall_thickness) * std::tan(d.sidewall_angle);
}

CrestLength crest_length(const PkwDerived& d, const PkwFixed& fixed) {
  const double ts = d.wall_thickness;
  const double sidewalls = 2.0 * d.length / std::cos(d.sidewall_angle);
  const double upstream_wall = 2.0 * outlet_half_width(d, 0.5 * ts) + d.wall_thickness_transverse;
  const double downstream_wall =
      2.0 * inlet_half_width(d, d.length - 0.5 * ts) + d.wall_thickness_transverse;
  CrestLength out;
  out.unit = sidewalls + upstream_wall + downstream_wall;
  out.total = fixed.units * out.unit;
  return out;
}

namespace {

void check_range(ValidationReport& report, const char* name, double value, double lo, double hi) {
  if (value < lo - kBoundSlack) report.violations.push_back({std::string(name) + ">=min", value, lo});
  if (value > hi + kBoundSlack) report.violations.push_back({std::string(name) + "<=max", value, hi});
}

}  // namespace

ValidationReport validate(const PkwFixed& fixed, const PkwSample& s) {
  ValidationReport report;
  const double p = fixed.height;
  const double wu = fixed.unit_width();

  check_range(report, "B_b", s.base_length, 0.33 * p, 1.67 * p);
  check_range(report, "R_B_i", s.inlet_overhang_ratio, 0.25, 1.0);
  if (!(s.outlet_overhang_ratio > 0.0)) {
    report.violations.push_back({"R_B_o>0", s.outlet_overhang_ratio, 0.0});
  }
  check_range(report, "T_s", s.wall_thickness, 0.015 * p, 0.18 * p);
  const double width_max = wu - 2.0 * s.wall_thickness - 0.03 * p;
  check_range(report, "W_i_u", s.inlet_width_up, 0.03 * p, width_max);
  check_range(report, "W_i_d", s.inlet_width_down, 0.03 * p, width_max);
  if (s.inlet_width_up < s.inlet_width_down) {
    report.violations.push_back({"W_i_u>=W_i_d", s.inlet_width_up, s.inlet_width_down});
  }

  const double length = s.base_length + s.inlet_overhang_ratio * s.base_length +
                        s.outlet_overhang_ratio * s.base_length;
  if (!(length > s.wall_thickness)) {
    report.violations.push_back({"B>T_s", length, s.wall_thickness});
  } else {
    const double alpha =
        std::atan((s.inlet_width_up - s.inlet_width_down) / (2.0 * (length - s.wall_thickness)));
    const double corner =
        s.wall_thickness / std::cos(alpha) - s.wall_thickness * std::tan(alpha);
    const double outlet_up = wu - s.inlet_width_up - 2.0 * corner;
    const double outlet_down = wu - s.inlet_width_down - 2.0 * corner;
    if (!(outlet_up > 0.0)) report.violations.push_back({"W_o_u>0", outlet_up, 0.0});
    if (!(outlet_down > 0.0)) report.violations.push_back({"W_o_d>0", outlet_down, 0.0});
  }
  report.feasible = report.violations.empty();
  return report;
}

const std::array<std::string_view, kFeatureCount>& feature_names() {
  static const std::array<std::string_view, kFeatureCount> names = {
      "Q", "B_i", "B_o", "B", "alpha", "T_s2", "T_s3", "W_o_u", "W_o_d"};
  return names;
}

FeatureVector feature_vector(const PkwDerived& d, double discharge) {
  return {discharge,
          d.inlet_overhang,
          d.outlet_overhang,
          d.length,
          d.sidewall_angle_deg(),
          d.wall_thickness_transverse,
          d.wall_thickness_corner,
          d.outlet_width_up,
          d.outlet_width_down};
}

GeometryRecord make_record(std::string id, const PkwFixed& fixed, const PkwSample& sample) {
  return GeometryRecord{std::move(id), fixed, sample, derive(fixed, sample)};
}

namespace {

constexpr std::string_view kRecordHeader =
    "geometry_id,W,P,N_u,B_b,R_B_i,R_B_o,T_s,W_i_u,W_i_d,W_u,B_i,B_o,B,alpha_deg,T_s2,T_s3,"
    "delta_T_s,W_o_u,W_o_d,L_u,L";

}  // namespace

void write_parametric_records(std::ostream& out, const std::vector<GeometryRecord>& records) {
  out << kRecordHeader << '\n';
  auto f = [](double v) { return text::format_sig(v, 9); };
  for (const auto& r : records) {
    const auto& s = r.sample;
    const auto& d = r.derived;
    out << r.id << ',' << f(r.fixed.width) << ',' << f(r.fixed.height) << ',' << r.fixed.units
        << ',' << f(s.base_length) << ',' << f(s.inlet_overhang_ratio) << ','
        << f(s.outlet_overhang_ratio) << ',' << f(s.wall_thickness) << ',' << f(s.inlet_width_up)
        << ',' << f(s.inlet_width_down) << ',' << f(d.unit_width) << ',' << f(d.inlet_overhang)
        << ',' << f(d.outlet_overhang) << ',' << f(d.length) << ',' << f(d.sidewall_angle_deg())
        << ',' << f(d.wall_thickness_transverse) << ',' << f(d.wall_thickness_corner) << ','
        << f(d.wall_offset) << ',' << f(d.outlet_width_up) << ',' << f(d.outlet_width_down) << ','
        << f(d.unit_crest_length) << ',' << f(d.crest_length) << '\n';
  }
}

std::vector<GeometryRecord> read_parametric_records(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::ParseError, "empty parametric table");
  const char delim = text::detect_delimiter(line);
  const auto header = text::split(line, delim);
  auto column = [&](std::string_view name) -> std::size_t {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (header[i] == name) return i;
    }
    throw Error(ErrorCode::ParseError, "parametric table lacks column " + std::string(name));
  };
  const std::size_t c_id = column("geometry_id"), c_w = column("W"), c_p = column("P"),
                    c_n = column("N_u"), c_bb = column("B_b"), c_ri = column("R_B_i"),
                    c_ro = column("R_B_o"), c_ts = column("T_s"), c_wiu = column("W_i_u"),
                    c_wid = column("W_i_d");

  std::vector<GeometryRecord> records;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (text::trim(line).empty()) continue;
    const auto fields = text::split(line, delim);
    auto num = [&](std::size_t c) {
      if (c >= fields.size()) {
        throw Error(ErrorCode::ParseError, "row " + std::to_string(row) + ": missing field");
      }
      const auto v = text::parse_double(fields[c]);
      if (!v) {
        throw Error(ErrorCode::ParseError,
                    "row " + std::to_string(row) + ": bad number '" + fields[c] + "'");
      }
      return *v;
    };
    PkwFixed fixed{num(c_w), num(c_p), static_cast<int>(num(c_n))};
    PkwSample sample{num(c_bb), num(c_ri), num(c_ro), num(c_ts), num(c_wiu), num(c_wid)};
    records.push_back(make_record(fields.at(c_id), fixed, sample));
  }
  return records;
}

}  // namespace pkw

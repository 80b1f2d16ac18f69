#include "pkw/hydraulics.hpp"

#include <algorithm>
#include <cmath>
#include <istream>

#include "pkw/error.hpp"
#include "pkw/rng.hpp"
#include "pkw/text.hpp"

namespace pkw {

namespace {

const double kSqrt2g = std::sqrt(2.0 * kGravity);

void require_positive(const char* what, double value) {
  if (!(value > 0.0) || !std::isfinite(value)) {
    throw Error(ErrorCode::NonPhysical, std::string(what) + " must be positive and finite, got " +
                                            text::format_sig(value, 6));
  }
}

}  // namespace

FlowCondition total_head(double discharge, double depth, const PkwFixed& fixed) {
  require_positive("Q", discharge);
  require_positive("h_t", depth);
  const double approach_depth = fixed.height + depth;
  if (!(approach_depth > 0.0)) throw Error(ErrorCode::NonPhysical, "P + h_t must be positive");
  FlowCondition f;
  f.discharge = discharge;
  f.depth = depth;
  f.velocity = discharge / (fixed.width * approach_depth);
  f.total_head = f.velocity * f.velocity / (2.0 * kGravity) + depth;
  return f;
}

double cd_from_head(double discharge, double crest_length, double head) {
  require_positive("Q", discharge);
  require_positive("L", crest_length);
  require_positive("H_t", head);
  return 3.0 * discharge / (2.0 * crest_length * kSqrt2g * std::pow(head, 1.5));
}

double discharge_from_cd(double cd, double crest_length, double head) {
  if (!(cd >= 0.0)) throw Error(ErrorCode::NonPhysical, "c_D must be non-negative");
  require_positive("L", crest_length);
  require_positive("H_t", head);
  return 2.0 / 3.0 * cd * crest_length * kSqrt2g * std::pow(head, 1.5);
}

double head_from_cd(double cd, double crest_length, double discharge) {
  require_positive("c_D", cd);
  require_positive("L", crest_length);
  require_positive("Q", discharge);
  return std::pow(3.0 * discharge / (2.0 * cd * crest_length * kSqrt2g), 2.0 / 3.0);
}

const std::vector<double>& paper_schedule_lps() {
  static const std::vector<double> schedule = {50,  55,  60,  70,  80,  90,  100,
                                               110, 120, 130, 140, 150, 160, 170,
                                               180, 190, 200, 225, 250};
  return schedule;
}

std::string_view to_string(LabelSource source) {
  switch (source) {
    case LabelSource::CfdCsv: return "cfd-csv";
    case LabelSource::Synthetic: return "synthetic";
    case LabelSource::Manual: return "manual";
  }
  return "manual";
}

std::optional<LabelSource> parse_label_source(std::string_view name) {
  if (name == "cfd-csv") return LabelSource::CfdCsv;
  if (name == "synthetic") return LabelSource::Synthetic;
  if (name == "manual") return LabelSource::Manual;
  return std::nullopt;
}

OracleRanges oracle_ranges(const PkwFixed& fixed) {
  const double p = fixed.height;
  // B = B_b (1 + 2 R) with R in [0.25, 1]; T_s3 in (0, T_s] with T_s <= 0.18 P;
  // W_o_d >= 2 (T_s - T_s3) + 0.03 P >= 0.03 P and <= W_u - 0.03 P.
  OracleRanges r;
  r.length_lo = 0.33 * p * 1.5;
  r.length_hi = 1.67 * p * 3.0;
  r.corner_lo = 0.0;
  r.corner_hi = 0.18 * p;
  r.outlet_down_lo = 0.03 * p;
  r.outlet_down_hi = fixed.unit_width() - 0.03 * p;
  return r;
}

double synthetic_cd(const PkwDerived& d, double discharge, const OracleConfig& config,
                    std::uint64_t seed) {
  constexpr double kSlack = 1e-12;
  if (!(discharge >= 0.05 - kSlack && discharge <= 0.25 + kSlack)) {
    throw Error(ErrorCode::OutOfRange,
                "Q = " + text::format_sig(discharge, 6) + " m^3/s outside [0.05, 0.25]");
  }
  const OracleRanges r = oracle_ranges(config.fixed);
  auto unit = [](double v, double lo, double hi) { return std::clamp((v - lo) / (hi - lo), 0.0, 1.0); };
  const double q = (m3s_to_lps(discharge) - 50.0) / 200.0;
  const double b = unit(d.length, r.length_lo, r.length_hi);
  const double t3 = unit(d.wall_thickness_corner, r.corner_lo, r.corner_hi);
  const double w = unit(d.outlet_width_down, r.outlet_down_lo, r.outlet_down_hi);
  double cd = 0.40 + 0.12 * (1.0 - std::exp(-d.sidewall_angle_deg() / 4.0)) - 0.10 * q - 0.05 * b -
              0.04 * t3 + 0.05 * 4.0 * w * (1.0 - w);
  if (config.noise_sigma > 0.0) {
    Rng rng(seed);
    cd += config.noise_sigma * rng.normal();
  }
  return cd;
}

IngestResult ingest_labels(std::istream& in, const std::map<std::string, double>& crest_lengths,
                           const PkwFixed& fixed) {
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::ParseError, "empty label file");
  const char delim = text::detect_delimiter(line);
  const auto header = text::split(line, delim);
  auto find = [&](std::string_view name) -> std::optional<std::size_t> {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (header[i] == name) return i;
    }
    return std::nullopt;
  };
  for (const auto& h : header) {
    if (h == "Q_m3s" || h == "Q_m3_s" || h == "Q" || h == "h_t_mm" || h == "H_t_mm" ||
        h == "h_t" || h == "H_t") {
      throw Error(ErrorCode::UnitError,
                  "column '" + h + "': expected Q_lps and heads in meters (h_t_m or H_t_m)");
    }
  }
  const auto c_id = find("geometry_id");
  const auto c_q = find("Q_lps");
  const auto c_depth = find("h_t_m");
  const auto c_head = find("H_t_m");
  const auto c_cd = find("c_D");
  if (!c_id || !c_q) throw Error(ErrorCode::ParseError, "header needs geometry_id and Q_lps");
  if (!c_cd && !c_depth && !c_head) {
    throw Error(ErrorCode::ParseError, "header needs c_D or a head column (h_t_m, H_t_m)");
  }

  IngestResult result;
  std::map<std::pair<std::string, long long>, std::size_t> index;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (text::trim(line).empty()) continue;
    const auto f = text::split(line, delim);
    const std::string where = "row " + std::to_string(row);
    auto field = [&](std::optional<std::size_t> c) -> std::string_view {
      if (!c || *c >= f.size()) return {};
      return f[*c];
    };
    auto number = [&](std::optional<std::size_t> c, const char* name) -> std::optional<double> {
      const auto s = field(c);
      if (s.empty()) return std::nullopt;
      const auto v = text::parse_double(s);
      if (!v || !std::isfinite(*v)) {
        throw Error(ErrorCode::ParseError, where + ": bad " + name + " '" + std::string(s) + "'");
      }
      return v;
    };

    LabeledSample s;
    s.geometry_id = std::string(field(c_id));
    if (s.geometry_id.empty()) throw Error(ErrorCode::ParseError, where + ": empty geometry_id");
    const auto it = crest_lengths.find(s.geometry_id);
    if (it == crest_lengths.end()) {
      throw Error(ErrorCode::MissingGeometry, where + ": unknown geometry '" + s.geometry_id + "'");
    }
    const auto q_lps = number(c_q, "Q_lps");
    if (!q_lps || *q_lps <= 0.0) throw Error(ErrorCode::ParseError, where + ": Q_lps must be > 0");
    s.discharge = lps_to_m3s(*q_lps);
    s.source = LabelSource::CfdCsv;

    if (const auto h = number(c_head, "H_t_m")) {
      if (*h <= 0.0) throw Error(ErrorCode::ParseError, where + ": H_t_m must be > 0");
      s.total_head = *h;
    } else if (const auto depth = number(c_depth, "h_t_m")) {
      if (*depth <= 0.0) throw Error(ErrorCode::ParseError, where + ": h_t_m must be > 0");
      s.total_head = total_head(s.discharge, *depth, fixed).total_head;
    }
    if (const auto cd = number(c_cd, "c_D")) {
      if (*cd <= 0.0) throw Error(ErrorCode::ParseError, where + ": c_D must be > 0");
      s.cd = *cd;
    } else if (s.total_head) {
      s.cd = cd_from_head(s.discharge, it->second, *s.total_head);
    } else {
      throw Error(ErrorCode::ParseError, where + ": neither c_D nor a head value");
    }

    const auto key = std::make_pair(s.geometry_id, std::llround(*q_lps * 1000.0));
    if (const auto dup = index.find(key); dup != index.end()) {
      result.labels[dup->second] = std::move(s);
      ++result.duplicates;
    } else {
      index.emplace(key, result.labels.size());
      result.labels.push_back(std::move(s));
    }
  }
  return result;
}

}  // namespace pkw

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ostream>

#include "pkw/error.hpp"
#include "pkw/rng.hpp"
#include "pkw/surrogates.hpp"
#include "pkw/text.hpp"

namespace pkw {

MetricReport MetricReport::paper_scaled() const {
  MetricReport s = *this;
  s.mse *= 1e5;
  s.mae *= 1e3;
  s.max_ae *= 10.0;
  if (s.r2) *s.r2 *= 1e2;
  return s;
}

MetricReport metrics(std::span<const double> y, std::span<const double> y_hat) {
  if (y.size() != y_hat.size()) {
    throw Error(ErrorCode::ShapeMismatch, std::to_string(y.size()) + " targets vs " +
                                              std::to_string(y_hat.size()) + " predictions");
  }
  if (y.empty()) throw Error(ErrorCode::EmptyData, "no samples to score");
  const double n = static_cast<double>(y.size());
  double mean = 0.0;
  for (double v : y) mean += v;
  mean /= n;

  MetricReport r;
  r.n = y.size();
  double ss_res = 0.0, ss_tot = 0.0, abs_sum = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double e = y[i] - y_hat[i];
    ss_res += e * e;
    abs_sum += std::abs(e);
    r.max_ae = std::max(r.max_ae, std::abs(e));
    ss_tot += (y[i] - mean) * (y[i] - mean);
  }
  r.mse = ss_res / n;
  r.mae = abs_sum / n;
  const bool constant = std::all_of(y.begin(), y.end(), [&](double v) { return v == y[0]; });
  if (!constant && ss_tot > 0.0) r.r2 = 1.0 - ss_res / ss_tot;
  return r;
}

void write_metric_csv(std::ostream& out, const std::vector<MetricRow>& rows, bool paper_scale) {
  out << (paper_scale ? "split,model,n,MSE_x1e5,R2_x1e2,MAE_x1e3,MaxAE_x10\n"
                      : "split,model,n,MSE,R2,MAE,MaxAE\n");
  for (const auto& row : rows) {
    const MetricReport m = paper_scale ? row.report.paper_scaled() : row.report;
    out << row.split << ',' << row.model << ',' << m.n << ',' << text::format_sig(m.mse, 8) << ','
        << (m.r2 ? text::format_sig(*m.r2, 8) : std::string()) << ','
        << text::format_sig(m.mae, 8) << ',' << text::format_sig(m.max_ae, 8) << '\n';
  }
}

std::vector<double> permutation_importance(const BatchPredictor& predict, const Matrix& x,
                                           std::span<const double> y, std::uint64_t seed,
                                           std::size_t repeats) {
  const double baseline = metrics(y, predict(x)).mse;
  std::vector<double> scores(x.cols, 0.0);
  std::vector<double> column(x.rows);
  for (std::size_t f = 0; f < x.cols; ++f) {
    for (std::size_t r = 0; r < repeats; ++r) {
      Matrix shuffled = x;
      for (std::size_t i = 0; i < x.rows; ++i) column[i] = x(i, f);
      Rng rng(derive_seed(seed, f * repeats + r));
      rng.shuffle(std::span<double>(column));
      for (std::size_t i = 0; i < x.rows; ++i) shuffled(i, f) = column[i];
      scores[f] += metrics(y, predict(shuffled)).mse - baseline;
    }
    scores[f] /= static_cast<double>(std::max<std::size_t>(repeats, 1));
  }
  return scores;
}

TimingSummary time_calls(std::size_t calls, const std::function<void(std::size_t)>& fn) {
  using clock = std::chrono::steady_clock;
  std::vector<double> ms(calls);
  for (std::size_t i = 0; i < calls; ++i) {
    const auto t0 = clock::now();
    fn(i);
    ms[i] = std::chrono::duration<double, std::milli>(clock::now() - t0).count();
  }
  TimingSummary s;
  s.calls = calls;
  if (calls == 0) return s;
  std::sort(ms.begin(), ms.end());
  s.median_ms = calls % 2 ? ms[calls / 2] : 0.5 * (ms[calls / 2 - 1] + ms[calls / 2]);
  s.p90_ms = ms[std::min(calls - 1, static_cast<std::size_t>(0.9 * static_cast<double>(calls)))];
  return s;
}

}  // namespace pkw

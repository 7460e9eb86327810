#include "sewerml/wavelet.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <thread>

#include "sewerml/error.hpp"
#include "sewerml/io.hpp"

namespace sewerml::wavelet {

namespace {

constexpr double kEnvelopeFloor = 1e-8;

void require(bool ok, const std::string& message) {
  if (!ok) throw Error(ErrorCode::kInvalidArgument, message);
}

}  // namespace

void MorletParams::validate() const {
  require(bandwidth > 0.0 && std::isfinite(bandwidth), "Morlet bandwidth must be positive");
  require(center_frequency > 0.0 && std::isfinite(center_frequency), "Morlet center frequency must be positive");
}

std::complex<double> morlet(double x, const MorletParams& params) {
  const double norm = 1.0 / std::sqrt(std::numbers::pi * params.bandwidth);
  const double envelope = norm * std::exp(-x * x / params.bandwidth);
  const double phase = 2.0 * std::numbers::pi * params.center_frequency * x;
  return {envelope * std::cos(phase), envelope * std::sin(phase)};
}

double support_halfwidth(const MorletParams& params) {
  // norm * exp(-x^2 / fb) = floor
  const double norm = 1.0 / std::sqrt(std::numbers::pi * params.bandwidth);
  return std::sqrt(params.bandwidth * std::log(norm / kEnvelopeFloor));
}

double coi_factor(const MorletParams& params) { return std::sqrt(params.bandwidth); }

std::vector<double> make_scale_grid(double min_scale, double max_scale, std::size_t count, Spacing spacing) {
  require(min_scale > 0.0, "scale grid minimum must be positive");
  require(max_scale > min_scale, "scale grid maximum must exceed its minimum");
  require(count >= 2, "scale grid needs at least two scales");
  std::vector<double> scales(count);
  const double last = static_cast<double>(count - 1);
  for (std::size_t i = 0; i < count; ++i) {
    const double u = static_cast<double>(i) / last;
    scales[i] = spacing == Spacing::kLog ? min_scale * std::pow(max_scale / min_scale, u)
                                         : min_scale + (max_scale - min_scale) * u;
  }
  scales.back() = max_scale;
  return scales;
}

GapFilledSignal fill_gaps(const ingest::LevelSeries& series) {
  const auto& levels = series.levels();
  const auto& missing = series.missing();
  const std::size_t n = levels.size();
  GapFilledSignal out;
  out.values = levels;
  std::size_t i = 0;
  while (i < n) {
    if (!missing[i]) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < n && missing[j]) ++j;
    // [i, j) is missing
    const bool has_left = i > 0;
    const bool has_right = j < n;
    if (!has_left && !has_right)
      throw Error(ErrorCode::kDegenerate, "level series '" + series.catchment_id() + "': all samples missing");
    for (std::size_t k = i; k < j; ++k) {
      if (has_left && has_right) {
        const double t = static_cast<double>(k - (i - 1)) / static_cast<double>(j - (i - 1));
        out.values[k] = levels[i - 1] + t * (levels[j] - levels[i - 1]);
      } else {
        out.values[k] = has_left ? levels[i - 1] : levels[j];
      }
    }
    out.interpolated_spans.emplace_back(i, j - 1);
    i = j;
  }
  return out;
}

WaveletSpectrum::WaveletSpectrum(std::vector<double> scales, std::vector<double> times, double time_step,
                                 std::vector<std::complex<double>> coefficients, std::vector<bool> valid)
    : scales_(std::move(scales)),
      times_(std::move(times)),
      time_step_(time_step),
      coefficients_(std::move(coefficients)),
      valid_(std::move(valid)) {
  require(time_step_ > 0.0, "spectrum time step must be positive");
  require(coefficients_.size() == scales_.size() * times_.size(), "spectrum dimensions do not match scales x times");
  require(valid_.empty() || valid_.size() == coefficients_.size(), "spectrum mask dimensions do not match");
  for (std::size_t i = 0; i < scales_.size(); ++i) {
    require(scales_[i] > 0.0, "spectrum scales must be positive");
    require(i == 0 || scales_[i] > scales_[i - 1], "spectrum scales must be strictly increasing");
  }
}

WaveletSpectrum cwt(std::span<const double> signal, double time_step, std::span<const double> scales,
                    const MorletParams& params, const CwtOptions& options) {
  params.validate();
  require(time_step > 0.0, "time step must be positive");
  require(!signal.empty(), "cwt of an empty signal");
  require(!scales.empty(), "cwt needs at least one scale");
  for (std::size_t i = 0; i < scales.size(); ++i) {
    require(scales[i] > 0.0, "scale must be positive");
    require(i == 0 || scales[i] > scales[i - 1], "scales must be strictly increasing");
  }
  for (double v : signal) require(std::isfinite(v), "cwt signal contains non-finite samples");

  const std::size_t n = signal.size();
  const double coi = coi_factor(params);
  const double duration = static_cast<double>(n - 1) * time_step;
  if (options.mask_cone_of_influence && duration < 2.0 * coi * scales.back())
    throw Error(ErrorCode::kInvalidArgument,
                "series of " + io::format_number(duration) + " h is too short for scale " +
                    io::format_number(scales.back()) + " h (needs " + io::format_number(2.0 * coi * scales.back()) +
                    " h outside the cone of influence)");

  std::vector<double> f(signal.begin(), signal.end());
  if (options.remove_mean) {
    const double mean = std::accumulate(f.begin(), f.end(), 0.0) / static_cast<double>(n);
    for (double& v : f) v -= mean;
  }

  std::vector<std::complex<double>> coefficients(scales.size() * n);
  const double xmax = support_halfwidth(params);

  auto compute_scale = [&](std::size_t s) {
    const double a = scales[s];
    const auto half = static_cast<std::ptrdiff_t>(std::floor(xmax * a / time_step));
    const std::size_t width = static_cast<std::size_t>(2 * half + 1);
    // conj(psi((t - b) / a)) * dt * a^(-1/2), indexed by k = (t - b) / dt + half
    std::vector<double> kre(width);
    std::vector<double> kim(width);
    const double gain = time_step / std::sqrt(a);
    for (std::size_t k = 0; k < width; ++k) {
      const double x = static_cast<double>(static_cast<std::ptrdiff_t>(k) - half) * time_step / a;
      const std::complex<double> w = std::conj(morlet(x, params)) * gain;
      kre[k] = w.real();
      kim[k] = w.imag();
    }
    const auto sn = static_cast<std::ptrdiff_t>(n);
    for (std::ptrdiff_t b = 0; b < sn; ++b) {
      const std::ptrdiff_t lo = std::max(-half, -b);
      const std::ptrdiff_t hi = std::min(half, sn - 1 - b);
      const double* fp = f.data() + b;
      const double* rp = kre.data() + half;
      const double* ip = kim.data() + half;
      double re0 = 0, re1 = 0, re2 = 0, re3 = 0;
      double im0 = 0, im1 = 0, im2 = 0, im3 = 0;
      std::ptrdiff_t k = lo;
      for (; k + 3 <= hi; k += 4) {
        re0 += fp[k] * rp[k];
        im0 += fp[k] * ip[k];
        re1 += fp[k + 1] * rp[k + 1];
        im1 += fp[k + 1] * ip[k + 1];
        re2 += fp[k + 2] * rp[k + 2];
        im2 += fp[k + 2] * ip[k + 2];
        re3 += fp[k + 3] * rp[k + 3];
        im3 += fp[k + 3] * ip[k + 3];
      }
      for (; k <= hi; ++k) {
        re0 += fp[k] * rp[k];
        im0 += fp[k] * ip[k];
      }
      coefficients[s * n + static_cast<std::size_t>(b)] = {(re0 + re1) + (re2 + re3), (im0 + im1) + (im2 + im3)};
    }
  };

  unsigned threads = options.threads ? options.threads : std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, scales.size()));
  if (threads <= 1) {
    for (std::size_t s = 0; s < scales.size(); ++s) compute_scale(s);
  } else {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < threads; ++t)
      pool.emplace_back([&, t] {
        for (std::size_t s = t; s < scales.size(); s += threads) compute_scale(s);
      });
  }

  std::vector<double> times(n);
  for (std::size_t j = 0; j < n; ++j) times[j] = static_cast<double>(j) * time_step;

  std::vector<bool> valid;
  if (options.mask_cone_of_influence) {
    valid.assign(coefficients.size(), false);
    for (std::size_t s = 0; s < scales.size(); ++s) {
      const double reach = coi * scales[s];
      for (std::size_t j = 0; j < n; ++j)
        valid[s * n + j] = times[j] >= reach && duration - times[j] >= reach;
    }
  }
  return WaveletSpectrum(std::vector<double>(scales.begin(), scales.end()), std::move(times), time_step,
                         std::move(coefficients), std::move(valid));
}

WaveletSpectrum cwt(const ingest::LevelSeries& series, std::span<const double> scales, const MorletParams& params,
                    const CwtOptions& options) {
  const GapFilledSignal filled = fill_gaps(series);
  return cwt(filled.values, series.step_hours(), scales, params, options);
}

VarianceCurve wavelet_variance(const WaveletSpectrum& spectrum) {
  VarianceCurve curve;
  curve.scales = spectrum.scales();
  curve.variance.assign(spectrum.scale_count(), 0.0);
  for (std::size_t s = 0; s < spectrum.scale_count(); ++s) {
    double sum = 0.0;
    for (std::size_t j = 0; j < spectrum.time_count(); ++j)
      if (spectrum.valid(s, j)) sum += std::norm(spectrum.at(s, j));
    curve.variance[s] = sum * spectrum.time_step();
  }
  return curve;
}

std::vector<DominantPeriod> top_periods(const VarianceCurve& curve, std::size_t count) {
  const std::size_t n = curve.variance.size();
  require(curve.scales.size() == n, "variance curve lengths differ");
  require(n >= 3, "variance curve shorter than 3 points");
  require(count >= 1, "top_periods needs count >= 1");
  require(n >= 2 * count + 1, "variance curve needs at least 2m+1 points for m periods");

  std::vector<std::size_t> maxima;
  for (std::size_t i = 1; i + 1 < n; ++i)
    if (curve.variance[i] > curve.variance[i - 1] && curve.variance[i] > curve.variance[i + 1]) maxima.push_back(i);
  std::stable_sort(maxima.begin(), maxima.end(),
                   [&](std::size_t a, std::size_t b) { return curve.variance[a] > curve.variance[b]; });

  std::vector<DominantPeriod> out;
  for (std::size_t i = 0; i < maxima.size() && out.size() < count; ++i)
    out.push_back({curve.scales[maxima[i]], curve.variance[maxima[i]], false});
  if (out.size() < count) {
    const auto g = static_cast<std::size_t>(
        std::distance(curve.variance.begin(), std::max_element(curve.variance.begin(), curve.variance.end())));
    while (out.size() < count) out.push_back({curve.scales[g], curve.variance[g], true});
  }
  return out;
}

std::string write_variance_curve(const VarianceCurve& curve) {
  std::string out = "scale_hours,variance\n";
  for (std::size_t i = 0; i < curve.scales.size(); ++i)
    out += io::format_number(curve.scales[i]) + "," + io::format_number(curve.variance[i]) + "\n";
  return out;
}

VarianceCurve parse_variance_curve(std::istream& in, const std::string& source) {
  const io::CsvTable t = io::read_csv(in, source);
  if (t.header != std::vector<std::string>{"scale_hours", "variance"})
    throw Error(ErrorCode::kParse, source + ": header must be 'scale_hours,variance'");
  VarianceCurve curve;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const std::string where = source + ":" + std::to_string(t.line_numbers[r]);
    curve.scales.push_back(io::parse_number(t.rows[r][0], where));
    curve.variance.push_back(io::parse_number(t.rows[r][1], where));
  }
  return curve;
}

}  // namespace sewerml::wavelet

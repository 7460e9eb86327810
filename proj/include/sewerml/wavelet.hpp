#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "sewerml/ingest.hpp"

namespace sewerml::wavelet {

/// Complex Morlet mother wavelet
///
///   psi(x) = (pi fb)^(-1/2) exp(2 pi i fc x) exp(-x^2 / fb)
///
/// fb is the bandwidth parameter, fc the center frequency. The defaults keep
/// the fb : fc = 1.5 : 1 ratio. With this parameterisation a sinusoid of
/// period P responds most strongly at scale a = fc * P.
struct MorletParams {
  double bandwidth = 1.5;
  double center_frequency = 1.0;

  void validate() const;
};

std::complex<double> morlet(double x, const MorletParams& params);

/// |x| beyond which the Morlet envelope drops below 1e-8; kernels are
/// truncated there.
double support_halfwidth(const MorletParams& params);

/// Half-width of the cone of influence in units of scale: a cell (a, b)
/// is boundary-contaminated when b lies closer than coi_factor * a to
/// either end of the record.
double coi_factor(const MorletParams& params);

enum class Spacing { kLog, kLinear };

std::vector<double> make_scale_grid(double min_scale, double max_scale, std::size_t count,
                                    Spacing spacing = Spacing::kLog);

/// Series after linear interpolation of missing samples. Leading or
/// trailing gaps take the nearest observed value.
struct GapFilledSignal {
  std::vector<double> values;
  std::vector<std::pair<std::size_t, std::size_t>> interpolated_spans;  // [first, last] sample indices
};

GapFilledSignal fill_gaps(const ingest::LevelSeries& series);

/// W_f(a, b) on a scale x time grid, stored row-major [scale][time].
class WaveletSpectrum {
 public:
  /// `valid` marks cells outside the cone of influence; an empty mask means
  /// every cell is valid.
  WaveletSpectrum(std::vector<double> scales, std::vector<double> times, double time_step,
                  std::vector<std::complex<double>> coefficients, std::vector<bool> valid = {});

  const std::vector<double>& scales() const { return scales_; }
  const std::vector<double>& times() const { return times_; }
  double time_step() const { return time_step_; }
  std::size_t scale_count() const { return scales_.size(); }
  std::size_t time_count() const { return times_.size(); }
  const std::complex<double>& at(std::size_t scale, std::size_t time) const {
    return coefficients_[scale * times_.size() + time];
  }
  bool valid(std::size_t scale, std::size_t time) const {
    return valid_.empty() || valid_[scale * times_.size() + time];
  }
  const std::vector<std::complex<double>>& coefficients() const { return coefficients_; }

 private:
  std::vector<double> scales_;
  std::vector<double> times_;
  double time_step_;
  std::vector<std::complex<double>> coefficients_;
  std::vector<bool> valid_;
};

struct CwtOptions {
  bool remove_mean = true;
  bool mask_cone_of_influence = true;
  unsigned threads = 0;  // 0 = hardware concurrency
};

/// Direct summation of
///
///   W(a, b) = a^(-1/2) sum_t f(t) conj(psi((t - b) / a)) dt
///
/// over the sample grid with zero padding outside the record. Each cell is
/// an independent sum evaluated in a fixed order, so results do not depend
/// on the thread count.
WaveletSpectrum cwt(std::span<const double> signal, double time_step, std::span<const double> scales,
                    const MorletParams& params, const CwtOptions& options = {});

/// Fills gaps first; scales are in hours.
WaveletSpectrum cwt(const ingest::LevelSeries& series, std::span<const double> scales,
                    const MorletParams& params, const CwtOptions& options = {});

struct VarianceCurve {
  std::vector<double> scales;
  std::vector<double> variance;
};

/// Var(a) = sum_b |W(a, b)|^2 db over the valid cells of each scale.
VarianceCurve wavelet_variance(const WaveletSpectrum& spectrum);

struct DominantPeriod {
  double scale = 0.0;     // hours
  double variance = 0.0;
  bool filled = false;    // no further local maximum; global maximum repeated
};

/// Local maxima (strictly above both neighbours) ranked by variance,
/// largest first. Short lists are padded with the global maximum.
std::vector<DominantPeriod> top_periods(const VarianceCurve& curve, std::size_t count = 3);

std::string write_variance_curve(const VarianceCurve& curve);
VarianceCurve parse_variance_curve(std::istream& in, const std::string& source);

}  // namespace sewerml::wavelet

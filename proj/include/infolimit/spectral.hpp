#pragma once

#include <cstddef>
#include <iosfwd>
#include <vector>

#include "infolimit/lti.hpp"

namespace infolimit {

/// Lower bound on denominator spectra in sensitivity().
inline constexpr double kSpectrumFloor = 1e-12;

/// Default number of frequency samples.
inline constexpr std::size_t kDefaultGrid = 8192;

/// Nonnegative function of frequency sampled on w_k = -pi + 2 pi k / N.
class Spectrum {
public:
    Spectrum() = default;
    explicit Spectrum(std::vector<double> values);

    std::size_t grid_size() const noexcept { return values_.size(); }
    double operator[](std::size_t k) const { return values_[k]; }
    const std::vector<double>& values() const noexcept { return values_; }
    double frequency(std::size_t k) const { return grid_frequency(k, grid_size()); }

    /// max_k |S(w_k) - S(-w_k)|.
    double asymmetry() const;

private:
    std::vector<double> values_;
};

/// sqrt(S_a / S_b) on the same grid; strictly positive.
class SensitivitySpectrum {
public:
    explicit SensitivitySpectrum(Spectrum values) : values_(std::move(values)) {}

    std::size_t grid_size() const noexcept { return values_.grid_size(); }
    double operator[](std::size_t k) const { return values_[k]; }
    const Spectrum& spectrum() const noexcept { return values_; }

private:
    Spectrum values_;
};

enum class Signal { y, z, u, v, w };

/// PSD of a noise source: variance * |H_shaping|^2.
Spectrum noise_psd(const NoiseSpec& noise, std::size_t grid_size);

/// S_s = |T_{v->s}|^2 S_V + |T_{w->s}|^2 S_W.
Spectrum signal_psd(const ClosedLoop& loop, Signal signal, const NoiseSpec& noise_v,
                    const NoiseSpec& noise_w, std::size_t grid_size);

/// Pointwise sqrt(numerator / denominator). Throws DegenerateSpectrumError if
/// the denominator drops below kSpectrumFloor.
SensitivitySpectrum sensitivity(const Spectrum& numerator, const Spectrum& denominator);

/// (1/2pi) * integral of ln S over [-pi, pi) by the periodic trapezoid rule.
double log_integral(const Spectrum& spec);
double log_integral(const SensitivitySpectrum& spec);

/// (1/2pi) * integral of 1/2 ln(2 pi e S), the entropy rate of a stationary
/// Gaussian process with PSD S.
double szego_entropy_rate(const Spectrum& spec);

/// Right-hand side of the performance inequality, in nats per step, and the
/// spectra it was computed from.
struct RhsTerms {
    Spectrum s_y;
    Spectrum s_w;
    SensitivitySpectrum sensitivity;
    double bound;
};

RhsTerms rhs_terms(const LoopSpec& spec);
RhsTerms rhs_terms(const ClosedLoop& loop, const LoopSpec& spec);
double rhs_bound(const LoopSpec& spec);

/// Two-column CSV `omega,value`.
void write_spectrum_csv(std::ostream& os, const Spectrum& spec);

}  // namespace infolimit

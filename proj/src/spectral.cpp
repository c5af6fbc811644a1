#include "infolimit/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <ostream>

namespace infolimit {

namespace {

void require_positive(const Spectrum& s, const char* what) {
    if (s.grid_size() == 0) throw DomainError(std::string(what) + ": empty spectrum");
    for (std::size_t k = 0; k < s.grid_size(); ++k)
        if (!(s[k] > 0.0) || !std::isfinite(s[k]))
            throw DomainError(std::string(what) + ": spectrum value " + std::to_string(s[k]) +
                              " at w = " + std::to_string(s.frequency(k)) + " is not positive");
}

}  // namespace

Spectrum::Spectrum(std::vector<double> values) : values_(std::move(values)) {
    for (double x : values_)
        if (!(x >= 0.0) || !std::isfinite(x))
            throw DomainError("spectrum values must be finite and nonnegative");
}

double Spectrum::asymmetry() const {
    const std::size_t n = grid_size();
    double worst = 0.0;
    for (std::size_t k = 1; k < n; ++k) worst = std::max(worst, std::abs(values_[k] - values_[n - k]));
    return worst;
}

Spectrum noise_psd(const NoiseSpec& noise, std::size_t grid_size) {
    if (grid_size < 16) throw DomainError("frequency grid must have at least 16 points");
    if (!noise.shaping) return Spectrum(std::vector<double>(grid_size, noise.variance));
    const FrequencyResponse h = frequency_response(*noise.shaping, grid_size);
    std::vector<double> s(grid_size);
    for (std::size_t k = 0; k < grid_size; ++k) s[k] = noise.variance * std::norm(h.at(0, 0, k));
    return Spectrum(std::move(s));
}

Spectrum signal_psd(const ClosedLoop& loop, Signal signal, const NoiseSpec& noise_v,
                    const NoiseSpec& noise_w, std::size_t grid_size) {
    if (!stability_check(loop.loop))
        throw StabilityError("signal_psd requires a stable loop",
                             dominant_eigenvalue(loop.loop.a()));
    const Spectrum sv = noise_psd(noise_v, grid_size);
    const Spectrum sw = noise_psd(noise_w, grid_size);
    if (signal == Signal::v) return sv;
    if (signal == Signal::w) return sw;

    const Eigen::Index out = signal == Signal::y   ? ClosedLoop::out_y
                             : signal == Signal::z ? ClosedLoop::out_z
                                                   : ClosedLoop::out_u;
    const FrequencyResponse t = frequency_response(loop.loop, grid_size);
    std::vector<double> s(grid_size);
    for (std::size_t k = 0; k < grid_size; ++k)
        s[k] = std::norm(t.at(out, ClosedLoop::in_v, k)) * sv[k] +
               std::norm(t.at(out, ClosedLoop::in_w, k)) * sw[k];
    return Spectrum(std::move(s));
}

SensitivitySpectrum sensitivity(const Spectrum& numerator, const Spectrum& denominator) {
    if (numerator.grid_size() != denominator.grid_size())
        throw DimensionError("sensitivity: spectra live on different grids");
    std::vector<double> s(numerator.grid_size());
    for (std::size_t k = 0; k < s.size(); ++k) {
        if (!(denominator[k] >= kSpectrumFloor))
            throw DegenerateSpectrumError("denominator spectrum " + std::to_string(denominator[k]) +
                                          " below floor at w = " +
                                          std::to_string(denominator.frequency(k)));
        s[k] = std::sqrt(numerator[k] / denominator[k]);
    }
    return SensitivitySpectrum(Spectrum(std::move(s)));
}

double log_integral(const Spectrum& spec) {
    require_positive(spec, "log_integral");
    // Trapezoid on a periodic uniform grid: the endpoint weights merge, so it
    // is the plain mean.
    double acc = 0.0;
    for (double x : spec.values()) acc += std::log(x);
    return acc / static_cast<double>(spec.grid_size());
}

double log_integral(const SensitivitySpectrum& spec) { return log_integral(spec.spectrum()); }

double szego_entropy_rate(const Spectrum& spec) {
    return 0.5 * std::log(2.0 * std::numbers::pi * std::numbers::e) + 0.5 * log_integral(spec);
}

RhsTerms rhs_terms(const ClosedLoop& loop, const LoopSpec& spec) {
    Spectrum s_y = signal_psd(loop, Signal::y, spec.noise_v, spec.noise_w, spec.grid_size);
    Spectrum s_w = noise_psd(spec.noise_w, spec.grid_size);
    SensitivitySpectrum sens = sensitivity(s_y, s_w);
    const double bound = log_integral(sens);
    return RhsTerms{std::move(s_y), std::move(s_w), std::move(sens), bound};
}

RhsTerms rhs_terms(const LoopSpec& spec) { return rhs_terms(close_loop(spec), spec); }

double rhs_bound(const LoopSpec& spec) { return rhs_terms(spec).bound; }

void write_spectrum_csv(std::ostream& os, const Spectrum& spec) {
    char buf[96];
    os << "omega,value\n";
    for (std::size_t k = 0; k < spec.grid_size(); ++k) {
        std::snprintf(buf, sizeof buf, "%.17g,%.17g\n", spec.frequency(k), spec[k]);
        os << buf;
    }
}

}  // namespace infolimit

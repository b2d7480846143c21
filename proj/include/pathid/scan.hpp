#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "pathid/errors.hpp"
#include "pathid/model.hpp"
#include "pathid/random.hpp"

// Phase sweeps over the interferometer, fringe statistics, and the sinusoid
// fit used to pull visibility out of noisy count series.

namespace pathid {

struct AxisSpec {
    std::size_t source_index = 0; // phase slot being swept
    double start_rad = 0.0;
    double stop_rad = 0.0;
    std::size_t points = 0; // inclusive of both endpoints
};

struct ScanSpec {
    std::vector<AxisSpec> axes;                 // one for a line, two for a plane
    std::map<std::size_t, double> fixed_phases; // slot overrides applied before sweeping
    std::optional<double> integration_time_s;   // set to sample counts per point
    std::uint64_t seed = 0;
};

struct ScanResult {
    InterferometerSpec base; // spec with overrides applied, for bookkeeping
    std::vector<AxisSpec> axes;
    std::vector<double> axis_a_values;
    std::vector<double> axis_b_values; // empty for line scans
    std::vector<double> rates;         // row-major, index = ia * nb + ib
    std::vector<double> phase_first;   // absolute first/last source phase per row
    std::vector<double> phase_last;
    std::vector<std::int64_t> counts; // only in counting mode
    std::vector<double> sigmas;       // sqrt(counts)
    std::optional<double> integration_time_s;
    std::uint64_t seed = 0;

    bool is_2d() const { return !axis_b_values.empty(); }
    std::size_t rows() const { return rates.size(); }
};

inline std::vector<double> linspace(double start, double stop, std::size_t points) {
    std::vector<double> values(points);
    const double step = (stop - start) / static_cast<double>(points - 1);
    for (std::size_t i = 0; i < points; ++i)
        values[i] = start + static_cast<double>(i) * step;
    return values;
}

// One Poisson draw of the coincidences collected at a fixed operating point.
inline std::int64_t monte_carlo_counts(double rate_hz, double integration_time_s,
                                       std::uint64_t seed) {
    if (!(rate_hz >= 0.0) || !std::isfinite(rate_hz))
        throw validation_error("rate must be finite and >= 0");
    if (!(integration_time_s > 0.0) || !std::isfinite(integration_time_s))
        throw validation_error("integration time must be finite and > 0");
    Xoshiro256ss rng(seed);
    return poisson(rate_hz * integration_time_s, rng);
}

namespace detail {

inline ScanResult run_scan(const InterferometerSpec& spec, const ScanSpec& sc,
                           std::size_t expected_axes) {
    validate(spec);
    if (sc.axes.size() != expected_axes)
        throw validation_error(expected_axes == 1 ? "line scan needs exactly one axis"
                                                  : "plane scan needs exactly two axes");
    for (const AxisSpec& axis : sc.axes) {
        if (axis.source_index >= spec.sources.size())
            throw validation_error("scan axis refers to a source index out of range");
        if (axis.points < 2)
            throw validation_error("scan axis needs at least two points");
        if (!std::isfinite(axis.start_rad) || !std::isfinite(axis.stop_rad))
            throw validation_error("scan axis bounds must be finite");
    }
    if (sc.axes.size() == 2 && sc.axes[0].source_index == sc.axes[1].source_index)
        throw validation_error("plane scan needs two distinct phase slots");
    for (const auto& [slot, value] : sc.fixed_phases) {
        if (slot >= spec.sources.size())
            throw validation_error("fixed phase refers to a source index out of range");
        if (!std::isfinite(value))
            throw validation_error("fixed phase must be finite");
        for (const AxisSpec& axis : sc.axes)
            if (axis.source_index == slot)
                throw validation_error("a swept phase slot cannot also be fixed");
    }
    if (sc.integration_time_s &&
        (!(*sc.integration_time_s > 0.0) || !std::isfinite(*sc.integration_time_s)))
        throw validation_error("integration time must be finite and > 0");

    InterferometerSpec work = spec;
    for (const auto& [slot, value] : sc.fixed_phases)
        work.sources[slot].phase_rad = value;

    ScanResult out;
    out.base = work;
    out.axes = sc.axes;
    out.integration_time_s = sc.integration_time_s;
    out.seed = sc.seed;
    out.axis_a_values = linspace(sc.axes[0].start_rad, sc.axes[0].stop_rad, sc.axes[0].points);
    std::size_t nb = 1;
    if (expected_axes == 2) {
        out.axis_b_values =
            linspace(sc.axes[1].start_rad, sc.axes[1].stop_rad, sc.axes[1].points);
        nb = out.axis_b_values.size();
    }

    const std::size_t total = out.axis_a_values.size() * nb;
    out.rates.reserve(total);
    out.phase_first.reserve(total);
    out.phase_last.reserve(total);
    for (double va : out.axis_a_values) {
        work.sources[sc.axes[0].source_index].phase_rad = va;
        for (std::size_t ib = 0; ib < nb; ++ib) {
            if (expected_axes == 2)
                work.sources[sc.axes[1].source_index].phase_rad = out.axis_b_values[ib];
            out.rates.push_back(pair_rate(work));
            const std::vector<double> phases = accumulated_phases(work);
            out.phase_first.push_back(phases.front());
            out.phase_last.push_back(phases.back());
        }
    }

    if (sc.integration_time_s) {
        out.counts.reserve(total);
        out.sigmas.reserve(total);
        for (std::size_t i = 0; i < out.rates.size(); ++i) {
            out.counts.push_back(
                monte_carlo_counts(out.rates[i], *sc.integration_time_s, mix_seed(sc.seed, i)));
            out.sigmas.push_back(std::sqrt(static_cast<double>(out.counts.back())));
        }
    }
    return out;
}

} // namespace detail

inline ScanResult scan_1d(const InterferometerSpec& spec, const ScanSpec& sc) {
    return detail::run_scan(spec, sc, 1);
}

inline ScanResult scan_2d(const InterferometerSpec& spec, const ScanSpec& sc) {
    return detail::run_scan(spec, sc, 2);
}

// Contrast of the last-source fringe when the two bracketing sources are
// balanced: the leading pair acts as one source of amplitude 2|cos(phi/2)|.
inline double analytic_visibility_balanced(double fixed_phase_rad) {
    const double alpha = 2.0 * std::fabs(std::cos(fixed_phase_rad / 2.0));
    return 2.0 * alpha / (alpha * alpha + 1.0);
}

inline double visibility_minmax(std::span<const double> series) {
    if (series.size() < 2)
        throw validation_error("visibility needs at least two samples");
    double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
    for (double value : series) {
        if (!(value >= 0.0) || !std::isfinite(value))
            throw validation_error("series values must be finite and >= 0");
        lo = std::min(lo, value);
        hi = std::max(hi, value);
    }
    if (hi + lo == 0.0)
        throw domain_error("visibility of an all-dark series is undefined");
    return (hi - lo) / (hi + lo);
}

inline double visibility_minmax(const ScanResult& result) {
    return visibility_minmax(std::span<const double>(result.rates));
}

struct FringeSample {
    double phase_rad = 0.0;
    double value = 0.0;
    double sigma = 0.0; // all zero means an unweighted fit
};

struct FringeFit {
    double offset = 0.0;
    double amplitude = 0.0;
    double phase0_rad = 0.0;
    double visibility = 0.0;
    double sigma_visibility = 0.0;
    double residual_rms = 0.0;
    bool converged = false;
    bool degenerate = false; // flat series, phase0 reported as 0
};

// Weighted least squares for y = offset * (1 + V cos(phi - phase0)). The model
// is linear in (offset, offset*V*cos(phase0), offset*V*sin(phase0)), so the
// minimum comes from the 3x3 normal equations in closed form.
inline FringeFit fit_sinusoid(std::span<const FringeSample> samples) {
    if (samples.size() < 4)
        throw validation_error("fit needs at least four samples");
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    std::size_t weighted = 0;
    for (const FringeSample& s : samples) {
        if (!std::isfinite(s.phase_rad) || !std::isfinite(s.value) || !(s.sigma >= 0.0))
            throw validation_error("fit samples must be finite with sigma >= 0");
        lo = std::min(lo, s.phase_rad);
        hi = std::max(hi, s.phase_rad);
        if (s.sigma > 0.0)
            ++weighted;
    }
    if (hi - lo < PI)
        throw validation_error("fit samples must span at least half a period");
    if (weighted != 0 && weighted != samples.size())
        throw validation_error("fit sigmas must be all zero or all positive");

    double m00 = 0, m01 = 0, m02 = 0, m11 = 0, m12 = 0, m22 = 0;
    double r0 = 0, r1 = 0, r2 = 0;
    for (const FringeSample& s : samples) {
        const double w = weighted ? 1.0 / (s.sigma * s.sigma) : 1.0;
        const double c = std::cos(s.phase_rad), sn = std::sin(s.phase_rad);
        m00 += w;
        m01 += w * c;
        m02 += w * sn;
        m11 += w * c * c;
        m12 += w * c * sn;
        m22 += w * sn * sn;
        r0 += w * s.value;
        r1 += w * s.value * c;
        r2 += w * s.value * sn;
    }

    FringeFit fit;
    const double det = m00 * (m11 * m22 - m12 * m12) - m01 * (m01 * m22 - m12 * m02) +
                       m02 * (m01 * m12 - m11 * m02);
    const double scale = std::max({std::fabs(m00), std::fabs(m11), std::fabs(m22)});
    if (!(std::fabs(det) > 1e-12 * scale * scale * scale)) {
        fit.offset = m00 > 0.0 ? r0 / m00 : 0.0; // best effort on a rank-deficient design
        return fit;
    }

    double cov[3][3];
    cov[0][0] = (m11 * m22 - m12 * m12) / det;
    cov[0][1] = (m02 * m12 - m01 * m22) / det;
    cov[0][2] = (m01 * m12 - m02 * m11) / det;
    cov[1][1] = (m00 * m22 - m02 * m02) / det;
    cov[1][2] = (m01 * m02 - m00 * m12) / det;
    cov[2][2] = (m00 * m11 - m01 * m01) / det;
    cov[1][0] = cov[0][1];
    cov[2][0] = cov[0][2];
    cov[2][1] = cov[1][2];

    const double c0 = cov[0][0] * r0 + cov[0][1] * r1 + cov[0][2] * r2;
    const double c1 = cov[1][0] * r0 + cov[1][1] * r1 + cov[1][2] * r2;
    const double c2 = cov[2][0] * r0 + cov[2][1] * r1 + cov[2][2] * r2;

    double rss = 0.0;
    for (const FringeSample& s : samples) {
        const double model = c0 + c1 * std::cos(s.phase_rad) + c2 * std::sin(s.phase_rad);
        rss += (s.value - model) * (s.value - model);
    }
    fit.residual_rms = std::sqrt(rss / static_cast<double>(samples.size()));

    // with unit weights the covariance picks up the residual variance
    if (!weighted) {
        const double s2 = rss / static_cast<double>(samples.size() - 3);
        for (auto& row : cov)
            for (double& entry : row)
                entry *= s2;
    }

    fit.offset = c0;
    fit.amplitude = std::hypot(c1, c2);
    if (!(c0 > 0.0))
        return fit; // a fringe without positive mean rate is not a fringe
    fit.converged = true;
    fit.visibility = fit.amplitude / fit.offset;

    if (fit.visibility < 1e-9) {
        fit.degenerate = true;
        fit.phase0_rad = 0.0;
        const double var = (cov[1][1] + cov[2][2]) / (fit.offset * fit.offset);
        fit.sigma_visibility = std::sqrt(std::max(var, 0.0));
        return fit;
    }

    fit.phase0_rad = std::atan2(c2, c1);
    const double g0 = -fit.amplitude / (c0 * c0);
    const double g1 = c1 / (fit.amplitude * c0);
    const double g2 = c2 / (fit.amplitude * c0);
    const double g[3] = {g0, g1, g2};
    double var = 0.0;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            var += g[i] * cov[i][j] * g[j];
    fit.sigma_visibility = std::sqrt(std::max(var, 0.0));
    return fit;
}

struct VisibilityEstimate {
    double value = 0.0;
    double sigma = 0.0;
};

// Min/max visibility of a count series with first-order error propagation.
// When no sigmas are given the counts are treated as Poisson (sigma = sqrt).
inline VisibilityEstimate visibility_with_errors(std::span<const double> counts,
                                                 std::span<const double> sigmas = {}) {
    if (counts.size() < 2)
        throw validation_error("visibility needs at least two samples");
    if (!sigmas.empty() && sigmas.size() != counts.size())
        throw validation_error("sigma series must match the count series");
    std::size_t imax = 0, imin = 0;
    for (std::size_t i = 0; i < counts.size(); ++i) {
        if (!(counts[i] >= 0.0) || !std::isfinite(counts[i]))
            throw validation_error("counts must be finite and >= 0");
        if (!sigmas.empty() && !(sigmas[i] >= 0.0))
            throw validation_error("sigmas must be >= 0");
        if (counts[i] > counts[imax])
            imax = i;
        if (counts[i] < counts[imin])
            imin = i;
    }
    const double top = counts[imax], bot = counts[imin];
    if (top + bot == 0.0)
        throw domain_error("visibility of an all-dark series is undefined");

    VisibilityEstimate est;
    est.value = (top - bot) / (top + bot);
    const double sigma_top = sigmas.empty() ? std::sqrt(top) : sigmas[imax];
    const double sigma_bot = sigmas.empty() ? std::sqrt(bot) : sigmas[imin];
    const double denom = (top + bot) * (top + bot);
    est.sigma = std::hypot(2.0 * bot / denom * sigma_top, 2.0 * top / denom * sigma_bot);
    return est;
}

} // namespace pathid

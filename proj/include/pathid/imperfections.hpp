#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "pathid/errors.hpp"
#include "pathid/model.hpp"

// Experimental nonidealities: gaussian mode overlaps under misalignment,
// yield imbalance, path length coherence windows, and chaining measured
// contrasts to the pair that was never measured directly.

namespace pathid {

struct BeamParams {
    double waist_m = 50e-6;
    double wavelength_m = 810e-9;
    double propagation_distance_m = 0.0; // bookkeeping; overlaps need waist and wavelength
};

inline void validate(const BeamParams& beam) {
    if (!(beam.waist_m > 0.0) || !std::isfinite(beam.waist_m))
        throw validation_error("beam waist must be finite and > 0");
    if (!(beam.wavelength_m > 0.0) || !std::isfinite(beam.wavelength_m))
        throw validation_error("wavelength must be finite and > 0");
    if (!(beam.propagation_distance_m >= 0.0) || !std::isfinite(beam.propagation_distance_m))
        throw validation_error("propagation distance must be finite and >= 0");
}

struct AlignmentError {
    double longitudinal_m = 0.0;
    double transverse_m = 0.0;
    double tilt_rad = 0.0;
};

inline double rayleigh_range(const BeamParams& beam) {
    validate(beam);
    return PI * beam.waist_m * beam.waist_m / beam.wavelength_m;
}

inline double divergence_angle(const BeamParams& beam) {
    validate(beam);
    return beam.wavelength_m / (PI * beam.waist_m);
}

inline double overlap_transverse(double offset_m, const BeamParams& beam) {
    validate(beam);
    if (!std::isfinite(offset_m))
        throw validation_error("transverse offset must be finite");
    const double x = offset_m / beam.waist_m;
    return std::exp(-0.5 * x * x);
}

// Gaussian decay in tilt over the divergence angle; the decay constant is
// fixed once per geometry by calibrate_tilt.
inline double overlap_tilt(double tilt_rad, const BeamParams& beam, double calibration) {
    validate(beam);
    if (!(calibration > 0.0) || !std::isfinite(calibration))
        throw validation_error("tilt calibration must be finite and > 0");
    if (!std::isfinite(tilt_rad))
        throw validation_error("tilt must be finite");
    const double x = tilt_rad / divergence_angle(beam);
    return std::exp(-calibration * x * x);
}

inline double calibrate_tilt(const BeamParams& beam, double reference_tilt_rad,
                             double target_overlap) {
    validate(beam);
    if (reference_tilt_rad == 0.0 || !std::isfinite(reference_tilt_rad))
        throw validation_error("reference tilt must be finite and nonzero");
    if (!(target_overlap > 0.0) || !(target_overlap < 1.0))
        throw validation_error("target overlap must sit inside (0, 1)");
    const double x = reference_tilt_rad / divergence_angle(beam);
    return -std::log(target_overlap) / (x * x);
}

inline double overlap_longitudinal(double offset_m, const BeamParams& beam) {
    if (!std::isfinite(offset_m))
        throw validation_error("longitudinal offset must be finite");
    const double x = offset_m / (2.0 * rayleigh_range(beam));
    return std::pow(1.0 + x * x, -0.25);
}

inline double visibility_from_overlap(double overlap) {
    if (!(overlap >= 0.0) || !(overlap <= 1.0))
        throw validation_error("mode overlap outside [0, 1]");
    return overlap;
}

inline double distinguishability_from_overlap(double overlap) {
    visibility_from_overlap(overlap);
    return std::sqrt(1.0 - overlap * overlap);
}

// Contrast of the last-source fringe with intensity ratios (B/A, C/A) and the
// first phase parked at fixed_phase: the leading pair collapses to one
// amplitude alpha, and the fringe contrast is 2 |alpha| c / (|alpha|^2 + c^2).
inline double imbalance_visibility(double ratio_b, double ratio_c, double fixed_phase_rad) {
    if (!(ratio_b >= 0.0) || !std::isfinite(ratio_b) || !(ratio_c >= 0.0) ||
        !std::isfinite(ratio_c))
        throw validation_error("intensity ratios must be finite and >= 0");
    if (!std::isfinite(fixed_phase_rad))
        throw validation_error("fixed phase must be finite");
    const Complex alpha = std::polar(1.0, fixed_phase_rad) + Complex{std::sqrt(ratio_b), 0.0};
    const double c = std::sqrt(ratio_c);
    const double denom = std::norm(alpha) + c * c;
    if (denom == 0.0)
        throw domain_error("all amplitudes vanish; no fringe to grade");
    return 2.0 * std::abs(alpha) * c / denom;
}

struct SourcePathLengths {
    double pump_m = 0.0;
    double spdc_m = 0.0;   // pump-wavelength path through and past the source
    double signal_m = 0.0; // downconverted arms
    double idler_m = 0.0;
};

struct OPLDSpec {
    std::vector<SourcePathLengths> paths; // ordered like the sources
    double pump_coherence_length_m = 0.0;
    double spdc_coherence_length_m = 0.0;
};

struct PairFeasibility {
    std::size_t i = 0;
    std::size_t j = 0;
    bool pump_ok = false;
    bool spdc_ok = false;
    double pump_margin_m = 0.0; // window minus mismatch; negative means broken
    double spdc_margin_m = 0.0;
};

struct OPLDResult {
    std::vector<PairFeasibility> pairs; // every i < j
    bool all_ok = true;
};

// Non-strict windows: a mismatch exactly at the coherence length passes.
inline OPLDResult opld_feasible(const OPLDSpec& spec) {
    if (spec.paths.size() < 2)
        throw validation_error("path feasibility needs at least two sources");
    if (!(spec.pump_coherence_length_m > 0.0) || !std::isfinite(spec.pump_coherence_length_m))
        throw validation_error("pump coherence length must be finite and > 0");
    if (!(spec.spdc_coherence_length_m > 0.0) || !std::isfinite(spec.spdc_coherence_length_m))
        throw validation_error("downconversion coherence length must be finite and > 0");
    for (const SourcePathLengths& path : spec.paths)
        if (!std::isfinite(path.pump_m) || !std::isfinite(path.spdc_m) ||
            !std::isfinite(path.signal_m) || !std::isfinite(path.idler_m))
            throw validation_error("path lengths must be finite");

    OPLDResult out;
    for (std::size_t i = 0; i < spec.paths.size(); ++i) {
        for (std::size_t j = i + 1; j < spec.paths.size(); ++j) {
            const SourcePathLengths& a = spec.paths[i];
            const SourcePathLengths& b = spec.paths[j];
            PairFeasibility pair;
            pair.i = i;
            pair.j = j;
            const double pump_mismatch =
                std::fabs((a.pump_m + a.spdc_m) - (b.pump_m + b.spdc_m));
            const double spdc_mismatch =
                std::fabs((b.signal_m - b.idler_m) - (a.signal_m - a.idler_m));
            pair.pump_margin_m = spec.pump_coherence_length_m - pump_mismatch;
            pair.spdc_margin_m = spec.spdc_coherence_length_m - spdc_mismatch;
            pair.pump_ok = pair.pump_margin_m >= 0.0;
            pair.spdc_ok = pair.spdc_margin_m >= 0.0;
            out.all_ok = out.all_ok && pair.pump_ok && pair.spdc_ok;
            out.pairs.push_back(pair);
        }
    }
    return out;
}

// Chains the two measured contrasts through their implied per-source
// coherences to the pair with no common fringe recorded.
inline double estimate_unmeasured_visibility(double v12, double v23, double y1, double y2,
                                             double y3) {
    for (double v : {v12, v23})
        if (!(v >= 0.0) || !(v <= 1.0))
            throw validation_error("measured visibilities must sit in [0, 1]");
    for (double y : {y1, y2, y3})
        if (!(y > 0.0) || !std::isfinite(y))
            throw validation_error("yields must be finite and > 0");

    auto implied_cos = [](double v, double ya, double yb, const char* which) {
        const double cos_e = v * (ya + yb) / (2.0 * std::sqrt(ya * yb));
        if (cos_e > 1.0 + 1e-12)
            throw domain_error(std::string("inconsistent inputs: ") + which +
                               " implies coherence above 1");
        return std::min(cos_e, 1.0);
    };
    const double cos_e1 = implied_cos(v12, y1, y2, "v12");
    const double cos_e3 = implied_cos(v23, y2, y3, "v23");
    return 2.0 * std::sqrt(y1 * y3) * cos_e1 * cos_e3 / (y1 + y3);
}

} // namespace pathid

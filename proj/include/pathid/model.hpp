#pragma once

#include <cmath>
#include <complex>
#include <string>
#include <unordered_set>
#include <vector>

#include "pathid/errors.hpp"

// Coherent-source model of a multi-crystal pair interferometer. Each source
// emits pairs at yield_hz when alone; interference between sources is set by
// their phases and reduced by a per-source leak angle that diverts amplitude
// into a mode orthogonal to everything else.

namespace pathid {

using Complex = std::complex<double>;

inline constexpr double PI = 3.141592653589793238462643383279502884;

enum class PhaseConvention {
    absolute,  // each slot holds the source's full phase
    cumulative // each slot holds the increment over the previous source
};

struct SourceSpec {
    std::string label;
    double yield_hz = 0.0;   // pair rate with this source alone
    double phase_rad = 0.0;  // meaning depends on the convention
    double leak_rad = 0.0;   // in [0, pi/2]; sin^2 leaks out of the common mode
};

struct InterferometerSpec {
    std::vector<SourceSpec> sources; // ordered along the pump path
    PhaseConvention convention = PhaseConvention::absolute;

    std::size_t size() const { return sources.size(); }
};

inline void validate(const InterferometerSpec& spec) {
    if (spec.sources.empty())
        throw validation_error("interferometer needs at least one source");
    std::unordered_set<std::string> seen;
    for (const SourceSpec& s : spec.sources) {
        if (s.label.empty())
            throw validation_error("source label must not be empty");
        if (!seen.insert(s.label).second)
            throw validation_error("duplicate source label: " + s.label);
        if (!(s.yield_hz >= 0.0) || !std::isfinite(s.yield_hz))
            throw validation_error("source " + s.label + ": yield_hz must be finite and >= 0");
        if (!std::isfinite(s.phase_rad))
            throw validation_error("source " + s.label + ": phase must be finite");
        if (!(s.leak_rad >= 0.0) || !(s.leak_rad <= PI / 2))
            throw validation_error("source " + s.label + ": leak angle outside [0, pi/2]");
    }
}

inline Complex source_amplitude(const SourceSpec& s) {
    return std::polar(std::sqrt(s.yield_hz), s.phase_rad);
}

// Phase each source contributes with, resolved to absolute values.
inline std::vector<double> accumulated_phases(const InterferometerSpec& spec) {
    std::vector<double> phases;
    phases.reserve(spec.sources.size());
    double running = 0.0;
    for (const SourceSpec& s : spec.sources) {
        if (spec.convention == PhaseConvention::cumulative) {
            running += s.phase_rad;
            phases.push_back(running);
        } else {
            phases.push_back(s.phase_rad);
        }
    }
    return phases;
}

inline InterferometerSpec to_absolute(const InterferometerSpec& spec) {
    InterferometerSpec out = spec;
    const std::vector<double> phases = accumulated_phases(spec);
    for (std::size_t k = 0; k < out.sources.size(); ++k)
        out.sources[k].phase_rad = phases[k];
    out.convention = PhaseConvention::absolute;
    return out;
}

inline InterferometerSpec to_cumulative(const InterferometerSpec& spec) {
    InterferometerSpec out = spec;
    if (spec.convention == PhaseConvention::cumulative)
        return out;
    double previous = 0.0;
    for (std::size_t k = 0; k < out.sources.size(); ++k) {
        const double absolute = spec.sources[k].phase_rad;
        out.sources[k].phase_rad = absolute - previous;
        previous = absolute;
    }
    out.convention = PhaseConvention::cumulative;
    return out;
}

// One common mode plus one leak mode per source; amplitudes[0] is common,
// amplitudes[k] belongs to source k-1 alone.
struct FockVector {
    std::vector<Complex> amplitudes;

    double squared_norm() const {
        double total = 0.0;
        for (const Complex& a : amplitudes)
            total += std::norm(a);
        return total;
    }
};

inline FockVector fock_state(const InterferometerSpec& spec) {
    const std::vector<double> phases = accumulated_phases(spec);
    FockVector fock;
    fock.amplitudes.assign(spec.sources.size() + 1, Complex{0.0, 0.0});
    for (std::size_t k = 0; k < spec.sources.size(); ++k) {
        const SourceSpec& s = spec.sources[k];
        const double magnitude = std::sqrt(s.yield_hz);
        const Complex rotor = std::polar(1.0, phases[k]);
        fock.amplitudes[0] += magnitude * std::cos(s.leak_rad) * rotor;
        fock.amplitudes[k + 1] = magnitude * std::sin(s.leak_rad) * rotor;
    }
    return fock;
}

// Total amplitude of a fully coherent interferometer. Leaky sources have no
// single complex amplitude, so any nonzero leak is rejected.
inline Complex total_amplitude(const InterferometerSpec& spec) {
    for (const SourceSpec& s : spec.sources)
        if (s.leak_rad != 0.0)
            throw domain_error("source " + s.label +
                               " has a nonzero leak angle; no scalar amplitude exists");
    const std::vector<double> phases = accumulated_phases(spec);
    Complex total{0.0, 0.0};
    for (std::size_t k = 0; k < spec.sources.size(); ++k)
        total += std::polar(std::sqrt(spec.sources[k].yield_hz), phases[k]);
    return total;
}

// Pair rate normalized so a lone source emits exactly its yield.
inline double pair_rate(const InterferometerSpec& spec) {
    return fock_state(spec).squared_norm();
}

// Two-source fringe with every other source switched off and the relative
// phase dialed directly: y_i + y_j + 2 sqrt(y_i y_j) cos(e_i) cos(e_j) cos(phi).
inline double pairwise_rate(const InterferometerSpec& spec, std::size_t i, std::size_t j,
                            double relative_phase_rad) {
    if (i >= spec.sources.size() || j >= spec.sources.size())
        throw validation_error("pairwise_rate: source index out of range");
    if (i == j)
        throw validation_error("pairwise_rate: needs two distinct sources");
    const SourceSpec& a = spec.sources[i];
    const SourceSpec& b = spec.sources[j];
    return a.yield_hz + b.yield_hz +
           2.0 * std::sqrt(a.yield_hz * b.yield_hz) * std::cos(a.leak_rad) *
               std::cos(b.leak_rad) * std::cos(relative_phase_rad);
}

} // namespace pathid

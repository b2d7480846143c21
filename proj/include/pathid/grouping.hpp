#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "pathid/errors.hpp"
#include "pathid/model.hpp"

// Partitioning sources into compound emitters: which-block visibility and
// distinguishability, blocking experiments, and the attribution bookkeeping
// that turns blocking counts into origin probabilities.

namespace pathid {

struct Grouping {
    std::vector<std::vector<std::size_t>> blocks; // disjoint cover of the sources
    std::vector<std::string> labels;              // optional, one per block
};

inline void validate(const Grouping& grouping, std::size_t source_count) {
    if (grouping.blocks.empty())
        throw validation_error("grouping needs at least one block");
    if (!grouping.labels.empty() && grouping.labels.size() != grouping.blocks.size())
        throw validation_error("grouping labels must match the block count");
    std::vector<char> seen(source_count, 0);
    for (const auto& block : grouping.blocks) {
        if (block.empty())
            throw validation_error("grouping blocks must not be empty");
        for (std::size_t k : block) {
            if (k >= source_count)
                throw validation_error("grouping refers to a source index out of range");
            if (seen[k]++)
                throw validation_error("grouping assigns a source to two blocks");
        }
    }
    for (std::size_t k = 0; k < source_count; ++k)
        if (!seen[k])
            throw validation_error("grouping leaves a source unassigned");
}

// Compound amplitude of a block. Only defined while every member stays in the
// common mode, so any leak inside the block is rejected.
inline Complex effective_amplitude(const InterferometerSpec& spec,
                                   const std::vector<std::size_t>& block) {
    const std::vector<double> phases = accumulated_phases(spec);
    Complex total{0.0, 0.0};
    for (std::size_t k : block) {
        if (k >= spec.sources.size())
            throw validation_error("effective_amplitude: source index out of range");
        const SourceSpec& s = spec.sources[k];
        if (s.leak_rad != 0.0)
            throw domain_error("effective_amplitude: source " + s.label +
                               " leaks out of the common mode");
        total += std::polar(std::sqrt(s.yield_hz), phases[k]);
    }
    return total;
}

inline double two_source_visibility(Complex a1, Complex a2) {
    const double denom = std::norm(a1) + std::norm(a2);
    if (denom == 0.0)
        throw domain_error("visibility of two dark amplitudes is undefined");
    return 2.0 * std::abs(a1) * std::abs(a2) / denom;
}

inline double distinguishability(Complex a1, Complex a2) {
    const double denom = std::norm(a1) + std::norm(a2);
    if (denom == 0.0)
        throw domain_error("distinguishability of two dark amplitudes is undefined");
    return std::abs(std::norm(a1) - std::norm(a2)) / denom;
}

struct DualityRecord {
    double visibility = 0.0;
    double distinguishability = 0.0;
    double visibility_sq = 0.0;
    double distinguishability_sq = 0.0;
    double sum_sq = 0.0;

    // Record from already-measured values rather than model amplitudes.
    static DualityRecord from_values(double visibility, double distinguishability) {
        if (!(visibility >= 0.0) || !(visibility <= 1.0))
            throw validation_error("visibility outside [0, 1]");
        if (!(distinguishability >= 0.0) || !(distinguishability <= 1.0))
            throw validation_error("distinguishability outside [0, 1]");
        DualityRecord rec;
        rec.visibility = visibility;
        rec.distinguishability = distinguishability;
        rec.visibility_sq = visibility * visibility;
        rec.distinguishability_sq = distinguishability * distinguishability;
        rec.sum_sq = rec.visibility_sq + rec.distinguishability_sq;
        return rec;
    }
};

inline DualityRecord duality_record(Complex a1, Complex a2) {
    return DualityRecord::from_values(two_source_visibility(a1, a2),
                                      distinguishability(a1, a2));
}

// Pair rate with the listed sources switched off (their yields zeroed).
inline double block_experiment(const InterferometerSpec& spec,
                               const std::vector<std::size_t>& blocked) {
    InterferometerSpec reduced = spec;
    for (std::size_t k : blocked) {
        if (k >= reduced.sources.size())
            throw validation_error("block_experiment: source index out of range");
        reduced.sources[k].yield_hz = 0.0;
    }
    return pair_rate(reduced);
}

struct AttributionResult {
    double p_first = 0.0; // fraction attributed to the first source, clamped to [0, 1]
    double p_last = 0.0;  // fraction attributed to the last source, clamped to [0, 1]
    double raw_p_first = 0.0;
    double raw_p_last = 0.0;
    bool contradiction = false; // the two fractions overlap
    bool clamped = false;
    double cc_total = 0.0;
    double cc_last_blocked = 0.0;
    double cc_first_blocked = 0.0;
};

// Origin probabilities from blocking counts: whatever survives blocking a
// source cannot have come from it, so the complement is attributed to it.
inline AttributionResult attribution(double cc_total, double cc_when_last_blocked,
                                     double cc_when_first_blocked) {
    if (!(cc_total >= 0.0) || !(cc_when_last_blocked >= 0.0) || !(cc_when_first_blocked >= 0.0))
        throw validation_error("attribution: counts must be >= 0");
    if (cc_total == 0.0)
        throw domain_error("attribution undefined without coincidences");

    AttributionResult out;
    out.cc_total = cc_total;
    out.cc_last_blocked = cc_when_last_blocked;
    out.cc_first_blocked = cc_when_first_blocked;
    out.raw_p_last = (cc_total - cc_when_last_blocked) / cc_total;
    out.raw_p_first = (cc_total - cc_when_first_blocked) / cc_total;
    auto clamp01 = [&out](double p) {
        if (p < 0.0 || p > 1.0)
            out.clamped = true;
        return p < 0.0 ? 0.0 : (p > 1.0 ? 1.0 : p);
    };
    out.p_last = clamp01(out.raw_p_last);
    out.p_first = clamp01(out.raw_p_first);
    out.contradiction = out.p_first + out.p_last > 1.0;
    return out;
}

struct BlockReport {
    std::string label;
    std::vector<std::size_t> members;
    Complex amplitude{0.0, 0.0};
    double rate_with_block_removed = 0.0;
    bool dark = false; // amplitude consistent with zero at the report tolerance
};

struct PerspectiveReport {
    std::vector<BlockReport> blocks;   // exactly two
    int attributed_block = -1;         // index into blocks, -1 when uncertain
    bool full_attribution = false;     // one block dark, the other live
};

struct GedankenReport {
    double total_rate = 0.0;
    PerspectiveReport upstream_pair;   // {first, middle} vs {last}
    PerspectiveReport downstream_pair; // {first} vs {middle, last}
    std::optional<AttributionResult> attribution; // empty when nothing is emitted
    bool contradiction = false;        // both perspectives certain, about disjoint sources
    double phase_tolerance_rad = 0.0;
};

namespace detail {

inline PerspectiveReport perspective(const InterferometerSpec& spec,
                                     const std::vector<std::vector<std::size_t>>& blocks,
                                     double phase_tolerance_rad) {
    PerspectiveReport report;
    for (const auto& members : blocks) {
        BlockReport block;
        block.members = members;
        for (std::size_t k : members) {
            if (!block.label.empty())
                block.label += '+';
            block.label += spec.sources[k].label;
        }
        block.amplitude = effective_amplitude(spec, members);
        block.rate_with_block_removed = block_experiment(spec, members);
        // a small phase error delta moves the amplitude by at most sum(sqrt(y)) * delta
        double scale = 0.0;
        for (std::size_t k : members)
            scale += std::sqrt(spec.sources[k].yield_hz);
        block.dark = std::abs(block.amplitude) <= phase_tolerance_rad * scale;
        report.blocks.push_back(std::move(block));
    }
    if (report.blocks[0].dark != report.blocks[1].dark) {
        report.full_attribution = true;
        report.attributed_block = report.blocks[0].dark ? 1 : 0;
    }
    return report;
}

} // namespace detail

// Walks the two natural two-block splits of a three-source interferometer and
// asks each whether blocking settles where the pairs come from. Certainty on
// both sides about different sources is flagged as the contradiction.
inline GedankenReport gedanken_report(const InterferometerSpec& spec,
                                      double phase_tolerance_rad = 1e-9) {
    if (spec.sources.size() != 3)
        throw validation_error("gedanken_report is defined for exactly three sources");
    if (!(phase_tolerance_rad >= 0.0))
        throw validation_error("phase tolerance must be >= 0");

    GedankenReport report;
    report.phase_tolerance_rad = phase_tolerance_rad;
    report.total_rate = pair_rate(spec);
    report.upstream_pair = detail::perspective(spec, {{0, 1}, {2}}, phase_tolerance_rad);
    report.downstream_pair = detail::perspective(spec, {{0}, {1, 2}}, phase_tolerance_rad);

    if (report.total_rate > 0.0)
        report.attribution = attribution(report.total_rate, block_experiment(spec, {2}),
                                         block_experiment(spec, {0}));

    if (report.upstream_pair.full_attribution && report.downstream_pair.full_attribution) {
        const auto& a = report.upstream_pair.blocks[report.upstream_pair.attributed_block];
        const auto& b = report.downstream_pair.blocks[report.downstream_pair.attributed_block];
        bool overlap = false;
        for (std::size_t i : a.members)
            for (std::size_t j : b.members)
                overlap |= (i == j);
        report.contradiction = !overlap;
    }
    return report;
}

} // namespace pathid

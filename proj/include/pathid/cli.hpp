#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "pathid/config.hpp"
#include "pathid/errors.hpp"
#include "pathid/grouping.hpp"
#include "pathid/imperfections.hpp"
#include "pathid/model.hpp"
#include "pathid/output.hpp"
#include "pathid/scan.hpp"

namespace pathid::cli {

// Exit codes are the tool's contract with wrapping scripts.
inline constexpr int EXIT_OK = 0;
inline constexpr int EXIT_VALIDATION = 2; // malformed usage, config, or input
inline constexpr int EXIT_DOMAIN = 3;     // well-formed input with no defined result

namespace detail {

using nlohmann::json;
using pathid::detail::config_fail;

struct SectionUse {
    const char* command;
    const char* section; // nullptr when the command needs no extra section
};

// Each config section belongs to exactly one subcommand. A config may carry
// only the section its command consumes, so a file never mixes contracts.
inline void enforce_section_ownership(const RunConfig& config, const std::string& command) {
    static constexpr SectionUse uses[] = {
        {"rate", nullptr},       {"scan", "scan"},
        {"duality", "grouping"}, {"block", "block"},
        {"gedanken", "gedanken"}, {"imperfect", "imperfections"},
        {"estimate-v13", "estimate_v13"}, {"opld", "opld"},
    };
    const char* allowed = nullptr;
    bool known = false;
    for (const SectionUse& use : uses) {
        if (command == use.command) {
            allowed = use.section;
            known = true;
        }
    }
    if (!known)
        config_fail("unknown command '" + command + "'");

    const std::pair<const char*, bool> sections[] = {
        {"scan", config.scan.has_value()},
        {"grouping", config.grouping.has_value()},
        {"block", config.block.has_value()},
        {"imperfections", config.imperfections.has_value()},
        {"estimate_v13", config.estimate_v13.has_value()},
        {"opld", config.opld.has_value()},
        {"gedanken", config.has_gedanken_section},
    };
    bool have_required = allowed == nullptr;
    for (const auto& [name, present] : sections) {
        const bool owned = allowed != nullptr && std::string(name) == allowed;
        if (owned && present)
            have_required = true;
        if (present && !owned)
            config_fail("config section '" + std::string(name) + "' does not belong to command '" +
                        command + "'");
    }
    // The gedanken section only tunes a tolerance, so its absence is fine.
    if (!have_required && std::string(allowed) != "gedanken")
        config_fail("command '" + command + "' needs config section '" + std::string(allowed) +
                    "'");
}

inline json amplitude_json(Complex a) {
    return {{"re", round_sig(a.real())},
            {"im", round_sig(a.imag())},
            {"magnitude", round_sig(std::abs(a))}};
}

inline json labels_json(const InterferometerSpec& spec, const std::vector<std::size_t>& slots) {
    json labels = json::array();
    for (std::size_t slot : slots)
        labels.push_back(spec.sources[slot].label);
    return labels;
}

inline json run_rate(const RunConfig& config) {
    return {{"rate_hz", round_sig(pair_rate(config.interferometer))}};
}

inline json run_duality(const RunConfig& config) {
    const Grouping& grouping = *config.grouping;
    if (grouping.blocks.size() != 2)
        config_fail("duality needs a grouping with exactly two blocks");
    const Complex a1 = effective_amplitude(config.interferometer, grouping.blocks[0]);
    const Complex a2 = effective_amplitude(config.interferometer, grouping.blocks[1]);
    const DualityRecord record = duality_record(a1, a2);

    json blocks = json::array();
    for (std::size_t b = 0; b < 2; ++b) {
        const Complex a = b == 0 ? a1 : a2;
        blocks.push_back({{"label", grouping.labels[b]},
                          {"members", labels_json(config.interferometer, grouping.blocks[b])},
                          {"amplitude", amplitude_json(a)},
                          {"rate_hz", round_sig(std::norm(a))}});
    }
    return {{"blocks", std::move(blocks)},
            {"visibility", round_sig(record.visibility)},
            {"distinguishability", round_sig(record.distinguishability)},
            {"visibility_sq", round_sig(record.visibility_sq)},
            {"distinguishability_sq", round_sig(record.distinguishability_sq)},
            {"duality_sum", round_sig(record.sum_sq)}};
}

inline json run_block(const RunConfig& config) {
    const double unblocked = pair_rate(config.interferometer);
    const double blocked = block_experiment(config.interferometer, config.block->blocked);
    return {{"blocked", labels_json(config.interferometer, config.block->blocked)},
            {"rate_hz", round_sig(blocked)},
            {"unblocked_rate_hz", round_sig(unblocked)}};
}

inline json attribution_json(const AttributionResult& attribution) {
    return {{"p_first", round_sig(attribution.p_first)},
            {"p_last", round_sig(attribution.p_last)},
            {"raw_p_first", round_sig(attribution.raw_p_first)},
            {"raw_p_last", round_sig(attribution.raw_p_last)},
            {"contradiction", attribution.contradiction},
            {"clamped", attribution.clamped},
            {"counts",
             {{"total", round_sig(attribution.cc_total)},
              {"last_blocked", round_sig(attribution.cc_last_blocked)},
              {"first_blocked", round_sig(attribution.cc_first_blocked)}}}};
}

inline json perspective_json(const PerspectiveReport& perspective) {
    json blocks = json::array();
    for (const BlockReport& block : perspective.blocks) {
        blocks.push_back({{"label", block.label},
                          {"amplitude", amplitude_json(block.amplitude)},
                          {"rate_with_block_removed", round_sig(block.rate_with_block_removed)},
                          {"dark", block.dark}});
    }
    json out;
    out["blocks"] = std::move(blocks);
    out["full_attribution"] = perspective.full_attribution;
    out["attributed"] = perspective.attributed_block < 0
                            ? json(nullptr)
                            : json(perspective.blocks[perspective.attributed_block].label);
    return out;
}

inline json run_gedanken(const RunConfig& config) {
    const GedankenReport report =
        gedanken_report(config.interferometer, config.gedanken_phase_tolerance_rad);
    json out;
    out["total_rate_hz"] = round_sig(report.total_rate);
    out["upstream_pair"] = perspective_json(report.upstream_pair);
    out["downstream_pair"] = perspective_json(report.downstream_pair);
    out["attribution"] = report.attribution ? attribution_json(*report.attribution) : json(nullptr);
    out["contradiction"] = report.contradiction;
    out["phase_tolerance"] = round_sig(report.phase_tolerance_rad);
    return out;
}

inline json run_imperfect(const RunConfig& config) {
    const ImperfectionConfig& imp = *config.imperfections;
    const double calibration = calibrate_tilt(imp.beam, imp.tilt_calibration.reference_tilt_rad,
                                              imp.tilt_calibration.target_overlap);
    const double transverse = overlap_transverse(imp.alignment.transverse_m, imp.beam);
    const double tilt = overlap_tilt(imp.alignment.tilt_rad, imp.beam, calibration);
    const double longitudinal = overlap_longitudinal(imp.alignment.longitudinal_m, imp.beam);
    // independent degrees of freedom, so the mode overlaps multiply
    const double combined = transverse * tilt * longitudinal;
    const DualityRecord record = DualityRecord::from_values(
        visibility_from_overlap(combined), distinguishability_from_overlap(combined));

    json out;
    out["tilt_calibration"] = round_sig(calibration);
    out["divergence_angle"] = round_sig(divergence_angle(imp.beam));
    out["rayleigh_range_m"] = round_sig(rayleigh_range(imp.beam));
    out["overlap"] = {{"transverse", round_sig(transverse)},
                      {"tilt", round_sig(tilt)},
                      {"longitudinal", round_sig(longitudinal)},
                      {"combined", round_sig(combined)}};
    out["visibility"] = round_sig(record.visibility);
    out["distinguishability"] = round_sig(record.distinguishability);
    out["duality_sum"] = round_sig(record.sum_sq);
    if (imp.imbalance)
        out["imbalance_visibility"] = round_sig(imbalance_visibility(
            imp.imbalance->ratio_b, imp.imbalance->ratio_c, imp.imbalance->relative_phase_rad));
    return out;
}

inline json run_estimate_v13(const RunConfig& config) {
    const V13Config& v13 = *config.estimate_v13;
    const double estimate = estimate_unmeasured_visibility(
        v13.v12, v13.v23, v13.yields_hz[0], v13.yields_hz[1], v13.yields_hz[2]);
    return {{"visibility_13", round_sig(estimate)}};
}

inline json run_opld(const RunConfig& config) {
    if (config.opld->paths.size() != config.interferometer.size())
        config_fail("opld.paths must list one entry per interferometer source");
    const OPLDResult result = opld_feasible(*config.opld);
    json pairs = json::array();
    for (const PairFeasibility& pair : result.pairs) {
        pairs.push_back({{"i", pair.i},
                         {"j", pair.j},
                         {"labels", labels_json(config.interferometer, {pair.i, pair.j})},
                         {"pump_ok", pair.pump_ok},
                         {"spdc_ok", pair.spdc_ok},
                         {"ok", pair.pump_ok && pair.spdc_ok},
                         {"pump_margin_m", round_sig(pair.pump_margin_m)},
                         {"spdc_margin_m", round_sig(pair.spdc_margin_m)}});
    }
    return {{"all_ok", result.all_ok}, {"pairs", std::move(pairs)}};
}

inline ScanResult run_scan_command(const RunConfig& config) {
    ScanSpec sc = *config.scan;
    sc.seed = config.seed;
    return sc.axes.size() == 1 ? scan_1d(config.interferometer, sc)
                               : scan_2d(config.interferometer, sc);
}

inline void write_document(std::ostream& os, const std::string& command, OutputFormat format,
                           const json& echo, const ScanResult* scan, const json& payload) {
    if (format == OutputFormat::csv && scan != nullptr)
        write_scan_csv(os, *scan, echo);
    else if (format == OutputFormat::csv)
        write_kv_csv(os, echo, payload);
    else
        write_json_document(os, command, echo, payload);
}

} // namespace detail

// Entry point shared by main() and the tests. Arguments come in natural
// order without the program name.
inline int run(std::vector<std::string> args, std::ostream& out = std::cout,
               std::ostream& err = std::cerr) {
    CLI::App app{"Multi-crystal path-identity interferometer toolkit"};
    app.name("pathid");
    app.require_subcommand(1);

    std::string config_path;
    std::string out_override;
    std::string format_override;
    std::uint64_t seed_override = 0;

    static constexpr std::pair<const char*, const char*> commands[] = {
        {"rate", "Coincidence rate of the configured interferometer"},
        {"scan", "Sweep one or two phase slots and tabulate rates"},
        {"duality", "Visibility and distinguishability of a two-block grouping"},
        {"block", "Coincidence rate with chosen sources blocked"},
        {"gedanken", "Blocking-based which-source attribution from both pairings"},
        {"imperfect", "Mode overlap factors and the fringe contrast they allow"},
        {"estimate-v13", "Infer the unmeasured visibility from two measured ones"},
        {"opld", "Check path-length differences against coherence windows"},
    };
    for (const auto& [name, description] : commands) {
        CLI::App* sub = app.add_subcommand(name, description);
        sub->add_option("--config", config_path, "JSON config file")->required();
        sub->add_option("--out", out_override, "output file path, '-' or empty for stdout");
        sub->add_option("--format", format_override, "output format")
            ->check(CLI::IsMember({"csv", "json"}));
        sub->add_option("--seed", seed_override, "override the config seed");
    }

    try {
        std::reverse(args.begin(), args.end());
        app.parse(args);
    } catch (const CLI::CallForHelp& help) {
        out << app.help();
        return EXIT_OK;
    } catch (const CLI::ParseError& error) {
        err << "error: " << error.what() << '\n';
        return EXIT_VALIDATION;
    }

    CLI::App* sub = app.get_subcommands().front();
    const std::string command = sub->get_name();

    try {
        RunConfig config = load_config(config_path);
        if (sub->get_option("--seed")->count() > 0)
            config.seed = seed_override;
        if (sub->get_option("--out")->count() > 0)
            config.output.path = out_override == "-" ? std::string() : out_override;
        if (sub->get_option("--format")->count() > 0)
            config.output.format =
                format_override == "csv" ? OutputFormat::csv : OutputFormat::json;
        detail::enforce_section_ownership(config, command);

        // every command but scan reports scalars, where JSON reads better
        const OutputFormat format = config.output.format.value_or(
            command == "scan" ? OutputFormat::csv : OutputFormat::json);
        config.output.format = format;
        const nlohmann::json echo = effective_config(config);

        std::optional<ScanResult> scan;
        nlohmann::json payload;
        if (command == "rate")
            payload = detail::run_rate(config);
        else if (command == "scan") {
            scan = detail::run_scan_command(config);
            payload = scan_payload(*scan);
        } else if (command == "duality")
            payload = detail::run_duality(config);
        else if (command == "block")
            payload = detail::run_block(config);
        else if (command == "gedanken")
            payload = detail::run_gedanken(config);
        else if (command == "imperfect")
            payload = detail::run_imperfect(config);
        else if (command == "estimate-v13")
            payload = detail::run_estimate_v13(config);
        else
            payload = detail::run_opld(config);

        if (config.output.path.empty()) {
            detail::write_document(out, command, format, echo, scan ? &*scan : nullptr, payload);
        } else {
            std::ofstream file(config.output.path, std::ios::binary);
            if (!file)
                throw validation_error("cannot open output file '" + config.output.path + "'");
            detail::write_document(file, command, format, echo, scan ? &*scan : nullptr, payload);
        }
        return EXIT_OK;
    } catch (const validation_error& error) {
        err << "error: " << error.what() << '\n';
        return EXIT_VALIDATION;
    } catch (const domain_error& error) {
        err << "error: " << error.what() << '\n';
        return EXIT_DOMAIN;
    }
}

inline int run(int argc, const char* const* argv, std::ostream& out = std::cout,
               std::ostream& err = std::cerr) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return run(std::move(args), out, err);
}

} // namespace pathid::cli

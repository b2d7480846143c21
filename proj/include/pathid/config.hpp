#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <fstream>
#include <initializer_list>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "pathid/errors.hpp"
#include "pathid/grouping.hpp"
#include "pathid/imperfections.hpp"
#include "pathid/model.hpp"
#include "pathid/scan.hpp"

namespace pathid {

enum class OutputFormat { csv, json };

struct TiltCalibrationSpec {
    double reference_tilt_rad = PI / 1800.0; // a tenth of a degree
    double target_overlap = 0.97;
};

struct ImbalanceSpec {
    double ratio_b = 1.0;
    double ratio_c = 1.0;
    double relative_phase_rad = PI;
};

struct ImperfectionConfig {
    BeamParams beam;
    AlignmentError alignment;
    TiltCalibrationSpec tilt_calibration;
    std::optional<ImbalanceSpec> imbalance;
};

struct V13Config {
    double v12 = 0.0;
    double v23 = 0.0;
    std::array<double, 3> yields_hz{1.0, 1.0, 1.0};
};

struct BlockConfig {
    std::vector<std::size_t> blocked; // source indices resolved from labels
};

struct OutputConfig {
    std::string path;                   // empty writes to stdout
    std::optional<OutputFormat> format; // unset falls back to the command default
};

struct RunConfig {
    InterferometerSpec interferometer;
    std::optional<ScanSpec> scan;
    std::optional<Grouping> grouping;
    std::optional<BlockConfig> block;
    std::optional<ImperfectionConfig> imperfections;
    std::optional<V13Config> estimate_v13;
    std::optional<OPLDSpec> opld;
    double gedanken_phase_tolerance_rad = 1e-9;
    bool has_gedanken_section = false;
    std::uint64_t seed = 0;
    OutputConfig output;
};

namespace detail {

using nlohmann::json;

[[noreturn]] inline void config_fail(const std::string& message) {
    throw validation_error(message);
}

inline void require_object(const json& node, const std::string& where) {
    if (!node.is_object())
        config_fail(where + " must be a JSON object");
}

// Unknown keys are rejected everywhere so a typo never silently drops a
// setting.
inline void check_keys(const json& node, std::initializer_list<const char*> allowed,
                       const std::string& where) {
    for (auto it = node.begin(); it != node.end(); ++it) {
        const bool known = std::any_of(allowed.begin(), allowed.end(),
                                       [&](const char* key) { return it.key() == key; });
        if (!known)
            config_fail("unknown field '" + it.key() + "' in " + where);
    }
}

inline const json* find(const json& node, const char* key) {
    auto it = node.find(key);
    return it == node.end() ? nullptr : &*it;
}

inline double as_number(const json& node, const std::string& where) {
    if (!node.is_number())
        config_fail(where + " must be a number");
    return node.get<double>();
}

inline double number_field(const json& obj, const char* key, const std::string& where) {
    const json* field = find(obj, key);
    if (field == nullptr)
        config_fail(where + " is missing required field '" + key + "'");
    return as_number(*field, where + "." + key);
}

inline double number_field_or(const json& obj, const char* key, const std::string& where,
                              double fallback) {
    const json* field = find(obj, key);
    return field == nullptr ? fallback : as_number(*field, where + "." + key);
}

inline std::string string_field(const json& obj, const char* key, const std::string& where) {
    const json* field = find(obj, key);
    if (field == nullptr)
        config_fail(where + " is missing required field '" + key + "'");
    if (!field->is_string())
        config_fail(where + "." + key + " must be a string");
    return field->get<std::string>();
}

inline std::size_t count_field_or(const json& obj, const char* key, const std::string& where,
                                  std::size_t fallback) {
    const json* field = find(obj, key);
    if (field == nullptr)
        return fallback;
    if (!field->is_number_integer() || field->get<std::int64_t>() < 0)
        config_fail(where + "." + key + " must be a non-negative integer");
    return field->get<std::size_t>();
}

inline std::size_t index_of_label(const InterferometerSpec& spec, const std::string& label,
                                  const std::string& where) {
    for (std::size_t k = 0; k < spec.sources.size(); ++k)
        if (spec.sources[k].label == label)
            return k;
    config_fail(where + " references unknown source '" + label + "'");
}

inline InterferometerSpec parse_interferometer(const json& node, double angle) {
    require_object(node, "interferometer");
    check_keys(node, {"phase_convention", "sources"}, "interferometer");

    InterferometerSpec spec;
    if (const json* conv = find(node, "phase_convention")) {
        if (!conv->is_string())
            config_fail("interferometer.phase_convention must be a string");
        const std::string name = conv->get<std::string>();
        if (name == "absolute")
            spec.convention = PhaseConvention::absolute;
        else if (name == "cumulative")
            spec.convention = PhaseConvention::cumulative;
        else
            config_fail("interferometer.phase_convention must be 'absolute' or 'cumulative'");
    }

    const json* sources = find(node, "sources");
    if (sources == nullptr || !sources->is_array() || sources->empty())
        config_fail("interferometer.sources must be a non-empty array");
    for (std::size_t k = 0; k < sources->size(); ++k) {
        const std::string where = "interferometer.sources[" + std::to_string(k) + "]";
        const json& entry = (*sources)[k];
        require_object(entry, where);
        check_keys(entry, {"label", "yield_hz", "phase", "leak_angle"}, where);
        SourceSpec source;
        source.label = string_field(entry, "label", where);
        source.yield_hz = number_field(entry, "yield_hz", where);
        source.phase_rad = number_field_or(entry, "phase", where, 0.0) * angle;
        source.leak_rad = number_field_or(entry, "leak_angle", where, 0.0) * angle;
        spec.sources.push_back(std::move(source));
    }
    validate(spec);
    return spec;
}

inline ScanSpec parse_scan(const json& node, const InterferometerSpec& spec, double angle) {
    require_object(node, "scan");
    check_keys(node, {"axes", "fixed", "integration_time_s"}, "scan");

    ScanSpec sc;
    const json* axes = find(node, "axes");
    if (axes == nullptr || !axes->is_array() || axes->empty() || axes->size() > 2)
        config_fail("scan.axes must be an array of one or two entries");
    for (std::size_t a = 0; a < axes->size(); ++a) {
        const std::string where = "scan.axes[" + std::to_string(a) + "]";
        const json& entry = (*axes)[a];
        require_object(entry, where);
        check_keys(entry, {"source", "start", "stop", "points"}, where);
        AxisSpec axis;
        axis.source_index = index_of_label(spec, string_field(entry, "source", where), where);
        axis.start_rad = number_field(entry, "start", where) * angle;
        axis.stop_rad = number_field(entry, "stop", where) * angle;
        axis.points = count_field_or(entry, "points", where, 73);
        sc.axes.push_back(axis);
    }

    if (const json* fixed = find(node, "fixed")) {
        require_object(*fixed, "scan.fixed");
        for (auto it = fixed->begin(); it != fixed->end(); ++it) {
            const std::size_t slot = index_of_label(spec, it.key(), "scan.fixed");
            sc.fixed_phases[slot] = as_number(it.value(), "scan.fixed." + it.key()) * angle;
        }
    }

    if (const json* time = find(node, "integration_time_s"))
        sc.integration_time_s = as_number(*time, "scan.integration_time_s");
    return sc;
}

inline Grouping parse_grouping(const json& node, const InterferometerSpec& spec) {
    require_object(node, "grouping");
    check_keys(node, {"blocks", "labels"}, "grouping");

    Grouping grouping;
    const json* blocks = find(node, "blocks");
    if (blocks == nullptr || !blocks->is_array())
        config_fail("grouping.blocks must be an array of label arrays");
    for (std::size_t b = 0; b < blocks->size(); ++b) {
        const std::string where = "grouping.blocks[" + std::to_string(b) + "]";
        const json& entry = (*blocks)[b];
        if (!entry.is_array())
            config_fail(where + " must be an array of source labels");
        std::vector<std::size_t> members;
        std::string joined;
        for (const json& label : entry) {
            if (!label.is_string())
                config_fail(where + " entries must be source labels");
            members.push_back(index_of_label(spec, label.get<std::string>(), where));
            if (!joined.empty())
                joined += '+';
            joined += label.get<std::string>();
        }
        grouping.blocks.push_back(std::move(members));
        grouping.labels.push_back(std::move(joined));
    }

    if (const json* labels = find(node, "labels")) {
        if (!labels->is_array() || labels->size() != grouping.blocks.size())
            config_fail("grouping.labels must name every block");
        for (std::size_t b = 0; b < labels->size(); ++b) {
            if (!(*labels)[b].is_string())
                config_fail("grouping.labels entries must be strings");
            grouping.labels[b] = (*labels)[b].get<std::string>();
        }
    }
    validate(grouping, spec.size());
    return grouping;
}

inline BlockConfig parse_block(const json& node, const InterferometerSpec& spec) {
    require_object(node, "block");
    check_keys(node, {"sources"}, "block");

    BlockConfig block;
    const json* sources = find(node, "sources");
    if (sources == nullptr || !sources->is_array())
        config_fail("block.sources must be an array of source labels");
    for (const json& label : *sources) {
        if (!label.is_string())
            config_fail("block.sources entries must be source labels");
        const std::size_t slot = index_of_label(spec, label.get<std::string>(), "block.sources");
        if (std::find(block.blocked.begin(), block.blocked.end(), slot) != block.blocked.end())
            config_fail("block.sources lists '" + label.get<std::string>() + "' twice");
        block.blocked.push_back(slot);
    }
    return block;
}

inline ImperfectionConfig parse_imperfections(const json& node, double angle) {
    require_object(node, "imperfections");
    check_keys(node, {"beam", "alignment", "tilt_calibration", "imbalance"}, "imperfections");

    ImperfectionConfig imp;
    if (const json* beam = find(node, "beam")) {
        require_object(*beam, "imperfections.beam");
        check_keys(*beam, {"waist_m", "wavelength_m", "propagation_distance_m"},
                   "imperfections.beam");
        imp.beam.waist_m =
            number_field_or(*beam, "waist_m", "imperfections.beam", imp.beam.waist_m);
        imp.beam.wavelength_m =
            number_field_or(*beam, "wavelength_m", "imperfections.beam", imp.beam.wavelength_m);
        imp.beam.propagation_distance_m = number_field_or(
            *beam, "propagation_distance_m", "imperfections.beam", imp.beam.propagation_distance_m);
    }
    validate(imp.beam);

    if (const json* alignment = find(node, "alignment")) {
        require_object(*alignment, "imperfections.alignment");
        check_keys(*alignment, {"longitudinal_m", "transverse_m", "tilt"},
                   "imperfections.alignment");
        imp.alignment.longitudinal_m =
            number_field_or(*alignment, "longitudinal_m", "imperfections.alignment", 0.0);
        imp.alignment.transverse_m =
            number_field_or(*alignment, "transverse_m", "imperfections.alignment", 0.0);
        imp.alignment.tilt_rad =
            number_field_or(*alignment, "tilt", "imperfections.alignment", 0.0) * angle;
    }

    if (const json* cal = find(node, "tilt_calibration")) {
        require_object(*cal, "imperfections.tilt_calibration");
        check_keys(*cal, {"reference_tilt", "target_overlap"}, "imperfections.tilt_calibration");
        imp.tilt_calibration.reference_tilt_rad =
            number_field_or(*cal, "reference_tilt", "imperfections.tilt_calibration",
                            imp.tilt_calibration.reference_tilt_rad / angle) *
            angle;
        imp.tilt_calibration.target_overlap = number_field_or(
            *cal, "target_overlap", "imperfections.tilt_calibration",
            imp.tilt_calibration.target_overlap);
    }

    if (const json* imbalance = find(node, "imbalance")) {
        require_object(*imbalance, "imperfections.imbalance");
        check_keys(*imbalance, {"ratio_b", "ratio_c", "phase"}, "imperfections.imbalance");
        ImbalanceSpec spec;
        spec.ratio_b = number_field_or(*imbalance, "ratio_b", "imperfections.imbalance", 1.0);
        spec.ratio_c = number_field_or(*imbalance, "ratio_c", "imperfections.imbalance", 1.0);
        spec.relative_phase_rad =
            number_field_or(*imbalance, "phase", "imperfections.imbalance", PI / angle) * angle;
        imp.imbalance = spec;
    }
    return imp;
}

inline V13Config parse_v13(const json& node) {
    require_object(node, "estimate_v13");
    check_keys(node, {"v12", "v23", "yields_hz"}, "estimate_v13");

    V13Config v13;
    v13.v12 = number_field(node, "v12", "estimate_v13");
    v13.v23 = number_field(node, "v23", "estimate_v13");
    const json* yields = find(node, "yields_hz");
    if (yields == nullptr || !yields->is_array() || yields->size() != 3)
        config_fail("estimate_v13.yields_hz must hold exactly three yields");
    for (std::size_t k = 0; k < 3; ++k)
        v13.yields_hz[k] = as_number((*yields)[k], "estimate_v13.yields_hz[" + std::to_string(k) + "]");
    return v13;
}

inline OPLDSpec parse_opld(const json& node) {
    require_object(node, "opld");
    check_keys(node, {"pump_coherence_length_m", "spdc_coherence_length_m", "paths"}, "opld");

    OPLDSpec spec;
    spec.pump_coherence_length_m = number_field(node, "pump_coherence_length_m", "opld");
    spec.spdc_coherence_length_m = number_field(node, "spdc_coherence_length_m", "opld");
    const json* paths = find(node, "paths");
    if (paths == nullptr || !paths->is_array())
        config_fail("opld.paths must be an array of path-length objects");
    for (std::size_t p = 0; p < paths->size(); ++p) {
        const std::string where = "opld.paths[" + std::to_string(p) + "]";
        const json& entry = (*paths)[p];
        require_object(entry, where);
        check_keys(entry, {"pump_m", "spdc_m", "signal_m", "idler_m"}, where);
        SourcePathLengths lengths;
        lengths.pump_m = number_field_or(entry, "pump_m", where, 0.0);
        lengths.spdc_m = number_field_or(entry, "spdc_m", where, 0.0);
        lengths.signal_m = number_field_or(entry, "signal_m", where, 0.0);
        lengths.idler_m = number_field_or(entry, "idler_m", where, 0.0);
        spec.paths.push_back(lengths);
    }
    return spec;
}

} // namespace detail

inline RunConfig parse_config(const nlohmann::json& root) {
    detail::require_object(root, "config");
    detail::check_keys(root,
                       {"units", "interferometer", "scan", "grouping", "block", "imperfections",
                        "estimate_v13", "opld", "gedanken", "seed", "output"},
                       "config");

    double angle = 1.0;
    if (const nlohmann::json* units = detail::find(root, "units")) {
        if (!units->is_string())
            detail::config_fail("units must be a string");
        const std::string name = units->get<std::string>();
        if (name == "degrees")
            angle = PI / 180.0;
        else if (name != "radians")
            detail::config_fail("units must be 'radians' or 'degrees'");
    }

    const nlohmann::json* interferometer = detail::find(root, "interferometer");
    if (interferometer == nullptr)
        detail::config_fail("config is missing required section 'interferometer'");

    RunConfig config;
    config.interferometer = detail::parse_interferometer(*interferometer, angle);
    if (const nlohmann::json* node = detail::find(root, "scan"))
        config.scan = detail::parse_scan(*node, config.interferometer, angle);
    if (const nlohmann::json* node = detail::find(root, "grouping"))
        config.grouping = detail::parse_grouping(*node, config.interferometer);
    if (const nlohmann::json* node = detail::find(root, "block"))
        config.block = detail::parse_block(*node, config.interferometer);
    if (const nlohmann::json* node = detail::find(root, "imperfections"))
        config.imperfections = detail::parse_imperfections(*node, angle);
    if (const nlohmann::json* node = detail::find(root, "estimate_v13"))
        config.estimate_v13 = detail::parse_v13(*node);
    if (const nlohmann::json* node = detail::find(root, "opld"))
        config.opld = detail::parse_opld(*node);

    if (const nlohmann::json* node = detail::find(root, "gedanken")) {
        detail::require_object(*node, "gedanken");
        detail::check_keys(*node, {"phase_tolerance"}, "gedanken");
        config.gedanken_phase_tolerance_rad =
            detail::number_field_or(*node, "phase_tolerance", "gedanken", 1e-9 / angle) * angle;
        if (!(config.gedanken_phase_tolerance_rad >= 0.0))
            detail::config_fail("gedanken.phase_tolerance must be >= 0");
        config.has_gedanken_section = true;
    }

    if (const nlohmann::json* node = detail::find(root, "seed")) {
        if (!node->is_number_integer() ||
            (!node->is_number_unsigned() && node->get<std::int64_t>() < 0))
            detail::config_fail("seed must be a non-negative integer");
        config.seed = node->get<std::uint64_t>();
    }

    if (const nlohmann::json* node = detail::find(root, "output")) {
        detail::require_object(*node, "output");
        detail::check_keys(*node, {"path", "format"}, "output");
        if (const nlohmann::json* path = detail::find(*node, "path")) {
            if (!path->is_string())
                detail::config_fail("output.path must be a string");
            config.output.path = path->get<std::string>();
        }
        if (const nlohmann::json* format = detail::find(*node, "format")) {
            if (!format->is_string())
                detail::config_fail("output.format must be a string");
            const std::string name = format->get<std::string>();
            if (name == "csv")
                config.output.format = OutputFormat::csv;
            else if (name == "json")
                config.output.format = OutputFormat::json;
            else
                detail::config_fail("output.format must be 'csv' or 'json'");
        }
    }
    return config;
}

inline RunConfig parse_config_text(const std::string& text) {
    nlohmann::json root;
    try {
        root = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& error) {
        throw validation_error(std::string("config is not valid JSON: ") + error.what());
    }
    return parse_config(root);
}

inline RunConfig load_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw validation_error("cannot open config file '" + path + "'");
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return parse_config_text(buffer.str());
}

// Fully resolved snapshot of a parsed config: defaults filled in, every angle
// in radians, labels kept. Echoed into each output so a result file states
// the exact run that produced it.
inline nlohmann::json effective_config(const RunConfig& config) {
    using nlohmann::json;
    json echo;
    echo["units"] = "radians";

    json sources = json::array();
    for (const SourceSpec& s : config.interferometer.sources) {
        sources.push_back({{"label", s.label},
                           {"yield_hz", s.yield_hz},
                           {"phase", s.phase_rad},
                           {"leak_angle", s.leak_rad}});
    }
    echo["interferometer"] = {
        {"phase_convention",
         config.interferometer.convention == PhaseConvention::absolute ? "absolute" : "cumulative"},
        {"sources", std::move(sources)}};

    const auto label_of = [&](std::size_t slot) {
        return config.interferometer.sources[slot].label;
    };

    if (config.scan) {
        json axes = json::array();
        for (const AxisSpec& axis : config.scan->axes) {
            axes.push_back({{"source", label_of(axis.source_index)},
                            {"start", axis.start_rad},
                            {"stop", axis.stop_rad},
                            {"points", axis.points}});
        }
        json scan;
        scan["axes"] = std::move(axes);
        if (!config.scan->fixed_phases.empty()) {
            json fixed;
            for (const auto& [slot, value] : config.scan->fixed_phases)
                fixed[label_of(slot)] = value;
            scan["fixed"] = std::move(fixed);
        }
        if (config.scan->integration_time_s)
            scan["integration_time_s"] = *config.scan->integration_time_s;
        echo["scan"] = std::move(scan);
    }

    if (config.grouping) {
        json blocks = json::array();
        for (const auto& members : config.grouping->blocks) {
            json block = json::array();
            for (std::size_t slot : members)
                block.push_back(label_of(slot));
            blocks.push_back(std::move(block));
        }
        echo["grouping"] = {{"blocks", std::move(blocks)}, {"labels", config.grouping->labels}};
    }

    if (config.block) {
        json blocked = json::array();
        for (std::size_t slot : config.block->blocked)
            blocked.push_back(label_of(slot));
        echo["block"] = {{"sources", std::move(blocked)}};
    }

    if (config.imperfections) {
        const ImperfectionConfig& imp = *config.imperfections;
        json section;
        section["beam"] = {{"waist_m", imp.beam.waist_m},
                           {"wavelength_m", imp.beam.wavelength_m},
                           {"propagation_distance_m", imp.beam.propagation_distance_m}};
        section["alignment"] = {{"longitudinal_m", imp.alignment.longitudinal_m},
                                {"transverse_m", imp.alignment.transverse_m},
                                {"tilt", imp.alignment.tilt_rad}};
        section["tilt_calibration"] = {{"reference_tilt", imp.tilt_calibration.reference_tilt_rad},
                                       {"target_overlap", imp.tilt_calibration.target_overlap}};
        if (imp.imbalance)
            section["imbalance"] = {{"ratio_b", imp.imbalance->ratio_b},
                                    {"ratio_c", imp.imbalance->ratio_c},
                                    {"phase", imp.imbalance->relative_phase_rad}};
        echo["imperfections"] = std::move(section);
    }

    if (config.estimate_v13)
        echo["estimate_v13"] = {{"v12", config.estimate_v13->v12},
                                {"v23", config.estimate_v13->v23},
                                {"yields_hz", config.estimate_v13->yields_hz}};

    if (config.opld) {
        json paths = json::array();
        for (const SourcePathLengths& p : config.opld->paths)
            paths.push_back({{"pump_m", p.pump_m},
                             {"spdc_m", p.spdc_m},
                             {"signal_m", p.signal_m},
                             {"idler_m", p.idler_m}});
        echo["opld"] = {{"pump_coherence_length_m", config.opld->pump_coherence_length_m},
                        {"spdc_coherence_length_m", config.opld->spdc_coherence_length_m},
                        {"paths", std::move(paths)}};
    }

    if (config.has_gedanken_section)
        echo["gedanken"] = {{"phase_tolerance", config.gedanken_phase_tolerance_rad}};

    // output routing is delivery plumbing, not part of the computation, so it
    // stays out of the echo and the same run lands byte-identical anywhere
    echo["seed"] = config.seed;
    return echo;
}

} // namespace pathid

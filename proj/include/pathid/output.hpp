#pragma once

#include <cstdio>
#include <cstdlib>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "pathid/scan.hpp"

namespace pathid {

// Every tabular writer emits this exact column set. Columns that do not apply
// stay in place but empty, so downstream parsers never see a shifting schema.
inline constexpr const char* SCAN_CSV_HEADER = "phase_a,phase_c,rate_hz,counts,sigma";

// Twelve significant digits reproduce a double closely enough for any
// downstream comparison while hiding last-bit noise that would make output
// files differ between otherwise identical runs.
inline std::string format_sig(double value) {
    value += 0.0; // folds -0 into +0 so the sign never leaks into the text
    char buffer[40];
    std::snprintf(buffer, sizeof buffer, "%.12g", value);
    return std::string(buffer);
}

// The double a reader reconstructs from the text form. Serialized payloads
// store this value so file contents and reported numbers agree exactly.
inline double round_sig(double value) {
    return std::strtod(format_sig(value).c_str(), nullptr);
}

namespace detail {

inline std::string csv_escape(const std::string& field) {
    if (field.find_first_of(",\"\n") == std::string::npos)
        return field;
    std::string quoted = "\"";
    for (char c : field) {
        if (c == '"')
            quoted += '"';
        quoted += c;
    }
    quoted += '"';
    return quoted;
}

inline std::string scalar_text(const nlohmann::json& node) {
    if (node.is_boolean())
        return node.get<bool>() ? "true" : "false";
    if (node.is_number_float())
        return format_sig(node.get<double>());
    if (node.is_string())
        return node.get<std::string>();
    if (node.is_null())
        return "";
    return node.dump(); // integers and anything else in canonical form
}

// Walks a result tree into dotted key/value rows: objects extend the key with
// '.', arrays with '[index]'. Scalars become one row each.
inline void flatten_json(const nlohmann::json& node, const std::string& prefix,
                         std::vector<std::pair<std::string, std::string>>& rows) {
    if (node.is_object()) {
        for (auto it = node.begin(); it != node.end(); ++it)
            flatten_json(it.value(), prefix.empty() ? it.key() : prefix + "." + it.key(), rows);
    } else if (node.is_array()) {
        for (std::size_t i = 0; i < node.size(); ++i)
            flatten_json(node[i], prefix + "[" + std::to_string(i) + "]", rows);
    } else {
        rows.emplace_back(prefix, scalar_text(node));
    }
}

} // namespace detail

// Sweep table. One `# config=` comment pins the fully resolved configuration
// to the data it produced; the header line never varies.
inline void write_scan_csv(std::ostream& os, const ScanResult& scan,
                           const nlohmann::json& config_echo) {
    os << "# config=" << config_echo.dump() << '\n';
    os << SCAN_CSV_HEADER << '\n';
    const bool counting = !scan.counts.empty();
    for (std::size_t row = 0; row < scan.rows(); ++row) {
        os << format_sig(scan.phase_first[row]) << ',' << format_sig(scan.phase_last[row]) << ','
           << format_sig(scan.rates[row]) << ',';
        if (counting)
            os << scan.counts[row];
        os << ',';
        if (counting)
            os << format_sig(scan.sigmas[row]);
        os << '\n';
    }
}

// Key/value table for scalar-result commands, same comment-then-header shape
// as the sweep table.
inline void write_kv_csv(std::ostream& os, const nlohmann::json& config_echo,
                         const nlohmann::json& result) {
    os << "# config=" << config_echo.dump() << '\n';
    os << "key,value\n";
    std::vector<std::pair<std::string, std::string>> rows;
    detail::flatten_json(result, "", rows);
    for (const auto& [key, value] : rows)
        os << detail::csv_escape(key) << ',' << detail::csv_escape(value) << '\n';
}

// JSON documents wrap every payload the same way: metadata with the command
// name and the resolved config, then the result itself.
inline void write_json_document(std::ostream& os, const std::string& command,
                                const nlohmann::json& config_echo, const nlohmann::json& result) {
    nlohmann::json doc;
    doc["metadata"]["command"] = command;
    doc["metadata"]["config"] = config_echo;
    doc["result"] = result;
    os << doc.dump(2) << '\n';
}

// Sweep data as a JSON payload, column-per-array. Numbers pass through the
// same rounding as the CSV writer so both formats carry identical values.
inline nlohmann::json scan_payload(const ScanResult& scan) {
    auto rounded_array = [](const std::vector<double>& values) {
        nlohmann::json arr = nlohmann::json::array();
        for (double v : values)
            arr.push_back(round_sig(v));
        return arr;
    };

    nlohmann::json axes = nlohmann::json::array();
    for (std::size_t a = 0; a < scan.axes.size(); ++a) {
        nlohmann::json axis;
        axis["source"] = scan.base.sources[scan.axes[a].source_index].label;
        axis["points"] = scan.axes[a].points;
        axis["values"] = rounded_array(a == 0 ? scan.axis_a_values : scan.axis_b_values);
        axes.push_back(std::move(axis));
    }

    nlohmann::json payload;
    payload["axes"] = std::move(axes);
    payload["phase_a"] = rounded_array(scan.phase_first);
    payload["phase_c"] = rounded_array(scan.phase_last);
    payload["rate_hz"] = rounded_array(scan.rates);
    if (!scan.counts.empty()) {
        payload["counts"] = scan.counts;
        payload["sigma"] = rounded_array(scan.sigmas);
    }
    return payload;
}

} // namespace pathid

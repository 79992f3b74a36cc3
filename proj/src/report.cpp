#include "raftsplit/report.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace raftsplit {

std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

std::string cell_to_string(const Cell& cell) {
    struct Visitor {
        std::string operator()(std::int64_t v) const { return std::to_string(v); }
        std::string operator()(std::uint64_t v) const { return std::to_string(v); }
        std::string operator()(double v) const { return format_double(v); }
        std::string operator()(bool v) const { return v ? "true" : "false"; }
        std::string operator()(const std::string& v) const { return v; }
    };
    return std::visit(Visitor{}, cell);
}

std::string to_csv(const Table& table) {
    std::ostringstream out;
    for (std::size_t c = 0; c < table.columns.size(); ++c) {
        if (c) out << ',';
        out << table.columns[c];
    }
    out << '\n';
    for (const auto& row : table.rows) {
        if (row.size() != table.columns.size())
            throw std::invalid_argument("to_csv: row width does not match header");
        for (std::size_t c = 0; c < row.size(); ++c) {
            if (c) out << ',';
            out << cell_to_string(row[c]);
        }
        out << '\n';
    }
    return out.str();
}

nlohmann::json cell_to_json(const Cell& cell) {
    struct Visitor {
        nlohmann::json operator()(std::int64_t v) const { return v; }
        nlohmann::json operator()(std::uint64_t v) const { return v; }
        nlohmann::json operator()(double v) const {
            // JSON has no non-finite numbers; mirror the CSV markers
            if (!std::isfinite(v)) return format_double(v);
            return v;
        }
        nlohmann::json operator()(bool v) const { return v; }
        nlohmann::json operator()(const std::string& v) const { return v; }
    };
    return std::visit(Visitor{}, cell);
}

nlohmann::json table_to_json(const Table& table) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& row : table.rows) {
        if (row.size() != table.columns.size())
            throw std::invalid_argument("table_to_json: row width does not match header");
        nlohmann::json obj = nlohmann::json::object();
        for (std::size_t c = 0; c < row.size(); ++c)
            obj[table.columns[c]] = cell_to_json(row[c]);
        rows.push_back(std::move(obj));
    }
    return rows;
}

nlohmann::json summary_to_json(const SummaryItems& items) {
    nlohmann::json obj = nlohmann::json::object();
    for (const auto& [key, cell] : items) obj[key] = cell_to_json(cell);
    return obj;
}

std::string summary_to_text(const SummaryItems& items) {
    std::ostringstream out;
    for (const auto& [key, cell] : items)
        out << key << " = " << cell_to_string(cell) << '\n';
    return out.str();
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw std::runtime_error("cannot open for writing: " + path);
    out << content;
    if (!out)
        throw std::runtime_error("write failed: " + path);
}

} // namespace raftsplit

#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <json.hpp>

namespace raftsplit {

using Cell = std::variant<std::int64_t, std::uint64_t, double, bool, std::string>;

struct Table {
    std::vector<std::string> columns;
    std::vector<std::vector<Cell>> rows;
};

/// Ordered key/value pairs for the human-readable run summary.
using SummaryItems = std::vector<std::pair<std::string, Cell>>;

/// 12 significant digits; non-finite values as "inf" / "-inf" / "nan".
std::string format_double(double v);
std::string cell_to_string(const Cell& cell);

std::string to_csv(const Table& table);
nlohmann::json table_to_json(const Table& table);   // array of row objects
nlohmann::json cell_to_json(const Cell& cell);      // non-finite doubles as strings
nlohmann::json summary_to_json(const SummaryItems& items);
std::string summary_to_text(const SummaryItems& items);  // "key = value" lines

void write_text_file(const std::string& path, const std::string& content);

} // namespace raftsplit

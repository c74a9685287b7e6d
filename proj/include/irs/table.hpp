#pragma once

// Row-oriented result tables rendered as CSV or JSON lines.

#include <nlohmann/json.hpp>

#include <ostream>
#include <string>
#include <vector>

namespace irs {

struct Table {
    std::vector<std::string> columns;
    /// Cells are null (empty CSV field), numbers, strings or booleans.
    std::vector<std::vector<nlohmann::json>> rows;

    void add_row(std::vector<nlohmann::json> row);
};

/// Doubles are written in shortest round-trip form.
void write_csv(std::ostream& out, const Table& table);
/// One JSON object per row, keyed by column name.
void write_json_lines(std::ostream& out, const Table& table);

}  // namespace irs

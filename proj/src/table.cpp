#include "irs/table.hpp"

#include "irs/errors.hpp"

#include <charconv>
#include <cmath>

namespace irs {

namespace {

std::string format_number(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

std::string csv_field(const nlohmann::json& cell) {
    switch (cell.type()) {
        case nlohmann::json::value_t::null: return {};
        case nlohmann::json::value_t::boolean: return cell.get<bool>() ? "true" : "false";
        case nlohmann::json::value_t::number_float: return format_number(cell.get<double>());
        case nlohmann::json::value_t::number_integer: return std::to_string(cell.get<std::int64_t>());
        case nlohmann::json::value_t::number_unsigned: return std::to_string(cell.get<std::uint64_t>());
        case nlohmann::json::value_t::string: {
            const auto& s = cell.get_ref<const std::string&>();
            if (s.find_first_of(",\"\n") == std::string::npos) return s;
            std::string quoted = "\"";
            for (char c : s) {
                if (c == '"') quoted += '"';
                quoted += c;
            }
            return quoted + '"';
        }
        default: return csv_field(cell.dump());
    }
}

// JSON has no infinities; they are written as strings.
nlohmann::json json_cell(const nlohmann::json& cell) {
    if (cell.is_number_float() && !std::isfinite(cell.get<double>())) return format_number(cell.get<double>());
    return cell;
}

}  // namespace

void Table::add_row(std::vector<nlohmann::json> row) {
    if (row.size() != columns.size()) {
        throw DomainError("table row has " + std::to_string(row.size()) + " cells, expected " +
                          std::to_string(columns.size()));
    }
    rows.push_back(std::move(row));
}

void write_csv(std::ostream& out, const Table& table) {
    for (std::size_t i = 0; i < table.columns.size(); ++i) out << (i ? "," : "") << table.columns[i];
    out << '\n';
    for (const auto& row : table.rows) {
        for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << csv_field(row[i]);
        out << '\n';
    }
}

void write_json_lines(std::ostream& out, const Table& table) {
    for (const auto& row : table.rows) {
        nlohmann::ordered_json obj;
        for (std::size_t i = 0; i < row.size(); ++i) obj[table.columns[i]] = json_cell(row[i]);
        out << obj.dump() << '\n';
    }
}

}  // namespace irs

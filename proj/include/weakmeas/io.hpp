#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"
#include "weakmeas/errors.hpp"

namespace weakmeas {

using CsvCell = std::variant<std::int64_t, double, std::string>;

/// 17 significant digits, locale-independent, e.g. 1.0000000000000000e+00.
inline std::string format_double(double v) {
    if (!std::isfinite(v)) throw NumericalError("csv: non-finite value");
    char buf[40];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::scientific, 16);
    return std::string(buf, res.ptr);
}

/// Streaming CSV writer: header row, LF line endings, '.' decimal separator.
class CsvWriter {
  public:
    CsvWriter(const std::string& path, const std::vector<std::string>& header)
        : path_(path), out_(path, std::ios::binary | std::ios::trunc), columns_(header.size()) {
        if (!out_) throw ValidationError("csv: cannot open " + path + " for writing");
        write_line(header);
    }

    void write_row(const std::vector<CsvCell>& cells) {
        if (cells.size() != columns_) throw ValidationError("csv: wrong column count for " + path_);
        std::vector<std::string> texts;
        texts.reserve(cells.size());
        for (const auto& c : cells) {
            if (const auto* i = std::get_if<std::int64_t>(&c)) {
                texts.push_back(std::to_string(*i));
            } else if (const auto* d = std::get_if<double>(&c)) {
                texts.push_back(format_double(*d));
            } else {
                texts.push_back(std::get<std::string>(c));
            }
        }
        write_line(texts);
    }

    void finish() {
        out_.flush();
        if (!out_) throw ValidationError("csv: write failure on " + path_);
    }

  private:
    void write_line(const std::vector<std::string>& fields) {
        for (std::size_t i = 0; i < fields.size(); ++i) {
            if (i > 0) out_ << ',';
            out_ << fields[i];
        }
        out_ << '\n';
        if (!out_) throw ValidationError("csv: write failure on " + path_);
    }

    std::string path_;
    std::ofstream out_;
    std::size_t columns_;
};

/// JSON sidecar next to a CSV output (path + ".json").
inline void write_json_sidecar(const std::string& csv_path, const nlohmann::json& doc) {
    const std::string path = csv_path + ".json";
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ValidationError("sidecar: cannot open " + path + " for writing");
    out << doc.dump(2) << '\n';
    if (!out) throw ValidationError("sidecar: write failure on " + path);
}

}  // namespace weakmeas

#include "fatq/report.hpp"

#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace fatq::report {

Csv::Csv(std::vector<std::string> header) : width_(header.size()) {
    if (header.empty()) throw std::invalid_argument("Csv: empty header");
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (i) body_ += ',';
        body_ += header[i];
    }
    body_ += '\n';
}

void Csv::finish_row() {
    if (!in_row_) return;
    if (row_cells_ != width_) {
        throw std::logic_error("Csv: row width " + std::to_string(row_cells_) +
                               " does not match header width " + std::to_string(width_));
    }
    body_ += '\n';
    in_row_ = false;
}

Csv& Csv::begin_row() {
    finish_row();
    in_row_ = true;
    row_cells_ = 0;
    return *this;
}

Csv& Csv::cell(const std::string& value) {
    if (!in_row_) throw std::logic_error("Csv: cell outside a row");
    if (row_cells_) body_ += ',';
    body_ += value;
    ++row_cells_;
    return *this;
}

Csv& Csv::cell(double value) { return cell(format_double(value)); }
Csv& Csv::cell(long long value) { return cell(std::to_string(value)); }
Csv& Csv::cell(std::size_t value) { return cell(std::to_string(value)); }
Csv& Csv::cell(int value) { return cell(std::to_string(value)); }

std::string Csv::str() const {
    Csv copy = *this;
    copy.finish_row();
    return copy.body_;
}

std::string Csv::format_double(double value) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.9g", value);
    return buf;
}

void Csv::write(const std::string& path) const {
    write_file_atomic(path, str());
}

void write_file_atomic(const std::string& path, const std::string& contents) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot open " + tmp + " for writing");
        out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
        if (!out) throw std::runtime_error("write failed for " + tmp);
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0) {
        std::remove(tmp.c_str());
        throw std::runtime_error("cannot rename " + tmp + " to " + path);
    }
}

}  // namespace fatq::report

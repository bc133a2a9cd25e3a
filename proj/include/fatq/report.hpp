#pragma once

#include <string>
#include <vector>

namespace fatq::report {

// CSV builder with a fixed header; floats are serialized with 9 significant
// digits so identical runs produce identical bytes. Files are written to a
// temp name and atomically renamed, so failed commands leave nothing partial.
class Csv {
  public:
    explicit Csv(std::vector<std::string> header);

    Csv& begin_row();
    Csv& cell(const std::string& value);
    Csv& cell(double value);
    Csv& cell(long long value);
    Csv& cell(std::size_t value);
    Csv& cell(int value);

    std::string str() const;
    void write(const std::string& path) const;

    static std::string format_double(double value);

  private:
    std::size_t width_;
    std::size_t row_cells_ = 0;
    bool in_row_ = false;
    std::string body_;

    void finish_row();
};

void write_file_atomic(const std::string& path, const std::string& contents);

}  // namespace fatq::report

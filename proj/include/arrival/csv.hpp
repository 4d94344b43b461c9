#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace arrival {

// Shortest decimal string that round-trips to the same binary64 value.
std::string format_double(double value);

class CsvWriter {
 public:
  CsvWriter(std::ostream& out, const std::vector<std::string>& header);
  void row(const std::vector<double>& values);

 private:
  std::ostream& out_;
  std::size_t columns_;
};

}  // namespace arrival

#pragma once

#include <cstddef>
#include <istream>
#include <string>
#include <vector>

namespace aicl::csv {

/// RFC 4180 reader: quoted fields may contain delimiters, doubled quotes and newlines.
class Reader {
public:
    Reader(std::istream& in, std::string source_name, char delimiter = ',');

    /// Reads the next record. Returns false at end of input. `line()` then reports the
    /// physical line the record started on (1-based).
    bool next(std::vector<std::string>& fields);

    std::size_t line() const noexcept { return record_line_; }

private:
    std::istream& in_;
    std::string source_;
    char delim_;
    std::size_t next_line_ = 1;
    std::size_t record_line_ = 0;
};

}  // namespace aicl::csv

#include "csv.hpp"

#include "aicl/error.hpp"

namespace aicl::csv {

Reader::Reader(std::istream& in, std::string source_name, char delimiter)
    : in_(in), source_(std::move(source_name)), delim_(delimiter) {}

bool Reader::next(std::vector<std::string>& fields) {
    fields.clear();
    std::string line;
    // skip blank lines between records
    while (true) {
        if (!std::getline(in_, line)) {
            return false;
        }
        record_line_ = next_line_++;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (!line.empty()) {
            break;
        }
    }

    std::string field;
    bool in_quotes = false;
    bool was_quoted = false;
    std::size_t i = 0;
    while (true) {
        if (i >= line.size()) {
            if (!in_quotes) {
                break;
            }
            std::string more;
            if (!std::getline(in_, more)) {
                throw IngestError(source_ + ":" + std::to_string(record_line_) +
                                  ": unterminated quoted field");
            }
            ++next_line_;
            if (!more.empty() && more.back() == '\r') {
                more.pop_back();
            }
            field.push_back('\n');
            line = std::move(more);
            i = 0;
            continue;
        }
        const char c = line[i];
        if (in_quotes) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    field.push_back('"');
                    i += 2;
                    continue;
                }
                in_quotes = false;
                ++i;
                continue;
            }
            field.push_back(c);
            ++i;
            continue;
        }
        if (c == '"' && field.empty() && !was_quoted) {
            in_quotes = true;
            was_quoted = true;
            ++i;
            continue;
        }
        if (c == delim_) {
            fields.push_back(std::move(field));
            field.clear();
            was_quoted = false;
            ++i;
            continue;
        }
        if (was_quoted) {
            throw IngestError(source_ + ":" + std::to_string(record_line_) +
                              ": unexpected character after closing quote");
        }
        field.push_back(c);
        ++i;
    }
    fields.push_back(std::move(field));
    return true;
}

}  // namespace aicl::csv

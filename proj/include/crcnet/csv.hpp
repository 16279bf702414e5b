#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace crcnet {

// RFC-4180 flavoured CSV: quoted fields may contain commas, quotes (doubled)
// and newlines; records end with LF or CRLF.  Output always uses LF.
namespace csv {

std::vector<std::vector<std::string>> parse(std::istream& in);
std::vector<std::vector<std::string>> read_file(const std::string& path);

std::string escape(const std::string& field);
void write_row(std::ostream& out, const std::vector<std::string>& fields);

}  // namespace csv
}  // namespace crcnet

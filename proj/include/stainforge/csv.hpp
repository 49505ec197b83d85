#pragma once

#include <initializer_list>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace stainforge::csv {

/// RFC 4180 quoting, applied only when the field needs it.
std::string escape(std::string_view field);

void write_row(std::ostream& out, std::initializer_list<std::string_view> fields);
void write_row(std::ostream& out, const std::vector<std::string>& fields);

/// Splits one record. Quoted fields may contain commas and doubled quotes but
/// not line breaks. Throws ParseError citing line_no on an unterminated quote.
std::vector<std::string> parse_line(std::string_view line, std::size_t line_no);

}  // namespace stainforge::csv

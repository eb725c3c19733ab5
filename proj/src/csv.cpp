#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include "dml/error.hpp"
#include "dml/io.hpp"

namespace dml::io {

namespace {

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  for (;;) {
    const std::size_t comma = line.find(',', start);
    fields.push_back(line.substr(start, comma == std::string_view::npos ? line.npos : comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return fields;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  if (s.size() >= 2 && s.front() == '"' && s.back() == '"') s = s.substr(1, s.size() - 2);
  return s;
}

bool parse_real(std::string_view cell, double& out) {
  if (cell.empty()) return false;
  const std::string copy(cell);
  char* end = nullptr;
  out = std::strtod(copy.c_str(), &end);
  return end == copy.c_str() + copy.size() && std::isfinite(out);
}

}  // namespace

CsvTable parse_csv(std::string_view text, const CsvOptions& options) {
  std::vector<std::string_view> lines;
  {
    std::size_t start = 0;
    while (start < text.size()) {
      std::size_t nl = text.find('\n', start);
      if (nl == std::string_view::npos) nl = text.size();
      lines.push_back(text.substr(start, nl - start));
      start = nl + 1;
    }
  }
  // Trailing blank lines are not rows.
  while (!lines.empty() && trim(lines.back()).empty()) lines.pop_back();
  if (lines.empty()) throw SchemaError("CSV has no header row");

  const auto header = split_fields(lines.front());
  std::vector<std::string> names;
  std::set<std::string> seen;
  for (std::size_t c = 0; c < header.size(); ++c) {
    std::string name(trim(header[c]));
    if (name.empty()) throw SchemaError("empty column name in header", 1, c + 1);
    if (!seen.insert(name).second) throw SchemaError("duplicate column '" + name + "'", 1, c + 1);
    names.push_back(std::move(name));
  }

  std::size_t target_index = names.size();
  for (std::size_t c = 0; c < names.size(); ++c)
    if (names[c] == options.target_column) target_index = c;
  const bool has_target = target_index < names.size();
  if (!has_target && !options.target_optional)
    throw SchemaError("target column '" + options.target_column + "' not found in header");

  CsvTable table;
  table.has_target = has_target;
  auto& data = table.data;
  for (std::size_t c = 0; c < names.size(); ++c)
    if (c != target_index) data.feature_names.push_back(names[c]);
  if (data.feature_names.empty()) throw SchemaError("CSV has no feature columns");

  const std::size_t d = data.feature_names.size();
  data.features = numkit::Matrix(0, d);
  std::vector<double> row(d);
  for (std::size_t l = 1; l < lines.size(); ++l) {
    const auto fields = split_fields(lines[l]);
    if (fields.size() != names.size())
      throw SchemaError("expected " + std::to_string(names.size()) + " fields, found " +
                            std::to_string(fields.size()),
                        l + 1, std::min(fields.size(), names.size()) + 1);
    std::size_t f = 0;
    double target = 0.0;
    for (std::size_t c = 0; c < fields.size(); ++c) {
      double v = 0.0;
      if (!parse_real(trim(fields[c]), v))
        throw SchemaError("non-numeric value '" + std::string(trim(fields[c])) + "' in column '" +
                              names[c] + "'",
                          l + 1, c + 1);
      if (c == target_index)
        target = v;
      else
        row[f++] = v;
    }
    data.features.append_row(row);
    data.targets.push_back(target);
  }
  if (data.size() == 0 && !options.allow_empty) throw SchemaError("CSV has no data rows");
  return table;
}

CsvTable read_csv(const std::string& path, const CsvOptions& options) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_csv(buffer.str(), options);
}

std::string format_csv(const numkit::Dataset& data, const std::string& target_column) {
  std::string out;
  for (const auto& name : data.feature_names) out += name + ",";
  out += target_column + "\n";
  char buf[64];
  auto put = [&](double v) {
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    out.append(buf, res.ptr);
  };
  for (std::size_t i = 0; i < data.size(); ++i) {
    for (double v : data.features.row(i)) {
      put(v);
      out.push_back(',');
    }
    put(data.targets[i]);
    out.push_back('\n');
  }
  return out;
}

void write_csv(const numkit::Dataset& data, const std::string& path,
               const std::string& target_column) {
  const std::string text = format_csv(data, target_column);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << text;
  if (!out) throw IoError("failed writing '" + path + "'");
}

}  // namespace dml::io

#include "shiftlab/feature_table.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>

#include "shiftlab/error.hpp"

namespace shiftlab {

std::string_view to_string(Segment s) {
  switch (s) {
    case Segment::task: return "task";
    case Segment::baseline1: return "baseline1";
    case Segment::baseline2: return "baseline2";
  }
  return "task";
}

Segment parse_segment(std::string_view text) {
  if (text == "task") return Segment::task;
  if (text == "baseline1") return Segment::baseline1;
  if (text == "baseline2") return Segment::baseline2;
  throw Error(ErrorKind::parse, "unknown segment tag '" + std::string(text) + "'");
}

void FeatureTable::add(FeatureRow row) {
  if (rows_.empty() && dim_ == 0) dim_ = row.features.size();
  if (row.features.size() != dim_)
    throw Error(ErrorKind::dimension_mismatch,
                "feature row has " + std::to_string(row.features.size()) + " values, table has " +
                    std::to_string(dim_));
  rows_.push_back(std::move(row));
}

void FeatureTable::append(const FeatureTable& other) {
  for (const auto& r : other.rows()) add(r);
}

std::vector<int> FeatureTable::subjects() const {
  std::set<int> ids;
  for (const auto& r : rows_) ids.insert(r.subject);
  return {ids.begin(), ids.end()};
}

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

void write_feature_csv(std::ostream& out, const FeatureTable& table,
                       const std::vector<std::string>& comments) {
  for (const auto& c : comments) out << "# " << c << '\n';
  out << "subject,condition,segment";
  for (std::size_t f = 0; f < table.dim(); ++f) out << ",f" << f;
  out << '\n';
  for (const auto& r : table.rows()) {
    out << r.subject << ',' << r.condition << ',' << to_string(r.segment);
    for (double v : r.features) out << ',' << format_double(v);
    out << '\n';
  }
}

void write_feature_csv(const std::filesystem::path& path, const FeatureTable& table,
                       const std::vector<std::string>& comments) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::io, "cannot write " + path.string());
  write_feature_csv(out, table, comments);
}

namespace {

std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> parts;
  std::size_t pos = 0;
  while (true) {
    auto comma = line.find(',', pos);
    parts.push_back(line.substr(pos, comma - pos));
    if (comma == std::string_view::npos) break;
    pos = comma + 1;
  }
  return parts;
}

template <class T>
T parse_number(std::string_view text, std::size_t line_no) {
  T value{};
  auto res = std::from_chars(text.data(), text.data() + text.size(), value);
  if (res.ec != std::errc{} || res.ptr != text.data() + text.size())
    throw Error(ErrorKind::parse, "line " + std::to_string(line_no) + ": bad number '" +
                                      std::string(text) + "'");
  return value;
}

}  // namespace

FeatureTable read_feature_csv(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  std::size_t dim = 0;
  bool have_header = false;
  FeatureTable table;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    auto parts = split_commas(line);
    if (!have_header) {
      if (parts.size() < 3 || parts[0] != "subject" || parts[1] != "condition" ||
          parts[2] != "segment")
        throw Error(ErrorKind::parse, "feature CSV header must start with subject,condition,segment");
      dim = parts.size() - 3;
      table = FeatureTable(dim);
      have_header = true;
      continue;
    }
    if (parts.size() != dim + 3)
      throw Error(ErrorKind::parse, "line " + std::to_string(line_no) + ": expected " +
                                        std::to_string(dim + 3) + " fields");
    FeatureRow row;
    row.subject = parse_number<int>(parts[0], line_no);
    row.condition = parse_number<int>(parts[1], line_no);
    row.segment = parse_segment(parts[2]);
    row.features.reserve(dim);
    for (std::size_t f = 0; f < dim; ++f) row.features.push_back(parse_number<double>(parts[3 + f], line_no));
    table.add(std::move(row));
  }
  if (!have_header) throw Error(ErrorKind::parse, "feature CSV has no header");
  return table;
}

FeatureTable read_feature_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::io, "cannot read " + path.string());
  return read_feature_csv(in);
}

}  // namespace shiftlab

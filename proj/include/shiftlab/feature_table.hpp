#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace shiftlab {

enum class Segment { task, baseline1, baseline2 };

std::string_view to_string(Segment s);
Segment parse_segment(std::string_view text);

// Workload condition labels used by the EEG pipeline. Synthetic feature-space
// domains reuse the same integer column for their binary class label.
inline constexpr int kConditionLow = 0;
inline constexpr int kConditionHigh = 1;
inline constexpr int kNoCondition = -1;

struct FeatureRow {
  int subject = 0;
  int condition = kNoCondition;
  Segment segment = Segment::task;
  std::vector<double> features;

  bool operator==(const FeatureRow&) const = default;
};

// Rows of (subject, condition, segment, feature vector). Every row has the
// same feature dimension.
class FeatureTable {
 public:
  FeatureTable() = default;
  explicit FeatureTable(std::size_t dim) : dim_(dim) {}

  std::size_t dim() const noexcept { return dim_; }
  std::size_t size() const noexcept { return rows_.size(); }
  bool empty() const noexcept { return rows_.empty(); }

  void add(FeatureRow row);
  void append(const FeatureTable& other);

  const std::vector<FeatureRow>& rows() const noexcept { return rows_; }
  std::vector<FeatureRow>& rows() noexcept { return rows_; }
  const FeatureRow& operator[](std::size_t i) const { return rows_[i]; }

  // Distinct subject ids in ascending order.
  std::vector<int> subjects() const;

  bool operator==(const FeatureTable&) const = default;

 private:
  std::size_t dim_ = 0;
  std::vector<FeatureRow> rows_;
};

// CSV layout: optional leading "# ..." comment lines, then a header
// `subject,condition,segment,f0,...,f{d-1}` and one line per row.
// Values are written with 17 significant digits so reading back is exact.
void write_feature_csv(std::ostream& out, const FeatureTable& table,
                       const std::vector<std::string>& comments = {});
void write_feature_csv(const std::filesystem::path& path, const FeatureTable& table,
                       const std::vector<std::string>& comments = {});
FeatureTable read_feature_csv(std::istream& in);
FeatureTable read_feature_csv(const std::filesystem::path& path);

// Shortest round-trip text for a double; shared by every CSV/JSON writer.
std::string format_double(double v);

}  // namespace shiftlab

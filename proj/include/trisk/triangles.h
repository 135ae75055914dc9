#pragma once

#include <cstddef>
#include <iosfwd>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace trisk {

struct Cell {
  int i;  // accident semester, 1-based
  int j;  // development lag, 1-based
};

/// Square run-off index: I accident semesters, J = I development lags.
/// Cell (i, j) is observed when i + j <= I + 1.
class TriangleIndex {
public:
  TriangleIndex() = default;
  explicit TriangleIndex(int size);

  int I() const noexcept { return size_; }
  int J() const noexcept { return size_; }
  int observed_in_row(int i) const noexcept { return size_ + 1 - i; }
  bool observed(int i, int j) const noexcept { return i + j <= size_ + 1; }
  bool contains(int i, int j) const noexcept {
    return i >= 1 && j >= 1 && i <= size_ && j <= size_;
  }

  std::size_t upper_count() const noexcept {
    return static_cast<std::size_t>(size_) * (size_ + 1) / 2;
  }
  std::size_t lower_count() const noexcept {
    return static_cast<std::size_t>(size_) * (size_ - 1) / 2;
  }

  /// Row-major position of an observed cell within the upper set.
  std::size_t upper_position(int i, int j) const noexcept {
    return row_start(i) + static_cast<std::size_t>(j - 1);
  }
  std::vector<Cell> upper_cells() const;
  /// Row-major lower cells: (2, J), (3, J-1), (3, J), ...
  std::vector<Cell> lower_cells() const;

  /// Payment period of a cell counted from the valuation date, i + j - (I+1).
  int period(int i, int j) const noexcept { return i + j - (size_ + 1); }

  bool operator==(const TriangleIndex& other) const noexcept { return size_ == other.size_; }

private:
  std::size_t row_start(int i) const noexcept {
    // sum_{r < i} (I + 1 - r)
    const std::size_t r = static_cast<std::size_t>(i - 1);
    return r * (size_ + 1) - r * (r + 1) / 2;
  }

  int size_ = 0;
};

class LossTriangle {
public:
  /// Builds ratios claim / premium. Negative claims are clamped to 0; the
  /// number of clamped cells is written to *clamped when non-null.
  static LossTriangle from_incremental_claims(std::string line_id, const TriangleIndex& index,
                                              std::vector<double> premiums,
                                              const std::map<std::pair<int, int>, double>& claims,
                                              std::size_t* clamped = nullptr);

  /// Ratios given directly (row-major over the upper set); claims are
  /// ratio * premium.
  static LossTriangle from_ratios(std::string line_id, const TriangleIndex& index,
                                  std::vector<double> premiums, std::vector<double> ratios);

  const std::string& line_id() const noexcept { return line_id_; }
  const std::string& region() const noexcept { return region_; }
  const std::string& coverage() const noexcept { return coverage_; }
  void set_labels(std::string region, std::string coverage);

  const TriangleIndex& index() const noexcept { return index_; }
  double premium(int i) const { return premiums_.at(static_cast<std::size_t>(i - 1)); }
  const std::vector<double>& premiums() const noexcept { return premiums_; }
  double ratio(int i, int j) const { return ratios_.at(index_.upper_position(i, j)); }
  double claim(int i, int j) const { return claims_.at(index_.upper_position(i, j)); }
  /// Ratios row-major over the upper set.
  const std::vector<double>& ratios() const noexcept { return ratios_; }

private:
  LossTriangle() = default;

  std::string line_id_;
  std::string region_;
  std::string coverage_;
  TriangleIndex index_;
  std::vector<double> premiums_;
  std::vector<double> claims_;
  std::vector<double> ratios_;
};

struct Portfolio {
  TriangleIndex index;
  std::vector<LossTriangle> lines;
  int first_year = 2000;  // label of i = 1 is "<first_year>-<first_half>"
  int first_half = 1;
  std::size_t clamped = 0;

  const LossTriangle& line(const std::string& id) const;
  std::string semester_label(int i) const;
};

Portfolio read_csv(std::istream& in);
Portfolio load_csv(const std::string& path);
void write_csv(const Portfolio& portfolio, std::ostream& out);
void save_csv(const Portfolio& portfolio, const std::string& path);

}  // namespace trisk

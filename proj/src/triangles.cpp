#include "trisk/triangles.h"

#include "trisk/error.h"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <unordered_map>

namespace trisk {

TriangleIndex::TriangleIndex(int size) : size_(size) {
  if (size < 1) throw Error(ErrorCode::domain, "triangle size must be positive");
}

std::vector<Cell> TriangleIndex::upper_cells() const {
  std::vector<Cell> out;
  out.reserve(upper_count());
  for (int i = 1; i <= size_; ++i) {
    for (int j = 1; j <= observed_in_row(i); ++j) out.push_back({i, j});
  }
  return out;
}

std::vector<Cell> TriangleIndex::lower_cells() const {
  std::vector<Cell> out;
  out.reserve(lower_count());
  for (int i = 2; i <= size_; ++i) {
    for (int j = observed_in_row(i) + 1; j <= size_; ++j) out.push_back({i, j});
  }
  return out;
}

namespace {

std::string cell_name(int i, int j) {
  std::ostringstream os;
  os << "(" << i << "," << j << ")";
  return os.str();
}

void check_premiums(const std::string& line_id, const TriangleIndex& index,
                    const std::vector<double>& premiums) {
  if (premiums.size() != static_cast<std::size_t>(index.I())) {
    throw Error(ErrorCode::ingestion, "line " + line_id + ": premium vector has wrong length");
  }
  for (std::size_t i = 0; i < premiums.size(); ++i) {
    if (!(premiums[i] > 0.0) || !std::isfinite(premiums[i])) {
      throw Error(ErrorCode::ingestion, "line " + line_id + ": nonpositive premium for semester " +
                                            std::to_string(i + 1));
    }
  }
}

}  // namespace

LossTriangle LossTriangle::from_incremental_claims(
    std::string line_id, const TriangleIndex& index, std::vector<double> premiums,
    const std::map<std::pair<int, int>, double>& claims, std::size_t* clamped) {
  check_premiums(line_id, index, premiums);
  LossTriangle t;
  t.line_id_ = std::move(line_id);
  t.index_ = index;
  t.premiums_ = std::move(premiums);
  t.claims_.resize(index.upper_count());
  t.ratios_.resize(index.upper_count());
  std::size_t n_clamped = 0;
  for (const Cell& c : index.upper_cells()) {
    const auto it = claims.find({c.i, c.j});
    if (it == claims.end()) {
      throw Error(ErrorCode::ingestion, "line " + t.line_id_ + ": missing cell " + cell_name(c.i, c.j));
    }
    double claim = it->second;
    if (!std::isfinite(claim)) {
      throw Error(ErrorCode::ingestion, "line " + t.line_id_ + ": non-finite claim at " + cell_name(c.i, c.j));
    }
    if (claim < 0.0) {
      claim = 0.0;
      ++n_clamped;
    }
    const std::size_t pos = index.upper_position(c.i, c.j);
    t.claims_[pos] = claim;
    t.ratios_[pos] = claim / t.premiums_[c.i - 1];
  }
  for (const auto& [key, value] : claims) {
    if (!index.contains(key.first, key.second) || !index.observed(key.first, key.second)) {
      throw Error(ErrorCode::ingestion, "line " + t.line_id_ + ": lower-triangle cell in input " +
                                            cell_name(key.first, key.second));
    }
  }
  if (clamped) *clamped = n_clamped;
  return t;
}

LossTriangle LossTriangle::from_ratios(std::string line_id, const TriangleIndex& index,
                                       std::vector<double> premiums, std::vector<double> ratios) {
  check_premiums(line_id, index, premiums);
  if (ratios.size() != index.upper_count()) {
    throw Error(ErrorCode::ingestion, "line " + line_id + ": ratio vector has wrong length");
  }
  LossTriangle t;
  t.line_id_ = std::move(line_id);
  t.index_ = index;
  t.premiums_ = std::move(premiums);
  t.ratios_ = std::move(ratios);
  t.claims_.resize(t.ratios_.size());
  for (const Cell& c : index.upper_cells()) {
    const std::size_t pos = index.upper_position(c.i, c.j);
    if (!(t.ratios_[pos] >= 0.0) || !std::isfinite(t.ratios_[pos])) {
      throw Error(ErrorCode::ingestion, "line " + t.line_id_ + ": invalid ratio at " + cell_name(c.i, c.j));
    }
    t.claims_[pos] = t.ratios_[pos] * t.premiums_[c.i - 1];
  }
  return t;
}

void LossTriangle::set_labels(std::string region, std::string coverage) {
  region_ = std::move(region);
  coverage_ = std::move(coverage);
}

const LossTriangle& Portfolio::line(const std::string& id) const {
  for (const auto& t : lines) {
    if (t.line_id() == id) return t;
  }
  throw Error(ErrorCode::config, "unknown line " + id);
}

std::string Portfolio::semester_label(int i) const {
  const int key = first_year * 2 + (first_half - 1) + (i - 1);
  return std::to_string(key / 2) + "-" + std::to_string(key % 2 + 1);
}

// ---------------------------------------------------------------- CSV

namespace {

const char* const kColumns[] = {"line_id", "region", "coverage", "accident_semester",
                                "development_lag", "premium", "incremental_claim"};
constexpr int kNumColumns = 7;

[[noreturn]] void row_error(std::size_t row, const std::string& what) {
  throw Error(ErrorCode::ingestion, "row " + std::to_string(row) + ": " + what);
}

std::string trim(std::string s) {
  const auto issp = [](unsigned char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\n'; };
  while (!s.empty() && issp(s.back())) s.pop_back();
  std::size_t b = 0;
  while (b < s.size() && issp(s[b])) ++b;
  return s.substr(b);
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream is(line);
  while (std::getline(is, field, ',')) out.push_back(trim(field));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_real(const std::string& s, std::size_t row, const char* what) {
  double v = 0.0;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  if (!s.empty() && *first == '+') ++first;
  const auto res = std::from_chars(first, last, v);
  if (s.empty() || res.ec != std::errc() || res.ptr != last) {
    row_error(row, std::string("cannot parse ") + what + " '" + s + "'");
  }
  return v;
}

int parse_int(const std::string& s, std::size_t row, const char* what) {
  int v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    row_error(row, std::string("cannot parse ") + what + " '" + s + "'");
  }
  return v;
}

// "YYYY-1" / "YYYY-2" -> 2*YYYY + half - 1
int parse_semester(const std::string& s, std::size_t row) {
  const auto dash = s.rfind('-');
  if (dash == std::string::npos || dash == 0) row_error(row, "bad accident_semester '" + s + "'");
  const int year = parse_int(s.substr(0, dash), row, "accident_semester year");
  const int half = parse_int(s.substr(dash + 1), row, "accident_semester half");
  if (half != 1 && half != 2) row_error(row, "accident_semester half must be 1 or 2 in '" + s + "'");
  return year * 2 + half - 1;
}

struct Row {
  std::size_t number;
  int semester_key;
  int lag;
  double premium;
  double claim;
};

struct LineRows {
  std::string region;
  std::string coverage;
  std::vector<Row> rows;
};

}  // namespace

Portfolio read_csv(std::istream& in) {
  std::string line;
  std::size_t row = 0;
  // Header.
  while (std::getline(in, line)) {
    ++row;
    if (!trim(line).empty()) break;
  }
  if (trim(line).empty()) throw Error(ErrorCode::ingestion, "no rows");
  if (row == 1 && line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
  const auto header = split(line);
  int pos[kNumColumns];
  for (int c = 0; c < kNumColumns; ++c) {
    const auto it = std::find(header.begin(), header.end(), kColumns[c]);
    if (it == header.end()) {
      throw Error(ErrorCode::schema, "row " + std::to_string(row) + ": header lacks column " + kColumns[c]);
    }
    pos[c] = static_cast<int>(it - header.begin());
  }

  std::vector<std::string> order;
  std::unordered_map<std::string, LineRows> by_line;
  int min_key = 0;
  int max_key = 0;
  int max_lag = 0;
  bool any = false;
  while (std::getline(in, line)) {
    ++row;
    if (trim(line).empty()) continue;
    const auto f = split(line);
    if (f.size() != header.size()) {
      row_error(row, "expected " + std::to_string(header.size()) + " fields, found " + std::to_string(f.size()));
    }
    const std::string& id = f[pos[0]];
    if (id.empty()) row_error(row, "empty line_id");
    Row r;
    r.number = row;
    r.semester_key = parse_semester(f[pos[3]], row);
    r.lag = parse_int(f[pos[4]], row, "development_lag");
    if (r.lag < 1) row_error(row, "development_lag must be >= 1");
    r.premium = parse_real(f[pos[5]], row, "premium");
    r.claim = parse_real(f[pos[6]], row, "incremental_claim");
    if (!(r.premium > 0.0) || !std::isfinite(r.premium)) row_error(row, "premium must be positive");
    if (!std::isfinite(r.claim)) row_error(row, "incremental_claim must be finite");

    auto [it, fresh] = by_line.try_emplace(id);
    if (fresh) {
      order.push_back(id);
      it->second.region = f[pos[1]];
      it->second.coverage = f[pos[2]];
    } else if (it->second.region != f[pos[1]] || it->second.coverage != f[pos[2]]) {
      row_error(row, "region/coverage differ from earlier rows of line " + id);
    }
    it->second.rows.push_back(r);
    if (!any) {
      min_key = max_key = r.semester_key;
      any = true;
    }
    min_key = std::min(min_key, r.semester_key);
    max_key = std::max(max_key, r.semester_key);
    max_lag = std::max(max_lag, r.lag);
  }
  if (!any) throw Error(ErrorCode::ingestion, "no rows");

  const int I = max_key - min_key + 1;
  if (I != max_lag) {
    throw Error(ErrorCode::schema, "triangle is not square: " + std::to_string(I) + " semesters, " +
                                       std::to_string(max_lag) + " lags");
  }
  Portfolio out;
  out.index = TriangleIndex(I);
  out.first_year = min_key / 2;
  out.first_half = min_key % 2 + 1;

  for (const auto& id : order) {
    const LineRows& lr = by_line.at(id);
    std::vector<double> premiums(I, 0.0);
    std::map<std::pair<int, int>, double> claims;
    for (const Row& r : lr.rows) {
      const int i = r.semester_key - min_key + 1;
      if (!out.index.observed(i, r.lag)) row_error(r.number, "lower-triangle cell in input");
      if (!claims.emplace(std::make_pair(i, r.lag), r.claim).second) {
        row_error(r.number, "duplicate cell for line " + id + " " + cell_name(i, r.lag));
      }
      double& prem = premiums[i - 1];
      if (prem == 0.0) {
        prem = r.premium;
      } else if (prem != r.premium) {
        row_error(r.number, "premium differs from earlier rows of the same accident semester");
      }
    }
    for (int i = 1; i <= I; ++i) {
      if (premiums[i - 1] == 0.0) {
        throw Error(ErrorCode::ingestion, "line " + id + ": missing cell " + cell_name(i, 1));
      }
    }
    std::size_t clamped = 0;
    auto t = LossTriangle::from_incremental_claims(id, out.index, std::move(premiums), claims, &clamped);
    t.set_labels(lr.region, lr.coverage);
    out.clamped += clamped;
    out.lines.push_back(std::move(t));
  }
  return out;
}

Portfolio load_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::io, "cannot open " + path);
  return read_csv(in);
}

void write_csv(const Portfolio& portfolio, std::ostream& out) {
  for (int c = 0; c < kNumColumns; ++c) out << (c ? "," : "") << kColumns[c];
  out << '\n';
  char buf[64];
  for (const auto& t : portfolio.lines) {
    for (const Cell& c : portfolio.index.upper_cells()) {
      out << t.line_id() << ',' << t.region() << ',' << t.coverage() << ','
          << portfolio.semester_label(c.i) << ',' << c.j << ',';
      std::snprintf(buf, sizeof buf, "%.17g", t.premium(c.i));
      out << buf << ',';
      std::snprintf(buf, sizeof buf, "%.17g", t.claim(c.i, c.j));
      out << buf << '\n';
    }
  }
}

void save_csv(const Portfolio& portfolio, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::io, "cannot write " + path);
  write_csv(portfolio, out);
  if (!out) throw Error(ErrorCode::io, "write failed for " + path);
}

}  // namespace trisk

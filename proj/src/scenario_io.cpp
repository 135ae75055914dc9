#include "trisk/scenario_io.h"

#include "trisk/error.h"

#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

namespace trisk {

namespace {

static_assert(std::endian::native == std::endian::little, "scenario files assume a little-endian host");

template <class T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T take(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw Error(ErrorCode::schema, "scenario file is truncated");
  return v;
}

}  // namespace

void write_scenarios(const ScenarioSet& set, std::ostream& out) {
  out.write(kScenarioMagic, sizeof kScenarioMagic);
  put<std::uint64_t>(out, set.n);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(set.K));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(set.I));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(set.I));
  put<std::uint64_t>(out, set.seed);
  put<double>(out, set.discount_rate);
  for (const auto& id : set.lines) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(id.size()));
    out.write(id.data(), static_cast<std::streamsize>(id.size()));
  }
  out.write(reinterpret_cast<const char*>(set.cash_flow.data()),
            static_cast<std::streamsize>(set.cash_flow.size() * sizeof(double)));
  if (!out) throw Error(ErrorCode::io, "failed writing scenario data");
}

ScenarioSet read_scenarios(std::istream& in) {
  char magic[8];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kScenarioMagic, sizeof magic) != 0) {
    throw Error(ErrorCode::schema, "not a scenario file (bad magic)");
  }
  ScenarioSet set;
  set.n = take<std::uint64_t>(in);
  set.K = static_cast<int>(take<std::uint32_t>(in));
  set.I = static_cast<int>(take<std::uint32_t>(in));
  const int J = static_cast<int>(take<std::uint32_t>(in));
  set.seed = take<std::uint64_t>(in);
  set.discount_rate = take<double>(in);
  if (J != set.I || set.I < 2 || set.K < 1 || set.n < 1) throw Error(ErrorCode::schema, "scenario file: bad dimensions");
  for (int k = 0; k < set.K; ++k) {
    const auto len = take<std::uint32_t>(in);
    if (len > 4096) throw Error(ErrorCode::schema, "scenario file: implausible line id length");
    std::string id(len, '\0');
    in.read(id.data(), len);
    if (!in) throw Error(ErrorCode::schema, "scenario file is truncated");
    set.lines.push_back(std::move(id));
  }
  set.cash_flow.resize(set.n * static_cast<std::size_t>(set.K) * static_cast<std::size_t>(set.periods()));
  in.read(reinterpret_cast<char*>(set.cash_flow.data()), static_cast<std::streamsize>(set.cash_flow.size() * sizeof(double)));
  if (!in) throw Error(ErrorCode::schema, "scenario file is truncated");
  if (in.peek() != std::char_traits<char>::eof()) throw Error(ErrorCode::schema, "scenario file has trailing bytes");
  return set;
}

void save_scenarios(const ScenarioSet& set, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::io, "cannot write '" + path + "'");
  write_scenarios(set, out);
}

ScenarioSet load_scenarios(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::io, "cannot open '" + path + "'");
  return read_scenarios(in);
}

void write_scenario_summary(const ScenarioSet& set, std::ostream& out) {
  std::vector<std::vector<double>> lines;
  for (int k = 0; k < set.K; ++k) lines.push_back(set.discounted_line(k));
  out << "scenario";
  for (const auto& id : set.lines) out << ',' << id;
  out << ",aggregate\n";
  char buf[32];
  for (std::size_t s = 0; s < set.n; ++s) {
    out << s + 1;
    double total = 0.0;
    for (int k = 0; k < set.K; ++k) {
      const double v = lines[static_cast<std::size_t>(k)][s];
      total += v;
      std::snprintf(buf, sizeof buf, "%.17g", v);
      out << ',' << buf;
    }
    std::snprintf(buf, sizeof buf, "%.17g", total);
    out << ',' << buf << '\n';
  }
  if (!out) throw Error(ErrorCode::io, "failed writing scenario summary");
}

void save_scenario_summary(const ScenarioSet& set, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::io, "cannot write '" + path + "'");
  write_scenario_summary(set, out);
}

}  // namespace trisk

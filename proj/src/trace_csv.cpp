#include "gsmvi/trace_csv.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <fstream>
#include <tuple>

#include "gsmvi/errors.hpp"

namespace gsmvi {

std::string format_real(double v) {
  std::array<char, 64> buf{};
  const auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  if (ec != std::errc{}) throw Error("format_real: conversion failed");
  return std::string(buf.data(), end);
}

double parse_real(std::string_view text) {
  double v = 0.0;
  const char* first = text.data();
  const char* last = first + text.size();
  if (!text.empty() && *first == '+') ++first;
  const auto [end, ec] = std::from_chars(first, last, v);
  if (ec != std::errc{} || end != last || text.empty())
    throw InvalidArgument("not a number: '" + std::string(text) + "'");
  return v;
}

std::string trace_csv_text(std::vector<TraceRecord> records) {
  std::stable_sort(records.begin(), records.end(), [](const TraceRecord& a, const TraceRecord& b) {
    return std::tie(a.algorithm, a.run_id, a.iteration) < std::tie(b.algorithm, b.run_id, b.iteration);
  });
  std::string out(kTraceCsvHeader);
  out += '\n';
  for (const auto& r : records) {
    out += r.algorithm;
    out += ',';
    out += std::to_string(r.run_id);
    out += ',';
    out += std::to_string(r.iteration);
    out += ',';
    out += std::to_string(r.grad_evals);
    out += ',';
    out += metric_name(r.metric);
    out += ',';
    out += format_real(r.value);
    out += '\n';
  }
  return out;
}

void write_text_file(const std::filesystem::path& path, std::string_view text) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw Error("cannot open '" + path.string() + "' for writing");
  os.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!os) throw Error("write to '" + path.string() + "' failed");
}

void write_trace_csv(std::vector<TraceRecord> records, const std::filesystem::path& path) {
  if (records.empty()) throw InvalidArgument("write_trace_csv: no records");
  write_text_file(path, trace_csv_text(std::move(records)));
}

namespace {

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(sep, start);
    if (pos == std::string_view::npos) {
      parts.push_back(line.substr(start));
      return parts;
    }
    parts.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

template <typename Int>
Int parse_integer(std::string_view text) {
  Int v{};
  const auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc{} || end != text.data() + text.size() || text.empty())
    throw InvalidArgument("not an integer: '" + std::string(text) + "'");
  return v;
}

}  // namespace

std::vector<TraceRecord> read_trace_csv(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("cannot open '" + path.string() + "'");
  std::string line;
  if (!std::getline(is, line) || line != kTraceCsvHeader)
    throw InvalidArgument("'" + path.string() + "' does not start with the trace header");
  std::vector<TraceRecord> records;
  while (std::getline(is, line)) {
    const auto f = split(line, ',');
    if (f.size() != 6) throw InvalidArgument("malformed trace row: '" + line + "'");
    const auto metric = parse_metric(f[4]);
    if (!metric) throw InvalidArgument("unknown metric in trace row: '" + line + "'");
    records.push_back({std::string(f[0]), parse_integer<int>(f[1]), parse_integer<std::int64_t>(f[2]),
                       parse_integer<std::int64_t>(f[3]), *metric, parse_real(f[5])});
  }
  return records;
}

}  // namespace gsmvi

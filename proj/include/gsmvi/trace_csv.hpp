#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "gsmvi/monitor.hpp"

namespace gsmvi {

inline constexpr std::string_view kTraceCsvHeader = "algorithm,run_id,iteration,grad_evals,metric,value";

/// Shortest decimal text that reads back to the same double.
std::string format_real(double v);

/// Parses a full-string decimal; throws InvalidArgument otherwise.
double parse_real(std::string_view text);

/// Sorts by (algorithm, run_id, iteration) and renders the CSV, LF endings.
std::string trace_csv_text(std::vector<TraceRecord> records);

/// Writes trace_csv_text to `path`. Throws InvalidArgument on an empty
/// record list and Error on IO failure.
void write_trace_csv(std::vector<TraceRecord> records, const std::filesystem::path& path);

std::vector<TraceRecord> read_trace_csv(const std::filesystem::path& path);

/// Writes `text` to `path` byte for byte. Throws Error on failure.
void write_text_file(const std::filesystem::path& path, std::string_view text);

}  // namespace gsmvi

#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "probe/contour.hpp"
#include "probe/verify.hpp"

namespace probe {

/// 17 significant digits, so every double survives a text round trip.
std::string format_double(double v);

/// Header: n,eps,M,alpha,I,pairing_re,pairing_im,grad_energy_D,l2_D,h1semi_D,ratio,boundary_l2_D,residual,coef_norm
/// Companions absent from the series are written as empty fields.
std::string series_csv(const IndicatorSeries& series, const std::vector<ScheduleStep>& schedule);

struct SeriesTable {
  std::vector<ScheduleStep> steps;
  std::vector<IndicatorRow> rows;
};

/// Inverse of series_csv. Throws std::runtime_error on a malformed file.
SeriesTable parse_series_csv(const std::string& text);

/// Header: n,eps,M,alpha,residual,coef_norm,matching_points, then h1_<name> per test set.
std::string fit_report_csv(const NeedleSequence& seq, const std::vector<std::string>& test_names);

/// Header: ix,iy,x,y,value,status,inside,needle,note. Rows in the field's row-major order.
std::string field_csv(const IndicatorField& field);

/// One text line per grid row (iy ascending), whitespace-separated values; mask = 1/0 entries.
std::string grid_matrix(const IndicatorField& field, bool mask);

/// Header: polyline,index,x,y.
std::string contour_csv(const std::vector<Polyline>& lines);

/// Header: scenario,check,subject,status,stats,thresholds,note. Stats as name=value pairs joined by ';'.
std::string suite_csv(const std::vector<TheoremReport>& reports);

/// "key = value" lines.
std::string report_text(const std::vector<std::pair<std::string, std::string>>& entries);

std::string sha256_hex(const std::string& bytes);

/// Writes bytes exactly as given (no newline translation), creating parent directories.
void write_file(const std::filesystem::path& path, const std::string& bytes);

/// Manifest text: the timestamp on the first line alone, then "<sha256>  <name>" per file sorted by name.
std::string manifest_text(const std::filesystem::path& dir, std::vector<std::string> files, const std::string& timestamp);

}  // namespace probe

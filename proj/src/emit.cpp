#include "probe/emit.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <openssl/evp.h>

namespace probe {

namespace {

const char* const kSeriesHeader =
    "n,eps,M,alpha,I,pairing_re,pairing_im,grad_energy_D,l2_D,h1semi_D,ratio,boundary_l2_D,residual,coef_norm";

std::string opt(const std::optional<double>& v) { return v ? format_double(*v) : std::string(); }

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

double parse_double(const std::string& s) {
  std::size_t used = 0;
  const double v = std::stod(s, &used);
  if (used != s.size()) throw std::runtime_error("parse_series_csv: bad number '" + s + "'");
  return v;
}

std::optional<double> parse_opt(const std::string& s) {
  if (s.empty()) return std::nullopt;
  return parse_double(s);
}

std::string join_stats(const Stats& stats) {
  std::string out;
  for (const auto& [k, v] : stats) {
    if (!out.empty()) out += ';';
    out += k + "=" + format_double(v);
  }
  return out;
}

}  // namespace

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string series_csv(const IndicatorSeries& series, const std::vector<ScheduleStep>& schedule) {
  std::string out = std::string(kSeriesHeader) + "\n";
  for (const auto& r : series.rows) {
    if (r.n < 0 || r.n >= static_cast<int>(schedule.size())) throw std::invalid_argument("series_csv: row outside the schedule");
    const ScheduleStep& s = schedule[r.n];
    out += std::to_string(r.n) + "," + format_double(s.eps) + "," + std::to_string(s.order) + "," +
           format_double(s.alpha) + "," + format_double(r.value) + "," + format_double(r.pairing.real()) + "," +
           format_double(r.pairing.imag()) + "," + opt(r.grad_energy_D) + "," + opt(r.l2_D) + "," +
           opt(r.h1semi_D) + "," + opt(r.ratio) + "," + opt(r.boundary_l2_D) + "," + format_double(r.residual) +
           "," + format_double(r.coef_norm) + "\n";
  }
  return out;
}

SeriesTable parse_series_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != kSeriesHeader) throw std::runtime_error("parse_series_csv: unexpected header");
  SeriesTable t;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split(line, ',');
    if (f.size() != 14) throw std::runtime_error("parse_series_csv: expected 14 fields");
    IndicatorRow r;
    r.n = std::stoi(f[0]);
    t.steps.push_back({parse_double(f[1]), std::stoi(f[2]), parse_double(f[3])});
    r.value = parse_double(f[4]);
    r.pairing = Complex(parse_double(f[5]), parse_double(f[6]));
    r.grad_energy_D = parse_opt(f[7]);
    r.l2_D = parse_opt(f[8]);
    r.h1semi_D = parse_opt(f[9]);
    r.ratio = parse_opt(f[10]);
    r.boundary_l2_D = parse_opt(f[11]);
    r.residual = parse_double(f[12]);
    r.coef_norm = parse_double(f[13]);
    t.rows.push_back(r);
  }
  return t;
}

std::string fit_report_csv(const NeedleSequence& seq, const std::vector<std::string>& test_names) {
  std::string out = "n,eps,M,alpha,residual,coef_norm,matching_points";
  for (const auto& name : test_names) out += ",h1_" + name;
  out += "\n";
  for (const auto& el : seq.elements) {
    const FitReport& r = el.report;
    out += std::to_string(r.n) + "," + format_double(r.eps) + "," + std::to_string(r.order) + "," +
           format_double(r.alpha) + "," + format_double(r.residual) + "," + format_double(r.coef_norm) + "," +
           std::to_string(r.matching_points);
    for (std::size_t i = 0; i < test_names.size(); ++i) out += "," + (i < r.h1_on_K.size() ? format_double(r.h1_on_K[i]) : "");
    out += "\n";
  }
  return out;
}

std::string field_csv(const IndicatorField& field) {
  std::string out = "ix,iy,x,y,value,status,inside,needle,note\n";
  const int nx = field.grid.nx();
  for (std::size_t i = 0; i < field.entries.size(); ++i) {
    const FieldEntry& e = field.entries[i];
    out += std::to_string(static_cast<int>(i) % nx) + "," + std::to_string(static_cast<int>(i) / nx) + "," +
           format_double(e.x.x()) + "," + format_double(e.x.y()) + "," + format_double(e.value) + "," +
           to_string(e.status) + "," + (e.inside ? "1" : "0") + "," + csv_field(e.needle) + "," + csv_field(e.note) + "\n";
  }
  return out;
}

std::string grid_matrix(const IndicatorField& field, bool mask) {
  if (field.entries.empty()) return {};
  const int nx = field.grid.nx(), ny = field.grid.ny();
  std::string out;
  for (int iy = 0; iy < ny; ++iy) {
    for (int ix = 0; ix < nx; ++ix) {
      const FieldEntry& e = field.at(ix, iy);
      if (ix) out += ' ';
      out += mask ? (e.inside ? "1" : "0") : format_double(e.value);
    }
    out += "\n";
  }
  return out;
}

std::string contour_csv(const std::vector<Polyline>& lines) {
  std::string out = "polyline,index,x,y\n";
  for (std::size_t l = 0; l < lines.size(); ++l) {
    for (std::size_t i = 0; i < lines[l].size(); ++i) {
      out += std::to_string(l) + "," + std::to_string(i) + "," + format_double(lines[l][i].x()) + "," +
             format_double(lines[l][i].y()) + "\n";
    }
  }
  return out;
}

std::string suite_csv(const std::vector<TheoremReport>& reports) {
  std::string out = "scenario,check,subject,status,stats,thresholds,note\n";
  for (const auto& r : reports) {
    out += csv_field(r.scenario) + "," + to_string(r.check) + "," + csv_field(r.subject) + "," + to_string(r.status) +
           "," + csv_field(join_stats(r.stats)) + "," + csv_field(join_stats(r.thresholds)) + "," + csv_field(r.note) +
           "\n";
  }
  return out;
}

std::string report_text(const std::vector<std::pair<std::string, std::string>>& entries) {
  std::string out;
  for (const auto& [k, v] : entries) out += k + " = " + v + "\n";
  return out;
}

std::string sha256_hex(const std::string& bytes) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (!EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr)) {
    throw std::runtime_error("sha256: digest failed");
  }
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 15];
  }
  return out;
}

void write_file(const std::filesystem::path& path, const std::string& bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("write failed for '" + path.string() + "'");
}

std::string manifest_text(const std::filesystem::path& dir, std::vector<std::string> files, const std::string& timestamp) {
  std::sort(files.begin(), files.end());
  files.erase(std::unique(files.begin(), files.end()), files.end());
  std::string out = "created: " + timestamp + "\n";
  for (const auto& name : files) {
    std::ifstream in(dir / name, std::ios::binary);
    if (!in) throw std::runtime_error("manifest: cannot read '" + name + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    out += sha256_hex(ss.str()) + "  " + name + "\n";
  }
  return out;
}

}  // namespace probe

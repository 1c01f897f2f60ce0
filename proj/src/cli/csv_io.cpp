#include "bnpc/cli/csv_io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

namespace bnpc::cli {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_cell(const std::string& s, std::size_t row, const std::string& col) {
  if (s.empty()) return std::numeric_limits<double>::quiet_NaN();
  double v = 0.0;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  if (*first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last) {
    throw Error(ErrorKind::ParseError, "row " + std::to_string(row) + ", column '" + col + "': cannot parse '" + s + "'");
  }
  return v;
}

}  // namespace

std::string format_double(double v) {
  if (std::isnan(v)) return "";
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc()) throw Error(ErrorKind::IoError, "cannot format number");
  return std::string(buf, ptr);
}

Dataset read_dataset(std::istream& is, const Schema& schema) {
  std::string line;
  std::vector<std::string> header;
  while (std::getline(is, line)) {
    if (!trim(line).empty()) {
      header = split_line(line);
      break;
    }
  }
  if (header.empty()) throw Error(ErrorKind::EmptyFile, "no header row");
  std::map<std::string, std::size_t> col_of;
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (header[c].empty()) throw Error(ErrorKind::ParseError, "column " + std::to_string(c + 1) + " has an empty name");
    if (!col_of.emplace(header[c], c).second) throw Error(ErrorKind::ParseError, "duplicate column '" + header[c] + "'");
  }
  auto need = [&](const std::string& name) {
    const auto it = col_of.find(name);
    if (it == col_of.end()) throw Error(ErrorKind::ParseError, "column '" + name + "' not found in header");
    return it->second;
  };
  const std::size_t cy = need(schema.outcome);
  const std::size_t ca = need(schema.treatment);
  std::optional<std::size_t> cm;
  if (schema.mediator) cm = need(*schema.mediator);
  std::vector<std::size_t> cx;
  std::vector<std::string> names;
  if (schema.covariates.empty()) {
    for (std::size_t c = 0; c < header.size(); ++c) {
      if (c == cy || c == ca || (cm && c == *cm)) continue;
      cx.push_back(c);
      names.push_back(header[c]);
    }
  } else {
    for (const auto& name : schema.covariates) {
      cx.push_back(need(name));
      names.push_back(name);
    }
  }

  std::vector<std::vector<double>> rows;
  std::size_t row_no = 1;
  while (std::getline(is, line)) {
    ++row_no;
    if (trim(line).empty()) continue;
    const auto cells = split_line(line);
    if (cells.size() != header.size()) {
      throw Error(ErrorKind::ParseError, "row " + std::to_string(row_no) + ": expected " + std::to_string(header.size()) +
                                             " fields, found " + std::to_string(cells.size()));
    }
    std::vector<double> r(cells.size());
    for (std::size_t c = 0; c < cells.size(); ++c) r[c] = parse_cell(cells[c], row_no, header[c]);
    rows.push_back(std::move(r));
  }
  if (rows.empty()) throw Error(ErrorKind::EmptyFile, "no data rows");

  Dataset d;
  const auto n = static_cast<Eigen::Index>(rows.size());
  d.y.resize(n);
  d.a.resize(n);
  d.x.resize(n, static_cast<Eigen::Index>(cx.size()));
  if (cm) d.m = VectorXd(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& r = rows[static_cast<std::size_t>(i)];
    d.y(i) = r[cy];
    d.a(i) = r[ca];
    if (cm) (*d.m)(i) = r[*cm];
    for (std::size_t j = 0; j < cx.size(); ++j) d.x(i, static_cast<Eigen::Index>(j)) = r[cx[j]];
  }
  d.covariate_names = names;
  if (schema.running) {
    const auto it = std::find(names.begin(), names.end(), *schema.running);
    if (it == names.end()) throw Error(ErrorKind::ConfigError, "running variable '" + *schema.running + "' is not a covariate");
    d.running = static_cast<int>(it - names.begin());
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    if (d.a(i) != 0.0 && d.a(i) != 1.0) {
      throw Error(ErrorKind::NonBinaryTreatment, "row " + std::to_string(i + 2) + ": treatment value '" +
                                                     format_double(d.a(i)) + "' is not 0 or 1");
    }
  }
  d.validate();
  return d;
}

Dataset read_dataset(const std::filesystem::path& path, const Schema& schema) {
  std::ifstream is(path);
  if (!is) throw Error(ErrorKind::IoError, "cannot open " + path.string());
  return read_dataset(is, schema);
}

Schema schema_for(const Dataset& data) {
  Schema s;
  if (data.m) s.mediator = "m";
  s.covariates = data.covariate_names;
  if (s.covariates.empty()) {
    for (Eigen::Index j = 0; j < data.p(); ++j) s.covariates.push_back("x" + std::to_string(j + 1));
  }
  if (data.running) s.running = s.covariates[static_cast<std::size_t>(*data.running)];
  return s;
}

void write_dataset(std::ostream& os, const Dataset& data, const Schema& schema) {
  const Schema s = schema.covariates.empty() ? schema_for(data) : schema;
  if (static_cast<Eigen::Index>(s.covariates.size()) != data.p()) {
    throw Error(ErrorKind::DimensionMismatch, "schema covariate count differs from the dataset");
  }
  os << s.outcome << ',' << s.treatment;
  if (data.m) os << ',' << s.mediator.value_or("m");
  for (const auto& c : s.covariates) os << ',' << c;
  os << '\n';
  for (Eigen::Index i = 0; i < data.n(); ++i) {
    os << format_double(data.y(i)) << ',' << format_double(data.a(i));
    if (data.m) os << ',' << format_double((*data.m)(i));
    for (Eigen::Index j = 0; j < data.p(); ++j) os << ',' << format_double(data.x(i, j));
    os << '\n';
  }
}

void write_dataset(const std::filesystem::path& path, const Dataset& data, const Schema& schema) {
  std::ofstream os(path);
  if (!os) throw Error(ErrorKind::IoError, "cannot write " + path.string());
  write_dataset(os, data, schema);
}

}  // namespace bnpc::cli

#include "doseband/io.hpp"

#include <charconv>
#include <fstream>
#include <map>
#include <optional>

#include "doseband/error.hpp"

namespace doseband {

namespace {

double parse_double(const std::string& s, const std::string& path, std::size_t line) {
  double v = 0.0;
  const auto* end = s.data() + s.size();
  const auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || ptr != end) {
    throw InputError(path + ":" + std::to_string(line) + ": cannot parse number '" + s + "'");
  }
  return v;
}

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path);
  return in;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path);
  return out;
}

std::map<std::string, std::size_t> header_index(const std::vector<std::string>& header) {
  std::map<std::string, std::size_t> idx;
  for (std::size_t i = 0; i < header.size(); ++i) idx[header[i]] = i;
  return idx;
}

}  // namespace

std::string format_double(double v) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    std::string field = line.substr(start, comma == std::string::npos ? std::string::npos
                                                                      : comma - start);
    const auto b = field.find_first_not_of(" \t\r");
    const auto e = field.find_last_not_of(" \t\r");
    out.push_back(b == std::string::npos ? std::string() : field.substr(b, e - b + 1));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

Dataset read_dataset_csv(const std::string& path) {
  auto in = open_in(path);
  std::string line;
  if (!std::getline(in, line)) throw InputError(path + ": empty file");
  const auto header = split_csv_line(line);
  const auto idx = header_index(header);
  if (!idx.count("t") || !idx.count("y")) throw InputError(path + ": header needs t and y columns");
  std::vector<std::size_t> x_cols;
  for (std::size_t j = 0;; ++j) {
    const auto it = idx.find("x_" + std::to_string(j));
    if (it == idx.end()) break;
    x_cols.push_back(it->second);
  }
  if (x_cols.empty()) throw InputError(path + ": header needs x_0 ... columns");
  const std::optional<std::size_t> u_col =
      idx.count("u") ? std::optional(idx.at("u")) : std::nullopt;

  Dataset data;
  data.dim = x_cols.size();
  std::vector<double> xi(data.dim);
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto f = split_csv_line(line);
    if (f.size() != header.size()) {
      throw InputError(path + ":" + std::to_string(line_no) + ": expected " +
                       std::to_string(header.size()) + " fields");
    }
    for (std::size_t j = 0; j < data.dim; ++j) xi[j] = parse_double(f[x_cols[j]], path, line_no);
    data.push_back(xi, parse_double(f[idx.at("t")], path, line_no),
                   parse_double(f[idx.at("y")], path, line_no));
    if (u_col) data.u.push_back(parse_double(f[*u_col], path, line_no));
  }
  data.validate();
  return data;
}

void write_dataset_csv(const std::string& path, const Dataset& data) {
  data.validate();
  auto out = open_out(path);
  if (data.has_u()) out << "u,";
  for (std::size_t j = 0; j < data.dim; ++j) out << "x_" << j << ',';
  out << "t,y\n";
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (data.has_u()) out << format_double(data.u[i]) << ',';
    for (double v : data.row_x(i)) out << format_double(v) << ',';
    out << format_double(data.t[i]) << ',' << format_double(data.y[i]) << '\n';
  }
  if (!out) throw InputError("failed writing " + path);
}

std::vector<OracleRow> read_oracle_csv(const std::string& path) {
  auto in = open_in(path);
  std::string line;
  if (!std::getline(in, line)) throw InputError(path + ": empty file");
  const auto header = split_csv_line(line);
  const auto idx = header_index(header);
  for (const char* col : {"x", "t", "u", "capo_u", "lambda_star"}) {
    if (!idx.count(col)) throw InputError(path + ": missing oracle column '" + col + "'");
  }
  std::vector<OracleRow> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto f = split_csv_line(line);
    if (f.size() != header.size()) {
      throw InputError(path + ":" + std::to_string(line_no) + ": expected " +
                       std::to_string(header.size()) + " fields");
    }
    OracleRow r;
    r.x = parse_double(f[idx.at("x")], path, line_no);
    r.t = parse_double(f[idx.at("t")], path, line_no);
    r.u = static_cast<int>(parse_double(f[idx.at("u")], path, line_no));
    r.capo_u = parse_double(f[idx.at("capo_u")], path, line_no);
    r.capo = idx.count("capo") ? parse_double(f[idx.at("capo")], path, line_no) : 0.0;
    r.lambda_star = parse_double(f[idx.at("lambda_star")], path, line_no);
    rows.push_back(r);
  }
  return rows;
}

void write_oracle_csv(const std::string& path, const std::vector<OracleRow>& rows) {
  auto out = open_out(path);
  out << "x,t,u,capo_u,capo,lambda_star\n";
  for (const auto& r : rows) {
    out << format_double(r.x) << ',' << format_double(r.t) << ',' << r.u << ','
        << format_double(r.capo_u) << ',' << format_double(r.capo) << ','
        << format_double(r.lambda_star) << '\n';
  }
  if (!out) throw InputError("failed writing " + path);
}

}  // namespace doseband

#include "flowgrav/io.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numbers>
#include <sstream>

namespace flowgrav {

namespace detail {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      cells.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  cells.push_back(cur);
  for (auto& cell : cells) {
    const auto b = cell.find_first_not_of(" \t");
    const auto e = cell.find_last_not_of(" \t");
    cell = b == std::string::npos ? std::string() : cell.substr(b, e - b + 1);
  }
  return cells;
}

double parse_number(const std::string& cell, const std::string& where) {
  if (cell.empty()) throw Error("bad_number", "empty cell at " + where);
  char* end = nullptr;
  const double v = std::strtod(cell.c_str(), &end);
  if (end != cell.c_str() + cell.size())
    throw Error("bad_number", "'" + cell + "' at " + where + " is not a number");
  return v;
}

}  // namespace detail

namespace {

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::ifstream open_input(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("io_error", "cannot open '" + path + "' for reading");
  return in;
}

// Reads lines, dropping a UTF-8 BOM on the first one.
bool next_line(std::istream& in, std::string& line, bool& first) {
  if (!std::getline(in, line)) return false;
  if (first) {
    if (line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
    first = false;
  }
  return true;
}

std::map<std::string, Transform> parse_transform_line(const std::string& line,
                                                      const std::string& path) {
  const std::string prefix = "#transform:";
  if (line.rfind(prefix, 0) != 0)
    throw Error("missing_transform",
                "'" + path + "' must start with a '#transform: var=log,...' line");
  std::map<std::string, Transform> out;
  for (const auto& item : detail::split_csv_line(line.substr(prefix.size()))) {
    if (item.empty()) continue;
    const auto eq = item.find('=');
    if (eq == std::string::npos)
      throw Error("missing_transform", "'" + item + "' in the transform line of '" + path +
                                           "' is not var=transform");
    const std::string name = item.substr(0, eq);
    if (out.count(name))
      throw Error("missing_transform", "transform for '" + name + "' given twice in '" + path + "'");
    out[name] = transform_from_string(item.substr(eq + 1));
  }
  return out;
}

struct LongRows {
  std::vector<std::string> dest_ids, origin_ids;  // first-appearance order
  std::vector<std::array<Index, 2>> cells;        // (dest index, origin index) per row
  std::vector<std::vector<double>> values;        // per value column
};

Index intern(std::vector<std::string>& ids, std::map<std::string, Index>& index,
             const std::string& id) {
  auto [it, inserted] = index.try_emplace(id, static_cast<Index>(ids.size()));
  if (inserted) ids.push_back(id);
  return it->second;
}

LongRows read_long_rows(std::istream& in, bool& first, const std::string& path,
                        size_t n_value_cols, const std::vector<std::string>& header,
                        size_t header_line) {
  LongRows rows;
  rows.values.resize(n_value_cols);
  std::map<std::string, Index> dest_index, origin_index;
  std::string line;
  size_t line_no = header_line;
  while (next_line(in, line, first)) {
    ++line_no;
    if (line.empty()) continue;
    const auto cells = detail::split_csv_line(line);
    if (cells.size() != 2 + n_value_cols)
      throw Error("bad_csv", path + ":" + std::to_string(line_no) + " has " +
                                 std::to_string(cells.size()) + " cells, expected " +
                                 std::to_string(2 + n_value_cols));
    const Index d = intern(rows.dest_ids, dest_index, cells[0]);
    const Index o = intern(rows.origin_ids, origin_index, cells[1]);
    rows.cells.push_back({d, o});
    for (size_t k = 0; k < n_value_cols; ++k)
      rows.values[k].push_back(detail::parse_number(
          cells[2 + k], path + ":" + std::to_string(line_no) + " column " + header[2 + k]));
  }
  if (rows.cells.empty()) throw Error("empty_file", "'" + path + "' has no data rows");
  return rows;
}

// Scatter one long column into an n x m matrix, requiring the full grid.
Matrix grid_fill(const LongRows& rows, size_t col, const std::string& path) {
  const Index n = static_cast<Index>(rows.dest_ids.size());
  const Index m = static_cast<Index>(rows.origin_ids.size());
  Matrix out(n, m);
  Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic> seen =
      Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic>::Zero(n, m);
  for (size_t r = 0; r < rows.cells.size(); ++r) {
    const auto [d, o] = rows.cells[r];
    if (seen(d, o)++)
      throw Error("duplicate_pair", "'" + path + "' lists (" + rows.dest_ids[static_cast<size_t>(d)] +
                                        ", " + rows.origin_ids[static_cast<size_t>(o)] +
                                        ") more than once");
    out(d, o) = rows.values[col][r];
  }
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < m; ++j)
      if (!seen(i, j))
        throw Error("missing_pair", "'" + path + "' is missing the pair (" +
                                        rows.dest_ids[static_cast<size_t>(i)] + ", " +
                                        rows.origin_ids[static_cast<size_t>(j)] + ")");
  return out;
}

}  // namespace

FlowMatrix load_flows_csv(const std::string& path) {
  auto in = open_input(path);
  bool first = true;
  std::string line;
  if (!next_line(in, line, first)) throw Error("empty_file", "'" + path + "' is empty");
  const auto header = detail::split_csv_line(line);
  if (header != std::vector<std::string>{"dest_id", "origin_id", "value"})
    throw Error("bad_header", "'" + path + "' must have header dest_id,origin_id,value");
  const LongRows rows = read_long_rows(in, first, path, 1, header, 1);
  FlowMatrix flows;
  flows.dest_ids = rows.dest_ids;
  flows.origin_ids = rows.origin_ids;
  flows.values = grid_fill(rows, 0, path);
  flows.validate();
  return flows;
}

CovariateTable load_covariates_csv(const std::string& path, Axis axis) {
  if (axis == Axis::OdPair)
    throw Error("bad_option", "od-pair covariates use the long schema; call load_od_csv");
  auto in = open_input(path);
  bool first = true;
  std::string line;
  if (!next_line(in, line, first)) throw Error("empty_file", "'" + path + "' is empty");
  auto transforms = parse_transform_line(line, path);
  if (!next_line(in, line, first)) throw Error("empty_file", "'" + path + "' has no header");
  const auto header = detail::split_csv_line(line);
  if (header.size() < 2 || header[0] != "id")
    throw Error("bad_header", "'" + path + "' must have header id,var1[,var2,...]");

  CovariateTable table;
  table.axis = axis;
  std::vector<std::vector<double>> cols(header.size() - 1);
  size_t line_no = 2;
  while (next_line(in, line, first)) {
    ++line_no;
    if (line.empty()) continue;
    const auto cells = detail::split_csv_line(line);
    if (cells.size() != header.size())
      throw Error("bad_csv", path + ":" + std::to_string(line_no) + " has " +
                                 std::to_string(cells.size()) + " cells, expected " +
                                 std::to_string(header.size()));
    table.ids.push_back(cells[0]);
    for (size_t k = 1; k < cells.size(); ++k)
      cols[k - 1].push_back(detail::parse_number(
          cells[k], path + ":" + std::to_string(line_no) + " column " + header[k]));
  }
  if (table.ids.empty()) throw Error("empty_file", "'" + path + "' has no data rows");

  for (size_t k = 1; k < header.size(); ++k) {
    const auto it = transforms.find(header[k]);
    if (it == transforms.end())
      throw Error("missing_transform",
                  "no transform declared for column '" + header[k] + "' in '" + path + "'");
    Covariate cv;
    cv.name = header[k];
    cv.transform = it->second;
    cv.values = Eigen::Map<const Vector>(cols[k - 1].data(), static_cast<Index>(cols[k - 1].size()));
    table.columns.push_back(std::move(cv));
    transforms.erase(it);
  }
  if (!transforms.empty())
    throw Error("missing_transform", "transform line of '" + path + "' names '" +
                                         transforms.begin()->first + "', which is not a column");
  table.validate();
  return table;
}

CovariateTable load_od_csv(const std::string& path) {
  auto in = open_input(path);
  bool first = true;
  std::string line;
  if (!next_line(in, line, first)) throw Error("empty_file", "'" + path + "' is empty");
  auto transforms = parse_transform_line(line, path);
  if (!next_line(in, line, first)) throw Error("empty_file", "'" + path + "' has no header");
  const auto header = detail::split_csv_line(line);
  if (header.size() < 3 || header[0] != "dest_id" || header[1] != "origin_id")
    throw Error("bad_header", "'" + path + "' must have header dest_id,origin_id,var1[,...]");

  const LongRows rows = read_long_rows(in, first, path, header.size() - 2, header, 2);
  CovariateTable table;
  table.axis = Axis::OdPair;
  table.ids = rows.dest_ids;
  table.origin_ids = rows.origin_ids;
  for (size_t k = 2; k < header.size(); ++k) {
    const auto it = transforms.find(header[k]);
    if (it == transforms.end())
      throw Error("missing_transform",
                  "no transform declared for column '" + header[k] + "' in '" + path + "'");
    Covariate cv;
    cv.name = header[k];
    cv.transform = it->second;
    cv.values = grid_fill(rows, k - 2, path);
    table.columns.push_back(std::move(cv));
    transforms.erase(it);
  }
  if (!transforms.empty())
    throw Error("missing_transform", "transform line of '" + path + "' names '" +
                                         transforms.begin()->first + "', which is not a column");
  table.validate();
  return table;
}

Centroids load_centroids_csv(const std::string& path, bool project_lonlat) {
  auto in = open_input(path);
  bool first = true;
  std::string line;
  if (!next_line(in, line, first)) throw Error("empty_file", "'" + path + "' is empty");
  const auto header = detail::split_csv_line(line);
  const bool planar = header == std::vector<std::string>{"id", "x_km", "y_km"};
  const bool geodetic = header == std::vector<std::string>{"id", "lon", "lat"};
  if (!planar && !geodetic)
    throw Error("bad_header", "'" + path + "' must have header id,x_km,y_km (or id,lon,lat "
                              "with lon/lat projection enabled)");
  if (geodetic && !project_lonlat)
    throw Error("lonlat_header", "'" + path + "' has lon/lat columns; distances need planar "
                                 "coordinates. Enable lon/lat projection or supply x_km,y_km.");
  if (planar && project_lonlat)
    throw Error("bad_header", "lon/lat projection requested but '" + path + "' has x_km,y_km");

  Centroids c;
  std::vector<double> xs, ys;
  size_t line_no = 1;
  while (next_line(in, line, first)) {
    ++line_no;
    if (line.empty()) continue;
    const auto cells = detail::split_csv_line(line);
    if (cells.size() != 3)
      throw Error("bad_csv", path + ":" + std::to_string(line_no) + " has " +
                                 std::to_string(cells.size()) + " cells, expected 3");
    c.ids.push_back(cells[0]);
    xs.push_back(detail::parse_number(cells[1], path + ":" + std::to_string(line_no) + " column " + header[1]));
    ys.push_back(detail::parse_number(cells[2], path + ":" + std::to_string(line_no) + " column " + header[2]));
  }
  if (c.ids.empty()) throw Error("empty_file", "'" + path + "' has no data rows");

  const Index n = static_cast<Index>(c.ids.size());
  c.coords.resize(n, 2);
  if (geodetic) {
    // Equirectangular projection about the mean latitude: adequate for the
    // regional scales a distance cutoff is meant for.
    constexpr double kEarthRadiusKm = 6371.0088;
    constexpr double deg = std::numbers::pi / 180.0;
    double mean_lat = 0.0;
    for (double y : ys) {
      if (y < -90.0 || y > 90.0)
        throw Error("bad_number", "latitude " + fmt(y) + " in '" + path + "' is outside [-90, 90]");
      mean_lat += y;
    }
    mean_lat /= static_cast<double>(n);
    const double scale_x = kEarthRadiusKm * std::cos(mean_lat * deg) * deg;
    for (Index i = 0; i < n; ++i) {
      c.coords(i, 0) = xs[static_cast<size_t>(i)] * scale_x;
      c.coords(i, 1) = ys[static_cast<size_t>(i)] * kEarthRadiusKm * deg;
    }
  } else {
    for (Index i = 0; i < n; ++i) {
      c.coords(i, 0) = xs[static_cast<size_t>(i)];
      c.coords(i, 1) = ys[static_cast<size_t>(i)];
    }
  }
  c.validate();
  return c;
}

void write_flows_csv(const FlowMatrix& flows, const std::string& path) {
  std::ostringstream out;
  out << "dest_id,origin_id,value\n";
  for (Index j = 0; j < flows.m(); ++j)
    for (Index i = 0; i < flows.n(); ++i)
      out << flows.dest_ids[static_cast<size_t>(i)] << ','
          << flows.origin_ids[static_cast<size_t>(j)] << ',' << fmt(flows.values(i, j)) << '\n';
  write_text_file(path, out.str());
}

void write_covariates_csv(const CovariateTable& table, const std::string& path) {
  std::ostringstream out;
  out << "#transform:";
  for (size_t k = 0; k < table.columns.size(); ++k)
    out << (k ? "," : " ") << table.columns[k].name << '=' << to_string(table.columns[k].transform);
  out << '\n';
  if (table.axis == Axis::OdPair) {
    out << "dest_id,origin_id";
    for (const auto& col : table.columns) out << ',' << col.name;
    out << '\n';
    const Index n = static_cast<Index>(table.ids.size());
    const Index m = static_cast<Index>(table.origin_ids.size());
    for (Index j = 0; j < m; ++j)
      for (Index i = 0; i < n; ++i) {
        out << table.ids[static_cast<size_t>(i)] << ',' << table.origin_ids[static_cast<size_t>(j)];
        for (const auto& col : table.columns) out << ',' << fmt(col.values(i, j));
        out << '\n';
      }
  } else {
    out << "id";
    for (const auto& col : table.columns) out << ',' << col.name;
    out << '\n';
    for (size_t i = 0; i < table.ids.size(); ++i) {
      out << table.ids[i];
      for (const auto& col : table.columns) out << ',' << fmt(col.values(static_cast<Index>(i), 0));
      out << '\n';
    }
  }
  write_text_file(path, out.str());
}

void write_centroids_csv(const Centroids& centroids, const std::string& path) {
  std::ostringstream out;
  out << "id,x_km,y_km\n";
  for (size_t i = 0; i < centroids.ids.size(); ++i)
    out << centroids.ids[i] << ',' << fmt(centroids.coords(static_cast<Index>(i), 0)) << ','
        << fmt(centroids.coords(static_cast<Index>(i), 1)) << '\n';
  write_text_file(path, out.str());
}

std::string weights_to_csv(const SpatialWeights& w) {
  std::ostringstream out;
  out << "# cutoff_km=" << fmt(w.d_c) << " units=" << w.n() << " isolated=";
  for (size_t k = 0; k < w.isolated.size(); ++k) out << (k ? ";" : "") << w.isolated[k];
  out << '\n' << "i,j,w\n";
  for (Index i = 0; i < w.n(); ++i)
    for (Index j = 0; j < w.n(); ++j)
      if (w.standardized(i, j) != 0.0)
        out << w.ids[static_cast<size_t>(i)] << ',' << w.ids[static_cast<size_t>(j)] << ','
            << fmt(w.standardized(i, j)) << '\n';
  return out.str();
}

void write_weights_csv(const SpatialWeights& w, const std::string& path) {
  write_text_file(path, weights_to_csv(w));
}

namespace {

bool parse_bool(const std::string& v, const std::string& key) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw Error("bad_config", "'" + v + "' for key '" + key + "' is not a boolean");
}

}  // namespace

DgpConfig parse_dgp_config(const std::string& text) {
  DgpConfig cfg = DgpConfig::defaults();
  // Column keys (beta.<name>, theta.<name>, law.<name>, axis.<name>) replace
  // the default column set with the one the file declares.
  std::vector<DgpColumn> declared;
  bool any_column_key = false;
  auto column_of = [&](const std::string& name) -> DgpColumn& {
    any_column_key = true;
    for (auto& c : declared)
      if (c.name == name) return c;
    declared.push_back({name, Axis::Destination, CovariateLaw::StdNormal, 0.0, 0.0});
    return declared.back();
  };

  std::istringstream in(text);
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      const auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    if (trim(line).empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw Error("bad_config", "line " + std::to_string(line_no) + " is not key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    const std::string where = "line " + std::to_string(line_no);

    if (key == "n") cfg.n = static_cast<Index>(detail::parse_number(value, where));
    else if (key == "m") cfg.m = static_cast<Index>(detail::parse_number(value, where));
    else if (key == "intercept") cfg.intercept = detail::parse_number(value, where);
    else if (key == "include_distance") cfg.include_distance = parse_bool(value, key);
    else if (key == "beta_distance") cfg.beta_distance = detail::parse_number(value, where);
    else if (key == "theta_distance") cfg.theta_distance = detail::parse_number(value, where);
    else if (key == "lambda") cfg.lambda = detail::parse_number(value, where);
    else if (key == "sigma") cfg.sigma = detail::parse_number(value, where);
    else if (key == "d_c") cfg.d_c = detail::parse_number(value, where);
    else if (key == "extent") cfg.extent = detail::parse_number(value, where);
    else if (key == "seed") cfg.seed = static_cast<std::uint64_t>(detail::parse_number(value, where));
    else if (key.rfind("beta.", 0) == 0) column_of(key.substr(5)).beta = detail::parse_number(value, where);
    else if (key.rfind("theta.", 0) == 0) column_of(key.substr(6)).theta = detail::parse_number(value, where);
    else if (key.rfind("law.", 0) == 0) column_of(key.substr(4)).law = covariate_law_from_string(value);
    else if (key.rfind("axis.", 0) == 0) {
      Axis a;
      if (value == "origin") a = Axis::Origin;
      else if (value == "destination") a = Axis::Destination;
      else throw Error("bad_config", "'" + value + "' for '" + key + "' is not origin/destination");
      column_of(key.substr(5)).axis = a;
    } else {
      throw Error("bad_config", "unknown key '" + key + "' on line " + std::to_string(line_no));
    }
  }
  if (any_column_key) cfg.columns = std::move(declared);
  cfg.validate();
  return cfg;
}

DgpConfig load_dgp_config(const std::string& path) {
  return parse_dgp_config(read_text_file(path));
}

std::string mc_summary_to_csv(const McSummary& s) {
  std::ostringstream out;
  out << "# replications=" << s.replications << " failures=" << s.failures
      << " lr_reject_rate_05=" << fmt(s.lr_reject_rate_05) << " rng=" << s.rng
      << " failed=" << (s.failed ? 1 : 0) << '\n';
  out << "param,truth,mean,bias,rmse,coverage95\n";
  for (const auto& p : s.params)
    out << p.name << ',' << fmt(p.truth) << ',' << fmt(p.mean) << ',' << fmt(p.bias) << ','
        << fmt(p.rmse) << ',' << fmt(p.coverage95) << '\n';
  return out.str();
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("io_error", "cannot open '" + path + "' for writing");
  out << content;
  if (!out) throw Error("io_error", "failed while writing '" + path + "'");
}

std::string read_text_file(const std::string& path) {
  auto in = open_input(path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace flowgrav

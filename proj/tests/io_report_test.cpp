#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <sstream>
#include <string>

#include "flowgrav/design.hpp"
#include "flowgrav/estimator.hpp"
#include "flowgrav/io.hpp"
#include "flowgrav/report.hpp"
#include "flowgrav/synthgen.hpp"

using namespace flowgrav;
namespace fs = std::filesystem;

namespace {

fs::path temp_root() {
  static const fs::path root = [] {
    fs::path p = fs::temp_directory_path() / "flowgrav_io_tests";
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
  }();
  return root;
}

std::string temp_file(const std::string& name, const std::string& content) {
  const fs::path p = temp_root() / name;
  write_text_file(p.string(), content);
  return p.string();
}

std::string error_code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return "(no error)";
}

double reparse(const std::string& printed) {
  char* end = nullptr;
  return std::strtod(printed.c_str(), &end);
}

}  // namespace

TEST_CASE("csv cells are trimmed and carriage returns stripped") {
  const auto cells = detail::split_csv_line(" a , b\t,c\r");
  REQUIRE(cells.size() == 3);
  CHECK(cells[0] == "a");
  CHECK(cells[1] == "b");
  CHECK(cells[2] == "c");
  CHECK(detail::parse_number("2.5e3", "here") == 2500.0);
  CHECK_THROWS_AS(detail::parse_number("12abc", "here"), Error);
  CHECK_THROWS_AS(detail::parse_number("", "here"), Error);
}

TEST_CASE("flows survive a write/load round trip") {
  FlowMatrix f;
  f.dest_ids = {"d1", "d2", "d3"};
  f.origin_ids = {"oA", "oB"};
  f.values.resize(3, 2);
  f.values << 1.25, 4.0, 0.0, 7.5, 2.0, 9.125;
  const fs::path p = temp_root() / "flows_rt.csv";
  write_flows_csv(f, p.string());
  const FlowMatrix g = load_flows_csv(p.string());
  CHECK(g.dest_ids == f.dest_ids);
  CHECK(g.origin_ids == f.origin_ids);
  CHECK((g.values.array() == f.values.array()).all());
}

TEST_CASE("flow rows may arrive in any order; ids keep first appearance") {
  const std::string path = temp_file("flows_order.csv",
                                     "dest_id,origin_id,value\n"
                                     "d2,oB,4\n"
                                     "d1,oB,3\n"
                                     "d2,oA,2\n"
                                     "d1,oA,1\n");
  const FlowMatrix f = load_flows_csv(path);
  CHECK(f.dest_ids == std::vector<std::string>{"d2", "d1"});
  CHECK(f.origin_ids == std::vector<std::string>{"oB", "oA"});
  CHECK(f.values(0, 0) == 4.0);
  CHECK(f.values(1, 1) == 1.0);
}

TEST_CASE("flow loading errors name the offending cell") {
  CHECK(error_code_of([&] {
    load_flows_csv(temp_file("neg.csv", "dest_id,origin_id,value\nd1,o1,-3\n"));
  }) == "negative_flow");
  CHECK(error_code_of([&] {
    load_flows_csv(temp_file("dup.csv",
                             "dest_id,origin_id,value\nd1,o1,1\nd1,o1,2\n"));
  }) == "duplicate_pair");
  CHECK(error_code_of([&] {
    load_flows_csv(temp_file("miss.csv",
                             "dest_id,origin_id,value\nd1,o1,1\nd2,o2,2\n"));
  }) == "missing_pair");
  CHECK(error_code_of([&] {
    load_flows_csv(temp_file("nan.csv", "dest_id,origin_id,value\nd1,o1,abc\n"));
  }) == "bad_number");
  CHECK(error_code_of([&] {
    load_flows_csv(temp_file("hdr.csv", "origin,dest,count\nd1,o1,1\n"));
  }) == "bad_header");
  CHECK(error_code_of([&] { load_flows_csv(temp_file("empty.csv", "")); }) == "empty_file");
  try {
    load_flows_csv(temp_file("neg2.csv", "dest_id,origin_id,value\nd9,o7,-3\n"));
    FAIL("expected negative_flow");
  } catch (const Error& e) {
    const std::string what = e.what();
    CHECK(what.find("d9") != std::string::npos);
    CHECK(what.find("o7") != std::string::npos);
  }
}

TEST_CASE("unit covariates round trip with their transforms") {
  CovariateTable t;
  t.axis = Axis::Destination;
  t.ids = {"d1", "d2", "d3", "d4"};
  Covariate gdp{"gdp", Transform::Log, Matrix(4, 1)};
  gdp.values << 10.5, 22.0, 31.25, 44.0;
  Covariate beds{"beds", Transform::Identity, Matrix(4, 1)};
  beds.values << 1.0, 0.0, 2.5, 3.0;
  t.columns = {gdp, beds};
  const fs::path p = temp_root() / "cov_rt.csv";
  write_covariates_csv(t, p.string());
  const CovariateTable u = load_covariates_csv(p.string(), Axis::Destination);
  CHECK(u.ids == t.ids);
  REQUIRE(u.columns.size() == 2);
  CHECK(u.columns[0].name == "gdp");
  CHECK(u.columns[0].transform == Transform::Log);
  CHECK(u.columns[1].transform == Transform::Identity);
  CHECK((u.columns[0].values.array() == gdp.values.array()).all());
  CHECK((u.columns[1].values.array() == beds.values.array()).all());
}

TEST_CASE("transform declarations must exactly cover the columns") {
  CHECK(error_code_of([&] {
    load_covariates_csv(temp_file("tr1.csv",
                                  "#transform: gdp=log\nid,gdp,beds\nd1,1,2\n"),
                        Axis::Destination);
  }) == "missing_transform");
  CHECK(error_code_of([&] {
    load_covariates_csv(temp_file("tr2.csv",
                                  "#transform: gdp=log,extra=log\nid,gdp\nd1,1\n"),
                        Axis::Destination);
  }) == "missing_transform");
  CHECK(error_code_of([&] {
    load_covariates_csv(temp_file("tr3.csv",
                                  "#transform: gdp=sqrt\nid,gdp\nd1,1\n"),
                        Axis::Destination);
  }) == "bad_transform");
  CHECK(error_code_of([&] {
    load_covariates_csv(temp_file("tr4.csv", "id,gdp\nd1,1\n"), Axis::Destination);
  }) == "missing_transform");
}

TEST_CASE("od covariates round trip in long form") {
  CovariateTable t;
  t.axis = Axis::OdPair;
  t.ids = {"d1", "d2"};
  t.origin_ids = {"o1", "o2", "o3"};
  Covariate dist{"distance", Transform::Log, Matrix(2, 3)};
  dist.values << 100.0, 200.0, 300.0, 150.0, 250.0, 350.0;
  Covariate border{"border", Transform::Dummy, Matrix(2, 3)};
  border.values << 1, 0, 0, 1, 1, 0;
  t.columns = {dist, border};
  const fs::path p = temp_root() / "od_rt.csv";
  write_covariates_csv(t, p.string());
  const CovariateTable u = load_od_csv(p.string());
  CHECK(u.axis == Axis::OdPair);
  CHECK(u.ids == t.ids);
  CHECK(u.origin_ids == t.origin_ids);
  REQUIRE(u.columns.size() == 2);
  CHECK((u.columns[0].values.array() == dist.values.array()).all());
  CHECK((u.columns[1].values.array() == border.values.array()).all());
}

TEST_CASE("planar centroids round trip; lon/lat needs the projection flag") {
  Centroids c;
  c.ids = {"d1", "d2"};
  c.coords.resize(2, 2);
  c.coords << 0.0, 0.0, 30.0, 40.0;
  const fs::path p = temp_root() / "cent_rt.csv";
  write_centroids_csv(c, p.string());
  const Centroids d = load_centroids_csv(p.string());
  CHECK(d.ids == c.ids);
  CHECK((d.coords.array() == c.coords.array()).all());

  const std::string geo = temp_file("geo.csv", "id,lon,lat\na,0,0\nb,1,0\n");
  CHECK(error_code_of([&] { load_centroids_csv(geo); }) == "lonlat_header");
  CHECK(error_code_of([&] { load_centroids_csv(p.string(), true); }) == "bad_header");
  CHECK(error_code_of([&] {
    load_centroids_csv(temp_file("geo_bad.csv", "id,lon,lat\na,0,95\n"), true);
  }) == "bad_number");
}

TEST_CASE("equirectangular projection gives the textbook arc lengths") {
  const double km_per_deg = 6371.0088 * M_PI / 180.0;  // ~111.195
  {
    const Centroids c =
        load_centroids_csv(temp_file("eq.csv", "id,lon,lat\na,0,0\nb,1,0\n"), true);
    const double dx = (c.coords.row(1) - c.coords.row(0)).norm();
    CHECK(dx == doctest::Approx(km_per_deg).epsilon(1e-9));
  }
  {
    // at latitude 60 a degree of longitude is half as long
    const Centroids c =
        load_centroids_csv(temp_file("lat60.csv", "id,lon,lat\na,0,60\nb,1,60\n"), true);
    const double dx = (c.coords.row(1) - c.coords.row(0)).norm();
    CHECK(dx == doctest::Approx(0.5 * km_per_deg).epsilon(1e-9));
  }
  {
    // a degree of latitude is a full arc regardless of longitude
    const Centroids c =
        load_centroids_csv(temp_file("eqlat.csv", "id,lon,lat\na,7,45\nb,7,46\n"), true);
    const double dy = (c.coords.row(1) - c.coords.row(0)).norm();
    CHECK(dy == doctest::Approx(km_per_deg).epsilon(1e-9));
  }
}

TEST_CASE("byte-order marks and CRLF line endings are tolerated") {
  const std::string path = temp_file("bom.csv",
                                     "\xEF\xBB\xBF"
                                     "dest_id,origin_id,value\r\nd1,o1,5\r\n");
  const FlowMatrix f = load_flows_csv(path);
  CHECK(f.values(0, 0) == 5.0);
}

TEST_CASE("weights csv lists metadata and the standardized nonzeros") {
  Centroids c;
  c.ids = {"a", "b", "c", "far"};
  c.coords.resize(4, 2);
  c.coords << 0, 0, 100, 0, 0, 100, 1000, 1000;
  const SpatialWeights w = build_weights(c, 120.0, IsolatedPolicy::Warn);
  const std::string csv = weights_to_csv(w);
  CHECK(csv.find("cutoff_km=120") != std::string::npos);
  CHECK(csv.find("isolated=far") != std::string::npos);
  CHECK(csv.find("a,b,0.5") != std::string::npos);
  CHECK(csv.find("b,a,1") != std::string::npos);
  // exactly the four standardized nonzeros appear
  std::istringstream in(csv);
  std::string line;
  int data_lines = 0;
  while (std::getline(in, line))
    if (!line.empty() && line[0] != '#' && line != "i,j,w") ++data_lines;
  CHECK(data_lines == 4);
}

TEST_CASE("dgp config text: defaults, scalar keys and comments") {
  const DgpConfig def = parse_dgp_config("");
  CHECK(def.n == 40);
  CHECK(def.m == 10);
  CHECK(def.lambda == 0.5);
  CHECK(def.columns.size() == 4);

  const DgpConfig cfg = parse_dgp_config(
      "# comment line\n"
      "n = 25\n"
      "m = 6\n"
      "lambda = -0.2\n"
      "sigma = 2.5\n"
      "extent = 700\n"
      "d_c = 150\n"
      "seed = 42\n"
      "intercept = 0.5\n"
      "include_distance = false\n");
  CHECK(cfg.n == 25);
  CHECK(cfg.m == 6);
  CHECK(cfg.lambda == -0.2);
  CHECK(cfg.sigma == 2.5);
  CHECK(cfg.extent == 700.0);
  CHECK(cfg.d_c == 150.0);
  CHECK(cfg.seed == 42);
  CHECK(cfg.intercept == 0.5);
  CHECK_FALSE(cfg.include_distance);
  CHECK(cfg.columns.size() == 4);  // scalar keys keep the default columns
}

TEST_CASE("dgp config column keys replace the default columns") {
  const DgpConfig cfg = parse_dgp_config(
      "beta.push = 0.7\n"
      "axis.push = origin\n"
      "law.push = lognormal\n"
      "beta.pull = -0.4\n"
      "theta.pull = 0.2\n");
  REQUIRE(cfg.columns.size() == 2);
  CHECK(cfg.columns[0].name == "push");
  CHECK(cfg.columns[0].axis == Axis::Origin);
  CHECK(cfg.columns[0].law == CovariateLaw::LogNormal);
  CHECK(cfg.columns[0].beta == 0.7);
  CHECK(cfg.columns[1].name == "pull");
  CHECK(cfg.columns[1].axis == Axis::Destination);  // default axis
  CHECK(cfg.columns[1].theta == 0.2);

  CHECK(error_code_of([] { parse_dgp_config("unknown_key = 1\n"); }) == "bad_config");
  CHECK(error_code_of([] { parse_dgp_config("n 40\n"); }) == "bad_config");
  CHECK(error_code_of([] { parse_dgp_config("axis.x = diagonal\n"); }) == "bad_config");
  CHECK(error_code_of([] { parse_dgp_config("lambda = 1.5\n"); }) == "bad_config");
}

TEST_CASE("config file loader matches the in-memory parser") {
  const std::string path = temp_file("study.cfg", "n = 12\nm = 5\nseed = 9\n");
  const DgpConfig cfg = load_dgp_config(path);
  CHECK(cfg.n == 12);
  CHECK(cfg.m == 5);
  CHECK(cfg.seed == 9);
}

TEST_CASE("mc summary csv carries metadata and full-precision rows") {
  DgpConfig cfg = DgpConfig::defaults();
  cfg.seed = 7;
  const McSummary s = mc_study(cfg, 10, 2);
  const std::string csv = mc_summary_to_csv(s);
  CHECK(csv.find("replications=10") != std::string::npos);
  CHECK(csv.find("failures=0") != std::string::npos);
  CHECK(csv.find("rng=splitmix64") != std::string::npos);
  CHECK(csv.find("param,truth,mean,bias,rmse,coverage95") != std::string::npos);

  std::istringstream in(csv);
  std::string line;
  size_t row = 0;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#' || line.rfind("param,", 0) == 0) continue;
    const auto cells = detail::split_csv_line(line);
    REQUIRE(cells.size() == 6);
    REQUIRE(row < s.params.size());
    CHECK(cells[0] == s.params[row].name);
    CHECK(reparse(cells[1]) == s.params[row].truth);  // %.17g round trip is exact
    CHECK(reparse(cells[2]) == s.params[row].mean);
    CHECK(reparse(cells[3]) == s.params[row].bias);
    CHECK(reparse(cells[4]) == s.params[row].rmse);
    CHECK(reparse(cells[5]) == s.params[row].coverage95);
    ++row;
  }
  CHECK(row == s.params.size());
}

TEST_CASE("cell formatting matches the reference table style") {
  CHECK(format_cell(0.26, 0.07, 0.0002) == "0.26*** (0.07)");
  CHECK(format_cell(1.1, 0.5, 0.03) == "1.10** (0.50)");
  CHECK(format_cell(-0.9, 0.5, 0.07) == "-0.90* (0.50)");
  CHECK(format_cell(0.1, 0.5, 0.2) == "0.10 (0.50)");
  CHECK(format_cell(-0.001, 0.5, 0.99) == "0.00 (0.50)");  // no negative zero
  // boundary p-values get the weaker star
  CHECK(format_cell(1.0, 1.0, 0.01) == "1.00** (1.00)");
  CHECK(format_cell(1.0, 1.0, 0.05) == "1.00* (1.00)");
  CHECK(format_cell(1.0, 1.0, 0.1) == "1.00 (1.00)");
}

namespace {

// Two nested models fitted on one simulated dataset.
struct TwoModelFixture {
  SynthInstance inst;
  std::vector<ModelReport> reports;

  TwoModelFixture() {
    DgpConfig cfg = DgpConfig::defaults();
    cfg.n = 25;
    cfg.m = 8;
    cfg.seed = 1234;
    inst = gen_instance(cfg);

    ModelSpec small;
    small.name = "two-mass";
    small.columns = {"gdp_o", "distance"};
    ModelSpec full;
    full.name = "full";
    full.columns = {"gdp_o", "gdp_d", "amenity_d", "density_d", "distance"};

    const FlowMatrix flows = inst.flows();
    for (const ModelSpec& spec : {small, full}) {
      const StackedDesign design = build_design(flows, inst.tables, inst.weights, spec);
      ModelReport r;
      r.linear = fit_ols(design);
      r.sdem = fit_sdem(design, inst.weights);
      r.lr = lr_test(r.linear, r.sdem);
      reports.push_back(std::move(r));
    }
  }
};

}  // namespace

TEST_CASE("text table: models as columns, dashes for absent variables") {
  const TwoModelFixture fx;
  const std::string table = render_text_table(fx.reports);

  CHECK(table.find("two-mass") != std::string::npos);
  CHECK(table.find("full") != std::string::npos);
  CHECK(table.find("***p < 0.01; **p < 0.05; *p < 0.1") != std::string::npos);

  // gdp_d exists only in the second model: its row carries a dash
  bool saw_dash_row = false;
  std::istringstream in(table);
  std::string line;
  std::vector<std::string> labels_in_order;
  while (std::getline(in, line)) {
    if (line.rfind("gdp_d ", 0) == 0 || line.rfind("gdp_d\t", 0) == 0)
      saw_dash_row = line.find("—") != std::string::npos;
    const auto cut = line.find("  ");
    if (!line.empty() && cut != std::string::npos && cut > 0)
      labels_in_order.push_back(line.substr(0, cut));
  }
  CHECK(saw_dash_row);

  // summary block appears in fixed order after the coefficients
  const std::vector<std::string> tail{"lambda",
                                      "Num. obs.",
                                      "Parameters",
                                      "Log Likelihood",
                                      "AIC (Linear model)",
                                      "AIC (Spatial model)",
                                      "LR test: statistic",
                                      "LR test: p-value"};
  size_t pos = 0;
  for (const std::string& label : tail) {
    const size_t at = table.find(label);
    CHECK(at != std::string::npos);
    CHECK(at > pos);
    pos = at;
  }
}

TEST_CASE("csv report re-parses to the fitted values exactly") {
  const TwoModelFixture fx;
  const std::string csv = render_csv(fx.reports);
  std::istringstream in(csv);
  std::string line;
  std::getline(in, line);
  CHECK(line == "model,term,estimate,std_error,p_value");

  int matched = 0;
  while (std::getline(in, line)) {
    const auto cells = detail::split_csv_line(line);
    REQUIRE(cells.size() == 5);
    const ModelReport& r = cells[0] == "two-mass" ? fx.reports[0] : fx.reports[1];
    const std::string& term = cells[1];
    const Index k = r.sdem.find(term);
    if (k >= 0) {
      CHECK(reparse(cells[2]) == r.sdem.coefficients(k));
      CHECK(reparse(cells[3]) == r.sdem.std_errors(k));
      ++matched;
    } else if (term == "lambda") {
      CHECK(reparse(cells[2]) == r.sdem.lambda);
      CHECK(reparse(cells[3]) == r.sdem.lambda_se);
    } else if (term == "loglik") {
      CHECK(reparse(cells[2]) == r.sdem.loglik);
    } else if (term == "aic_linear") {
      CHECK(reparse(cells[2]) == r.linear.aic);
    } else if (term == "aic_spatial") {
      CHECK(reparse(cells[2]) == r.sdem.aic);
    } else if (term == "lr_statistic") {
      CHECK(reparse(cells[2]) == r.lr.statistic);
    } else if (term == "num_obs") {
      CHECK(reparse(cells[2]) == static_cast<double>(r.sdem.N));
    }
  }
  // every coefficient of both models appeared
  CHECK(matched == static_cast<int>(fx.reports[0].sdem.coefficients.size() +
                                    fx.reports[1].sdem.coefficients.size()));
}

TEST_CASE("json report carries the full structure") {
  const TwoModelFixture fx;
  const auto doc = report_to_json(fx.reports[1]);
  CHECK(doc["model"] == "full");
  CHECK(doc["num_obs"] == 200);
  CHECK(doc["destinations"] == 25);
  CHECK(doc["origins"] == 8);
  CHECK(doc["coefficients"].size() == static_cast<size_t>(fx.reports[1].sdem.coefficients.size()));
  CHECK(doc["coefficients"][0]["term"] == "(Intercept)");
  CHECK(doc["lambda"]["estimate"].get<double>() == fx.reports[1].sdem.lambda);
  CHECK(doc["sigma2"]["estimate"].get<double>() == fx.reports[1].sdem.sigma2);
  CHECK(doc["aic_linear"].get<double>() == fx.reports[1].linear.aic);
  CHECK(doc["aic_spatial"].get<double>() == fx.reports[1].sdem.aic);
  CHECK(doc["lr"]["df"] == 1);
  CHECK(doc["benchmark"]["n_params"] == fx.reports[1].linear.n_params);
  // deterministic serialization: no timestamps inside the report document
  const std::string text = doc.dump(2);
  CHECK(text.find("generated_at") == std::string::npos);
}

TEST_CASE("effects table renders direct, spillover and total columns") {
  std::vector<EffectRow> rows(2);
  rows[0] = {"sustainability", 0.26, 0.07, 0.0002, true, 3.58, 0.9, 0.0001, 3.84};
  rows[1] = {"distance", -1.10, 0.05, 0.0, false, 0.0, 0.0, 1.0, -1.10};
  const std::string text = render_effects_text(rows);
  CHECK(text.find("direct") != std::string::npos);
  CHECK(text.find("spillover") != std::string::npos);
  CHECK(text.find("total") != std::string::npos);
  CHECK(text.find("0.26*** (0.07)") != std::string::npos);
  CHECK(text.find("3.58*** (0.90)") != std::string::npos);
  CHECK(text.find("3.84") != std::string::npos);
  CHECK(text.find("—") != std::string::npos);  // distance has no spillover

  const auto doc = effects_to_json(rows);
  REQUIRE(doc.is_array());
  CHECK(doc[0]["term"] == "sustainability");
  CHECK(doc[0]["total"].get<double>() == 3.84);
  CHECK(doc[0]["spillover"]["estimate"].get<double>() == 3.58);
  CHECK(doc[1]["spillover"].is_null());
}

TEST_CASE("mc summary json mirrors the struct") {
  DgpConfig cfg = DgpConfig::defaults();
  cfg.seed = 17;
  const McSummary s = mc_study(cfg, 10, 2);
  const auto doc = mc_summary_to_json(s);
  CHECK(doc["rng"] == "splitmix64");
  CHECK(doc["replications"] == 10);
  CHECK(doc["failures"] == 0);
  CHECK(doc["failed"] == false);
  REQUIRE(doc["params"].size() == s.params.size());
  CHECK(doc["params"][0]["name"] == s.params[0].name);
  CHECK(doc["params"][0]["rmse"].get<double>() == s.params[0].rmse);
}

TEST_CASE("text files round trip byte for byte") {
  const std::string content = "line1\nline2 with, commas\n# and a comment\n";
  const fs::path p = temp_root() / "plain.txt";
  write_text_file(p.string(), content);
  CHECK(read_text_file(p.string()) == content);
  CHECK_THROWS_AS(read_text_file((temp_root() / "no_such_file.txt").string()), Error);
}

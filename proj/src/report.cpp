#include "flowgrav/report.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include "flowgrav/stats.hpp"

namespace flowgrav {

namespace {

constexpr const char* kAbsent = "—";  // em dash
constexpr const char* kFootnote = "***p < 0.01; **p < 0.05; *p < 0.1";

// Fixed-point with 2 decimals; "-0.00" normalized to "0.00".
std::string num2(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  std::string s = buf;
  if (s == "-0.00") s = "0.00";
  return s;
}

std::string num4(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  std::string s = buf;
  if (s == "-0.0000") s = "0.0000";
  return s;
}

std::string num17(double v) {
  if (!std::isfinite(v)) return "";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// Printed width in terminal columns: one per code point (covers the em dash).
size_t display_width(const std::string& s) {
  size_t w = 0;
  for (unsigned char c : s)
    if ((c & 0xC0) != 0x80) ++w;
  return w;
}

std::string pad_right(const std::string& s, size_t width) {
  std::string out = s;
  for (size_t w = display_width(s); w < width; ++w) out += ' ';
  return out;
}

double coef_p_value(double estimate, double std_error) {
  if (!std::isfinite(std_error) || std_error <= 0.0) return std::numeric_limits<double>::quiet_NaN();
  return normal_two_sided_p(estimate / std_error);
}

struct Grid {
  std::vector<std::string> labels;              // first column
  std::vector<std::vector<std::string>> cells;  // [row][model]
  size_t separator_row = 0;                     // summary block starts here
};

Grid build_grid(const std::vector<ModelReport>& reports) {
  Grid g;
  std::vector<std::string> vars;
  for (const auto& r : reports)
    for (const auto& col : r.sdem.columns) {
      bool known = false;
      for (const auto& v : vars) known = known || v == col.name;
      if (!known) vars.push_back(col.name);
    }

  auto row = [&](const std::string& label) -> std::vector<std::string>& {
    g.labels.push_back(label);
    g.cells.emplace_back();
    return g.cells.back();
  };

  for (const auto& v : vars) {
    auto& cells = row(v);
    for (const auto& r : reports) {
      const Index k = r.sdem.find(v);
      if (k < 0) {
        cells.push_back(kAbsent);
      } else {
        const double est = r.sdem.coefficients(k);
        const double se = r.sdem.std_errors.size() > k ? r.sdem.std_errors(k)
                                                       : std::numeric_limits<double>::quiet_NaN();
        cells.push_back(format_cell(est, se, coef_p_value(est, se)));
      }
    }
  }

  g.separator_row = g.labels.size();
  auto& lam = row("lambda");
  for (const auto& r : reports)
    lam.push_back(format_cell(r.sdem.lambda, r.sdem.lambda_se,
                              coef_p_value(r.sdem.lambda, r.sdem.lambda_se)));
  auto& nobs = row("Num. obs.");
  for (const auto& r : reports) nobs.push_back(std::to_string(r.sdem.N));
  auto& npar = row("Parameters");
  for (const auto& r : reports) npar.push_back(std::to_string(r.sdem.n_params));
  auto& ll = row("Log Likelihood");
  for (const auto& r : reports) ll.push_back(num2(r.sdem.loglik));
  auto& aic_lin = row("AIC (Linear model)");
  for (const auto& r : reports) aic_lin.push_back(num2(r.linear.aic));
  auto& aic_sp = row("AIC (Spatial model)");
  for (const auto& r : reports) aic_sp.push_back(num2(r.sdem.aic));
  auto& lr_stat = row("LR test: statistic");
  for (const auto& r : reports) lr_stat.push_back(num2(r.lr.statistic));
  auto& lr_p = row("LR test: p-value");
  for (const auto& r : reports) lr_p.push_back(num4(r.lr.p_value));
  return g;
}

nlohmann::ordered_json json_number(double v) {
  if (!std::isfinite(v)) return nullptr;
  return v;
}

}  // namespace

std::string format_cell(double estimate, double std_error, double p_value) {
  if (!std::isfinite(estimate)) return kAbsent;
  if (!std::isfinite(std_error)) return num2(estimate);
  return num2(estimate) + significance_stars(p_value) + " (" + num2(std_error) + ")";
}

std::string render_text_table(const std::vector<ModelReport>& reports) {
  if (reports.empty()) throw Error("bad_option", "nothing to render: no fitted models");
  const Grid g = build_grid(reports);

  size_t label_w = 0;
  for (const auto& l : g.labels) label_w = std::max(label_w, display_width(l));
  std::vector<size_t> col_w(reports.size());
  for (size_t c = 0; c < reports.size(); ++c) {
    col_w[c] = display_width(reports[c].name());
    for (const auto& cells : g.cells) col_w[c] = std::max(col_w[c], display_width(cells[c]));
  }

  std::ostringstream out;
  out << pad_right("", label_w);
  for (size_t c = 0; c < reports.size(); ++c) out << "  " << pad_right(reports[c].name(), col_w[c]);
  out << '\n';
  size_t total = label_w;
  for (size_t w : col_w) total += 2 + w;
  const std::string rule(total, '-');
  out << rule << '\n';
  for (size_t r = 0; r < g.labels.size(); ++r) {
    if (r == g.separator_row) out << rule << '\n';
    out << pad_right(g.labels[r], label_w);
    for (size_t c = 0; c < reports.size(); ++c) out << "  " << pad_right(g.cells[r][c], col_w[c]);
    out << '\n';
  }
  out << rule << '\n' << kFootnote << '\n';
  return out.str();
}

std::string render_csv(const std::vector<ModelReport>& reports) {
  std::ostringstream out;
  out << "model,term,estimate,std_error,p_value\n";
  for (const auto& r : reports) {
    const std::string& name = r.name();
    for (Index k = 0; k < r.sdem.coefficients.size(); ++k) {
      const double est = r.sdem.coefficients(k);
      const double se =
          r.sdem.std_errors.size() > k ? r.sdem.std_errors(k) : std::numeric_limits<double>::quiet_NaN();
      out << name << ',' << r.sdem.columns[static_cast<size_t>(k)].name << ',' << num17(est) << ','
          << num17(se) << ',' << num17(coef_p_value(est, se)) << '\n';
    }
    out << name << ",lambda," << num17(r.sdem.lambda) << ',' << num17(r.sdem.lambda_se) << ','
        << num17(coef_p_value(r.sdem.lambda, r.sdem.lambda_se)) << '\n';
    out << name << ",sigma2," << num17(r.sdem.sigma2) << ',' << num17(r.sdem.sigma2_se) << ",\n";
    out << name << ",num_obs," << r.sdem.N << ",,\n";
    out << name << ",n_params," << r.sdem.n_params << ",,\n";
    out << name << ",loglik," << num17(r.sdem.loglik) << ",,\n";
    out << name << ",aic_linear," << num17(r.linear.aic) << ",,\n";
    out << name << ",aic_spatial," << num17(r.sdem.aic) << ",,\n";
    out << name << ",lr_statistic," << num17(r.lr.statistic) << ",,\n";
    out << name << ",lr_p_value," << num17(r.lr.p_value) << ",,\n";
  }
  return out.str();
}

nlohmann::ordered_json report_to_json(const ModelReport& report) {
  nlohmann::ordered_json doc;
  doc["model"] = report.name();
  doc["num_obs"] = report.sdem.N;
  doc["destinations"] = report.sdem.n;
  doc["origins"] = report.sdem.m;
  auto coefs = nlohmann::ordered_json::array();
  for (Index k = 0; k < report.sdem.coefficients.size(); ++k) {
    const double est = report.sdem.coefficients(k);
    const double se = report.sdem.std_errors.size() > k
                          ? report.sdem.std_errors(k)
                          : std::numeric_limits<double>::quiet_NaN();
    coefs.push_back({{"term", report.sdem.columns[static_cast<size_t>(k)].name},
                     {"estimate", json_number(est)},
                     {"std_error", json_number(se)},
                     {"p_value", json_number(coef_p_value(est, se))}});
  }
  doc["coefficients"] = coefs;
  doc["lambda"] = {{"estimate", json_number(report.sdem.lambda)},
                   {"std_error", json_number(report.sdem.lambda_se)},
                   {"p_value", json_number(coef_p_value(report.sdem.lambda, report.sdem.lambda_se))}};
  doc["sigma2"] = {{"estimate", json_number(report.sdem.sigma2)},
                   {"std_error", json_number(report.sdem.sigma2_se)}};
  doc["loglik"] = json_number(report.sdem.loglik);
  doc["n_params"] = report.sdem.n_params;
  doc["aic_linear"] = json_number(report.linear.aic);
  doc["aic_spatial"] = json_number(report.sdem.aic);
  doc["lr"] = {{"statistic", json_number(report.lr.statistic)},
               {"df", report.lr.df},
               {"p_value", json_number(report.lr.p_value)}};
  doc["benchmark"] = {{"loglik", json_number(report.linear.loglik)},
                      {"n_params", report.linear.n_params}};
  return doc;
}

std::string render_effects_text(const std::vector<EffectRow>& rows) {
  std::vector<std::string> labels{"variable"};
  std::vector<std::array<std::string, 3>> cells;
  for (const auto& r : rows) {
    labels.push_back(r.name);
    cells.push_back({format_cell(r.direct, r.direct_se, r.direct_p),
                     r.has_spillover
                         ? format_cell(r.spillover, r.spillover_se, r.spillover_p)
                         : std::string(kAbsent),
                     num2(r.total)});
  }
  size_t label_w = 0;
  for (const auto& l : labels) label_w = std::max(label_w, display_width(l));
  std::array<std::string, 3> heads{"direct", "spillover", "total"};
  std::array<size_t, 3> col_w{display_width(heads[0]), display_width(heads[1]),
                              display_width(heads[2])};
  for (const auto& row : cells)
    for (size_t c = 0; c < 3; ++c) col_w[c] = std::max(col_w[c], display_width(row[c]));

  std::ostringstream out;
  out << pad_right(labels[0], label_w);
  for (size_t c = 0; c < 3; ++c) out << "  " << pad_right(heads[c], col_w[c]);
  out << '\n';
  for (size_t r = 0; r < cells.size(); ++r) {
    out << pad_right(labels[r + 1], label_w);
    for (size_t c = 0; c < 3; ++c) out << "  " << pad_right(cells[r][c], col_w[c]);
    out << '\n';
  }
  out << '\n' << kFootnote << '\n';
  return out.str();
}

nlohmann::ordered_json effects_to_json(const std::vector<EffectRow>& rows) {
  auto arr = nlohmann::ordered_json::array();
  for (const auto& r : rows) {
    nlohmann::ordered_json item;
    item["term"] = r.name;
    item["direct"] = {{"estimate", json_number(r.direct)},
                      {"std_error", json_number(r.direct_se)},
                      {"p_value", json_number(r.direct_p)}};
    if (r.has_spillover)
      item["spillover"] = {{"estimate", json_number(r.spillover)},
                           {"std_error", json_number(r.spillover_se)},
                           {"p_value", json_number(r.spillover_p)}};
    else
      item["spillover"] = nullptr;
    item["total"] = json_number(r.total);
    arr.push_back(item);
  }
  return arr;
}

nlohmann::ordered_json mc_summary_to_json(const McSummary& summary) {
  nlohmann::ordered_json doc;
  doc["rng"] = summary.rng;
  doc["replications"] = summary.replications;
  doc["failures"] = summary.failures;
  doc["failed"] = summary.failed;
  doc["lr_reject_rate_05"] = json_number(summary.lr_reject_rate_05);
  auto params = nlohmann::ordered_json::array();
  for (const auto& p : summary.params)
    params.push_back({{"name", p.name},
                      {"truth", json_number(p.truth)},
                      {"mean", json_number(p.mean)},
                      {"bias", json_number(p.bias)},
                      {"rmse", json_number(p.rmse)},
                      {"coverage95", json_number(p.coverage95)}});
  doc["params"] = params;
  return doc;
}

}  // namespace flowgrav

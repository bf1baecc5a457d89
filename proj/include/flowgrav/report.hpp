#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "flowgrav/estimator.hpp"
#include "flowgrav/synthgen.hpp"

namespace flowgrav {

// One results-table column: the OLS benchmark on the same design, the SDEM
// fit, and their comparison.
struct ModelReport {
  FitResult linear;
  FitResult sdem;
  LrTest lr;

  const std::string& name() const { return sdem.model_name; }
};

// Aligned text table: variables as rows, models as columns, coefficients with
// significance stars and parenthesized standard errors, absent variables as an
// em dash, summary block underneath. Values printed with 2 decimals.
std::string render_text_table(const std::vector<ModelReport>& reports);

// Long form, full precision: model,term,estimate,std_error,p_value plus
// summary rows; re-parses to the fitted values exactly.
std::string render_csv(const std::vector<ModelReport>& reports);

std::string format_cell(double estimate, double std_error, double p_value);

nlohmann::ordered_json report_to_json(const ModelReport& report);

std::string render_effects_text(const std::vector<EffectRow>& rows);
nlohmann::ordered_json effects_to_json(const std::vector<EffectRow>& rows);

nlohmann::ordered_json mc_summary_to_json(const McSummary& summary);

}  // namespace flowgrav

#include "flowgrav/pipeline.hpp"

#include <json.hpp>

#include <algorithm>
#include <cctype>
#include <chrono>
#include <ctime>
#include <filesystem>
#include <map>
#include <sstream>

#include "flowgrav/estimator.hpp"

namespace flowgrav {

namespace {

// Permutation p with have[p[i]] == want[i]; set mismatches list both sides.
std::vector<Index> match_ids(const std::vector<std::string>& want,
                             const std::vector<std::string>& have, const std::string& what) {
  std::map<std::string, Index> pos;
  for (size_t i = 0; i < have.size(); ++i) pos.emplace(have[i], static_cast<Index>(i));
  std::vector<Index> perm;
  std::vector<std::string> missing;
  for (const auto& id : want) {
    const auto it = pos.find(id);
    if (it == pos.end()) {
      missing.push_back(id);
    } else {
      perm.push_back(it->second);
      pos.erase(it);
    }
  }
  if (!missing.empty() || !pos.empty()) {
    auto join = [](const auto& range, auto get) {
      std::string out;
      size_t k = 0;
      for (const auto& item : range) {
        if (k == 10) return out + ", ...";
        out += (k++ ? ", " : "") + get(item);
      }
      return out;
    };
    std::string msg = what + " ids do not match the flow matrix";
    if (!missing.empty())
      msg += "; missing: " + join(missing, [](const std::string& s) { return s; });
    if (!pos.empty())
      msg += "; extra: " + join(pos, [](const auto& kv) { return kv.first; });
    throw Error("id_mismatch", msg);
  }
  return perm;
}

Centroids reorder(const Centroids& c, const std::vector<Index>& perm,
                  const std::vector<std::string>& ids) {
  Centroids out;
  out.ids = ids;
  out.coords.resize(static_cast<Index>(perm.size()), 2);
  for (size_t i = 0; i < perm.size(); ++i) out.coords.row(static_cast<Index>(i)) = c.coords.row(perm[i]);
  return out;
}

CovariateTable reorder_unit_table(const CovariateTable& t, const std::vector<Index>& perm,
                                  const std::vector<std::string>& ids) {
  CovariateTable out;
  out.axis = t.axis;
  out.ids = ids;
  for (const auto& col : t.columns) {
    Covariate cv{col.name, col.transform, Matrix(static_cast<Index>(perm.size()), 1)};
    for (size_t i = 0; i < perm.size(); ++i) cv.values(static_cast<Index>(i), 0) = col.values(perm[i], 0);
    out.columns.push_back(std::move(cv));
  }
  return out;
}

CovariateTable reorder_od_table(const CovariateTable& t, const std::vector<Index>& dest_perm,
                                const std::vector<Index>& origin_perm,
                                const std::vector<std::string>& dest_ids,
                                const std::vector<std::string>& origin_ids) {
  CovariateTable out;
  out.axis = Axis::OdPair;
  out.ids = dest_ids;
  out.origin_ids = origin_ids;
  for (const auto& col : t.columns) {
    Covariate cv{col.name, col.transform,
                 Matrix(static_cast<Index>(dest_perm.size()), static_cast<Index>(origin_perm.size()))};
    for (size_t i = 0; i < dest_perm.size(); ++i)
      for (size_t j = 0; j < origin_perm.size(); ++j)
        cv.values(static_cast<Index>(i), static_cast<Index>(j)) =
            col.values(dest_perm[i], origin_perm[j]);
    out.columns.push_back(std::move(cv));
  }
  return out;
}

std::string sanitize_filename(const std::string& name) {
  std::string out;
  for (char c : name)
    out += (std::isalnum(static_cast<unsigned char>(c)) || c == '.' || c == '-' || c == '_')
               ? c
               : '_';
  return out.empty() ? std::string("model") : out;
}

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace

Datasets load_datasets(const RunConfig& cfg, std::ostream* log) {
  if (cfg.flows_path.empty()) throw Error("bad_option", "a flow CSV is required");
  if (cfg.centroids_path.empty()) throw Error("bad_option", "a centroid CSV is required");

  Datasets data;
  data.flows = load_flows_csv(cfg.flows_path);
  const auto& dest_ids = data.flows.dest_ids;
  const auto& origin_ids = data.flows.origin_ids;

  const Centroids raw_centroids = load_centroids_csv(cfg.centroids_path, cfg.project_lonlat);
  data.centroids = reorder(raw_centroids, match_ids(dest_ids, raw_centroids.ids, "centroid"), dest_ids);

  if (!cfg.origin_cov_path.empty()) {
    const CovariateTable t = load_covariates_csv(cfg.origin_cov_path, Axis::Origin);
    data.tables.push_back(reorder_unit_table(t, match_ids(origin_ids, t.ids, "origin table"), origin_ids));
  }
  if (!cfg.dest_cov_path.empty()) {
    const CovariateTable t = load_covariates_csv(cfg.dest_cov_path, Axis::Destination);
    data.tables.push_back(
        reorder_unit_table(t, match_ids(dest_ids, t.ids, "destination table"), dest_ids));
  }
  if (!cfg.od_cov_path.empty()) {
    const CovariateTable t = load_od_csv(cfg.od_cov_path);
    data.tables.push_back(reorder_od_table(t, match_ids(dest_ids, t.ids, "od table destination"),
                                           match_ids(origin_ids, t.origin_ids, "od table origin"),
                                           dest_ids, origin_ids));
  }

  if (log)
    *log << "loaded " << data.flows.n() << " destinations x " << data.flows.m()
         << " origins (N = " << data.flows.n() * data.flows.m() << "), " << data.tables.size()
         << " covariate table(s)\n";
  return data;
}

std::vector<ModelSpec> parse_models_json(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error("bad_json", e.what());
  }
  if (!doc.is_object() || !doc.contains("models") || !doc["models"].is_array() ||
      doc["models"].empty())
    throw Error("bad_json", "expected an object with a nonempty \"models\" array");

  std::vector<ModelSpec> specs;
  for (const auto& item : doc["models"]) {
    if (!item.is_object()) throw Error("bad_json", "each model spec must be an object");
    ModelSpec spec;
    for (const auto& [key, value] : item.items()) {
      if (key == "name") {
        if (!value.is_string()) throw Error("bad_json", "model \"name\" must be a string");
        spec.name = value.get<std::string>();
      } else if (key == "columns") {
        if (!value.is_array()) throw Error("bad_json", "model \"columns\" must be an array");
        for (const auto& col : value) {
          if (!col.is_string()) throw Error("bad_json", "model columns must be strings");
          spec.columns.push_back(col.get<std::string>());
        }
      } else if (key == "lag") {
        if (value.is_string()) {
          const std::string s = value.get<std::string>();
          if (s == "all") spec.lag.reset();
          else if (s == "none") spec.lag = std::vector<std::string>{};
          else throw Error("bad_json", "\"lag\" must be \"all\", \"none\" or an array");
        } else if (value.is_array()) {
          std::vector<std::string> lag;
          for (const auto& col : value) {
            if (!col.is_string()) throw Error("bad_json", "lag entries must be strings");
            lag.push_back(col.get<std::string>());
          }
          spec.lag = std::move(lag);
        } else {
          throw Error("bad_json", "\"lag\" must be \"all\", \"none\" or an array");
        }
      } else if (key == "origin_dummies") {
        if (!value.is_boolean()) throw Error("bad_json", "\"origin_dummies\" must be a boolean");
        spec.origin_dummies = value.get<bool>();
      } else if (key == "dest_dummies") {
        if (!value.is_boolean()) throw Error("bad_json", "\"dest_dummies\" must be a boolean");
        spec.dest_dummies = value.get<bool>();
      } else {
        throw Error("bad_json", "unknown model spec key '" + key + "'");
      }
    }
    if (spec.name.empty()) throw Error("bad_json", "every model needs a nonempty \"name\"");
    specs.push_back(std::move(spec));
  }
  std::vector<std::string> names;
  for (const auto& s : specs) names.push_back(s.name);
  detail::check_unique_ids(names, "model name");
  return specs;
}

std::vector<ModelSpec> load_models_json(const std::string& path) {
  return parse_models_json(read_text_file(path));
}

std::vector<ModelReport> run_pipeline(const RunConfig& cfg, std::ostream* log) {
  if (cfg.models.empty()) throw Error("bad_option", "no models specified");
  const Datasets data = load_datasets(cfg, log);
  const SpatialWeights weights = build_weights(data.centroids, cfg.d_c, cfg.isolated, log);
  if (log && !weights.isolated.empty())
    *log << weights.isolated.size() << " isolated unit(s) at cutoff " << cfg.d_c << " km\n";

  std::vector<ModelReport> reports;
  std::vector<std::vector<EffectRow>> effects;
  for (size_t idx = 0; idx < cfg.models.size(); ++idx) {
    const ModelSpec& spec = cfg.models[idx];
    try {
      const StackedDesign design =
          build_design(data.flows, data.tables, weights, spec, cfg.zero_flow);
      ModelReport report;
      report.linear = fit_ols(design);
      report.sdem = fit_sdem(design, weights);
      report.lr = lr_test(report.linear, report.sdem);
      effects.push_back(effects_split(report.sdem));
      if (log)
        *log << spec.name << ": lambda = " << report.sdem.lambda
             << ", loglik = " << report.sdem.loglik << ", LR p = " << report.lr.p_value << '\n';
      reports.push_back(std::move(report));
    } catch (const Error& e) {
      throw Error(e.code(), "model " + std::to_string(idx + 1) + " '" + spec.name +
                                "': " + e.what());
    }
  }

  if (!cfg.out_dir.empty()) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(cfg.out_dir, ec);
    if (ec) throw Error("io_error", "cannot create '" + cfg.out_dir + "': " + ec.message());
    const fs::path dir(cfg.out_dir);

    write_text_file((dir / "report.txt").string(), render_text_table(reports));
    write_text_file((dir / "report.csv").string(), render_csv(reports));
    write_weights_csv(weights, (dir / "weights.csv").string());
    for (size_t k = 0; k < reports.size(); ++k) {
      const std::string stem = sanitize_filename(reports[k].name());
      write_text_file((dir / ("model_" + stem + ".json")).string(),
                      report_to_json(reports[k]).dump(2) + "\n");
      write_text_file((dir / ("effects_" + stem + ".txt")).string(),
                      render_effects_text(effects[k]));
      write_text_file((dir / ("effects_" + stem + ".json")).string(),
                      effects_to_json(effects[k]).dump(2) + "\n");
    }

    nlohmann::ordered_json meta;
    meta["generated_at"] = utc_timestamp();
    meta["flows"] = cfg.flows_path;
    meta["cutoff_km"] = cfg.d_c;
    meta["zero_flow"] = cfg.zero_flow == ZeroFlowPolicy::Log1p ? "log1p" : "error";
    meta["isolated_policy"] = cfg.isolated == IsolatedPolicy::Error
                                  ? "error"
                                  : (cfg.isolated == IsolatedPolicy::Nearest ? "nearest" : "warn");
    meta["isolated_ids"] = weights.isolated;
    meta["destinations"] = data.flows.n();
    meta["origins"] = data.flows.m();
    std::vector<std::string> names;
    for (const auto& r : reports) names.push_back(r.name());
    meta["models"] = names;
    write_text_file((dir / "run_meta.json").string(), meta.dump(2) + "\n");
    if (log) *log << "wrote report bundle to " << cfg.out_dir << '\n';
  }
  return reports;
}

}  // namespace flowgrav

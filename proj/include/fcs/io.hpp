#ifndef FCS_IO_HPP
#define FCS_IO_HPP

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <system_error>
#include <utility>
#include <vector>

#include "json.hpp"

#include "fcs/causal.hpp"
#include "fcs/error.hpp"
#include "fcs/fpca.hpp"
#include "fcs/linalg.hpp"
#include "fcs/sim.hpp"
#include "fcs/survival.hpp"
#include "fcs/weights.hpp"

namespace fcs::io {

using json = nlohmann::ordered_json;

/// Shortest decimal text that reads back to the same double; independent of
/// the C locale.
inline std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

/// Parsed CSV with source positions kept for error messages. Line numbers
/// are 1-based file lines; the header is `header_line`.
struct CsvTable {
  std::string path;
  std::vector<std::string> header;
  int header_line = 0;
  std::vector<std::vector<std::string>> rows;
  std::vector<int> lines;

  Index column(const std::string& name) const {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) {
      throw DataError(path + ":" + std::to_string(header_line) + ": missing required column '" +
                      name + "'");
    }
    return Index(it - header.begin());
  }

  std::string where(std::size_t row, Index col) const {
    return path + ":" + std::to_string(lines[row]) + ":" + std::to_string(col + 1);
  }
};

namespace detail {

inline std::string trim(std::string s) {
  const auto issp = [](unsigned char c) { return c == ' ' || c == '\t' || c == '\r'; };
  while (!s.empty() && issp(static_cast<unsigned char>(s.back()))) s.pop_back();
  std::size_t b = 0;
  while (b < s.size() && issp(static_cast<unsigned char>(s[b]))) ++b;
  return s.substr(b);
}

inline std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(trim(cur));
  return out;
}

}  // namespace detail

inline CsvTable parse_csv(std::istream& in, const std::string& path) {
  CsvTable t;
  t.path = path;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (detail::trim(line).empty()) continue;
    auto cells = detail::split_line(line);
    if (t.header.empty()) {
      t.header = std::move(cells);
      t.header_line = lineno;
      continue;
    }
    if (cells.size() != t.header.size()) {
      throw DataError(path + ":" + std::to_string(lineno) + ": expected " +
                      std::to_string(t.header.size()) + " fields, found " +
                      std::to_string(cells.size()));
    }
    t.rows.push_back(std::move(cells));
    t.lines.push_back(lineno);
  }
  if (t.header.empty()) throw DataError(path + ": empty file");
  return t;
}

inline CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError(path + ": cannot open for reading");
  return parse_csv(in, path);
}

inline double parse_double(const std::string& cell, const std::string& where) {
  double v = 0.0;
  const char* b = cell.data();
  const char* e = b + cell.size();
  if (!cell.empty() && *b == '+') ++b;
  const auto res = std::from_chars(b, e, v);
  if (cell.empty() || res.ec != std::errc() || res.ptr != e) {
    throw DataError(where + ": '" + cell + "' is not a number");
  }
  return v;
}

/// Curves with an optional leading `id` column. The header holds the grid.
struct FunctionalTable {
  std::vector<std::string> ids;
  FunctionalSample sample;
};

inline FunctionalTable functional_from_table(const CsvTable& t) {
  const bool has_id = !t.header.empty() && t.header[0] == "id";
  const Index off = has_id ? 1 : 0;
  const Index m = Index(t.header.size()) - off;
  if (m < 2) throw DataError(t.path + ":" + std::to_string(t.header_line) + ": grid needs at least 2 points");
  Vector grid(m);
  for (Index j = 0; j < m; ++j) {
    grid(j) = parse_double(t.header[std::size_t(j + off)],
                           t.path + ":" + std::to_string(t.header_line) + ":" + std::to_string(j + off + 1));
    if (j > 0 && !(grid(j) > grid(j - 1))) {
      throw DataError(t.path + ":" + std::to_string(t.header_line) + ":" +
                      std::to_string(j + off + 1) + ": grid must be strictly increasing");
    }
  }
  if (t.rows.empty()) throw DataError(t.path + ": no curves");
  FunctionalTable out;
  Matrix values(Index(t.rows.size()), m);
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    out.ids.push_back(has_id ? t.rows[r][0] : std::to_string(r + 1));
    for (Index j = 0; j < m; ++j) {
      values(Index(r), j) = parse_double(t.rows[r][std::size_t(j + off)], t.where(r, j + off));
      if (!std::isfinite(values(Index(r), j))) {
        throw DataError(t.where(r, j + off) + ": curve value must be finite");
      }
    }
  }
  out.sample = FunctionalSample(std::move(grid), std::move(values));
  return out;
}

struct CovariateTable {
  std::vector<std::string> ids;
  std::vector<std::string> names;
  Matrix values;
};

inline CovariateTable covariates_from_table(const CsvTable& t) {
  const Index id_col = t.column("id");
  CovariateTable out;
  std::vector<Index> cols;
  for (Index j = 0; j < Index(t.header.size()); ++j) {
    if (j == id_col) continue;
    cols.push_back(j);
    out.names.push_back(t.header[std::size_t(j)]);
  }
  out.values.resize(Index(t.rows.size()), Index(cols.size()));
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    out.ids.push_back(t.rows[r][std::size_t(id_col)]);
    for (std::size_t c = 0; c < cols.size(); ++c) {
      const double v = parse_double(t.rows[r][std::size_t(cols[c])], t.where(r, cols[c]));
      if (!std::isfinite(v)) throw DataError(t.where(r, cols[c]) + ": covariate must be finite");
      out.values(Index(r), Index(c)) = v;
    }
  }
  return out;
}

struct SurvivalTable {
  std::vector<std::string> ids;
  SurvivalSample sample;
};

/// Columns `id,time,status`; a `log_time` column may stand in for `time`
/// when times overflow the double range.
inline SurvivalTable survival_from_table(const CsvTable& t) {
  const Index id_col = t.column("id");
  const bool log_scale = std::find(t.header.begin(), t.header.end(), "time") == t.header.end() &&
                         std::find(t.header.begin(), t.header.end(), "log_time") != t.header.end();
  const Index time_col = t.column(log_scale ? "log_time" : "time");
  const Index status_col = t.column("status");
  const Index n = Index(t.rows.size());
  if (n == 0) throw DataError(t.path + ": no subjects");
  SurvivalTable out;
  Vector log_time(n);
  IntVector delta(n);
  for (Index r = 0; r < n; ++r) {
    const auto& row = t.rows[std::size_t(r)];
    out.ids.push_back(row[std::size_t(id_col)]);
    const std::string tw = t.where(std::size_t(r), time_col);
    const double v = parse_double(row[std::size_t(time_col)], tw);
    if (log_scale) {
      if (!std::isfinite(v)) throw DataError(tw + ": log_time must be finite");
      log_time(r) = v;
    } else {
      if (!(v > 0.0) || !std::isfinite(v)) throw DataError(tw + ": obs_time must be positive");
      log_time(r) = std::log(v);
    }
    const std::string& s = row[std::size_t(status_col)];
    if (s != "0" && s != "1") {
      throw DataError(t.where(std::size_t(r), status_col) + ": status must be 0 or 1");
    }
    delta(r) = s == "1" ? 1 : 0;
  }
  if (delta.sum() == 0) throw DataError(t.path + ": all observations are censored");
  out.sample = SurvivalSample::from_log_times(std::move(log_time), std::move(delta));
  return out;
}

/// Row order of `ids` relative to `reference`, both required to hold the
/// same set of unique ids.
inline std::vector<Index> align_ids(const std::vector<std::string>& reference,
                                    const std::vector<std::string>& ids, const std::string& path) {
  if (ids.size() != reference.size()) {
    throw DataError(path + ": row count " + std::to_string(ids.size()) + " differs from " +
                    std::to_string(reference.size()) + " in the treatment file");
  }
  std::map<std::string, Index> pos;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (!pos.emplace(ids[i], Index(i)).second) {
      throw DataError(path + ": duplicate id '" + ids[i] + "'");
    }
  }
  std::vector<Index> order;
  order.reserve(reference.size());
  for (const auto& id : reference) {
    const auto it = pos.find(id);
    if (it == pos.end()) throw DataError(path + ": id '" + id + "' not found");
    order.push_back(it->second);
  }
  return order;
}

/// Treatment, covariates and (optionally) survival matched on id, in the
/// treatment file's row order.
struct LoadedData {
  std::vector<std::string> ids;
  FunctionalSample treatment;
  Matrix covariates;
  std::vector<std::string> covariate_names;
  std::optional<SurvivalSample> survival;
};

inline LoadedData load_data(const std::string& treatment_path, const std::string& covariate_path,
                            const std::string& survival_path = "") {
  LoadedData out;
  FunctionalTable ft = functional_from_table(read_csv(treatment_path));
  out.ids = ft.ids;
  out.treatment = std::move(ft.sample);
  if (!covariate_path.empty()) {
    CovariateTable ct = covariates_from_table(read_csv(covariate_path));
    out.covariates = linalg::select_rows(ct.values, align_ids(out.ids, ct.ids, covariate_path));
    out.covariate_names = std::move(ct.names);
  } else {
    out.covariates.resize(out.treatment.size(), 0);
  }
  if (!survival_path.empty()) {
    SurvivalTable st = survival_from_table(read_csv(survival_path));
    out.survival = st.sample.subset(align_ids(out.ids, st.ids, survival_path));
  }
  return out;
}

// ---- writers ---------------------------------------------------------------

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError(path + ": cannot open for writing");
  out << text;
  if (!out) throw DataError(path + ": write failed");
}

inline std::string functional_csv(const FunctionalSample& s, const std::vector<std::string>& ids = {}) {
  std::ostringstream os;
  os << "id";
  for (Index m = 0; m < s.grid_size(); ++m) os << ',' << format_double(s.grid()(m));
  os << '\n';
  for (Index i = 0; i < s.size(); ++i) {
    os << (ids.empty() ? std::to_string(i + 1) : ids[std::size_t(i)]);
    for (Index m = 0; m < s.grid_size(); ++m) os << ',' << format_double(s.values()(i, m));
    os << '\n';
  }
  return os.str();
}

inline std::string covariate_csv(const Matrix& z, const std::vector<std::string>& names = {}) {
  std::ostringstream os;
  os << "id";
  for (Index j = 0; j < z.cols(); ++j) {
    os << ',' << (names.empty() ? "z" + std::to_string(j + 1) : names[std::size_t(j)]);
  }
  os << '\n';
  for (Index i = 0; i < z.rows(); ++i) {
    os << i + 1;
    for (Index j = 0; j < z.cols(); ++j) os << ',' << format_double(z(i, j));
    os << '\n';
  }
  return os.str();
}

/// Writes `time` when every exp(log time) is a normal double and
/// `log_time` otherwise.
inline std::string survival_csv(const SurvivalSample& s) {
  const Vector& y = s.log_time();
  bool normal = true;
  for (Index i = 0; i < y.size(); ++i) normal = normal && std::isnormal(std::exp(y(i)));
  std::ostringstream os;
  os << (normal ? "id,time,status\n" : "id,log_time,status\n");
  for (Index i = 0; i < s.size(); ++i) {
    os << i + 1 << ',' << format_double(normal ? std::exp(y(i)) : y(i)) << ',' << s.delta()(i)
       << '\n';
  }
  return os.str();
}

inline std::string curve_csv(const Vector& grid, const Vector& beta, const std::string& name = "beta") {
  std::ostringstream os;
  os << "s," << name << '\n';
  for (Index m = 0; m < grid.size(); ++m) {
    os << format_double(grid(m)) << ',' << format_double(beta(m)) << '\n';
  }
  return os.str();
}

inline json vector_json(const Vector& v) {
  json a = json::array();
  for (Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

inline json weight_json(const WeightSet& w) {
  json j;
  j["method"] = to_string(w.method);
  if (w.method == WeightMethod::kNonparametric) j["rho"] = w.rho;
  j["min"] = w.min();
  j["max"] = w.max();
  j["ess"] = w.effective_sample_size();
  j["iterations"] = w.iterations;
  j["gradient_norm"] = w.gradient_norm;
  j["max_abs_corr"] = w.diagnostics.max_abs_corr;
  j["max_weighted_corr"] = w.diagnostics.max_weighted_corr;
  return j;
}

inline json fit_json(const FaftFit& f) {
  json j;
  j["alpha"] = f.params.alpha;
  j["beta_scores"] = vector_json(f.params.beta_scores);
  j["gamma"] = vector_json(f.params.gamma);
  j["iterations"] = f.iterations;
  j["converged"] = f.converged;
  j["cycle_detected"] = f.cycle_detected;
  j["final_step_norm"] = f.final_step_norm;
  if (f.se) j["se"] = vector_json(*f.se);
  return j;
}

inline json estimate_json(const CausalEstimate& est, const Vector& grid) {
  json j;
  j["method"] = to_string(est.method);
  if (est.weight_method) j["weight_method"] = to_string(*est.weight_method);
  j["grid"] = vector_json(grid);
  j["beta"] = vector_json(est.beta_curve);
  j["fit"] = fit_json(est.fit);
  if (est.outcome_fit) j["outcome_fit"] = fit_json(*est.outcome_fit);
  if (est.weights) j["weights"] = weight_json(*est.weights);
  return j;
}

inline const char* kStudyCsvHeader =
    "scenario,n,censor_target,method,replications,failures,censoring_rate,rmse,isb,aise,aise_se,"
    "mise,root_mse_in_mean,root_mse_in_q25,root_mse_in_q50,root_mse_in_q75,root_mse_out_mean,"
    "root_mse_out_q25,root_mse_out_q50,root_mse_out_q75,prediction_failures";

inline std::string study_csv(const StudyResult& r) {
  std::ostringstream os;
  os << kStudyCsvHeader << '\n';
  const auto q = [&](const Quartiles& x) {
    os << ',' << format_double(x.mean) << ',' << format_double(x.q25) << ','
       << format_double(x.q50) << ',' << format_double(x.q75);
  };
  for (const auto& c : r.cells) {
    os << c.scenario << ',' << c.n << ',' << format_double(c.censor_target) << ','
       << to_string(c.method) << ',' << c.replications << ',' << c.failures << ','
       << format_double(c.censoring_rate) << ',' << format_double(c.rmse) << ','
       << format_double(c.isb) << ',' << format_double(c.ise.aise) << ','
       << format_double(c.ise.se) << ',' << format_double(c.ise.mise);
    q(c.root_mse_in);
    q(c.root_mse_out);
    os << ',' << c.prediction_failures << '\n';
  }
  return os.str();
}

inline json study_json(const StudyResult& r) {
  json j;
  j["grid"] = vector_json(r.grid);
  j["true_beta"] = vector_json(r.true_curve);
  json cells = json::array();
  const auto q = [](const Quartiles& x) {
    return json{{"mean", x.mean}, {"q25", x.q25}, {"q50", x.q50}, {"q75", x.q75}};
  };
  for (const auto& c : r.cells) {
    json e;
    e["scenario"] = c.scenario;
    e["n"] = c.n;
    e["censor_target"] = c.censor_target;
    e["method"] = to_string(c.method);
    e["replications"] = c.replications;
    e["failures"] = c.failures;
    e["censoring_rate"] = c.censoring_rate;
    e["rmse"] = c.rmse;
    e["isb"] = c.isb;
    e["aise"] = c.ise.aise;
    e["aise_se"] = c.ise.se;
    e["mise"] = c.ise.mise;
    e["root_mse_in"] = q(c.root_mse_in);
    e["root_mse_out"] = q(c.root_mse_out);
    e["prediction_failures"] = c.prediction_failures;
    e["mean_beta"] = vector_json(c.mean_curve);
    cells.push_back(std::move(e));
  }
  j["cells"] = std::move(cells);
  return j;
}

/// Replication curves of one cell, one column per replication.
inline std::string curves_csv(const Vector& grid, const Vector& truth, const StudyCell& c) {
  std::ostringstream os;
  os << "s,true";
  for (std::size_t r = 0; r < c.curves.size(); ++r) os << ",rep" << r + 1;
  os << '\n';
  for (Index m = 0; m < grid.size(); ++m) {
    os << format_double(grid(m)) << ',' << format_double(truth(m));
    for (const auto& v : c.curves) os << ',' << format_double(v(m));
    os << '\n';
  }
  return os.str();
}

/// Rows = FPC index, columns = covariates; weighted |corr| entries.
inline std::string balance_csv(const BalanceReport& b, const std::vector<std::string>& names = {}) {
  std::ostringstream os;
  os << "fpc";
  for (Index j = 0; j < b.abs_corr.cols(); ++j) {
    os << ',' << (names.empty() ? "z" + std::to_string(j + 1) : names[std::size_t(j)]);
  }
  os << '\n';
  for (Index k = 0; k < b.abs_corr.rows(); ++k) {
    os << k + 1;
    for (Index j = 0; j < b.abs_corr.cols(); ++j) {
      os << ',';
      if (b.degenerate(k, j)) {
        os << "degenerate";
      } else {
        os << format_double(b.abs_corr(k, j));
      }
    }
    os << '\n';
  }
  return os.str();
}

}  // namespace fcs::io

#endif  // FCS_IO_HPP

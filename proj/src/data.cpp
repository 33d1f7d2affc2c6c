#include "dsense/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

namespace dsense {

int ObservationTable::n_treated() const {
  int count = 0;
  for (Eigen::Index i = 0; i < treatment.size(); ++i) count += treatment[i];
  return count;
}

std::vector<int> ObservationTable::treated_indices() const {
  std::vector<int> idx;
  idx.reserve(static_cast<std::size_t>(n()));
  for (int i = 0; i < n(); ++i)
    if (treatment[i] == 1) idx.push_back(i);
  return idx;
}

std::vector<int> ObservationTable::control_indices() const {
  std::vector<int> idx;
  idx.reserve(static_cast<std::size_t>(n()));
  for (int i = 0; i < n(); ++i)
    if (treatment[i] == 0) idx.push_back(i);
  return idx;
}

ObservationTable ObservationTable::subset(const std::vector<int>& rows) const {
  ObservationTable out;
  const int m = static_cast<int>(rows.size());
  out.outcome.resize(m);
  out.treatment.resize(m);
  out.covariates.resize(m, covariates.cols());
  out.covariate_names = covariate_names;
  out.outcome_name = outcome_name;
  out.treatment_name = treatment_name;
  out.unit_ids.reserve(rows.size());
  if (external_predictions) out.external_predictions.emplace(m);
  for (int i = 0; i < m; ++i) {
    const int r = rows[static_cast<std::size_t>(i)];
    out.outcome[i] = outcome[r];
    out.treatment[i] = treatment[r];
    out.covariates.row(i) = covariates.row(r);
    out.unit_ids.push_back(unit_ids[static_cast<std::size_t>(r)]);
    if (external_predictions) (*out.external_predictions)[i] = (*external_predictions)[r];
  }
  return out;
}

void ObservationTable::validate() const {
  const Eigen::Index len = outcome.size();
  if (len < 2) throw_data("degenerate data: fewer than 2 units");
  if (treatment.size() != len || covariates.rows() != len)
    throw_data("column length mismatch between outcome, treatment and covariates");
  if (covariates.cols() < 1) throw_data("at least one covariate column is required");
  if (unit_ids.size() != static_cast<std::size_t>(len))
    throw_data("unit id vector does not match table length");
  if (external_predictions && external_predictions->size() != len)
    throw_data("external prediction column length mismatch");
  for (Eigen::Index i = 0; i < len; ++i) {
    if (treatment[i] != 0 && treatment[i] != 1)
      throw_data("treatment value outside {0,1} at row " + std::to_string(i));
    if (!std::isfinite(outcome[i]))
      throw_data("non-finite outcome at row " + std::to_string(i));
  }
  if (!covariates.allFinite()) throw_data("non-finite covariate value");
  const int nt = n_treated();
  if (nt == 0) throw_data("degenerate data: no treated units");
  if (nt == static_cast<int>(len)) throw_data("degenerate data: no control units");
}

ObservationTable make_table(Eigen::VectorXd outcome, Eigen::VectorXi treatment,
                            Eigen::MatrixXd covariates) {
  ObservationTable t;
  t.outcome = std::move(outcome);
  t.treatment = std::move(treatment);
  t.covariates = std::move(covariates);
  t.covariate_names.resize(static_cast<std::size_t>(t.covariates.cols()));
  for (std::size_t j = 0; j < t.covariate_names.size(); ++j)
    t.covariate_names[j] = "x" + std::to_string(j + 1);
  t.unit_ids.resize(static_cast<std::size_t>(t.outcome.size()));
  std::iota(t.unit_ids.begin(), t.unit_ids.end(), 0);
  t.validate();
  return t;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) {
    // trim surrounding whitespace and CR
    const auto b = cell.find_first_not_of(" \t\r");
    const auto e = cell.find_last_not_of(" \t\r");
    cells.push_back(b == std::string::npos ? std::string() : cell.substr(b, e - b + 1));
  }
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

bool parse_double(const std::string& s, double* out) {
  if (s.empty()) return false;
  const char* begin = s.data();
  const char* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(begin, end, *out);
  return ec == std::errc() && ptr == end;
}

}  // namespace

ObservationTable load_csv(const std::string& path, const CsvSchema& schema) {
  std::ifstream in(path);
  if (!in) throw_data("cannot open input file: " + path);
  std::string line;
  if (!std::getline(in, line)) throw_data("empty file: " + path);
  const std::vector<std::string> header = split_csv_line(line);

  auto column_of = [&](const std::string& name) {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end())
      throw_data("schema error: column '" + name + "' not found in " + path);
    return static_cast<std::size_t>(it - header.begin());
  };
  const std::size_t y_col = column_of(schema.outcome_col);
  const std::size_t z_col = column_of(schema.treatment_col);
  if (schema.covariate_cols.empty())
    throw_data("schema error: at least one covariate column is required");
  std::vector<std::size_t> x_cols;
  for (const auto& name : schema.covariate_cols) x_cols.push_back(column_of(name));
  std::optional<std::size_t> g_col;
  if (schema.prediction_col) g_col = column_of(*schema.prediction_col);

  std::vector<double> y;
  std::vector<int> z;
  std::vector<double> x_flat;
  std::vector<double> g;
  std::vector<int> bad_rows;
  int row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty() || line == "\r") continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != header.size()) {
      bad_rows.push_back(row);
      continue;
    }
    double yi = 0.0;
    double zi_raw = 0.0;
    bool ok = parse_double(cells[y_col], &yi) && parse_double(cells[z_col], &zi_raw);
    std::vector<double> xi(x_cols.size());
    for (std::size_t j = 0; ok && j < x_cols.size(); ++j) ok = parse_double(cells[x_cols[j]], &xi[j]);
    double gi = 0.0;
    if (ok && g_col) ok = parse_double(cells[*g_col], &gi);
    if (!ok) {
      bad_rows.push_back(row);
      continue;
    }
    if (zi_raw != 0.0 && zi_raw != 1.0)
      throw_data("validation error: non-binary treatment value '" + cells[z_col] +
                 "' at data row " + std::to_string(row));
    y.push_back(yi);
    z.push_back(static_cast<int>(zi_raw));
    x_flat.insert(x_flat.end(), xi.begin(), xi.end());
    if (g_col) g.push_back(gi);
  }
  if (!bad_rows.empty()) {
    std::string msg = "unparseable rows:";
    for (std::size_t i = 0; i < bad_rows.size() && i < 20; ++i)
      msg += " " + std::to_string(bad_rows[i]);
    if (bad_rows.size() > 20) msg += " ...";
    throw_data(msg);
  }

  const int n = static_cast<int>(y.size());
  if (n < 2) throw_data("degenerate data: fewer than 2 data rows in " + path);
  Eigen::VectorXd yv = Eigen::Map<Eigen::VectorXd>(y.data(), n);
  Eigen::VectorXi zv = Eigen::Map<Eigen::VectorXi>(z.data(), n);
  Eigen::MatrixXd xv(n, static_cast<int>(x_cols.size()));
  for (int i = 0; i < n; ++i)
    for (std::size_t j = 0; j < x_cols.size(); ++j)
      xv(i, static_cast<int>(j)) = x_flat[static_cast<std::size_t>(i) * x_cols.size() + j];

  ObservationTable t = make_table(std::move(yv), std::move(zv), std::move(xv));
  t.covariate_names = schema.covariate_cols;
  t.outcome_name = schema.outcome_col;
  t.treatment_name = schema.treatment_col;
  if (g_col) t.external_predictions = Eigen::Map<Eigen::VectorXd>(g.data(), n);
  return t;
}

void write_csv(const ObservationTable& table, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw_data("cannot open output file: " + path);
  out.precision(17);
  out << table.outcome_name << ',' << table.treatment_name;
  for (const auto& name : table.covariate_names) out << ',' << name;
  out << '\n';
  for (int i = 0; i < table.n(); ++i) {
    out << table.outcome[i] << ',' << table.treatment[i];
    for (int j = 0; j < table.d(); ++j) out << ',' << table.covariates(i, j);
    out << '\n';
  }
  if (!out) throw_data("failed writing " + path);
}

namespace {

std::vector<int> sample_without_replacement(const std::vector<int>& pool, int k, Rng& rng) {
  std::vector<int> shuffled = pool;
  for (std::size_t i = shuffled.size(); i > 1; --i) {
    std::uniform_int_distribution<std::size_t> pick(0, i - 1);
    std::swap(shuffled[i - 1], shuffled[pick(rng)]);
  }
  shuffled.resize(static_cast<std::size_t>(k));
  return shuffled;
}

}  // namespace

SplitResult split_planning(const ObservationTable& table, double fraction,
                           SplitMode mode, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction < 1.0))
    throw_config("split fraction must be in (0,1)");
  table.validate();
  Rng rng = make_rng(seed, "split_planning", 0);

  std::vector<int> planning_rows;
  if (mode == SplitMode::controls_only) {
    const std::vector<int> controls = table.control_indices();
    const int k = static_cast<int>(std::lround(fraction * static_cast<double>(controls.size())));
    if (k < 2) throw_data("planning sample smaller than 2 units");
    planning_rows = sample_without_replacement(controls, k, rng);
  } else {
    const std::vector<int> treated = table.treated_indices();
    const std::vector<int> controls = table.control_indices();
    const int kt = static_cast<int>(std::lround(fraction * static_cast<double>(treated.size())));
    const int kc = static_cast<int>(std::lround(fraction * static_cast<double>(controls.size())));
    if (kt + kc < 2) throw_data("planning sample smaller than 2 units");
    planning_rows = sample_without_replacement(treated, kt, rng);
    const auto planning_controls = sample_without_replacement(controls, kc, rng);
    planning_rows.insert(planning_rows.end(), planning_controls.begin(), planning_controls.end());
  }
  std::sort(planning_rows.begin(), planning_rows.end());

  std::vector<char> in_planning(static_cast<std::size_t>(table.n()), 0);
  for (int r : planning_rows) in_planning[static_cast<std::size_t>(r)] = 1;
  std::vector<int> analysis_rows;
  analysis_rows.reserve(static_cast<std::size_t>(table.n()) - planning_rows.size());
  for (int i = 0; i < table.n(); ++i)
    if (!in_planning[static_cast<std::size_t>(i)]) analysis_rows.push_back(i);

  SplitResult result;
  result.planning = table.subset(planning_rows);
  result.analysis = table.subset(analysis_rows);
  result.mode = mode;
  result.seed = seed;
  return result;
}

}  // namespace dsense

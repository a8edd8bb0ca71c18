#include "epiobs/data/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>

#include "epiobs/error.hpp"

namespace epiobs {

namespace {

using Eigen::Index;

// Shortest round-trip representation; NaN becomes an empty cell.
std::string format_number(double v) {
  if (std::isnan(v)) return {};
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return {buf, res.ptr};
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_number(const std::string& s, const std::string& where) {
  if (s.empty()) return std::numeric_limits<double>::quiet_NaN();
  double v = 0.0;
  const auto* first = s.data();
  if (!s.empty() && s.front() == '+') ++first;
  const auto res = std::from_chars(first, s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw ValidationError(where + ": '" + s + "' is not a number");
  return v;
}

std::vector<std::string> output_headers(std::size_t m) {
  if (m == 1) return {"y"};
  std::vector<std::string> h;
  for (std::size_t i = 1; i <= m; ++i) h.push_back("y" + std::to_string(i));
  return h;
}

}  // namespace

void write_csv(const CsvTable& table, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  for (std::size_t i = 0; i < table.header.size(); ++i) out << (i ? "," : "") << table.header[i];
  out << '\n';
  for (const auto& row : table.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << format_number(row[i]);
    out << '\n';
  }
  if (!out) throw IoError("failed writing '" + path + "'");
}

CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  CsvTable t;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty() || trim(line).front() == '#') continue;
    auto cells = split(line);
    if (t.header.empty()) {
      t.header = std::move(cells);
      continue;
    }
    const std::string where = path + ":" + std::to_string(lineno);
    if (cells.size() != t.header.size())
      throw ValidationError(where + ": expected " + std::to_string(t.header.size()) + " columns");
    std::vector<double> row;
    row.reserve(cells.size());
    for (const auto& c : cells) row.push_back(parse_number(c, where));
    t.rows.push_back(std::move(row));
  }
  if (t.header.empty()) throw ValidationError(path + ": empty CSV");
  return t;
}

Dataset read_dataset_csv(const std::string& path, DofConvention dof) {
  const auto table = read_csv(path);
  std::optional<std::size_t> tcol;
  std::vector<std::pair<std::size_t, std::size_t>> ycols;  // (column, output index)
  for (std::size_t c = 0; c < table.header.size(); ++c) {
    const auto& h = table.header[c];
    if (h == "t") {
      tcol = c;
    } else if (h == "y") {
      ycols.emplace_back(c, 0);
    } else if (h.size() > 1 && h[0] == 'y' && h.find_first_not_of("0123456789", 1) == std::string::npos) {
      const auto k = std::stoul(h.substr(1));
      if (k == 0) throw ValidationError(path + ": output columns are numbered from y1");
      ycols.emplace_back(c, k - 1);
    }
  }
  if (!tcol) throw ValidationError(path + ": missing 't' column");
  if (ycols.empty()) throw ValidationError(path + ": missing 'y' or 'y1' column");
  Dataset d;
  d.id = path;
  d.dof_convention = dof;
  d.y.resize(static_cast<Index>(table.rows.size()), static_cast<Index>(ycols.size()));
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    d.t.push_back(table.rows[r][*tcol]);
    for (std::size_t k = 0; k < ycols.size(); ++k)
      d.y(static_cast<Index>(r), static_cast<Index>(k)) = table.rows[r][ycols[k].first];
  }
  for (const auto& [col, out] : ycols) d.outputs.push_back(out);
  d.validate();
  return d;
}

CsvTable trajectory_table(const Trajectory& traj, const ModelSpec& model) {
  CsvTable t;
  t.header.push_back("t");
  for (const auto& s : model.state_names) t.header.push_back(s);
  for (const auto& h : output_headers(model.n_outputs)) t.header.push_back(h);
  for (std::size_t i = 0; i < traj.size(); ++i) {
    std::vector<double> row{traj.t[i]};
    for (Index k = 0; k < traj.x[i].size(); ++k) row.push_back(traj.x[i][k]);
    for (Index k = 0; k < traj.y[i].size(); ++k) row.push_back(traj.y[i][k]);
    t.rows.push_back(std::move(row));
  }
  return t;
}

CsvTable observer_table(const ObserverRun& run) {
  CsvTable t;
  t.header = {"t", "error_norm"};
  const std::size_t m = run.innovation.empty() ? 0 : static_cast<std::size_t>(run.innovation.front().size());
  if (m == 1) t.header.push_back("innovation");
  for (std::size_t k = 1; m > 1 && k <= m; ++k) t.header.push_back("innovation" + std::to_string(k));
  for (const auto& s : run.state_names) t.header.push_back("x_" + s);
  for (const auto& s : run.state_names) t.header.push_back("xhat_" + s);
  for (std::size_t i = 0; i < run.t.size(); ++i) {
    std::vector<double> row{run.t[i], run.error_norm[i]};
    for (std::size_t k = 0; k < m; ++k) row.push_back(run.innovation[i][static_cast<Index>(k)]);
    for (Index k = 0; k < run.x_true[i].size(); ++k) row.push_back(run.x_true[i][k]);
    for (Index k = 0; k < run.x_hat[i].size(); ++k) row.push_back(run.x_hat[i][k]);
    t.rows.push_back(std::move(row));
  }
  return t;
}

void emit_plot_data(const Trajectory& traj, const ModelSpec& model, const std::string& path) {
  write_csv(trajectory_table(traj, model), path);
}

void emit_plot_data(const ObserverRun& run, const std::string& path) { write_csv(observer_table(run), path); }

nlohmann::json to_json(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

nlohmann::json to_json(const Matrix& m) {
  auto j = nlohmann::json::array();
  for (Index r = 0; r < m.rows(); ++r) j.push_back(to_json(Vector(m.row(r).transpose())));
  return j;
}

nlohmann::json to_json(const FitResult& fit) {
  nlohmann::json est = nlohmann::json::object();
  for (std::size_t k = 0; k < fit.names.size(); ++k) est[fit.names[k]] = fit.estimate[static_cast<Index>(k)];
  return {{"estimate", est},
          {"theta_hat", to_json(fit.theta_hat)},
          {"x0_hat", to_json(fit.x0_hat)},
          {"sse", fit.sse},
          {"sigma2_hat", fit.sigma2_hat},
          {"dof", fit.dof},
          {"iterations", fit.iterations},
          {"converged", fit.converged},
          {"stop_reason", fit.stop_reason}};
}

nlohmann::json to_json(const FimReport& r) {
  nlohmann::json intervals = nlohmann::json::array();
  for (std::size_t k = 0; k < r.intervals.size(); ++k)
    intervals.push_back({{"name", k < r.names.size() ? r.names[k] : std::to_string(k)},
                         {"estimate", r.estimate[static_cast<Index>(k)]},
                         {"standard_error", r.standard_errors[static_cast<Index>(k)]},
                         {"half_width", r.half_widths[static_cast<Index>(k)]},
                         {"lower", r.intervals[k].first},
                         {"upper", r.intervals[k].second}});
  return {{"fim", to_json(r.fim)},
          {"covariance", to_json(r.covariance)},
          {"condition_number", r.condition_number},
          {"ill_conditioned", r.ill_conditioned},
          {"pseudo_inverse", r.pseudo_inverse},
          {"sigma2", r.sigma2},
          {"dof", r.dof},
          {"t_quantile", r.t_quantile},
          {"intervals", intervals}};
}

nlohmann::json to_json(const RankReport& r) {
  nlohmann::json j{{"point", to_json(r.point)},
                   {"stack_order", r.stack_order},
                   {"singular_values", to_json(r.singular_values)},
                   {"numerical_rank", r.numerical_rank},
                   {"full_rank", r.full_rank},
                   {"condition_number", r.condition_number},
                   {"tolerance", r.tolerance},
                   {"degraded", r.degraded}};
  if (r.determinant) j["determinant"] = *r.determinant;
  if (r.null_directions.cols() > 0) j["null_directions"] = to_json(Matrix(r.null_directions.transpose()));
  return j;
}

nlohmann::json to_json(const SampledRank& s) {
  auto reports = nlohmann::json::array();
  for (const auto& r : s.reports) reports.push_back(to_json(r));
  return {{"generically_full_rank", s.generically_full_rank},
          {"min_rank", s.min_rank},
          {"max_rank", s.max_rank},
          {"points", reports}};
}

nlohmann::json to_json(const ObserverRun& run) {
  return {{"family", to_string(run.family)},
          {"samples", run.t.size()},
          {"predicted_rate", run.predicted_rate},
          {"empirical_decay_rate", run.empirical_decay_rate},
          {"initial_error", run.error_norm.empty() ? 0.0 : run.error_norm.front()},
          {"final_error", run.error_norm.empty() ? 0.0 : run.error_norm.back()},
          {"tail_error", run.tail_error()},
          {"steady_state_error", run.steady_state_error()},
          {"time_to_1_percent", run.time_to_fraction(0.01)},
          {"flagged_samples", run.flagged_samples},
          {"warnings", run.warnings}};
}

void write_json(const nlohmann::json& j, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << j.dump(2) << '\n';
  if (!out) throw IoError("failed writing '" + path + "'");
}

nlohmann::json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(path + ": " + e.what());
  }
}

}  // namespace epiobs

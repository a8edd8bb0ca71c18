/**
 * @file io.hpp
 * @brief CSV time series and JSON serialization of results.
 */
#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "epiobs/estimation/estimation.hpp"
#include "epiobs/observability/rank.hpp"
#include "epiobs/observers/observers.hpp"

namespace epiobs {

/// Header plus rows; `t` is always the first column.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
};

/// @throws IoError when the file cannot be written.
void write_csv(const CsvTable& table, const std::string& path);
/// @throws IoError on unreadable files, ValidationError on malformed content.
[[nodiscard]] CsvTable read_csv(const std::string& path);

/**
 * @brief Dataset from a CSV with a `t` column and `y` or `y1, y2, …` columns.
 *
 * Other columns are ignored, so `simulate` output can be fitted directly.
 */
[[nodiscard]] Dataset read_dataset_csv(const std::string& path, DofConvention dof = DofConvention::KnownX0);

[[nodiscard]] CsvTable trajectory_table(const Trajectory& traj, const ModelSpec& model);
[[nodiscard]] CsvTable observer_table(const ObserverRun& run);

/// Deterministic CSV of a trajectory: t, states…, y (or y1, y2, …).
void emit_plot_data(const Trajectory& traj, const ModelSpec& model, const std::string& path);
/// Deterministic CSV of an observer run: t, error_norm, innovation…, x_*, xhat_*.
void emit_plot_data(const ObserverRun& run, const std::string& path);

[[nodiscard]] nlohmann::json to_json(const Vector& v);
[[nodiscard]] nlohmann::json to_json(const Matrix& m);
[[nodiscard]] nlohmann::json to_json(const FitResult& fit);
[[nodiscard]] nlohmann::json to_json(const FimReport& report);
[[nodiscard]] nlohmann::json to_json(const RankReport& report);
[[nodiscard]] nlohmann::json to_json(const SampledRank& sampled);
/// Summary of an observer run (rates, errors, warnings); the time series goes to CSV.
[[nodiscard]] nlohmann::json to_json(const ObserverRun& run);

/// @throws IoError when the file cannot be written.
void write_json(const nlohmann::json& j, const std::string& path);
/// @throws IoError on unreadable files, ValidationError on malformed JSON.
[[nodiscard]] nlohmann::json read_json(const std::string& path);

}  // namespace epiobs

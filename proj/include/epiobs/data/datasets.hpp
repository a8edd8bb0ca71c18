/**
 * @file datasets.hpp
 * @brief Embedded epidemic datasets and the case studies that fit them.
 */
#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "epiobs/estimation/estimation.hpp"

namespace epiobs {

/// Influenza in a boys' boarding school: 14 daily prevalence counts, N = 763, S0 = 762, I0 = 1.
[[nodiscard]] Dataset dataset_boarding_school();
/// Bombay plague: 31 weekly death counts, modelled as γI with x0 estimated.
[[nodiscard]] Dataset dataset_bombay();

/// One pinned self-check of a case-study report.
struct Check {
  std::string name;
  double value{0.0};
  double expected{0.0};
  std::string rule;  ///< human-readable tolerance, e.g. "rel <= 0.005"
  bool pass{false};
};

struct CaseStudy {
  std::string id;
  std::string model_id;
  Dataset dataset;
  FitProblem guess;
};

[[nodiscard]] std::vector<std::string> case_study_ids();
/// @throws UsageError on unknown ids.
[[nodiscard]] CaseStudy case_study(const std::string& id);

struct CaseStudyReport {
  std::string id;
  FitResult fit;
  FimReport fim;
  std::vector<Check> checks;
  double runtime_seconds{0.0};
  /// Additional numbers printed alongside the checks.
  nlohmann::json extra;
  bool pass{false};

  [[nodiscard]] nlohmann::json to_json() const;
};

/// Fit → FIM → intervals, then the pinned checks for the case study.
[[nodiscard]] CaseStudyReport run_case_study(const std::string& id, const FitOptions& opt = {});

/// (t, data, fitted curve) at `resolution` spacing for plotting a fitted case study.
void emit_case_study_curve(const CaseStudy& cs, const FitResult& fit, const std::string& path,
                           double resolution = 0.01);

/**
 * @brief Bombay sensitivity columns with the γ-column as γ·(∂I/∂γ + I).
 *
 * This reproduces the reference session's printed FIM and intervals; the chain-rule column
 * from output_sensitivity is γ·∂I/∂γ + I.
 */
[[nodiscard]] std::vector<Matrix> bombay_session_chi(const SensitivityBundle& bundle, const Vector& theta);

}  // namespace epiobs

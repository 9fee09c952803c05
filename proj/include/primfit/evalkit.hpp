#pragma once

// Classification metrics, the L2 recognition distance, summary statistics
// and report tables.

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "primfit/datagen.hpp"

namespace primfit {

/// counts[true][predicted], classes in kind-code order.
struct ConfusionMatrix {
  std::array<std::array<std::uint64_t, 5>, 5> counts{};

  std::uint64_t total() const noexcept;
  std::uint64_t trace() const noexcept;
  std::uint64_t row_sum(std::size_t i) const noexcept;
  std::uint64_t column_sum(std::size_t j) const noexcept;
  ConfusionMatrix& operator+=(const ConfusionMatrix& other) noexcept;
  bool operator==(const ConfusionMatrix&) const = default;
};

/// Pairs are (true code, predicted code) with codes in 1..5.
/// Throws std::invalid_argument on any other code.
ConfusionMatrix confusion_matrix(std::span<const std::pair<int, int>> pairs);

enum class Metric { PPV, NPV, TPR, TNR, ACC };
inline constexpr std::array<Metric, 5> kAllMetrics = {Metric::PPV, Metric::NPV, Metric::TPR, Metric::TNR,
                                                      Metric::ACC};
std::string_view metric_name(Metric m) noexcept;

struct OneVsRest {
  std::uint64_t tp = 0, fp = 0, fn = 0, tn = 0;
};

using MetricRow = std::array<std::optional<double>, 5>;  // indexed by Metric

struct ClassMetrics {
  std::array<OneVsRest, 5> counts;
  std::array<MetricRow, 5> per_class;  // [class][metric]; empty where undefined
  MetricRow macro;                     // mean of the defined per-class values

  std::optional<double> value(std::size_t cls, Metric m) const { return per_class[cls][static_cast<std::size_t>(m)]; }
  std::optional<double> macro_value(Metric m) const { return macro[static_cast<std::size_t>(m)]; }
};

/// One-vs-rest metrics per class; zero denominators leave the metric
/// undefined. Throws EmptyMetricsError for an all-zero matrix.
ClassMetrics class_metrics(const ConfusionMatrix& cm);

/// Euclidean distance of the vectors without the kind code, and without the
/// point for planes and cylinders; axes are compared in canonical form.
/// Throws IncomparableError when the kinds differ.
double l2_param_distance(const GroundTruthVector& gt, const GroundTruthVector& pred);

struct ErrorStats {
  double q1 = 0.0, q2 = 0.0, q3 = 0.0, mean = 0.0, std = 0.0;
};

/// Quartiles by linear interpolation between order statistics, population
/// standard deviation. Throws std::invalid_argument for empty or non-finite
/// input.
ErrorStats summary_stats(std::span<const double> values);

// ---------------------------------------------------------------------------
// Reports

/// Results of one method on one perturbation.
struct EvaluatedRun {
  std::string method;
  std::string perturbation;
  ConfusionMatrix cm;
  std::vector<double> l2;         // same-kind pairs only
  std::vector<double> mfe;
  std::vector<double> hausdorff;
  std::size_t mismatched = 0;     // pairs excluded from l2
};

enum class ReportFormat { Csv, Markdown };

/// Whole-set classification and fitting tables per method (runs of all
/// perturbations merged), followed by per-perturbation tables when the runs
/// cover more than one perturbation. Throws std::invalid_argument when `runs`
/// is empty.
std::string render_report(std::span<const EvaluatedRun> runs, ReportFormat format);

/// One table of a CSV report: the `#` line preceding it, its header and rows.
struct CsvBlock {
  std::string title;
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

/// Parses a CSV report back into its blocks. Throws FormatError.
std::vector<CsvBlock> parse_report_csv(std::string_view text);

}  // namespace primfit

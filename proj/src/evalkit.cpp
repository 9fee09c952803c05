#include "primfit/evalkit.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>

#include "primfit/errors.hpp"

namespace primfit {

// ---------------------------------------------------------------------------
// Confusion matrix

std::uint64_t ConfusionMatrix::total() const noexcept {
  std::uint64_t n = 0;
  for (const auto& row : counts) n = std::accumulate(row.begin(), row.end(), n);
  return n;
}

std::uint64_t ConfusionMatrix::trace() const noexcept {
  std::uint64_t n = 0;
  for (std::size_t i = 0; i < 5; ++i) n += counts[i][i];
  return n;
}

std::uint64_t ConfusionMatrix::row_sum(std::size_t i) const noexcept {
  return std::accumulate(counts[i].begin(), counts[i].end(), std::uint64_t{0});
}

std::uint64_t ConfusionMatrix::column_sum(std::size_t j) const noexcept {
  std::uint64_t n = 0;
  for (const auto& row : counts) n += row[j];
  return n;
}

ConfusionMatrix& ConfusionMatrix::operator+=(const ConfusionMatrix& other) noexcept {
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t j = 0; j < 5; ++j) counts[i][j] += other.counts[i][j];
  return *this;
}

ConfusionMatrix confusion_matrix(std::span<const std::pair<int, int>> pairs) {
  ConfusionMatrix cm;
  for (const auto& [truth, pred] : pairs) {
    if (truth < 1 || truth > 5 || pred < 1 || pred > 5)
      throw std::invalid_argument("confusion_matrix: kind codes must lie in 1..5, got (" + std::to_string(truth) +
                                  ", " + std::to_string(pred) + ")");
    ++cm.counts[truth - 1][pred - 1];
  }
  return cm;
}

// ---------------------------------------------------------------------------
// Metrics

std::string_view metric_name(Metric m) noexcept {
  switch (m) {
    case Metric::PPV: return "PPV";
    case Metric::NPV: return "NPV";
    case Metric::TPR: return "TPR";
    case Metric::TNR: return "TNR";
    case Metric::ACC: return "ACC";
  }
  return "?";
}

namespace {

std::optional<double> ratio(std::uint64_t num, std::uint64_t den) {
  if (den == 0) return std::nullopt;
  return static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace

ClassMetrics class_metrics(const ConfusionMatrix& cm) {
  const std::uint64_t n = cm.total();
  if (n == 0) throw EmptyMetricsError("class_metrics: confusion matrix is empty");
  ClassMetrics out;
  for (std::size_t i = 0; i < 5; ++i) {
    OneVsRest& c = out.counts[i];
    c.tp = cm.counts[i][i];
    c.fp = cm.column_sum(i) - c.tp;
    c.fn = cm.row_sum(i) - c.tp;
    c.tn = n - c.tp - c.fp - c.fn;
    out.per_class[i] = {ratio(c.tp, c.tp + c.fp), ratio(c.tn, c.tn + c.fn), ratio(c.tp, c.tp + c.fn),
                        ratio(c.tn, c.tn + c.fp), ratio(c.tp + c.tn, n)};
  }
  for (std::size_t m = 0; m < kAllMetrics.size(); ++m) {
    double sum = 0.0;
    int defined = 0;
    for (const MetricRow& row : out.per_class) {
      if (!row[m]) continue;
      sum += *row[m];
      ++defined;
    }
    if (defined > 0) out.macro[m] = sum / defined;
  }
  return out;
}

double l2_param_distance(const GroundTruthVector& gt, const GroundTruthVector& pred) {
  if (gt.kind() != pred.kind())
    throw IncomparableError("l2_param_distance: kind " + std::to_string(code(gt.kind())) + " vs " +
                            std::to_string(code(pred.kind())));
  const auto reduced = [](const GroundTruthVector& v) {
    std::vector<double> x = GroundTruthVector::encode(v.decode()).values();
    x.erase(x.begin());
    if (v.kind() == Kind::Plane || v.kind() == Kind::Cylinder) x.resize(x.size() - 3);
    return x;
  };
  const std::vector<double> a = reduced(gt);
  const std::vector<double> b = reduced(pred);
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) sum += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(sum);
}

ErrorStats summary_stats(std::span<const double> values) {
  if (values.empty()) throw std::invalid_argument("summary_stats: no values");
  std::vector<double> x(values.begin(), values.end());
  if (!std::all_of(x.begin(), x.end(), [](double v) { return std::isfinite(v); }))
    throw std::invalid_argument("summary_stats: non-finite value");
  std::sort(x.begin(), x.end());
  const auto quantile = [&](double p) {
    const double h = p * static_cast<double>(x.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, x.size() - 1);
    return x[lo] + (h - static_cast<double>(lo)) * (x[hi] - x[lo]);
  };
  ErrorStats s;
  s.q1 = quantile(0.25);
  s.q2 = quantile(0.5);
  s.q3 = quantile(0.75);
  s.mean = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
  double ss = 0.0;
  for (double v : x) ss += (v - s.mean) * (v - s.mean);
  s.std = std::sqrt(ss / static_cast<double>(x.size()));
  return s;
}

// ---------------------------------------------------------------------------
// Reports

namespace {

struct Merged {
  std::string method;
  std::string perturbation;
  ConfusionMatrix cm;
  std::vector<double> l2, mfe, hausdorff;
  std::size_t mismatched = 0;
};

// Runs grouped by method (first-appearance order), optionally restricted to
// one perturbation.
std::vector<Merged> merge(std::span<const EvaluatedRun> runs, const std::string* perturbation) {
  std::vector<Merged> out;
  for (const EvaluatedRun& r : runs) {
    if (perturbation && r.perturbation != *perturbation) continue;
    auto it = std::find_if(out.begin(), out.end(), [&](const Merged& m) { return m.method == r.method; });
    if (it == out.end()) {
      Merged fresh;
      fresh.method = r.method;
      fresh.perturbation = perturbation ? *perturbation : "all";
      out.push_back(std::move(fresh));
      it = out.end() - 1;
    }
    it->cm += r.cm;
    it->l2.insert(it->l2.end(), r.l2.begin(), r.l2.end());
    it->mfe.insert(it->mfe.end(), r.mfe.begin(), r.mfe.end());
    it->hausdorff.insert(it->hausdorff.end(), r.hausdorff.begin(), r.hausdorff.end());
    it->mismatched += r.mismatched;
  }
  return out;
}

std::optional<ClassMetrics> metrics_of(const ConfusionMatrix& cm) {
  if (cm.total() == 0) return std::nullopt;
  return class_metrics(cm);
}

std::optional<ErrorStats> stats_of(const std::vector<double>& v) {
  if (v.empty()) return std::nullopt;
  return summary_stats(v);
}

std::string fixed4(std::optional<double> v) {
  if (!v) return "n/a";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", *v);
  return buf;
}

std::string sci3(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2e", v);
  return buf;
}

std::string csv_value(std::optional<double> v) { return v ? format_real(*v) : std::string{}; }

constexpr std::array<const char*, 3> kMeasures = {"L2", "MFE", "dHaus"};

std::array<const std::vector<double>*, 3> measures(const Merged& m) { return {&m.l2, &m.mfe, &m.hausdorff}; }

void csv_tables(std::ostringstream& os, const std::vector<Merged>& group) {
  for (const Merged& m : group) {
    os << "# classification method=" << m.method << " perturbation=" << m.perturbation << " n=" << m.cm.total()
       << '\n';
    os << "class,PPV,NPV,TPR,TNR,ACC\n";
    if (const auto cm = metrics_of(m.cm)) {
      for (std::size_t c = 0; c < 5; ++c) {
        os << 'T' << c + 1;
        for (const auto& v : cm->per_class[c]) os << ',' << csv_value(v);
        os << '\n';
      }
      os << "Avg";
      for (const auto& v : cm->macro) os << ',' << csv_value(v);
      os << '\n';
    }
    os << "# fitting method=" << m.method << " perturbation=" << m.perturbation << " mismatched=" << m.mismatched
       << '\n';
    os << "measure,Q1,Q2,Q3,mean,std\n";
    const auto values = measures(m);
    for (std::size_t i = 0; i < kMeasures.size(); ++i) {
      os << kMeasures[i];
      if (const auto s = stats_of(*values[i]))
        os << ',' << format_real(s->q1) << ',' << format_real(s->q2) << ',' << format_real(s->q3) << ','
           << format_real(s->mean) << ',' << format_real(s->std);
      else
        os << ",,,,,";
      os << '\n';
    }
  }
}

void markdown_tables(std::ostringstream& os, const std::vector<Merged>& group, const std::string& heading) {
  os << "## " << heading << "\n\n";
  os << "| Metric | Method | T1 | T2 | T3 | T4 | T5 | Avg |\n";
  os << "|---|---|---|---|---|---|---|---|\n";
  for (Metric metric : kAllMetrics) {
    const auto mi = static_cast<std::size_t>(metric);
    for (const Merged& m : group) {
      const auto cm = metrics_of(m.cm);
      os << "| " << metric_name(metric) << " | " << m.method;
      for (std::size_t c = 0; c < 5; ++c) os << " | " << (cm ? fixed4(cm->per_class[c][mi]) : "n/a");
      os << " | " << (cm ? fixed4(cm->macro[mi]) : "n/a") << " |\n";
    }
  }
  os << "\n| Measure | Method | Q1 | Q2 | Q3 | mean | std |\n";
  os << "|---|---|---|---|---|---|---|\n";
  for (std::size_t i = 0; i < kMeasures.size(); ++i) {
    for (const Merged& m : group) {
      os << "| " << kMeasures[i] << " | " << m.method;
      if (const auto s = stats_of(*measures(m)[i]))
        os << " | " << sci3(s->q1) << " | " << sci3(s->q2) << " | " << sci3(s->q3) << " | " << sci3(s->mean) << " | "
           << sci3(s->std) << " |\n";
      else
        os << " | n/a | n/a | n/a | n/a | n/a |\n";
    }
  }
  for (const Merged& m : group)
    if (m.mismatched > 0)
      os << "\n" << m.method << ": " << m.mismatched << " misclassified clouds excluded from L2.\n";
  os << '\n';
}

}  // namespace

std::string render_report(std::span<const EvaluatedRun> runs, ReportFormat format) {
  if (runs.empty()) throw std::invalid_argument("render_report: no evaluated runs");
  std::vector<std::string> perturbations;
  for (const EvaluatedRun& r : runs)
    if (std::find(perturbations.begin(), perturbations.end(), r.perturbation) == perturbations.end())
      perturbations.push_back(r.perturbation);
  std::sort(perturbations.begin(), perturbations.end());

  std::ostringstream os;
  const auto whole = merge(runs, nullptr);
  if (format == ReportFormat::Csv) {
    csv_tables(os, whole);
    if (perturbations.size() > 1)
      for (const std::string& p : perturbations) csv_tables(os, merge(runs, &p));
  } else {
    os << "# Evaluation report\n\n";
    markdown_tables(os, whole, "Whole test set");
    if (perturbations.size() > 1)
      for (const std::string& p : perturbations) markdown_tables(os, merge(runs, &p), "Perturbation " + p);
  }
  return os.str();
}

std::vector<CsvBlock> parse_report_csv(std::string_view text) {
  std::vector<CsvBlock> blocks;
  std::size_t line_no = 0;
  bool expect_header = false;
  std::size_t pos = 0;
  while (pos < text.size()) {
    const std::size_t end = std::min(text.find('\n', pos), text.size());
    const std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (line.empty()) continue;
    if (line.front() == '#') {
      if (expect_header) throw ParseError(line_no, "table without header");
      blocks.push_back({std::string(line.substr(line.find_first_not_of("# "))), {}, {}});
      expect_header = true;
      continue;
    }
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
      const std::size_t comma = line.find(',', start);
      fields.emplace_back(line.substr(start, comma - start));
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
    if (blocks.empty()) throw ParseError(line_no, "row before the first table title");
    CsvBlock& b = blocks.back();
    if (expect_header) {
      b.header = std::move(fields);
      expect_header = false;
    } else {
      if (fields.size() != b.header.size()) throw ParseError(line_no, "field count differs from the header");
      b.rows.push_back(std::move(fields));
    }
  }
  if (expect_header) throw FormatError("parse_report_csv: last table has no header");
  return blocks;
}

}  // namespace primfit

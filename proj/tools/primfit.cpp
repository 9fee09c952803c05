// primfit command line: generate | classify | evaluate

#include <CLI11.hpp>

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "primfit/datagen.hpp"
#include "primfit/errors.hpp"
#include "primfit/evalkit.hpp"
#include "primfit/recognize.hpp"
#include "primfit/rng.hpp"

namespace fs = std::filesystem;
using namespace primfit;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitAssert = 3;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void log(const std::string& msg) { std::cerr << "[primfit] " << msg << '\n'; }

std::size_t worker_count(std::size_t jobs) {
  std::size_t n = std::max(1U, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("PRIMFIT_THREADS")) {
    try {
      const long cap = std::stol(env);
      if (cap >= 1) n = std::min<std::size_t>(n, static_cast<std::size_t>(cap));
    } catch (const std::exception&) {
      log("ignoring PRIMFIT_THREADS=" + std::string(env));
    }
  }
  return std::max<std::size_t>(1, std::min(n, jobs));
}

// Runs job(i) for i in [0, jobs) on a small pool; results are stored by index.
template <class Job>
void parallel_for(std::size_t jobs, Job&& job) {
  std::atomic<std::size_t> next{0};
  const auto work = [&] {
    for (std::size_t i = next++; i < jobs; i = next++) job(i);
  };
  const std::size_t n = worker_count(jobs);
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < n; ++t) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  for (std::string item; std::getline(ss, item, ',');) {
    item.erase(std::remove_if(item.begin(), item.end(), [](unsigned char c) { return std::isspace(c); }), item.end());
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::string stem_of(const std::string& file) {
  const fs::path p(file);
  return (p.parent_path() / p.stem()).generic_string();
}

std::string csv_real(double v) { return format_real(v); }

// Reads a flat key=value file and turns it into --key=value arguments.
std::vector<std::string> config_arguments(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot read config file " + path.string());
  std::vector<std::string> args;
  std::string line;
  for (std::size_t no = 1; std::getline(in, line); ++no) {
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw UsageError(path.string() + ":" + std::to_string(no) + ": expected key=value");
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      const auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string{} : s.substr(b, e - b + 1);
    };
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty() || key == "config") throw UsageError(path.string() + ":" + std::to_string(no) + ": bad key");
    args.push_back("--" + key + "=" + value);
  }
  return args;
}

// ---------------------------------------------------------------------------
// generate

struct GenerateOptions {
  std::uint64_t seed = 1;
  std::string out;
  std::size_t per_kind = 20;
  std::string perturbations = "a0";
  std::size_t points_min = 1000;
  std::size_t points_max = 3000;
};

int cmd_generate(const GenerateOptions& o) {
  if (o.per_kind < 1) throw UsageError("--per-kind must be at least 1");
  if (o.points_min < 100 || o.points_max < o.points_min) throw UsageError("need 100 <= --points-min <= --points-max");
  std::vector<Perturbation> perts;
  for (const std::string& name : split_list(o.perturbations)) {
    try {
      perts.push_back(parse_perturbation(name));
    } catch (const std::invalid_argument& e) {
      throw UsageError(e.what());
    }
  }
  if (perts.empty()) throw UsageError("--perturbations is empty");

  struct Job {
    Perturbation pert;
    Kind kind;
    std::size_t index;
  };
  std::vector<Job> jobs;
  for (Perturbation p : perts)
    for (Kind k : kAllKinds)
      for (std::size_t i = 0; i < o.per_kind; ++i) jobs.push_back({p, k, i});

  const fs::path root(o.out);
  std::error_code ec;
  for (Perturbation p : perts) fs::create_directories(root / perturbation_name(p), ec);
  if (ec) throw Error("cannot create " + root.string() + ": " + ec.message());

  std::vector<ManifestRow> rows(jobs.size());
  std::vector<std::string> failures(jobs.size());
  parallel_for(jobs.size(), [&](std::size_t j) {
    const Job& job = jobs[j];
    const auto p_index = static_cast<std::uint64_t>(job.pert);
    const std::uint64_t cloud_seed =
        derive_seed(o.seed, {p_index, static_cast<std::uint64_t>(code(job.kind)), job.index});
    const std::string stem = perturbation_name(job.pert) + "/" + std::string(kind_name(job.kind)) + "_" +
                             std::to_string(job.index);
    try {
      for (std::uint64_t attempt = 0;; ++attempt) {
        Rng rng(derive_seed(cloud_seed, {attempt}));
        const auto points = static_cast<std::size_t>(
            std::uniform_int_distribution<std::size_t>(o.points_min, o.points_max)(rng));
        const Segment seg = generate_segment(job.kind, rng(), points);
        const PerturbationSpec spec = draw_perturbation(job.pert, seg.cloud, rng);
        try {
          PointCloud cloud = perturb(seg.cloud, spec, seg.truth, rng());
          write_cloud_txt(root / (stem + ".txt"), cloud);
          write_gt_txt(root / (stem + "_gt.txt"), seg.gt);
          break;
        } catch (const DegenerateOutputError&) {
          if (attempt >= 16) throw;
        }
      }
      rows[j] = {stem + ".txt", code(job.kind), perturbation_name(job.pert), cloud_seed};
    } catch (const std::exception& e) {
      failures[j] = stem + ": " + e.what();
    }
  });
  for (const std::string& f : failures)
    if (!f.empty()) throw Error("generation failed for " + f);
  write_manifest(root / "manifest.csv", rows);
  log("generated " + std::to_string(rows.size()) + " clouds in " + root.string());
  std::cout << "clouds," << rows.size() << '\n';
  return 0;
}

// ---------------------------------------------------------------------------
// classify

struct ClassifyOptions {
  std::string in;
  std::string out;
  bool use_hough = false;
  std::size_t k = 20;
  std::size_t bins = 64;
};

int cmd_classify(const ClassifyOptions& o) {
  const fs::path in(o.in);
  const fs::path out = o.out.empty() ? in : fs::path(o.out);
  const fs::path manifest = in / "manifest.csv";
  if (!fs::exists(manifest)) throw Error("missing manifest " + manifest.string());
  const std::vector<ManifestRow> rows = read_manifest(manifest);
  if (rows.empty()) {
    log("warning: empty manifest, nothing to classify");
    return 0;
  }
  if (o.k < 3) throw UsageError("--k must be at least 3");
  if (o.bins < 8) throw UsageError("--bins must be at least 8");
  ClassifyConfig config;
  config.use_hough = o.use_hough;
  config.k_neighbors = o.k;
  config.bins = o.bins;

  std::vector<std::string> lines(rows.size());
  std::vector<std::string> errors(rows.size());
  parallel_for(rows.size(), [&](std::size_t i) {
    const ManifestRow& row = rows[i];
    try {
      const PointCloud cloud = read_cloud_txt(in / row.file);
      const ClassifiedFit fit = classify(cloud, config);
      const fs::path pred = out / (stem_of(row.file) + "_pred.txt");
      fs::create_directories(pred.parent_path());
      write_gt_txt(pred, GroundTruthVector::encode(fit.params));
      lines[i] = row.file + "," + std::to_string(code(fit.kind)) + "," + csv_real(fit.chosen_mfe());
    } catch (const std::exception& e) {
      errors[i] = e.what();
      lines[i] = row.file + ",0,";
    }
  });
  std::size_t skipped = 0;
  std::cout << "file,kind,mfe\n";
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (!errors[i].empty()) {
      ++skipped;
      log("skipped " + rows[i].file + ": " + errors[i]);
    }
    std::cout << lines[i] << '\n';
  }
  log("classified " + std::to_string(rows.size() - skipped) + " of " + std::to_string(rows.size()) + " clouds");
  return 0;
}

// ---------------------------------------------------------------------------
// evaluate

struct EvaluateOptions {
  std::string pred;
  std::string gt;
  std::string out;
  std::string method = "primfit";
  std::vector<std::string> asserts;
};

struct Assertion {
  std::string key;
  double threshold;
};

std::vector<Assertion> parse_assertions(const std::vector<std::string>& items) {
  static const std::vector<std::string> keys = {"min-macro-acc", "min-micro-acc", "max-mfe-q2", "max-l2-q2"};
  std::vector<Assertion> out;
  for (const std::string& item : items) {
    const auto eq = item.find('=');
    const std::string key = item.substr(0, eq);
    if (eq == std::string::npos || std::find(keys.begin(), keys.end(), key) == keys.end())
      throw UsageError("--assert expects one of min-macro-acc, min-micro-acc, max-mfe-q2, max-l2-q2 as key=value");
    try {
      out.push_back({key, std::stod(item.substr(eq + 1))});
    } catch (const std::exception&) {
      throw UsageError("--assert " + item + ": bad number");
    }
  }
  return out;
}

int cmd_evaluate(const EvaluateOptions& o) {
  const std::vector<Assertion> assertions = parse_assertions(o.asserts);
  const fs::path gt_root(o.gt);
  const fs::path pred_root(o.pred);
  const fs::path manifest = gt_root / "manifest.csv";
  if (!fs::exists(manifest)) throw Error("missing manifest " + manifest.string());
  const std::vector<ManifestRow> rows = read_manifest(manifest);

  std::map<std::string, EvaluatedRun> runs;
  std::size_t matched = 0;
  std::cout << "file,true,pred,l2,mfe,dhaus\n";
  for (const ManifestRow& row : rows) {
    const std::string stem = stem_of(row.file);
    const fs::path pred_path = pred_root / (stem + "_pred.txt");
    if (!fs::exists(pred_path)) {
      log("no prediction for " + row.file + ", excluded");
      continue;
    }
    try {
      const PointCloud cloud = read_cloud_txt(gt_root / row.file);
      const GroundTruthVector gt = read_gt_txt(gt_root / (stem + "_gt.txt"));
      const GroundTruthVector pred = read_gt_txt(pred_path);
      const PrimitiveParams fitted = pred.decode();
      EvaluatedRun& run = runs[row.perturbation];
      run.method = o.method;
      run.perturbation = row.perturbation;
      const std::pair<int, int> pair{code(gt.kind()), code(pred.kind())};
      run.cm += confusion_matrix(std::span(&pair, 1));
      const double m = mfe(cloud, fitted);
      const double h = directed_hausdorff(cloud, fitted);
      run.mfe.push_back(m);
      run.hausdorff.push_back(h);
      std::string l2_text;
      if (gt.kind() == pred.kind()) {
        const double l2 = l2_param_distance(gt, pred);
        run.l2.push_back(l2);
        l2_text = csv_real(l2);
      } else {
        ++run.mismatched;
      }
      ++matched;
      std::cout << row.file << ',' << pair.first << ',' << pair.second << ',' << l2_text << ',' << csv_real(m) << ','
                << csv_real(h) << '\n';
    } catch (const std::exception& e) {
      log("excluded " + row.file + ": " + e.what());
    }
  }
  if (matched == 0) throw Error("no prediction matched a ground-truth cloud");

  std::vector<EvaluatedRun> list;
  for (auto& [name, run] : runs) list.push_back(std::move(run));
  const fs::path out(o.out);
  std::error_code ec;
  fs::create_directories(out, ec);
  for (const auto& [file, format] : {std::pair{"report.csv", ReportFormat::Csv}, {"report.md", ReportFormat::Markdown}}) {
    std::ofstream f(out / file, std::ios::binary);
    f << render_report(list, format);
    if (!f) throw Error("cannot write " + (out / file).string());
  }
  log("evaluated " + std::to_string(matched) + " clouds; reports in " + out.string());

  ConfusionMatrix cm;
  std::vector<double> mfes, l2s;
  for (const EvaluatedRun& r : list) {
    cm += r.cm;
    mfes.insert(mfes.end(), r.mfe.begin(), r.mfe.end());
    l2s.insert(l2s.end(), r.l2.begin(), r.l2.end());
  }
  bool ok = true;
  for (const Assertion& a : assertions) {
    std::optional<double> value;
    if (a.key == "min-macro-acc") value = class_metrics(cm).macro_value(Metric::ACC);
    if (a.key == "min-micro-acc") value = static_cast<double>(cm.trace()) / static_cast<double>(cm.total());
    if (a.key == "max-mfe-q2" && !mfes.empty()) value = summary_stats(mfes).q2;
    if (a.key == "max-l2-q2" && !l2s.empty()) value = summary_stats(l2s).q2;
    const bool pass = value && (a.key.starts_with("min") ? *value >= a.threshold : *value <= a.threshold);
    log(std::string(pass ? "PASS " : "FAIL ") + a.key + "=" + format_real(a.threshold) +
        " (observed " + (value ? format_real(*value) : std::string("n/a")) + ")");
    ok = ok && pass;
  }
  return ok ? 0 : kExitAssert;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"primfit: synthetic primitive segments, fitting, recognition and evaluation"};
  app.require_subcommand(1);
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  std::string config_path;

  GenerateOptions gen;
  auto* g = app.add_subcommand("generate", "write a seeded benchmark dataset");
  g->add_option("--out", gen.out, "dataset directory")->required();
  g->add_option("--seed", gen.seed, "master seed");
  g->add_option("--per-kind", gen.per_kind, "clouds per kind and perturbation");
  g->add_option("--perturbations", gen.perturbations, "comma list of a0..a9");
  g->add_option("--points-min", gen.points_min, "smallest sampled point count");
  g->add_option("--points-max", gen.points_max, "largest sampled point count");

  ClassifyOptions cls;
  auto* c = app.add_subcommand("classify", "fit every family and write one prediction per cloud");
  c->add_option("--in", cls.in, "dataset directory with manifest.csv")->required();
  c->add_option("--out", cls.out, "prediction directory (default: the dataset directory)");
  c->add_flag("--use-hough", cls.use_hough, "Hough path instead of least squares");
  c->add_option("--k", cls.k, "neighbours for normal estimation");
  c->add_option("--bins", cls.bins, "Hough bins per dimension");

  EvaluateOptions ev;
  auto* e = app.add_subcommand("evaluate", "score predictions against ground truth");
  e->add_option("--pred", ev.pred, "prediction directory")->required();
  e->add_option("--gt", ev.gt, "dataset directory with manifest.csv")->required();
  e->add_option("--out", ev.out, "report directory")->required();
  e->add_option("--method", ev.method, "method label used in the reports");
  e->add_option("--assert", ev.asserts, "threshold key=value; failing ones exit with 3")
      ->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);

  for (auto* sub : {g, c, e}) sub->add_option("--config", config_path, "flat key=value file; flags win");

  // Config entries are spliced in before the command line so that flags win.
  std::vector<std::string> args(argv + 1, argv + argc);
  try {
    for (std::size_t i = 0; i < args.size(); ++i) {
      std::string path;
      if (args[i] == "--config" && i + 1 < args.size()) path = args[i + 1];
      else if (args[i].starts_with("--config=")) path = args[i].substr(9);
      if (path.empty()) continue;
      const auto extra = config_arguments(path);
      const auto sub = std::find_if(args.begin(), args.end(),
                                    [](const std::string& a) { return !a.empty() && a.front() != '-'; });
      if (sub == args.end()) throw UsageError("--config needs a subcommand");
      args.insert(sub + 1, extra.begin(), extra.end());
      break;
    }
    std::reverse(args.begin(), args.end());
    app.parse(args);
  } catch (const CLI::ParseError& err) {
    const int rc = app.exit(err);
    return rc == 0 ? 0 : kExitUsage;
  } catch (const UsageError& err) {
    std::cerr << "primfit: " << err.what() << '\n';
    return kExitUsage;
  }

  try {
    if (*g) return cmd_generate(gen);
    if (*c) return cmd_classify(cls);
    return cmd_evaluate(ev);
  } catch (const UsageError& err) {
    std::cerr << "primfit: " << err.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& err) {
    std::cerr << "primfit: " << err.what() << '\n';
    return kExitData;
  }
}

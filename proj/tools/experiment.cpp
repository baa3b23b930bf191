#include "experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <functional>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <thread>

#include "ganfp/checkpoint.hpp"
#include "ganfp/csv.hpp"
#include "ganfp/error.hpp"

namespace ganfp::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const std::vector<std::pair<Method, std::string>>& method_table() {
  static const std::vector<std::pair<Method, std::string>> t{
      {Method::kGanFp, "ganfp"},
      {Method::kInfoGanAug, "infogan_aug"},
      {Method::kDnnWeighted, "dnn_weighted"},
      {Method::kDnnUndersample, "dnn_undersample"},
      {Method::kDnnSmote, "dnn_smote"},
      {Method::kDnnAdasyn, "dnn_adasyn"},
  };
  return t;
}

[[noreturn]] void config_error(const std::string& key, const std::string& msg) {
  throw FormatError("config key '" + key + "': " + msg);
}

void check_keys(const json& j, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) config_error(where.empty() ? "<root>" : where, "expected an object");
  for (const auto& [key, value] : j.items()) {
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; })) {
      config_error(where.empty() ? key : where + "." + key, "unknown key");
    }
  }
}

template <typename T>
void read(const json& j, const char* name, const std::string& where, T& out) {
  if (!j.contains(name)) return;
  const std::string key = where.empty() ? name : where + "." + name;
  try {
    out = j.at(name).get<T>();
  } catch (const json::exception& e) {
    config_error(key, e.what());
  }
}

template <typename T>
void read_nonneg(const json& j, const char* name, const std::string& where, T& out) {
  if (!j.contains(name)) return;
  const std::string key = where.empty() ? name : where + "." + name;
  const json& v = j.at(name);
  if (!v.is_number() || v.get<double>() < 0) config_error(key, "expected a non-negative number");
  read(j, name, where, out);
}

std::string dataset_kind_name(DatasetKind k) {
  switch (k) {
    case DatasetKind::kSynth: return "synth";
    case DatasetKind::kCmapss: return "cmapss";
    case DatasetKind::kAps: return "aps";
    case DatasetKind::kCsv: return "csv";
  }
  return "synth";
}

fs::path resolve_path(const std::string& raw, const fs::path& base_dir, const std::string& key) {
  const fs::path p(raw);
  if (p.is_absolute()) {
    if (!fs::exists(p)) config_error(key, "file '" + raw + "' does not exist");
    return p;
  }
  std::vector<fs::path> tried;
  for (const fs::path& root : {base_dir, data_root()}) {
    if (root.empty() && !tried.empty()) continue;
    const fs::path candidate = root / p;
    if (fs::exists(candidate)) return candidate;
    tried.push_back(candidate);
  }
  std::string msg = "file '" + raw + "' not found; looked at";
  for (const auto& t : tried) msg += " " + t.string();
  if (data_root().empty()) msg += " (GANFP_DATA_DIR is not set)";
  config_error(key, msg);
}

std::string output_name(nn::OutputActivation a) {
  switch (a) {
    case nn::OutputActivation::kSigmoid: return "sigmoid";
    case nn::OutputActivation::kLinear: return "linear";
    case nn::OutputActivation::kCodeHeads: return "code_heads";
  }
  return "sigmoid";
}

nn::OutputActivation parse_output(const std::string& s) {
  if (s == "sigmoid") return nn::OutputActivation::kSigmoid;
  if (s == "linear") return nn::OutputActivation::kLinear;
  if (s == "code_heads") return nn::OutputActivation::kCodeHeads;
  throw FormatError("checkpoint: unknown output activation '" + s + "'");
}

json spec_json(const nn::NetworkSpec& s) {
  return {{"layers", s.layer_sizes}, {"output", output_name(s.output)}, {"sigmoid_heads", s.sigmoid_heads}};
}

nn::NetworkSpec spec_from_json(const json& j) {
  nn::NetworkSpec s;
  s.layer_sizes = j.at("layers").get<std::vector<std::size_t>>();
  s.output = parse_output(j.at("output").get<std::string>());
  s.sigmoid_heads = j.at("sigmoid_heads").get<std::size_t>();
  s.validate();
  return s;
}

gan::DnnConfig dnn_config(const ExperimentConfig& cfg, std::uint64_t seed) {
  return {cfg.ganfp.batch_size, cfg.ganfp.total_batches, cfg.ganfp.optimizer, seed};
}

std::string join_row(const std::vector<std::string>& cells) {
  std::string out;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i) out += ',';
    out += cells[i];
  }
  return out;
}

std::vector<std::string> report_cells(const metrics::MetricsReport& r) {
  std::vector<std::string> out;
  for (double v : metrics::report_values(r)) out.push_back(csv::format(v));
  return out;
}

std::string header_with(std::vector<std::string> front, std::vector<std::string> back = {}) {
  for (const auto& c : metrics::report_columns()) front.push_back(c);
  for (auto& c : back) front.push_back(std::move(c));
  return join_row(front);
}

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write " + path.string());
  return out;
}

// Runs tasks on up to `jobs` threads. Results land in their own slots, so the
// outcome does not depend on scheduling.
void run_parallel(std::vector<std::function<void()>>& tasks, std::size_t jobs) {
  std::vector<std::exception_ptr> errors(tasks.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < tasks.size(); i = next++) {
      try {
        tasks[i]();
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t n = std::max<std::size_t>(1, std::min(jobs, tasks.size()));
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < n; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

std::uint64_t fold_seed(std::uint64_t seed, std::size_t fold) { return derive_seed(seed, 100 + fold); }

struct FoldData {
  Matrix X_train, X_test;
  std::vector<int> y_train, y_test;
  Preprocessor prep;
};

FoldData prepare_fold(const data::Dataset& ds, std::span<const std::size_t> train,
                      std::span<const std::size_t> test) {
  FoldData f;
  const data::Dataset tr = data::subset(ds, train);
  const data::Dataset te = data::subset(ds, test);
  f.prep = Preprocessor::fit(tr.X);
  f.X_train = f.prep.apply(tr.X);
  f.X_test = f.prep.apply(te.X);
  f.y_train = tr.y;
  f.y_test = te.y;
  return f;
}

FoldOutcome evaluate_run(const std::function<std::vector<double>()>& run, std::span<const int> y_test) {
  FoldOutcome out;
  try {
    out.report = metrics::evaluate(y_test, run());
  } catch (const NumericError& e) {
    out.ok = false;
    out.status = std::string("numeric error: ") + e.what();
    std::replace(out.status.begin(), out.status.end(), ',', ';');
    std::replace(out.status.begin(), out.status.end(), '\n', ' ');
  }
  return out;
}

metrics::MetricsReport mean_of_ok(std::span<const FoldOutcome> folds) {
  std::vector<metrics::MetricsReport> ok;
  for (const auto& f : folds) {
    if (f.ok) ok.push_back(f.report);
  }
  return ok.empty() ? metrics::MetricsReport{} : metrics::mean_report(ok);
}

json model_metadata(const ExperimentConfig& cfg, const gan::Architecture& arch, std::size_t k,
                    const Preprocessor& prep, const data::Dataset& ds, std::size_t fold, bool has_gan) {
  json nets = {{"p", spec_json(arch.p)}};
  if (has_gan) {
    nets["g"] = spec_json(arch.g);
    nets["d"] = spec_json(arch.d);
    nets["q"] = spec_json(arch.q);
    nets["d2"] = spec_json(arch.d2);
  }
  return {{"format", "ganfp-model"},
          {"method", method_name(cfg.method)},
          {"fold", fold},
          {"dim", ds.dim()},
          {"source", ds.source},
          {"shared_prefix_k", has_gan ? k : 0},
          {"networks", nets},
          {"feature_names", ds.feature_names},
          {"norm", {{"mean", prep.norm.mean}, {"stddev", prep.norm.stddev}}},
          {"medians", prep.imputer.medians}};
}

std::string svg_polyline(const std::vector<std::pair<double, double>>& pts, const std::string& color) {
  std::ostringstream os;
  os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.2\" points=\"";
  for (std::size_t i = 0; i < pts.size(); ++i) {
    if (i) os << ' ';
    os << csv::format(std::round(pts[i].first * 100.0) / 100.0) << ','
       << csv::format(std::round(pts[i].second * 100.0) / 100.0);
  }
  os << "\"/>\n";
  return os.str();
}

// Two panels, failure left and non-failure right. Windowed data plots each
// selected sensor over time; other data plots each sample across features.
void write_samples_svg(const fs::path& path, const Matrix& samples, std::span<const int> labels,
                       std::size_t window, const std::vector<std::size_t>& sensors) {
  static const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                  "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};
  const bool windowed = window > 1;
  const std::size_t steps = windowed ? window : samples.cols();
  auto value = [&](std::size_t row, std::size_t step, std::size_t sensor) {
    return windowed ? samples(row, step * data::kCmapssSensors + sensor) : samples(row, step);
  };
  double lo = 0.0, hi = 0.0;
  bool first = true;
  for (std::size_t r = 0; r < samples.rows(); ++r) {
    for (std::size_t t = 0; t < steps; ++t) {
      for (std::size_t s : windowed ? sensors : std::vector<std::size_t>{1}) {
        const double v = value(r, t, s - 1);
        lo = first ? v : std::min(lo, v);
        hi = first ? v : std::max(hi, v);
        first = false;
      }
    }
  }
  if (hi - lo < 1e-12) hi = lo + 1.0;

  const double panel_w = 420.0, panel_h = 280.0, margin = 40.0;
  std::ofstream out = open_out(path);
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << 2 * panel_w + 3 * margin
      << "\" height=\"" << panel_h + 2 * margin << "\">\n";
  for (int panel = 0; panel < 2; ++panel) {
    const int label = panel == 0 ? 1 : 0;
    const double x0 = margin + panel * (panel_w + margin);
    out << "<g class=\"" << (label == 1 ? "failure" : "non-failure") << "\">\n";
    out << "<rect x=\"" << x0 << "\" y=\"" << margin << "\" width=\"" << panel_w << "\" height=\""
        << panel_h << "\" fill=\"none\" stroke=\"#444\"/>\n";
    out << "<text x=\"" << x0 << "\" y=\"" << margin - 10 << "\" font-size=\"14\">"
        << (label == 1 ? "generated failure" : "generated non-failure") << "</text>\n";
    for (std::size_t r = 0; r < samples.rows(); ++r) {
      if (labels[r] != label) continue;
      const std::vector<std::size_t> lines = windowed ? sensors : std::vector<std::size_t>{1};
      for (std::size_t li = 0; li < lines.size(); ++li) {
        std::vector<std::pair<double, double>> pts;
        for (std::size_t t = 0; t < steps; ++t) {
          const double x = x0 + panel_w * (steps == 1 ? 0.5 : static_cast<double>(t) / (steps - 1));
          const double y = margin + panel_h * (1.0 - (value(r, t, lines[li] - 1) - lo) / (hi - lo));
          pts.emplace_back(x, y);
        }
        const std::size_t color = windowed ? li : r;
        out << svg_polyline(pts, kColors[color % 8]);
      }
    }
    out << "</g>\n";
  }
  if (windowed) {
    for (std::size_t li = 0; li < sensors.size(); ++li) {
      out << "<text x=\"" << margin + 60.0 * static_cast<double>(li) << "\" y=\""
          << panel_h + margin + 25 << "\" font-size=\"12\" fill=\"" << kColors[li % 8] << "\">s"
          << sensors[li] << "</text>\n";
    }
  }
  out << "</svg>\n";
}

}  // namespace

const std::vector<Method>& all_methods() {
  static const std::vector<Method> m = [] {
    std::vector<Method> out;
    for (const auto& [method, name] : method_table()) out.push_back(method);
    return out;
  }();
  return m;
}

std::string method_name(Method m) {
  for (const auto& [method, name] : method_table()) {
    if (method == m) return name;
  }
  return "ganfp";
}

Method parse_method(const std::string& name) {
  std::string valid;
  for (const auto& [method, n] : method_table()) {
    if (n == name) return method;
    valid += (valid.empty() ? "" : ", ") + n;
  }
  throw FormatError("unknown method '" + name + "' (expected one of " + valid + ")");
}

fs::path data_root() {
  const char* v = std::getenv("GANFP_DATA_DIR");
  return v && *v ? fs::path(v) : fs::path();
}

ExperimentConfig parse_config(const json& j, const fs::path& base_dir) {
  ExperimentConfig cfg;
  check_keys(j, "", {"dataset", "method", "folds", "seed", "out", "ganfp", "hidden", "resample",
                     "checkpoints", "jobs"});
  if (j.contains("dataset")) {
    const json& d = j.at("dataset");
    check_keys(d, "dataset", {"kind", "path", "n_major", "n_minor", "d", "separation", "noise", "seed",
                              "window", "fail_horizon", "stride", "label_column"});
    std::string kind = "synth";
    read(d, "kind", "dataset", kind);
    if (kind == "synth") cfg.dataset.kind = DatasetKind::kSynth;
    else if (kind == "cmapss") cfg.dataset.kind = DatasetKind::kCmapss;
    else if (kind == "aps") cfg.dataset.kind = DatasetKind::kAps;
    else if (kind == "csv") cfg.dataset.kind = DatasetKind::kCsv;
    else config_error("dataset.kind", "expected synth, cmapss, aps or csv, got '" + kind + "'");

    auto& s = cfg.dataset.synth;
    read_nonneg(d, "n_major", "dataset", s.n_major);
    read_nonneg(d, "n_minor", "dataset", s.n_minor);
    read_nonneg(d, "d", "dataset", s.d);
    read_nonneg(d, "separation", "dataset", s.separation);
    read_nonneg(d, "noise", "dataset", s.noise);
    read_nonneg(d, "seed", "dataset", s.seed);
    read_nonneg(d, "window", "dataset", cfg.dataset.window.window);
    read_nonneg(d, "fail_horizon", "dataset", cfg.dataset.window.fail_horizon);
    read_nonneg(d, "stride", "dataset", cfg.dataset.window.stride);
    read(d, "label_column", "dataset", cfg.dataset.label_column);
    if (cfg.dataset.kind != DatasetKind::kSynth) {
      if (!d.contains("path")) config_error("dataset.path", "required for kind '" + kind + "'");
      std::string raw;
      read(d, "path", "dataset", raw);
      cfg.dataset.path = resolve_path(raw, base_dir, "dataset.path").string();
    }
  }
  if (j.contains("method")) {
    std::string m;
    read(j, "method", "", m);
    try {
      cfg.method = parse_method(m);
    } catch (const FormatError& e) {
      config_error("method", e.what());
    }
  }
  read_nonneg(j, "folds", "", cfg.folds);
  if (cfg.folds < 2) config_error("folds", "must be >= 2");
  read_nonneg(j, "seed", "", cfg.seed);
  if (j.contains("out")) {
    std::string out;
    read(j, "out", "", out);
    cfg.out = out;
  }
  read_nonneg(j, "hidden", "", cfg.hidden);
  read(j, "checkpoints", "", cfg.save_checkpoints);
  read_nonneg(j, "jobs", "", cfg.jobs);
  if (j.contains("resample")) {
    const json& r = j.at("resample");
    check_keys(r, "resample", {"k_neighbors", "beta"});
    read_nonneg(r, "k_neighbors", "resample", cfg.k_neighbors);
    read_nonneg(r, "beta", "resample", cfg.adasyn_beta);
  }
  if (j.contains("ganfp")) {
    const json& g = j.at("ganfp");
    check_keys(g, "ganfp", {"lambda_q", "lambda_g", "lambda_d", "lambda_p", "lambda_d2", "lambda_l2",
                            "lambda_code", "code_from_real_labels", "batch_size", "total_batches", "gen_loss",
                            "shared_prefix_k", "optimizer"});
    auto& c = cfg.ganfp;
    read_nonneg(g, "lambda_q", "ganfp", c.lambda_q);
    read_nonneg(g, "lambda_g", "ganfp", c.lambda_g);
    read_nonneg(g, "lambda_d", "ganfp", c.lambda_d);
    read_nonneg(g, "lambda_p", "ganfp", c.lambda_p);
    read_nonneg(g, "lambda_d2", "ganfp", c.lambda_d2);
    read_nonneg(g, "lambda_l2", "ganfp", c.lambda_l2);
    read_nonneg(g, "lambda_code", "ganfp", c.lambda_code);
    read(g, "code_from_real_labels", "ganfp", c.code_from_real_labels);
    read_nonneg(g, "batch_size", "ganfp", c.batch_size);
    read_nonneg(g, "total_batches", "ganfp", c.total_batches);
    if (g.contains("gen_loss")) {
      std::string form;
      read(g, "gen_loss", "ganfp", form);
      if (form == "nonsaturating") c.gen_loss = gan::GenLoss::kNonSaturating;
      else if (form == "minimax") c.gen_loss = gan::GenLoss::kMinimax;
      else config_error("ganfp.gen_loss", "expected minimax or nonsaturating, got '" + form + "'");
    }
    if (g.contains("shared_prefix_k")) {
      std::size_t k = 0;
      read_nonneg(g, "shared_prefix_k", "ganfp", k);
      cfg.shared_prefix_k = k;
    }
    if (g.contains("optimizer")) {
      const json& o = g.at("optimizer");
      check_keys(o, "ganfp.optimizer", {"kind", "lr", "beta1", "beta2", "eps"});
      if (o.contains("kind")) {
        std::string kind;
        read(o, "kind", "ganfp.optimizer", kind);
        if (kind == "adam") c.optimizer.kind = nn::OptimizerKind::kAdam;
        else if (kind == "sgd") c.optimizer.kind = nn::OptimizerKind::kSgd;
        else config_error("ganfp.optimizer.kind", "expected sgd or adam, got '" + kind + "'");
      }
      read_nonneg(o, "lr", "ganfp.optimizer", c.optimizer.lr);
      read_nonneg(o, "beta1", "ganfp.optimizer", c.optimizer.beta1);
      read_nonneg(o, "beta2", "ganfp.optimizer", c.optimizer.beta2);
      read_nonneg(o, "eps", "ganfp.optimizer", c.optimizer.eps);
    }
  }
  try {
    cfg.ganfp.validate();
  } catch (const ParameterError& e) {
    config_error("ganfp", e.what());
  }
  return cfg;
}

ExperimentConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  try {
    return parse_config(j, path.parent_path());
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

json config_to_json(const ExperimentConfig& cfg) {
  const auto& s = cfg.dataset.synth;
  json d = {{"kind", dataset_kind_name(cfg.dataset.kind)}};
  if (cfg.dataset.kind == DatasetKind::kSynth) {
    d.update({{"n_major", s.n_major}, {"n_minor", s.n_minor}, {"d", s.d},
              {"separation", s.separation}, {"noise", s.noise}, {"seed", s.seed}});
  } else {
    d["path"] = cfg.dataset.path;
  }
  if (cfg.dataset.kind == DatasetKind::kCmapss) {
    d.update({{"window", cfg.dataset.window.window},
              {"fail_horizon", cfg.dataset.window.fail_horizon},
              {"stride", cfg.dataset.window.stride}});
  }
  if (cfg.dataset.kind == DatasetKind::kCsv) d["label_column"] = cfg.dataset.label_column;
  const auto& c = cfg.ganfp;
  json g = {{"lambda_q", c.lambda_q},
            {"lambda_g", c.lambda_g},
            {"lambda_d", c.lambda_d},
            {"lambda_p", c.lambda_p},
            {"lambda_d2", c.lambda_d2},
            {"lambda_l2", c.lambda_l2},
            {"lambda_code", c.lambda_code},
            {"code_from_real_labels", c.code_from_real_labels},
            {"batch_size", c.batch_size},
            {"total_batches", c.total_batches},
            {"gen_loss", c.gen_loss == gan::GenLoss::kMinimax ? "minimax" : "nonsaturating"},
            {"optimizer",
             {{"kind", c.optimizer.kind == nn::OptimizerKind::kAdam ? "adam" : "sgd"},
              {"lr", c.optimizer.lr},
              {"beta1", c.optimizer.beta1},
              {"beta2", c.optimizer.beta2},
              {"eps", c.optimizer.eps}}}};
  if (cfg.shared_prefix_k) g["shared_prefix_k"] = *cfg.shared_prefix_k;
  return {{"dataset", d},
          {"method", method_name(cfg.method)},
          {"folds", cfg.folds},
          {"seed", cfg.seed},
          {"out", cfg.out.string()},
          {"hidden", cfg.hidden},
          {"resample", {{"k_neighbors", cfg.k_neighbors}, {"beta", cfg.adasyn_beta}}},
          {"checkpoints", cfg.save_checkpoints},
          {"ganfp", g}};
}

data::Dataset load_dataset(const DatasetSpec& spec) {
  switch (spec.kind) {
    case DatasetKind::kSynth: return data::synth_imbalanced(spec.synth);
    case DatasetKind::kCmapss: return data::window_cmapss(data::load_cmapss(spec.path), spec.window);
    case DatasetKind::kAps: return data::load_aps(spec.path);
    case DatasetKind::kCsv: return data::load_labeled_csv(spec.path, spec.label_column);
  }
  throw ParameterError("unknown dataset kind");
}

DatasetSpec suite_dataset(const std::string& suite) {
  DatasetSpec spec;
  if (suite == "synth") return spec;
  std::string file;
  std::string format;
  if (suite.size() == 5 && suite.rfind("fd00", 0) == 0 && suite[4] >= '1' && suite[4] <= '4') {
    spec.kind = DatasetKind::kCmapss;
    file = "train_FD00" + std::string(1, suite[4]) + ".txt";
    format = "whitespace-separated NASA CMAPSS text, 26 columns (engine, cycle, 3 settings, 21 sensors)";
  } else if (suite == "aps") {
    spec.kind = DatasetKind::kAps;
    file = "aps_failure_training_set.csv";
    format = "Scania APS CSV with a 'class' column of pos/neg and 'na' for missing values";
  } else {
    throw FormatError("unknown suite '" + suite + "' (expected synth, fd001..fd004 or aps)");
  }
  const fs::path root = data_root();
  if (root.empty()) {
    throw FormatError("suite '" + suite + "' needs GANFP_DATA_DIR pointing at a directory with " + file +
                      " (" + format + ")");
  }
  const fs::path path = root / file;
  if (!fs::exists(path)) {
    throw FormatError("suite '" + suite + "': expected " + path.string() + " (" + format + ")");
  }
  spec.path = path.string();
  return spec;
}

gan::Architecture architecture_for(std::size_t dim, std::size_t hidden) {
  if (dim == 170) return gan::Architecture::aps();
  if (dim == 315) return gan::Architecture::cmapss();
  return gan::Architecture::for_dimension(dim, hidden);
}

Preprocessor Preprocessor::fit(const Matrix& X_train) {
  Preprocessor p;
  p.imputer = data::fit_median_imputer(X_train);
  Matrix filled = X_train;
  p.imputer.apply(filled);
  p.norm = data::fit_normalize(filled);
  return p;
}

Matrix Preprocessor::apply(Matrix X) const {
  imputer.apply(X);
  return data::apply_normalize(norm, X);
}

MethodRun run_method(Method method, const ExperimentConfig& cfg, const gan::Architecture& arch,
                     const Matrix& X_train, std::span<const int> y_train, const Matrix& X_test,
                     std::uint64_t seed) {
  MethodRun out;
  gan::GanFpConfig gc = cfg.ganfp;
  gc.seed = seed;
  gc.shared_prefix_k = cfg.shared_prefix_k.value_or(arch.shared_prefix_k);
  switch (method) {
    case Method::kGanFp: {
      out.ganfp = gan::train(gc, arch, X_train, y_train);
      out.scores = gan::predict(out.ganfp->networks.p, X_test);
      return out;
    }
    case Method::kInfoGanAug: {
      gan::AugmentedModel m = gan::train_infogan_aug(gc, arch, X_train, y_train);
      out.scores = gan::predict(m.p, X_test);
      out.classifier = std::move(m.p);
      return out;
    }
    case Method::kDnnWeighted: {
      out.classifier = gan::train_dnn(arch.p, X_train, y_train, gan::class_weight(y_train),
                                      dnn_config(cfg, seed));
      break;
    }
    case Method::kDnnUndersample:
    case Method::kDnnSmote:
    case Method::kDnnAdasyn: {
      resample::ResamplePlan plan;
      plan.method = method == Method::kDnnUndersample ? resample::Method::kUndersample
                    : method == Method::kDnnSmote     ? resample::Method::kSmote
                                                      : resample::Method::kAdasyn;
      plan.k_neighbors = cfg.k_neighbors;
      plan.beta = cfg.adasyn_beta;
      plan.seed = derive_seed(seed, 7);
      const resample::Resampled r = resample::apply_plan(X_train, y_train, plan);
      out.classifier = gan::train_dnn(arch.p, r.X, r.y, 1.0, dnn_config(cfg, seed));
      break;
    }
  }
  out.scores = gan::predict(*out.classifier, X_test);
  return out;
}

void write_metrics_csv(const fs::path& path, std::span<const FoldOutcome> folds) {
  std::ofstream out = open_out(path);
  out << header_with({"fold"}, {"status"}) << '\n';
  for (std::size_t i = 0; i < folds.size(); ++i) {
    auto cells = report_cells(folds[i].report);
    cells.insert(cells.begin(), std::to_string(i));
    cells.push_back(folds[i].status);
    out << join_row(cells) << '\n';
  }
  auto mean = report_cells(mean_of_ok(folds));
  std::size_t ok = 0;
  for (const auto& f : folds) ok += f.ok ? 1 : 0;
  mean.insert(mean.begin(), "mean");
  mean.push_back(std::to_string(ok) + "/" + std::to_string(folds.size()) + " folds");
  out << join_row(mean) << '\n';
}

std::vector<FoldOutcome> cmd_train(const ExperimentConfig& cfg) {
  const data::Dataset ds = load_dataset(cfg.dataset);
  const gan::Architecture arch = architecture_for(ds.dim(), cfg.hidden);
  const std::size_t k = cfg.shared_prefix_k.value_or(arch.shared_prefix_k);
  const auto folds = data::stratified_kfold(ds.y, cfg.folds, cfg.seed);
  fs::create_directories(cfg.out);
  {
    std::ofstream(cfg.out / "config.json") << config_to_json(cfg).dump(2) << '\n';
  }

  std::vector<FoldOutcome> outcomes(folds.size());
  std::vector<std::function<void()>> tasks;
  for (std::size_t f = 0; f < folds.size(); ++f) {
    tasks.emplace_back([&, f] {
      const FoldData fd = prepare_fold(ds, folds[f].train, folds[f].test);
      const fs::path dir = cfg.out / ("fold_" + std::to_string(f));
      fs::create_directories(dir);
      MethodRun run;
      outcomes[f] = evaluate_run(
          [&] {
            run = run_method(cfg.method, cfg, arch, fd.X_train, fd.y_train, fd.X_test, fold_seed(cfg.seed, f));
            return run.scores;
          },
          fd.y_test);
      if (run.ganfp) {
        std::ofstream h = open_out(dir / "history.csv");
        run.ganfp->history.write_csv(h);
      }
      if (cfg.save_checkpoints && (run.ganfp || run.classifier)) {
        const bool has_gan = run.ganfp.has_value();
        nn::ParamStore store;
        if (has_gan) store = run.ganfp->networks.store();
        else store.add(*run.classifier);
        const json meta = model_metadata(cfg, arch, k, fd.prep, ds, f, has_gan);
        nn::save_checkpoint((dir / "model.ckpt").string(), nn::make_checkpoint(store, meta.dump()));
      }
    });
  }
  run_parallel(tasks, cfg.jobs);
  write_metrics_csv(cfg.out / "metrics.csv", outcomes);
  return outcomes;
}

std::size_t cmd_generate(const fs::path& checkpoint, const GenerateOptions& opts, const fs::path& out_dir) {
  const nn::Checkpoint ckpt = nn::load_checkpoint(checkpoint.string());
  json meta;
  try {
    meta = json::parse(ckpt.metadata);
  } catch (const json::parse_error& e) {
    throw FormatError(checkpoint.string() + ": metadata is not JSON: " + e.what());
  }
  if (meta.value("format", "") != "ganfp-model") {
    throw FormatError(checkpoint.string() + ": not a ganfp model checkpoint");
  }
  const json& nets = meta.at("networks");
  if (!nets.contains("g")) {
    throw FormatError(checkpoint.string() + ": method '" + meta.value("method", "?") +
                      "' has no generator; train with method ganfp");
  }
  gan::Architecture arch;
  arch.g = spec_from_json(nets.at("g"));
  arch.d = spec_from_json(nets.at("d"));
  arch.q = spec_from_json(nets.at("q"));
  arch.p = spec_from_json(nets.at("p"));
  arch.d2 = spec_from_json(nets.at("d2"));
  const std::size_t dim = meta.at("dim").get<std::size_t>();
  arch.validate(dim);
  const gan::Networks n = gan::build_networks(arch, meta.at("shared_prefix_k").get<std::size_t>(), 0);
  nn::restore_checkpoint(ckpt, n.store());

  data::NormStats norm;
  norm.mean = meta.at("norm").at("mean").get<std::vector<double>>();
  norm.stddev = meta.at("norm").at("stddev").get<std::vector<double>>();
  if (norm.mean.size() != dim) throw FormatError(checkpoint.string() + ": normalization width mismatch");
  auto names = meta.at("feature_names").get<std::vector<std::string>>();
  if (names.size() != dim) {
    names.clear();
    for (std::size_t j = 0; j < dim; ++j) names.push_back("x" + std::to_string(j));
  }

  Rng rng(opts.seed);
  const gan::LatentBatch latent = gan::sample_latent(opts.n, rng);
  const Matrix samples = data::invert_normalize(norm, gan::generate(n.g, latent));
  const std::vector<int> labels = latent.labels();

  fs::create_directories(out_dir);
  {
    std::ofstream out = open_out(out_dir / "samples.csv");
    std::vector<std::string> header = names;
    header.push_back("intended_label");
    out << join_row(header) << '\n';
    for (std::size_t i = 0; i < samples.rows(); ++i) {
      std::vector<std::string> cells;
      for (double v : samples.row(i)) cells.push_back(csv::format(v));
      cells.push_back(std::to_string(labels[i]));
      out << join_row(cells) << '\n';
    }
  }
  const bool windowed = dim % data::kCmapssSensors == 0 && dim / data::kCmapssSensors > 1 &&
                        meta.value("source", "") == "cmapss";
  if (windowed) {
    for (std::size_t s : opts.sensors) {
      if (s < 1 || s > data::kCmapssSensors) {
        throw ParameterError("generate: sensor " + std::to_string(s) + " outside 1.." +
                             std::to_string(data::kCmapssSensors));
      }
    }
  }
  write_samples_svg(out_dir / "samples.svg", samples, labels,
                    windowed ? dim / data::kCmapssSensors : 1, opts.sensors);
  return samples.rows();
}

std::string cmd_resample(const fs::path& input, const resample::ResamplePlan& plan, const fs::path& output,
                         const std::string& label_column) {
  data::Dataset ds = data::load_labeled_csv(input.string(), label_column);
  const resample::Resampled r = resample::apply_plan(ds.X, ds.y, plan);
  auto count = [](const std::vector<int>& y, int label) {
    return std::to_string(std::count(y.begin(), y.end(), label));
  };
  data::Dataset out_ds;
  out_ds.X = r.X;
  out_ds.y = r.y;
  out_ds.feature_names = ds.feature_names;
  {
    std::ofstream out = open_out(output);
    data::write_labeled_csv(out, out_ds, label_column);
  }
  return "before: 0=" + count(ds.y, 0) + " 1=" + count(ds.y, 1) + "; after: 0=" + count(r.y, 0) +
         " 1=" + count(r.y, 1);
}

void cmd_benchmark(const ExperimentConfig& cfg, const BenchmarkOptions& opts) {
  const data::Dataset ds = load_dataset(cfg.dataset);
  const gan::Architecture arch = architecture_for(ds.dim(), cfg.hidden);
  const auto folds = data::stratified_kfold(ds.y, cfg.folds, cfg.seed);
  const std::vector<Method> methods = opts.methods.empty() ? all_methods() : opts.methods;

  // External scores are read up front so a bad file fails fast.
  std::map<std::string, std::map<std::size_t, double>> external;
  std::vector<std::string> external_order;
  if (opts.external) {
    const csv::Table t = csv::read_table(opts.external->string());
    const std::size_t mc = t.column("method"), rc = t.column("row"), sc = t.column("score");
    if (mc == std::string::npos || rc == std::string::npos || sc == std::string::npos) {
      throw FormatError(opts.external->string() + ": expected columns method,row,score");
    }
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
      const std::string& name = t.rows[i][mc];
      const double row = csv::parse_double(t.rows[i][rc], t.lines[i]);
      const double score = csv::parse_double(t.rows[i][sc], t.lines[i]);
      if (row < 0 || row != std::floor(row) || row >= static_cast<double>(ds.rows())) {
        throw ParseError(opts.external->string() + ": row index out of range", t.lines[i]);
      }
      if (!external.count(name)) external_order.push_back(name);
      external[name][static_cast<std::size_t>(row)] = score;
    }
  }

  std::vector<std::vector<FoldOutcome>> results(methods.size(), std::vector<FoldOutcome>(folds.size()));
  std::vector<std::function<void()>> tasks;
  for (std::size_t f = 0; f < folds.size(); ++f) {
    auto fd = std::make_shared<FoldData>(prepare_fold(ds, folds[f].train, folds[f].test));
    for (std::size_t m = 0; m < methods.size(); ++m) {
      tasks.emplace_back([&, fd, f, m] {
        results[m][f] = evaluate_run(
            [&] {
              return run_method(methods[m], cfg, arch, fd->X_train, fd->y_train, fd->X_test,
                                fold_seed(cfg.seed, f))
                  .scores;
            },
            fd->y_test);
      });
    }
  }
  run_parallel(tasks, cfg.jobs);

  std::vector<std::string> names;
  for (Method m : methods) names.push_back(method_name(m));
  for (const std::string& name : external_order) {
    std::vector<FoldOutcome> rows(folds.size());
    for (std::size_t f = 0; f < folds.size(); ++f) {
      std::vector<double> scores;
      std::vector<int> y;
      for (std::size_t r : folds[f].test) {
        const auto it = external[name].find(r);
        if (it == external[name].end()) {
          throw FormatError(opts.external->string() + ": method '" + name + "' has no score for row " +
                            std::to_string(r));
        }
        scores.push_back(it->second);
        y.push_back(ds.y[r]);
      }
      rows[f].report = metrics::evaluate(y, scores);
    }
    results.push_back(std::move(rows));
    names.push_back(name);
  }

  fs::create_directories(cfg.out);
  {
    std::ofstream out = open_out(cfg.out / "benchmark.csv");
    out << header_with({"method"}) << '\n';
    for (std::size_t m = 0; m < names.size(); ++m) {
      auto cells = report_cells(mean_of_ok(results[m]));
      cells.insert(cells.begin(), names[m]);
      out << join_row(cells) << '\n';
    }
  }
  {
    std::ofstream out = open_out(cfg.out / "benchmark_folds.csv");
    out << header_with({"method", "fold"}, {"status"}) << '\n';
    for (std::size_t m = 0; m < names.size(); ++m) {
      for (std::size_t f = 0; f < folds.size(); ++f) {
        auto cells = report_cells(results[m][f].report);
        cells.insert(cells.begin(), {names[m], std::to_string(f)});
        cells.push_back(results[m][f].status);
        out << join_row(cells) << '\n';
      }
    }
  }

  if (opts.imbalance_sweep == 0) return;
  // Fold 0's test rows stay fixed; majority training rows are removed in a
  // fixed random order so each step removes a superset of the previous one.
  const data::Fold& base = folds.front();
  std::vector<std::size_t> majority, minority;
  for (std::size_t r : base.train) (ds.y[r] == 0 ? majority : minority).push_back(r);
  const std::size_t max_removed = opts.imbalance_sweep * opts.sweep_step_rows;
  if (max_removed >= majority.size()) {
    throw ParameterError("imbalance sweep: removing " + std::to_string(max_removed) +
                         " rows needs more than that many non-failure training rows, have " +
                         std::to_string(majority.size()));
  }
  Rng rng(derive_seed(cfg.seed, 991));
  std::shuffle(majority.begin(), majority.end(), rng.engine());

  const std::size_t steps = opts.imbalance_sweep + 1;
  std::vector<std::vector<FoldOutcome>> sweep(steps, std::vector<FoldOutcome>(methods.size()));
  std::vector<std::function<void()>> sweep_tasks;
  for (std::size_t i = 0; i < steps; ++i) {
    std::vector<std::size_t> train(majority.begin() + static_cast<std::ptrdiff_t>(i * opts.sweep_step_rows),
                                   majority.end());
    train.insert(train.end(), minority.begin(), minority.end());
    std::sort(train.begin(), train.end());
    auto fd = std::make_shared<FoldData>(prepare_fold(ds, train, base.test));
    for (std::size_t m = 0; m < methods.size(); ++m) {
      sweep_tasks.emplace_back([&, fd, i, m] {
        sweep[i][m] = evaluate_run(
            [&] {
              return run_method(methods[m], cfg, arch, fd->X_train, fd->y_train, fd->X_test,
                                fold_seed(cfg.seed, 0))
                  .scores;
            },
            fd->y_test);
      });
    }
  }
  run_parallel(sweep_tasks, cfg.jobs);
  std::ofstream out = open_out(cfg.out / "sweep.csv");
  out << header_with({"step", "removed", "method"}, {"status"}) << '\n';
  for (std::size_t i = 0; i < steps; ++i) {
    for (std::size_t m = 0; m < methods.size(); ++m) {
      auto cells = report_cells(sweep[i][m].report);
      cells.insert(cells.begin(), {std::to_string(i), std::to_string(i * opts.sweep_step_rows),
                                   method_name(methods[m])});
      cells.push_back(sweep[i][m].status);
      out << join_row(cells) << '\n';
    }
  }
}

}  // namespace ganfp::cli

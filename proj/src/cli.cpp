#include "gspnet/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cstdlib>
#include <map>
#include <ostream>
#include <sstream>
#include <thread>

#include "gspnet/data.hpp"
#include "gspnet/graph.hpp"
#include "gspnet/io.hpp"
#include "gspnet/parallel.hpp"
#include "gspnet/prune.hpp"

namespace gspnet::cli {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

Error cli_error(ErrorKind kind, const std::string& code, const std::string& message) {
  return Error(kind, "cli", "cli." + code, message);
}

Index parse_index(const std::string& text, const std::string& what) {
  try {
    std::size_t used = 0;
    const long long v = std::stoll(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
    return static_cast<Index>(v);
  } catch (const std::exception&) {
    throw cli_error(ErrorKind::usage, "bad_" + what, "cannot parse " + what + " '" + text + "'");
  }
}

std::vector<std::string> split_on(const std::string& text, char sep) {
  std::vector<std::string> parts;
  std::stringstream ss(text);
  std::string part;
  while (std::getline(ss, part, sep)) parts.push_back(part);
  if (!text.empty() && text.back() == sep) parts.emplace_back();
  return parts;
}

json history_json(const RunHistory& h) {
  json epochs = json::array();
  for (const auto& e : h.epochs)
    epochs.push_back({{"train_loss", e.train_loss}, {"train_acc", e.train_acc}, {"val_acc", e.val_acc}});
  return {{"epochs", epochs}, {"best_val_epoch", h.best_val_epoch}, {"test_acc", h.test_acc}};
}

RunHistory history_from_json(const json& j) {
  RunHistory h;
  for (const auto& e : j.at("epochs"))
    h.epochs.push_back({e.at("train_loss").get<double>(), e.at("train_acc").get<double>(), e.at("val_acc").get<double>()});
  h.best_val_epoch = j.at("best_val_epoch").get<int>();
  h.test_acc = j.at("test_acc").get<double>();
  return h;
}

json prune_report_json(const PruneReport& r) {
  json trace = json::array();
  for (const auto& s : r.importance_trace)
    trace.push_back({{"step", s.step}, {"scores", std::vector<double>(s.scores.data(), s.scores.data() + s.scores.size())}});
  return {{"n", r.kept.n()},
          {"kept", r.kept.indices()},
          {"pre_acc", r.pre_acc},
          {"post_acc", r.post_acc},
          {"importance_trace", trace},
          {"swd_history", history_json(r.swd_history)},
          {"retrain_history", history_json(r.retrain_history)}};
}

json summary_json(const AggregateSummary& s) {
  json j = {{"runs", s.runs}, {"mean_acc", s.mean_acc}, {"ci95", s.ci95}};
  if (!s.histogram.empty()) j["histogram"] = s.histogram;
  if (s.mean_iou) j["mean_iou"] = *s.mean_iou;
  return j;
}

void write_json(const fs::path& path, const json& j) { io::write_text(path, j.dump(2) + "\n", "cli"); }

void make_dirs(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw cli_error(ErrorKind::io, "write_failed", "cannot create '" + dir.string() + "': " + ec.message());
}

fs::path run_dir(const fs::path& out, std::uint64_t seed) { return out / ("run_" + std::to_string(seed)); }

// ---------------------------------------------------------------------------
// Shared training flags

struct TrainFlags {
  std::string arch;
  std::string config;
  std::string basis;
  std::string data;
  std::string out;
  int reps = 1;
  std::uint64_t seed = 0;
};

void add_train_flags(CLI::App* cmd, TrainFlags& f) {
  cmd->add_option("--arch", f.arch, "mlp or resnet (overrides the config)");
  cmd->add_option("--config", f.config, "training config JSON");
  cmd->add_option("--basis", f.basis, "basis file")->required();
  cmd->add_option("--data", f.data, "dataset manifest")->required();
  cmd->add_option("--out", f.out, "output directory")->required();
  cmd->add_option("--reps", f.reps, "repetitions")->check(CLI::PositiveNumber);
  cmd->add_option("--seed", f.seed, "seed base");
}

struct Experiment {
  FileConfig config;
  SpectralBasis basis;
  Splits splits;
};

Experiment prepare(const TrainFlags& f) {
  FileConfig config;
  if (!f.config.empty()) config = load_config(f.config);
  if (!f.arch.empty()) config.arch.kind = parse_arch(f.arch);
  SpectralBasis basis = load_basis(f.basis);
  const Dataset ds = load_dataset(f.data);
  if (ds.n_vertices != basis.size()) {
    throw cli_error(ErrorKind::usage, "shape_mismatch",
                    "dataset has " + std::to_string(ds.n_vertices) + " vertices but the basis has " +
                        std::to_string(basis.size()));
  }
  Splits splits = standardize(split_dataset(ds, {0.70, 0.15, 0.15}, f.seed));
  return {config, std::move(basis), std::move(splits)};
}

std::string wall_time_log(const std::vector<std::pair<std::uint64_t, double>>& times) {
  std::ostringstream log;
  for (const auto& [seed, t] : times) log << "seed " << seed << " wall_time " << io::format_double(t) << "s\n";
  return log.str();
}

// ---------------------------------------------------------------------------
// Subcommands

struct EigsFlags {
  std::string graph;
  std::string out;
  Index knn = 0;
};

void cmd_eigs(const EigsFlags& f, std::ostream& out) {
  Graph g = read_graph(f.graph);
  if (f.knn > 0) g = knn_binarize(g, f.knn);
  const SpectralBasis basis = build_basis(normalized_laplacian(g));
  save_basis(basis, f.out);
  out << "wrote " << f.out << " (n=" << basis.size() << ")\n";
}

struct SynthFlags {
  std::string basis;
  Index classes = 2;
  std::string band;
  double snr = 5.0;
  Index per_class = 100;
  std::uint64_t seed = 0;
  std::string out;
};

void cmd_synth(const SynthFlags& f, std::ostream& out) {
  const SpectralBasis basis = load_basis(f.basis);
  const KeptSet band = parse_band(f.band, basis.size());
  const Dataset ds = synth_planted_band(basis, f.classes, band, f.snr, f.per_class, f.seed);
  const fs::path manifest = save_dataset(ds, f.out, true);
  out << "wrote " << manifest.string() << " (" << ds.samples() << " samples)\n";
}

void cmd_train(const TrainFlags& f, std::ostream& out) {
  const Experiment ex = prepare(f);
  const Index n = ex.basis.size();
  const auto reps = static_cast<std::size_t>(f.reps);
  std::vector<RunSummary> runs(reps);
  std::vector<SpectralModel<float>> best(reps);
  parallel_for(reps, worker_count(), [&](std::size_t r) {
    const std::uint64_t seed = f.seed + r;
    TrainConfig cfg = ex.config.train;
    cfg.seed = seed;
    auto model = make_model<float>(ex.config.arch, KeptSet::all(n), ex.splits.train.n_classes);
    std::visit(
        [&](auto& m) {
          init_params(m, seed);
          auto result = train_model(std::move(m), ex.basis, ex.splits, cfg);
          runs[r] = {seed, result.history, std::nullopt};
          best[r] = std::move(result.best);
        },
        model);
  });

  make_dirs(f.out);
  std::vector<std::pair<std::uint64_t, double>> times;
  for (std::size_t r = 0; r < reps; ++r) {
    const fs::path dir = run_dir(f.out, runs[r].seed);
    make_dirs(dir);
    write_json(dir / "history.json", history_json(runs[r].history));
    save_checkpoint(best[r], runs[r].seed, dir / "model.gspm");
    times.emplace_back(runs[r].seed, runs[r].history.wall_time);
  }
  const AggregateSummary summary = aggregate_runs(runs);
  json j = summary_json(summary);
  j["arch"] = to_string(ex.config.arch.kind);
  write_json(fs::path(f.out) / "summary.json", j);
  io::write_text(fs::path(f.out) / "train.log", wall_time_log(times), "cli");
  out << "test accuracy " << io::format_double(summary.mean_acc) << " +/- " << io::format_double(summary.ci95)
      << " over " << summary.runs << " run(s)\n";
}

struct BandScanFlags {
  Index bandwidth = 1;
  std::string offsets;
};

void cmd_band_scan(const TrainFlags& f, const BandScanFlags& b, std::ostream& out) {
  const Experiment ex = prepare(f);
  const auto points = band_scan(ex.config.arch, ex.basis, ex.splits, ex.config.train, b.bandwidth,
                                parse_offsets(b.offsets), f.reps, f.seed, worker_count());
  make_dirs(f.out);
  std::ostringstream csv;
  csv << "offset,mean_acc,ci95\n";
  for (const auto& p : points)
    csv << p.offset << "," << io::format_double(p.mean) << "," << io::format_double(p.ci95) << "\n";
  io::write_text(fs::path(f.out) / "band_scan.csv", csv.str(), "cli");
  out << "wrote " << (fs::path(f.out) / "band_scan.csv").string() << " (" << points.size() << " offsets)\n";
}

struct PruneFlags {
  Index keep = 1;
  double alpha_min = 1e-4;
  double alpha_max = 1e2;
};

void cmd_prune(const TrainFlags& f, const PruneFlags& p, std::ostream& out) {
  const Experiment ex = prepare(f);
  const Index n = ex.basis.size();
  SwdSchedule sched;
  sched.alpha_min = p.alpha_min;
  sched.alpha_max = p.alpha_max;
  sched.k_keep = p.keep;
  sched.validate(n);

  const auto reps = static_cast<std::size_t>(f.reps);
  std::vector<RunSummary> runs(reps);
  std::vector<PruneReport> reports(reps);
  std::vector<SpectralModel<float>> models(reps);
  parallel_for(reps, worker_count(), [&](std::size_t r) {
    const std::uint64_t seed = f.seed + r;
    TrainConfig cfg = ex.config.train;
    cfg.seed = seed;
    auto model = make_model<float>(ex.config.arch, KeptSet::all(n), ex.splits.train.n_classes);
    std::visit(
        [&](auto& m) {
          init_params(m, seed);
          auto outcome = prune_and_retrain(std::move(m), ex.basis, ex.splits, cfg, sched);
          runs[r] = {seed, outcome.report.retrain_history, outcome.report.kept};
          reports[r] = std::move(outcome.report);
          models[r] = std::move(outcome.model);
        },
        model);
  });

  make_dirs(f.out);
  std::vector<std::pair<std::uint64_t, double>> times;
  for (std::size_t r = 0; r < reps; ++r) {
    const fs::path dir = run_dir(f.out, runs[r].seed);
    make_dirs(dir);
    write_json(dir / "history.json", history_json(runs[r].history));
    write_json(dir / "prune_report.json", prune_report_json(reports[r]));
    save_checkpoint(models[r], runs[r].seed, dir / "model.gspm");
    times.emplace_back(runs[r].seed, reports[r].swd_history.wall_time + reports[r].retrain_history.wall_time);
  }
  const AggregateSummary summary = aggregate_runs(runs);
  json j = summary_json(summary);
  j["arch"] = to_string(ex.config.arch.kind);
  j["keep"] = p.keep;
  write_json(fs::path(f.out) / "summary.json", j);
  std::ostringstream csv;
  csv << "frequency,count\n";
  for (std::size_t l = 0; l < summary.histogram.size(); ++l) csv << l << "," << summary.histogram[l] << "\n";
  io::write_text(fs::path(f.out) / "histogram.csv", csv.str(), "cli");
  io::write_text(fs::path(f.out) / "train.log", wall_time_log(times), "cli");
  out << "pruned accuracy " << io::format_double(summary.mean_acc) << " +/- " << io::format_double(summary.ci95)
      << " over " << summary.runs << " run(s)\n";
}

struct ReportFlags {
  std::string runs;
  std::string out;
};

void cmd_report(const ReportFlags& f, std::ostream& out) {
  std::error_code ec;
  if (!fs::is_directory(f.runs, ec)) {
    throw cli_error(ErrorKind::io, "missing_runs", "runs directory not found: '" + f.runs + "'");
  }
  std::vector<RunSummary> runs;
  for (const auto& entry : fs::directory_iterator(f.runs)) {
    const std::string name = entry.path().filename().string();
    if (!entry.is_directory() || name.rfind("run_", 0) != 0) continue;
    const fs::path history = entry.path() / "history.json";
    if (!fs::exists(history)) continue;
    RunSummary run;
    run.seed = static_cast<std::uint64_t>(parse_index(name.substr(4), "seed"));
    try {
      run.history = history_from_json(json::parse(io::read_text(history, "cli")));
      const fs::path report = entry.path() / "prune_report.json";
      if (fs::exists(report)) {
        const json j = json::parse(io::read_text(report, "cli"));
        run.kept = KeptSet(j.at("kept").get<std::vector<Index>>(), j.at("n").get<Index>());
      }
    } catch (const json::exception& e) {
      throw cli_error(ErrorKind::format, "bad_run", "'" + entry.path().string() + "': " + e.what());
    }
    runs.push_back(std::move(run));
  }
  if (runs.empty()) throw cli_error(ErrorKind::usage, "no_runs", "no run_<seed> directories in '" + f.runs + "'");
  const AggregateSummary summary = aggregate_runs(std::move(runs));
  write_json(f.out, summary_json(summary));
  out << "wrote " << f.out << " (" << summary.runs << " run(s))\n";
}

void report_error(std::ostream& err, const std::string& module, const std::string& code, const std::string& kind,
                  const std::string& message) {
  err << json{{"error", {{"module", module}, {"code", code}, {"kind", kind}, {"message", message}}}}.dump() << "\n";
}

}  // namespace

std::vector<Index> parse_offsets(const std::string& text) {
  std::vector<Index> out;
  if (text.find(':') != std::string::npos) {
    const auto parts = split_on(text, ':');
    if (parts.size() != 3) throw cli_error(ErrorKind::usage, "bad_offsets", "offsets must be start:stop:step");
    const Index start = parse_index(parts[0], "offsets");
    const Index stop = parse_index(parts[1], "offsets");
    const Index step = parse_index(parts[2], "offsets");
    if (step < 1 || start < 0 || stop <= start) {
      throw cli_error(ErrorKind::usage, "bad_offsets", "offsets '" + text + "' describe an empty range");
    }
    for (Index o = start; o < stop; o += step) out.push_back(o);
  } else {
    for (const auto& part : split_on(text, ',')) out.push_back(parse_index(part, "offsets"));
  }
  if (out.empty()) throw cli_error(ErrorKind::usage, "bad_offsets", "no offsets given");
  return out;
}

KeptSet parse_band(const std::string& text, Index n) {
  std::vector<Index> indices;
  if (text.find(':') != std::string::npos) {
    const auto parts = split_on(text, ':');
    if (parts.size() != 2) throw cli_error(ErrorKind::usage, "bad_band", "band must be a:b or a list");
    const Index a = parse_index(parts[0], "band");
    const Index b = parse_index(parts[1], "band");
    if (b <= a) throw cli_error(ErrorKind::usage, "bad_band", "band '" + text + "' is empty");
    return KeptSet::band(n, {a, b - a});
  }
  for (const auto& part : split_on(text, ',')) indices.push_back(parse_index(part, "band"));
  std::sort(indices.begin(), indices.end());
  indices.erase(std::unique(indices.begin(), indices.end()), indices.end());
  for (Index l : indices)
    if (l < 0 || l >= n) throw cli_error(ErrorKind::usage, "bad_band", "frequency " + std::to_string(l) + " out of range");
  return KeptSet(std::move(indices), n);
}

FileConfig load_config(const fs::path& path) {
  std::error_code ec;
  if (!fs::exists(path, ec)) {
    throw cli_error(ErrorKind::io, "config_not_found", "config not found: '" + path.string() + "'");
  }
  json j;
  try {
    j = json::parse(io::read_text(path, "cli"));
  } catch (const json::exception& e) {
    throw cli_error(ErrorKind::format, "bad_config", std::string("config: ") + e.what());
  }
  if (!j.is_object()) throw cli_error(ErrorKind::format, "bad_config", "config must be a JSON object");
  FileConfig c;
  try {
    if (j.contains("epochs")) c.train = TrainConfig::with_epochs(j.at("epochs").get<int>());
    for (const auto& [key, value] : j.items()) {
      if (key == "epochs") continue;
      else if (key == "batch_size") c.train.batch_size = value.get<int>();
      else if (key == "lr0") c.train.lr0 = value.get<double>();
      else if (key == "lr_milestones") c.train.lr_milestones = value.get<std::vector<int>>();
      else if (key == "lr_gamma") c.train.lr_gamma = value.get<double>();
      else if (key == "momentum") c.train.momentum = value.get<double>();
      else if (key == "weight_decay") c.train.weight_decay = value.get<double>();
      else if (key == "mixup_alpha") c.train.mixup_alpha = value.get<double>();
      else if (key == "arch") c.arch.kind = parse_arch(value.get<std::string>());
      else if (key == "width") c.arch.width = value.get<Index>();
      else if (key == "depth") c.arch.depth = value.get<Index>();
      else if (key == "batch_norm") c.arch.batch_norm = value.get<bool>();
      else throw cli_error(ErrorKind::format, "bad_config", "unknown config key '" + key + "'");
    }
  } catch (const json::exception& e) {
    throw cli_error(ErrorKind::format, "bad_config", std::string("config: ") + e.what());
  }
  c.train.validate();
  return c;
}

AggregateSummary aggregate_runs(std::vector<RunSummary> runs) {
  if (runs.empty()) throw cli_error(ErrorKind::usage, "no_runs", "nothing to aggregate");
  std::sort(runs.begin(), runs.end(), [](const RunSummary& a, const RunSummary& b) { return a.seed < b.seed; });
  std::vector<double> acc;
  std::vector<KeptSet> kept;
  for (const auto& r : runs) {
    acc.push_back(r.history.test_acc);
    if (r.kept) kept.push_back(*r.kept);
  }
  AggregateSummary out;
  out.runs = static_cast<Index>(runs.size());
  const AccuracySummary s = summarize_accuracies(acc);
  out.mean_acc = s.mean;
  out.ci95 = s.ci95;
  if (!kept.empty()) {
    out.histogram = occurrence_histogram(kept, kept.front().n());
    if (kept.size() > 1) {
      double total = 0.0;
      Index pairs = 0;
      for (std::size_t i = 0; i < kept.size(); ++i)
        for (std::size_t k = i + 1; k < kept.size(); ++k, ++pairs) total += iou(kept[i], kept[k]);
      out.mean_iou = total / static_cast<double>(pairs);
    }
  }
  return out;
}

int worker_count() {
  int workers = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  if (const char* env = std::getenv("GSPNET_THREADS")) {
    char* end = nullptr;
    const long cap = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && cap >= 1) workers = std::min<int>(workers, static_cast<int>(cap));
  }
  return workers;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Graph-spectral networks: bases, datasets, training and frequency pruning", "gspnet"};
  app.require_subcommand(1);

  EigsFlags eigs;
  auto* eigs_cmd = app.add_subcommand("eigs", "diagonalize a graph's normalized Laplacian");
  eigs_cmd->add_option("--graph", eigs.graph, "dense CSV or i,j,w edge list")->required();
  eigs_cmd->add_option("--out", eigs.out, "basis file")->required();
  eigs_cmd->add_option("--knn", eigs.knn, "binarize to k nearest neighbours first");

  SynthFlags synth;
  auto* synth_cmd = app.add_subcommand("synth", "planted-band synthetic dataset");
  synth_cmd->add_option("--basis", synth.basis)->required();
  synth_cmd->add_option("--classes", synth.classes)->required();
  synth_cmd->add_option("--band", synth.band, "a:b or comma-separated frequencies")->required();
  synth_cmd->add_option("--snr", synth.snr);
  synth_cmd->add_option("--per-class", synth.per_class);
  synth_cmd->add_option("--seed", synth.seed);
  synth_cmd->add_option("--out", synth.out, "output directory")->required();

  TrainFlags train;
  auto* train_cmd = app.add_subcommand("train", "train models over repeated seeds");
  add_train_flags(train_cmd, train);

  TrainFlags scan_train;
  BandScanFlags scan;
  auto* scan_cmd = app.add_subcommand("band-scan", "accuracy of contiguous frequency bands");
  add_train_flags(scan_cmd, scan_train);
  scan_cmd->add_option("--bandwidth", scan.bandwidth)->required();
  scan_cmd->add_option("--offsets", scan.offsets, "start:stop:step or a list")->required();

  TrainFlags prune_train;
  PruneFlags prune;
  auto* prune_cmd = app.add_subcommand("prune", "selective weight decay, truncation and rewound retraining");
  add_train_flags(prune_cmd, prune_train);
  prune_cmd->add_option("--keep", prune.keep)->required();
  prune_cmd->add_option("--alpha-min", prune.alpha_min);
  prune_cmd->add_option("--alpha-max", prune.alpha_max);

  ReportFlags report;
  auto* report_cmd = app.add_subcommand("report", "aggregate run directories");
  report_cmd->add_option("--runs", report.runs)->required();
  report_cmd->add_option("--out", report.out)->required();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    report_error(err, "cli", "cli.bad_arguments", "usage", e.what());
    return 2;
  }

  try {
    if (*eigs_cmd) cmd_eigs(eigs, out);
    else if (*synth_cmd) cmd_synth(synth, out);
    else if (*train_cmd) cmd_train(train, out);
    else if (*scan_cmd) cmd_band_scan(scan_train, scan, out);
    else if (*prune_cmd) cmd_prune(prune_train, prune, out);
    else if (*report_cmd) cmd_report(report, out);
  } catch (const Error& e) {
    report_error(err, e.module(), e.code(), to_string(e.kind()), e.message());
    return e.kind() == ErrorKind::numerical ? 1 : 2;
  } catch (const std::exception& e) {
    report_error(err, "cli", "cli.internal", "io", e.what());
    return 2;
  }
  return 0;
}

}  // namespace gspnet::cli

#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "gspnet/model.hpp"
#include "gspnet/spectral.hpp"
#include "gspnet/train.hpp"

namespace gspnet::cli {

/// Runs one subcommand (args exclude the program name). Returns the exit
/// code: 0 success, 1 numerical failure, 2 usage or I/O error. Errors are
/// written to `err` as one JSON object.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// "start:stop:step" (stop exclusive) or a comma-separated list.
std::vector<Index> parse_offsets(const std::string& text);

/// "a:b" for the band [a, b) or a comma-separated list of frequencies.
KeptSet parse_band(const std::string& text, Index n);

/// Training config file: TrainConfig fields plus arch, width, depth and
/// batch_norm. Unknown keys are rejected. Giving epochs without
/// lr_milestones places the milestones at 50% and 75%.
struct FileConfig {
  ArchSpec arch;
  TrainConfig train;
};

FileConfig load_config(const std::filesystem::path& path);

struct RunSummary {
  std::uint64_t seed = 0;
  RunHistory history;
  std::optional<KeptSet> kept;
};

struct AggregateSummary {
  Index runs = 0;
  double mean_acc = 0.0;
  double ci95 = 0.0;
  /// Frequency occurrence counts over the runs' kept sets; empty when no
  /// run carries one.
  std::vector<Index> histogram;
  /// Mean pairwise IoU of kept sets (needs two or more).
  std::optional<double> mean_iou;
};

/// Sorts by seed before reducing, so the result ignores input order.
AggregateSummary aggregate_runs(std::vector<RunSummary> runs);

/// Worker count: hardware concurrency capped by GSPNET_THREADS.
int worker_count();

}  // namespace gspnet::cli

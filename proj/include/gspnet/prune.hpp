#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <vector>

#include "gspnet/model.hpp"
#include "gspnet/spectral.hpp"
#include "gspnet/train.hpp"

namespace gspnet {

/// Selective weight decay schedule: the extra decay applied outside the
/// current top-K frequencies grows geometrically from alpha_min to
/// alpha_max over total_steps. alpha_min = alpha_max = 0 disables it.
struct SwdSchedule {
  double alpha_min = 1e-4;
  double alpha_max = 1e2;
  long total_steps = 1;
  Index k_keep = 1;

  void validate(Index n) const;
};

/// alpha_min * (alpha_max / alpha_min)^(step / total_steps).
double swd_alpha(long step, const SwdSchedule& sched);

/// Per-frequency l2 magnitude of every weight attached to that frequency:
/// all GSPConv thetas of a ResNet, the first layer of an MLP. The model must
/// keep all n frequencies.
template <typename Model>
Eigen::VectorXd frequency_importance(const Model& model);

/// The k highest scores; ties go to the lower index.
KeptSet top_k(const Eigen::VectorXd& scores, Index k);

struct ImportanceSample {
  long step = 0;
  Eigen::VectorXd scores;
};

struct PruneReport {
  KeptSet kept;
  /// Importance every 10 optimizer steps.
  std::vector<ImportanceSample> importance_trace;
  /// Test accuracy of the SWD-trained model before truncation, and of the
  /// rewound retrain.
  double pre_acc = 0.0;
  double post_acc = 0.0;
  RunHistory swd_history;
  RunHistory retrain_history;
};

template <typename Model>
struct SwdResult {
  Model model;  // parameters after the final SWD step
  KeptSet kept;
  PruneReport report;
};

/// Standard training where every step first ranks frequencies by
/// importance, then adds alpha(step) * w to the gradient of each weight of a
/// frequency outside the top K. `sched.total_steps` is replaced by the
/// run's step count minus one so the last step uses alpha_max.
template <typename Model>
SwdResult<Model> swd_train(Model model, const SpectralBasis& basis, const Splits& splits, const TrainConfig& cfg,
                           SwdSchedule sched);

/// Restricts every frequency-indexed weight to `kept` (a subset of the
/// model's kept frequencies over the same n).
template <typename Model>
Model truncate(const Model& model, const KeptSet& kept);

/// Retrains a truncated model with `cfg` from step 0: the learning-rate
/// schedule restarts and the optimizer state is fresh.
template <typename Model>
TrainResult<Model> rewind_retrain(Model truncated, const SpectralBasis& basis, const Splits& splits,
                                  const TrainConfig& cfg);

template <typename Model>
struct PruneOutcome {
  Model model;
  PruneReport report;
};

/// swd_train, truncate to the top K, then rewind_retrain with the same cfg.
template <typename Model>
PruneOutcome<Model> prune_and_retrain(Model model, const SpectralBasis& basis, const Splits& splits,
                                      const TrainConfig& cfg, const SwdSchedule& sched);

struct BandScanPoint {
  Index offset = 0;
  std::vector<double> accuracies;  // one per repetition, ordered by seed
  double mean = 0.0;
  double ci95 = 0.0;
};

/// For each offset, trains `repetitions` fresh models (seeds seed_base + r)
/// restricted to [offset, offset + bandwidth) and records test accuracy.
/// Models are initialized over all frequencies and truncated before training.
std::vector<BandScanPoint> band_scan(const ArchSpec& arch, const SpectralBasis& basis, const Splits& splits,
                                     const TrainConfig& cfg, Index bandwidth, const std::vector<Index>& offsets,
                                     int repetitions, std::uint64_t seed_base, int threads = 1);

/// count[l] = number of sets containing l.
std::vector<Index> occurrence_histogram(const std::vector<KeptSet>& kept_sets, Index n);

/// |a & b| / |a | b|.
double iou(const KeptSet& a, const KeptSet& b);

}  // namespace gspnet

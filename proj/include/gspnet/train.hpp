#pragma once

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <functional>
#include <random>
#include <utility>
#include <vector>

#include "gspnet/data.hpp"
#include "gspnet/model.hpp"
#include "gspnet/spectral.hpp"

namespace gspnet {

/// SGD recipe. Defaults: momentum 0.9, weight decay 5e-4, lr 0.01 decayed
/// x0.1 at 50% and 75% of the epochs, mixup alpha 0.2.
struct TrainConfig {
  int epochs = 100;
  int batch_size = 32;
  double lr0 = 0.01;
  std::vector<int> lr_milestones{50, 75};
  double lr_gamma = 0.1;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  double mixup_alpha = 0.2;
  std::uint64_t seed = 0;

  /// Default recipe with milestones placed at 50% and 75% of `epochs`.
  static TrainConfig with_epochs(int epochs);

  void validate() const;
  double learning_rate(int epoch) const;

  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

struct EpochRecord {
  double train_loss = 0.0;
  double train_acc = 0.0;
  double val_acc = 0.0;

  friend bool operator==(const EpochRecord&, const EpochRecord&) = default;
};

struct RunHistory {
  std::vector<EpochRecord> epochs;
  /// Earliest epoch reaching the maximal validation accuracy.
  int best_val_epoch = -1;
  double test_acc = 0.0;
  /// Seconds; excluded from equality so reruns compare equal.
  double wall_time = 0.0;

  friend bool operator==(const RunHistory& a, const RunHistory& b) {
    return a.epochs == b.epochs && a.best_val_epoch == b.best_val_epoch && a.test_acc == b.test_acc;
  }
};

// ---------------------------------------------------------------------------
// Data preparation

/// Per-vertex statistics of the training split. Standard deviations are
/// floored at 1e-8.
struct Standardizer {
  Eigen::VectorXf mean;
  Eigen::VectorXf std;

  Eigen::MatrixXf apply(const Eigen::MatrixXf& signals) const;
};

Standardizer standardize_fit(const Eigen::MatrixXf& train_signals);

struct Splits {
  Dataset train;
  Dataset val;
  Dataset test;
};

struct SplitIndices {
  std::vector<Index> train;
  std::vector<Index> val;
  std::vector<Index> test;
};

/// Stratified split. Split totals follow the largest-remainder rounding of
/// N * fractions (ties to train, then val); each class takes floor(m * f)
/// per split and its leftover samples go, at most one per split, to the
/// splits with the largest remaining deficit (ties train first). Indices in
/// each split are ascending.
SplitIndices split_indices(const std::vector<int>& labels, Index n_classes, const std::array<double, 3>& fractions,
                           std::uint64_t seed);

Splits split_dataset(const Dataset& ds, const std::array<double, 3>& fractions, std::uint64_t seed);

/// Fits a Standardizer on the training split and applies it to all three.
Splits standardize(Splits splits);

// ---------------------------------------------------------------------------
// Loss and augmentation

/// Soft target pair of a mixup batch: weight lambda on `a`, 1 - lambda on `b`.
struct MixTargets {
  std::vector<int> a;
  std::vector<int> b;
  double lambda = 1.0;

  static MixTargets hard(std::vector<int> labels);
};

/// Lambda ~ Beta(alpha, alpha) from two Gamma draws.
double sample_mixup_lambda(double alpha, std::mt19937_64& rng);

template <typename Scalar>
std::pair<Matrix<Scalar>, MixTargets> mixup(const Matrix<Scalar>& xa, const std::vector<int>& ya,
                                            const Matrix<Scalar>& xb, const std::vector<int>& yb, double lambda);

template <typename Scalar>
struct LossResult {
  Scalar loss = 0;
  Matrix<Scalar> grad;
};

/// Batch-mean softmax cross-entropy against mixup targets, with its gradient
/// with respect to the C x B logits.
template <typename Scalar>
LossResult<Scalar> cross_entropy(const Matrix<Scalar>& logits, const MixTargets& targets);

// ---------------------------------------------------------------------------
// Optimizer

/// g = grad + wd * w; v = momentum * v + g; w -= lr * v.
template <typename Scalar>
class Sgd {
 public:
  Sgd(double momentum, double weight_decay) : momentum_(momentum), weight_decay_(weight_decay) {}

  void step(const std::vector<Parameter<Scalar>*>& params, double lr);

 private:
  double momentum_;
  double weight_decay_;
  std::vector<Matrix<Scalar>> velocity_;
};

// ---------------------------------------------------------------------------
// Training

/// Argmax predictions; ties go to the lower class index.
template <typename Scalar>
std::vector<int> argmax_columns(const Matrix<Scalar>& logits);

template <typename Model>
double evaluate(const Model& model, const SpectralBasis& basis, const Dataset& split);

template <typename Model>
struct TrainResult {
  Model best;  // parameters at the best validation epoch
  Model last;  // parameters after the final step
  RunHistory history;
};

/// Called after back-propagation and before the optimizer update of every
/// step, with the 0-based step index and the total step count.
template <typename Model>
using StepHook = std::function<void(Model& model, long step, long total_steps)>;

template <typename Model>
TrainResult<Model> train_model(Model model, const SpectralBasis& basis, const Splits& splits, const TrainConfig& cfg,
                               const StepHook<Model>& hook = {});

long steps_per_epoch(Index train_samples, int batch_size);

/// Mean and 95% half-width 1.96 * sd / sqrt(r) (sample sd; 0 for one run).
struct AccuracySummary {
  double mean = 0.0;
  double ci95 = 0.0;
};

AccuracySummary summarize_accuracies(const std::vector<double>& accuracies);

}  // namespace gspnet

#include "gspnet/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

namespace gspnet {

namespace {

Error train_error(ErrorKind kind, const std::string& code, const std::string& message) {
  return Error(kind, "train", "train." + code, message);
}

constexpr Index kEvalChunk = 256;

}  // namespace

TrainConfig TrainConfig::with_epochs(int epochs) {
  TrainConfig cfg;
  cfg.epochs = epochs;
  cfg.lr_milestones = {epochs / 2, (3 * epochs) / 4};
  return cfg;
}

void TrainConfig::validate() const {
  if (epochs < 1) throw train_error(ErrorKind::usage, "bad_config", "epochs must be at least 1");
  if (batch_size < 1) throw train_error(ErrorKind::usage, "bad_config", "batch_size must be at least 1");
  if (!(lr0 > 0.0)) throw train_error(ErrorKind::usage, "bad_config", "lr0 must be positive");
  if (!(lr_gamma >= 0.0 && lr_gamma <= 1.0)) {
    throw train_error(ErrorKind::usage, "bad_config", "lr_gamma must lie in [0, 1]");
  }
  if (!(momentum >= 0.0 && momentum < 1.0)) {
    throw train_error(ErrorKind::usage, "bad_config", "momentum must lie in [0, 1)");
  }
  if (!(weight_decay >= 0.0)) throw train_error(ErrorKind::usage, "bad_config", "weight_decay must be >= 0");
  if (!(mixup_alpha >= 0.0)) throw train_error(ErrorKind::usage, "bad_config", "mixup_alpha must be >= 0");
}

double TrainConfig::learning_rate(int epoch) const {
  double lr = lr0;
  for (int milestone : lr_milestones)
    if (epoch >= milestone) lr *= lr_gamma;
  return lr;
}

// ---------------------------------------------------------------------------

Eigen::MatrixXf Standardizer::apply(const Eigen::MatrixXf& signals) const {
  if (signals.rows() != mean.size()) {
    throw train_error(ErrorKind::usage, "shape_mismatch", "standardizer fitted on a different vertex count");
  }
  return (signals.colwise() - mean).array().colwise() / std.array();
}

Standardizer standardize_fit(const Eigen::MatrixXf& train_signals) {
  if (train_signals.cols() < 2) {
    throw train_error(ErrorKind::usage, "empty_train_split", "standardization needs at least 2 training samples");
  }
  const Eigen::MatrixXd x = train_signals.cast<double>();
  const Eigen::VectorXd mean = x.rowwise().mean();
  const Eigen::VectorXd var = (x.colwise() - mean).array().square().rowwise().mean();
  Standardizer s;
  s.mean = mean.cast<float>();
  s.std = var.cwiseSqrt().cwiseMax(1e-8).cast<float>();
  return s;
}

SplitIndices split_indices(const std::vector<int>& labels, Index n_classes, const std::array<double, 3>& fractions,
                           std::uint64_t seed) {
  double sum = 0.0;
  for (double f : fractions) {
    if (!(f >= 0.0)) throw train_error(ErrorKind::usage, "bad_fractions", "split fractions must be non-negative");
    sum += f;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw train_error(ErrorKind::usage, "bad_fractions", "split fractions must sum to 1");

  std::vector<std::vector<Index>> by_class(static_cast<std::size_t>(n_classes));
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= n_classes) {
      throw train_error(ErrorKind::usage, "bad_label", "label out of range in split");
    }
    by_class[static_cast<std::size_t>(labels[i])].push_back(static_cast<Index>(i));
  }
  for (Index c = 0; c < n_classes; ++c) {
    if (by_class[c].size() < fractions.size()) {
      throw train_error(ErrorKind::usage, "class_too_small",
                        "class " + std::to_string(c) + " has " + std::to_string(by_class[c].size()) +
                            " samples, fewer than the 3 splits");
    }
  }

  constexpr double kSlack = 1e-9;
  auto floor_share = [&](double count, double f) { return static_cast<Index>(std::floor(count * f + kSlack)); };
  auto frac_share = [&](double count, double f) {
    const double v = count * f;
    const double r = v - std::floor(v + kSlack);
    return r > kSlack ? r : 0.0;
  };

  // Global targets by largest remainder.
  const auto total = static_cast<double>(labels.size());
  std::array<Index, 3> target{};
  Index assigned = 0;
  for (std::size_t s = 0; s < 3; ++s) {
    target[s] = floor_share(total, fractions[s]);
    assigned += target[s];
  }
  std::array<std::size_t, 3> by_remainder{0, 1, 2};
  std::stable_sort(by_remainder.begin(), by_remainder.end(), [&](std::size_t a, std::size_t b) {
    return frac_share(total, fractions[a]) > frac_share(total, fractions[b]);
  });
  for (std::size_t i = 0; assigned < static_cast<Index>(labels.size()); ++i, ++assigned) ++target[by_remainder[i % 3]];

  std::vector<std::array<Index, 3>> quota(static_cast<std::size_t>(n_classes));
  std::array<Index, 3> deficit = target;
  for (Index c = 0; c < n_classes; ++c) {
    const auto m = static_cast<double>(by_class[c].size());
    for (std::size_t s = 0; s < 3; ++s) {
      quota[c][s] = floor_share(m, fractions[s]);
      deficit[s] -= quota[c][s];
    }
  }
  for (Index c = 0; c < n_classes; ++c) {
    const auto m = static_cast<double>(by_class[c].size());
    Index leftover = static_cast<Index>(by_class[c].size()) - quota[c][0] - quota[c][1] - quota[c][2];
    std::vector<std::size_t> candidates;
    for (std::size_t s = 0; s < 3; ++s)
      if (frac_share(m, fractions[s]) > 0.0) candidates.push_back(s);
    if (static_cast<Index>(candidates.size()) < leftover) candidates = {0, 1, 2};
    for (; leftover > 0; --leftover) {
      auto best = candidates.begin();
      for (auto it = candidates.begin(); it != candidates.end(); ++it)
        if (deficit[*it] > deficit[*best]) best = it;
      ++quota[c][*best];
      --deficit[*best];
      candidates.erase(best);
      if (candidates.empty()) candidates = {0, 1, 2};
    }
  }

  std::mt19937_64 rng(seed);
  SplitIndices out;
  std::array<std::vector<Index>*, 3> dest{&out.train, &out.val, &out.test};
  for (Index c = 0; c < n_classes; ++c) {
    std::vector<Index>& members = by_class[c];
    std::shuffle(members.begin(), members.end(), rng);
    auto it = members.begin();
    for (std::size_t s = 0; s < 3; ++s) {
      dest[s]->insert(dest[s]->end(), it, it + quota[c][s]);
      it += quota[c][s];
    }
  }
  for (auto* d : dest) std::sort(d->begin(), d->end());
  return out;
}

Splits split_dataset(const Dataset& ds, const std::array<double, 3>& fractions, std::uint64_t seed) {
  const SplitIndices idx = split_indices(ds.labels, ds.n_classes, fractions, seed);
  return Splits{ds.subset(idx.train), ds.subset(idx.val), ds.subset(idx.test)};
}

Splits standardize(Splits splits) {
  const Standardizer s = standardize_fit(splits.train.signals);
  splits.train.signals = s.apply(splits.train.signals);
  splits.val.signals = s.apply(splits.val.signals);
  splits.test.signals = s.apply(splits.test.signals);
  return splits;
}

// ---------------------------------------------------------------------------

MixTargets MixTargets::hard(std::vector<int> labels) {
  MixTargets t;
  t.b = labels;
  t.a = std::move(labels);
  t.lambda = 1.0;
  return t;
}

double sample_mixup_lambda(double alpha, std::mt19937_64& rng) {
  if (!(alpha > 0.0)) throw train_error(ErrorKind::usage, "bad_config", "mixup alpha must be positive to sample");
  std::gamma_distribution<double> gamma(alpha, 1.0);
  const double a = gamma(rng);
  const double b = gamma(rng);
  return a + b > 0.0 ? a / (a + b) : 0.5;
}

template <typename Scalar>
std::pair<Matrix<Scalar>, MixTargets> mixup(const Matrix<Scalar>& xa, const std::vector<int>& ya,
                                            const Matrix<Scalar>& xb, const std::vector<int>& yb, double lambda) {
  if (xa.rows() != xb.rows() || xa.cols() != xb.cols() || static_cast<Index>(ya.size()) != xa.cols() ||
      ya.size() != yb.size()) {
    throw train_error(ErrorKind::usage, "shape_mismatch", "mixup operands disagree in shape");
  }
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw train_error(ErrorKind::usage, "bad_lambda", "lambda must lie in [0, 1]");
  const auto l = static_cast<Scalar>(lambda);
  Matrix<Scalar> x = l * xa + (Scalar(1) - l) * xb;
  return {std::move(x), MixTargets{ya, yb, lambda}};
}

template <typename Scalar>
LossResult<Scalar> cross_entropy(const Matrix<Scalar>& logits, const MixTargets& targets) {
  const Index classes = logits.rows();
  const Index batch = logits.cols();
  if (classes < 2) throw train_error(ErrorKind::usage, "bad_classes", "cross-entropy needs at least 2 classes");
  if (static_cast<Index>(targets.a.size()) != batch || static_cast<Index>(targets.b.size()) != batch || batch == 0) {
    throw train_error(ErrorKind::usage, "shape_mismatch", "targets do not match the logit batch");
  }
  if (!logits.allFinite()) throw train_error(ErrorKind::numerical, "non_finite", "non-finite logits");

  const auto lambda = static_cast<Scalar>(targets.lambda);
  LossResult<Scalar> out;
  out.grad.resize(classes, batch);
  Scalar total = 0;
  for (Index b = 0; b < batch; ++b) {
    const auto col = logits.col(b);
    const Scalar peak = col.maxCoeff();
    const Vector<Scalar> shifted = col.array() - peak;
    const Scalar log_norm = std::log(shifted.array().exp().sum());
    const Vector<Scalar> log_p = shifted.array() - log_norm;
    const int ya = targets.a[b];
    const int yb = targets.b[b];
    if (ya < 0 || ya >= classes || yb < 0 || yb >= classes) {
      throw train_error(ErrorKind::usage, "bad_label", "target label out of range");
    }
    total -= lambda * log_p(ya) + (Scalar(1) - lambda) * log_p(yb);
    out.grad.col(b) = log_p.array().exp();
    out.grad(ya, b) -= lambda;
    out.grad(yb, b) -= Scalar(1) - lambda;
  }
  out.loss = total / Scalar(batch);
  out.grad /= Scalar(batch);
  return out;
}

template <typename Scalar>
void Sgd<Scalar>::step(const std::vector<Parameter<Scalar>*>& params, double lr) {
  if (velocity_.empty()) {
    for (const auto* p : params) velocity_.push_back(Matrix<Scalar>::Zero(p->value.rows(), p->value.cols()));
  }
  if (velocity_.size() != params.size()) {
    throw train_error(ErrorKind::usage, "optimizer_mismatch", "parameter list changed between optimizer steps");
  }
  const auto mu = static_cast<Scalar>(momentum_);
  const auto wd = static_cast<Scalar>(weight_decay_);
  const auto rate = static_cast<Scalar>(lr);
  for (std::size_t i = 0; i < params.size(); ++i) {
    Parameter<Scalar>& p = *params[i];
    Matrix<Scalar>& v = velocity_[i];
    if (wd != Scalar(0)) {
      v = mu * v + p.grad + wd * p.value;
    } else {
      v = mu * v + p.grad;
    }
    p.value -= rate * v;
  }
}

// ---------------------------------------------------------------------------

template <typename Scalar>
std::vector<int> argmax_columns(const Matrix<Scalar>& logits) {
  std::vector<int> out(static_cast<std::size_t>(logits.cols()));
  for (Index b = 0; b < logits.cols(); ++b) {
    Index best = 0;
    for (Index c = 1; c < logits.rows(); ++c)
      if (logits(c, b) > logits(best, b)) best = c;
    out[static_cast<std::size_t>(b)] = static_cast<int>(best);
  }
  return out;
}

namespace {

template <typename Model, typename Scalar = typename Model::scalar_type>
double evaluate_with(const Model& model, const FrequencyProjector<Scalar>& proj, const Dataset& split) {
  const Index total = split.samples();
  if (total == 0) return 0.0;
  Index correct = 0;
  for (Index start = 0; start < total; start += kEvalChunk) {
    const Index count = std::min(kEvalChunk, total - start);
    const Matrix<Scalar> x = split.signals.middleCols(start, count).template cast<Scalar>();
    const auto predicted = argmax_columns<Scalar>(forward(model, proj, x, Mode::eval));
    for (Index i = 0; i < count; ++i)
      if (predicted[static_cast<std::size_t>(i)] == split.labels[static_cast<std::size_t>(start + i)]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(total);
}

}  // namespace

template <typename Model>
double evaluate(const Model& model, const SpectralBasis& basis, const Dataset& split) {
  const FrequencyProjector<typename Model::scalar_type> proj(basis, model.kept);
  return evaluate_with(model, proj, split);
}

long steps_per_epoch(Index train_samples, int batch_size) {
  return static_cast<long>((train_samples + batch_size - 1) / batch_size);
}

AccuracySummary summarize_accuracies(const std::vector<double>& accuracies) {
  if (accuracies.empty()) throw train_error(ErrorKind::usage, "no_runs", "no accuracies to summarize");
  const auto r = static_cast<double>(accuracies.size());
  AccuracySummary out;
  for (double a : accuracies) out.mean += a;
  out.mean /= r;
  if (accuracies.size() > 1) {
    double ss = 0.0;
    for (double a : accuracies) ss += (a - out.mean) * (a - out.mean);
    out.ci95 = 1.96 * std::sqrt(ss / (r - 1.0)) / std::sqrt(r);
  }
  return out;
}

template <typename Model>
TrainResult<Model> train_model(Model model, const SpectralBasis& basis, const Splits& splits, const TrainConfig& cfg,
                               const StepHook<Model>& hook) {
  using Scalar = typename Model::scalar_type;
  cfg.validate();
  if (splits.train.samples() == 0 || splits.val.samples() == 0 || splits.test.samples() == 0) {
    throw train_error(ErrorKind::usage, "empty_split", "train, validation and test splits must be non-empty");
  }
  if (splits.train.n_vertices != model.vertices()) {
    throw train_error(ErrorKind::usage, "shape_mismatch", "dataset and model disagree on the vertex count");
  }
  if (splits.train.n_classes != model.classes) {
    throw train_error(ErrorKind::usage, "shape_mismatch", "dataset and model disagree on the class count");
  }
  const auto started = std::chrono::steady_clock::now();
  const FrequencyProjector<Scalar> proj(basis, model.kept);
  std::mt19937_64 rng(cfg.seed);
  Sgd<Scalar> optimizer(cfg.momentum, cfg.weight_decay);

  const Index n_train = splits.train.samples();
  const long per_epoch = steps_per_epoch(n_train, cfg.batch_size);
  const long total_steps = per_epoch * cfg.epochs;
  std::vector<Index> order(static_cast<std::size_t>(n_train));
  std::iota(order.begin(), order.end(), Index{0});

  TrainResult<Model> result{model, model, {}};
  double best_val = -1.0;
  long step = 0;
  typename Model::Cache cache;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double lr = cfg.learning_rate(epoch);
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    for (Index start = 0; start < n_train; start += cfg.batch_size, ++step) {
      const Index count = std::min<Index>(cfg.batch_size, n_train - start);
      Matrix<Scalar> x(model.vertices(), count);
      std::vector<int> labels(static_cast<std::size_t>(count));
      for (Index i = 0; i < count; ++i) {
        const Index s = order[static_cast<std::size_t>(start + i)];
        x.col(i) = splits.train.signals.col(s).template cast<Scalar>();
        labels[static_cast<std::size_t>(i)] = splits.train.labels[static_cast<std::size_t>(s)];
      }
      MixTargets targets = MixTargets::hard(labels);
      if (cfg.mixup_alpha > 0.0) {
        const double lambda = sample_mixup_lambda(cfg.mixup_alpha, rng);
        std::vector<Index> partner(static_cast<std::size_t>(count));
        std::iota(partner.begin(), partner.end(), Index{0});
        std::shuffle(partner.begin(), partner.end(), rng);
        Matrix<Scalar> xb(x.rows(), count);
        std::vector<int> yb(static_cast<std::size_t>(count));
        for (Index i = 0; i < count; ++i) {
          xb.col(i) = x.col(partner[static_cast<std::size_t>(i)]);
          yb[static_cast<std::size_t>(i)] = labels[static_cast<std::size_t>(partner[static_cast<std::size_t>(i)])];
        }
        auto mixed = mixup<Scalar>(x, labels, xb, yb, lambda);
        x = std::move(mixed.first);
        targets = std::move(mixed.second);
      }

      zero_grad(model);
      const Matrix<Scalar> logits = forward(model, proj, x, Mode::train, &cache);
      if (!logits.allFinite()) {
        throw train_error(ErrorKind::numerical, "diverged",
                          "training diverged at epoch " + std::to_string(epoch) + ": non-finite logits");
      }
      const LossResult<Scalar> loss = cross_entropy<Scalar>(logits, targets);
      if (!std::isfinite(static_cast<double>(loss.loss))) {
        throw train_error(ErrorKind::numerical, "diverged",
                          "training diverged at epoch " + std::to_string(epoch) + ": non-finite loss");
      }
      loss_sum += static_cast<double>(loss.loss) * static_cast<double>(count);
      backward(model, proj, cache, loss.grad);
      update_running_stats(model, cache);
      if (hook) hook(model, step, total_steps);
      optimizer.step(parameters(model), lr);
    }

    EpochRecord record;
    record.train_loss = loss_sum / static_cast<double>(n_train);
    record.train_acc = evaluate_with(model, proj, splits.train);
    record.val_acc = evaluate_with(model, proj, splits.val);
    result.history.epochs.push_back(record);
    if (record.val_acc > best_val) {
      best_val = record.val_acc;
      result.history.best_val_epoch = epoch;
      result.best = model;
    }
  }
  result.last = std::move(model);
  result.history.test_acc = evaluate_with(result.best, proj, splits.test);
  result.history.wall_time =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return result;
}

#define GSPNET_INSTANTIATE_SCALAR(S)                                                                              \
  template std::pair<Matrix<S>, MixTargets> mixup(const Matrix<S>&, const std::vector<int>&, const Matrix<S>&,    \
                                                  const std::vector<int>&, double);                               \
  template LossResult<S> cross_entropy(const Matrix<S>&, const MixTargets&);                                      \
  template class Sgd<S>;                                                                                          \
  template std::vector<int> argmax_columns(const Matrix<S>&);

#define GSPNET_INSTANTIATE_MODEL(M)                                                                               \
  template double evaluate(const M&, const SpectralBasis&, const Dataset&);                                       \
  template TrainResult<M> train_model(M, const SpectralBasis&, const Splits&, const TrainConfig&,                 \
                                      const StepHook<M>&);

GSPNET_INSTANTIATE_SCALAR(float)
GSPNET_INSTANTIATE_SCALAR(double)
GSPNET_INSTANTIATE_MODEL(SpectralResNet<float>)
GSPNET_INSTANTIATE_MODEL(SpectralResNet<double>)
GSPNET_INSTANTIATE_MODEL(SpectralMlp<float>)
GSPNET_INSTANTIATE_MODEL(SpectralMlp<double>)

#undef GSPNET_INSTANTIATE_SCALAR
#undef GSPNET_INSTANTIATE_MODEL

}  // namespace gspnet

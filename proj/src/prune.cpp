#include "gspnet/prune.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "gspnet/parallel.hpp"

namespace gspnet {

namespace {

Error prune_error(ErrorKind kind, const std::string& code, const std::string& message) {
  return Error(kind, "prune", "prune." + code, message);
}

constexpr long kTraceEvery = 10;

void require_untruncated(const KeptSet& kept) {
  if (!kept.is_all()) {
    throw prune_error(ErrorKind::usage, "truncated_model",
                      "importance needs a model over all " + std::to_string(kept.n()) + " frequencies");
  }
}

template <typename Scalar>
Eigen::VectorXd importance_of(const SpectralResNet<Scalar>& m) {
  require_untruncated(m.kept);
  Eigen::VectorXd sq = Eigen::VectorXd::Zero(m.kept.n());
  for (const auto* layer : conv_layers(m))
    sq += layer->theta.value.template cast<double>().colwise().squaredNorm().transpose();
  return sq.cwiseSqrt();
}

template <typename Scalar>
Eigen::VectorXd importance_of(const SpectralMlp<Scalar>& m) {
  require_untruncated(m.kept);
  return m.weights.front().value.template cast<double>().colwise().norm().transpose();
}

template <typename Scalar>
Parameter<Scalar> select_columns(const Parameter<Scalar>& p, const std::vector<Index>& cols) {
  Parameter<Scalar> out(p.value.rows(), static_cast<Index>(cols.size()), true);
  for (std::size_t j = 0; j < cols.size(); ++j) out.value.col(static_cast<Index>(j)) = p.value.col(cols[j]);
  return out;
}

/// Column positions of `kept` inside `from`.
std::vector<Index> positions_in(const KeptSet& from, const KeptSet& kept) {
  if (kept.empty()) throw prune_error(ErrorKind::usage, "empty_kept_set", "cannot truncate to an empty kept set");
  if (kept.n() != from.n()) throw prune_error(ErrorKind::usage, "kept_set_mismatch", "kept set is over a different n");
  std::vector<Index> pos;
  pos.reserve(kept.indices().size());
  const auto& src = from.indices();
  for (Index l : kept.indices()) {
    const auto it = std::lower_bound(src.begin(), src.end(), l);
    if (it == src.end() || *it != l) {
      throw prune_error(ErrorKind::usage, "kept_set_mismatch",
                        "frequency " + std::to_string(l) + " is not kept by the model");
    }
    pos.push_back(static_cast<Index>(it - src.begin()));
  }
  return pos;
}

template <typename Scalar>
SpectralResNet<Scalar> truncate_model(const SpectralResNet<Scalar>& m, const KeptSet& kept) {
  const auto pos = positions_in(m.kept, kept);
  SpectralResNet<Scalar> out = m;
  out.kept = kept;
  for (auto* layer : conv_layers(out)) layer->theta = select_columns(layer->theta, pos);
  for (auto* p : parameters(out)) p->grad.setZero();
  return out;
}

template <typename Scalar>
SpectralMlp<Scalar> truncate_model(const SpectralMlp<Scalar>& m, const KeptSet& kept) {
  const auto pos = positions_in(m.kept, kept);
  SpectralMlp<Scalar> out = m;
  out.kept = kept;
  out.weights.front() = select_columns(out.weights.front(), pos);
  for (auto* p : parameters(out)) p->grad.setZero();
  return out;
}

}  // namespace

void SwdSchedule::validate(Index n) const {
  const bool disabled = alpha_min == 0.0 && alpha_max == 0.0;
  if (!disabled && !(alpha_min > 0.0 && alpha_max >= alpha_min && std::isfinite(alpha_max))) {
    throw prune_error(ErrorKind::usage, "bad_alpha",
                      "need 0 < alpha_min <= alpha_max, or both zero to disable the penalty");
  }
  if (total_steps < 1) throw prune_error(ErrorKind::usage, "bad_schedule", "total_steps must be at least 1");
  if (k_keep < 1 || k_keep > n) {
    throw prune_error(ErrorKind::usage, "bad_keep",
                      "keep must lie in [1, " + std::to_string(n) + "], got " + std::to_string(k_keep));
  }
}

double swd_alpha(long step, const SwdSchedule& sched) {
  if (step < 0 || step > sched.total_steps) {
    throw prune_error(ErrorKind::usage, "bad_step",
                      "step " + std::to_string(step) + " outside [0, " + std::to_string(sched.total_steps) + "]");
  }
  if (sched.alpha_min == 0.0) return 0.0;
  const double t = static_cast<double>(step) / static_cast<double>(sched.total_steps);
  return sched.alpha_min * std::exp(std::log(sched.alpha_max / sched.alpha_min) * t);
}

template <typename Model>
Eigen::VectorXd frequency_importance(const Model& model) {
  return importance_of(model);
}

KeptSet top_k(const Eigen::VectorXd& scores, Index k) {
  const Index n = scores.size();
  if (k < 1 || k > n) {
    throw prune_error(ErrorKind::usage, "bad_keep",
                      "keep must lie in [1, " + std::to_string(n) + "], got " + std::to_string(k));
  }
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) { return scores[a] > scores[b]; });
  order.resize(static_cast<std::size_t>(k));
  std::sort(order.begin(), order.end());
  return KeptSet(std::move(order), n);
}

template <typename Model>
SwdResult<Model> swd_train(Model model, const SpectralBasis& basis, const Splits& splits, const TrainConfig& cfg,
                           SwdSchedule sched) {
  using Scalar = typename Model::scalar_type;
  require_untruncated(model.kept);
  cfg.validate();
  const long total = steps_per_epoch(splits.train.samples(), cfg.batch_size) * cfg.epochs;
  sched.total_steps = std::max<long>(1, total - 1);
  sched.validate(model.kept.n());

  PruneReport report;
  StepHook<Model> hook = [&](Model& m, long step, long) {
    const Eigen::VectorXd scores = frequency_importance(m);
    if (step % kTraceEvery == 0) report.importance_trace.push_back({step, scores});
    const double alpha = swd_alpha(std::min(step, sched.total_steps), sched);
    if (alpha == 0.0) return;
    const KeptSet top = top_k(scores, sched.k_keep);
    const auto a = static_cast<Scalar>(alpha);
    for (auto* p : parameters(m)) {
      if (!p->spectral) continue;
      for (Index l = 0; l < p->value.cols(); ++l)
        if (!top.contains(l)) p->grad.col(l) += a * p->value.col(l);
    }
  };
  TrainResult<Model> trained = train_model(std::move(model), basis, splits, cfg, hook);

  report.kept = top_k(frequency_importance(trained.last), sched.k_keep);
  report.swd_history = trained.history;
  report.pre_acc = evaluate(trained.last, basis, splits.test);
  return {std::move(trained.last), report.kept, std::move(report)};
}

template <typename Model>
Model truncate(const Model& model, const KeptSet& kept) {
  return truncate_model(model, kept);
}

template <typename Model>
TrainResult<Model> rewind_retrain(Model truncated, const SpectralBasis& basis, const Splits& splits,
                                  const TrainConfig& cfg) {
  zero_grad(truncated);
  return train_model(std::move(truncated), basis, splits, cfg);
}

template <typename Model>
PruneOutcome<Model> prune_and_retrain(Model model, const SpectralBasis& basis, const Splits& splits,
                                      const TrainConfig& cfg, const SwdSchedule& sched) {
  SwdResult<Model> swd = swd_train(std::move(model), basis, splits, cfg, sched);
  TrainResult<Model> retrained = rewind_retrain(truncate(swd.model, swd.kept), basis, splits, cfg);
  PruneReport report = std::move(swd.report);
  report.retrain_history = retrained.history;
  report.post_acc = retrained.history.test_acc;
  return {std::move(retrained.best), std::move(report)};
}

std::vector<BandScanPoint> band_scan(const ArchSpec& arch, const SpectralBasis& basis, const Splits& splits,
                                     const TrainConfig& cfg, Index bandwidth, const std::vector<Index>& offsets,
                                     int repetitions, std::uint64_t seed_base, int threads) {
  const Index n = basis.size();
  if (repetitions < 1) throw prune_error(ErrorKind::usage, "bad_reps", "repetitions must be at least 1");
  if (offsets.empty()) throw prune_error(ErrorKind::usage, "no_offsets", "band scan needs at least one offset");
  std::vector<KeptSet> bands;
  for (Index offset : offsets) bands.push_back(KeptSet::band(n, {offset, bandwidth}));

  const auto reps = static_cast<std::size_t>(repetitions);
  std::vector<double> acc(bands.size() * reps, 0.0);
  parallel_for(acc.size(), threads, [&](std::size_t task) {
    const std::size_t b = task / reps;
    const std::uint64_t seed = seed_base + task % reps;
    TrainConfig run_cfg = cfg;
    run_cfg.seed = seed;
    auto full = make_model<float>(arch, KeptSet::all(n), splits.train.n_classes);
    acc[task] = std::visit(
        [&](auto& m) {
          init_params(m, seed);
          return train_model(truncate(m, bands[b]), basis, splits, run_cfg).history.test_acc;
        },
        full);
  });

  std::vector<BandScanPoint> out;
  for (std::size_t b = 0; b < bands.size(); ++b) {
    BandScanPoint point;
    point.offset = offsets[b];
    point.accuracies.assign(acc.begin() + static_cast<std::ptrdiff_t>(b * reps),
                            acc.begin() + static_cast<std::ptrdiff_t>((b + 1) * reps));
    const AccuracySummary s = summarize_accuracies(point.accuracies);
    point.mean = s.mean;
    point.ci95 = s.ci95;
    out.push_back(std::move(point));
  }
  return out;
}

std::vector<Index> occurrence_histogram(const std::vector<KeptSet>& kept_sets, Index n) {
  std::vector<Index> count(static_cast<std::size_t>(n), 0);
  for (const auto& set : kept_sets) {
    if (set.n() != n) throw prune_error(ErrorKind::usage, "kept_set_mismatch", "kept set is over a different n");
    for (Index l : set.indices()) ++count[static_cast<std::size_t>(l)];
  }
  return count;
}

double iou(const KeptSet& a, const KeptSet& b) {
  if (a.empty() && b.empty()) throw prune_error(ErrorKind::usage, "empty_kept_set", "IoU of two empty sets");
  std::vector<Index> inter, uni;
  std::set_intersection(a.indices().begin(), a.indices().end(), b.indices().begin(), b.indices().end(),
                        std::back_inserter(inter));
  std::set_union(a.indices().begin(), a.indices().end(), b.indices().begin(), b.indices().end(),
                 std::back_inserter(uni));
  return static_cast<double>(inter.size()) / static_cast<double>(uni.size());
}

#define GSPNET_INSTANTIATE_PRUNE(M)                                                                            \
  template Eigen::VectorXd frequency_importance(const M&);                                                     \
  template SwdResult<M> swd_train(M, const SpectralBasis&, const Splits&, const TrainConfig&, SwdSchedule);    \
  template M truncate(const M&, const KeptSet&);                                                               \
  template TrainResult<M> rewind_retrain(M, const SpectralBasis&, const Splits&, const TrainConfig&);          \
  template PruneOutcome<M> prune_and_retrain(M, const SpectralBasis&, const Splits&, const TrainConfig&,       \
                                             const SwdSchedule&);

GSPNET_INSTANTIATE_PRUNE(SpectralResNet<float>)
GSPNET_INSTANTIATE_PRUNE(SpectralResNet<double>)
GSPNET_INSTANTIATE_PRUNE(SpectralMlp<float>)
GSPNET_INSTANTIATE_PRUNE(SpectralMlp<double>)

#undef GSPNET_INSTANTIATE_PRUNE

}  // namespace gspnet

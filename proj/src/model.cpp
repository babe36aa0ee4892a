#include "gspnet/model.hpp"

#include <cmath>
#include <random>

namespace gspnet {

namespace {

Error model_error(ErrorKind kind, const std::string& code, const std::string& message) {
  return Error(kind, "model", "model." + code, message);
}

std::string dims(Index rows, Index cols) { return std::to_string(rows) + "x" + std::to_string(cols); }

template <typename Scalar>
using ChannelView = Eigen::Map<Matrix<Scalar>, 0, Eigen::OuterStride<>>;
template <typename Scalar>
using ConstChannelView = Eigen::Map<const Matrix<Scalar>, 0, Eigen::OuterStride<>>;

// n x B view of channel c inside an n x (B*channels) batch.
template <typename Scalar>
ChannelView<Scalar> channel(Matrix<Scalar>& m, Index c, Index channels) {
  return ChannelView<Scalar>(m.data() + c * m.rows(), m.rows(), m.cols() / channels,
                             Eigen::OuterStride<>(m.rows() * channels));
}

template <typename Scalar>
ConstChannelView<Scalar> channel(const Matrix<Scalar>& m, Index c, Index channels) {
  return ConstChannelView<Scalar>(m.data() + c * m.rows(), m.rows(), m.cols() / channels,
                                  Eigen::OuterStride<>(m.rows() * channels));
}

}  // namespace

template <typename Scalar>
FrequencyProjector<Scalar>::FrequencyProjector(const SpectralBasis& basis, KeptSet kept) : kept_(std::move(kept)) {
  if (kept_.n() != basis.size()) {
    throw model_error(ErrorKind::usage, "basis_mismatch",
                      "kept set covers " + std::to_string(kept_.n()) + " frequencies, basis has " +
                          std::to_string(basis.size()));
  }
  if (kept_.empty()) throw model_error(ErrorKind::usage, "empty_kept_set", "no frequencies kept");
  columns_.resize(basis.size(), kept_.k());
  for (Index j = 0; j < kept_.k(); ++j) columns_.col(j) = basis.u().col(kept_.indices()[j]).template cast<Scalar>();
}

template <typename Scalar>
GspConvLayer<Scalar>::GspConvLayer(Index frequencies, Index in, Index out, Activation act, bool bn)
    : in_channels(in),
      out_channels(out),
      activation(act),
      batch_norm(bn),
      theta(in * out, frequencies, true),
      bn_scale(out, 1),
      bn_shift(out, 1),
      running_mean(Vector<Scalar>::Zero(out)),
      running_var(Vector<Scalar>::Ones(out)) {
  if (frequencies < 1 || in < 1 || out < 1) {
    throw model_error(ErrorKind::usage, "bad_layer", "GSPConv needs at least one frequency and channel");
  }
  bn_scale.value.setOnes();
}

template <typename Scalar>
Matrix<Scalar> spectral_mix(const Matrix<Scalar>& spectrum, const Matrix<Scalar>& theta, Index in_channels,
                            Index out_channels) {
  const Index k = spectrum.cols();
  if (theta.cols() != k || theta.rows() != in_channels * out_channels || in_channels < 1 ||
      spectrum.rows() % in_channels != 0) {
    throw model_error(ErrorKind::usage, "shape_mismatch",
                      "spectral_mix: spectrum " + dims(spectrum.rows(), spectrum.cols()) + " and theta " +
                          dims(theta.rows(), theta.cols()) + " disagree for " + std::to_string(in_channels) +
                          " -> " + std::to_string(out_channels) + " channels");
  }
  const Index batch = spectrum.rows() / in_channels;
  Matrix<Scalar> out(batch * out_channels, k);
  for (Index l = 0; l < k; ++l) {
    Eigen::Map<const Matrix<Scalar>> in(spectrum.col(l).data(), in_channels, batch);
    Eigen::Map<const Matrix<Scalar>> mix(theta.col(l).data(), in_channels, out_channels);
    Eigen::Map<Matrix<Scalar>> res(out.col(l).data(), out_channels, batch);
    res.noalias() = mix.transpose() * in;
  }
  return out;
}

template <typename Scalar>
Matrix<Scalar> gspconv_forward(const GspConvLayer<Scalar>& layer, const FrequencyProjector<Scalar>& proj,
                               const Matrix<Scalar>& x, Mode mode, GspConvCache<Scalar>* cache) {
  const Index n = proj.vertices();
  const Index c_in = layer.in_channels;
  const Index c_out = layer.out_channels;
  if (x.rows() != n || x.cols() == 0 || x.cols() % c_in != 0) {
    throw model_error(ErrorKind::usage, "shape_mismatch",
                      "GSPConv input " + dims(x.rows(), x.cols()) + " incompatible with " + std::to_string(n) +
                          " vertices and " + std::to_string(c_in) + " channels");
  }
  if (proj.frequencies() != layer.frequencies()) {
    throw model_error(ErrorKind::usage, "basis_mismatch",
                      "layer holds " + std::to_string(layer.frequencies()) + " frequencies, projector " +
                          std::to_string(proj.frequencies()));
  }
  if (mode == Mode::eval && layer.batch_norm && !layer.running_ready) {
    throw model_error(ErrorKind::usage, "stats_uninitialized",
                      "eval-mode forward before any training step: running statistics are uninitialized");
  }
  const Index batch = x.cols() / c_in;
  const Matrix<Scalar>& u = proj.columns();

  Matrix<Scalar> spectrum_in = x.transpose() * u;
  const Matrix<Scalar> spectrum_out = spectral_mix(spectrum_in, layer.theta.value, c_in, c_out);
  Matrix<Scalar> y = u * spectrum_out.transpose();

  Matrix<Scalar> out(n, batch * c_out);
  Vector<Scalar> mean(c_out), var(c_out), inv_std(c_out);
  if (layer.batch_norm) {
    const Scalar eps = Scalar(kBatchNormEpsilon);
    for (Index c = 0; c < c_out; ++c) {
      auto yc = channel(y, c, c_out);
      if (mode == Mode::train) {
        mean(c) = yc.mean();
        var(c) = (yc.array() - mean(c)).square().mean();
      } else {
        mean(c) = layer.running_mean(c);
        var(c) = layer.running_var(c);
      }
      inv_std(c) = Scalar(1) / std::sqrt(var(c) + eps);
      yc = (yc.array() - mean(c)) * inv_std(c);
      channel(out, c, c_out) = yc.array() * layer.bn_scale.value(c) + layer.bn_shift.value(c);
    }
  } else {
    out = y;
  }
  if (layer.activation == Activation::relu) out = out.cwiseMax(Scalar(0));

  if (cache) {
    cache->input = x;
    cache->spectrum_in = std::move(spectrum_in);
    cache->normalized = std::move(y);
    cache->batch_mean = mean;
    cache->batch_var = var;
    cache->inv_std = inv_std;
    cache->output = out;
    cache->batch = batch;
    cache->train = mode == Mode::train;
  }
  return out;
}

template <typename Scalar>
GspConvGrads<Scalar> gspconv_backward(const GspConvLayer<Scalar>& layer, const FrequencyProjector<Scalar>& proj,
                                      const GspConvCache<Scalar>& cache, const Matrix<Scalar>& grad_out) {
  if (!cache.train) {
    throw model_error(ErrorKind::usage, "cache_mode", "backward requires a cache from a train-mode forward");
  }
  const Index n = proj.vertices();
  const Index c_in = layer.in_channels;
  const Index c_out = layer.out_channels;
  const Index batch = cache.batch;
  if (grad_out.rows() != n || grad_out.cols() != batch * c_out) {
    throw model_error(ErrorKind::usage, "shape_mismatch",
                      "GSPConv output gradient " + dims(grad_out.rows(), grad_out.cols()) + ", expected " +
                          dims(n, batch * c_out));
  }
  const Matrix<Scalar>& u = proj.columns();
  GspConvGrads<Scalar> grads;

  Matrix<Scalar> g = grad_out;
  if (layer.activation == Activation::relu) {
    g = (cache.output.array() > Scalar(0)).select(g, Scalar(0));
  }

  grads.bn_scale = Vector<Scalar>::Zero(c_out);
  grads.bn_shift = Vector<Scalar>::Zero(c_out);
  Matrix<Scalar> dy(n, batch * c_out);
  if (layer.batch_norm) {
    const Scalar count = Scalar(n * batch);
    for (Index c = 0; c < c_out; ++c) {
      const auto gc = channel(g, c, c_out);
      const auto xhat = channel(cache.normalized, c, c_out);
      const Scalar sum_g = gc.sum();
      const Scalar sum_gx = (gc.array() * xhat.array()).sum();
      grads.bn_shift(c) = sum_g;
      grads.bn_scale(c) = sum_gx;
      const Scalar factor = layer.bn_scale.value(c) * cache.inv_std(c) / count;
      channel(dy, c, c_out) = factor * (count * gc.array() - sum_g - xhat.array() * sum_gx);
    }
  } else {
    dy = g;
  }

  const Matrix<Scalar> spectrum_grad = dy.transpose() * u;
  const Index k = u.cols();
  grads.theta.resize(c_in * c_out, k);
  Matrix<Scalar> spectrum_in_grad(batch * c_in, k);
  for (Index l = 0; l < k; ++l) {
    Eigen::Map<const Matrix<Scalar>> in(cache.spectrum_in.col(l).data(), c_in, batch);
    Eigen::Map<const Matrix<Scalar>> dout(spectrum_grad.col(l).data(), c_out, batch);
    Eigen::Map<const Matrix<Scalar>> mix(layer.theta.value.col(l).data(), c_in, c_out);
    Eigen::Map<Matrix<Scalar>> dmix(grads.theta.col(l).data(), c_in, c_out);
    Eigen::Map<Matrix<Scalar>> din(spectrum_in_grad.col(l).data(), c_in, batch);
    dmix.noalias() = in * dout.transpose();
    din.noalias() = mix * dout;
  }
  grads.input = u * spectrum_in_grad.transpose();
  return grads;
}

template <typename Scalar>
void update_running_stats(GspConvLayer<Scalar>& layer, const GspConvCache<Scalar>& cache) {
  if (!layer.batch_norm) return;
  if (!cache.train) {
    throw model_error(ErrorKind::usage, "cache_mode", "running statistics need a train-mode cache");
  }
  const Scalar momentum = Scalar(kBatchNormMomentum);
  const Index count = cache.normalized.rows() * cache.batch;
  const Scalar unbias = count > 1 ? Scalar(count) / Scalar(count - 1) : Scalar(1);
  layer.running_mean = (Scalar(1) - momentum) * layer.running_mean + momentum * cache.batch_mean;
  layer.running_var = (Scalar(1) - momentum) * layer.running_var + momentum * unbias * cache.batch_var;
  layer.running_ready = true;
}

// ---------------------------------------------------------------------------

template <typename Scalar>
SpectralResNet<Scalar>::SpectralResNet(KeptSet kept_set, Index width_, Index depth_, Index classes_, bool bn)
    : kept(std::move(kept_set)),
      width(width_),
      depth(depth_),
      classes(classes_),
      batch_norm(bn),
      head_w(width_, classes_),
      head_b(classes_, 1) {
  if (kept.empty() || width < 1 || depth < 0 || classes < 2) {
    throw model_error(ErrorKind::usage, "bad_architecture",
                      "ResNet needs K >= 1, width >= 1, depth >= 0 and at least 2 classes");
  }
  const Index k = kept.k();
  embed = GspConvLayer<Scalar>(k, 1, width, Activation::relu, bn);
  blocks.resize(static_cast<std::size_t>(depth));
  for (auto& block : blocks) {
    block.conv1 = GspConvLayer<Scalar>(k, width, width, Activation::relu, bn);
    block.conv2 = GspConvLayer<Scalar>(k, width, width, Activation::none, bn);
  }
}

template <typename Scalar>
SpectralMlp<Scalar>::SpectralMlp(KeptSet kept_set, Index width_, Index depth_, Index classes_)
    : kept(std::move(kept_set)), width(width_), depth(depth_), classes(classes_) {
  if (kept.empty() || width < 1 || depth < 1 || classes < 2) {
    throw model_error(ErrorKind::usage, "bad_architecture",
                      "MLP needs K >= 1, width >= 1, depth >= 1 and at least 2 classes");
  }
  weights.emplace_back(width, kept.k(), true);
  biases.emplace_back(width, 1);
  for (Index i = 1; i < depth; ++i) {
    weights.emplace_back(width, width);
    biases.emplace_back(width, 1);
  }
  weights.emplace_back(classes, width);
  biases.emplace_back(classes, 1);
}

template <typename Scalar>
Matrix<Scalar> resnet_forward(const SpectralResNet<Scalar>& m, const FrequencyProjector<Scalar>& proj,
                              const Matrix<Scalar>& x, Mode mode, ResNetCache<Scalar>* cache) {
  if (proj.kept() != m.kept) {
    throw model_error(ErrorKind::usage, "basis_mismatch", "projector and model keep different frequencies");
  }
  if (x.rows() != m.vertices()) {
    throw model_error(ErrorKind::usage, "shape_mismatch",
                      "ResNet input " + dims(x.rows(), x.cols()) + " for " + std::to_string(m.vertices()) +
                          " vertices");
  }
  if (cache) cache->blocks.resize(m.blocks.size());
  Matrix<Scalar> h = gspconv_forward(m.embed, proj, x, mode, cache ? &cache->embed : nullptr);
  for (std::size_t i = 0; i < m.blocks.size(); ++i) {
    auto* bc = cache ? &cache->blocks[i] : nullptr;
    const Matrix<Scalar> a = gspconv_forward(m.blocks[i].conv1, proj, h, mode, bc ? &bc->conv1 : nullptr);
    const Matrix<Scalar> b = gspconv_forward(m.blocks[i].conv2, proj, a, mode, bc ? &bc->conv2 : nullptr);
    h = (h + b).cwiseMax(Scalar(0));
    if (bc) bc->output = h;
  }
  const Index batch = x.cols();
  const Matrix<Scalar> means = h.colwise().mean();
  const Matrix<Scalar> pooled = Eigen::Map<const Matrix<Scalar>>(means.data(), m.width, batch);
  Matrix<Scalar> logits = m.head_w.value.transpose() * pooled;
  logits.colwise() += m.head_b.value.col(0);
  if (cache) cache->pooled = pooled;
  return logits;
}

template <typename Scalar>
Matrix<Scalar> backward(SpectralResNet<Scalar>& m, const FrequencyProjector<Scalar>& proj,
                        const ResNetCache<Scalar>& cache, const Matrix<Scalar>& grad_logits) {
  const Index batch = cache.pooled.cols();
  if (grad_logits.rows() != m.classes || grad_logits.cols() != batch) {
    throw model_error(ErrorKind::usage, "shape_mismatch",
                      "logit gradient " + dims(grad_logits.rows(), grad_logits.cols()) + ", expected " +
                          dims(m.classes, batch));
  }
  m.head_w.grad.noalias() += cache.pooled * grad_logits.transpose();
  m.head_b.grad += grad_logits.rowwise().sum();
  const Matrix<Scalar> dpooled = m.head_w.value * grad_logits;
  const Index n = m.vertices();
  Matrix<Scalar> dh =
      Eigen::Map<const Eigen::Matrix<Scalar, 1, Eigen::Dynamic>>(dpooled.data(), dpooled.size()).replicate(n, 1) /
      Scalar(n);

  auto accumulate = [](GspConvLayer<Scalar>& layer, const GspConvGrads<Scalar>& g) {
    layer.theta.grad += g.theta;
    layer.bn_scale.grad += g.bn_scale;
    layer.bn_shift.grad += g.bn_shift;
  };
  for (std::size_t i = m.blocks.size(); i-- > 0;) {
    const auto& bc = cache.blocks[i];
    const Matrix<Scalar> ds = (bc.output.array() > Scalar(0)).select(dh, Scalar(0));
    const auto g2 = gspconv_backward(m.blocks[i].conv2, proj, bc.conv2, ds);
    const auto g1 = gspconv_backward(m.blocks[i].conv1, proj, bc.conv1, g2.input);
    accumulate(m.blocks[i].conv2, g2);
    accumulate(m.blocks[i].conv1, g1);
    dh = ds + g1.input;
  }
  const auto ge = gspconv_backward(m.embed, proj, cache.embed, dh);
  accumulate(m.embed, ge);
  return ge.input;
}

template <typename Scalar>
void update_running_stats(SpectralResNet<Scalar>& m, const ResNetCache<Scalar>& cache) {
  update_running_stats(m.embed, cache.embed);
  for (std::size_t i = 0; i < m.blocks.size(); ++i) {
    update_running_stats(m.blocks[i].conv1, cache.blocks[i].conv1);
    update_running_stats(m.blocks[i].conv2, cache.blocks[i].conv2);
  }
}

template <typename Scalar>
Matrix<Scalar> mlp_forward(const SpectralMlp<Scalar>& m, const FrequencyProjector<Scalar>& proj,
                           const Matrix<Scalar>& x, MlpCache<Scalar>* cache) {
  if (proj.kept() != m.kept) {
    throw model_error(ErrorKind::usage, "basis_mismatch", "projector and model keep different frequencies");
  }
  if (x.rows() != m.vertices() || x.cols() == 0) {
    throw model_error(ErrorKind::usage, "shape_mismatch",
                      "MLP input " + dims(x.rows(), x.cols()) + " for " + std::to_string(m.vertices()) + " vertices");
  }
  Matrix<Scalar> a = proj.columns().transpose() * x;
  if (cache) {
    cache->spectrum = a;
    cache->activations.clear();
  }
  const std::size_t hidden = m.weights.size() - 1;
  for (std::size_t i = 0; i < hidden; ++i) {
    Matrix<Scalar> z = m.weights[i].value * a;
    z.colwise() += m.biases[i].value.col(0);
    a = z.cwiseMax(Scalar(0));
    if (cache) cache->activations.push_back(a);
  }
  Matrix<Scalar> logits = m.weights[hidden].value * a;
  logits.colwise() += m.biases[hidden].value.col(0);
  return logits;
}

template <typename Scalar>
Matrix<Scalar> backward(SpectralMlp<Scalar>& m, const FrequencyProjector<Scalar>& proj, const MlpCache<Scalar>& cache,
                        const Matrix<Scalar>& grad_logits) {
  const Index batch = cache.spectrum.cols();
  if (grad_logits.rows() != m.classes || grad_logits.cols() != batch ||
      cache.activations.size() + 1 != m.weights.size()) {
    throw model_error(ErrorKind::usage, "shape_mismatch", "MLP gradient does not match the cached forward pass");
  }
  Matrix<Scalar> g = grad_logits;
  for (std::size_t i = m.weights.size(); i-- > 0;) {
    const Matrix<Scalar>& input = i == 0 ? cache.spectrum : cache.activations[i - 1];
    m.weights[i].grad.noalias() += g * input.transpose();
    m.biases[i].grad += g.rowwise().sum();
    Matrix<Scalar> dinput = m.weights[i].value.transpose() * g;
    if (i > 0) {
      g = (input.array() > Scalar(0)).select(dinput, Scalar(0));
    } else {
      g = std::move(dinput);
    }
  }
  return proj.columns() * g;
}

// ---------------------------------------------------------------------------

template <typename Scalar>
std::vector<GspConvLayer<Scalar>*> conv_layers(SpectralResNet<Scalar>& m) {
  std::vector<GspConvLayer<Scalar>*> out{&m.embed};
  for (auto& b : m.blocks) {
    out.push_back(&b.conv1);
    out.push_back(&b.conv2);
  }
  return out;
}

template <typename Scalar>
std::vector<const GspConvLayer<Scalar>*> conv_layers(const SpectralResNet<Scalar>& m) {
  std::vector<const GspConvLayer<Scalar>*> out{&m.embed};
  for (const auto& b : m.blocks) {
    out.push_back(&b.conv1);
    out.push_back(&b.conv2);
  }
  return out;
}

template <typename Scalar>
std::vector<Parameter<Scalar>*> parameters(SpectralResNet<Scalar>& m) {
  std::vector<Parameter<Scalar>*> out;
  for (auto* layer : conv_layers(m)) {
    out.push_back(&layer->theta);
    out.push_back(&layer->bn_scale);
    out.push_back(&layer->bn_shift);
  }
  out.push_back(&m.head_w);
  out.push_back(&m.head_b);
  return out;
}

template <typename Scalar>
std::vector<const Parameter<Scalar>*> parameters(const SpectralResNet<Scalar>& m) {
  std::vector<const Parameter<Scalar>*> out;
  for (const auto* layer : conv_layers(m)) {
    out.push_back(&layer->theta);
    out.push_back(&layer->bn_scale);
    out.push_back(&layer->bn_shift);
  }
  out.push_back(&m.head_w);
  out.push_back(&m.head_b);
  return out;
}

template <typename Scalar>
std::vector<Parameter<Scalar>*> parameters(SpectralMlp<Scalar>& m) {
  std::vector<Parameter<Scalar>*> out;
  for (std::size_t i = 0; i < m.weights.size(); ++i) {
    out.push_back(&m.weights[i]);
    out.push_back(&m.biases[i]);
  }
  return out;
}

template <typename Scalar>
std::vector<const Parameter<Scalar>*> parameters(const SpectralMlp<Scalar>& m) {
  std::vector<const Parameter<Scalar>*> out;
  for (std::size_t i = 0; i < m.weights.size(); ++i) {
    out.push_back(&m.weights[i]);
    out.push_back(&m.biases[i]);
  }
  return out;
}

std::int64_t resnet_formula_count(std::int64_t g, std::int64_t d, std::int64_t k, std::int64_t c) {
  return g * k + 2 * d * g * g * k + g * c;
}

std::int64_t mlp_formula_count(std::int64_t h, std::int64_t d, std::int64_t k, std::int64_t c) {
  return h * k + (d - 1) * h * h + h * c;
}

template <typename Scalar>
ParamCount param_count(const SpectralResNet<Scalar>& m) {
  ParamCount count;
  count.formula = resnet_formula_count(m.width, m.depth, m.kept.k(), m.classes);
  for (const auto* p : parameters(m)) count.full += p->size();
  return count;
}

template <typename Scalar>
ParamCount param_count(const SpectralMlp<Scalar>& m) {
  ParamCount count;
  count.formula = mlp_formula_count(m.width, m.depth, m.kept.k(), m.classes);
  for (const auto* p : parameters(m)) count.full += p->size();
  return count;
}

namespace {

template <typename Scalar>
void fill_uniform(Parameter<Scalar>& p, double fan_in, std::mt19937_64& rng) {
  const double bound = 1.0 / std::sqrt(fan_in);
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (Index i = 0; i < p.value.size(); ++i) p.value.data()[i] = static_cast<Scalar>(dist(rng));
  p.grad.setZero();
}

template <typename Scalar>
void reset_layer(GspConvLayer<Scalar>& layer, std::mt19937_64& rng) {
  fill_uniform(layer.theta, static_cast<double>(layer.in_channels), rng);
  layer.bn_scale.value.setOnes();
  layer.bn_shift.value.setZero();
  layer.bn_scale.grad.setZero();
  layer.bn_shift.grad.setZero();
  layer.running_mean.setZero();
  layer.running_var.setOnes();
  layer.running_ready = false;
}

}  // namespace

template <typename Scalar>
void init_params(SpectralResNet<Scalar>& m, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  for (auto* layer : conv_layers(m)) reset_layer(*layer, rng);
  fill_uniform(m.head_w, static_cast<double>(m.width), rng);
  m.head_b.value.setZero();
  m.head_b.grad.setZero();
}

template <typename Scalar>
void init_params(SpectralMlp<Scalar>& m, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < m.weights.size(); ++i) {
    fill_uniform(m.weights[i], static_cast<double>(m.weights[i].value.cols()), rng);
    m.biases[i].value.setZero();
    m.biases[i].grad.setZero();
  }
}

ArchKind parse_arch(const std::string& name) {
  if (name == "mlp") return ArchKind::mlp;
  if (name == "resnet") return ArchKind::resnet;
  throw model_error(ErrorKind::usage, "bad_arch", "unknown architecture '" + name + "' (expected mlp or resnet)");
}

const char* to_string(ArchKind kind) { return kind == ArchKind::mlp ? "mlp" : "resnet"; }

template <typename Scalar>
SpectralModel<Scalar> make_model(const ArchSpec& arch, const KeptSet& kept, Index classes) {
  if (arch.kind == ArchKind::resnet) {
    return SpectralResNet<Scalar>(kept, arch.width, arch.depth, classes, arch.batch_norm);
  }
  return SpectralMlp<Scalar>(kept, arch.width, arch.depth, classes);
}

#define GSPNET_INSTANTIATE_MODEL(S)                                                                                  \
  template class FrequencyProjector<S>;                                                                              \
  template struct GspConvLayer<S>;                                                                                   \
  template struct SpectralResNet<S>;                                                                                 \
  template struct SpectralMlp<S>;                                                                                    \
  template Matrix<S> spectral_mix(const Matrix<S>&, const Matrix<S>&, Index, Index);                                 \
  template Matrix<S> gspconv_forward(const GspConvLayer<S>&, const FrequencyProjector<S>&, const Matrix<S>&, Mode,   \
                                     GspConvCache<S>*);                                                              \
  template GspConvGrads<S> gspconv_backward(const GspConvLayer<S>&, const FrequencyProjector<S>&,                    \
                                            const GspConvCache<S>&, const Matrix<S>&);                               \
  template void update_running_stats(GspConvLayer<S>&, const GspConvCache<S>&);                                      \
  template Matrix<S> resnet_forward(const SpectralResNet<S>&, const FrequencyProjector<S>&, const Matrix<S>&, Mode,  \
                                    ResNetCache<S>*);                                                                \
  template Matrix<S> mlp_forward(const SpectralMlp<S>&, const FrequencyProjector<S>&, const Matrix<S>&,              \
                                 MlpCache<S>*);                                                                      \
  template Matrix<S> backward(SpectralResNet<S>&, const FrequencyProjector<S>&, const ResNetCache<S>&,               \
                              const Matrix<S>&);                                                                     \
  template Matrix<S> backward(SpectralMlp<S>&, const FrequencyProjector<S>&, const MlpCache<S>&, const Matrix<S>&);  \
  template void update_running_stats(SpectralResNet<S>&, const ResNetCache<S>&);                                     \
  template std::vector<Parameter<S>*> parameters(SpectralResNet<S>&);                                                \
  template std::vector<Parameter<S>*> parameters(SpectralMlp<S>&);                                                   \
  template std::vector<const Parameter<S>*> parameters(const SpectralResNet<S>&);                                    \
  template std::vector<const Parameter<S>*> parameters(const SpectralMlp<S>&);                                       \
  template std::vector<GspConvLayer<S>*> conv_layers(SpectralResNet<S>&);                                            \
  template std::vector<const GspConvLayer<S>*> conv_layers(const SpectralResNet<S>&);                                \
  template ParamCount param_count(const SpectralResNet<S>&);                                                         \
  template ParamCount param_count(const SpectralMlp<S>&);                                                            \
  template void init_params(SpectralResNet<S>&, std::uint64_t);                                                      \
  template void init_params(SpectralMlp<S>&, std::uint64_t);                                                        \
  template SpectralModel<S> make_model(const ArchSpec&, const KeptSet&, Index);

GSPNET_INSTANTIATE_MODEL(float)
GSPNET_INSTANTIATE_MODEL(double)

#undef GSPNET_INSTANTIATE_MODEL

}  // namespace gspnet

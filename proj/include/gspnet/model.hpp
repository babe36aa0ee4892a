#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

#include "gspnet/linalg.hpp"
#include "gspnet/spectral.hpp"

// Batches are column-oriented throughout: a batch of B signals with c
// channels on n vertices is an n x (B*c) matrix whose column b*c + j holds
// channel j of sample b. Spectra are frequency-major, (B*c) x K, so the data
// of one frequency is a contiguous column. Logits are C x B.

namespace gspnet {

enum class Activation { relu, none };
enum class Mode { train, eval };

inline constexpr double kBatchNormEpsilon = 1e-5;
inline constexpr double kBatchNormMomentum = 0.1;

template <typename Scalar>
struct Parameter {
  Parameter() = default;
  Parameter(Index rows, Index cols, bool spectral_columns = false)
      : value(Matrix<Scalar>::Zero(rows, cols)), grad(Matrix<Scalar>::Zero(rows, cols)), spectral(spectral_columns) {}

  Index size() const { return value.size(); }

  Matrix<Scalar> value;
  Matrix<Scalar> grad;
  /// Columns index the model's kept frequencies.
  bool spectral = false;
};

/// Kept columns of the eigenbasis, cast to the model precision.
template <typename Scalar>
class FrequencyProjector {
 public:
  FrequencyProjector(const SpectralBasis& basis, KeptSet kept);

  const Matrix<Scalar>& columns() const { return columns_; }
  const KeptSet& kept() const { return kept_; }
  Index vertices() const { return columns_.rows(); }
  Index frequencies() const { return columns_.cols(); }

 private:
  KeptSet kept_;
  Matrix<Scalar> columns_;
};

/// Spectral convolution: per-frequency channel mixing between a GFT and an
/// IGFT, followed by batch normalization and an activation. No bias; the
/// batch-norm shift plays that role.
template <typename Scalar>
struct GspConvLayer {
  GspConvLayer() = default;
  GspConvLayer(Index frequencies, Index in_channels, Index out_channels, Activation activation, bool batch_norm);

  Index frequencies() const { return theta.value.cols(); }

  Index in_channels = 0;
  Index out_channels = 0;
  Activation activation = Activation::relu;
  bool batch_norm = true;
  /// (in*out) x K. Column l is the in x out mixing matrix of frequency l,
  /// stored column-major.
  Parameter<Scalar> theta;
  Parameter<Scalar> bn_scale;
  Parameter<Scalar> bn_shift;
  Vector<Scalar> running_mean;
  Vector<Scalar> running_var;
  bool running_ready = false;
};

template <typename Scalar>
struct GspConvCache {
  Matrix<Scalar> input;
  Matrix<Scalar> spectrum_in;
  Matrix<Scalar> normalized;
  Vector<Scalar> batch_mean;
  Vector<Scalar> batch_var;
  Vector<Scalar> inv_std;
  Matrix<Scalar> output;
  Index batch = 0;
  bool train = false;
};

template <typename Scalar>
struct GspConvGrads {
  Matrix<Scalar> input;
  Matrix<Scalar> theta;
  Vector<Scalar> bn_scale;
  Vector<Scalar> bn_shift;
};

/// out[l] = theta[l]^T in[l] for every frequency column l.
/// spectrum: (B*in) x K, theta: (in*out) x K, result: (B*out) x K.
template <typename Scalar>
Matrix<Scalar> spectral_mix(const Matrix<Scalar>& spectrum, const Matrix<Scalar>& theta, Index in_channels,
                            Index out_channels);

/// Pure: train mode normalizes with batch statistics but leaves the running
/// statistics untouched (see update_running_stats).
template <typename Scalar>
Matrix<Scalar> gspconv_forward(const GspConvLayer<Scalar>& layer, const FrequencyProjector<Scalar>& proj,
                               const Matrix<Scalar>& x, Mode mode, GspConvCache<Scalar>* cache = nullptr);

template <typename Scalar>
GspConvGrads<Scalar> gspconv_backward(const GspConvLayer<Scalar>& layer, const FrequencyProjector<Scalar>& proj,
                                      const GspConvCache<Scalar>& cache, const Matrix<Scalar>& grad_out);

template <typename Scalar>
void update_running_stats(GspConvLayer<Scalar>& layer, const GspConvCache<Scalar>& cache);

// ---------------------------------------------------------------------------
// Spectral ResNet

template <typename Scalar>
struct ResNetBlock {
  GspConvLayer<Scalar> conv1;
  GspConvLayer<Scalar> conv2;
};

template <typename Scalar>
struct ResNetCache {
  struct Block {
    GspConvCache<Scalar> conv1;
    GspConvCache<Scalar> conv2;
    Matrix<Scalar> output;
  };
  GspConvCache<Scalar> embed;
  std::vector<Block> blocks;
  Matrix<Scalar> pooled;
};

/// GSPConv embedding (1 -> width), `depth` residual blocks computing
/// relu(x + conv2(conv1(x))), vertex average pooling and an affine head.
template <typename Scalar>
struct SpectralResNet {
  using Cache = ResNetCache<Scalar>;
  using scalar_type = Scalar;

  SpectralResNet() = default;
  SpectralResNet(KeptSet kept, Index width, Index depth, Index classes, bool batch_norm = true);

  Index vertices() const { return kept.n(); }

  KeptSet kept;
  Index width = 0;
  Index depth = 0;
  Index classes = 0;
  bool batch_norm = true;
  GspConvLayer<Scalar> embed;
  std::vector<ResNetBlock<Scalar>> blocks;
  Parameter<Scalar> head_w;  // width x classes
  Parameter<Scalar> head_b;  // classes x 1
};

// ---------------------------------------------------------------------------
// Spectral MLP

template <typename Scalar>
struct MlpCache {
  Matrix<Scalar> spectrum;
  std::vector<Matrix<Scalar>> activations;
};

/// GFT restricted to the kept frequencies, then `depth` affine+relu layers
/// of `width` units (K -> h, then depth-1 times h -> h) and an affine head.
template <typename Scalar>
struct SpectralMlp {
  using Cache = MlpCache<Scalar>;
  using scalar_type = Scalar;

  SpectralMlp() = default;
  SpectralMlp(KeptSet kept, Index width, Index depth, Index classes);

  Index vertices() const { return kept.n(); }

  KeptSet kept;
  Index width = 0;
  Index depth = 0;
  Index classes = 0;
  /// weights[0] is width x K (frequency columns); the last is classes x width.
  std::vector<Parameter<Scalar>> weights;
  std::vector<Parameter<Scalar>> biases;
};

template <typename Scalar>
Matrix<Scalar> resnet_forward(const SpectralResNet<Scalar>& m, const FrequencyProjector<Scalar>& proj,
                              const Matrix<Scalar>& x, Mode mode, ResNetCache<Scalar>* cache = nullptr);

template <typename Scalar>
Matrix<Scalar> mlp_forward(const SpectralMlp<Scalar>& m, const FrequencyProjector<Scalar>& proj,
                           const Matrix<Scalar>& x, MlpCache<Scalar>* cache = nullptr);

template <typename Scalar>
Matrix<Scalar> forward(const SpectralResNet<Scalar>& m, const FrequencyProjector<Scalar>& proj,
                       const Matrix<Scalar>& x, Mode mode, ResNetCache<Scalar>* cache = nullptr) {
  return resnet_forward(m, proj, x, mode, cache);
}

template <typename Scalar>
Matrix<Scalar> forward(const SpectralMlp<Scalar>& m, const FrequencyProjector<Scalar>& proj, const Matrix<Scalar>& x,
                       Mode /*mode*/, MlpCache<Scalar>* cache = nullptr) {
  return mlp_forward(m, proj, x, cache);
}

/// Accumulates parameter gradients (+=) and returns the gradient with respect
/// to the input batch.
template <typename Scalar>
Matrix<Scalar> backward(SpectralResNet<Scalar>& m, const FrequencyProjector<Scalar>& proj,
                        const ResNetCache<Scalar>& cache, const Matrix<Scalar>& grad_logits);

template <typename Scalar>
Matrix<Scalar> backward(SpectralMlp<Scalar>& m, const FrequencyProjector<Scalar>& proj, const MlpCache<Scalar>& cache,
                        const Matrix<Scalar>& grad_logits);

template <typename Scalar>
void update_running_stats(SpectralResNet<Scalar>& m, const ResNetCache<Scalar>& cache);

template <typename Scalar>
void update_running_stats(SpectralMlp<Scalar>&, const MlpCache<Scalar>&) {}

/// Trainable parameters in checkpoint order.
template <typename Scalar>
std::vector<Parameter<Scalar>*> parameters(SpectralResNet<Scalar>& m);
template <typename Scalar>
std::vector<Parameter<Scalar>*> parameters(SpectralMlp<Scalar>& m);
template <typename Scalar>
std::vector<const Parameter<Scalar>*> parameters(const SpectralResNet<Scalar>& m);
template <typename Scalar>
std::vector<const Parameter<Scalar>*> parameters(const SpectralMlp<Scalar>& m);

/// Every GSPConv layer of a ResNet, embed first.
template <typename Scalar>
std::vector<GspConvLayer<Scalar>*> conv_layers(SpectralResNet<Scalar>& m);
template <typename Scalar>
std::vector<const GspConvLayer<Scalar>*> conv_layers(const SpectralResNet<Scalar>& m);

template <typename Model>
void zero_grad(Model& m) {
  for (auto* p : parameters(m)) p->grad.setZero();
}

/// Trainable values concatenated in parameters() order, each column-major.
template <typename Model>
auto flatten_parameters(const Model& m) {
  const auto params = parameters(m);
  using Scalar = typename std::remove_cvref_t<decltype(params.front()->value)>::Scalar;
  Index total = 0;
  for (const auto* p : params) total += p->size();
  Vector<Scalar> flat(total);
  Index at = 0;
  for (const auto* p : params) {
    flat.segment(at, p->size()) = Eigen::Map<const Vector<Scalar>>(p->value.data(), p->size());
    at += p->size();
  }
  return flat;
}

struct ParamCount {
  /// gamma*K + 2*d*gamma^2*K + gamma*C for a ResNet; h*K + (d-1)*h^2 + h*C for an MLP.
  std::int64_t formula = 0;
  /// Every stored trainable value, including biases and batch-norm scale/shift.
  std::int64_t full = 0;
};

std::int64_t resnet_formula_count(std::int64_t width, std::int64_t depth, std::int64_t k, std::int64_t classes);
std::int64_t mlp_formula_count(std::int64_t width, std::int64_t depth, std::int64_t k, std::int64_t classes);

template <typename Scalar>
ParamCount param_count(const SpectralResNet<Scalar>& m);
template <typename Scalar>
ParamCount param_count(const SpectralMlp<Scalar>& m);

/// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights, zero biases, unit
/// batch-norm scale, zero shift; running statistics reset.
template <typename Scalar>
void init_params(SpectralResNet<Scalar>& m, std::uint64_t seed);
template <typename Scalar>
void init_params(SpectralMlp<Scalar>& m, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Architecture selection and checkpoints

enum class ArchKind { mlp, resnet };

ArchKind parse_arch(const std::string& name);
const char* to_string(ArchKind kind);

struct ArchSpec {
  ArchKind kind = ArchKind::mlp;
  Index width = 32;
  Index depth = 1;
  bool batch_norm = true;
};

template <typename Scalar>
using SpectralModel = std::variant<SpectralResNet<Scalar>, SpectralMlp<Scalar>>;

template <typename Scalar>
SpectralModel<Scalar> make_model(const ArchSpec& arch, const KeptSet& kept, Index classes);

struct Checkpoint {
  SpectralModel<float> model;
  std::uint64_t seed = 0;
};

/// "GSPM", u32 header length, JSON header, then little-endian f32 values:
/// per GSPConv layer theta, bn scale, bn shift, running mean, running var
/// (embed, then conv1/conv2 of each block), then head weight and bias. MLPs
/// store weight then bias per layer.
void save_checkpoint(const SpectralModel<float>& model, std::uint64_t seed, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace gspnet

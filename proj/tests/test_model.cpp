#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "gspnet/model.hpp"
#include "gradcheck.hpp"
#include "support.hpp"

using namespace gspnet;
using namespace gspnet::testing;

TEST(SpectralMix, MatchesPerFrequencyLoops) {
  std::mt19937_64 rng(1);
  const Index in = 2, out = 3, batch = 4, k = 5;
  const Eigen::MatrixXd spectrum = random_matrix(batch * in, k, rng);
  const Eigen::MatrixXd theta = random_matrix(in * out, k, rng);
  const Eigen::MatrixXd mixed = spectral_mix<double>(spectrum, theta, in, out);
  ASSERT_EQ(mixed.rows(), batch * out);
  for (Index l = 0; l < k; ++l)
    for (Index b = 0; b < batch; ++b)
      for (Index o = 0; o < out; ++o) {
        double acc = 0.0;
        for (Index i = 0; i < in; ++i) acc += theta(o * in + i, l) * spectrum(b * in + i, l);
        EXPECT_NEAR(mixed(b * out + o, l), acc, 1e-12);
      }
}

TEST(GspConv, MatchesExplicitFilterBankWithoutNormalization) {
  std::mt19937_64 rng(2);
  const SpectralBasis basis = gspnet::testing::basis_of(gspnet::testing::ring_graph(8));
  const FrequencyProjector<double> proj(basis, KeptSet::all(8));
  GspConvLayer<double> layer(8, 2, 3, Activation::none, false);
  layer.theta.value = random_matrix(6, 8, rng);
  const Index batch = 3;
  const Eigen::MatrixXd x = random_matrix(8, batch * 2, rng);
  const Eigen::MatrixXd y = gspconv_forward(layer, proj, x, Mode::train);
  const Eigen::MatrixXd& u = basis.u();
  for (Index b = 0; b < batch; ++b)
    for (Index o = 0; o < 3; ++o) {
      Eigen::VectorXd expected = Eigen::VectorXd::Zero(8);
      for (Index i = 0; i < 2; ++i) {
        Eigen::VectorXd filter(8);
        for (Index l = 0; l < 8; ++l) filter(l) = layer.theta.value(o * 2 + i, l);
        expected += u * filter.asDiagonal() * u.transpose() * x.col(b * 2 + i);
      }
      EXPECT_LT((y.col(b * 3 + o) - expected).cwiseAbs().maxCoeff(), 1e-12);
    }
}

TEST(GspConv, KeptSubsetMatchesZeroedFilters) {
  std::mt19937_64 rng(3);
  const SpectralBasis basis = gspnet::testing::basis_of(gspnet::testing::ring_graph(8));
  const KeptSet kept({1, 4, 6}, 8);
  GspConvLayer<double> small(3, 1, 2, Activation::relu, false), full(8, 1, 2, Activation::relu, false);
  small.theta.value = random_matrix(2, 3, rng);
  full.theta.value.setZero();
  for (Index j = 0; j < 3; ++j) full.theta.value.col(kept.indices()[j]) = small.theta.value.col(j);
  const Eigen::MatrixXd x = random_matrix(8, 4, rng);
  const auto a = gspconv_forward(small, FrequencyProjector<double>(basis, kept), x, Mode::train);
  const auto b = gspconv_forward(full, FrequencyProjector<double>(basis, KeptSet::all(8)), x, Mode::train);
  EXPECT_LT((a - b).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(GspConv, TrainModeNormalizesEachChannel) {
  std::mt19937_64 rng(4);
  const SpectralBasis basis = gspnet::testing::basis_of(gspnet::testing::ring_graph(8));
  const FrequencyProjector<double> proj(basis, KeptSet::all(8));
  GspConvLayer<double> layer(8, 1, 2, Activation::none, true);
  layer.theta.value = random_matrix(2, 8, rng);
  const Eigen::MatrixXd y = gspconv_forward(layer, proj, random_matrix(8, 5, rng), Mode::train);
  for (Index c = 0; c < 2; ++c) {
    Eigen::VectorXd values(8 * 5);
    for (Index b = 0; b < 5; ++b) values.segment(8 * b, 8) = y.col(b * 2 + c);
    EXPECT_NEAR(values.mean(), 0.0, 1e-12);
    const double var = (values.array() - values.mean()).square().mean();
    EXPECT_NEAR(var, 1.0, 1e-3);  // epsilon 1e-5 in the denominator
  }
}

TEST(GspConv, RunningStatisticsUpdate) {
  std::mt19937_64 rng(5);
  const SpectralBasis basis = gspnet::testing::basis_of(gspnet::testing::ring_graph(8));
  const FrequencyProjector<double> proj(basis, KeptSet::all(8));
  GspConvLayer<double> layer(8, 1, 1, Activation::none, true);
  layer.theta.value = random_matrix(1, 8, rng);
  const Eigen::MatrixXd x = random_matrix(8, 4, rng);
  EXPECT_EQ(error_code([&] { gspconv_forward(layer, proj, x, Mode::eval); }), "model.stats_uninitialized");

  GspConvCache<double> cache;
  gspconv_forward(layer, proj, x, Mode::train, &cache);
  GspConvLayer<double> plain = layer;
  plain.batch_norm = false;
  const Eigen::MatrixXd raw = gspconv_forward(plain, proj, x, Mode::train);
  const double mean = raw.mean();
  const double unbiased = (raw.array() - mean).square().sum() / static_cast<double>(raw.size() - 1);
  update_running_stats(layer, cache);
  EXPECT_NEAR(layer.running_mean(0), 0.1 * mean, 1e-12);
  EXPECT_NEAR(layer.running_var(0), 0.9 + 0.1 * unbiased, 1e-12);
  EXPECT_TRUE(layer.running_ready);
  EXPECT_NO_THROW(gspconv_forward(layer, proj, x, Mode::eval));
}

TEST(GspConv, BackwardNeedsTrainCache) {
  const SpectralBasis basis = gspnet::testing::basis_of(gspnet::testing::ring_graph(8));
  const FrequencyProjector<double> proj(basis, KeptSet::all(8));
  GspConvLayer<double> layer(8, 1, 1, Activation::none, false);
  GspConvCache<double> cache;
  gspconv_forward(layer, proj, Eigen::MatrixXd(Eigen::MatrixXd::Ones(8, 2)), Mode::eval, &cache);
  EXPECT_EQ(error_code([&] { gspconv_backward(layer, proj, cache, Eigen::MatrixXd(Eigen::MatrixXd::Ones(8, 2))); }),
            "model.cache_mode");
}

TEST(Gradients, TinyResNetMatchesFiniteDifferences) {
  std::mt19937_64 rng(6);
  const SpectralBasis basis = gspnet::testing::basis_of(gspnet::testing::ring_graph(8));
  const FrequencyProjector<double> proj(basis, KeptSet::all(8));
  SpectralResNet<double> m(KeptSet::all(8), 3, 1, 2);
  init_params(m, 1);
  randomize_batch_norm(m, rng);
  m.head_b.value = random_matrix(2, 1, rng);
  EXPECT_LT(max_gradient_error(m, proj, random_matrix(8, 4, rng), random_matrix(2, 4, rng)), 1e-4);
}

TEST(Gradients, ResNetWithoutBatchNormAndTruncated) {
  std::mt19937_64 rng(7);
  const SpectralBasis basis = gspnet::testing::basis_of(gspnet::testing::ring_graph(8));
  const KeptSet kept({0, 2, 3, 7}, 8);
  const FrequencyProjector<double> proj(basis, kept);
  SpectralResNet<double> m(kept, 2, 2, 3, false);
  init_params(m, 2);
  EXPECT_LT(max_gradient_error(m, proj, random_matrix(8, 3, rng), random_matrix(3, 3, rng)), 1e-4);
}

TEST(Gradients, TinyMlpMatchesFiniteDifferences) {
  std::mt19937_64 rng(8);
  const SpectralBasis basis = gspnet::testing::basis_of(gspnet::testing::ring_graph(8));
  const KeptSet kept({1, 2, 5, 6, 7}, 8);
  const FrequencyProjector<double> proj(basis, kept);
  SpectralMlp<double> m(kept, 6, 3, 3);
  init_params(m, 3);
  for (auto& b : m.biases) b.value = random_matrix(b.value.rows(), 1, rng) * 0.1;
  EXPECT_LT(max_gradient_error(m, proj, random_matrix(8, 5, rng), random_matrix(3, 5, rng)), 1e-4);
}

TEST(Mlp, ZeroWeightsGiveZeroLogitsAndZeroInputGivesBiases) {
  std::mt19937_64 rng(9);
  const SpectralBasis basis = gspnet::testing::basis_of(gspnet::testing::ring_graph(8));
  const FrequencyProjector<double> proj(basis, KeptSet::all(8));
  SpectralMlp<double> m(KeptSet::all(8), 4, 2, 3);
  EXPECT_EQ(forward(m, proj, random_matrix(8, 2, rng), Mode::eval), Eigen::MatrixXd(Eigen::MatrixXd::Zero(3, 2)));

  init_params(m, 4);
  for (auto& b : m.biases) b.value = random_matrix(b.value.rows(), 1, rng);
  Eigen::VectorXd a = m.biases[0].value.cwiseMax(0.0);
  a = (m.weights[1].value * a + m.biases[1].value).cwiseMax(0.0);
  const Eigen::VectorXd expected = m.weights[2].value * a + m.biases[2].value;
  const Eigen::MatrixXd logits = forward(m, proj, Eigen::MatrixXd(Eigen::MatrixXd::Zero(8, 1)), Mode::eval);
  EXPECT_LT((logits.col(0) - expected).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Mlp, MatchesDenseProductOracle) {
  std::mt19937_64 rng(10);
  const SpectralBasis basis = gspnet::testing::basis_of(gspnet::testing::ring_graph(8));
  const FrequencyProjector<double> proj(basis, KeptSet::all(8));
  SpectralMlp<double> m(KeptSet::all(8), 5, 1, 2);
  init_params(m, 5);
  const Eigen::MatrixXd x = random_matrix(8, 3, rng);
  const Eigen::MatrixXd hidden = (m.weights[0].value * basis.u().transpose() * x).cwiseMax(0.0);
  const Eigen::MatrixXd expected = m.weights[1].value * hidden;
  EXPECT_LT((forward(m, proj, x, Mode::eval) - expected).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Forward, EvalModeIsPure) {
  std::mt19937_64 rng(11);
  const SpectralBasis basis = gspnet::testing::basis_of(gspnet::testing::ring_graph(8));
  const FrequencyProjector<float> proj(basis, KeptSet::all(8));
  SpectralResNet<float> m(KeptSet::all(8), 4, 1, 2);
  init_params(m, 6);
  ResNetCache<float> cache;
  const Eigen::MatrixXf x = random_matrix(8, 6, rng).cast<float>();
  forward(m, proj, x, Mode::train, &cache);
  update_running_stats(m, cache);
  const Eigen::MatrixXf a = forward(m, proj, x, Mode::eval);
  const Eigen::MatrixXf b = forward(m, proj, x, Mode::eval);
  EXPECT_EQ(a, b);
}

TEST(GspConv, UnitFiltersAreIdentity) {
  std::mt19937_64 rng(14);
  const SpectralBasis basis = gspnet::testing::basis_of(gspnet::testing::ring_graph(8));
  GspConvLayer<double> layer(8, 1, 1, Activation::none, false);
  layer.theta.value.setOnes();
  const Eigen::MatrixXd x = random_matrix(8, 3, rng);
  const auto y = gspconv_forward(layer, FrequencyProjector<double>(basis, KeptSet::all(8)), x, Mode::eval);
  EXPECT_LT((y - x).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(GspConv, LinearBackwardIsAdjointOfForward) {
  std::mt19937_64 rng(15);
  const SpectralBasis basis = gspnet::testing::basis_of(gspnet::testing::ring_graph(8));
  const FrequencyProjector<double> proj(basis, KeptSet({0, 2, 5, 6}, 8));
  GspConvLayer<double> layer(4, 2, 3, Activation::none, false);
  layer.theta.value = random_matrix(6, 4, rng);
  const Eigen::MatrixXd x = random_matrix(8, 4 * 2, rng);
  const Eigen::MatrixXd y = random_matrix(8, 4 * 3, rng);
  GspConvCache<double> cache;
  const Eigen::MatrixXd fx = gspconv_forward(layer, proj, x, Mode::train, &cache);
  const auto g = gspconv_backward(layer, proj, cache, y);
  EXPECT_NEAR(fx.cwiseProduct(y).sum(), x.cwiseProduct(g.input).sum(), 1e-9);
}

TEST(GspConv, ZeroUpstreamGradientGivesZeroGradients) {
  std::mt19937_64 rng(16);
  const SpectralBasis basis = gspnet::testing::basis_of(gspnet::testing::ring_graph(8));
  const FrequencyProjector<double> proj(basis, KeptSet::all(8));
  GspConvLayer<double> layer(8, 2, 2, Activation::relu, true);
  layer.theta.value = random_matrix(4, 8, rng);
  GspConvCache<double> cache;
  gspconv_forward(layer, proj, random_matrix(8, 6, rng), Mode::train, &cache);
  const auto g = gspconv_backward(layer, proj, cache, Eigen::MatrixXd(Eigen::MatrixXd::Zero(8, 6)));
  EXPECT_EQ(g.input.cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(g.theta.cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(g.bn_scale.cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(g.bn_shift.cwiseAbs().maxCoeff(), 0.0);
}

TEST(Forward, ZeroResNetGivesZeroLogits) {
  std::mt19937_64 rng(17);
  const SpectralBasis basis = gspnet::testing::basis_of(gspnet::testing::ring_graph(8));
  SpectralResNet<double> m(KeptSet::all(8), 3, 2, 4);
  const auto logits = forward(m, FrequencyProjector<double>(basis, KeptSet::all(8)), random_matrix(8, 5, rng),
                              Mode::train);
  EXPECT_EQ(logits, Eigen::MatrixXd(Eigen::MatrixXd::Zero(4, 5)));
}

TEST(Forward, EvalModePermutesWithSamples) {
  std::mt19937_64 rng(18);
  const SpectralBasis basis = gspnet::testing::basis_of(gspnet::testing::ring_graph(8));
  const FrequencyProjector<double> proj(basis, KeptSet::all(8));
  SpectralResNet<double> m(KeptSet::all(8), 3, 1, 2);
  init_params(m, 9);
  const Eigen::MatrixXd x = random_matrix(8, 5, rng);
  ResNetCache<double> cache;
  forward(m, proj, x, Mode::train, &cache);
  update_running_stats(m, cache);
  Eigen::PermutationMatrix<Eigen::Dynamic> perm(5);
  perm.indices() << 3, 0, 4, 1, 2;
  const Eigen::MatrixXd a = forward(m, proj, Eigen::MatrixXd(x * perm), Mode::eval);
  const Eigen::MatrixXd b = forward(m, proj, x, Mode::eval) * perm;
  EXPECT_LT((a - b).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Forward, RejectsMismatchedProjector) {
  const SpectralBasis basis = gspnet::testing::basis_of(gspnet::testing::ring_graph(8));
  SpectralMlp<double> m(KeptSet::band(8, {0, 4}), 3, 1, 2);
  const FrequencyProjector<double> proj(basis, KeptSet::all(8));
  EXPECT_EQ(error_code([&] { forward(m, proj, Eigen::MatrixXd(Eigen::MatrixXd::Zero(8, 1)), Mode::eval); }),
            "model.basis_mismatch");
}

TEST(ParamCount, DocumentedExamples) {
  const SpectralResNet<float> r(KeptSet::all(3), 2, 1, 2);
  EXPECT_EQ(param_count(r).formula, 34);
  EXPECT_EQ(mlp_formula_count(1024, 3, 360, 24), 2490368);
  EXPECT_EQ(2 * 4 * 128 * 128 * 360, 47185920);
  EXPECT_EQ(resnet_formula_count(128, 4, 360, 24) / 1000000, 47);
}

TEST(ParamCount, FullEqualsEnumerationOnRandomArchitectures) {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 20; ++trial) {
    const Index n = 4 + static_cast<Index>(rng() % 12);
    const Index k = 1 + static_cast<Index>(rng() % static_cast<std::uint64_t>(n));
    const KeptSet kept = KeptSet::band(n, {n - k, k});
    const Index width = 1 + static_cast<Index>(rng() % 6);
    const Index depth = 1 + static_cast<Index>(rng() % 3);
    const Index classes = 2 + static_cast<Index>(rng() % 4);
    const SpectralResNet<float> r(kept, width, depth, classes);
    std::int64_t enumerated = 0;
    for (const auto* layer : conv_layers(r))
      enumerated += layer->theta.value.size() + layer->bn_scale.value.size() + layer->bn_shift.value.size();
    enumerated += r.head_w.value.size() + r.head_b.value.size();
    EXPECT_EQ(param_count(r).full, enumerated);
    EXPECT_EQ(param_count(r).full, flatten_parameters(r).size());
    EXPECT_EQ(param_count(r).formula, width * k + 2 * depth * width * width * k + width * classes);

    const SpectralMlp<float> m(kept, width, depth, classes);
    const std::int64_t mlp_enumerated =
        width * k + width + (depth - 1) * (width * width + width) + classes * width + classes;
    EXPECT_EQ(param_count(m).full, mlp_enumerated);
    EXPECT_EQ(param_count(m).full, flatten_parameters(m).size());
  }
}

TEST(Init, SeedDeterminesParameters) {
  SpectralResNet<float> a(KeptSet::all(6), 3, 1, 2), b(KeptSet::all(6), 3, 1, 2), c(KeptSet::all(6), 3, 1, 2);
  init_params(a, 42);
  init_params(b, 42);
  init_params(c, 43);
  EXPECT_EQ(flatten_parameters(a), flatten_parameters(b));
  EXPECT_NE(flatten_parameters(a), flatten_parameters(c));
  for (const auto* layer : conv_layers(a)) {
    EXPECT_TRUE((layer->bn_scale.value.array() == 1.0f).all());
    EXPECT_TRUE((layer->bn_shift.value.array() == 0.0f).all());
  }
}

TEST(Init, WeightsAreZeroMean) {
  SpectralMlp<double> m(KeptSet::all(256), 400, 1, 2);
  init_params(m, 7);
  const auto& w = m.weights[0].value;
  const double bound = 1.0 / std::sqrt(256.0);
  EXPECT_LE(w.cwiseAbs().maxCoeff(), bound);
  const double sigma = bound / std::sqrt(3.0) / std::sqrt(static_cast<double>(w.size()));
  EXPECT_LT(std::abs(w.mean()), 3.0 * sigma);
}

TEST(Arch, ParseAndMake) {
  EXPECT_EQ(parse_arch("mlp"), ArchKind::mlp);
  EXPECT_EQ(parse_arch("resnet"), ArchKind::resnet);
  EXPECT_EQ(error_code([] { parse_arch("cnn"); }), "model.bad_arch");
  ArchSpec arch;
  arch.kind = ArchKind::resnet;
  EXPECT_TRUE(std::holds_alternative<SpectralResNet<float>>(make_model<float>(arch, KeptSet::all(4), 2)));
  EXPECT_EQ(error_code([] { SpectralMlp<float>(KeptSet::all(4), 3, 0, 2); }), "model.bad_architecture");
}

TEST(Checkpoint, RoundTripPreservesEverything) {
  std::mt19937_64 rng(13);
  const SpectralBasis basis = gspnet::testing::basis_of(gspnet::testing::ring_graph(8));
  const KeptSet kept({0, 1, 5}, 8);
  const FrequencyProjector<float> proj(basis, kept);
  SpectralResNet<float> m(kept, 3, 2, 2);
  init_params(m, 8);
  ResNetCache<float> cache;
  const Eigen::MatrixXf x = random_matrix(8, 4, rng).cast<float>();
  forward(m, proj, x, Mode::train, &cache);
  update_running_stats(m, cache);

  const auto dir = std::filesystem::temp_directory_path() / "gspnet_model_test";
  std::filesystem::create_directories(dir);
  save_checkpoint(m, 99, dir / "m.gspm");
  const Checkpoint ck = load_checkpoint(dir / "m.gspm");
  EXPECT_EQ(ck.seed, 99u);
  const auto& back = std::get<SpectralResNet<float>>(ck.model);
  EXPECT_EQ(back.kept, kept);
  EXPECT_EQ(flatten_parameters(back), flatten_parameters(m));
  EXPECT_EQ(forward(back, proj, x, Mode::eval), forward(m, proj, x, Mode::eval));

  SpectralMlp<float> mlp(KeptSet::all(8), 4, 2, 3);
  init_params(mlp, 9);
  save_checkpoint(mlp, 1, dir / "mlp.gspm");
  const auto mlp_back = std::get<SpectralMlp<float>>(load_checkpoint(dir / "mlp.gspm").model);
  EXPECT_EQ(flatten_parameters(mlp_back), flatten_parameters(mlp));
}

TEST(Checkpoint, RejectsCorruptFiles) {
  const auto dir = std::filesystem::temp_directory_path() / "gspnet_model_test";
  std::filesystem::create_directories(dir);
  std::ofstream(dir / "bad.gspm") << "XXXX0000";
  EXPECT_EQ(error_code([&] { load_checkpoint(dir / "bad.gspm"); }), "model.bad_magic");
  SpectralMlp<float> mlp(KeptSet::all(8), 4, 1, 2);
  save_checkpoint(mlp, 1, dir / "cut.gspm");
  std::filesystem::resize_file(dir / "cut.gspm", std::filesystem::file_size(dir / "cut.gspm") - 4);
  EXPECT_EQ(error_code([&] { load_checkpoint(dir / "cut.gspm"); }), "model.payload_size_mismatch");
}

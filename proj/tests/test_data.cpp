#include <gtest/gtest.h>

#include <json.hpp>

#include <filesystem>

#include "gspnet/data.hpp"
#include "gspnet/io.hpp"
#include "support.hpp"

using namespace gspnet;
using gspnet::testing::error_code;

namespace {

std::filesystem::path fresh_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / "gspnet_data_test" / name;
  std::filesystem::remove_all(dir);
  return dir;
}

const SpectralBasis& ring12() {
  static const SpectralBasis b = gspnet::testing::basis_of(gspnet::testing::ring_graph(12));
  return b;
}

Dataset small_dataset() { return synth_planted_band(ring12(), 3, KeptSet::band(12, {0, 4}), 2.0, 5, 1); }

void rewrite_manifest(const std::filesystem::path& manifest, const std::function<void(nlohmann::json&)>& edit) {
  auto j = nlohmann::json::parse(io::read_text(manifest, "test"));
  edit(j);
  io::write_text(manifest, j.dump(), "test");
}

}  // namespace

TEST(DatasetFile, RoundTripIsExact) {
  const Dataset ds = small_dataset();
  const auto manifest = save_dataset(ds, fresh_dir("rt"));
  EXPECT_EQ(manifest.filename(), "manifest.json");
  EXPECT_EQ(load_dataset(manifest), ds);
  EXPECT_EQ(std::filesystem::file_size(manifest.parent_path() / "signals.f32"), 4u * 12u * 15u);
  EXPECT_EQ(std::filesystem::file_size(manifest.parent_path() / "labels.u32"), 4u * 15u);
}

TEST(DatasetFile, RefusesToOverwriteUnlessAsked) {
  const auto dir = fresh_dir("exists");
  save_dataset(small_dataset(), dir);
  EXPECT_EQ(error_code([&] { save_dataset(small_dataset(), dir); }), "data.exists");
  EXPECT_NO_THROW(save_dataset(small_dataset(), dir, true));
}

TEST(DatasetFile, DetectsCorruptPayloads) {
  const auto dir = fresh_dir("corrupt");
  const auto manifest = save_dataset(small_dataset(), dir);
  auto bytes = io::read_file(dir / "signals.f32", "test");
  bytes[3] ^= 0x01;
  io::write_file(dir / "signals.f32", bytes, "test");
  EXPECT_EQ(error_code([&] { load_dataset(manifest); }), "data.checksum_mismatch");

  bytes.pop_back();
  io::write_file(dir / "signals.f32", bytes, "test");
  EXPECT_EQ(error_code([&] { load_dataset(manifest); }), "data.payload_size_mismatch");
}

TEST(DatasetFile, RejectsOutOfRangeLabels) {
  const auto dir = fresh_dir("labels");
  const auto manifest = save_dataset(small_dataset(), dir);
  auto labels = io::read_file(dir / "labels.u32", "test");
  labels[0] = 7;
  io::write_file(dir / "labels.u32", labels, "test");
  const std::string digest = io::sha256_hex(labels);
  rewrite_manifest(manifest, [&](nlohmann::json& j) { j["sha256"]["labels"] = digest; });
  EXPECT_EQ(error_code([&] { load_dataset(manifest); }), "data.label_out_of_range");
}

TEST(DatasetFile, RejectsMalformedManifest) {
  const auto dir = fresh_dir("manifest");
  const auto manifest = save_dataset(small_dataset(), dir);
  rewrite_manifest(manifest, [](nlohmann::json& j) { j["version"] = 99; });
  EXPECT_EQ(error_code([&] { load_dataset(manifest); }), "data.bad_manifest");
  rewrite_manifest(manifest, [](nlohmann::json& j) {
    j["version"] = 1;
    j.erase("n_vertices");
  });
  EXPECT_EQ(error_code([&] { load_dataset(manifest); }), "data.bad_manifest");
  io::write_text(manifest, "{not json", "test");
  EXPECT_EQ(error_code([&] { load_dataset(manifest); }), "data.bad_manifest");
}

TEST(Dataset, ValidateCatchesBadContents) {
  Dataset ds = small_dataset();
  ds.labels[0] = 3;
  EXPECT_EQ(error_code([&] { ds.validate(); }), "data.label_out_of_range");
  ds = small_dataset();
  ds.signals(0, 0) = std::numeric_limits<float>::quiet_NaN();
  EXPECT_EQ(error_code([&] { ds.validate(); }), "data.non_finite");
  ds = small_dataset().subset({0, 1, 3, 4});
  EXPECT_EQ(error_code([&] { ds.validate(); }), "data.empty_class");
}

TEST(Synth, PlantedMeansAreUnitNormAndOnBand) {
  const KeptSet band({1, 3, 8}, 12);
  const Eigen::MatrixXd means = planted_class_means(ring12(), 4, band, 5);
  ASSERT_EQ(means.rows(), 12);
  ASSERT_EQ(means.cols(), 4);
  for (Index c = 0; c < 4; ++c) {
    EXPECT_NEAR(means.col(c).norm(), 1.0, 1e-12);
    for (Index l = 0; l < 12; ++l) {
      if (!band.contains(l)) {
        EXPECT_EQ(means(l, c), 0.0);
      }
    }
  }
}

TEST(Synth, SamplesFollowThePlantedModel) {
  const KeptSet band = KeptSet::band(12, {2, 3});
  const Dataset ds = synth_planted_band(ring12(), 2, band, 4.0, 2000, 9);
  ASSERT_EQ(ds.samples(), 4000);
  EXPECT_EQ(ds.labels[0], 0);
  EXPECT_EQ(ds.labels[1], 1);
  const Eigen::MatrixXd means = planted_class_means(ring12(), 2, band, 9);
  const Eigen::MatrixXd spectra = gft(ring12(), ds.signals.cast<double>());
  for (int c = 0; c < 2; ++c) {
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(12);
    double sq = 0.0;
    Index count = 0;
    for (Index s = 0; s < ds.samples(); ++s) {
      if (ds.labels[static_cast<std::size_t>(s)] != c) continue;
      const Eigen::VectorXd noise = spectra.col(s) - 4.0 * means.col(c);
      sum += noise;
      sq += noise.squaredNorm();
      ++count;
    }
    EXPECT_LT((sum / count).cwiseAbs().maxCoeff(), 0.15);
    EXPECT_NEAR(sq / (count * 12.0), 1.0, 0.05);
  }
}

TEST(Synth, DeterministicAndValidated) {
  EXPECT_EQ(small_dataset(), small_dataset());
  EXPECT_EQ(error_code([] { synth_planted_band(ring12(), 1, KeptSet::all(12), 1.0, 1, 0); }), "data.bad_classes");
  EXPECT_EQ(error_code([] { synth_planted_band(ring12(), 2, KeptSet::all(12), 0.0, 1, 0); }), "data.bad_snr");
  EXPECT_EQ(error_code([] { synth_planted_band(ring12(), 2, KeptSet({}, 12), 1.0, 1, 0); }), "data.empty_band");
  EXPECT_EQ(error_code([] { synth_planted_band(ring12(), 2, KeptSet::all(8), 1.0, 1, 0); }), "data.band_mismatch");
}

TEST(Synth, EmpiricalClassMeansConcentrateOnBand) {
  static const SpectralBasis ring64 = gspnet::testing::basis_of(gspnet::testing::ring_graph(64));
  const KeptSet band = KeptSet::band(64, {0, 8});
  const Dataset ds = synth_planted_band(ring64, 4, band, 5.0, 500, 12);
  const Eigen::MatrixXd spectra = gft(ring64, ds.signals.cast<double>());
  for (int c = 0; c < 4; ++c) {
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(64);
    Index count = 0;
    for (Index s = 0; s < ds.samples(); ++s) {
      if (ds.labels[static_cast<std::size_t>(s)] != c) continue;
      mean += spectra.col(s);
      ++count;
    }
    mean /= static_cast<double>(count);
    double on = 0.0, off = 0.0;
    for (Index l = 0; l < 64; ++l) (band.contains(l) ? on : off) += mean(l) * mean(l);
    EXPECT_LT(off / on, 0.05) << "class " << c;
  }
}

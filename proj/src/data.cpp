#include "gspnet/data.hpp"

#include <json.hpp>

#include <random>

#include "gspnet/io.hpp"

namespace gspnet {

namespace {

using nlohmann::json;

constexpr int kManifestVersion = 1;

Error data_error(ErrorKind kind, const std::string& code, const std::string& message) {
  return Error(kind, "data", "data." + code, message);
}

}  // namespace

void Dataset::validate() const {
  if (n_vertices < 1 || n_classes < 1 || signals.rows() != n_vertices) {
    throw data_error(ErrorKind::format, "bad_shape",
                     "signals are " + std::to_string(signals.rows()) + " x " + std::to_string(signals.cols()) +
                         " for " + std::to_string(n_vertices) + " vertices");
  }
  if (static_cast<Index>(labels.size()) != samples()) {
    throw data_error(ErrorKind::format, "bad_shape",
                     std::to_string(labels.size()) + " labels for " + std::to_string(samples()) + " samples");
  }
  std::vector<Index> counts(static_cast<std::size_t>(n_classes), 0);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= n_classes) {
      throw data_error(ErrorKind::format, "label_out_of_range",
                       "label out of range: sample " + std::to_string(i) + " has label " +
                           std::to_string(labels[i]) + " with " + std::to_string(n_classes) + " classes");
    }
    ++counts[static_cast<std::size_t>(labels[i])];
  }
  for (Index c = 0; c < n_classes; ++c) {
    if (counts[c] == 0) {
      throw data_error(ErrorKind::format, "empty_class", "class " + std::to_string(c) + " has no samples");
    }
  }
  if (!signals.allFinite()) throw data_error(ErrorKind::format, "non_finite", "signals contain non-finite values");
}

Dataset Dataset::subset(const std::vector<Index>& positions) const {
  Dataset out;
  out.n_vertices = n_vertices;
  out.n_classes = n_classes;
  out.signals.resize(n_vertices, static_cast<Index>(positions.size()));
  out.labels.reserve(positions.size());
  for (std::size_t i = 0; i < positions.size(); ++i) {
    out.signals.col(static_cast<Index>(i)) = signals.col(positions[i]);
    out.labels.push_back(labels[static_cast<std::size_t>(positions[i])]);
  }
  return out;
}

Dataset load_dataset(const std::filesystem::path& manifest_path) {
  const std::string text = io::read_text(manifest_path, "data");
  json manifest;
  try {
    manifest = json::parse(text);
  } catch (const json::exception& e) {
    throw data_error(ErrorKind::format, "bad_manifest", std::string("manifest: ") + e.what());
  }
  Dataset ds;
  std::filesystem::path signals_path, labels_path;
  std::string signals_digest, labels_digest;
  try {
    if (manifest.at("version").get<int>() != kManifestVersion) {
      throw data_error(ErrorKind::format, "bad_manifest", "unsupported manifest version");
    }
    ds.n_vertices = manifest.at("n_vertices").get<Index>();
    ds.n_classes = manifest.at("n_classes").get<Index>();
    const auto n_samples = manifest.at("n_samples").get<Index>();
    if (ds.n_vertices < 1 || ds.n_classes < 1 || n_samples < 1) {
      throw data_error(ErrorKind::format, "bad_manifest", "manifest dimensions must be positive");
    }
    ds.signals.resize(ds.n_vertices, n_samples);
    const auto base = manifest_path.parent_path();
    signals_path = base / manifest.at("signals").get<std::string>();
    labels_path = base / manifest.at("labels").get<std::string>();
    signals_digest = manifest.at("sha256").at("signals").get<std::string>();
    labels_digest = manifest.at("sha256").at("labels").get<std::string>();
  } catch (const json::exception& e) {
    throw data_error(ErrorKind::format, "bad_manifest", std::string("manifest: ") + e.what());
  }

  const io::Bytes signal_bytes = io::read_file(signals_path, "data");
  const io::Bytes label_bytes = io::read_file(labels_path, "data");
  const auto expected_signals = 4 * static_cast<std::size_t>(ds.signals.size());
  const auto expected_labels = 4 * static_cast<std::size_t>(ds.signals.cols());
  if (signal_bytes.size() != expected_signals) {
    throw data_error(ErrorKind::format, "payload_size_mismatch",
                     "payload size mismatch: '" + signals_path.string() + "' has " +
                         std::to_string(signal_bytes.size()) + " bytes, expected " + std::to_string(expected_signals));
  }
  if (label_bytes.size() != expected_labels) {
    throw data_error(ErrorKind::format, "payload_size_mismatch",
                     "payload size mismatch: '" + labels_path.string() + "' has " +
                         std::to_string(label_bytes.size()) + " bytes, expected " + std::to_string(expected_labels));
  }
  if (io::sha256_hex(signal_bytes) != signals_digest) {
    throw data_error(ErrorKind::format, "checksum_mismatch", "checksum mismatch for '" + signals_path.string() + "'");
  }
  if (io::sha256_hex(label_bytes) != labels_digest) {
    throw data_error(ErrorKind::format, "checksum_mismatch", "checksum mismatch for '" + labels_path.string() + "'");
  }

  for (Index i = 0; i < ds.signals.size(); ++i) ds.signals.data()[i] = io::get_le<float>(signal_bytes, 4 * i);
  ds.labels.resize(static_cast<std::size_t>(ds.signals.cols()));
  for (std::size_t i = 0; i < ds.labels.size(); ++i) {
    const std::uint32_t label = io::get_le<std::uint32_t>(label_bytes, 4 * i);
    if (static_cast<Index>(label) >= ds.n_classes) {
      throw data_error(ErrorKind::format, "label_out_of_range",
                       "label out of range: sample " + std::to_string(i) + " has label " + std::to_string(label) +
                           " with " + std::to_string(ds.n_classes) + " classes");
    }
    ds.labels[i] = static_cast<int>(label);
  }
  ds.validate();
  return ds;
}

std::filesystem::path save_dataset(const Dataset& ds, const std::filesystem::path& dir, bool overwrite) {
  ds.validate();
  const auto manifest_path = dir / "manifest.json";
  std::error_code ec;
  if (std::filesystem::exists(manifest_path, ec) && !overwrite) {
    throw data_error(ErrorKind::io, "exists",
                     "'" + manifest_path.string() + "' already exists; pass overwrite to replace it");
  }
  std::filesystem::create_directories(dir, ec);
  if (ec) throw data_error(ErrorKind::io, "write_failed", "cannot create '" + dir.string() + "': " + ec.message());

  io::Bytes signal_bytes;
  signal_bytes.reserve(4 * static_cast<std::size_t>(ds.signals.size()));
  for (Index i = 0; i < ds.signals.size(); ++i) io::put_le<float>(signal_bytes, ds.signals.data()[i]);
  io::Bytes label_bytes;
  label_bytes.reserve(4 * ds.labels.size());
  for (int label : ds.labels) io::put_le<std::uint32_t>(label_bytes, static_cast<std::uint32_t>(label));

  io::write_file(dir / "signals.f32", signal_bytes, "data");
  io::write_file(dir / "labels.u32", label_bytes, "data");

  json manifest;
  manifest["version"] = kManifestVersion;
  manifest["n_vertices"] = ds.n_vertices;
  manifest["n_samples"] = ds.samples();
  manifest["n_classes"] = ds.n_classes;
  manifest["signals"] = "signals.f32";
  manifest["labels"] = "labels.u32";
  manifest["sha256"] = {{"signals", io::sha256_hex(signal_bytes)}, {"labels", io::sha256_hex(label_bytes)}};
  io::write_text(manifest_path, manifest.dump(2) + "\n", "data");
  return manifest_path;
}

namespace {

Eigen::MatrixXd draw_class_means(Index n, Index n_classes, const KeptSet& band, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd means = Eigen::MatrixXd::Zero(n, n_classes);
  for (Index c = 0; c < n_classes; ++c) {
    for (Index l : band.indices()) means(l, c) = normal(rng);
    const double norm = means.col(c).norm();
    if (norm > 0.0) means.col(c) /= norm;
  }
  return means;
}

void check_synth_args(const SpectralBasis& basis, Index n_classes, const KeptSet& band, double snr,
                      Index samples_per_class) {
  if (band.empty()) throw data_error(ErrorKind::usage, "empty_band", "planted band is empty");
  if (band.n() != basis.size()) {
    throw data_error(ErrorKind::usage, "band_mismatch", "planted band and basis disagree on n");
  }
  if (!(snr > 0.0)) throw data_error(ErrorKind::usage, "bad_snr", "snr must be positive");
  if (n_classes < 2) throw data_error(ErrorKind::usage, "bad_classes", "need at least 2 classes");
  if (samples_per_class < 1) {
    throw data_error(ErrorKind::usage, "bad_samples", "samples per class must be at least 1");
  }
}

}  // namespace

Eigen::MatrixXd planted_class_means(const SpectralBasis& basis, Index n_classes, const KeptSet& band,
                                    std::uint64_t seed) {
  check_synth_args(basis, n_classes, band, 1.0, 1);
  std::mt19937_64 rng(seed);
  return draw_class_means(basis.size(), n_classes, band, rng);
}

Dataset synth_planted_band(const SpectralBasis& basis, Index n_classes, const KeptSet& band, double snr,
                           Index samples_per_class, std::uint64_t seed) {
  check_synth_args(basis, n_classes, band, snr, samples_per_class);
  const Index n = basis.size();
  std::mt19937_64 rng(seed);
  const Eigen::MatrixXd means = draw_class_means(n, n_classes, band, rng);
  std::normal_distribution<double> normal(0.0, 1.0);

  const Index total = n_classes * samples_per_class;
  Eigen::MatrixXd spectra(n, total);
  Dataset ds;
  ds.n_vertices = n;
  ds.n_classes = n_classes;
  ds.labels.resize(static_cast<std::size_t>(total));
  for (Index s = 0; s < total; ++s) {
    const Index c = s % n_classes;
    ds.labels[static_cast<std::size_t>(s)] = static_cast<int>(c);
    for (Index l = 0; l < n; ++l) spectra(l, s) = snr * means(l, c) + normal(rng);
  }
  ds.signals = igft(basis, spectra).cast<float>();
  return ds;
}

}  // namespace gspnet

#include <json.hpp>

#include "gspnet/io.hpp"
#include "gspnet/model.hpp"

namespace gspnet {

namespace {

using nlohmann::json;

constexpr int kCheckpointVersion = 1;

Error checkpoint_error(ErrorKind kind, const std::string& code, const std::string& message) {
  return Error(kind, "model", "model." + code, message);
}

void put_values(io::Bytes& out, const Matrix<float>& m) {
  for (Index i = 0; i < m.size(); ++i) io::put_le<float>(out, m.data()[i]);
}

class Reader {
 public:
  Reader(const io::Bytes& bytes, std::size_t offset) : bytes_(bytes), at_(offset) {}

  void fill(Matrix<float>& m) {
    const std::size_t need = 4 * static_cast<std::size_t>(m.size());
    if (at_ + need > bytes_.size()) {
      throw checkpoint_error(ErrorKind::format, "payload_size_mismatch", "checkpoint payload is truncated");
    }
    for (Index i = 0; i < m.size(); ++i, at_ += 4) m.data()[i] = io::get_le<float>(bytes_, at_);
  }

  void fill(Vector<float>& v) {
    Matrix<float> m(v.size(), 1);
    fill(m);
    v = m.col(0);
  }

  bool done() const { return at_ == bytes_.size(); }

 private:
  const io::Bytes& bytes_;
  std::size_t at_;
};

void write_layer(io::Bytes& out, const GspConvLayer<float>& layer) {
  put_values(out, layer.theta.value);
  put_values(out, layer.bn_scale.value);
  put_values(out, layer.bn_shift.value);
  put_values(out, layer.running_mean);
  put_values(out, layer.running_var);
}

void read_layer(Reader& in, GspConvLayer<float>& layer, bool ready) {
  in.fill(layer.theta.value);
  in.fill(layer.bn_scale.value);
  in.fill(layer.bn_shift.value);
  in.fill(layer.running_mean);
  in.fill(layer.running_var);
  layer.running_ready = ready;
}

}  // namespace

void save_checkpoint(const SpectralModel<float>& model, std::uint64_t seed, const std::filesystem::path& path) {
  json header;
  header["version"] = kCheckpointVersion;
  header["seed"] = seed;
  io::Bytes payload;
  std::visit(
      [&](const auto& m) {
        using M = std::decay_t<decltype(m)>;
        header["n"] = m.vertices();
        header["k"] = m.kept.k();
        header["kept"] = m.kept.indices();
        header["width"] = m.width;
        header["depth"] = m.depth;
        header["classes"] = m.classes;
        if constexpr (std::is_same_v<M, SpectralResNet<float>>) {
          header["arch"] = "resnet";
          header["batch_norm"] = m.batch_norm;
          header["stats_ready"] = m.embed.running_ready;
          for (const auto* layer : conv_layers(m)) write_layer(payload, *layer);
          put_values(payload, m.head_w.value);
          put_values(payload, m.head_b.value);
        } else {
          header["arch"] = "mlp";
          for (std::size_t i = 0; i < m.weights.size(); ++i) {
            put_values(payload, m.weights[i].value);
            put_values(payload, m.biases[i].value);
          }
        }
      },
      model);

  const std::string text = header.dump();
  io::Bytes out{'G', 'S', 'P', 'M'};
  io::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(text.size()));
  out.insert(out.end(), text.begin(), text.end());
  out.insert(out.end(), payload.begin(), payload.end());
  io::write_file(path, out, "model");
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  const io::Bytes bytes = io::read_file(path, "model");
  if (bytes.size() < 8 || std::string(bytes.begin(), bytes.begin() + 4) != "GSPM") {
    throw checkpoint_error(ErrorKind::format, "bad_magic", "'" + path.string() + "' is not a model checkpoint");
  }
  const std::size_t header_size = io::get_le<std::uint32_t>(bytes, 4);
  if (8 + header_size > bytes.size()) {
    throw checkpoint_error(ErrorKind::format, "payload_size_mismatch", "checkpoint header is truncated");
  }
  json header;
  try {
    header = json::parse(bytes.begin() + 8, bytes.begin() + 8 + static_cast<std::ptrdiff_t>(header_size));
  } catch (const json::exception& e) {
    throw checkpoint_error(ErrorKind::format, "bad_header", std::string("checkpoint header: ") + e.what());
  }

  Checkpoint ckpt;
  try {
    if (header.at("version").get<int>() != kCheckpointVersion) {
      throw checkpoint_error(ErrorKind::format, "bad_version", "unsupported checkpoint version");
    }
    ckpt.seed = header.at("seed").get<std::uint64_t>();
    const KeptSet kept(header.at("kept").get<std::vector<Index>>(), header.at("n").get<Index>());
    if (kept.k() != header.at("k").get<Index>()) {
      throw checkpoint_error(ErrorKind::format, "bad_header", "kept index count disagrees with k");
    }
    const auto width = header.at("width").get<Index>();
    const auto depth = header.at("depth").get<Index>();
    const auto classes = header.at("classes").get<Index>();
    Reader in(bytes, 8 + header_size);
    const std::string arch = header.at("arch").get<std::string>();
    if (arch == "resnet") {
      SpectralResNet<float> m(kept, width, depth, classes, header.at("batch_norm").get<bool>());
      const bool ready = header.at("stats_ready").get<bool>();
      for (auto* layer : conv_layers(m)) read_layer(in, *layer, ready);
      in.fill(m.head_w.value);
      in.fill(m.head_b.value);
      ckpt.model = std::move(m);
    } else if (arch == "mlp") {
      SpectralMlp<float> m(kept, width, depth, classes);
      for (std::size_t i = 0; i < m.weights.size(); ++i) {
        in.fill(m.weights[i].value);
        in.fill(m.biases[i].value);
      }
      ckpt.model = std::move(m);
    } else {
      throw checkpoint_error(ErrorKind::format, "bad_header", "unknown architecture '" + arch + "'");
    }
    if (!in.done()) {
      throw checkpoint_error(ErrorKind::format, "payload_size_mismatch", "checkpoint has trailing bytes");
    }
  } catch (const json::exception& e) {
    throw checkpoint_error(ErrorKind::format, "bad_header", std::string("checkpoint header: ") + e.what());
  }
  return ckpt;
}

}  // namespace gspnet

#include "speechyolo/checkpoint.hpp"

#include <cstring>
#include <sstream>

#include "speechyolo/error.hpp"
#include "speechyolo/io_util.hpp"

namespace speechyolo {

namespace {

constexpr char kMagic[8] = {'S', 'P', 'Y', 'O', 'L', 'O', 'C', 'K'};

nlohmann::json grid_json(const GridConfig& g) {
  return {{"duration", g.duration}, {"cells", g.cells}, {"boxes", g.boxes},
          {"keywords", g.keywords}};
}

GridConfig grid_from(const nlohmann::json& j) {
  return {j.at("duration").get<double>(), j.at("cells").get<int>(), j.at("boxes").get<int>(),
          j.at("keywords").get<int>()};
}

void append_floats(std::string& out, const std::vector<float>& v) {
  out.append(reinterpret_cast<const char*>(v.data()), v.size() * sizeof(float));
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  const Model& m = ckpt.model;
  nlohmann::json header;
  header["version"] = kCheckpointVersion;
  header["backbone"] = {{"name", m.spec().name},
                        {"conv_schedule", m.spec().conv_schedule},
                        {"fc_widths", m.spec().fc_widths},
                        {"input_bins", m.spec().input_bins},
                        {"input_frames", m.spec().input_frames}};
  if (m.head().kind == ModelHead::Kind::kDetection) {
    header["head"] = {{"kind", "detection"}, {"grid", grid_json(m.head().grid)}};
  } else {
    header["head"] = {{"kind", "classification"}, {"classes", m.head().classes}};
  }
  header["normalize_input"] = m.normalize_input();
  const FeatureConfig& f = ckpt.features;
  header["features"] = {{"sample_rate", f.sample_rate}, {"window_len", f.window_len},
                        {"hop_len", f.hop_len},         {"fft_size", f.fft_size},
                        {"log_compress", f.log_compress}, {"clip_duration", f.clip_duration}};
  header["lexicon"] = ckpt.lexicon.words();
  std::ostringstream rng;
  rng << m.rng();
  header["rng_state"] = rng.str();
  header["train_state"] = {{"epochs_done", ckpt.state.epochs_done},
                           {"adam_step", ckpt.state.adam.step}};
  header["metadata"] = ckpt.metadata;

  std::string payload;
  nlohmann::json tensors = nlohmann::json::array();
  for (const nn::Param* p : m.params()) {
    tensors.push_back({{"name", p->name}, {"size", p->value.size()}});
    append_floats(payload, p->value);
  }
  for (std::size_t i = 0; i < ckpt.state.adam.m.size(); ++i) {
    tensors.push_back({{"name", "adam.m." + std::to_string(i)}, {"size", ckpt.state.adam.m[i].size()}});
    append_floats(payload, ckpt.state.adam.m[i]);
    tensors.push_back({{"name", "adam.v." + std::to_string(i)}, {"size", ckpt.state.adam.v[i].size()}});
    append_floats(payload, ckpt.state.adam.v[i]);
  }
  header["tensors"] = tensors;

  const std::string head_text = header.dump();
  std::string out(kMagic, sizeof(kMagic));
  const std::uint64_t len = head_text.size();
  out.append(reinterpret_cast<const char*>(&len), sizeof(len));
  out += head_text;
  out += payload;
  write_file_atomic(path, out);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  const std::string bytes = read_file(path);
  const std::string where = path.string() + ": ";
  if (bytes.size() < 16 || std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) {
    throw FormatError(where + "not a checkpoint file");
  }
  std::uint64_t len = 0;
  std::memcpy(&len, bytes.data() + 8, sizeof(len));
  if (16 + len > bytes.size()) throw FormatError(where + "truncated header");

  try {
    const auto header = nlohmann::json::parse(bytes.substr(16, len));
    const int version = header.at("version").get<int>();
    if (version != kCheckpointVersion) {
      throw FormatError(where + "unsupported checkpoint version " + std::to_string(version));
    }
    const auto& b = header.at("backbone");
    BackboneSpec spec;
    spec.name = b.at("name").get<std::string>();
    spec.conv_schedule = b.at("conv_schedule").get<std::vector<int>>();
    spec.fc_widths = b.at("fc_widths").get<std::vector<int>>();
    spec.input_bins = b.at("input_bins").get<int>();
    spec.input_frames = b.at("input_frames").get<int>();

    const auto& h = header.at("head");
    ModelHead head = h.at("kind") == "detection"
                         ? ModelHead::detection(grid_from(h.at("grid")))
                         : ModelHead::classification(h.at("classes").get<int>());

    Checkpoint ckpt{Model(spec, head, 0, header.at("normalize_input").get<bool>()),
                    Lexicon(header.at("lexicon").get<std::vector<std::string>>()),
                    {},
                    {},
                    header.value("metadata", nlohmann::json::object())};
    const auto& f = header.at("features");
    ckpt.features.sample_rate = f.at("sample_rate").get<int>();
    ckpt.features.window_len = f.at("window_len").get<double>();
    ckpt.features.hop_len = f.at("hop_len").get<double>();
    ckpt.features.fft_size = f.at("fft_size").get<int>();
    ckpt.features.log_compress = f.at("log_compress").get<bool>();
    ckpt.features.clip_duration = f.at("clip_duration").get<double>();

    std::istringstream rng(header.at("rng_state").get<std::string>());
    rng >> ckpt.model.rng();

    const auto& ts = header.at("train_state");
    ckpt.state.epochs_done = ts.at("epochs_done").get<int>();
    ckpt.state.adam.step = ts.at("adam_step").get<std::int64_t>();

    std::size_t offset = 16 + len;
    auto read_tensor = [&](const nlohmann::json& t, std::vector<float>& dst) {
      const std::size_t n = t.at("size").get<std::size_t>();
      if (offset + n * sizeof(float) > bytes.size()) {
        throw FormatError(where + "truncated tensor data");
      }
      dst.resize(n);
      std::memcpy(dst.data(), bytes.data() + offset, n * sizeof(float));
      offset += n * sizeof(float);
    };

    const auto& tensors = header.at("tensors");
    auto params = ckpt.model.params();
    if (tensors.size() < params.size()) throw FormatError(where + "missing parameter tensors");
    std::size_t t = 0;
    for (nn::Param* p : params) {
      if (tensors[t].at("name") != p->name ||
          tensors[t].at("size").get<std::size_t>() != p->value.size()) {
        throw FormatError(where + "tensor '" + tensors[t].at("name").get<std::string>() +
                          "' does not match the model layout");
      }
      read_tensor(tensors[t++], p->value);
    }
    while (t + 1 < tensors.size()) {
      ckpt.state.adam.m.emplace_back();
      read_tensor(tensors[t++], ckpt.state.adam.m.back());
      ckpt.state.adam.v.emplace_back();
      read_tensor(tensors[t++], ckpt.state.adam.v.back());
    }
    return ckpt;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(where + "bad checkpoint header: " + e.what());
  }
}

}  // namespace speechyolo

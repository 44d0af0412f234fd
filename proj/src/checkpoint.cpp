#include "glada/checkpoint.hpp"

#include <bit>
#include <fstream>

namespace glada::nets {

namespace fs = std::filesystem;
using nlohmann::json;

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

void write_checkpoint(const NetParams& params, const json& config, const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());

  json manifest;
  manifest["role"] = to_string(params.role());
  manifest["dtype"] = "f32le";
  manifest["config"] = config;
  manifest["arrays"] = json::array();
  std::vector<float> flat;
  flat.reserve(params.value_count());
  for (const auto& a : params.arrays()) {
    manifest["arrays"].push_back({{"name", a.name}, {"shape", a.shape}, {"trainable", a.trainable}});
    flat.insert(flat.end(), a.values.begin(), a.values.end());
  }

  std::ofstream meta(dir / "net.json", std::ios::trunc);
  if (!meta) throw IoError("cannot write " + (dir / "net.json").string());
  meta << manifest.dump(2) << '\n';
  std::ofstream bin(dir / "weights.bin", std::ios::binary | std::ios::trunc);
  if (!bin) throw IoError("cannot write " + (dir / "weights.bin").string());
  bin.write(reinterpret_cast<const char*>(flat.data()),
            static_cast<std::streamsize>(flat.size() * sizeof(float)));
  if (!meta || !bin) throw IoError("checkpoint write failed in " + dir.string());
}

Checkpoint read_checkpoint(const fs::path& dir) {
  std::ifstream meta(dir / "net.json");
  if (!meta) throw IoError("missing checkpoint manifest " + (dir / "net.json").string());
  json manifest;
  try {
    meta >> manifest;
  } catch (const json::exception& e) {
    throw FormatError("net.json: " + std::string(e.what()));
  }
  if (manifest.value("dtype", std::string{}) != "f32le") throw FormatError("net.json: dtype must be f32le");

  Checkpoint ck;
  ck.params = NetParams(role_from_string(manifest.at("role").get<std::string>()));
  ck.config = manifest.value("config", json::object());
  std::size_t total = 0;
  for (const auto& a : manifest.at("arrays")) {
    auto& arr = ck.params.add(a.at("name").get<std::string>(),
                              a.at("shape").get<std::vector<std::size_t>>(), 0,
                              a.value("trainable", true));
    total += arr.values.size();
  }

  const fs::path wpath = dir / "weights.bin";
  std::error_code ec;
  const auto bytes = fs::file_size(wpath, ec);
  if (ec) throw IoError("missing checkpoint weights " + wpath.string());
  if (bytes != total * sizeof(float))
    throw FormatError("weights.bin size does not match the arrays declared in net.json");
  std::vector<float> flat(total);
  std::ifstream bin(wpath, std::ios::binary);
  bin.read(reinterpret_cast<char*>(flat.data()), static_cast<std::streamsize>(bytes));
  if (!bin) throw IoError("short read on " + wpath.string());

  std::size_t off = 0;
  for (auto& a : ck.params.arrays()) {
    for (auto& v : a.values) v = flat[off++];
  }
  if (!ck.params.finite()) throw NumericError("checkpoint contains non-finite weights");
  return ck;
}

void save(const Encoder& net, const fs::path& dir) {
  write_checkpoint(net.params(), json(net.config()), dir);
}

void save(const Classifier& net, const fs::path& dir) {
  write_checkpoint(net.params(),
                   json{{"feature_dim", net.feature_dim()}, {"num_classes", net.num_classes()}}, dir);
}

void save(const Discriminator& net, const fs::path& dir) {
  write_checkpoint(net.params(), json{{"feature_dim", net.feature_dim()}, {"hidden", net.hidden()}},
                   dir);
}

namespace {

Checkpoint read_role(const fs::path& dir, Role expected) {
  Checkpoint ck = read_checkpoint(dir);
  if (ck.params.role() != expected)
    throw FormatError("checkpoint in " + dir.string() + " holds a " +
                      std::string(to_string(ck.params.role())) + ", expected " +
                      std::string(to_string(expected)));
  return ck;
}

}  // namespace

Encoder load_encoder(const fs::path& dir) {
  Checkpoint ck = read_role(dir, Role::encoder);
  return Encoder(ck.config.get<EncoderConfig>(), std::move(ck.params));
}

Classifier load_classifier(const fs::path& dir) {
  Checkpoint ck = read_role(dir, Role::classifier);
  return Classifier(ck.config.at("feature_dim").get<std::size_t>(),
                    ck.config.at("num_classes").get<int>(), std::move(ck.params));
}

Discriminator load_discriminator(const fs::path& dir) {
  Checkpoint ck = read_role(dir, Role::discriminator);
  return Discriminator(ck.config.at("feature_dim").get<std::size_t>(),
                       ck.config.at("hidden").get<std::size_t>(), std::move(ck.params));
}

}  // namespace glada::nets

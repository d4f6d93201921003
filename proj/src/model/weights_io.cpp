#include <bit>
#include <cstring>

#include "seizure/model.hpp"

namespace seizure::model {

namespace {

constexpr char kMagic[8] = {'S', 'Z', 'C', 'N', 'N', 'W', 'T', '\0'};

void put_u32(std::string& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
void put_u64(std::string& out, uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
void put_f64(std::string& out, double v) { put_u64(out, std::bit_cast<uint64_t>(v)); }

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}
  uint64_t u(int width) {
    need(static_cast<size_t>(width));
    uint64_t v = 0;
    for (int i = 0; i < width; ++i) {
      v |= static_cast<uint64_t>(static_cast<uint8_t>(bytes_[pos_ + i])) << (8 * i);
    }
    pos_ += static_cast<size_t>(width);
    return v;
  }
  double f64() { return std::bit_cast<double>(u(8)); }
  std::string_view take(size_t n) {
    need(n);
    auto s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  size_t pos() const { return pos_; }

 private:
  void need(size_t n) const {
    if (pos_ + n > bytes_.size()) throw Error(ErrorCode::kChecksum, "weight file is truncated");
  }
  std::string_view bytes_;
  size_t pos_ = 0;
};

nlohmann::json layout_of(const nn::Network& net) {
  auto layers = nlohmann::json::array();
  for (size_t i = 0; i < net.size(); ++i) {
    nlohmann::json l;
    l["kind"] = std::string(nn::to_string(nn::kind_of(net.layer(i))));
    std::visit(
        [&](const auto& layer) {
          using T = std::decay_t<decltype(layer)>;
          if constexpr (std::is_same_v<T, nn::MaxPool>) l["pool_t"] = layer.pool_t;
          if constexpr (std::is_same_v<T, nn::Dropout>) l["rate"] = layer.rate;
          if constexpr (std::is_same_v<T, nn::BatchNorm>) {
            l["epsilon"] = layer.epsilon;
            l["momentum"] = layer.momentum;
          }
        },
        net.layer(i));
    layers.push_back(l);
  }
  return layers;
}

}  // namespace

std::string serialize(const TrainedModel& model) {
  nlohmann::json header;
  header["config"] = to_json(model.config);
  header["layout"] = layout_of(model.net);
  header["best_epoch"] = model.best_epoch;
  header["stopped_epoch"] = model.stopped_epoch;
  header["history_epochs"] = model.history.size();
  auto blocks = nlohmann::json::array();
  for (const nn::ParamBlock* b : model.net.all_blocks()) {
    blocks.push_back({{"name", b->name}, {"dims", b->dims}, {"count", b->values.size()}});
  }
  header["blocks"] = blocks;
  const std::string header_text = header.dump();

  std::string out(kMagic, sizeof(kMagic));
  put_u32(out, kWeightFormatVersion);
  put_u64(out, header_text.size());
  out += header_text;
  for (const nn::ParamBlock* b : model.net.all_blocks()) {
    for (double v : b->values) put_f64(out, v);
  }
  for (const auto& e : model.history) {
    put_u64(out, e.epoch);
    put_f64(out, e.train_loss);
    put_f64(out, e.val_loss);
  }
  const uint32_t crc = crc32({reinterpret_cast<const uint8_t*>(out.data()), out.size()});
  put_u32(out, crc);
  return out;
}

TrainedModel deserialize(std::string_view bytes) {
  Reader r(bytes);
  if (std::memcmp(r.take(sizeof(kMagic)).data(), kMagic, sizeof(kMagic)) != 0) {
    throw Error(ErrorCode::kParse, "not a weight file (bad magic)");
  }
  const auto version = static_cast<uint32_t>(r.u(4));
  if (version != kWeightFormatVersion) {
    throw Error(ErrorCode::kVersion, "unsupported weight file version " + std::to_string(version) +
                                         ", expected " + std::to_string(kWeightFormatVersion));
  }
  if (bytes.size() < 4) throw Error(ErrorCode::kChecksum, "weight file is truncated");
  const std::string_view body = bytes.substr(0, bytes.size() - 4);
  Reader tail(bytes.substr(bytes.size() - 4));
  const auto stored_crc = static_cast<uint32_t>(tail.u(4));
  if (crc32({reinterpret_cast<const uint8_t*>(body.data()), body.size()}) != stored_crc) {
    throw Error(ErrorCode::kChecksum, "weight file checksum mismatch (corrupt or truncated)");
  }

  const size_t header_len = r.u(8);
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(r.take(header_len));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParse, std::string("weight header: ") + e.what());
  }
  TrainedModel m = build(config_from_json(header.at("config")));
  if (header.at("layout") != layout_of(m.net)) {
    throw Error(ErrorCode::kParse, "weight file layout does not match its config");
  }
  auto blocks = m.net.all_blocks();
  const auto& meta = header.at("blocks");
  if (meta.size() != blocks.size()) throw Error(ErrorCode::kParse, "weight file block count mismatch");
  for (size_t b = 0; b < blocks.size(); ++b) {
    if (meta[b].at("count").get<size_t>() != blocks[b]->values.size()) {
      throw Error(ErrorCode::kParse, "weight block '" + blocks[b]->name + "' has the wrong size");
    }
    for (double& v : blocks[b]->values) v = r.f64();
  }
  const size_t n_epochs = header.at("history_epochs").get<size_t>();
  for (size_t i = 0; i < n_epochs; ++i) {
    EpochRecord e;
    e.epoch = r.u(8);
    e.train_loss = r.f64();
    e.val_loss = r.f64();
    m.history.push_back(e);
  }
  m.best_epoch = header.at("best_epoch").get<size_t>();
  m.stopped_epoch = header.at("stopped_epoch").get<size_t>();
  if (r.pos() != body.size()) throw Error(ErrorCode::kParse, "trailing bytes in weight file");
  return m;
}

void save(const TrainedModel& model, const std::filesystem::path& path) {
  write_file_atomic(path, serialize(model));
}

TrainedModel load(const std::filesystem::path& path) { return deserialize(read_file(path)); }

}  // namespace seizure::model

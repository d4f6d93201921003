#include <bit>
#include <cstring>

#include "seizure/common.hpp"
#include "seizure/eeg_data.hpp"

namespace seizure::eeg {

namespace {

constexpr char kMagic[8] = {'S', 'Z', 'R', 'E', 'C', 'S', '\0', '\0'};

void put_u64(std::string& out, uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

uint64_t get_u64(std::string_view bytes, size_t pos) {
  if (pos + 8 > bytes.size()) throw Error(ErrorCode::kChecksum, "record store is truncated");
  uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(static_cast<uint8_t>(bytes[pos + i])) << (8 * i);
  return v;
}

}  // namespace

std::string serialize_records(std::span<const EegRecord> records) {
  auto meta = nlohmann::json::array();
  for (const auto& r : records) {
    meta.push_back({{"patient_id", r.patient_id},
                    {"record_id", r.record_id},
                    {"channels", r.channels},
                    {"fs", r.fs},
                    {"onset_sample", r.onset_sample},
                    {"n_samples", r.n_samples()}});
  }
  const std::string header = meta.dump();
  std::string out(kMagic, sizeof(kMagic));
  put_u64(out, header.size());
  out += header;
  for (const auto& r : records) {
    for (double v : r.samples) put_u64(out, std::bit_cast<uint64_t>(v));
  }
  const uint32_t crc = crc32({reinterpret_cast<const uint8_t*>(out.data()), out.size()});
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((crc >> (8 * i)) & 0xff));
  return out;
}

std::vector<EegRecord> deserialize_records(std::string_view bytes) {
  if (bytes.size() < sizeof(kMagic) + 12 || std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) {
    throw Error(ErrorCode::kParse, "not a record store");
  }
  const std::string_view body = bytes.substr(0, bytes.size() - 4);
  uint32_t stored = 0;
  for (int i = 0; i < 4; ++i) stored |= static_cast<uint32_t>(static_cast<uint8_t>(bytes[body.size() + i])) << (8 * i);
  if (crc32({reinterpret_cast<const uint8_t*>(body.data()), body.size()}) != stored) {
    throw Error(ErrorCode::kChecksum, "record store checksum mismatch");
  }
  size_t pos = sizeof(kMagic);
  const uint64_t header_len = get_u64(body, pos);
  pos += 8;
  if (pos + header_len > body.size()) throw Error(ErrorCode::kChecksum, "record store is truncated");
  const auto meta = nlohmann::json::parse(body.substr(pos, header_len));
  pos += header_len;
  std::vector<EegRecord> records;
  for (const auto& m : meta) {
    EegRecord r;
    r.patient_id = m.at("patient_id").get<std::string>();
    r.record_id = m.at("record_id").get<std::string>();
    r.channels = m.at("channels").get<std::array<std::string, kNumChannels>>();
    r.fs = m.at("fs").get<int>();
    r.onset_sample = m.at("onset_sample").get<size_t>();
    const size_t n = m.at("n_samples").get<size_t>() * kNumChannels;
    r.samples.resize(n);
    for (size_t i = 0; i < n; ++i, pos += 8) r.samples[i] = std::bit_cast<double>(get_u64(body, pos));
    records.push_back(std::move(r));
  }
  if (pos != body.size()) throw Error(ErrorCode::kParse, "trailing bytes in record store");
  return records;
}

}  // namespace seizure::eeg

#include "dancenet/diff/checkpoint.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <istream>
#include <map>
#include <ostream>

#include "dancenet/error.hpp"

namespace dancenet::diff {

namespace {

template <typename UInt>
void put_le(std::ostream& out, UInt v) {
  std::array<char, sizeof(UInt)> bytes{};
  for (std::size_t i = 0; i < sizeof(UInt); ++i) bytes[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(bytes.data(), bytes.size());
}

template <typename UInt>
UInt get_le(std::istream& in, const char* what) {
  std::array<unsigned char, sizeof(UInt)> bytes{};
  in.read(reinterpret_cast<char*>(bytes.data()), bytes.size());
  if (in.gcount() != static_cast<std::streamsize>(bytes.size())) {
    fail(ErrorCode::kIo, std::string("checkpoint truncated while reading ") + what);
  }
  UInt v = 0;
  for (std::size_t i = 0; i < sizeof(UInt); ++i) v |= static_cast<UInt>(bytes[i]) << (8 * i);
  return v;
}

}  // namespace

void write_checkpoint(std::ostream& out, const std::vector<CheckpointRecord>& records) {
  out.write(kCheckpointMagic, sizeof(kCheckpointMagic));
  out.put(static_cast<char>(kCheckpointVersion));
  for (const auto& rec : records) {
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(rec.name.size()));
    out.write(rec.name.data(), static_cast<std::streamsize>(rec.name.size()));
    const auto& shape = rec.tensor.shape();
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(shape.size()));
    for (std::size_t d : shape) put_le<std::uint64_t>(out, d);
    for (double v : rec.tensor.values()) put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(v));
  }
  if (!out) fail(ErrorCode::kIo, "failed writing checkpoint");
}

std::vector<CheckpointRecord> read_checkpoint(std::istream& in) {
  char magic[sizeof(kCheckpointMagic)] = {};
  in.read(magic, sizeof(magic));
  if (in.gcount() != sizeof(magic) || std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0) {
    fail(ErrorCode::kVersion, "not a checkpoint file (bad magic)");
  }
  const int version = in.get();
  if (version != kCheckpointVersion) {
    fail(ErrorCode::kVersion, "unsupported checkpoint format version " + std::to_string(version));
  }
  std::vector<CheckpointRecord> records;
  while (in.peek() != std::char_traits<char>::eof()) {
    CheckpointRecord rec;
    const auto name_len = get_le<std::uint32_t>(in, "name length");
    if (name_len > (1u << 16)) fail(ErrorCode::kIo, "checkpoint record name too long");
    rec.name.resize(name_len);
    in.read(rec.name.data(), name_len);
    if (in.gcount() != static_cast<std::streamsize>(name_len)) {
      fail(ErrorCode::kIo, "checkpoint truncated while reading a name");
    }
    const auto rank = get_le<std::uint32_t>(in, "rank");
    if (rank > 8) fail(ErrorCode::kIo, "checkpoint record '" + rec.name + "' has rank " + std::to_string(rank));
    std::vector<std::size_t> shape(rank);
    std::size_t count = 1;
    for (auto& d : shape) {
      d = static_cast<std::size_t>(get_le<std::uint64_t>(in, "shape"));
      count *= d;
      if (count > (std::size_t{1} << 32)) fail(ErrorCode::kIo, "checkpoint record too large");
    }
    std::vector<double> values(count);
    for (double& v : values) v = std::bit_cast<double>(get_le<std::uint64_t>(in, "values"));
    rec.tensor = Tensor(std::move(shape), std::move(values));
    records.push_back(std::move(rec));
  }
  return records;
}

std::vector<CheckpointRecord> store_records(const ParamStore& store, bool with_adam) {
  std::vector<CheckpointRecord> out;
  for (std::size_t i = 0; i < store.size(); ++i) out.push_back({store.name(i), store.value(i)});
  if (with_adam) {
    for (std::size_t i = 0; i < store.size(); ++i) {
      const AdamState& st = store.adam(i);
      out.push_back({"adam.m/" + store.name(i), st.first_moment});
      out.push_back({"adam.v/" + store.name(i), st.second_moment});
      out.push_back({"adam.steps/" + store.name(i), Tensor::scalar(static_cast<double>(st.steps))});
    }
  }
  return out;
}

void load_store_records(ParamStore& store, const std::vector<CheckpointRecord>& records) {
  std::map<std::string, const Tensor*, std::less<>> by_name;
  for (const auto& rec : records) by_name[rec.name] = &rec.tensor;
  auto copy_into = [](Tensor& dst, const Tensor& src, const std::string& name) {
    if (dst.shape() != src.shape()) {
      fail(ErrorCode::kVersion, "checkpoint tensor '" + name + "' has a different shape than the model");
    }
    dst = src;
  };
  for (std::size_t i = 0; i < store.size(); ++i) {
    const std::string& name = store.name(i);
    auto it = by_name.find(name);
    if (it == by_name.end()) fail(ErrorCode::kVersion, "checkpoint lacks parameter '" + name + "'");
    copy_into(store.value(i), *it->second, name);
    AdamState& st = store.adam(i);
    if (auto m = by_name.find("adam.m/" + name); m != by_name.end()) copy_into(st.first_moment, *m->second, m->first);
    if (auto v = by_name.find("adam.v/" + name); v != by_name.end()) copy_into(st.second_moment, *v->second, v->first);
    if (auto s = by_name.find("adam.steps/" + name); s != by_name.end()) {
      st.steps = static_cast<std::uint64_t>(s->second->item());
    }
  }
}

}  // namespace dancenet::diff

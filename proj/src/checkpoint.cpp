#include "mmpoint/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include <json.hpp>

#include "mmpoint/hashing.hpp"

static_assert(std::endian::native == std::endian::little,
              "checkpoint encoding assumes a little-endian host");

namespace mmpoint {

using nlohmann::json;

static constexpr char kMagic[8] = {'M', 'M', 'P', 'C', 'K', 'P', 'T', '1'};

std::uint64_t ParamStore::value_hash() const {
  Fnv64 h;
  for (const auto& e : entries) {
    h.update(e.name.data(), e.name.size());
    for (double d : e.value.data) {
      float f = static_cast<float>(d);
      h.update(&f, sizeof(f));
    }
  }
  return h.digest();
}

static void write_block(std::ofstream& f, const Tensor& t) {
  std::vector<float> buf(static_cast<size_t>(t.size()));
  for (size_t i = 0; i < buf.size(); ++i) buf[i] = static_cast<float>(t.data[i]);
  f.write(reinterpret_cast<const char*>(buf.data()),
          static_cast<std::streamsize>(buf.size() * sizeof(float)));
}

static void read_block(std::ifstream& f, Tensor& t) {
  std::vector<float> buf(static_cast<size_t>(t.size()));
  f.read(reinterpret_cast<char*>(buf.data()),
         static_cast<std::streamsize>(buf.size() * sizeof(float)));
  if (!f) throw std::runtime_error("checkpoint: truncated parameter block");
  for (size_t i = 0; i < buf.size(); ++i) t.data[i] = static_cast<double>(buf[i]);
}

void save_checkpoint(const std::string& path, const ParamStore& store, const json& extra) {
  json header;
  header["version"] = 1;
  header["params"] = json::array();
  for (const auto& e : store.entries)
    header["params"].push_back({{"name", e.name}, {"shape", e.value.shape}});
  header["extra"] = extra;

  std::string hs = header.dump();
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("checkpoint: cannot open for writing: " + path);
  f.write(kMagic, 8);
  std::uint64_t len = hs.size();
  f.write(reinterpret_cast<const char*>(&len), sizeof(len));
  f.write(hs.data(), static_cast<std::streamsize>(hs.size()));
  for (const auto& e : store.entries) {
    write_block(f, e.value);
    write_block(f, e.m);
    write_block(f, e.v);
  }
  if (!f) throw std::runtime_error("checkpoint: write failed: " + path);
}

static json read_header(std::ifstream& f, const std::string& path) {
  char magic[8];
  f.read(magic, 8);
  if (!f || std::memcmp(magic, kMagic, 8) != 0)
    throw std::runtime_error("checkpoint: bad magic in " + path);
  std::uint64_t len = 0;
  f.read(reinterpret_cast<char*>(&len), sizeof(len));
  if (!f || len > (1ULL << 30)) throw std::runtime_error("checkpoint: bad header length");
  std::string hs(len, '\0');
  f.read(hs.data(), static_cast<std::streamsize>(len));
  if (!f) throw std::runtime_error("checkpoint: truncated header");
  json header = json::parse(hs);
  if (header.value("version", 0) != 1)
    throw std::runtime_error("checkpoint: unsupported version");
  return header;
}

json read_checkpoint_metadata(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("checkpoint: cannot open: " + path);
  return read_header(f, path).at("extra");
}

json load_checkpoint(const std::string& path, ParamStore& store) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("checkpoint: cannot open: " + path);
  json header = read_header(f, path);

  const auto& plist = header.at("params");
  if (store.entries.empty()) {
    for (const auto& p : plist) {
      std::vector<int> shape = p.at("shape").get<std::vector<int>>();
      store.add(p.at("name").get<std::string>(), Tensor::zeros(shape));
    }
  } else {
    if (plist.size() != store.entries.size())
      throw std::runtime_error("checkpoint: parameter count mismatch (file has " +
                               std::to_string(plist.size()) + ", model has " +
                               std::to_string(store.entries.size()) + ")");
    for (size_t i = 0; i < store.entries.size(); ++i) {
      const auto& p = plist[i];
      const auto& e = store.entries[i];
      std::vector<int> shape = p.at("shape").get<std::vector<int>>();
      if (p.at("name").get<std::string>() != e.name || shape != e.value.shape)
        throw std::runtime_error("checkpoint: dimension mismatch at '" + e.name +
                                 "' (file: " + p.at("name").get<std::string>() + " " +
                                 Tensor::zeros(shape).shape_str() + ", model: " +
                                 e.value.shape_str() + ")");
    }
  }
  for (auto& e : store.entries) {
    read_block(f, e.value);
    read_block(f, e.m);
    read_block(f, e.v);
  }
  return header.at("extra");
}

}  // namespace mmpoint

#include "spectral/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>

namespace spectral {

namespace {

constexpr char kMagic[4] = {'S', 'D', 'C', '1'};

template <typename T>
void write_le(std::ofstream& out, T v) {
  // x86-64 is little-endian; write the native representation.
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_le(std::ifstream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  return v;
}

}  // namespace

void save_checkpoint(const ParameterSet& params, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(out.good(), "checkpoint: cannot open for writing: " + path);
  out.write(kMagic, 4);
  write_le<std::uint32_t>(out, static_cast<std::uint32_t>(params.entries().size()));
  for (const auto& p : params.entries()) {
    write_le<std::uint16_t>(out, static_cast<std::uint16_t>(p->name.size()));
    out.write(p->name.data(), static_cast<std::streamsize>(p->name.size()));
    write_le<std::uint8_t>(out, p->trainable ? 1 : 0);
    write_le<std::uint8_t>(out, static_cast<std::uint8_t>(p->value.ndim()));
    for (auto e : p->value.shape()) write_le<std::uint64_t>(out, e);
    out.write(reinterpret_cast<const char*>(p->value.data()),
              static_cast<std::streamsize>(p->value.size() * sizeof(double)));
  }
  require(out.good(), "checkpoint: write failed: " + path);
  out.close();

  std::ofstream man(path + ".manifest", std::ios::trunc);
  require(man.good(), "checkpoint: cannot open manifest: " + path);
  for (const auto& p : params.entries()) {
    man << p->name << '\t';
    for (std::size_t i = 0; i < p->value.ndim(); ++i) {
      if (i) man << 'x';
      man << p->value.shape()[i];
    }
    man << '\t' << (p->trainable ? "trainable" : "frozen") << '\n';
  }
}

void load_checkpoint(ParameterSet& params, const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), "checkpoint: cannot open: " + path);
  char magic[4];
  in.read(magic, 4);
  require(in.good() && std::memcmp(magic, kMagic, 4) == 0,
          "checkpoint: bad magic in " + path);
  auto count = read_le<std::uint32_t>(in);
  require(count == params.entries().size(),
          "checkpoint: record count mismatch in " + path);
  for (std::uint32_t r = 0; r < count; ++r) {
    auto name_len = read_le<std::uint16_t>(in);
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    read_le<std::uint8_t>(in);  // trainable flag; current flags kept
    auto ndim = read_le<std::uint8_t>(in);
    std::vector<std::size_t> shape(ndim);
    for (auto& e : shape) e = read_le<std::uint64_t>(in);
    auto p = params.at(name);
    require(p->value.shape() == shape,
            "checkpoint: shape mismatch for " + name);
    in.read(reinterpret_cast<char*>(p->value.data()),
            static_cast<std::streamsize>(p->value.size() * sizeof(double)));
    require(in.good(), "checkpoint: truncated record for " + name);
  }
}

}  // namespace spectral

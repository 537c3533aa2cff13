#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

// Minimal NPY (format 1.0) reader/writer. Only the two element encodings the
// library stores are supported: little-endian float32 and uint8.
namespace evfuse::npy {

enum class Dtype { Float32, UInt8 };

std::size_t dtype_size(Dtype dtype) noexcept;

struct Header {
  Dtype dtype = Dtype::Float32;
  std::vector<std::size_t> shape;
};

/// Magic, version, length field and padded dictionary, byte-identical to what
/// numpy's `np.save` emits for the same dtype and shape.
std::string encode_header(Dtype dtype, std::span<const std::size_t> shape);

/// Parses a header from the start of `bytes`. Returns the header and sets
/// `payload_offset` to the first payload byte.
Header decode_header(std::span<const std::byte> bytes, std::size_t& payload_offset);

struct Array {
  Header header;
  std::vector<std::byte> payload;
};

Array read(const std::filesystem::path& path);
void write(const std::filesystem::path& path, Dtype dtype,
           std::span<const std::size_t> shape, std::span<const std::byte> payload);

struct Float32Array {
  std::vector<std::size_t> shape;
  std::vector<float> data;
};

struct UInt8Array {
  std::vector<std::size_t> shape;
  std::vector<std::uint8_t> data;
};

Float32Array read_f32(const std::filesystem::path& path);
UInt8Array read_u8(const std::filesystem::path& path);
void write_f32(const std::filesystem::path& path, std::span<const std::size_t> shape,
               std::span<const float> data);
void write_u8(const std::filesystem::path& path, std::span<const std::size_t> shape,
              std::span<const std::uint8_t> data);

}  // namespace evfuse::npy

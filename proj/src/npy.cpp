#include "evfuse/npy.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cctype>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>

#include "evfuse/errors.hpp"

namespace evfuse::npy {

static_assert(std::endian::native == std::endian::little,
              "payloads are written in host order and must be little-endian");

namespace {

constexpr std::array<unsigned char, 6> kMagic = {0x93, 'N', 'U', 'M', 'P', 'Y'};
constexpr std::size_t kPrefixLen = 8;  // magic + version
constexpr std::size_t kAlign = 64;
constexpr std::size_t kGrowthAxisDigits = 21;

std::string descr_of(Dtype dtype) {
  return dtype == Dtype::Float32 ? "<f4" : "|u1";
}

// Cursor over the ASCII dictionary of the header.
class DictParser {
 public:
  explicit DictParser(std::string_view text) : text_(text) {}

  Header parse() {
    Header out;
    bool have_descr = false, have_order = false, have_shape = false;
    expect('{');
    while (true) {
      skip_ws();
      if (peek() == '}') {
        ++pos_;
        break;
      }
      const std::string key = quoted();
      expect(':');
      skip_ws();
      if (key == "descr") {
        out.dtype = dtype_from(quoted());
        have_descr = true;
      } else if (key == "fortran_order") {
        if (word() != "False") {
          throw UnsupportedEncodingError("npy: fortran-order payloads are not supported");
        }
        have_order = true;
      } else if (key == "shape") {
        out.shape = tuple();
        have_shape = true;
      } else {
        throw FormatError("npy: unexpected header key '" + key + "'");
      }
      skip_ws();
      if (peek() == ',') ++pos_;
    }
    if (!have_descr || !have_order || !have_shape) {
      throw FormatError("npy: header dictionary is missing a required key");
    }
    return out;
  }

 private:
  char peek() const {
    if (pos_ >= text_.size()) throw FormatError("npy: truncated header dictionary");
    return text_[pos_];
  }
  void skip_ws() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }
  void expect(char c) {
    skip_ws();
    if (peek() != c) throw FormatError(std::string("npy: expected '") + c + "' in header");
    ++pos_;
  }
  std::string quoted() {
    skip_ws();
    const char q = peek();
    if (q != '\'' && q != '"') throw FormatError("npy: expected quoted string in header");
    const auto end = text_.find(q, pos_ + 1);
    if (end == std::string_view::npos) throw FormatError("npy: unterminated string in header");
    std::string s(text_.substr(pos_ + 1, end - pos_ - 1));
    pos_ = end + 1;
    return s;
  }
  std::string word() {
    skip_ws();
    const auto start = pos_;
    while (pos_ < text_.size() && std::isalpha(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    return std::string(text_.substr(start, pos_ - start));
  }
  std::vector<std::size_t> tuple() {
    std::vector<std::size_t> dims;
    expect('(');
    while (true) {
      skip_ws();
      if (peek() == ')') {
        ++pos_;
        return dims;
      }
      if (!std::isdigit(static_cast<unsigned char>(peek()))) {
        throw FormatError("npy: malformed shape tuple");
      }
      std::size_t v = 0;
      while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) {
        const std::size_t digit = static_cast<std::size_t>(text_[pos_] - '0');
        if (v > (std::numeric_limits<std::size_t>::max() - digit) / 10) {
          throw FormatError("npy: shape dimension overflows");
        }
        v = v * 10 + digit;
        ++pos_;
      }
      dims.push_back(v);
      skip_ws();
      if (peek() == ',') ++pos_;
    }
  }
  static Dtype dtype_from(const std::string& descr) {
    if (descr == "<f4") return Dtype::Float32;
    if (descr == "|u1" || descr == "<u1" || descr == "u1") return Dtype::UInt8;
    throw UnsupportedEncodingError("npy: unsupported dtype '" + descr + "'");
  }

  std::string_view text_;
  std::size_t pos_ = 0;
};

std::size_t element_count(std::span<const std::size_t> shape) {
  std::size_t n = 1;
  for (auto d : shape) {
    if (d != 0 && n > std::numeric_limits<std::size_t>::max() / d) {
      throw CorruptionError("npy: element count overflows");
    }
    n *= d;
  }
  return n;
}

}  // namespace

std::size_t dtype_size(Dtype dtype) noexcept {
  return dtype == Dtype::Float32 ? 4 : 1;
}

std::string encode_header(Dtype dtype, std::span<const std::size_t> shape) {
  std::string dict = "{'descr': '" + descr_of(dtype) + "', 'fortran_order': False, 'shape': (";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i > 0) dict += ", ";
    dict += std::to_string(shape[i]);
  }
  if (shape.size() == 1) dict += ",";
  dict += "), }";
  // numpy reserves room for the leading axis to grow in place.
  if (!shape.empty()) {
    dict.append(kGrowthAxisDigits - std::to_string(shape[0]).size(), ' ');
  }
  const std::size_t hlen = dict.size() + 1;
  const std::size_t padlen = kAlign - ((kPrefixLen + 2 + hlen) % kAlign);
  const std::size_t total = hlen + padlen;
  if (total > 0xFFFF) throw FormatError("npy: header too long for format 1.0");

  std::string out;
  out.reserve(kPrefixLen + 2 + total);
  for (auto c : kMagic) out.push_back(static_cast<char>(c));
  out.push_back('\x01');
  out.push_back('\x00');
  out.push_back(static_cast<char>(total & 0xFF));
  out.push_back(static_cast<char>((total >> 8) & 0xFF));
  out += dict;
  out.append(padlen, ' ');
  out.push_back('\n');
  return out;
}

Header decode_header(std::span<const std::byte> bytes, std::size_t& payload_offset) {
  if (bytes.size() < kPrefixLen + 2) throw FormatError("npy: file too short for header");
  for (std::size_t i = 0; i < kMagic.size(); ++i) {
    if (static_cast<unsigned char>(bytes[i]) != kMagic[i]) throw FormatError("npy: bad magic");
  }
  const auto major = static_cast<unsigned>(bytes[6]);
  std::size_t len_bytes = 0;
  if (major == 1) {
    len_bytes = 2;
  } else if (major == 2 || major == 3) {
    len_bytes = 4;
  } else {
    throw FormatError("npy: unknown format version " + std::to_string(major));
  }
  if (bytes.size() < kPrefixLen + len_bytes) throw FormatError("npy: truncated header length");
  std::size_t hlen = 0;
  for (std::size_t i = 0; i < len_bytes; ++i) {
    hlen |= static_cast<std::size_t>(static_cast<unsigned char>(bytes[kPrefixLen + i])) << (8 * i);
  }
  const std::size_t start = kPrefixLen + len_bytes;
  if (bytes.size() < start + hlen) throw FormatError("npy: truncated header");
  std::string_view text(reinterpret_cast<const char*>(bytes.data() + start), hlen);
  if (text.empty() || text.back() != '\n') throw FormatError("npy: header not newline-terminated");
  payload_offset = start + hlen;
  return DictParser(text).parse();
}

Array read(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  std::vector<char> raw((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  std::span<const std::byte> bytes(reinterpret_cast<const std::byte*>(raw.data()), raw.size());

  std::size_t offset = 0;
  Array out;
  out.header = decode_header(bytes, offset);
  const std::size_t expected = element_count(out.header.shape) * dtype_size(out.header.dtype);
  const std::size_t actual = bytes.size() - offset;
  if (actual != expected) {
    throw CorruptionError("npy: payload holds " + std::to_string(actual) + " bytes, shape needs " +
                          std::to_string(expected));
  }
  out.payload.assign(bytes.begin() + static_cast<std::ptrdiff_t>(offset), bytes.end());
  return out;
}

void write(const std::filesystem::path& path, Dtype dtype, std::span<const std::size_t> shape,
           std::span<const std::byte> payload) {
  if (element_count(shape) * dtype_size(dtype) != payload.size()) {
    throw ContractError("npy: payload size does not match shape");
  }
  const std::string header = encode_header(dtype, shape);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  out.write(reinterpret_cast<const char*>(payload.data()), static_cast<std::streamsize>(payload.size()));
  out.flush();
  if (!out) throw IoError("write to '" + path.string() + "' failed");
}

Float32Array read_f32(const std::filesystem::path& path) {
  Array raw = read(path);
  if (raw.header.dtype != Dtype::Float32) {
    throw UnsupportedEncodingError("npy: expected float32 payload in '" + path.string() + "'");
  }
  Float32Array out;
  out.shape = std::move(raw.header.shape);
  out.data.resize(raw.payload.size() / 4);
  std::memcpy(out.data.data(), raw.payload.data(), raw.payload.size());
  return out;
}

UInt8Array read_u8(const std::filesystem::path& path) {
  Array raw = read(path);
  if (raw.header.dtype != Dtype::UInt8) {
    throw UnsupportedEncodingError("npy: expected uint8 payload in '" + path.string() + "'");
  }
  UInt8Array out;
  out.shape = std::move(raw.header.shape);
  out.data.resize(raw.payload.size());
  std::memcpy(out.data.data(), raw.payload.data(), raw.payload.size());
  return out;
}

void write_f32(const std::filesystem::path& path, std::span<const std::size_t> shape,
               std::span<const float> data) {
  write(path, Dtype::Float32, shape, std::as_bytes(data));
}

void write_u8(const std::filesystem::path& path, std::span<const std::size_t> shape,
              std::span<const std::uint8_t> data) {
  write(path, Dtype::UInt8, shape, std::as_bytes(data));
}

}  // namespace evfuse::npy

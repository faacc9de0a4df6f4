#include "dfa/io.hpp"

#include <cctype>
#include <cmath>
#include <fstream>
#include <iterator>
#include <sstream>

#include "binary_io.hpp"
#include "dfa/errors.hpp"

namespace dfa {

namespace {

constexpr std::uint32_t kIdxImageMagic = 0x00000803;
constexpr std::uint32_t kIdxLabelMagic = 0x00000801;

[[noreturn]] void fail(const std::string& source, std::size_t offset, const std::string& what) {
  throw FormatError(source + ": byte offset " + std::to_string(offset) + ": " + what);
}

std::uint32_t be32_at(const std::vector<std::uint8_t>& bytes, std::size_t offset,
                      const std::string& source, const char* field) {
  if (bytes.size() < offset + 4) fail(source, offset, std::string("truncated header (") + field + ")");
  return detail::u32_from_be(bytes.data() + offset);
}

void check_magic(std::uint32_t magic, std::uint32_t expected, const std::string& source) {
  if (magic != expected) {
    std::ostringstream msg;
    msg << std::hex << "bad IDX magic 0x" << magic << ", expected 0x" << expected;
    if (magic == kIdxLabelMagic) msg << " (this is a label file)";
    if (magic == kIdxImageMagic) msg << " (this is an image file)";
    fail(source, 0, msg.str());
  }
}

// Netpbm header tokenizer: whitespace separated, '#' comments to end of line.
class PnmHeader {
 public:
  PnmHeader(const std::vector<std::uint8_t>& bytes, const std::string& source)
      : bytes_(bytes), source_(source) {}

  std::string token() {
    skip_space_and_comments();
    const std::size_t start = pos_;
    while (pos_ < bytes_.size() && !std::isspace(bytes_[pos_]) && bytes_[pos_] != '#') ++pos_;
    if (pos_ == start) fail(source_, pos_, "truncated netpbm header");
    return std::string(bytes_.begin() + static_cast<std::ptrdiff_t>(start),
                       bytes_.begin() + static_cast<std::ptrdiff_t>(pos_));
  }

  long number(const char* field) {
    const std::size_t at = pos_;
    const std::string t = token();
    for (char c : t) {
      if (!std::isdigit(static_cast<unsigned char>(c))) {
        fail(source_, at, std::string("bad ") + field + " '" + t + "'");
      }
    }
    if (t.size() > 9) fail(source_, at, std::string(field) + " too large");
    return std::stol(t);
  }

  // Exactly one whitespace byte separates maxval from the raster.
  std::size_t raster_start() {
    if (pos_ >= bytes_.size() || !std::isspace(bytes_[pos_])) {
      fail(source_, pos_, "missing whitespace before raster");
    }
    return pos_ + 1;
  }

 private:
  void skip_space_and_comments() {
    while (pos_ < bytes_.size()) {
      if (std::isspace(bytes_[pos_])) {
        ++pos_;
      } else if (bytes_[pos_] == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else {
        break;
      }
    }
  }

  const std::vector<std::uint8_t>& bytes_;
  const std::string& source_;
  std::size_t pos_ = 0;
};

void write_bytes(const std::filesystem::path& path, const std::string& data) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.write(data.data(), static_cast<std::streamsize>(data.size()));
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

}  // namespace

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), {});
}

std::vector<IntegerImage> parse_idx_images(const std::vector<std::uint8_t>& bytes,
                                           const std::string& source, std::size_t limit) {
  check_magic(be32_at(bytes, 0, source, "magic"), kIdxImageMagic, source);
  const std::uint64_t count = be32_at(bytes, 4, source, "image count");
  const std::uint64_t rows = be32_at(bytes, 8, source, "rows");
  const std::uint64_t cols = be32_at(bytes, 12, source, "cols");
  if (rows == 0 || cols == 0 || rows > (1u << 15) || cols > (1u << 15)) {
    fail(source, 8, "image dimensions " + std::to_string(rows) + "x" + std::to_string(cols) +
                        " out of range");
  }
  const std::uint64_t per_image = rows * cols;
  const std::uint64_t available = bytes.size() - 16;
  if (count > available / per_image || count * per_image != available) {
    fail(source, 16, "payload holds " + std::to_string(available) + " bytes, header declares " +
                         std::to_string(count) + " images of " + std::to_string(per_image) +
                         " bytes");
  }
  const ImageShape shape(static_cast<int>(cols), static_cast<int>(rows), 1);
  const std::size_t n = static_cast<std::size_t>(std::min<std::uint64_t>(count, limit));
  std::vector<IntegerImage> images;
  images.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto begin = bytes.begin() + static_cast<std::ptrdiff_t>(16 + i * per_image);
    images.emplace_back(shape, std::vector<std::uint8_t>(begin, begin + static_cast<std::ptrdiff_t>(per_image)));
  }
  return images;
}

std::vector<IntegerImage> load_idx_images(const std::filesystem::path& path, std::size_t limit) {
  return parse_idx_images(read_file(path), path.string(), limit);
}

std::vector<std::size_t> parse_idx_labels(const std::vector<std::uint8_t>& bytes,
                                          const std::string& source, std::size_t limit) {
  check_magic(be32_at(bytes, 0, source, "magic"), kIdxLabelMagic, source);
  const std::uint64_t count = be32_at(bytes, 4, source, "label count");
  if (count != bytes.size() - 8) {
    fail(source, 8, "payload holds " + std::to_string(bytes.size() - 8) +
                        " bytes, header declares " + std::to_string(count) + " labels");
  }
  const std::size_t n = static_cast<std::size_t>(std::min<std::uint64_t>(count, limit));
  std::vector<std::size_t> labels(n);
  for (std::size_t i = 0; i < n; ++i) labels[i] = bytes[8 + i];
  return labels;
}

std::vector<std::size_t> load_idx_labels(const std::filesystem::path& path, std::size_t limit) {
  return parse_idx_labels(read_file(path), path.string(), limit);
}

IntegerImage parse_pnm(const std::vector<std::uint8_t>& bytes, const std::string& source) {
  PnmHeader header(bytes, source);
  const std::string magic = header.token();
  int channels = 0;
  if (magic == "P5") channels = 1;
  else if (magic == "P6") channels = 3;
  else fail(source, 0, "unsupported netpbm magic '" + magic + "' (expected P5 or P6)");

  const long width = header.number("width");
  const long height = header.number("height");
  const long maxval = header.number("maxval");
  if (width < 1 || height < 1 || width > (1 << 15) || height > (1 << 15)) {
    fail(source, 0, "image dimensions out of range");
  }
  if (maxval != 255) fail(source, 0, "maxval " + std::to_string(maxval) + " != 255");
  const std::size_t start = header.raster_start();

  const ImageShape shape(static_cast<int>(width), static_cast<int>(height), channels);
  const std::size_t need = shape.size();
  if (bytes.size() < start + need) {
    fail(source, bytes.size(), "truncated raster: expected " + std::to_string(need) +
                                   " bytes, got " + std::to_string(bytes.size() - start));
  }
  const auto begin = bytes.begin() + static_cast<std::ptrdiff_t>(start);
  return IntegerImage(shape, std::vector<std::uint8_t>(begin, begin + static_cast<std::ptrdiff_t>(need)));
}

IntegerImage read_image(const std::filesystem::path& path) {
  return parse_pnm(read_file(path), path.string());
}

void write_pnm(const IntegerImage& image, std::ostream& out) {
  const ImageShape& s = image.shape();
  out << (s.channels == 1 ? "P5" : "P6") << '\n' << s.width << ' ' << s.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(image.values().data()),
            static_cast<std::streamsize>(image.size()));
}

void write_image(const IntegerImage& image, const std::filesystem::path& path) {
  std::ostringstream buf(std::ios::binary);
  write_pnm(image, buf);
  write_bytes(path, buf.str());
}

RealImage parse_real_tensor(const std::vector<std::uint8_t>& bytes, const std::string& source) {
  std::size_t eol = 0;
  while (eol < bytes.size() && bytes[eol] != '\n') ++eol;
  if (eol == bytes.size()) fail(source, 0, "missing 'W H C' header line");
  std::istringstream header(std::string(bytes.begin(), bytes.begin() + static_cast<std::ptrdiff_t>(eol)));
  long w = 0, h = 0, c = 0;
  std::string extra;
  if (!(header >> w >> h >> c) || (header >> extra)) {
    fail(source, 0, "header must be 'W H C'");
  }
  if (w < 1 || h < 1 || w > (1 << 15) || h > (1 << 15) || (c != 1 && c != 3)) {
    fail(source, 0, "bad tensor dimensions " + std::to_string(w) + " " + std::to_string(h) + " " +
                        std::to_string(c));
  }
  const ImageShape shape(static_cast<int>(w), static_cast<int>(h), static_cast<int>(c));
  const std::size_t start = eol + 1;
  const std::size_t expected = 4 * shape.size();
  if (bytes.size() - start != expected) {
    fail(source, start, "payload is " + std::to_string(bytes.size() - start) +
                            " bytes, expected " + std::to_string(expected));
  }
  std::vector<double> values(shape.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    const float f = detail::f32_from_le(bytes.data() + start + 4 * i);
    if (!std::isfinite(f)) fail(source, start + 4 * i, "non-finite value");
    values[i] = f;
  }
  return RealImage(shape, std::move(values));
}

RealImage read_real_tensor(const std::filesystem::path& path) {
  return parse_real_tensor(read_file(path), path.string());
}

void write_real_tensor(const RealImage& image, std::ostream& out) {
  const ImageShape& s = image.shape();
  out << s.width << ' ' << s.height << ' ' << s.channels << '\n';
  for (double v : image.values()) detail::write_f32_le(out, static_cast<float>(v));
}

void write_real_tensor(const RealImage& image, const std::filesystem::path& path) {
  std::ostringstream buf(std::ios::binary);
  write_real_tensor(image, buf);
  write_bytes(path, buf.str());
}

}  // namespace dfa

#ifndef DFA_IO_HPP
#define DFA_IO_HPP

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <limits>
#include <string>
#include <vector>

#include "dfa/image.hpp"

namespace dfa {

// All readers throw FormatError (with path and byte offset) on malformed
// input and std::runtime_error when a file cannot be opened.

/// IDX image file (magic 0x00000803, big-endian counts: images, rows, cols,
/// then one byte per pixel). Returns single-channel images, row-major.
/// At most `limit` images are decoded; the header must still be consistent
/// with the file size.
std::vector<IntegerImage> load_idx_images(const std::filesystem::path& path,
                                          std::size_t limit = std::numeric_limits<std::size_t>::max());
std::vector<IntegerImage> parse_idx_images(const std::vector<std::uint8_t>& bytes,
                                           const std::string& source,
                                           std::size_t limit = std::numeric_limits<std::size_t>::max());

/// IDX label file (magic 0x00000801).
std::vector<std::size_t> load_idx_labels(const std::filesystem::path& path,
                                         std::size_t limit = std::numeric_limits<std::size_t>::max());
std::vector<std::size_t> parse_idx_labels(const std::vector<std::uint8_t>& bytes,
                                          const std::string& source,
                                          std::size_t limit = std::numeric_limits<std::size_t>::max());

/// Binary netpbm: P5 (one channel) or P6 (three channels), maxval 255.
IntegerImage read_image(const std::filesystem::path& path);
IntegerImage parse_pnm(const std::vector<std::uint8_t>& bytes, const std::string& source);
void write_image(const IntegerImage& image, const std::filesystem::path& path);
void write_pnm(const IntegerImage& image, std::ostream& out);

/// Raw tensor: a text line "W H C\n" followed by W*H*C little-endian f32.
RealImage read_real_tensor(const std::filesystem::path& path);
RealImage parse_real_tensor(const std::vector<std::uint8_t>& bytes, const std::string& source);
void write_real_tensor(const RealImage& image, const std::filesystem::path& path);
void write_real_tensor(const RealImage& image, std::ostream& out);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);

}  // namespace dfa

#endif  // DFA_IO_HPP

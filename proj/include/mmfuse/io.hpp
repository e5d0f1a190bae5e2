#pragma once

#include <filesystem>
#include <string>
#include <variant>
#include <vector>

#include "mmfuse/image.hpp"

namespace mmfuse {

using AnyImage = std::variant<GrayImage, RgbImage>;

// Reads binary/ASCII PGM (P2/P5), PPM (P3/P6) or 8-bit PNG (gray or colour;
// alpha is dropped). PGM bit depth is derived from maxval.
AnyImage read_image(const std::filesystem::path& path);

// Gray input passes through; colour input is reduced to its saturation channel.
GrayImage read_gray_or_saturation(const std::filesystem::path& path);

void write_pgm(const std::filesystem::path& path, const GrayImage& image);
void write_ppm(const std::filesystem::path& path, const RgbImage& image);
void write_png(const std::filesystem::path& path, const GrayImage& image);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(const std::string& name) const;
};

// Comma-separated text with a header row. Fields may be double-quoted.
CsvTable read_csv(const std::filesystem::path& path);
CsvTable parse_csv(const std::string& text);
std::string format_csv(const CsvTable& table);

// Writes `content` to `path`, creating parent directories.
void write_text(const std::filesystem::path& path, const std::string& content);
std::string read_text(const std::filesystem::path& path);

}  // namespace mmfuse

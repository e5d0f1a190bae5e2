#include "mmfuse/io.hpp"

#include <png.h>

#include <cctype>
#include <fstream>
#include <sstream>

#include "mmfuse/error.hpp"
#include "mmfuse/preprocess.hpp"

namespace mmfuse {

namespace fs = std::filesystem;

namespace {

std::string lower_ext(const fs::path& p) {
  auto e = p.extension().string();
  for (auto& c : e) {
    c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  }
  return e;
}

// Reads the next whitespace-delimited header token, skipping '#' comments.
std::string pnm_token(std::istream& in) {
  std::string tok;
  int c = in.get();
  while (c != EOF) {
    if (c == '#') {
      while (c != EOF && c != '\n') {
        c = in.get();
      }
    } else if (std::isspace(c)) {
      if (!tok.empty()) {
        break;
      }
    } else {
      tok.push_back(static_cast<char>(c));
    }
    c = in.get();
  }
  return tok;
}

int pnm_int(std::istream& in, const fs::path& path) {
  const auto tok = pnm_token(in);
  try {
    std::size_t used = 0;
    const int v = std::stoi(tok, &used);
    if (used != tok.size()) {
      throw DataError("");
    }
    return v;
  } catch (const std::exception&) {
    throw DataError(path.string() + ": malformed PNM header");
  }
}

int depth_for_maxval(int maxval) {
  int bits = 1;
  while ((1 << bits) - 1 < maxval) {
    ++bits;
  }
  return bits;
}

AnyImage read_pnm(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw DataError("cannot open " + path.string());
  }
  const auto magic = pnm_token(in);
  if (magic != "P2" && magic != "P5" && magic != "P3" && magic != "P6") {
    throw DataError(path.string() + ": unsupported PNM type '" + magic + "'");
  }
  const int w = pnm_int(in, path);
  const int h = pnm_int(in, path);
  const int maxval = pnm_int(in, path);
  if (w < 1 || h < 1 || maxval < 1 || maxval > 65535) {
    throw DataError(path.string() + ": invalid PNM dimensions or maxval");
  }
  const bool color = magic == "P3" || magic == "P6";
  const bool binary = magic == "P5" || magic == "P6";
  const std::size_t channels = color ? 3 : 1;
  const std::size_t count = static_cast<std::size_t>(w) * h * channels;
  std::vector<std::uint16_t> samples(count);
  if (binary) {
    const bool wide = maxval > 255;
    std::vector<unsigned char> raw(count * (wide ? 2 : 1));
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (in.gcount() != static_cast<std::streamsize>(raw.size())) {
      throw DataError(path.string() + ": truncated pixel data");
    }
    for (std::size_t i = 0; i < count; ++i) {
      samples[i] = wide ? static_cast<std::uint16_t>((raw[2 * i] << 8) | raw[2 * i + 1]) : raw[i];
    }
  } else {
    for (std::size_t i = 0; i < count; ++i) {
      samples[i] = static_cast<std::uint16_t>(pnm_int(in, path));
    }
  }
  for (auto s : samples) {
    if (s > maxval) {
      throw DataError(path.string() + ": sample exceeds maxval");
    }
  }
  if (!color) {
    return GrayImage(w, h, depth_for_maxval(maxval), std::move(samples));
  }
  if (maxval != 255) {
    throw DataError(path.string() + ": colour images must be 8-bit");
  }
  RgbImage rgb{w, h, {}};
  rgb.pixels.resize(static_cast<std::size_t>(w) * h);
  for (std::size_t i = 0; i < rgb.pixels.size(); ++i) {
    rgb.pixels[i] = {static_cast<std::uint8_t>(samples[3 * i]),
                     static_cast<std::uint8_t>(samples[3 * i + 1]),
                     static_cast<std::uint8_t>(samples[3 * i + 2])};
  }
  return rgb;
}

AnyImage read_png(const fs::path& path) {
  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&img, path.string().c_str())) {
    throw DataError(path.string() + ": " + img.message);
  }
  const bool color = (img.format & PNG_FORMAT_FLAG_COLOR) != 0;
  img.format = color ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  std::vector<png_byte> buf(PNG_IMAGE_SIZE(img));
  if (!png_image_finish_read(&img, nullptr, buf.data(), 0, nullptr)) {
    const std::string msg = img.message;
    png_image_free(&img);
    throw DataError(path.string() + ": " + msg);
  }
  const int w = static_cast<int>(img.width);
  const int h = static_cast<int>(img.height);
  if (!color) {
    return GrayImage(w, h, 8, std::vector<GrayImage::Pixel>(buf.begin(), buf.end()));
  }
  RgbImage rgb{w, h, {}};
  rgb.pixels.resize(static_cast<std::size_t>(w) * h);
  for (std::size_t i = 0; i < rgb.pixels.size(); ++i) {
    rgb.pixels[i] = {buf[3 * i], buf[3 * i + 1], buf[3 * i + 2]};
  }
  return rgb;
}

std::string quote_field(const std::string& f) {
  if (f.find_first_of(",\"\n") == std::string::npos) {
    return f;
  }
  std::string out = "\"";
  for (char c : f) {
    if (c == '"') {
      out += '"';
    }
    out += c;
  }
  return out + "\"";
}

}  // namespace

AnyImage read_image(const fs::path& path) {
  const auto ext = lower_ext(path);
  if (ext == ".png") {
    return read_png(path);
  }
  if (ext == ".pgm" || ext == ".ppm" || ext == ".pnm") {
    return read_pnm(path);
  }
  throw DataError(path.string() + ": unsupported image format '" + ext + "'");
}

GrayImage read_gray_or_saturation(const fs::path& path) {
  auto img = read_image(path);
  if (auto* rgb = std::get_if<RgbImage>(&img)) {
    return saturation_channel(*rgb);
  }
  return std::get<GrayImage>(std::move(img));
}

void write_pgm(const fs::path& path, const GrayImage& image) {
  if (path.has_parent_path()) {
    fs::create_directories(path.parent_path());
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw DataError("cannot write " + path.string());
  }
  const auto maxval = image.max_value();
  out << "P5\n" << image.width() << ' ' << image.height() << '\n' << maxval << '\n';
  for (auto v : image.pixels()) {
    if (maxval > 255) {
      out.put(static_cast<char>(v >> 8));
    }
    out.put(static_cast<char>(v & 0xFF));
  }
}

void write_ppm(const fs::path& path, const RgbImage& image) {
  if (path.has_parent_path()) {
    fs::create_directories(path.parent_path());
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw DataError("cannot write " + path.string());
  }
  out << "P6\n" << image.width << ' ' << image.height << "\n255\n";
  for (const auto& p : image.pixels) {
    out.write(reinterpret_cast<const char*>(p.data()), 3);
  }
}

void write_png(const fs::path& path, const GrayImage& image) {
  if (image.bit_depth() > 8) {
    throw DataError("PNG writer supports 8-bit images only");
  }
  if (path.has_parent_path()) {
    fs::create_directories(path.parent_path());
  }
  std::vector<png_byte> buf(image.pixels().begin(), image.pixels().end());
  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  img.width = static_cast<png_uint_32>(image.width());
  img.height = static_cast<png_uint_32>(image.height());
  img.format = PNG_FORMAT_GRAY;
  if (!png_image_write_to_file(&img, path.string().c_str(), 0, buf.data(), 0, nullptr)) {
    throw DataError(path.string() + ": " + img.message);
  }
}

std::size_t CsvTable::column(const std::string& name) const {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) {
      return i;
    }
  }
  throw DataError("table has no column '" + name + "'");
}

CsvTable parse_csv(const std::string& text) {
  std::vector<std::vector<std::string>> records;
  std::vector<std::string> row;
  std::string field;
  bool quoted = false;
  bool any = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field += c;
      }
      continue;
    }
    if (c == '"') {
      quoted = true;
      any = true;
    } else if (c == ',') {
      row.push_back(std::move(field));
      field.clear();
      any = true;
    } else if (c == '\n' || c == '\r') {
      if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') {
        ++i;
      }
      if (any || !field.empty()) {
        row.push_back(std::move(field));
        records.push_back(std::move(row));
      }
      row.clear();
      field.clear();
      any = false;
    } else {
      field += c;
      any = true;
    }
  }
  if (quoted) {
    throw DataError("unterminated quoted field in CSV");
  }
  if (any || !field.empty()) {
    row.push_back(std::move(field));
    records.push_back(std::move(row));
  }
  if (records.empty()) {
    throw DataError("CSV has no header row");
  }
  CsvTable t;
  t.header = std::move(records.front());
  for (std::size_t r = 1; r < records.size(); ++r) {
    if (records[r].size() != t.header.size()) {
      throw DataError("CSV row " + std::to_string(r) + " has " +
                      std::to_string(records[r].size()) + " fields, header has " +
                      std::to_string(t.header.size()));
    }
    t.rows.push_back(std::move(records[r]));
  }
  return t;
}

CsvTable read_csv(const fs::path& path) {
  try {
    return parse_csv(read_text(path));
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

std::string format_csv(const CsvTable& table) {
  std::ostringstream out;
  auto emit = [&out](const std::vector<std::string>& r) {
    for (std::size_t i = 0; i < r.size(); ++i) {
      out << (i ? "," : "") << quote_field(r[i]);
    }
    out << '\n';
  };
  emit(table.header);
  for (const auto& r : table.rows) {
    emit(r);
  }
  return out.str();
}

void write_text(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) {
    fs::create_directories(path.parent_path());
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw DataError("cannot write " + path.string());
  }
  out << content;
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw DataError("cannot open " + path.string());
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace mmfuse

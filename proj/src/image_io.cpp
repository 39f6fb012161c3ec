#include "finray/image_io.hpp"

#include <png.h>

#include <cstdio>
#include <fstream>
#include <iomanip>
#include <memory>
#include <sstream>

#include <json.hpp>

#include "finray/error.hpp"

namespace finray {

namespace {

// Reads the next whitespace-separated header token, skipping '#' comments.
std::string pnm_token(std::istream& in) {
  std::string tok;
  char c;
  while (in.get(c)) {
    if (c == '#') {
      std::string rest;
      std::getline(in, rest);
      continue;
    }
    if (std::isspace(static_cast<unsigned char>(c))) {
      if (!tok.empty()) break;
      continue;
    }
    tok.push_back(c);
  }
  return tok;
}

struct PgmHeader {
  int width = 0;
  int height = 0;
  int maxval = 0;
};

PgmHeader read_pgm_header(std::istream& in, const fs::path& path) {
  if (pnm_token(in) != "P5") fail(Errc::ParseError, path.string() + ": not a binary PGM");
  PgmHeader h;
  try {
    h.width = std::stoi(pnm_token(in));
    h.height = std::stoi(pnm_token(in));
    h.maxval = std::stoi(pnm_token(in));
  } catch (const std::exception&) {
    fail(Errc::ParseError, path.string() + ": malformed PGM header");
  }
  if (h.width <= 0 || h.height <= 0 || h.maxval <= 0 || h.maxval > 65535) {
    fail(Errc::ParseError, path.string() + ": invalid PGM dimensions");
  }
  return h;
}

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

}  // namespace

Frame read_pgm(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(Errc::IoError, "cannot open " + path.string());
  const auto h = read_pgm_header(in, path);
  if (h.maxval > 255) fail(Errc::ParseError, path.string() + ": expected an 8-bit PGM");
  Frame f(h.width, h.height);
  in.read(reinterpret_cast<char*>(f.pixels.data()), static_cast<std::streamsize>(f.pixels.size()));
  if (in.gcount() != static_cast<std::streamsize>(f.pixels.size())) {
    fail(Errc::ParseError, path.string() + ": truncated pixel data");
  }
  return f;
}

void write_pgm(const fs::path& path, const Frame& f) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(Errc::IoError, "cannot write " + path.string());
  out << "P5\n" << f.width << ' ' << f.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(f.pixels.data()), static_cast<std::streamsize>(f.pixels.size()));
}

void write_pgm16(const fs::path& path, int width, int height, const std::vector<std::uint16_t>& data) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(Errc::IoError, "cannot write " + path.string());
  out << "P5\n" << width << ' ' << height << "\n65535\n";
  std::vector<unsigned char> bytes(data.size() * 2);
  for (std::size_t i = 0; i < data.size(); ++i) {
    bytes[2 * i] = static_cast<unsigned char>(data[i] >> 8);
    bytes[2 * i + 1] = static_cast<unsigned char>(data[i] & 0xff);
  }
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

std::vector<std::uint16_t> read_pgm16(const fs::path& path, int& width, int& height) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(Errc::IoError, "cannot open " + path.string());
  const auto h = read_pgm_header(in, path);
  if (h.maxval < 256) fail(Errc::ParseError, path.string() + ": expected a 16-bit PGM");
  width = h.width;
  height = h.height;
  std::vector<unsigned char> bytes(static_cast<std::size_t>(width) * height * 2);
  in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (in.gcount() != static_cast<std::streamsize>(bytes.size())) {
    fail(Errc::ParseError, path.string() + ": truncated pixel data");
  }
  std::vector<std::uint16_t> data(bytes.size() / 2);
  for (std::size_t i = 0; i < data.size(); ++i) {
    data[i] = static_cast<std::uint16_t>((bytes[2 * i] << 8) | bytes[2 * i + 1]);
  }
  return data;
}

Frame read_png(const fs::path& path) {
  FilePtr fp(std::fopen(path.c_str(), "rb"));
  if (!fp) fail(Errc::IoError, "cannot open " + path.string());
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    fail(Errc::IoError, "libpng initialisation failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    fail(Errc::ParseError, path.string() + ": malformed PNG");
  }
  png_init_io(png, fp.get());
  png_read_info(png, info);
  const int color = png_get_color_type(png, info);
  if (png_get_bit_depth(png, info) == 16) png_set_strip_16(png);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && png_get_bit_depth(png, info) < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  if (color == PNG_COLOR_TYPE_RGB || color == PNG_COLOR_TYPE_RGB_ALPHA || color == PNG_COLOR_TYPE_PALETTE) {
    png_set_rgb_to_gray_fixed(png, 1, -1, -1);
  }
  png_read_update_info(png, info);
  const int w = static_cast<int>(png_get_image_width(png, info));
  const int h = static_cast<int>(png_get_image_height(png, info));
  Frame f(w, h);
  std::vector<png_bytep> rows(h);
  for (int v = 0; v < h; ++v) rows[v] = &f.pixels[static_cast<std::size_t>(v) * w];
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return f;
}

void write_png(const fs::path& path, const Frame& f) {
  FilePtr fp(std::fopen(path.c_str(), "wb"));
  if (!fp) fail(Errc::IoError, "cannot write " + path.string());
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    fail(Errc::IoError, "libpng initialisation failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    fail(Errc::IoError, "failed writing " + path.string());
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, f.width, f.height, 8, PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int v = 0; v < f.height; ++v) {
    png_write_row(png, const_cast<png_bytep>(&f.pixels[static_cast<std::size_t>(v) * f.width]));
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

Frame read_frame(const fs::path& path) {
  const auto ext = path.extension().string();
  if (ext == ".png" || ext == ".PNG") return read_png(path);
  if (ext == ".pgm" || ext == ".PGM") return read_pgm(path);
  fail(Errc::ParseError, "unsupported frame format: " + path.string());
}

void write_frame(const fs::path& path, const Frame& f) {
  const auto ext = path.extension().string();
  if (ext == ".png" || ext == ".PNG") return write_png(path, f);
  write_pgm(path, f);
}

std::string frame_filename(std::int64_t index, const std::string& extension) {
  std::ostringstream os;
  os << std::setw(6) << std::setfill('0') << index << extension;
  return os.str();
}

SequenceManifest read_manifest(const fs::path& dir) {
  SequenceManifest m;
  try {
    const auto j = nlohmann::json::parse(read_text(dir / "manifest.json"));
    j.at("fps").get_to(m.fps);
    j.at("count").get_to(m.count);
    j.at("width").get_to(m.width);
    j.at("height").get_to(m.height);
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::ParseError, (dir / "manifest.json").string() + ": " + e.what());
  }
  m.extension = fs::exists(dir / frame_filename(0, ".png")) && !fs::exists(dir / frame_filename(0, ".pgm"))
                    ? ".png"
                    : ".pgm";
  return m;
}

void write_manifest(const fs::path& dir, const SequenceManifest& m) {
  const nlohmann::json j{{"fps", m.fps}, {"count", m.count}, {"width", m.width}, {"height", m.height}};
  write_text(dir / "manifest.json", j.dump(2) + "\n");
}

FrameSequence::FrameSequence(fs::path dir) : dir_(std::move(dir)), manifest_(read_manifest(dir_)) {}

fs::path FrameSequence::path_of(int index) const { return dir_ / frame_filename(index, manifest_.extension); }

Frame FrameSequence::load(int index) const {
  Frame f = read_frame(path_of(index));
  f.frame_id = index;
  return f;
}

SequenceWriter::SequenceWriter(fs::path dir, double fps, std::string extension) : dir_(std::move(dir)) {
  fs::create_directories(dir_);
  manifest_.fps = fps;
  manifest_.extension = std::move(extension);
}

void SequenceWriter::append(const Frame& f) {
  if (manifest_.count == 0) {
    manifest_.width = f.width;
    manifest_.height = f.height;
  }
  write_frame(dir_ / frame_filename(manifest_.count, manifest_.extension), f);
  ++manifest_.count;
}

void SequenceWriter::finish() { write_manifest(dir_, manifest_); }

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(Errc::IoError, "cannot open " + path.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(Errc::IoError, "cannot write " + path.string());
  out << text;
}

}  // namespace finray

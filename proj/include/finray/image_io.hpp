#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "finray/image.hpp"

namespace finray {

namespace fs = std::filesystem;

Frame read_pgm(const fs::path& path);
void write_pgm(const fs::path& path, const Frame& f);

/// 16-bit binary PGM (big-endian samples, maxval 65535).
void write_pgm16(const fs::path& path, int width, int height, const std::vector<std::uint16_t>& data);
std::vector<std::uint16_t> read_pgm16(const fs::path& path, int& width, int& height);

/// 8-bit PNG. Colour inputs are converted to luma on load.
Frame read_png(const fs::path& path);
void write_png(const fs::path& path, const Frame& f);

/// Dispatches on the extension (.pgm or .png).
Frame read_frame(const fs::path& path);
void write_frame(const fs::path& path, const Frame& f);

/// Manifest of a frame-sequence directory.
struct SequenceManifest {
  double fps = 30.0;
  int count = 0;
  int width = 0;
  int height = 0;
  std::string extension = ".pgm";
};

/// Zero-padded frame file name, e.g. 000042.pgm.
std::string frame_filename(std::int64_t index, const std::string& extension = ".pgm");

SequenceManifest read_manifest(const fs::path& dir);
void write_manifest(const fs::path& dir, const SequenceManifest& m);

/// Random-access reader over a sequence directory.
class FrameSequence {
 public:
  explicit FrameSequence(fs::path dir);

  const SequenceManifest& manifest() const { return manifest_; }
  int size() const { return manifest_.count; }
  /// Frame `index` with frame_id set to the index.
  Frame load(int index) const;
  fs::path path_of(int index) const;

 private:
  fs::path dir_;
  SequenceManifest manifest_;
};

/// Appends frames to a sequence directory and writes the manifest on finish.
class SequenceWriter {
 public:
  SequenceWriter(fs::path dir, double fps, std::string extension = ".pgm");

  void append(const Frame& f);
  void finish();
  int count() const { return manifest_.count; }

 private:
  fs::path dir_;
  SequenceManifest manifest_;
};

std::string read_text(const fs::path& path);
void write_text(const fs::path& path, const std::string& text);

}  // namespace finray

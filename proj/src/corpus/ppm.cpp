#include "sketchlab/corpus/ppm.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <vector>

#include "sketchlab/core/error.hpp"

namespace sketchlab::corpus {

namespace {

int next_token(std::istream& in) {
  // skips whitespace and '#' comments per the netpbm grammar
  while (true) {
    int ch = in.peek();
    if (ch == '#') {
      std::string line;
      std::getline(in, line);
    } else if (ch == ' ' || ch == '\t' || ch == '\r' || ch == '\n') {
      in.get();
    } else {
      break;
    }
  }
  int value = -1;
  in >> value;
  return value;
}

}  // namespace

Tensor read_image_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::IoError, "cannot open image " + path);
  char p, kind;
  in.get(p);
  in.get(kind);
  if (p != 'P' || (kind != '5' && kind != '6'))
    fail(ErrorCode::IoError, "unsupported image format in " + path);
  const int channels = kind == '6' ? 3 : 1;
  const int w = next_token(in);
  const int h = next_token(in);
  const int maxval = next_token(in);
  if (w <= 0 || h <= 0 || maxval <= 0 || maxval > 255)
    fail(ErrorCode::IoError, "bad header in " + path);
  in.get();  // single whitespace before raster
  std::vector<unsigned char> raw((size_t)w * h * channels);
  in.read(reinterpret_cast<char*>(raw.data()), (std::streamsize)raw.size());
  if (!in) fail(ErrorCode::IoError, "truncated raster in " + path);

  Tensor img({3, h, w});
  const float inv = 1.0f / (float)maxval;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < 3; ++c) {
        const unsigned char v =
            channels == 3 ? raw[((size_t)y * w + x) * 3 + c] : raw[(size_t)y * w + x];
        img.data()[((int64_t)c * h + y) * w + x] = v * inv;
      }
    }
  }
  return img;
}

void write_ppm(const std::string& path, const Tensor& rgb) {
  const int h = rgb.dim(1), w = rgb.dim(2);
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::IoError, "cannot write image " + path);
  out << "P6\n" << w << " " << h << "\n255\n";
  std::vector<unsigned char> raw((size_t)w * h * 3);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c) {
        float v = rgb.data()[((int64_t)c * h + y) * w + x];
        v = v < 0.0f ? 0.0f : (v > 1.0f ? 1.0f : v);
        raw[((size_t)y * w + x) * 3 + c] = (unsigned char)std::lround(v * 255.0f);
      }
  out.write(reinterpret_cast<const char*>(raw.data()), (std::streamsize)raw.size());
}

}  // namespace sketchlab::corpus

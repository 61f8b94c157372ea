#include "sketchlab/corpus/image.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace sketchlab::corpus {

Tensor rgb_to_luma(const Tensor& rgb) {
  const int h = rgb.dim(1), w = rgb.dim(2);
  Tensor luma({1, h, w});
  const float* r = rgb.data();
  const float* g = r + (int64_t)h * w;
  const float* b = g + (int64_t)h * w;
  float* y = luma.data();
  for (int64_t i = 0; i < (int64_t)h * w; ++i)
    y[i] = 0.299f * r[i] + 0.587f * g[i] + 0.114f * b[i];
  return luma;
}

Tensor replicate_channels(const Tensor& single, int channels) {
  const int h = single.dim(1), w = single.dim(2);
  Tensor out({channels, h, w});
  for (int c = 0; c < channels; ++c)
    std::copy(single.data(), single.data() + (int64_t)h * w,
              out.data() + (int64_t)c * h * w);
  return out;
}

Tensor resize_image(const Tensor& img, int out_h, int out_w) {
  const int c = img.dim(0), ih = img.dim(1), iw = img.dim(2);
  if (ih == out_h && iw == out_w) return img;
  Tensor out({c, out_h, out_w});
  const double sy = (double)ih / out_h;
  const double sx = (double)iw / out_w;
  for (int ci = 0; ci < c; ++ci) {
    const float* src = img.data() + (int64_t)ci * ih * iw;
    float* dst = out.data() + (int64_t)ci * out_h * out_w;
    for (int oy = 0; oy < out_h; ++oy) {
      double py = (oy + 0.5) * sy - 0.5;
      py = std::clamp(py, 0.0, (double)(ih - 1));
      const int y0 = (int)py;
      const int y1 = std::min(y0 + 1, ih - 1);
      const float ty = (float)(py - y0);
      for (int ox = 0; ox < out_w; ++ox) {
        double px = (ox + 0.5) * sx - 0.5;
        px = std::clamp(px, 0.0, (double)(iw - 1));
        const int x0 = (int)px;
        const int x1 = std::min(x0 + 1, iw - 1);
        const float tx = (float)(px - x0);
        dst[oy * out_w + ox] =
            (1 - ty) * ((1 - tx) * src[y0 * iw + x0] + tx * src[y0 * iw + x1]) +
            ty * ((1 - tx) * src[y1 * iw + x0] + tx * src[y1 * iw + x1]);
      }
    }
  }
  return out;
}

Tensor crop(const Tensor& img, int top, int left, int height, int width) {
  const int c = img.dim(0), ih = img.dim(1), iw = img.dim(2);
  Tensor out({c, height, width});
  for (int ci = 0; ci < c; ++ci)
    for (int y = 0; y < height; ++y)
      for (int x = 0; x < width; ++x)
        out.data()[((int64_t)ci * height + y) * width + x] =
            img.data()[((int64_t)ci * ih + top + y) * iw + left + x];
  return out;
}

Tensor hflip(const Tensor& img) {
  const int c = img.dim(0), h = img.dim(1), w = img.dim(2);
  Tensor out({c, h, w});
  for (int ci = 0; ci < c; ++ci)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        out.data()[((int64_t)ci * h + y) * w + x] =
            img.data()[((int64_t)ci * h + y) * w + (w - 1 - x)];
  return out;
}

Tensor rotate(const Tensor& img, double degrees) {
  const int c = img.dim(0), h = img.dim(1), w = img.dim(2);
  if (degrees == 0.0) return img;
  Tensor out({c, h, w});
  const double rad = degrees * 3.14159265358979323846 / 180.0;
  const double cs = std::cos(rad), sn = std::sin(rad);
  const double cy = (h - 1) / 2.0, cx = (w - 1) / 2.0;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      // inverse rotation of the output grid
      const double dy = y - cy, dx = x - cx;
      double sy = cs * dy + sn * dx + cy;
      double sx = -sn * dy + cs * dx + cx;
      sy = std::clamp(sy, 0.0, (double)(h - 1));
      sx = std::clamp(sx, 0.0, (double)(w - 1));
      const int y0 = (int)sy, x0 = (int)sx;
      const int y1 = std::min(y0 + 1, h - 1), x1 = std::min(x0 + 1, w - 1);
      const float ty = (float)(sy - y0), tx = (float)(sx - x0);
      for (int ci = 0; ci < c; ++ci) {
        const float* src = img.data() + (int64_t)ci * h * w;
        out.data()[((int64_t)ci * h + y) * w + x] =
            (1 - ty) * ((1 - tx) * src[y0 * w + x0] + tx * src[y0 * w + x1]) +
            ty * ((1 - tx) * src[y1 * w + x0] + tx * src[y1 * w + x1]);
      }
    }
  }
  return out;
}

Tensor gaussian_blur(const Tensor& img, double sigma) {
  const int c = img.dim(0), h = img.dim(1), w = img.dim(2);
  const int radius = (int)std::ceil(3.0 * sigma);
  std::vector<float> kernel(2 * radius + 1);
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    kernel[i + radius] = (float)std::exp(-0.5 * (i * i) / (sigma * sigma));
    sum += kernel[i + radius];
  }
  for (auto& v : kernel) v = (float)(v / sum);

  Tensor tmp({c, h, w}), out({c, h, w});
  for (int ci = 0; ci < c; ++ci) {
    const float* src = img.data() + (int64_t)ci * h * w;
    float* mid = tmp.data() + (int64_t)ci * h * w;
    float* dst = out.data() + (int64_t)ci * h * w;
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        float s = 0.0f;
        for (int i = -radius; i <= radius; ++i)
          s += kernel[i + radius] * src[y * w + std::clamp(x + i, 0, w - 1)];
        mid[y * w + x] = s;
      }
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        float s = 0.0f;
        for (int i = -radius; i <= radius; ++i)
          s += kernel[i + radius] * mid[std::clamp(y + i, 0, h - 1) * w + x];
        dst[y * w + x] = s;
      }
  }
  return out;
}

Tensor sobel_magnitude(const Tensor& rgb) {
  Tensor luma = rgb.dim(0) == 1 ? rgb : rgb_to_luma(rgb);
  const int h = luma.dim(1), w = luma.dim(2);
  Tensor out({1, h, w});
  const float* src = luma.data();
  float* dst = out.data();
  auto px = [&](int y, int x) {
    return src[std::clamp(y, 0, h - 1) * w + std::clamp(x, 0, w - 1)];
  };
  float maxmag = 0.0f;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const float gx = (px(y - 1, x + 1) + 2 * px(y, x + 1) + px(y + 1, x + 1)) -
                       (px(y - 1, x - 1) + 2 * px(y, x - 1) + px(y + 1, x - 1));
      const float gy = (px(y + 1, x - 1) + 2 * px(y + 1, x) + px(y + 1, x + 1)) -
                       (px(y - 1, x - 1) + 2 * px(y - 1, x) + px(y - 1, x + 1));
      const float mag = std::sqrt(gx * gx + gy * gy);
      dst[y * w + x] = mag;
      maxmag = std::max(maxmag, mag);
    }
  }
  if (maxmag > 0.0f)
    for (int64_t i = 0; i < (int64_t)h * w; ++i) dst[i] /= maxmag;
  return out;
}

void clamp01(Tensor& img) {
  float* p = img.data();
  for (int64_t i = 0; i < img.numel(); ++i) p[i] = std::clamp(p[i], 0.0f, 1.0f);
}

}  // namespace sketchlab::corpus

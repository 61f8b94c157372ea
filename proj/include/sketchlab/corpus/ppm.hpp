#pragma once

#include <string>

#include "sketchlab/core/tensor.hpp"

namespace sketchlab::corpus {

// 8-bit binary PPM (P6) and PGM (P5). PGM loads replicated to 3 channels.
Tensor read_image_file(const std::string& path);
void write_ppm(const std::string& path, const Tensor& rgb);

}  // namespace sketchlab::corpus

#pragma once

#include <string>
#include <vector>

#include "sketchlab/corpus/dataset.hpp"

namespace sketchlab::corpus {

// Procedural 10-class shape corpus used for desk-scale experiments. The
// class is carried entirely by the silhouette; fill and background colors,
// textures, pose and clutter are resampled per image and carry no label
// information. That makes structure the one reliable cue, which is the
// regime the training strategies are compared in.
std::vector<std::string> shape_class_names();

struct SyntheticSpec {
  int resolution = 32;
  int per_class_train = 80;
  int per_class_test = 40;
  uint64_t seed = 7;
};

// Writes <root>/{train,test}/<class>/img_*.ppm plus a sidecar manifest and
// returns the loaded manifest.
DatasetManifest make_shape_corpus(const std::string& root, const SyntheticSpec& spec);

// Unlabeled multi-shape scenes (single class directory "scene"); used as the
// photo corpus of the drawing pretext task.
DatasetManifest make_scene_corpus(const std::string& root, int count,
                                  int resolution, uint64_t seed);

// Cue-conflict stimuli: the silhouette of one class filled with the texture
// signature of another. Writes images plus cue_manifest.txt with lines
// "<file> <shape_class> <texture_class>".
void make_cue_conflict_set(const std::string& root, int count, int resolution,
                           uint64_t seed);

// Single rendered shape, exposed for tests.
Tensor render_shape_image(int class_idx, int resolution, uint64_t seed);

}  // namespace sketchlab::corpus

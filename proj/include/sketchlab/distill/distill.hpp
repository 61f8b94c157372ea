#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "sketchlab/train/trainer.hpp"

namespace sketchlab::distill {

struct DistillConfig {
  double temperature = 4.0;
  double alpha = 0.9;  // weight on the soft-target term
  int max_epochs = 200;
  int patience = 10;
  double learning_rate = 0.01;
  int batch_size = 32;
  uint64_t seed = 0;

  void validate() const;
};

// Soft-target distillation on a single example, in any precision:
// L = alpha * T^2 * KL(softmax(t/T) || softmax(s/T)) + (1-alpha) * CE(s, label).
// Gradient checks run this in double.
template <typename T>
T kd_example_loss(const std::vector<T>& student, const std::vector<T>& teacher,
                  int label, T temperature, T alpha) {
  const size_t n = student.size();
  auto softmax = [n](const std::vector<T>& z, T temp) {
    std::vector<T> p(n);
    T mx = z[0] / temp;
    for (size_t i = 1; i < n; ++i) mx = std::max(mx, z[i] / temp);
    T sum = 0;
    for (size_t i = 0; i < n; ++i) {
      p[i] = std::exp(z[i] / temp - mx);
      sum += p[i];
    }
    for (auto& v : p) v /= sum;
    return p;
  };
  const std::vector<T> pt = softmax(teacher, temperature);
  const std::vector<T> ps = softmax(student, temperature);
  T kl = 0;
  for (size_t i = 0; i < n; ++i)
    if (pt[i] > 0) kl += pt[i] * (std::log(pt[i]) - std::log(ps[i]));
  const std::vector<T> ph = softmax(student, (T)1);
  const T ce = -std::log(std::max(ph[(size_t)label], (T)1e-300));
  return alpha * temperature * temperature * kl + ((T)1 - alpha) * ce;
}

// Batch-mean loss over logit matrices (B x C); optionally fills the gradient
// w.r.t. the student logits. Throws ShapeMismatch / InvalidParams.
double kd_loss(const Tensor& student_logits, const Tensor& teacher_logits,
               const std::vector<int>& labels, const DistillConfig& config,
               Tensor* dstudent = nullptr);

struct StudentResult {
  nets::CheckpointArchive checkpoint;
  std::string teacher_id;
  double teacher_accuracy = 0.0;
  double student_accuracy = 0.0;
  train::TrainResult train_result;
};

// Trains a student on the COLOR train split against a frozen teacher.
// Teacher parameters are bitwise untouched.
StudentResult train_student(const nets::ArchSpec& student_arch,
                            const nets::CheckpointArchive& teacher_ckpt,
                            const corpus::DatasetManifest& dataset,
                            const corpus::AugmentationPolicy& policy,
                            const DistillConfig& config,
                            const train::EpochCallback& on_epoch = nullptr);

// Same with a live teacher (evaluation mode only; never stepped).
StudentResult train_student(const nets::ArchSpec& student_arch,
                            nets::Classifier& teacher, const std::string& teacher_id,
                            const corpus::DatasetManifest& dataset,
                            const corpus::AugmentationPolicy& policy,
                            const DistillConfig& config,
                            const train::EpochCallback& on_epoch = nullptr);

struct TeacherRecord {
  std::string checkpoint_dir;
  double fraction = 1.0;
  double accuracy = 0.0;
};

// Record minimizing |accuracy - target|; ties break toward the smaller
// fraction. Throws EmptySweep when there are no candidates.
const TeacherRecord& select_matched_teacher(const std::vector<TeacherRecord>& sweep,
                                            double target_accuracy);

}  // namespace sketchlab::distill

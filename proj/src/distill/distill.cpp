#include "sketchlab/distill/distill.hpp"

#include <algorithm>
#include <cmath>

#include "sketchlab/core/error.hpp"
#include "sketchlab/kernels/kernels.hpp"
#include "sketchlab/nets/optim.hpp"

namespace sketchlab::distill {

void DistillConfig::validate() const {
  if (temperature <= 0.0) fail(ErrorCode::InvalidParams, "temperature must be > 0");
  if (alpha < 0.0 || alpha > 1.0) fail(ErrorCode::InvalidParams, "alpha must be in [0,1]");
}

double kd_loss(const Tensor& student_logits, const Tensor& teacher_logits,
               const std::vector<int>& labels, const DistillConfig& config,
               Tensor* dstudent) {
  config.validate();
  if (!student_logits.same_shape(teacher_logits))
    fail(ErrorCode::ShapeMismatch,
         "logit shapes differ: " + student_logits.shape_str() + " vs " +
             teacher_logits.shape_str());
  const int b = student_logits.dim(0), n = student_logits.dim(1);
  if ((int)labels.size() != b)
    fail(ErrorCode::ShapeMismatch, "label count does not match batch");
  for (int l : labels)
    if (l < 0 || l >= n) fail(ErrorCode::InvalidParams, "label out of range");

  const double temp = config.temperature;
  const double alpha = config.alpha;

  Tensor st({b, n}), tt({b, n}), sh({b, n});
  for (int64_t i = 0; i < (int64_t)b * n; ++i) {
    st[i] = (float)(student_logits[i] / temp);
    tt[i] = (float)(teacher_logits[i] / temp);
  }
  Tensor ps({b, n}), pt({b, n}), ph({b, n});
  kernels::softmax_rows(st.data(), ps.data(), b, n);
  kernels::softmax_rows(tt.data(), pt.data(), b, n);
  kernels::softmax_rows(student_logits.data(), ph.data(), b, n);

  double kl = 0.0, ce = 0.0;
  for (int i = 0; i < b; ++i) {
    for (int j = 0; j < n; ++j) {
      const double p = pt[(int64_t)i * n + j];
      const double q = std::max((double)ps[(int64_t)i * n + j], 1e-12);
      if (p > 0) kl += p * (std::log(p) - std::log(q));
    }
    ce -= std::log(std::max((double)ph[(int64_t)i * n + labels[(size_t)i]], 1e-12));
  }
  kl /= b;
  ce /= b;
  const double loss = alpha * temp * temp * kl + (1.0 - alpha) * ce;

  if (dstudent) {
    // d/ds of T^2*KL is T*(softmax(s/T) - softmax(t/T)); float arithmetic so
    // alpha=0 reproduces the plain cross-entropy gradient bit for bit
    *dstudent = Tensor({b, n});
    const float soft_scale = (float)(alpha * temp);
    const float hard_scale = (float)(1.0 - alpha);
    for (int i = 0; i < b; ++i) {
      for (int j = 0; j < n; ++j) {
        const int64_t k = (int64_t)i * n + j;
        const float soft = soft_scale * (ps[k] - pt[k]);
        const float hard =
            hard_scale * (ph[k] - (j == labels[(size_t)i] ? 1.0f : 0.0f));
        (*dstudent)[k] = (soft + hard) / (float)b;
      }
    }
  }
  return loss;
}

namespace {

Tensor assemble(const std::vector<Tensor>& images) {
  const int b = (int)images.size();
  const int c = images[0].dim(0), h = images[0].dim(1), w = images[0].dim(2);
  Tensor batch({b, c, h, w});
  for (int i = 0; i < b; ++i)
    std::copy(images[(size_t)i].data(),
              images[(size_t)i].data() + images[(size_t)i].numel(),
              batch.data() + (int64_t)i * c * h * w);
  return batch;
}

}  // namespace

StudentResult train_student(const nets::ArchSpec& student_arch,
                            const nets::CheckpointArchive& teacher_ckpt,
                            const corpus::DatasetManifest& dataset,
                            const corpus::AugmentationPolicy& policy,
                            const DistillConfig& config,
                            const train::EpochCallback& on_epoch) {
  if (!nets::is_classifier_arch(teacher_ckpt.manifest.arch))
    fail(ErrorCode::ArchIncompatible, "teacher is not a classifier checkpoint");
  auto teacher = nets::classifier_from_checkpoint(teacher_ckpt);
  std::string teacher_id = teacher_ckpt.manifest.arch;
  for (const auto& s : teacher_ckpt.manifest.stage_history) teacher_id += "|" + s;
  return train_student(student_arch, *teacher, teacher_id, dataset, policy, config,
                       on_epoch);
}

StudentResult train_student(const nets::ArchSpec& student_arch,
                            nets::Classifier& teacher, const std::string& teacher_id,
                            const corpus::DatasetManifest& dataset,
                            const corpus::AugmentationPolicy& policy,
                            const DistillConfig& config,
                            const train::EpochCallback& on_epoch) {
  config.validate();

  auto student = nets::build_classifier(student_arch);
  if (student->meta.num_classes != teacher.meta.num_classes)
    fail(ErrorCode::ShapeMismatch, "teacher/student class counts differ");

  const train::StageData data =
      train::make_stage_data(dataset, policy, 0.1, config.seed);
  if (data.train_items.empty()) fail(ErrorCode::EmptyDataset, "no training items");

  student->meta.stage_history.push_back("DISTILL:" + teacher.meta.arch);

  nets::Sgd opt(student->net(), config.learning_rate, 0.9, 0.0);
  std::map<std::string, Tensor> img_cache;
  auto cached = [&img_cache](const corpus::Item& item) -> const Tensor& {
    auto it = img_cache.find(item.path);
    if (it != img_cache.end()) return it->second;
    return img_cache.emplace(item.path, corpus::load_item(item).pixels).first->second;
  };

  train::TrainResult result;
  double best_acc = -1.0;
  int stale = 0;
  std::vector<size_t> order(data.train_items.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    Rng shuffle_rng(mix_seed(config.seed, (uint64_t)epoch, 0x0de2u));
    shuffle_rng.shuffle(order.data(), order.size());
    double loss_sum = 0.0;
    int steps = 0;
    for (size_t start = 0; start < order.size(); start += (size_t)config.batch_size) {
      const size_t end = std::min(order.size(), start + (size_t)config.batch_size);
      std::vector<Tensor> images;
      std::vector<int> labels;
      for (size_t i = start; i < end; ++i) {
        const auto& item = data.train_items[order[i]];
        Rng aug_rng(mix_seed(config.seed, (uint64_t)epoch, order[i], 0xa6u));
        images.push_back(corpus::augment(cached(item), policy, aug_rng));
        labels.push_back(item.label);
      }
      const Tensor batch = assemble(images);
      const Tensor teacher_logits = teacher.logits(batch, /*train=*/false);
      opt.zero_grad();
      const Tensor student_logits = student->logits(batch, /*train=*/true);
      Tensor dlogits;
      const double loss = kd_loss(student_logits, teacher_logits, labels, config, &dlogits);
      if (!std::isfinite(loss))
        fail(ErrorCode::NonFiniteLoss, "distillation loss diverged");
      student->backward(dlogits);
      opt.step();
      loss_sum += loss;
      ++steps;
    }

    train::EpochStats stats;
    stats.train_loss = steps ? loss_sum / steps : 0.0;
    stats.val_accuracy = data.val_items.empty()
                             ? 0.0
                             : train::evaluate(*student, data.val_items, policy);
    result.history.push_back(stats);
    result.stopped_epoch = epoch;
    if (on_epoch) on_epoch(epoch, stats, config.learning_rate);

    if (stats.val_accuracy > best_acc) {
      best_acc = stats.val_accuracy;
      result.best_epoch = epoch;
      result.best_checkpoint.manifest = student->meta;
      result.best_checkpoint.manifest.epoch = epoch;
      result.best_checkpoint.manifest.metrics["val_acc"] = best_acc;
      result.best_checkpoint.parameters = nets::export_params(student->net());
      stale = 0;
    } else if (++stale >= config.patience) {
      break;
    }
  }

  nets::import_params(student->net(), result.best_checkpoint.parameters);
  student->meta = result.best_checkpoint.manifest;

  StudentResult out;
  out.teacher_id = teacher_id;
  if (auto it = teacher.meta.metrics.find("test_acc:COLOR");
      it != teacher.meta.metrics.end())
    out.teacher_accuracy = it->second;
  out.student_accuracy = train::evaluate(*student, dataset.split("test"), policy);
  out.checkpoint = result.best_checkpoint;
  out.checkpoint.manifest.metrics["test_acc:COLOR"] = out.student_accuracy;
  out.checkpoint.manifest.metrics["teacher_acc"] = out.teacher_accuracy;
  out.train_result = std::move(result);
  return out;
}

const TeacherRecord& select_matched_teacher(const std::vector<TeacherRecord>& sweep,
                                            double target_accuracy) {
  if (sweep.empty()) fail(ErrorCode::EmptySweep, "no teacher records");
  const TeacherRecord* best = &sweep[0];
  for (const auto& rec : sweep) {
    const double d = std::abs(rec.accuracy - target_accuracy);
    const double dbest = std::abs(best->accuracy - target_accuracy);
    if (d < dbest || (d == dbest && rec.fraction < best->fraction)) best = &rec;
  }
  return *best;
}

}  // namespace sketchlab::distill

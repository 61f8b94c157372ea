#include "sketchlab/draw/draw.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>

#include "sketchlab/core/error.hpp"
#include "sketchlab/corpus/augment.hpp"
#include "sketchlab/kernels/kernels.hpp"

namespace fs = std::filesystem;

namespace sketchlab::draw {

void DrawConfig::validate() const {
  if (epochs < 1 || batch_size < 1) fail(ErrorCode::InvalidParams, "bad draw budget");
  if (decay_start_epoch >= epochs)
    fail(ErrorCode::InvalidParams, "decay_start_epoch must be < epochs");
  if (lambda_adv < 0 || lambda_geom < 0 || lambda_sem < 0 || lambda_cyc < 0)
    fail(ErrorCode::InvalidParams, "loss weights must be >= 0");
  if (adam_lr <= 0) fail(ErrorCode::InvalidParams, "adam_lr must be > 0");
}

double lr_at_epoch(const DrawConfig& config, int epoch) {
  if (epoch < config.decay_start_epoch) return config.adam_lr;
  return config.adam_lr * (double)(config.epochs - epoch) /
         (double)(config.epochs - config.decay_start_epoch);
}

namespace {

void check_finite(const Tensor& t, const char* what) {
  for (int64_t i = 0; i < t.numel(); ++i)
    if (!std::isfinite(t[i])) fail(ErrorCode::ProviderFailure,
                                   std::string(what) + " produced a non-finite value");
}

Tensor slice_image(const Tensor& batch, int index) {
  const int c = batch.dim(1), h = batch.dim(2), w = batch.dim(3);
  Tensor img({c, h, w});
  std::copy(batch.data() + (int64_t)index * c * h * w,
            batch.data() + (int64_t)(index + 1) * c * h * w, img.data());
  return img;
}

Tensor luma_batch(const Tensor& photos) {
  const int b = photos.dim(0), h = photos.dim(2), w = photos.dim(3);
  Tensor out({b, 1, h, w});
  for (int i = 0; i < b; ++i) {
    const Tensor l = corpus::rgb_to_luma(slice_image(photos, i));
    std::copy(l.data(), l.data() + l.numel(), out.data() + (int64_t)i * h * w);
  }
  return out;
}

}  // namespace

Tensor GeometryProvider::target_maps(const Tensor& photos,
                                     const std::vector<std::string>& source_ids) const {
  const int b = photos.dim(0), h = photos.dim(2), w = photos.dim(3);
  Tensor maps({b, 1, h, w});
  for (int i = 0; i < b; ++i) {
    Tensor map;
    bool loaded = false;
    if (!precomputed_dir.empty() && i < (int)source_ids.size()) {
      const fs::path p = fs::path(precomputed_dir) /
                         (nets::sanitize_blob_name(source_ids[(size_t)i]) + ".bin");
      if (fs::exists(p)) {
        map = nets::load_tensor_blob(p.string()).second;
        if (map.numel() != (int64_t)h * w)
          fail(ErrorCode::ProviderFailure, "geometry map size mismatch for " + p.string());
        map.reshape({1, h, w});
        loaded = true;
      }
    }
    if (!loaded) map = corpus::sobel_magnitude(slice_image(photos, i));
    std::copy(map.data(), map.data() + map.numel(), maps.data() + (int64_t)i * h * w);
  }
  check_finite(maps, "geometry provider");
  return maps;
}

Tensor SemanticProvider::photo_embeddings(const Tensor& photos,
                                          const std::vector<std::string>& source_ids) const {
  const int b = photos.dim(0);
  if (!precomputed_dir.empty()) {
    std::vector<Tensor> rows;
    bool all = true;
    for (int i = 0; i < b; ++i) {
      const fs::path p = fs::path(precomputed_dir) /
                         (nets::sanitize_blob_name(source_ids[(size_t)i]) + ".bin");
      if (!fs::exists(p)) {
        all = false;
        break;
      }
      rows.push_back(nets::load_tensor_blob(p.string()).second);
    }
    if (all && !rows.empty()) {
      const int d = (int)rows[0].numel();
      Tensor out({b, d});
      for (int i = 0; i < b; ++i)
        std::copy(rows[(size_t)i].data(), rows[(size_t)i].data() + d,
                  out.data() + (int64_t)i * d);
      check_finite(out, "semantic provider");
      return out;
    }
  }
  if (!live())
    fail(ErrorCode::ProviderFailure,
         "semantic provider has neither a model nor precomputed embeddings");
  Tensor out = nets::penultimate_features(*model, photos);
  check_finite(out, "semantic provider");
  return out;
}

Tensor draw_forward(nets::DrawEncoder& encoder, nets::Sequential& decoder,
                    const Tensor& photos, bool train) {
  return decoder.forward(encoder.forward(photos, train), train);
}

DrawLossParts draw_losses(const Tensor& drawings, const Tensor& photos,
                          const std::vector<std::string>& photo_ids,
                          const Tensor* sketches, nets::DrawNets& nets,
                          const ProviderSet& providers, const DrawConfig& config,
                          Tensor* ddrawings) {
  DrawLossParts parts;
  const int64_t n = drawings.numel();
  if (ddrawings && !ddrawings->same_shape(drawings)) *ddrawings = Tensor(drawings.shape());

  if (config.lambda_adv > 0) {
    if (!sketches || sketches->numel() == 0)
      fail(ErrorCode::EmptyCorpus, "adversarial loss needs a non-empty sketch batch");
    const Tensor scores = nets.discriminator->forward(drawings, /*train=*/true);
    const int64_t m = scores.numel();
    double s = 0.0;
    for (int64_t i = 0; i < m; ++i) s += (scores[i] - 1.0) * (scores[i] - 1.0);
    parts.adv = s / (double)m;
    if (ddrawings) {
      Tensor dscores(scores.shape());
      const float k = (float)(2.0 * config.lambda_adv / (double)m);
      for (int64_t i = 0; i < m; ++i) dscores[i] = k * (scores[i] - 1.0f);
      const Tensor dd = nets.discriminator->backward(dscores);
      kernels::axpy(1.0f, dd.data(), ddrawings->data(), n);
    }
  }

  if (config.lambda_geom > 0) {
    const Tensor target = providers.geometry.target_maps(photos, photo_ids);
    double s = 0.0;
    for (int64_t i = 0; i < n; ++i) {
      const double r = (1.0 - drawings[i]) - target[i];
      s += r * r;
    }
    parts.geom = s / (double)n;
    if (ddrawings) {
      const float k = (float)(-2.0 * config.lambda_geom / (double)n);
      for (int64_t i = 0; i < n; ++i)
        (*ddrawings)[i] += k * ((1.0f - drawings[i]) - target[i]);
    }
  }

  if (config.lambda_sem > 0) {
    if (!providers.semantic.live())
      fail(ErrorCode::ProviderFailure,
           "semantic loss needs a live model to embed drawings");
    const Tensor photo_emb = providers.semantic.photo_embeddings(photos, photo_ids);
    const int b = drawings.dim(0), h = drawings.dim(2), w = drawings.dim(3);
    Tensor draw3({b, 3, h, w});
    for (int i = 0; i < b; ++i)
      for (int c = 0; c < 3; ++c)
        std::copy(drawings.data() + (int64_t)i * h * w,
                  drawings.data() + (int64_t)(i + 1) * h * w,
                  draw3.data() + ((int64_t)i * 3 + c) * h * w);
    nets::Classifier& prov = *providers.semantic.model;
    prov.net().set_capture(true);
    (void)prov.logits(draw3, /*train=*/false);
    Tensor draw_emb = prov.net().activation(prov.penultimate_layer);
    prov.net().set_capture(false);
    check_finite(draw_emb, "semantic provider");
    const int d = draw_emb.dim(1);

    Tensor demb({b, d});
    double loss = 0.0;
    for (int i = 0; i < b; ++i) {
      const float* a = photo_emb.data() + (int64_t)i * d;
      const float* v = draw_emb.data() + (int64_t)i * d;
      double na = 0, nv = 0, dot = 0;
      for (int j = 0; j < d; ++j) {
        na += (double)a[j] * a[j];
        nv += (double)v[j] * v[j];
        dot += (double)a[j] * v[j];
      }
      na = std::sqrt(na);
      nv = std::sqrt(nv);
      if (na < 1e-12 || nv < 1e-12) {
        // degenerate embedding: cosine treated as 0 with no gradient
        loss += 1.0;
        for (int j = 0; j < d; ++j) demb[(int64_t)i * d + j] = 0.0f;
        continue;
      }
      const double cosv = dot / (na * nv);
      loss += 1.0 - cosv;
      const double inv = 1.0 / (na * nv);
      for (int j = 0; j < d; ++j)
        demb[(int64_t)i * d + j] =
            (float)(-(a[j] * inv - cosv * v[j] / (nv * nv)) / b);
    }
    parts.sem = loss / b;
    if (ddrawings) {
      const Tensor dinput = prov.net().backward_from(prov.penultimate_layer, demb);
      // replicated channels: fold the 3-channel gradient back onto the drawing
      for (int i = 0; i < b; ++i)
        for (int c = 0; c < 3; ++c)
          for (int64_t p = 0; p < (int64_t)h * w; ++p)
            (*ddrawings)[(int64_t)i * h * w + p] +=
                (float)config.lambda_sem * dinput[((int64_t)i * 3 + c) * h * w + p];
    }
  }

  if (config.lambda_cyc > 0) {
    const Tensor gray = luma_batch(photos);
    const Tensor rec = nets.recovery->forward(drawings, /*train=*/true);
    double s = 0.0;
    for (int64_t i = 0; i < n; ++i) s += std::abs((double)rec[i] - gray[i]);
    parts.cyc = s / (double)n;
    if (ddrawings) {
      Tensor drec(rec.shape());
      const float k = (float)(config.lambda_cyc / (double)n);
      for (int64_t i = 0; i < n; ++i) {
        const float r = rec[i] - gray[i];
        drec[i] = r > 0 ? k : (r < 0 ? -k : 0.0f);
      }
      const Tensor dd = nets.recovery->backward(drec);
      kernels::axpy(1.0f, dd.data(), ddrawings->data(), n);
    }
  }

  parts.total = config.lambda_adv * parts.adv + config.lambda_geom * parts.geom +
                config.lambda_sem * parts.sem + config.lambda_cyc * parts.cyc;
  return parts;
}

double discriminator_step(nets::Sequential& discriminator, const Tensor& real,
                          const Tensor& fake, nets::Adam* opt) {
  if (real.numel() == 0 || fake.numel() == 0)
    fail(ErrorCode::EmptyCorpus, "discriminator needs non-empty batches");
  if (opt) opt->zero_grad();

  const Tensor sr = discriminator.forward(real, /*train=*/true);
  double loss = 0.0;
  {
    const int64_t m = sr.numel();
    Tensor d(sr.shape());
    for (int64_t i = 0; i < m; ++i) {
      loss += 0.5 * (sr[i] - 1.0) * (sr[i] - 1.0) / (double)m;
      d[i] = (sr[i] - 1.0f) / (float)m;
    }
    discriminator.backward(d);
  }
  const Tensor sf = discriminator.forward(fake, /*train=*/true);
  {
    const int64_t m = sf.numel();
    Tensor d(sf.shape());
    for (int64_t i = 0; i < m; ++i) {
      loss += 0.5 * sf[i] * sf[i] / (double)m;
      d[i] = sf[i] / (float)m;
    }
    discriminator.backward(d);
  }
  if (opt) opt->step();
  return loss;
}

DrawOutcome train_draw(const corpus::DatasetManifest& photo_corpus,
                       const corpus::DatasetManifest& sketch_corpus,
                       const DrawConfig& config, const ProviderSet& providers,
                       const std::string& out_dir,
                       const std::function<void(int, const DrawLossParts&)>& on_epoch) {
  config.validate();
  const auto& photos = photo_corpus.split("train");
  if (photos.empty()) fail(ErrorCode::EmptyCorpus, "photo corpus is empty");
  const auto& sketches = sketch_corpus.splits.count("train")
                             ? sketch_corpus.split("train")
                             : std::vector<corpus::Item>{};
  if (config.lambda_adv > 0 && sketches.empty())
    fail(ErrorCode::EmptyCorpus, "sketch corpus is empty but lambda_adv > 0");

  nets::DrawNets nets = nets::build_draw_networks(config.width, config.resolution,
                                                  config.seed);
  nets::LayerRefGroup gen;
  gen.add("encoder", nets.encoder.get());
  gen.add("decoder", nets.decoder.get());
  gen.add("recovery", nets.recovery.get());
  nets::Adam gopt(gen, config.adam_lr, config.beta1);
  nets::Adam dopt(*nets.discriminator, config.adam_lr, config.beta1);

  corpus::AugmentationPolicy io_policy;
  io_policy.out_resolution = config.resolution;
  io_policy.eval_center_crop = config.resolution;
  io_policy.allow_upscale = true;

  std::map<std::string, Tensor> cache;
  auto load_at_res = [&](const corpus::Item& item) -> const Tensor& {
    auto it = cache.find(item.path);
    if (it != cache.end()) return it->second;
    Tensor px = corpus::eval_view(corpus::load_item(item).pixels, io_policy);
    return cache.emplace(item.path, std::move(px)).first->second;
  };

  DrawOutcome outcome;
  std::vector<size_t> photo_order(photos.size()), sketch_order(sketches.size());
  for (size_t i = 0; i < photo_order.size(); ++i) photo_order[i] = i;
  for (size_t i = 0; i < sketch_order.size(); ++i) sketch_order[i] = i;

  const int bs = config.batch_size;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const double lr = lr_at_epoch(config, epoch);
    gopt.set_lr(lr);
    dopt.set_lr(lr);
    // independent shuffles keep the two corpora unpaired
    Rng prng(mix_seed(config.seed, (uint64_t)epoch, 0x9807u));
    Rng srng(mix_seed(config.seed, (uint64_t)epoch, 0x53e7c4u));
    prng.shuffle(photo_order.data(), photo_order.size());
    if (!sketch_order.empty()) srng.shuffle(sketch_order.data(), sketch_order.size());

    DrawLossParts sums;
    int steps = 0;
    size_t sk = 0;
    for (size_t start = 0; start + 1 <= photos.size(); start += (size_t)bs) {
      const size_t end = std::min(photos.size(), start + (size_t)bs);
      const int b = (int)(end - start);
      Tensor photo_batch({b, 3, config.resolution, config.resolution});
      std::vector<std::string> ids;
      for (int i = 0; i < b; ++i) {
        const auto& item = photos[photo_order[start + (size_t)i]];
        const Tensor& px = load_at_res(item);
        std::copy(px.data(), px.data() + px.numel(),
                  photo_batch.data() + (int64_t)i * px.numel());
        ids.push_back(item.source_id);
      }
      Tensor sketch_batch;
      if (!sketches.empty()) {
        sketch_batch = Tensor({b, 1, config.resolution, config.resolution});
        for (int i = 0; i < b; ++i) {
          const auto& item = sketches[sketch_order[sk++ % sketch_order.size()]];
          const Tensor l = corpus::rgb_to_luma(load_at_res(item));
          std::copy(l.data(), l.data() + l.numel(),
                    sketch_batch.data() + (int64_t)i * l.numel());
        }
      }

      gopt.zero_grad();
      const Tensor drawings = draw_forward(*nets.encoder, *nets.decoder, photo_batch, true);
      Tensor ddraw(drawings.shape());
      const DrawLossParts parts =
          draw_losses(drawings, photo_batch, ids,
                      sketches.empty() ? nullptr : &sketch_batch, nets, providers,
                      config, &ddraw);
      nets.encoder->backward(nets.decoder->backward(ddraw));
      gopt.step();

      if (config.lambda_adv > 0)
        discriminator_step(*nets.discriminator, sketch_batch, drawings, &dopt);

      sums.adv += parts.adv;
      sums.geom += parts.geom;
      sums.sem += parts.sem;
      sums.cyc += parts.cyc;
      sums.total += parts.total;
      ++steps;
    }
    DrawLossParts mean{sums.adv / steps, sums.geom / steps, sums.sem / steps,
                       sums.cyc / steps, sums.total / steps};
    outcome.epoch_losses.push_back(mean);
    outcome.epoch_lr.push_back(lr);
    if (on_epoch) on_epoch(epoch, mean);
  }

  outcome.encoder.manifest = nets.encoder->meta;
  outcome.encoder.manifest.stage_history = {corpus::kDomainDraw};
  outcome.encoder.manifest.epoch = config.epochs;
  if (!outcome.epoch_losses.empty()) {
    const auto& last = outcome.epoch_losses.back();
    outcome.encoder.manifest.metrics = {{"adv", last.adv},
                                        {"geom", last.geom},
                                        {"sem", last.sem},
                                        {"cyc", last.cyc},
                                        {"total", last.total}};
  }
  outcome.encoder.parameters = nets::export_params(*nets.encoder);

  if (!out_dir.empty()) {
    nets::save_checkpoint(outcome.encoder, (fs::path(out_dir) / "encoder").string());
    nets::CheckpointArchive aux;
    aux.manifest = nets.decoder_meta;
    aux.parameters = nets::export_params(*nets.decoder);
    nets::save_checkpoint(aux, (fs::path(out_dir) / "decoder").string());
    aux.manifest = nets.recovery_meta;
    aux.parameters = nets::export_params(*nets.recovery);
    nets::save_checkpoint(aux, (fs::path(out_dir) / "recovery").string());
    aux.manifest = nets.discriminator_meta;
    aux.parameters = nets::export_params(*nets.discriminator);
    nets::save_checkpoint(aux, (fs::path(out_dir) / "discriminator").string());
  }
  return outcome;
}

}  // namespace sketchlab::draw

#include "vqwave/train/evaluate.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <limits>

#include "vqwave/dsp/signal.hpp"
#include "vqwave/dsp/wav.hpp"
#include "vqwave/error.hpp"

namespace vqwave::train {

namespace {

dsp::Waveform trim(const dsp::Waveform& w, std::size_t len) {
  return dsp::Waveform(std::vector<double>(w.vector().begin(), w.vector().begin() + static_cast<std::ptrdiff_t>(len)),
                       w.sample_rate());
}

std::string cell(double v) {
  char buf[32];
  if (std::isinf(v)) return v > 0 ? "+inf" : "-inf";
  if (std::isnan(v)) return "-";
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

}  // namespace

int bucket_index(double snr_db, const std::vector<double>& centres) {
  if (centres.empty()) return -1;
  double half = 2.5;
  if (centres.size() > 1) {
    half = std::numeric_limits<double>::infinity();
    for (std::size_t i = 1; i < centres.size(); ++i) half = std::min(half, std::abs(centres[i] - centres[i - 1]) / 2);
  }
  int best = -1;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < centres.size(); ++i) {
    const double d = std::abs(snr_db - centres[i]);
    if (d < best_d) {
      best_d = d;
      best = static_cast<int>(i);
    }
  }
  return best_d <= half ? best : -1;
}

EvalReport evaluate_objective(CodecModel& model, const std::vector<EvalItem>& items, const EvalOptions& opts) {
  EvalReport report;
  const std::size_t nb = opts.buckets.size();
  std::vector<std::vector<int>> indices_per_bucket(nb);
  std::vector<double> ce(nb, 0.0), out_snr(nb, 0.0), in_snr(nb, 0.0);
  std::vector<int> count(nb, 0);
  std::vector<std::vector<std::vector<int>>> head_indices(nb);
  const int upsample = model.config().decoder.upsample_factor;
  const int heads = model.config().quantizer.num_speech_codebooks;

  for (const auto& item : items) {
    if (!item.reference) {
      report.warnings.push_back("skipping " + item.name + ": missing clean reference");
      continue;
    }
    const int b = bucket_index(item.snr_db, opts.buckets);
    if (b < 0) {
      report.warnings.push_back("skipping " + item.name + ": SNR label " + cell(item.snr_db) + " dB fits no bucket");
      continue;
    }
    const std::size_t len = std::min(item.noisy.size(), item.reference->size()) / upsample * upsample;
    if (len == 0) {
      report.warnings.push_back("skipping " + item.name + ": shorter than one latent frame");
      continue;
    }
    const dsp::Waveform x = trim(item.noisy, len);
    const dsp::Waveform ref = trim(*item.reference, len);

    nn::Tape tape;
    const auto f = model.forward(tape, Batch{{x}, {ref}}, nn::Mode::Eval);
    ce[b] += f.ce.item();
    head_indices[b].resize(static_cast<std::size_t>(heads));
    for (int h = 0; h < heads; ++h) {
      const auto& idx = f.quantized.heads[static_cast<std::size_t>(h)].indices;
      head_indices[b][h].insert(head_indices[b][h].end(), idx.begin(), idx.end());
    }

    dsp::Waveform estimate = x;
    if (opts.estimator == Estimator::Model) estimate = model.decode(f.quantized.utterance(0), opts.seed, opts.temperature);
    out_snr[b] += dsp::segmental_snr(ref.samples(), estimate.samples());
    in_snr[b] += dsp::segmental_snr(ref.samples(), x.samples());
    ++count[b];
  }

  for (std::size_t b = 0; b < nb; ++b) {
    BucketResult r;
    r.snr_db = opts.buckets[b];
    r.count = count[b];
    const double nan = std::numeric_limits<double>::quiet_NaN();
    if (count[b] > 0) {
      r.ce = ce[b] / count[b];
      double perp = 0.0;
      for (const auto& idx : head_indices[b]) perp += codebook_perplexity(idx);
      r.perplexity = perp / heads;
      r.segsnr_output = out_snr[b] / count[b];
      r.segsnr_input = in_snr[b] / count[b];
    } else {
      r.ce = r.perplexity = r.segsnr_output = r.segsnr_input = nan;
    }
    report.buckets.push_back(r);
  }
  return report;
}

std::string EvalReport::table() const {
  std::string out = "metric                 ";
  char buf[64];
  for (const auto& b : buckets) {
    std::snprintf(buf, sizeof buf, "%12s", (cell(b.snr_db) + " dB").c_str());
    out += buf;
  }
  out += "\n";
  auto row = [&](const char* name, auto get) {
    std::snprintf(buf, sizeof buf, "%-23s", name);
    out += buf;
    for (const auto& b : buckets) {
      std::snprintf(buf, sizeof buf, "%12s", get(b).c_str());
      out += buf;
    }
    out += "\n";
  };
  row("clips", [](const BucketResult& b) { return std::to_string(b.count); });
  row("ce (nats)", [](const BucketResult& b) { return cell(b.ce); });
  row("code perplexity", [](const BucketResult& b) { return cell(b.perplexity); });
  row("segSNR output (dB)", [](const BucketResult& b) { return cell(b.segsnr_output); });
  row("segSNR input (dB)", [](const BucketResult& b) { return cell(b.segsnr_input); });
  return out;
}

std::vector<EvalItem> load_eval_items(const data::DatasetManifest& manifest) {
  std::vector<EvalItem> items;
  for (const auto& p : manifest.eval) {
    EvalItem item;
    item.name = p.noisy.string();
    item.noisy = dsp::wav_read(p.noisy);
    item.noisy.require_codec_rate();
    item.snr_db = p.snr_db;
    if (std::filesystem::exists(p.reference)) {
      item.reference = dsp::wav_read(p.reference);
      item.reference->require_codec_rate();
    }
    items.push_back(std::move(item));
  }
  return items;
}

}  // namespace vqwave::train

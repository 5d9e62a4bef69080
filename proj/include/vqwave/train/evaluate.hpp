#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "vqwave/codec_model.hpp"
#include "vqwave/data/manifest.hpp"

namespace vqwave::train {

struct EvalItem {
  std::string name;
  dsp::Waveform noisy;
  std::optional<dsp::Waveform> reference;  // clean signal; items without one are skipped
  double snr_db = 0.0;
};

enum class Estimator {
  Model,        // decode the model's output
  Passthrough,  // use the input itself as the estimate
};

struct EvalOptions {
  std::vector<double> buckets{2.5, 7.5, 12.5, 17.5};
  std::uint64_t seed = 0;
  double temperature = 1.0;
  Estimator estimator = Estimator::Model;
};

struct BucketResult {
  double snr_db = 0.0;
  int count = 0;
  double ce = 0.0;                // teacher-forced, nats
  double perplexity = 0.0;        // mean over speech heads
  double segsnr_output = 0.0;     // estimate vs reference, dB
  double segsnr_input = 0.0;      // noisy input vs reference, dB
};

struct EvalReport {
  std::vector<BucketResult> buckets;
  std::vector<std::string> warnings;

  /// Metrics as rows, SNR buckets as columns.
  std::string table() const;
};

/// Index of the bucket whose centre is nearest to `snr_db`, or -1 when the
/// label is more than half a bucket spacing (2.5 dB for a single bucket)
/// away from every centre.
int bucket_index(double snr_db, const std::vector<double>& centres);

EvalReport evaluate_objective(CodecModel& model, const std::vector<EvalItem>& items, const EvalOptions& opts = {});

/// Reads the evaluation pairs of a manifest. Missing references are kept as
/// items without a reference so that evaluation can warn about them.
std::vector<EvalItem> load_eval_items(const data::DatasetManifest& manifest);

}  // namespace vqwave::train

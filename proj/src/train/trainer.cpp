#include "vqwave/train/trainer.hpp"

#include <cmath>

#include "vqwave/data/sampler.hpp"
#include "vqwave/error.hpp"
#include "vqwave/nn/checkpoint.hpp"

namespace vqwave::train {

namespace {

std::vector<double> head_perplexities(const Bottleneck::Output& q) {
  std::vector<double> out;
  for (const auto& h : q.heads) out.push_back(codebook_perplexity(h.indices));
  return out;
}

// Keys that determine tensor shapes or feature extraction.
std::string architecture_text(const TrainConfig& cfg) {
  std::string out;
  for (const auto& k : config_keys()) {
    const bool arch = k.name.rfind("mel.", 0) == 0 || k.name.rfind("encoder.", 0) == 0 ||
                      k.name.rfind("decoder.", 0) == 0 || k.name == "quantizer.num_speech_codebooks" ||
                      k.name == "quantizer.bits" || k.name == "quantizer.code_dim";
    if (arch) out += k.name + "=" + get_config_value(cfg, k.name) + "\n";
  }
  return out;
}

LossReport make_report(const CodecModel::Forward& f) {
  LossReport r;
  r.total = f.total.item();
  r.ce = f.ce.item();
  r.vq_commitment = f.commitment.item();
  r.codebook_error = f.quantized.codebook_error;
  r.perplexity = head_perplexities(f.quantized);
  r.speaker_perplexity = codebook_perplexity(f.quantized.speaker_head.indices);
  return r;
}

}  // namespace

std::mt19937_64 derived_rng(std::uint64_t seed, std::int64_t step, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(step), static_cast<std::uint32_t>(static_cast<std::uint64_t>(step) >> 32),
                    static_cast<std::uint32_t>(stream)};
  return std::mt19937_64(seq);
}

BatchSource corpus_source(data::Corpus& corpus, const TrainConfig& cfg) {
  data::SamplerConfig sc = cfg.sampler;
  sc.sample_seconds = cfg.sample_seconds;
  sc.sample_rate = cfg.model.mel.sample_rate;
  const auto mode = noise_mode(cfg.mode);
  const int batch_size = cfg.batch_size;
  const std::uint64_t seed = cfg.seed;
  return [&corpus, sc, mode, batch_size, seed](std::int64_t step) {
    auto rng = derived_rng(seed, step, 0);
    Batch b;
    for (int i = 0; i < batch_size; ++i) {
      auto ex = data::sample_training_example(corpus, rng, mode, sc);
      b.x.push_back(std::move(ex.x));
      b.target.push_back(std::move(ex.target));
    }
    return b;
  };
}

BatchSource fixed_source(Batch examples, int batch_size) {
  if (examples.size() == 0 || batch_size < 1) throw invalid_input("fixed_source: need examples and a positive batch size");
  return [ex = std::move(examples), batch_size](std::int64_t step) {
    Batch b;
    const auto n = static_cast<std::int64_t>(ex.size());
    for (int i = 0; i < batch_size; ++i) {
      const auto k = static_cast<std::size_t>((step * batch_size + i) % n);
      b.x.push_back(ex.x[k]);
      b.target.push_back(ex.target[k]);
    }
    return b;
  };
}

LossReport total_loss(CodecModel& model, const Batch& batch, nn::Rng* init_rng) {
  nn::Tape tape;
  const auto f = model.forward(tape, batch, nn::Mode::Train, init_rng);
  return make_report(f);
}

void check_finite(const nn::Tape& tape, nn::Var loss) {
  if (std::isfinite(loss.item())) return;
  std::string where = "unknown";
  if (auto nf = tape.first_non_finite()) where = "node " + std::to_string(nf->first) + " (" + nf->second + ")";
  throw Error(ErrorKind::Numerical, "non-finite loss " + std::to_string(loss.item()) + "; first non-finite tensor: " + where);
}

void check_finite_gradients(const std::vector<nn::Parameter*>& params) {
  for (const auto* p : params) {
    if (!p->grad.all_finite()) throw Error(ErrorKind::Numerical, "non-finite gradient in parameter " + p->name);
  }
}

Trainer::Trainer(TrainConfig cfg, BatchSource source)
    : cfg_(std::move(cfg)), source_(std::move(source)), optimizer_(cfg_.adam) {
  cfg_.validate();
  model_ = std::make_unique<CodecModel>(cfg_.model, cfg_.seed);
}

LossReport Trainer::train_step(const Batch& batch) {
  const std::int64_t t = optimizer_.steps();
  auto init_rng = derived_rng(cfg_.seed, t, 1);
  const auto& params = model_->parameters();

  nn::Tape tape;
  const auto f = model_->forward(tape, batch, nn::Mode::Train, &init_rng);
  const LossReport report = make_report(f);
  check_finite(tape, f.total);

  // Codebook statistics come from this forward pass; gradients never touch
  // the codebooks, so updating them before backward is equivalent.
  model_->bottleneck.ema_update(f.quantized);

  optimizer_.zero_grad(params);
  tape.backward(f.total, nn::BackwardOptions{true});
  check_finite_gradients(params);
  optimizer_.config().lr = cfg_.learning_rate_at(t + 1);
  optimizer_.step(params);
  return report;
}

LossReport Trainer::step() { return train_step(source_(optimizer_.steps())); }

void Trainer::run(const std::function<void(std::int64_t, const LossReport&)>& on_step) {
  while (optimizer_.steps() < cfg_.steps) {
    const LossReport r = step();
    if (on_step) on_step(optimizer_.steps(), r);
  }
}

void Trainer::save(const std::filesystem::path& path) {
  nn::save_checkpoint(path, nn::Checkpoint::capture(model_->registry(), cfg_.to_text(), optimizer_.steps()));
}

void Trainer::load(const std::filesystem::path& path) {
  const nn::Checkpoint ck = nn::load_checkpoint(path);
  const TrainConfig stored = parse_config(ck.config_text);
  if (architecture_text(stored) != architecture_text(cfg_)) {
    throw incompatible("checkpoint architecture differs from the trainer configuration");
  }
  ck.restore(model_->registry());
  optimizer_.set_steps(ck.optimizer_step);
}

TrainConfig checkpoint_config(const std::filesystem::path& path) {
  return parse_config(nn::load_checkpoint(path).config_text);
}

std::unique_ptr<CodecModel> load_model(const std::filesystem::path& path) {
  const nn::Checkpoint ck = nn::load_checkpoint(path);
  const TrainConfig cfg = parse_config(ck.config_text);
  auto model = std::make_unique<CodecModel>(cfg.model, cfg.seed);
  ck.restore(model->registry());
  return model;
}

}  // namespace vqwave::train

#include "vqwave/data/manifest.hpp"

#include <fstream>
#include <sstream>

#include "vqwave/dsp/wav.hpp"
#include "vqwave/error.hpp"

namespace vqwave::data {

namespace {

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, sep)) out.push_back(item);
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \r\n");
  if (b == std::string::npos) return {};
  return s.substr(b, s.find_last_not_of(" \r\n") - b + 1);
}

double parse_number(const std::string& s, const std::string& where) {
  std::size_t used = 0;
  double v = 0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != s.size()) throw invalid_input(where + ": not a number: '" + s + "'");
  return v;
}

}  // namespace

DatasetManifest DatasetManifest::parse(const std::string& text, const std::filesystem::path& base_dir) {
  DatasetManifest m;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string where = "manifest line " + std::to_string(lineno);
    if (trim(line).empty() || trim(line)[0] == '#') continue;
    const auto fields = split(trim(line), '\t');
    if (fields.size() != 3) throw invalid_input(where + ": expected path<TAB>weight<TAB>flags");
    std::filesystem::path path = fields[0];
    if (path.empty()) throw invalid_input(where + ": empty path");
    if (path.is_relative()) path = base_dir / path;
    const double weight = parse_number(fields[1], where);
    if (!(weight > 0.0)) throw invalid_input(where + ": weight must be positive");

    bool speech = false, noise = false, nonstationary = false;
    std::optional<std::filesystem::path> ref;
    std::optional<double> snr;
    for (const auto& raw : split(fields[2], ',')) {
      const std::string tok = trim(raw);
      if (tok == "speech") {
        speech = true;
      } else if (tok == "noise") {
        noise = true;
      } else if (tok == "nonstationary") {
        nonstationary = true;
      } else if (tok.rfind("ref=", 0) == 0) {
        std::filesystem::path p = tok.substr(4);
        if (p.empty()) throw invalid_input(where + ": empty ref= path");
        ref = p.is_relative() ? base_dir / p : p;
      } else if (tok.rfind("snr=", 0) == 0) {
        snr = parse_number(tok.substr(4), where);
      } else {
        throw invalid_input(where + ": unknown flag '" + tok + "'");
      }
    }
    const int kinds = int(speech) + int(noise) + int(ref.has_value());
    if (kinds != 1) throw invalid_input(where + ": entry must be exactly one of speech, noise, or ref=<path>");
    if (nonstationary && !noise) throw invalid_input(where + ": nonstationary applies to noise entries only");
    if (snr && !ref) throw invalid_input(where + ": snr= applies to evaluation entries only");
    if (speech) m.speech.push_back({path, weight, false});
    if (noise) m.noise.push_back({path, weight, nonstationary});
    if (ref) {
      if (!snr) throw invalid_input(where + ": evaluation entry needs snr=<dB>");
      m.eval.push_back({path, *ref, *snr});
    }
  }
  return m;
}

DatasetManifest DatasetManifest::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw invalid_input("cannot open manifest " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), path.parent_path());
}

void DatasetManifest::validate(bool training, bool need_noise) const {
  if (training && speech.empty()) throw invalid_input("manifest has no speech entries");
  if (training && need_noise && noise.empty()) throw invalid_input("manifest has no noise entries");
  auto check = [](const std::filesystem::path& p) {
    if (!std::filesystem::exists(p)) throw invalid_input("missing file: " + p.string());
    dsp::wav_read(p).require_codec_rate();
  };
  for (const auto& e : speech) check(e.path);
  if (need_noise)
    for (const auto& e : noise) check(e.path);
  for (const auto& e : eval) check(e.noisy);
}

Corpus::Corpus(DatasetManifest manifest, double nonstationary_weight) : manifest_(std::move(manifest)) {
  for (const auto& e : manifest_.speech) speech_weights_.push_back(e.weight);
  for (const auto& e : manifest_.noise) noise_weights_.push_back(e.weight * (e.nonstationary ? nonstationary_weight : 1.0));
}

Corpus Corpus::from_memory(std::vector<dsp::Waveform> speech, std::vector<dsp::Waveform> noise,
                           std::vector<bool> nonstationary, double nonstationary_weight) {
  Corpus c;
  for (std::size_t i = 0; i < speech.size(); ++i) {
    c.speech_weights_.push_back(1.0);
    c.speech_cache_[i] = std::move(speech[i]);
    c.manifest_.speech.push_back({"<memory>", 1.0, false});
  }
  for (std::size_t i = 0; i < noise.size(); ++i) {
    const bool ns = i < nonstationary.size() && nonstationary[i];
    c.noise_weights_.push_back(ns ? nonstationary_weight : 1.0);
    c.noise_cache_[i] = std::move(noise[i]);
    c.manifest_.noise.push_back({"<memory>", 1.0, ns});
  }
  return c;
}

const dsp::Waveform& Corpus::fetch(std::map<std::size_t, dsp::Waveform>& cache,
                                   const std::vector<ManifestEntry>& entries, std::size_t i) {
  if (i >= entries.size()) throw invalid_input("corpus index out of range");
  if (auto it = cache.find(i); it != cache.end()) return it->second;
  if (on_read) on_read(entries[i].path);
  dsp::Waveform w = dsp::wav_read(entries[i].path);
  w.require_codec_rate();
  return cache.emplace(i, std::move(w)).first->second;
}

const dsp::Waveform& Corpus::speech(std::size_t i) { return fetch(speech_cache_, manifest_.speech, i); }
const dsp::Waveform& Corpus::noise(std::size_t i) { return fetch(noise_cache_, manifest_.noise, i); }

}  // namespace vqwave::data

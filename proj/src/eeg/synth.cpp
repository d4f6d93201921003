#include <array>
#include <cmath>
#include <cstdio>
#include <numbers>

#include "seizure/common.hpp"
#include "seizure/eeg_data.hpp"

namespace seizure::eeg {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Paul Kellet's pink-noise filter; roughly unit variance for unit white input.
class PinkNoise {
 public:
  double next(double white) {
    b_[0] = 0.99886 * b_[0] + white * 0.0555179;
    b_[1] = 0.99332 * b_[1] + white * 0.0750759;
    b_[2] = 0.96900 * b_[2] + white * 0.1538520;
    b_[3] = 0.86650 * b_[3] + white * 0.3104856;
    b_[4] = 0.55000 * b_[4] + white * 0.5329522;
    b_[5] = -0.7616 * b_[5] - white * 0.0168980;
    const double out = b_[0] + b_[1] + b_[2] + b_[3] + b_[4] + b_[5] + b_[6] + white * 0.5362;
    b_[6] = white * 0.115926;
    return out * 0.25;
  }

 private:
  std::array<double, 7> b_{};
};

double discharge_wave(double phase) {
  return 0.75 * (std::sin(phase) + 0.5 * std::sin(2.0 * phase + 0.3) +
                 0.25 * std::sin(3.0 * phase + 0.6));
}

struct PatientTraits {
  double gain;
  double alpha_hz;
  std::array<double, kNumChannels> channel_gain;
};

PatientTraits patient_traits(Rng rng) {
  PatientTraits t{};
  t.gain = rng.uniform(0.75, 1.25);
  t.alpha_hz = rng.uniform(8.5, 11.5);
  for (auto& g : t.channel_gain) g = rng.uniform(0.7, 1.1);
  return t;
}

EegRecord generate_record(const SynthParams& p, const PatientTraits& traits, Rng rng,
                          const std::string& patient_id, const std::string& record_id) {
  const double fs = kTargetFs;
  const size_t n = static_cast<size_t>(std::llround(p.record_seconds * fs));
  const size_t onset = static_cast<size_t>(std::llround(p.onset_seconds * fs));

  EegRecord rec;
  rec.patient_id = patient_id;
  rec.record_id = record_id;
  for (size_t c = 0; c < kNumChannels; ++c) rec.channels[c] = std::string(kChannelNames[c]);
  rec.fs = kTargetFs;
  rec.onset_sample = onset;
  rec.samples.assign(n * kNumChannels, 0.0);

  const double bg_scale = p.interictal_scale_uv * traits.gain;
  const double rhythm_hz = rng.uniform(p.rhythm_lo_hz, p.rhythm_hi_hz);
  const double growth = rng.uniform(3.0, 5.0);
  const bool has_gamma = rng.uniform() < p.gamma_burst_prob;

  std::array<double, kNumChannels> alpha_phase{}, alpha_mod_phase{}, lag_s{}, own_phase{};
  for (size_t c = 0; c < kNumChannels; ++c) {
    alpha_phase[c] = rng.uniform(0.0, kTwoPi);
    alpha_mod_phase[c] = rng.uniform(0.0, kTwoPi);
    lag_s[c] = rng.uniform(0.0, 0.03);
    own_phase[c] = rng.uniform(0.0, kTwoPi);
  }

  // Background: shared and per-channel pink noise plus alpha rhythm.
  std::array<PinkNoise, kNumChannels> own_noise{};
  PinkNoise shared_noise;
  for (size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / fs;
    const double shared = shared_noise.next(rng.normal());
    const bool ictal = i >= onset;
    for (size_t c = 0; c < kNumChannels; ++c) {
      const double noise = 0.8 * own_noise[c].next(rng.normal()) + 0.45 * shared;
      const double mod = 0.7 + 0.3 * std::sin(kTwoPi * 0.13 * t + alpha_mod_phase[c]);
      const double alpha_gain = ictal ? 0.3 : 1.0;
      const double alpha = alpha_gain * mod * std::sin(kTwoPi * traits.alpha_hz * t + alpha_phase[c]);
      rec.samples[i * kNumChannels + c] =
          traits.channel_gain[c] * bg_scale * (0.5 * noise + 0.9 * alpha);
    }
  }

  // Ictal discharge from onset: rhythm slows slightly while amplitude grows.
  const double ictal_len_s = static_cast<double>(n - onset) / fs;
  auto envelope = [&](double tau) {
    return p.ictal_scale_uv * traits.gain * (1.0 + (growth - 1.0) * std::min(tau / 8.0, 1.0));
  };
  auto phase_at = [&](double tau) {
    // Instantaneous frequency falls linearly to 80% over the ictal span.
    const double slope = -0.2 * rhythm_hz / std::max(ictal_len_s, 1.0);
    return kTwoPi * (rhythm_hz * tau + 0.5 * slope * tau * tau);
  };

  // Sharp transients and optional high-gamma bursts, shared across channels.
  std::vector<double> spike_times;
  for (double tau = rng.uniform(0.2, 1.0); tau < ictal_len_s; tau += rng.uniform(0.3, 1.1)) {
    spike_times.push_back(tau);
  }
  struct Burst {
    double start, length, hz;
  };
  std::vector<Burst> bursts;
  if (has_gamma) {
    for (double tau = rng.uniform(1.0, 5.0); tau < ictal_len_s; tau += rng.uniform(3.0, 8.0)) {
      bursts.push_back({tau, rng.uniform(0.5, 2.0), rng.uniform(70.0, 100.0)});
    }
  }

  size_t next_spike = 0;
  for (size_t i = onset; i < n; ++i) {
    const double tau = static_cast<double>(i - onset) / fs;
    const double env = envelope(tau);
    while (next_spike < spike_times.size() && spike_times[next_spike] < tau - 0.1) ++next_spike;
    double spike = 0.0;
    for (size_t s = next_spike; s < spike_times.size() && spike_times[s] < tau + 0.1; ++s) {
      const double d = (tau - spike_times[s]) / 0.012;
      spike += -d * std::exp(-0.5 * d * d) * 1.6;
    }
    double gamma = 0.0;
    for (const auto& b : bursts) {
      if (tau < b.start || tau >= b.start + b.length) continue;
      const double u = (tau - b.start) / b.length;
      gamma += 0.18 * std::sin(std::numbers::pi * u) * std::sin(kTwoPi * b.hz * tau);
    }
    for (size_t c = 0; c < kNumChannels; ++c) {
      const double common = discharge_wave(phase_at(std::max(tau - lag_s[c], 0.0)));
      const double own = discharge_wave(phase_at(tau) + own_phase[c]);
      const double v = env * (0.8 * common + 0.2 * own + 0.6 * spike + gamma);
      rec.samples[i * kNumChannels + c] += traits.channel_gain[c] * v;
    }
  }
  return rec;
}

}  // namespace

nlohmann::json to_json(const SynthParams& params) {
  return {{"n_patients", params.n_patients},
          {"records_per_patient", params.records_per_patient},
          {"interictal_scale_uv", params.interictal_scale_uv},
          {"ictal_scale_uv", params.ictal_scale_uv},
          {"rhythm_lo_hz", params.rhythm_lo_hz},
          {"rhythm_hi_hz", params.rhythm_hi_hz},
          {"gamma_burst_prob", params.gamma_burst_prob},
          {"seed", params.seed},
          {"record_seconds", params.record_seconds},
          {"onset_seconds", params.onset_seconds}};
}

std::vector<EegRecord> synth_generate(const SynthParams& params) {
  if (params.interictal_scale_uv <= 0.0 || params.ictal_scale_uv <= 0.0) {
    throw Error(ErrorCode::kInvalidInput, "synthetic amplitude scales must be positive");
  }
  if (params.rhythm_lo_hz <= 0.0 || params.rhythm_hi_hz < params.rhythm_lo_hz) {
    throw Error(ErrorCode::kInvalidInput, "invalid ictal rhythm band");
  }
  if (params.onset_seconds + 60.0 > params.record_seconds) {
    throw Error(ErrorCode::kInvalidInput, "synthetic record must contain a full ictal minute");
  }
  std::vector<EegRecord> out;
  out.reserve(params.n_patients * params.records_per_patient);
  for (size_t pi = 0; pi < params.n_patients; ++pi) {
    Rng patient_rng = Rng(params.seed).fork(pi);
    const PatientTraits traits = patient_traits(patient_rng.fork(0));
    char pid[32];
    std::snprintf(pid, sizeof(pid), "P%03zu", pi);
    for (size_t r = 0; r < params.records_per_patient; ++r) {
      char rid[48];
      std::snprintf(rid, sizeof(rid), "P%03zu_R%zu", pi, r);
      out.push_back(generate_record(params, traits, patient_rng.fork(r + 1), pid, rid));
    }
  }
  return out;
}

}  // namespace seizure::eeg

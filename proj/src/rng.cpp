#include "mondrian/rng.hpp"

#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "mondrian/binary_io.hpp"

namespace mondrian {

namespace {

// splitmix64 finalizer; turns (seed, stream_id) into well-mixed engine seeds.
std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

RngStream::RngStream(std::uint64_t seed, std::uint64_t stream_id)
    : seed_(seed), stream_id_(stream_id) {
  const std::uint64_t a = mix64(seed);
  const std::uint64_t b = mix64(a ^ mix64(~stream_id));
  std::seed_seq seq{static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(a >> 32),
                    static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(b >> 32)};
  engine_.seed(seq);
}

RngStream RngStream::from_script(std::vector<double> uniforms) {
  RngStream rng;
  rng.scripted_ = true;
  rng.script_ = std::move(uniforms);
  return rng;
}

double RngStream::next_uniform() {
  if (scripted_) {
    if (script_pos_ >= script_.size())
      throw std::logic_error("scripted RngStream exhausted");
    return script_[script_pos_++];
  }
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

void RngStream::save(std::ostream& out) const {
  io::write_u8(out, scripted_ ? 1 : 0);
  io::write_u64(out, seed_);
  io::write_u64(out, stream_id_);
  if (scripted_) {
    io::write_u64(out, script_pos_);
    io::write_vec(out, script_);
  } else {
    std::ostringstream ss;
    ss << engine_;
    io::write_string(out, ss.str());
  }
}

RngStream RngStream::load(std::istream& in) {
  RngStream rng;
  rng.scripted_ = io::read_u8(in) != 0;
  rng.seed_ = io::read_u64(in);
  rng.stream_id_ = io::read_u64(in);
  if (rng.scripted_) {
    rng.script_pos_ = io::read_u64(in);
    rng.script_ = io::read_vec<double>(in);
  } else {
    std::istringstream ss(io::read_string(in));
    ss >> rng.engine_;
    if (!ss) throw std::runtime_error("snapshot: bad rng state");
  }
  return rng;
}

bool RngStream::operator==(const RngStream& other) const {
  if (scripted_ != other.scripted_) return false;
  if (scripted_)
    return script_ == other.script_ && script_pos_ == other.script_pos_;
  return engine_ == other.engine_;
}

double sample_exponential(RngStream& rng, double rate) {
  if (!(rate >= 0.0) || !std::isfinite(rate))
    throw std::invalid_argument("sample_exponential: rate must be finite and >= 0");
  if (rate == 0.0) return std::numeric_limits<double>::infinity();
  const double u = rng.next_uniform();
  return -std::log1p(-u) / rate;
}

std::size_t sample_categorical_proportional(RngStream& rng,
                                            std::span<const double> weights) {
  double total = 0.0;
  for (const double w : weights) {
    if (!(w >= 0.0) || !std::isfinite(w))
      throw std::invalid_argument(
          "sample_categorical_proportional: weights must be finite and >= 0");
    total += w;
  }
  if (!(total > 0.0))
    throw std::invalid_argument(
        "sample_categorical_proportional: total weight must be positive");
  const double target = rng.next_uniform() * total;
  double cum = 0.0;
  std::size_t last_positive = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (weights[i] > 0.0) last_positive = i;
    cum += weights[i];
    if (target < cum) return i;
  }
  return last_positive;  // guards against accumulated rounding in cum
}

double sample_uniform_interval(RngStream& rng, double lo, double hi) {
  if (!(lo <= hi) || !std::isfinite(lo) || !std::isfinite(hi))
    throw std::invalid_argument("sample_uniform_interval: need finite lo <= hi");
  if (lo == hi) return lo;
  return lo + rng.next_uniform() * (hi - lo);
}

double expected_truncated_discount(double eta, double gamma, double delta) {
  if (!(eta > 0.0) || !std::isfinite(eta))
    throw std::invalid_argument("expected_truncated_discount: eta must be > 0");
  if (!(gamma >= 0.0))
    throw std::invalid_argument("expected_truncated_discount: gamma must be >= 0");
  if (!(delta > 0.0))
    throw std::invalid_argument("expected_truncated_discount: delta must be > 0");
  if (gamma == 0.0) return 1.0;
  const double ratio = eta / (eta + gamma);
  if (std::isinf(delta)) return ratio;
  // (1 - e^{-(eta+gamma) d}) / (1 - e^{-eta d}), kept accurate for small d.
  return ratio * std::expm1(-(eta + gamma) * delta) / std::expm1(-eta * delta);
}

}  // namespace mondrian

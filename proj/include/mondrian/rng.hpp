#pragma once

#include <cstdint>
#include <iosfwd>
#include <random>
#include <span>
#include <vector>

namespace mondrian {

/// Deterministic random stream, one per tree (or per experiment).
///
/// A stream is derived from a (seed, stream_id) pair: the same pair always
/// reproduces the same draw sequence, and distinct stream ids give
/// statistically independent sequences. Every sampler below consumes uniforms
/// exclusively through next_uniform(), so a stream can be replaced by a
/// scripted one in tests to pin exact draw values.
class RngStream {
 public:
  RngStream() : RngStream(0, 0) {}
  RngStream(std::uint64_t seed, std::uint64_t stream_id);

  /// Stream replaying a fixed sequence of uniforms. Draws past the end of
  /// the script throw; intended for deterministic replay in tests.
  static RngStream from_script(std::vector<double> uniforms);

  /// Uniform double in [0, 1) with 53 random bits.
  double next_uniform();

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream_id() const { return stream_id_; }

  void save(std::ostream& out) const;
  static RngStream load(std::istream& in);

  bool operator==(const RngStream& other) const;

 private:
  std::mt19937_64 engine_;
  std::uint64_t seed_ = 0;
  std::uint64_t stream_id_ = 0;
  bool scripted_ = false;
  std::vector<double> script_;
  std::size_t script_pos_ = 0;
};

/// Draws E ~ Exp(rate). A zero rate returns +infinity without consuming a
/// draw: a clock with rate zero never fires, which is exactly the "block
/// becomes a leaf" case. Negative or non-finite rates throw.
double sample_exponential(RngStream& rng, double rate);

/// Draws an index with probability proportional to weights[i]. Weights must
/// be finite and non-negative with a strictly positive total.
std::size_t sample_categorical_proportional(RngStream& rng,
                                            std::span<const double> weights);

/// Uniform draw from [lo, hi]. Degenerate intervals (lo == hi) return lo
/// without consuming a draw. lo > hi throws.
double sample_uniform_interval(RngStream& rng, double lo, double hi);

/// E[exp(-gamma*X)] for X ~ Exp(eta) truncated to [0, delta]; delta may be
/// +infinity, in which case the value is eta / (eta + gamma). Requires
/// eta > 0 and gamma >= 0; uses expm1 so small eta*delta stays accurate.
double expected_truncated_discount(double eta, double gamma, double delta);

}  // namespace mondrian

#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace sparsebandit {

// Deterministic stream splitting. Seeds are derived by hashing a path of
// integers / tags into a 64-bit state (SplitMix64 finalizer), so the stream
// for (master_seed, rep, "noise") never depends on how many other streams
// exist or in which order they were created.
std::uint64_t mix64(std::uint64_t x);
std::uint64_t hash_combine(std::uint64_t seed, std::uint64_t value);
std::uint64_t hash_tag(std::string_view tag);

class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : seed_(seed), gen_(mix64(seed)) {}

  // Child stream for `tag`; does not advance this stream.
  RngStream derive(std::string_view tag) const {
    return RngStream(hash_combine(seed_, hash_tag(tag)));
  }
  RngStream derive(std::uint64_t index) const {
    return RngStream(hash_combine(seed_, index));
  }

  double normal() {
    std::normal_distribution<double> dist(0.0, 1.0);
    return dist(gen_);
  }
  double uniform() {
    std::uniform_real_distribution<double> dist(0.0, 1.0);
    return dist(gen_);
  }
  double uniform(double lo, double hi) {
    std::uniform_real_distribution<double> dist(lo, hi);
    return dist(gen_);
  }
  // Uniform over {0, 1, ..., n-1}.
  int uniform_int(int n) {
    std::uniform_int_distribution<int> dist(0, n - 1);
    return dist(gen_);
  }
  std::mt19937_64& engine() { return gen_; }

 private:
  std::uint64_t seed_;
  std::mt19937_64 gen_;
};

// Stream at hash(root, path..., tag). The canonical way to build the
// per-replication environment / noise / policy streams.
RngStream derive_stream(std::uint64_t root, std::initializer_list<std::uint64_t> path,
                        std::string_view tag);

}  // namespace sparsebandit

/*
 * Copyright 2026 The imprintlab Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef IMPRINTLAB_RNG_H_
#define IMPRINTLAB_RNG_H_

#include <array>
#include <cstdint>

namespace imprintlab {

// Philox4x32-10 block function (Salmon et al., SC'11). Pure: the same
// (counter, key) always yields the same four words on every platform.
std::array<std::uint32_t, 4> Philox4x32(std::array<std::uint32_t, 4> counter,
                                        std::array<std::uint32_t, 2> key);

std::uint64_t SplitMix64(std::uint64_t x);

// Counter-based random stream. The key is the master seed and the stream id
// occupies the upper half of the counter, so streams never overlap and
// sequences are reproducible regardless of how work is scheduled.
class RngStream {
 public:
  RngStream(std::uint64_t master_seed, std::uint64_t stream_id);

  std::uint64_t master_seed() const { return master_seed_; }
  std::uint64_t stream_id() const { return stream_id_; }

  // Independent child stream, e.g. one per Monte Carlo replicate.
  RngStream Substream(std::uint64_t id) const;

  std::uint32_t NextU32();
  std::uint64_t NextU64();
  // 53-bit uniform in [0, 1).
  double Uniform();
  // Uniform in (0, 1); never returns an endpoint.
  double UniformOpen();
  // Unbiased integer in [0, n). n must be positive.
  std::uint64_t UniformInt(std::uint64_t n);
  double Normal();
  double Laplace(double scale);

 private:
  void Refill();

  std::uint64_t master_seed_;
  std::uint64_t stream_id_;
  std::uint64_t block_ = 0;
  std::array<std::uint32_t, 4> buffer_{};
  int used_ = 4;
  bool has_spare_normal_ = false;
  double spare_normal_ = 0.0;
};

}  // namespace imprintlab

#endif  // IMPRINTLAB_RNG_H_

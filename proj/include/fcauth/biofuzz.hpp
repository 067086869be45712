#pragma once

// Cancelable biometric templates, a block error-correcting codec and the
// fuzzy commitment that binds a 160-bit secret to a noisy template.

#include <array>
#include <cstddef>
#include <cstdint>
#include <memory>

#include "fcauth/primitives.hpp"

namespace fcauth::bio {

struct CodecParams {
  std::uint32_t repetition = 5;   // odd, >= 3
  std::uint32_t secret_bits = 160;

  // Throws UsageError on an even or too-small repetition factor.
  void validate() const;
  std::uint32_t correctable() const { return (repetition - 1) / 2; }
  std::size_t codeword_bits() const { return std::size_t{secret_bits} * repetition; }

  friend bool operator==(const CodecParams&, const CodecParams&) = default;
};

// Block code used by the commitment. Blocks are contiguous: block i covers
// codeword bits [i*block_bits(), (i+1)*block_bits()).
class BlockCodec {
 public:
  virtual ~BlockCodec() = default;
  virtual const CodecParams& params() const = 0;
  virtual BitString encode(const BitString& secret) const = 0;
  virtual BitString decode(const BitString& noisy) const = 0;
  virtual std::size_t block_bits() const = 0;
  virtual std::size_t correctable_per_block() const = 0;
};

// Each secret bit repeated r times; decoded by per-block majority vote.
class RepetitionCodec final : public BlockCodec {
 public:
  explicit RepetitionCodec(CodecParams params);

  const CodecParams& params() const override { return params_; }
  BitString encode(const BitString& secret) const override;
  BitString decode(const BitString& noisy) const override;
  std::size_t block_bits() const override { return params_.repetition; }
  std::size_t correctable_per_block() const override { return params_.correctable(); }

 private:
  CodecParams params_;
};

struct BiometricSample {
  enum class Label { kEnrollment, kQuery };

  BitString bits;
  Label label = Label::kEnrollment;
};

struct TransformParameter {
  std::array<std::uint8_t, 16> seed{};

  static TransformParameter generate(Rng& rng);
  friend bool operator==(const TransformParameter&, const TransformParameter&) = default;
};

struct CancelableTemplate {
  BitString bits;
  friend bool operator==(const CancelableTemplate&, const CancelableTemplate&) = default;
};

// f(BIO, TP): a TP-keyed bit permutation followed by XOR with a TP-derived
// pad. Preserves Hamming distance between samples under the same TP.
CancelableTemplate transform(const BiometricSample& sample, const TransformParameter& tp);

struct HelperData {
  BitString offset;  // CT xor codeword
  Digest check;      // h(secret)

  friend bool operator==(const HelperData&, const HelperData&) = default;
};

HelperData commit(const CancelableTemplate& ct, const BitString& secret, const BlockCodec& codec);
// Rejects with kBiometricMismatch when the decoded secret fails the check.
Result<BitString> open(const HelperData& helper, const CancelableTemplate& query, const BlockCodec& codec);
// The enrollment template recovered from helper data once the secret is
// known: offset xor encode(secret).
CancelableTemplate enrolled_template(const HelperData& helper, const BitString& secret, const BlockCodec& codec);

// ---- synthetic biometric model ----------------------------------------------

BiometricSample random_sample(std::size_t nbits, Rng& rng);
// Query sample: every bit flipped independently with probability flip_prob.
BiometricSample noisy_copy(const BiometricSample& base, double flip_prob, Rng& rng);
// Query sample with at most `per_block` flips in every block of `block_bits`.
BiometricSample bounded_noise_copy(const BiometricSample& base, std::size_t block_bits, std::size_t per_block,
                                   Rng& rng);

// ---- codec property check -------------------------------------------------------

struct CodecFuzzSummary {
  std::size_t trials = 0;
  std::size_t opened = 0;  // bounded-noise trials that returned the committed secret
  // Over-bound probes: t+1 flips in one block, every block and every choice of
  // flipped positions, at 8 secret bits.
  std::size_t probes = 0;
  std::size_t bit_flipped = 0;  // exactly the probed block's secret bit decoded wrong
  std::size_t rejected = 0;     // open() refused

  bool ok() const { return opened == trials && bit_flipped == probes && rejected == probes; }
};

// Commit/open trials in template space with at most t flips per block, then
// the exhaustive over-bound probes.
CodecFuzzSummary fuzz_codec(std::size_t trials, const CodecParams& params, Rng& rng);

}  // namespace fcauth::bio

#include "fcauth/biofuzz.hpp"

#include <algorithm>
#include <bit>
#include <numeric>
#include <vector>

namespace fcauth::bio {

void CodecParams::validate() const {
  if (repetition < 3 || repetition % 2 == 0) {
    throw UsageError("codec.r must be odd and >= 3, got " + std::to_string(repetition));
  }
  if (secret_bits == 0) throw UsageError("bio.secret_bits must be positive");
}

RepetitionCodec::RepetitionCodec(CodecParams params) : params_(params) { params_.validate(); }

BitString RepetitionCodec::encode(const BitString& secret) const {
  if (secret.size() != params_.secret_bits) {
    throw UsageError("ecc_encode: secret must be " + std::to_string(params_.secret_bits) + " bits");
  }
  const std::size_t r = params_.repetition;
  BitString out(params_.codeword_bits());
  for (std::size_t i = 0; i < secret.size(); ++i) {
    if (!secret.get(i)) continue;
    for (std::size_t j = 0; j < r; ++j) out.set(i * r + j, true);
  }
  return out;
}

BitString RepetitionCodec::decode(const BitString& noisy) const {
  if (noisy.size() != params_.codeword_bits()) {
    throw UsageError("ecc_decode: input must be " + std::to_string(params_.codeword_bits()) + " bits");
  }
  const std::size_t r = params_.repetition;
  BitString out(params_.secret_bits);
  for (std::size_t i = 0; i < params_.secret_bits; ++i) {
    std::size_t ones = 0;
    for (std::size_t j = 0; j < r; ++j) ones += noisy.get(i * r + j) ? 1 : 0;
    out.set(i, ones > r / 2);
  }
  return out;
}

TransformParameter TransformParameter::generate(Rng& rng) {
  TransformParameter tp;
  const auto b = rng.bytes(tp.seed.size());
  std::copy(b.begin(), b.end(), tp.seed.begin());
  return tp;
}

namespace {

// SHA-1 keystream keyed by the transform parameter plus a 4-byte domain label.
Bytes keystream(const TransformParameter& tp, std::uint32_t label, std::size_t n) {
  std::array<std::uint8_t, Digest::kBytes> key{};
  std::copy(tp.seed.begin(), tp.seed.end(), key.begin());
  key[16] = static_cast<std::uint8_t>(label >> 24);
  key[17] = static_cast<std::uint8_t>(label >> 16);
  key[18] = static_cast<std::uint8_t>(label >> 8);
  key[19] = static_cast<std::uint8_t>(label);
  return xor_pad(Bytes(n, 0), Digest(key));
}

constexpr std::uint32_t kPermLabel = 0x7065726d;  // "perm"
constexpr std::uint32_t kPadLabel = 0x70616420;   // "pad "

std::vector<std::size_t> permutation(const TransformParameter& tp, std::size_t n) {
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  const Bytes ks = keystream(tp, kPermLabel, 4 * n);
  for (std::size_t i = n; i > 1; --i) {
    const std::size_t k = 4 * (n - i);
    const std::uint32_t draw = std::uint32_t{ks[k]} << 24 | std::uint32_t{ks[k + 1]} << 16 |
                               std::uint32_t{ks[k + 2]} << 8 | ks[k + 3];
    std::swap(perm[i - 1], perm[draw % i]);
  }
  return perm;
}

}  // namespace

CancelableTemplate transform(const BiometricSample& sample, const TransformParameter& tp) {
  const std::size_t n = sample.bits.size();
  if (n == 0) throw UsageError("transform: empty biometric sample");
  const auto perm = permutation(tp, n);
  const BitString pad((keystream(tp, kPadLabel, (n + 7) / 8)), n);
  BitString out(n);
  for (std::size_t i = 0; i < n; ++i) out.set(perm[i], sample.bits.get(i));
  out ^= pad;
  return CancelableTemplate{std::move(out)};
}

HelperData commit(const CancelableTemplate& ct, const BitString& secret, const BlockCodec& codec) {
  if (auto* c = detail::active_counters()) ++c->fcs;
  const BitString codeword = codec.encode(secret);
  if (ct.bits.size() != codeword.size()) {
    throw UsageError("commit: template is " + std::to_string(ct.bits.size()) + " bits, codeword is " +
                     std::to_string(codeword.size()));
  }
  return HelperData{ct.bits ^ codeword, hash(secret)};
}

Result<BitString> open(const HelperData& helper, const CancelableTemplate& query, const BlockCodec& codec) {
  if (auto* c = detail::active_counters()) ++c->fcs;
  if (query.bits.size() != helper.offset.size()) throw UsageError("open: template length does not match helper data");
  BitString secret = codec.decode(helper.offset ^ query.bits);
  if (hash(secret) != helper.check) return reject(Reason::kBiometricMismatch, "fuzzy commitment did not open");
  return secret;
}

CancelableTemplate enrolled_template(const HelperData& helper, const BitString& secret, const BlockCodec& codec) {
  return CancelableTemplate{helper.offset ^ codec.encode(secret)};
}

BiometricSample random_sample(std::size_t nbits, Rng& rng) {
  return BiometricSample{rng.bits(nbits), BiometricSample::Label::kEnrollment};
}

BiometricSample noisy_copy(const BiometricSample& base, double flip_prob, Rng& rng) {
  BiometricSample out{base.bits, BiometricSample::Label::kQuery};
  for (std::size_t i = 0; i < out.bits.size(); ++i) {
    if (rng.unit() < flip_prob) out.bits.flip(i);
  }
  return out;
}

BiometricSample bounded_noise_copy(const BiometricSample& base, std::size_t block_bits, std::size_t per_block,
                                   Rng& rng) {
  if (block_bits == 0 || per_block > block_bits) throw UsageError("bounded_noise_copy: bad block geometry");
  BiometricSample out{base.bits, BiometricSample::Label::kQuery};
  std::vector<std::size_t> idx(block_bits);
  for (std::size_t start = 0; start + block_bits <= out.bits.size(); start += block_bits) {
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    const std::size_t flips = rng.uniform(per_block + 1);
    for (std::size_t j = 0; j < flips; ++j) {
      const std::size_t pick = j + rng.uniform(block_bits - j);
      std::swap(idx[j], idx[pick]);
      out.bits.flip(start + idx[j]);
    }
  }
  return out;
}

CodecFuzzSummary fuzz_codec(std::size_t trials, const CodecParams& params, Rng& rng) {
  CodecFuzzSummary out;
  const RepetitionCodec codec(params);
  for (std::size_t i = 0; i < trials; ++i) {
    const BitString secret = rng.bits(params.secret_bits);
    const CancelableTemplate ct{rng.bits(params.codeword_bits())};
    const auto helper = commit(ct, secret, codec);
    const BiometricSample noisy =
        bounded_noise_copy(BiometricSample{ct.bits}, codec.block_bits(), codec.correctable_per_block(), rng);
    auto opened = open(helper, CancelableTemplate{noisy.bits}, codec);
    ++out.trials;
    if (opened && *opened == secret) ++out.opened;
  }

  const CodecParams toy{params.repetition, 8};
  const RepetitionCodec small(toy);
  const std::size_t r = toy.repetition;
  const std::size_t k = toy.correctable() + 1;
  // Every k-subset of block positions, as a bit mask over r positions.
  std::vector<std::uint32_t> subsets;
  for (std::uint32_t m = 0; m < (1u << r); ++m) {
    if (static_cast<std::size_t>(std::popcount(m)) == k) subsets.push_back(m);
  }
  for (std::size_t block = 0; block < toy.secret_bits; ++block) {
    for (std::uint32_t mask : subsets) {
      const BitString secret = rng.bits(toy.secret_bits);
      const CancelableTemplate ct{rng.bits(toy.codeword_bits())};
      const auto helper = commit(ct, secret, small);
      BitString query = ct.bits;
      for (std::size_t j = 0; j < r; ++j) {
        if (mask >> j & 1u) query.flip(block * r + j);
      }
      ++out.probes;
      BitString expected = secret;
      expected.flip(block);
      if (small.decode(helper.offset ^ query) == expected) ++out.bit_flipped;
      if (!open(helper, CancelableTemplate{query}, small)) ++out.rejected;
    }
  }
  return out;
}

}  // namespace fcauth::bio

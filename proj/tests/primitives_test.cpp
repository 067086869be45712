#include "fcauth/primitives.hpp"

#include <gtest/gtest.h>

namespace fcauth {
namespace {

// Reference values below were computed outside this code base: SHA-1 over
// the length-framed inputs, a separate MT19937-64 implementation, and the
// AES-256-GCM all-zero vector.

TEST(Hex, RoundTripAndRejectsBadInput) {
  const Bytes b = {0x00, 0x7f, 0x80, 0xff};
  EXPECT_EQ(to_hex(b), "007f80ff");
  EXPECT_EQ(from_hex("007F80ff"), b);
  EXPECT_THROW(from_hex("abc"), UsageError);
  EXPECT_THROW(from_hex("zz"), UsageError);
}

TEST(BitString, PackingIsMsbFirstWithMaskedTail) {
  auto b = BitString::from_binary("101");
  EXPECT_EQ(b.size(), 3u);
  EXPECT_EQ(b.bytes(), Bytes{0xa0});
  const BitString dirty(Bytes{0xbf}, 3);
  EXPECT_EQ(dirty, b);
  EXPECT_EQ(b.to_binary(), "101");
  EXPECT_THROW(BitString::from_binary("10x"), UsageError);
  EXPECT_THROW(BitString(Bytes{1, 2}, 3), UsageError);
}

TEST(BitString, XorRequiresEqualLength) {
  const auto a = BitString::from_binary("1100");
  const auto b = BitString::from_binary("1010");
  EXPECT_EQ((a ^ b).to_binary(), "0110");
  EXPECT_EQ(hamming_distance(a, b), 2u);
  EXPECT_THROW(a ^ BitString::from_binary("101"), UsageError);
}

TEST(BitString, SliceAndFlip) {
  auto b = BitString::from_binary("0011001");
  EXPECT_EQ(b.slice(2, 3).to_binary(), "110");
  b.flip(0);
  EXPECT_EQ(b.to_binary(), "1011001");
  EXPECT_EQ(b.popcount(), 4u);
  EXPECT_THROW(b.get(7), UsageError);
  EXPECT_THROW(b.slice(5, 3), UsageError);
}

TEST(BitString, XorAlgebraHolds) {
  Rng rng(3);
  for (int i = 0; i < 50; ++i) {
    const std::size_t n = 1 + rng.uniform(300);
    const auto a = rng.bits(n);
    const auto b = rng.bits(n);
    const auto c = rng.bits(n);
    EXPECT_EQ(a ^ b ^ b, a);
    EXPECT_EQ((a ^ b) ^ c, a ^ (b ^ c));
    EXPECT_EQ(a ^ b, b ^ a);
    EXPECT_EQ((a ^ a).popcount(), 0u);
  }
}

TEST(Hash, MatchesFramedSha1Reference) {
  EXPECT_EQ(h(std::string("abc")).hex(), "2b246d37c4869e96ea0931b8d42613d621052aed");
  EXPECT_EQ(h(std::string("abc"), std::string("")).hex(), "2ed698167b540677f35474a9dbd54f9738a18260");
  EXPECT_EQ(h(Identity{7}, Timestamp{9}).hex(), "6fb49338cd1f96bc637b9cf1fca443d47238f39f");
}

TEST(Hash, FramingSeparatesFieldBoundaries) {
  EXPECT_EQ(h(std::string("ab"), std::string("c")).hex(), "79630bf9bddc2846fd17f93e7cfb9948bf3fb6b2");
  EXPECT_NE(h(std::string("ab"), std::string("c")), h(std::string("a"), std::string("bc")));
}

TEST(Hash, BitStringBindsLength) {
  EXPECT_EQ(hash(BitString::from_binary("101")).hex(), "4e0cad02e69f8a91c1cced1512970aa8def876c1");
  EXPECT_NE(hash(BitString::from_binary("101")), hash(BitString::from_binary("1010")));
}

TEST(Digest, SizeChecksAndXor) {
  EXPECT_THROW(Digest::from_bytes(Bytes(19)), UsageError);
  EXPECT_THROW(Digest::from_bits(BitString(159)), UsageError);
  Rng rng(1);
  const Digest a = rng.digest();
  EXPECT_TRUE((a ^ a).is_zero());
  EXPECT_EQ(Digest::from_bits(a.bits()), a);
}

TEST(Identity, WidenNarrowRoundTrip) {
  const Identity id{0xdeadbeef};
  const Digest w = id.widen();
  EXPECT_EQ(w.hex(), "00000000000000000000000000000000deadbeef");
  auto back = Identity::narrow(w);
  ASSERT_TRUE(back);
  EXPECT_EQ(*back, id);
  Digest bad = w;
  bad ^= Digest::from_bytes(from_hex("0100000000000000000000000000000000000000"));
  EXPECT_FALSE(Identity::narrow(bad));
  EXPECT_FALSE(Identity{0}.valid());
}

TEST(Delay, WindowIsInclusiveAndRejectsTimeTravel) {
  EXPECT_TRUE(check_delay(Timestamp{10}, Timestamp{10}, 5));
  EXPECT_TRUE(check_delay(Timestamp{10}, Timestamp{15}, 5));
  EXPECT_FALSE(check_delay(Timestamp{10}, Timestamp{16}, 5));
  EXPECT_FALSE(check_delay(Timestamp{10}, Timestamp{9}, 5));
}

TEST(SimClock, NeverMovesBackwards) {
  SimClock c(5);
  c.advance_to(Timestamp{3});
  EXPECT_EQ(c.now().ticks, 5u);
  c.advance(2);
  c.advance_to(Timestamp{9});
  EXPECT_EQ(c.now().ticks, 9u);
}

TEST(Rng, MatchesIndependentMt19937_64) {
  Rng rng(42);
  EXPECT_EQ(to_hex(rng.bytes(8)), "d6e2e56e7ddf51c1");
  Rng def(5489);
  for (int i = 0; i < 9999; ++i) def.next_u64();
  EXPECT_EQ(def.next_u64(), 9981545732273789042ULL);
}

TEST(Rng, UniformStaysInRangeAndIdentityNonZero) {
  Rng rng(9);
  for (int i = 0; i < 1000; ++i) {
    EXPECT_LT(rng.uniform(7), 7u);
    EXPECT_TRUE(rng.identity().valid());
    const double u = rng.unit();
    EXPECT_GE(u, 0.0);
    EXPECT_LT(u, 1.0);
  }
  EXPECT_THROW(rng.uniform(0), UsageError);
}

TEST(Encryption, DecryptsKnownAnswerVector) {
  const MasterKey zero{};
  const Ciphertext ct{from_hex("000000000000000000000000"
                               "cea7403d4d606b6e074ec5d3baf39d18"
                               "d0d1c8a799996bf0265b98b5d48ab919")};
  auto pt = decrypt(zero, ct);
  ASSERT_TRUE(pt);
  EXPECT_EQ(*pt, Bytes(16, 0));
}

TEST(Encryption, RoundTripAndTamperDetection) {
  Rng rng(11);
  const MasterKey k = MasterKey::generate(rng, KeyRole::kRcSecret);
  const Bytes msg = rng.bytes(37);
  const Ciphertext ct = encrypt(k, msg, rng);
  EXPECT_EQ(ct.bytes.size(), msg.size() + kCiphertextOverhead);
  EXPECT_EQ(ct.declared_wire_bits, 256u);
  EXPECT_EQ(*decrypt(k, ct), msg);
  for (std::size_t i = 0; i < ct.bytes.size(); ++i) {
    Ciphertext bad = ct;
    bad.bytes[i] ^= 0x01;
    auto r = decrypt(k, bad);
    ASSERT_FALSE(r) << "byte " << i;
    EXPECT_EQ(r.reason(), Reason::kDecryptFailed);
  }
  const MasterKey other = MasterKey::generate(rng, KeyRole::kRcSecret);
  EXPECT_FALSE(decrypt(other, ct));
  EXPECT_FALSE(decrypt(k, Ciphertext{Bytes(10)}));
}

TEST(XorPad, MatchesReferenceKeystreamAndIsAnInvolution) {
  const Digest mask = Digest::from_bytes(Bytes(20, 0x11));
  EXPECT_EQ(to_hex(xor_pad(Bytes(25, 0), mask)), "8354ceff5a4675dc1b1bede24f3b445d8074caf9c21e476335");
  Rng rng(4);
  const Bytes data = rng.bytes(52);
  EXPECT_EQ(xor_pad(xor_pad(data, mask), mask), data);
}

TEST(Counters, ScopesNestAndCountPrimitives) {
  Rng rng(2);
  PrimitiveCounters outer, inner;
  {
    CounterScope a(outer);
    h(Identity{1});
    {
      CounterScope b(inner);
      h(Identity{2});
      const MasterKey k = MasterKey::generate(rng, KeyRole::kRcSecret);
      auto ct = encrypt(k, Bytes{1, 2, 3}, rng);
      (void)decrypt(k, ct);
    }
    hash(BitString(4));
  }
  h(Identity{3});  // outside any scope
  EXPECT_EQ(outer, (PrimitiveCounters{2, 0, 0, 0}));
  EXPECT_EQ(inner, (PrimitiveCounters{1, 1, 1, 0}));
}

}  // namespace
}  // namespace fcauth

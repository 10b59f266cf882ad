#include "ashdp/crypto.hpp"
#include "doctest.h"

using namespace ashdp;
using namespace ashdp::crypto;

TEST_CASE("mock suite roundtrip and size model") {
  auto suite = CipherSuite::mock();
  Rng rng(1);
  KeyPair kd = suite.keygen(256, rng);
  KeyPair ks = suite.keygen(256, rng);
  CHECK(kd.key_id != ks.key_id);  // freshness

  auto ct = suite.encrypt_layers(7, {&kd, &ks, &kd}, rng);
  CHECK(ct.layers == 3);
  CHECK(suite.ciphertext_size_bits(ct) == 2072.0);

  auto peel1 = suite.decrypt_layer(ct, kd);
  REQUIRE_FALSE(peel1.done);
  CHECK(suite.ciphertext_size_bits(peel1.inner) == 1392.0);
  auto peel2 = suite.decrypt_layer(peel1.inner, ks);
  REQUIRE_FALSE(peel2.done);
  CHECK(suite.ciphertext_size_bits(peel2.inner) == 712.0);
  auto peel3 = suite.decrypt_layer(peel2.inner, kd);
  REQUIRE(peel3.done);
  CHECK(peel3.payload == 7);
}

TEST_CASE("mock suite rejects wrong keys and exhausted layers") {
  auto suite = CipherSuite::mock();
  Rng rng(2);
  KeyPair kd = suite.keygen(256, rng);
  KeyPair ks = suite.keygen(256, rng);
  auto ct = suite.encrypt_layers(3, {&kd, &ks}, rng);
  CHECK_THROWS_AS(suite.decrypt_layer(ct, kd), CryptoError);  // ks is outermost
  auto inner = suite.decrypt_layer(ct, ks);
  auto done = suite.decrypt_layer(inner.inner, kd);
  CHECK(done.done);
  CHECK_THROWS_AS(suite.decrypt_layer(done.inner, kd), CryptoError);  // underflow
}

TEST_CASE("configurable size model") {
  SizeModel model{100, 250, 400};
  auto suite = CipherSuite::mock(model);
  Rng rng(3);
  KeyPair k = suite.keygen(256, rng);
  auto ct = suite.encrypt_layers(1, {&k}, rng);
  CHECK(suite.ciphertext_size_bits(ct) == 100.0);
  CHECK(suite.size_bits_for_layers(2) == 250.0);
  SizeModel bad{500, 250, 400};
  CHECK_THROWS(CipherSuite::mock(bad));
}

TEST_CASE("ecies suite matches the published sizes") {
  auto suite = CipherSuite::ecies();
  Rng rng(4);
  KeyPair kd = suite.keygen(256, rng);
  KeyPair ks = suite.keygen(256, rng);
  CHECK_THROWS_AS(suite.keygen(128, rng), CryptoError);

  auto single = suite.encrypt_layers(42, {&kd}, rng);
  auto dbl = suite.encrypt_layers(42, {&kd, &ks}, rng);
  auto triple = suite.encrypt_layers(42, {&kd, &ks, &kd}, rng);
  CHECK(suite.ciphertext_size_bits(single) == 712.0);
  CHECK(suite.ciphertext_size_bits(dbl) == 1392.0);
  CHECK(suite.ciphertext_size_bits(triple) == 2072.0);

  // Nondecreasing in layer count.
  CHECK(suite.size_bits_for_layers(1) <= suite.size_bits_for_layers(2));
  CHECK(suite.size_bits_for_layers(2) <= suite.size_bits_for_layers(3));

  // Triple-encrypt then peel d -> s -> d.
  auto p1 = suite.decrypt_layer(triple, kd);
  REQUIRE_FALSE(p1.done);
  auto p2 = suite.decrypt_layer(p1.inner, ks);
  REQUIRE_FALSE(p2.done);
  auto p3 = suite.decrypt_layer(p2.inner, kd);
  REQUIRE(p3.done);
  CHECK(p3.payload == 42);
}

TEST_CASE("ecies encryptions are randomized and authenticate the key") {
  auto suite = CipherSuite::ecies();
  Rng rng(5);
  KeyPair kd = suite.keygen(256, rng);
  KeyPair other = suite.keygen(256, rng);
  auto a = suite.encrypt_layers(9, {&kd}, rng);
  auto b = suite.encrypt_layers(9, {&kd}, rng);
  CHECK(a.bytes != b.bytes);  // IND-CPA schemes are randomized
  CHECK_THROWS_AS(suite.decrypt_layer(a, other), CryptoError);
}

TEST_CASE("replacement is size-indistinguishable") {
  Rng rng(6);
  for (auto suite : {CipherSuite::mock(), CipherSuite::ecies()}) {
    KeyPair kd = suite.keygen(256, rng);
    KeyPair ks = suite.keygen(256, rng);
    auto genuine = suite.encrypt_layers(123, {&kd, &ks}, rng);
    auto replaced = suite.encrypt_layers(kBottom, {&kd, &ks}, rng);
    CHECK(genuine.layers == replaced.layers);
    CHECK(suite.ciphertext_size_bits(genuine) == suite.ciphertext_size_bits(replaced));
  }
}

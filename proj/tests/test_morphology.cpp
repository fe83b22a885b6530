#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "retina/morphology.hpp"
#include "support/oracles.hpp"

using namespace retina;

namespace {

BinaryMask random_mask(int w, int h, double density, uint32_t seed) {
  BinaryMask m(w, h);
  std::mt19937 rng(seed);
  std::bernoulli_distribution bit(density);
  for (auto& b : m.bits) b = bit(rng) ? 1 : 0;
  return m;
}

InterestMap random_map(int w, int h, uint32_t seed) {
  InterestMap m(w, h);
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  for (double& v : m.values) v = uni(rng);
  return m;
}

}  // namespace

TEST_CASE("structuring elements have the expected support", "[morphology]") {
  const auto d1 = StructuringElement::disk(1);
  CHECK(d1.offsets.size() == 5);  // plus shape
  const auto d2 = StructuringElement::disk(2);
  CHECK(d2.offsets.size() == 13);
  const auto s5 = StructuringElement::square(5);
  CHECK(s5.offsets.size() == 25);
  CHECK_THROWS_AS(StructuringElement::square(4), ArgumentError);
  const auto r = StructuringElement::rect(7, 3);
  CHECK(r.offsets.size() == 21);
  for (const auto& se : {d1, d2, s5}) {
    bool has_origin = false;
    for (const auto& [dx, dy] : se.offsets) has_origin |= dx == 0 && dy == 0;
    CHECK(has_origin);
  }
}

TEST_CASE("single pixel dilates to a plus with disk(1)", "[morphology]") {
  BinaryMask m(5, 5);
  m.set(2, 2, true);
  const BinaryMask d = dilate(m, StructuringElement::disk(1));
  CHECK(d.count() == 5);
  CHECK(d.at(2, 2));
  CHECK(d.at(1, 2));
  CHECK(d.at(3, 2));
  CHECK(d.at(2, 1));
  CHECK(d.at(2, 3));
}

TEST_CASE("constant maps are fixed under dilation and erosion", "[morphology]") {
  InterestMap m(9, 9, 0.7);
  for (const auto& se : {StructuringElement::disk(2), StructuringElement::square(3)}) {
    const InterestMap d = dilate(m, se);
    const InterestMap e = erode(m, se);
    for (size_t i = 0; i < m.values.size(); ++i) {
      REQUIRE(d.values[i] == 0.7);
      REQUIRE(e.values[i] == 0.7);
    }
  }
}

TEST_CASE("binary operators match the brute-force oracle", "[morphology]") {
  const auto se = StructuringElement::disk(2);
  for (uint32_t seed = 0; seed < 20; ++seed) {
    const BinaryMask m = random_mask(8, 8, 0.4, seed);
    CHECK(dilate(m, se).bits == oracle::dilate(m, se).bits);
    CHECK(erode(m, se).bits == oracle::erode(m, se).bits);
  }
}

TEST_CASE("grayscale operators match the brute-force oracle", "[morphology]") {
  for (const auto& se : {StructuringElement::disk(2), StructuringElement::rect(4, 2)}) {
    for (uint32_t seed = 100; seed < 110; ++seed) {
      const InterestMap m = random_map(10, 9, seed);
      CHECK(dilate(m, se).values == oracle::dilate(m, se).values);
      CHECK(erode(m, se).values == oracle::erode(m, se).values);
    }
  }
}

TEST_CASE("opening removes isolated pixels, closing bridges gaps", "[morphology]") {
  BinaryMask lone(9, 9);
  lone.set(4, 4, true);
  CHECK(open(lone, StructuringElement::disk(2)).count() == 0);

  // Two blocks separated by a 2-column slit narrower than the SE: the slit
  // is sealed, and closing is extensive (input pixels all survive).
  BinaryMask slit(12, 9);
  for (int y = 0; y < 9; ++y) {
    for (int x = 0; x <= 3; ++x) slit.set(x, y, true);
    for (int x = 6; x <= 11; ++x) slit.set(x, y, true);
  }
  const BinaryMask closed = close(slit, StructuringElement::disk(2));
  for (int y = 2; y <= 6; ++y) {
    CHECK(closed.at(4, y));
    CHECK(closed.at(5, y));
  }
  for (size_t i = 0; i < slit.bits.size(); ++i) REQUIRE(closed.bits[i] >= slit.bits[i]);
}

TEST_CASE("morphology laws hold on random inputs", "[morphology][laws]") {
  const auto se = StructuringElement::disk(2);
  for (uint32_t seed = 0; seed < 25; ++seed) {
    const BinaryMask m = random_mask(12, 12, 0.45, seed);
    const BinaryMask o = open(m, se);
    const BinaryMask c = close(m, se);

    // idempotence
    CHECK(open(o, se).bits == o.bits);
    CHECK(close(c, se).bits == c.bits);

    // ordering erode <= open <= id <= close <= dilate
    const BinaryMask er = erode(m, se), di = dilate(m, se);
    for (size_t i = 0; i < m.bits.size(); ++i) {
      REQUIRE(er.bits[i] <= o.bits[i]);
      REQUIRE(o.bits[i] <= m.bits[i]);
      REQUIRE(m.bits[i] <= c.bits[i]);
      REQUIRE(c.bits[i] <= di.bits[i]);
    }

    // complement duality: dilate(m) == ~erode(~m)
    BinaryMask inv(m.width, m.height);
    for (size_t i = 0; i < m.bits.size(); ++i) inv.bits[i] = m.bits[i] ? 0 : 1;
    const BinaryMask er_inv = erode(inv, se);
    for (size_t i = 0; i < m.bits.size(); ++i)
      REQUIRE(di.bits[i] == (er_inv.bits[i] ? 0 : 1));
  }

  for (uint32_t seed = 50; seed < 60; ++seed) {
    const InterestMap m = random_map(12, 12, seed);
    const InterestMap o = open(m, se), c = close(m, se);
    const InterestMap er = erode(m, se), di = dilate(m, se);
    CHECK(open(o, se).values == o.values);
    CHECK(close(c, se).values == c.values);
    for (size_t i = 0; i < m.values.size(); ++i) {
      REQUIRE(er.values[i] <= o.values[i]);
      REQUIRE(o.values[i] <= m.values[i]);
      REQUIRE(m.values[i] <= c.values[i]);
      REQUIRE(c.values[i] <= di.values[i]);
    }

    // grayscale duality: dilate(m) == -erode(-m) for symmetric SEs
    InterestMap neg(m.width, m.height);
    for (size_t i = 0; i < m.values.size(); ++i) neg.values[i] = -m.values[i];
    const InterestMap er_neg = erode(neg, se);
    for (size_t i = 0; i < m.values.size(); ++i)
      REQUIRE(di.values[i] == -er_neg.values[i]);

    // monotonicity: m <= m2 => op(m) <= op(m2)
    InterestMap m2 = m;
    std::mt19937 rng(seed + 1);
    std::uniform_real_distribution<double> bump(0.0, 0.5);
    for (double& v : m2.values) v += bump(rng);
    const InterestMap di2 = dilate(m2, se), er2 = erode(m2, se);
    for (size_t i = 0; i < m.values.size(); ++i) {
      REQUIRE(di.values[i] <= di2.values[i]);
      REQUIRE(er.values[i] <= er2.values[i]);
    }
  }
}

TEST_CASE("enhancement is extensive and fills pits", "[morphology]") {
  InterestMap flat(11, 11, 0.3);
  const InterestMap ef = enhance_interest_map(flat);
  for (double v : ef.values) REQUIRE(v == 0.3);

  InterestMap plateau(9, 9, 0.0);
  for (int y = 1; y <= 7; ++y)
    for (int x = 1; x <= 7; ++x) plateau.at(x, y) = 0.8;
  plateau.at(4, 4) = 0.1;  // one-pixel pit inside the plateau
  const InterestMap e = enhance_interest_map(plateau);
  CHECK(e.at(4, 4) == Catch::Approx(0.8));
  for (size_t i = 0; i < plateau.values.size(); ++i)
    REQUIRE(e.values[i] >= plateau.values[i]);

  InterestMap m = random_map(15, 13, 7);
  const InterestMap em = enhance_interest_map(m);
  for (size_t i = 0; i < m.values.size(); ++i) REQUIRE(em.values[i] >= m.values[i]);
}

#include "support.hpp"

#include "vinn/error.hpp"
#include "vinn/mask.hpp"

#include <gtest/gtest.h>

using namespace vinn;

TEST(PackBits, KnownBytes) {
    const std::vector<std::uint8_t> bits{1, 0, 1, 1, 0, 0, 0, 1, 1};
    const auto want = vt::pack_oracle(bits);
    ASSERT_EQ(want, (std::vector<std::uint8_t>{0x8D, 0x01}));
    EXPECT_EQ(pack_bits(bits), want);
    EXPECT_EQ(unpack_bits(want, bits.size()), bits);
}

TEST(PackBits, MatchesOracleAndRoundTrips) {
    Xoshiro256 rng(21);
    for (int trial = 0; trial < 300; ++trial) {
        std::vector<std::uint8_t> bits(rng.below(70));
        for (auto& b : bits) b = static_cast<std::uint8_t>(rng.below(2));
        const auto packed = pack_bits(bits);
        ASSERT_EQ(packed, vt::pack_oracle(bits));
        ASSERT_EQ(unpack_bits(packed, bits.size()), bits);
        ASSERT_EQ(pack_bits(unpack_bits(packed, bits.size())), packed);
    }
}

TEST(PackBits, RejectsBadInput) {
    EXPECT_THROW(unpack_bits(std::vector<std::uint8_t>{0xFF}, 9), Error);
    // bits past the count must be zero
    EXPECT_THROW(unpack_bits(std::vector<std::uint8_t>{0x80}, 3), Error);
}

TEST(Masks, FullMasksCoverWeightedLayers) {
    Model m{"m", {3}, {Layer::dense(Tensor({4, 3}), Tensor({4})), Layer::relu(), Layer::dense(Tensor({2, 4}), Tensor({2}))}};
    const auto masks = full_masks(m);
    ASSERT_EQ(masks.size(), 2u);
    EXPECT_EQ(masks.at(0).bits.shape, (Shape{4, 3}));
    EXPECT_EQ(masks.at(2).kept_count(), 8u);
    EXPECT_EQ(masks.at(2).pruned_count(), 0u);
}

TEST(Masks, CongruenceChecked) {
    Model m{"m", {3}, {Layer::dense(Tensor({4, 3}), Tensor({4})), Layer::relu(), Layer::dense(Tensor({2, 4}), Tensor({2}))}};
    auto masks = full_masks(m);
    masks.at(2).bits = MaskBits({4, 2}, 1);
    EXPECT_THROW(check_congruent(m, masks), ShapeError);
    masks = full_masks(m);
    masks[1] = PruneMask{1, MaskBits({1}, 1)};
    EXPECT_THROW(check_congruent(m, masks), ShapeError);
}

TEST(Masks, ApplyMaskZeroesPruned) {
    const Tensor w({2, 2}, {1, -2, 3, -4});
    const auto out = apply_mask(w, MaskBits({2, 2}, {1, 0, 0, 1}));
    EXPECT_EQ(out.data, (std::vector<float>{1, 0, 0, -4}));
}

TEST(Masks, HashSeesEveryBit) {
    Model m{"m", {3}, {Layer::dense(Tensor({4, 3}), Tensor({4}))}};
    auto a = full_masks(m);
    auto b = a;
    EXPECT_EQ(mask_hash(a), mask_hash(b));
    b.at(0).bits[11] = 0;
    EXPECT_NE(mask_hash(a), mask_hash(b));
}

TEST(Masks, ChannelFullyPruned) {
    PruneMask mask{0, MaskBits({2, 1, 2, 2}, {0, 0, 0, 0, 1, 0, 0, 0})};
    EXPECT_TRUE(channel_fully_pruned(mask, 0));
    EXPECT_FALSE(channel_fully_pruned(mask, 1));
}

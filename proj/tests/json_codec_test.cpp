#include "vinn/error.hpp"
#include "vinn/json_codec.hpp"

#include <gtest/gtest.h>

using namespace vinn;
using nlohmann::json;

namespace {

std::string field_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const InvalidArgument& e) {
        return e.field();
    }
    return "<none>";
}

}  // namespace

TEST(Codec, SettingsParse) {
    const auto s = parse_settings(json::parse(R"({"algorithm":"lap-backward","global_ratio":0.25,"per_layer_ratio":{"2":0.75}})"));
    EXPECT_EQ(s.algorithm, PruneAlgorithm::lap_backward);
    EXPECT_EQ(s.global_ratio, 0.25);
    EXPECT_EQ(s.per_layer_ratio, (std::map<std::size_t, double>{{2, 0.75}}));
    EXPECT_EQ(parse_settings(json::object()), PruneSettings::suggested());
    const json round = s;
    EXPECT_EQ(parse_settings(round), s);
}

TEST(Codec, SettingsFieldErrors) {
    EXPECT_EQ(field_of([] { parse_settings(json::parse(R"({"algorithm":"nope"})")); }), "algorithm");
    EXPECT_EQ(field_of([] { parse_settings(json::parse(R"({"global_ratio":"x"})")); }), "global_ratio");
    EXPECT_EQ(field_of([] { parse_settings(json::parse(R"({"global_ratio":1.01})")); }), "global_ratio");
    EXPECT_EQ(field_of([] { parse_settings(json::parse(R"({"per_layer_ratio":{"a":0.1}})")); }), "per_layer_ratio.a");
    EXPECT_EQ(field_of([] { parse_settings(json::parse(R"({"per_layer_ratio":{"0":-1}})")); }), "per_layer_ratio.0");
    EXPECT_EQ(field_of([] { parse_settings(json::array()); }), "settings");
}

TEST(Codec, EditsParse) {
    const auto edits = parse_edits(json::parse(R"([
        {"layer_index":0,"kind":"prune_channel","channel":3},
        {"layer_index":2,"kind":"restore_rect","rect":[4,5,1,2]},
        {"layer_index":2,"kind":"prune_indices","indices":[7,1]}])"));
    ASSERT_EQ(edits.size(), 3u);
    EXPECT_EQ(edits[0], MaskEdit::prune_channel(0, 3));
    EXPECT_EQ(edits[1], MaskEdit::restore_rect(2, {4, 5, 1, 2}));
    EXPECT_EQ(edits[2], MaskEdit::prune_indices(2, {7, 1}));
    for (const auto& e : edits) {
        const json j = e;
        EXPECT_EQ(parse_edit(j), e);
    }
}

TEST(Codec, EditFieldErrors) {
    EXPECT_EQ(field_of([] { parse_edits(json::parse(R"([{"layer_index":0,"kind":"prune_channel","channel":1},{"layer_index":0,"kind":"zap"}])")); }),
              "edits[1].kind");
    EXPECT_EQ(field_of([] { parse_edits(json::parse(R"([{"layer_index":-1,"kind":"prune_channel","channel":1}])")); }),
              "edits[0].layer_index");
    EXPECT_EQ(field_of([] { parse_edits(json::parse(R"([{"layer_index":0,"kind":"prune_rect","rect":[1,2,3]}])")); }),
              "edits[0].rect");
    EXPECT_EQ(field_of([] { parse_edits(json::object()); }), "edits");
}

TEST(Codec, Hex) {
    const std::vector<std::uint8_t> bytes{0x00, 0x8d, 0xff, 0x01};
    EXPECT_EQ(to_hex(bytes), "008dff01");
    EXPECT_EQ(from_hex("008DFF01"), bytes);
    EXPECT_THROW(from_hex("abc"), Error);
    EXPECT_THROW(from_hex("zz"), Error);
}

TEST(Codec, RunLength) {
    const std::vector<std::uint8_t> ones(40, 1);
    EXPECT_EQ(rle_encode(ones), json::parse("[[1,40]]"));
    const std::vector<std::uint8_t> mixed{1, 1, 0, 0, 0, 1};
    EXPECT_EQ(rle_encode(mixed), json::parse("[[1,2],[0,3],[1,1]]"));
    EXPECT_EQ(rle_encode({}), json::array());
}

TEST(Codec, LayoutCarriesGeometry) {
    MaskViewLayout l{4, 18, 2, 3, 3, 3};
    const auto j = layout_json(l);
    EXPECT_EQ(j.at("rows"), 4);
    EXPECT_EQ(j.at("cols"), 18);
    EXPECT_EQ(j.at("pixel_rows"), 12);
    EXPECT_EQ(j.at("pixel_cols"), 6);
    ASSERT_EQ(j.at("channel_row_spans").size(), 4u);
    EXPECT_EQ(j.at("channel_row_spans")[2], json::parse(R"({"channel":2,"row":2,"pixel_row_start":6,"pixel_row_end":8})"));
}

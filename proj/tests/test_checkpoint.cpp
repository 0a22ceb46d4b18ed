#include <gtest/gtest.h>

#include <sstream>

#include "mov/checkpoint.hpp"
#include "mov/data.hpp"

using namespace mov;

namespace {

data::SyntheticConfig tiny_config()
{
    data::SyntheticConfig c;
    c.n_samples = 40;
    c.view_dims = {3, 5};
    c.view_names = {"cc", "mlo"};
    c.seed = 5;
    return c;
}

std::string serialize(const Checkpoint& ckpt)
{
    std::ostringstream out(std::ios::binary);
    write_checkpoint(out, ckpt);
    return out.str();
}

Checkpoint deserialize(const std::string& bytes)
{
    std::istringstream in(bytes, std::ios::binary);
    return read_checkpoint(in);
}

} // namespace

TEST(Checkpoint, RoundTripsEveryModelKind)
{
    const auto data = data::generate_synthetic(tiny_config());
    for (auto text : {"mov", "avg", "concat", "single:1"}) {
        const auto spec = parse_model_spec(text, data.schema);
        ClassifierOptions opts;
        opts.avg_independent = spec.kind == ModelKind::avg_fusion;
        Checkpoint ckpt{make_classifier(spec, data.schema, opts, 21), data.schema, 0.5, 77,
                        data::fit_standardizer(data.samples)};
        const auto back = deserialize(serialize(ckpt));
        EXPECT_EQ(spec_of(back.model), spec) << text;
        EXPECT_EQ(back.schema, data.schema);
        EXPECT_EQ(back.lambda, 0.5);
        EXPECT_EQ(back.seed, 77u);
        EXPECT_EQ(back.standardization, ckpt.standardization);
        if (spec.kind == ModelKind::avg_fusion) EXPECT_TRUE(std::get<AvgFusionModel>(back.model).independent());
        for (const auto& s : data.samples) EXPECT_EQ(predict_proba(back.model, s), predict_proba(ckpt.model, s));
        EXPECT_EQ(serialize(back), serialize(ckpt));
    }
}

TEST(Checkpoint, WithoutStandardization)
{
    const auto data = data::generate_synthetic(tiny_config());
    Checkpoint ckpt{make_classifier({ModelKind::mov, 0}, data.schema, {}, 3), data.schema, 1.0, 0, std::nullopt};
    EXPECT_FALSE(deserialize(serialize(ckpt)).standardization.has_value());
}

TEST(Checkpoint, StartsWithMagic)
{
    const auto data = data::generate_synthetic(tiny_config());
    const auto bytes =
        serialize({make_classifier({ModelKind::concat_fusion, 0}, data.schema, {}, 3), data.schema, 1.0, 0, {}});
    EXPECT_EQ(bytes.substr(0, 4), "MOV1");
}

TEST(Checkpoint, RejectsBadHeader)
{
    EXPECT_THROW((void)deserialize(""), FormatError);
    EXPECT_THROW((void)deserialize("MOV2rest"), FormatError);
    EXPECT_THROW((void)deserialize("{\"json\": true}"), FormatError);
}

TEST(Checkpoint, RejectsEveryTruncation)
{
    const auto data = data::generate_synthetic(tiny_config());
    const auto bytes =
        serialize({make_classifier({ModelKind::mov, 0}, data.schema, {}, 3), data.schema, 1.0, 9,
                   data::fit_standardizer(data.samples)});
    for (std::size_t len = 0; len < bytes.size(); len += 7)
        EXPECT_THROW((void)deserialize(bytes.substr(0, len)), FormatError) << "length " << len;
}

TEST(Checkpoint, RejectsUnknownKindAndHugeFields)
{
    const auto data = data::generate_synthetic(tiny_config());
    auto bytes = serialize({make_classifier({ModelKind::mov, 0}, data.schema, {}, 3), data.schema, 1.0, 9, {}});
    auto bad_kind = bytes;
    bad_kind[4] = 9;
    EXPECT_THROW((void)deserialize(bad_kind), FormatError);
    auto bad_views = bytes;
    bad_views[16] = '\xFF';
    bad_views[17] = '\xFF';
    EXPECT_THROW((void)deserialize(bad_views), FormatError);
}

TEST(Checkpoint, SchemaMismatchIsAFormatError)
{
    const auto data = data::generate_synthetic(tiny_config());
    const Checkpoint ckpt{make_classifier({ModelKind::mov, 0}, data.schema, {}, 3), data.schema, 1.0, 9, {}};
    EXPECT_NO_THROW(require_compatible(ckpt, data.schema));
    auto other = data.schema;
    other.view_dims[1] = 4;
    EXPECT_THROW(require_compatible(ckpt, other), FormatError);
    other = data.schema;
    other.class_names = {"no", "yes"};
    EXPECT_THROW(require_compatible(ckpt, other), FormatError);
}

TEST(Checkpoint, FileRoundTrip)
{
    const auto data = data::generate_synthetic(tiny_config());
    const Checkpoint ckpt{make_classifier({ModelKind::single_view, 0}, data.schema, {}, 3), data.schema, 1.0, 9, {}};
    const auto path = ::testing::TempDir() + "/model.mov1";
    save_checkpoint(path, ckpt);
    const auto back = load_checkpoint(path);
    EXPECT_EQ(serialize(back), serialize(ckpt));
    EXPECT_THROW((void)load_checkpoint(::testing::TempDir() + "/missing.mov1"), FormatError);
}

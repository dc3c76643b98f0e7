#include <gtest/gtest.h>

#include <cmath>
#include <string>

#include "mimoe/errors.hpp"
#include "mimoe/molecule_io.hpp"

using namespace mimoe;

namespace {

int error_line(const std::string& text, bool xyz) {
    try {
        if (xyz) {
            (void)parse_xyz(text);
        } else {
            (void)parse_dataset_text(text);
        }
    } catch (const ParseError& e) {
        return static_cast<int>(e.line());
    }
    return -1;
}

}  // namespace

TEST(Xyz, SingleAtom) {
    const auto c = parse_xyz("1\nmol\nH 0 0 0");
    EXPECT_EQ(c.size(), 1u);
    EXPECT_EQ(c.atom_numbers[0], 1);
    EXPECT_EQ(c.id, "mol");
}

TEST(Xyz, TwoCarbons) {
    const auto c = parse_xyz("2\nm\nC 0 0 0\nC 0 0 1.2\n");
    ASSERT_EQ(c.size(), 2u);
    EXPECT_EQ(c.atom_numbers[1], 6);
    const double d = std::sqrt(std::pow(c.coords[1][2] - c.coords[0][2], 2));
    EXPECT_DOUBLE_EQ(d, 1.2);
}

TEST(Xyz, DuplicateCoordinates) {
    EXPECT_THROW(parse_xyz("2\nm\nC 0 0 0\nC 0 0 0"), ParseError);
    EXPECT_EQ(error_line("2\nm\nC 0 0 0\nC 0 0 0", true), 4);
}

TEST(Xyz, ErrorsNameTheLine) {
    EXPECT_EQ(error_line("2\nm\nC 0 0 0\nXx 0 0 1", true), 4);
    EXPECT_EQ(error_line("2\nm\nC 0 0 nan\nC 0 0 1", true), 3);
    EXPECT_EQ(error_line("3\nm\nC 0 0 0\nC 0 0 1", true), 4);
    EXPECT_EQ(error_line("1\nm\nC 0 0 0\nC 0 0 1", true), 4);
    EXPECT_EQ(error_line("two\nm\nC 0 0 0", true), 1);
}

TEST(Xyz, CaseInsensitiveSymbols) {
    EXPECT_EQ(atomic_number("cl"), 17);
    EXPECT_EQ(atomic_number("CL"), 17);
    EXPECT_EQ(atomic_number("Rn"), 86);
    EXPECT_FALSE(atomic_number("Fr").has_value());
    EXPECT_EQ(element_symbol(8), "O");
}

TEST(Dataset, TwoRegressionLines) {
    const std::string text =
        R"({"id":"a","atoms":[{"symbol":"C","x":0,"y":0,"z":0}],"targets":[1.5]})"
        "\n"
        R"({"id":"b","atoms":[{"Z":8,"x":0,"y":0,"z":0},{"symbol":"H","x":0.9,"y":0,"z":0}],"targets":[-2]})"
        "\n";
    const auto ds = parse_dataset_text(text);
    EXPECT_EQ(ds.size(), 2u);
    EXPECT_EQ(ds.task_count, 1u);
    EXPECT_EQ(ds.task_kind, TaskKind::regression);
    EXPECT_EQ(ds.samples[1].cloud.atom_numbers[0], 8);
    EXPECT_EQ(ds.samples[0].cloud.id, "a");
}

TEST(Dataset, TaskCountMismatch) {
    const std::string text =
        R"({"task_kind":"regression","task_count":1})"
        "\n"
        R"({"id":"a","atoms":[{"symbol":"C","x":0,"y":0,"z":0}],"targets":[1,2]})";
    EXPECT_THROW(parse_dataset_text(text), DataError);
}

TEST(Dataset, EmptyFile) {
    EXPECT_THROW(parse_dataset_text(""), DataError);
    const auto ds = parse_dataset_text(R"({"task_kind":"classification","task_count":3})");
    EXPECT_TRUE(ds.empty());
    EXPECT_EQ(ds.task_count, 3u);
    EXPECT_EQ(ds.task_kind, TaskKind::classification);
}

TEST(Dataset, MalformedLineNumber) {
    const std::string text =
        R"({"id":"a","atoms":[{"symbol":"C","x":0,"y":0,"z":0}],"targets":[1]})"
        "\n"
        "{not json\n";
    EXPECT_EQ(error_line(text, false), 2);
    EXPECT_EQ(error_line(R"({"id":"a","atoms":[{"symbol":"Qq","x":0,"y":0,"z":0}],"targets":[1]})", false), 1);
}

TEST(Dataset, HeaderMustComeFirst) {
    const std::string text =
        R"({"id":"a","atoms":[{"symbol":"C","x":0,"y":0,"z":0}],"targets":[1]})"
        "\n"
        R"({"task_kind":"regression","task_count":1})";
    EXPECT_THROW(parse_dataset_text(text), ParseError);
}

TEST(Dataset, ClassificationMasks) {
    const std::string text =
        R"({"task_kind":"classification","task_count":2})"
        "\n"
        R"({"id":"a","atoms":[{"symbol":"C","x":0,"y":0,"z":0}],"targets":[1,null]})"
        "\n"
        R"({"id":"b","atoms":[{"symbol":"C","x":0,"y":0,"z":0}],"targets":[0,1],"mask":[1,0]})";
    const auto ds = parse_dataset_text(text);
    EXPECT_EQ(ds.samples[0].mask, (std::vector<std::uint8_t>{1, 0}));
    EXPECT_EQ(ds.samples[1].mask, (std::vector<std::uint8_t>{1, 0}));
    EXPECT_EQ(ds.samples[1].targets[1], 0.0);
}

TEST(Dataset, RegressionNeedsFullMask) {
    const std::string text = R"({"id":"a","atoms":[{"symbol":"C","x":0,"y":0,"z":0}],"targets":[null]})";
    EXPECT_THROW(parse_dataset_text(text), DataError);
}

TEST(Dataset, ClassificationLabelsAreBinary) {
    const std::string text =
        R"({"task_kind":"classification","task_count":1})"
        "\n"
        R"({"id":"a","atoms":[{"symbol":"C","x":0,"y":0,"z":0}],"targets":[0.5]})";
    EXPECT_THROW(parse_dataset_text(text), DataError);
}

TEST(Dataset, MissingFileNamesPath) {
    try {
        (void)parse_dataset("/nonexistent/dir/set.jsonl");
        FAIL();
    } catch (const DataError& e) {
        EXPECT_NE(std::string(e.what()).find("/nonexistent/dir/set.jsonl"), std::string::npos);
    }
}

TEST(Dataset, SerializeRoundTrip) {
    const auto ds = parse_dataset(MIMOE_SAMPLE_DATASET);
    ASSERT_EQ(ds.size(), 100u);
    const auto again = parse_dataset_text(serialize_dataset(ds));
    ASSERT_EQ(again.size(), ds.size());
    EXPECT_EQ(again.task_count, ds.task_count);
    for (std::size_t i = 0; i < ds.size(); ++i) {
        EXPECT_EQ(again.samples[i].cloud.id, ds.samples[i].cloud.id);
        EXPECT_EQ(again.samples[i].cloud.atom_numbers, ds.samples[i].cloud.atom_numbers);
        EXPECT_EQ(again.samples[i].cloud.coords, ds.samples[i].cloud.coords);
        EXPECT_EQ(again.samples[i].targets, ds.samples[i].targets);
        EXPECT_EQ(again.samples[i].mask, ds.samples[i].mask);
    }
}

TEST(Dataset, RoundTripMaskedClassification) {
    Dataset ds;
    ds.task_kind = TaskKind::classification;
    ds.task_count = 2;
    LabeledSample s;
    s.cloud.id = "x";
    s.cloud.atom_numbers = {6, 1};
    s.cloud.coords = {{0.1, 0.2, 0.30000000000000004}, {1.0 / 3.0, 0, 0}};
    s.targets = {1, 0};
    s.mask = {1, 0};
    ds.samples.push_back(s);
    const auto again = parse_dataset_text(serialize_dataset(ds));
    EXPECT_EQ(again.samples[0].cloud.coords, s.cloud.coords);
    EXPECT_EQ(again.samples[0].mask, s.mask);
}

TEST(Validate, Invariants) {
    PointCloud c;
    EXPECT_THROW(validate(c), DataError);
    c.atom_numbers = {6};
    c.coords = {{0, 0, 0}, {1, 0, 0}};
    EXPECT_THROW(validate(c), DataError);
    c.atom_numbers = {6, 87};
    EXPECT_THROW(validate(c), DataError);
    c.atom_numbers = {6, 6};
    EXPECT_NO_THROW(validate(c));
    c.coords[1] = {5e-7, 0, 0};
    EXPECT_THROW(validate(c), DataError);
}
